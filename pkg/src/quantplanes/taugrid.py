"""Probability grid construction and the observed-data container.

All curves are tabulated on a finite grid of probabilities: equispaced
points in the body plus geometrically refined tail points so the grid
quantiles cover the data range down to probability 1/(2n) on each side.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameterError
from .geometry import PredictorDomain


@dataclass(frozen=True)
class TauGrid:
    """Sorted probability grid with tail refinement.

    points : strictly increasing probabilities in (0, 1).
    mesh : spacing of the equispaced core.
    anchor_index : index of the point nearest tau0 (the intercept level).
    n_target : the sample size used to extend the tails.
    """

    points: np.ndarray
    mesh: float
    anchor_index: int
    n_target: int

    @property
    def L(self):
        return self.points.shape[0]


def build_tau_grid(n, mesh=0.01, tau0=0.5):
    """Equispaced core grid with geometrically halving tail extensions.

    The core runs from ``mesh`` to ``1 - mesh`` in steps of ``mesh``.  On
    the upper side, points 1 - mesh/2, 1 - mesh/4, ... are appended until
    the last point reaches 1 - 1/(2n); the lower side mirrors them.  With
    1/(2n) >= mesh no tail points are added.
    """
    n = int(n)
    if n < 1:
        raise InvalidParameterError(f"sample size must be >= 1, got {n}")
    mesh = float(mesh)
    if not 0.0 < mesh < 0.5:
        raise InvalidParameterError(f"mesh must lie in (0, 0.5), got {mesh}")

    n_core = int(round(1.0 / mesh)) - 1
    core = np.arange(1, n_core + 1) * mesh
    target = 1.0 - 0.5 / n

    upper = []
    step = mesh
    while core[-1] + 1e-15 < target and (not upper or upper[-1] < target - 1e-15):
        step /= 2.0
        upper.append(1.0 - step)
    upper = np.asarray(upper)
    lower = 1.0 - upper[::-1]
    points = np.concatenate([lower, core, upper])

    anchor = int(np.argmin(np.abs(points - tau0)))
    return TauGrid(points=points, mesh=mesh, anchor_index=anchor, n_target=n)


@dataclass(frozen=True)
class Dataset:
    """Centered predictors with responses and right-censoring flags."""

    domain: PredictorDomain
    y: np.ndarray
    censored: np.ndarray = field(default=None)

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float).ravel()
        object.__setattr__(self, "y", y)
        if y.shape[0] != self.domain.n:
            raise InvalidParameterError(
                f"{y.shape[0]} responses for {self.domain.n} predictor rows")
        if not np.all(np.isfinite(y)):
            raise InvalidParameterError("responses must be finite")
        c = self.censored
        if c is None:
            c = np.zeros(y.shape[0], dtype=np.int8)
        else:
            c = np.asarray(c).ravel().astype(np.int8)
            if c.shape[0] != y.shape[0]:
                raise InvalidParameterError("censor flags do not match responses")
            if not np.all((c == 0) | (c == 1)):
                raise InvalidParameterError("censor flags must be 0 or 1")
        object.__setattr__(self, "censored", c)

    @property
    def n(self):
        return self.y.shape[0]

    @property
    def has_censoring(self):
        return bool(np.any(self.censored == 1))
