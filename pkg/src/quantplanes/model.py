"""Constraint-free parametrization of non-crossing quantile planes.

A valid collection of conditional quantile planes beta0(t) + x'beta(t)
over a convex domain is characterized by

    dbeta0(t) > 0,
    dbeta(t)  = dbeta0(t) * v(t) / ( a(v(t), X) * sqrt(1 + ||v(t)||^2) ),

for an unconstrained direction curve v.  The package builds the curves
from: a strictly increasing re-timing map zeta (itself the normalized
running integral of exp(w0) for an unconstrained w0), the reference
quantile density q0 of the base family, a scale sigma, and anchor values
(gamma0, gamma) pinned at the probability level tau0.  Everything is
tabulated on a TauGrid and integrated by the trapezoidal rule so the
likelihood module can bracket observations against the same tables.
"""

from dataclasses import dataclass

import numpy as np

from .basedist import BaseQuartet
from .errors import GridMismatchError, InvalidParameterError, InvalidStateError
from .geometry import PredictorDomain, support_scales
from .taugrid import TauGrid


@dataclass(frozen=True)
class CoefficientTables:
    """Coefficient curves and their derivatives tabulated on a grid.

    beta0, dbeta0 : (L,) intercept curve and derivative.
    beta, dbeta : (L, p) slope curves and derivatives.
    zeta, dzeta : (L,) the re-timing diffeomorphism and its derivative.
    """

    grid: TauGrid
    beta0: np.ndarray
    beta: np.ndarray
    dbeta0: np.ndarray
    dbeta: np.ndarray
    zeta: np.ndarray
    dzeta: np.ndarray

    @property
    def p(self):
        return self.beta.shape[1]


def logistic_map(w0, grid):
    """Turn unconstrained values w0 on the grid into (zeta, dzeta).

    dzeta is exp(w0) divided by the trapezoidal integral of exp(w0) over
    [0, 1]; zeta is the running trapezoidal integral of dzeta.  The grid
    is extended to the endpoints 0 and 1 with clamped w0 values so the
    normalization pins zeta(0) = 0 and zeta(1) = 1 exactly.  Exponentials
    are max-shifted for overflow safety.
    """
    w0 = np.asarray(w0, dtype=float)
    t = grid.points
    te = np.concatenate(([0.0], t, [1.0]))
    we = np.concatenate(([w0[0]], w0, [w0[-1]]))
    e = np.exp(we - np.max(we))
    seg = 0.5 * np.diff(te) * (e[1:] + e[:-1])
    cum = np.concatenate(([0.0], np.cumsum(seg)))
    Z = cum[-1]
    zeta = cum[1:-1] / Z
    dzeta = e[1:-1] / Z
    return zeta, dzeta


def normalize_direction(w, domain):
    """Map a direction w to h = w / (a(w, X) sqrt(1 + ||w||^2)).

    h = 0 at w = 0.  The construction guarantees 1 + x'h > 0 for every x
    in the domain, which is what makes the slope derivatives safe.
    """
    w = np.asarray(w, dtype=float)
    return normalize_rows(w[None, :], domain)[0]


def normalize_rows(V, domain):
    """Row-wise :func:`normalize_direction` for an (L, p) stack."""
    V = np.asarray(V, dtype=float)
    a = support_scales(V, domain)
    norms = np.linalg.norm(V, axis=1)
    denom = a * np.sqrt(1.0 + norms * norms)
    out = np.zeros_like(V)
    ok = np.isfinite(denom)
    out[ok] = V[ok] / denom[ok, None]
    return out


def anchored_cumtrapz(values, t, anchor):
    """Trapezoidal antiderivative over abscissae t, zero at t[anchor]."""
    values = np.asarray(values, dtype=float)
    dt = np.diff(t)
    if values.ndim == 1:
        seg = 0.5 * dt * (values[1:] + values[:-1])
        cum = np.concatenate(([0.0], np.cumsum(seg)))
    else:
        seg = 0.5 * dt[:, None] * (values[1:] + values[:-1])
        cum = np.vstack([np.zeros((1, values.shape[1])), np.cumsum(seg, axis=0)])
    return cum - cum[anchor]


def build_coefficients(wtilde, gamma0, gamma, sigma, base, grid, domain):
    """Assemble :class:`CoefficientTables` from tabulated latent curves.

    Arguments
    ---------
    wtilde : (p+1, L) values of the latent curves on the grid; row 0
        drives the re-timing map, rows 1..p the slope directions.
    gamma0, gamma : anchor intercept and slopes at the level tau0.
    sigma : positive scale multiplying the base quantile density.
    base : BaseQuartet supplying q0 and tau0.
    grid, domain : tabulation grid and centered predictor domain.

    The slope directions are evaluated at the re-timed abscissae zeta(t)
    by linear interpolation of their grid tables (clamped at the ends),
    and the curves are integrated outward from the anchor index by the
    trapezoidal rule, so beta0 equals gamma0 there exactly.

    Raises InvalidStateError when any intermediate is non-finite; the
    sampler maps that to an automatic rejection.
    """
    W = np.asarray(wtilde, dtype=float)
    p = domain.p
    if W.ndim != 2 or W.shape != (p + 1, grid.L):
        raise GridMismatchError(
            f"wtilde must be ({p + 1}, {grid.L}), got {W.shape}")
    if not np.isfinite(sigma) or sigma <= 0.0:
        raise InvalidParameterError(f"sigma must be positive, got {sigma}")
    gamma = np.asarray(gamma, dtype=float).ravel()
    if gamma.shape[0] != p:
        raise GridMismatchError(f"gamma has length {gamma.shape[0]}, domain p = {p}")

    t = grid.points
    zeta, dzeta = logistic_map(W[0], grid)
    v = np.empty((grid.L, p))
    for j in range(p):
        v[:, j] = np.interp(zeta, t, W[j + 1])
    h = normalize_rows(v, domain)

    dbeta0 = sigma * base.q0(zeta) * dzeta
    dbeta = dbeta0[:, None] * h
    k = grid.anchor_index
    beta0 = gamma0 + anchored_cumtrapz(dbeta0, t, k)
    beta = gamma[None, :] + anchored_cumtrapz(dbeta, t, k)

    if not (np.all(np.isfinite(beta0)) and np.all(np.isfinite(beta))
            and np.all(np.isfinite(dbeta0))):
        raise InvalidStateError("non-finite coefficient tables "
                                "(re-timing map collapsed into a tail)")
    return CoefficientTables(grid=grid, beta0=beta0, beta=beta,
                             dbeta0=dbeta0, dbeta=dbeta, zeta=zeta, dzeta=dzeta)


def check_noncrossing(tables, domain):
    """Minimum of dbeta0 + x'dbeta over the grid and the domain points.

    Positive slack certifies strictly ordered quantile planes over the
    convex hull of the points.
    """
    slack = tables.dbeta0[None, :] + domain.points @ tables.dbeta.T
    return float(slack.min())


def recover_direction(dbeta0, dbeta, domain):
    """Invert the slope construction: find v with dbeta = dbeta0 * h(v).

    Rows with dbeta = 0 map to v = 0; otherwise
    c = [ (dbeta0 / (||dbeta|| a(dbeta, X)))^2 - 1 ]^(-1/2) and
    v = c * dbeta / ||dbeta||.  Requires positive non-crossing slack.
    """
    dbeta0 = np.asarray(dbeta0, dtype=float)
    dbeta = np.asarray(dbeta, dtype=float)
    slack = dbeta0[None, :] + domain.points @ dbeta.T
    if slack.min() <= 0.0:
        raise InvalidParameterError(
            "tables violate non-crossing on the domain; cannot invert")
    norms = np.linalg.norm(dbeta, axis=1)
    a = support_scales(dbeta, domain)
    v = np.zeros_like(dbeta)
    nz = norms > 0.0
    ratio = dbeta0[nz] / (norms[nz] * a[nz])
    c = 1.0 / np.sqrt(ratio * ratio - 1.0)
    v[nz] = (c / norms[nz])[:, None] * dbeta[nz]
    return v
