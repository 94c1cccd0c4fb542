"""Reference density families for the intercept process.

The model expresses every conditional quantile function relative to a
fixed "prior guess" density f0 with full support on the real line.  Two
families are provided: Student-t with degrees of freedom ``nu`` (the
default, robust to heavy response tails) and the standard Gaussian.
Each family is packaged as a quartet of functions

    Q0(t)  quantile function,
    q0(t)  quantile density  dQ0/dt = 1 / f0(Q0(t)),
    F0(y)  distribution function,
    f0(y)  density,

together with tau0 = F0(0), the probability level anchored at the model
intercept.  Both implemented families are symmetric about zero, so
tau0 = 1/2 exactly.
"""

from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import InvalidParameterError

FAMILY_T = "t"
FAMILY_GAUSSIAN = "gaussian"

_LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True)
class BaseQuartet:
    """Immutable bundle of (Q0, q0, F0, f0) for one reference family.

    All four callables accept scalars or numpy arrays and are pure, so a
    quartet may be shared freely across threads.
    """

    family: str
    nu: float
    tau0: float = 0.5

    def Q0(self, t):
        t = np.asarray(t, dtype=float)
        if self.family == FAMILY_GAUSSIAN:
            return special.ndtri(t)
        return special.stdtrit(self.nu, t)

    def F0(self, y):
        y = np.asarray(y, dtype=float)
        if self.family == FAMILY_GAUSSIAN:
            return special.ndtr(y)
        return special.stdtr(self.nu, y)

    def log_f0(self, y):
        y = np.asarray(y, dtype=float)
        if self.family == FAMILY_GAUSSIAN:
            return -0.5 * (y * y + _LOG_2PI)
        nu = self.nu
        c = (special.gammaln(0.5 * (nu + 1.0)) - special.gammaln(0.5 * nu)
             - 0.5 * np.log(nu * np.pi))
        return c - 0.5 * (nu + 1.0) * np.log1p(y * y / nu)

    def f0(self, y):
        return np.exp(self.log_f0(y))

    def q0(self, t):
        """Quantile density 1 / f0(Q0(t)); +inf in the exact tails."""
        return np.exp(-self.log_f0(self.Q0(t)))


def make_base(family, nu=6.0):
    """Build a :class:`BaseQuartet` for the requested family.

    Arguments
    ---------
    family : "t" or "gaussian".
    nu : degrees of freedom, required positive for the t family and
         ignored for the Gaussian.
    """
    if family not in (FAMILY_T, FAMILY_GAUSSIAN):
        raise InvalidParameterError(f"unknown base family {family!r}; "
                                    f"use '{FAMILY_T}' or '{FAMILY_GAUSSIAN}'")
    if family == FAMILY_T:
        nu = float(nu)
        if not np.isfinite(nu) or nu <= 0.0:
            raise InvalidParameterError(f"degrees of freedom must be positive, got {nu}")
        return BaseQuartet(family=FAMILY_T, nu=nu)
    return BaseQuartet(family=FAMILY_GAUSSIAN, nu=float("nan"))
