"""Squared-exponential prior machinery for the latent curves.

Each latent curve w_j is handled through its values at m fixed knots.
Given the kernel rescaling lambda, the knot vector is Gaussian with
covariance kappa^2 * C_**(lambda); integrating kappa^2 against an
inverse-gamma prior turns that into a multivariate t, and lambda itself
lives on a finite grid with Beta-derived weights, so the working prior
on a knot vector is a discrete t mixture.  Curve values on the full tau
grid come from the kernel interpolant A_g = C_o*(lambda_g) C_**^-1,
mixed with the posterior lambda weights of the knot vector.

The lambda grid is spaced so consecutive conditional priors are exactly
one nat of Kullback-Leibler divergence apart.  That divergence is
measured between the Gaussian laws of the curve values on the working
abscissae passed in (the tau grid in normal use): on the handful of
knots alone the laws stop being distinguishable long before the target
correlation floor is reached, and the one-nat step has no solution.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg, special
from scipy.optimize import brentq
from scipy.stats import beta as beta_dist

from .errors import NumericError

DEFAULT_NUGGET = 1e-10
MAX_NUGGET = 1e-6

# A knot vector is a plain (m,) ndarray of curve values at the knots.
KnotVector = np.ndarray


def default_knots(m=6):
    """m uniformly spaced knots on [0, 1]."""
    if m < 2:
        raise NumericError(f"need at least 2 knots, got {m}")
    return np.linspace(0.0, 1.0, m)


def se_cov(t, tp, lam):
    """Squared-exponential covariance exp(-lambda^2 (t - t')^2)."""
    t = np.asarray(t, dtype=float)
    tp = np.asarray(tp, dtype=float)
    d = t - tp
    return np.exp(-(lam * lam) * d * d)


def rho_corr(lam, h=0.1):
    """Correlation between curve values a lag h apart: exp(-h^2 lam^2)."""
    return np.exp(-(h * h) * (lam * lam))


def lam_for_rho(rho, h=0.1):
    return math.sqrt(-math.log(rho)) / h


def _gram(points, lam, nugget):
    d = points[:, None] - points[None, :]
    C = np.exp(-(lam * lam) * d * d)
    if nugget:
        C[np.diag_indices_from(C)] += nugget
    return C


def _chol_logdet(C):
    L = np.linalg.cholesky(C)
    return L, 2.0 * float(np.sum(np.log(np.diag(L))))


def gaussian_kl(points, lam_a, lam_b, nugget=DEFAULT_NUGGET):
    """KL( N(0, C(lam_a)) || N(0, C(lam_b)) ) on the given abscissae.

    Independent of any common scale multiplying both covariances.
    """
    m = len(points)
    La, lda = _chol_logdet(_gram(points, lam_a, nugget))
    Lb, ldb = _chol_logdet(_gram(points, lam_b, nugget))
    Xs = linalg.solve_triangular(Lb, La, lower=True)
    return 0.5 * (float(np.sum(Xs * Xs)) - m + ldb - lda)


def build_lambda_grid(points, h=0.1, rho_hi=0.99, rho_lo=0.05,
                      nugget=DEFAULT_NUGGET):
    """Unit-KL-spaced rescaling grid from rho_hi down to rho_lo.

    lambda_1 solves rho_h(lambda_1) = rho_hi; each subsequent lambda is
    root-found so the KL divergence from the previous Gaussian law (on
    the supplied abscissae) equals 1; construction stops at the first
    lambda with rho_h(lambda) <= rho_lo.

    Raises NumericError with bracketing diagnostics when a unit step is
    infeasible, which happens if the abscissae are too few to keep the
    laws distinguishable over the requested range.
    """
    points = np.asarray(points, dtype=float)
    if not 0.0 < rho_lo < rho_hi < 1.0:
        raise NumericError(f"need 0 < rho_lo < rho_hi < 1, got ({rho_lo}, {rho_hi})")
    grid = [lam_for_rho(rho_hi, h)]
    while rho_corr(grid[-1], h) > rho_lo:
        prev = grid[-1]
        # kl(prev, x) -> -0.5 logdet C(prev) as x grows; below one nat the
        # laws on these abscissae cannot be pushed a full step apart
        _, ld_prev = _chol_logdet(_gram(points, prev, nugget))
        if -0.5 * ld_prev < 1.0:
            raise NumericError(
                "unit-KL step infeasible past lambda=%.6g: at most %.4f nats "
                "remain on %d abscissae; supply denser abscissae or raise "
                "rho_lo above %.4g" % (prev, -0.5 * ld_prev, len(points),
                                       rho_corr(prev, h)))
        hi = prev * 1.25
        while gaussian_kl(points, prev, hi, nugget) < 1.0:
            hi *= 1.25
            if hi > 1e8:
                raise NumericError(
                    "unit-KL bracket expansion ran away past lambda=%g "
                    "(started from %.6g)" % (hi, prev))
        nxt = brentq(lambda x: gaussian_kl(points, prev, x, nugget) - 1.0,
                     prev, hi, xtol=1e-12)
        grid.append(nxt)
    return np.asarray(grid)


@dataclass(frozen=True)
class GpTables:
    """Precomputed per-lambda interpolation and factorization tables.

    knots : (m,) knot abscissae.
    lambdas : (G,) rescaling grid.
    log_prior_weights : (G,) normalized log weights of the lambda grid.
    A : (G, L, m) kernel interpolation matrices grid-from-knots.
    chol : (G, m, m) lower Cholesky factors of the knot Gram matrices.
    chol_inv : (G, m, m) their inverses (for fast quadratic forms).
    logdet : (G,) log determinants of the knot Gram matrices.
    """

    knots: np.ndarray
    lambdas: np.ndarray
    log_prior_weights: np.ndarray
    A: np.ndarray
    chol: np.ndarray
    chol_inv: np.ndarray
    logdet: np.ndarray
    a_kappa: float
    b_kappa: float
    a_lambda: float
    b_lambda: float
    h: float
    nugget: float

    @property
    def m(self):
        return self.knots.shape[0]

    @property
    def G(self):
        return self.lambdas.shape[0]

    @property
    def prior_weights(self):
        return np.exp(self.log_prior_weights)


def _factor_with_escalation(C_raw, nugget):
    """Cholesky with x10 nugget escalation up to MAX_NUGGET."""
    nug = nugget
    while True:
        try:
            L = np.linalg.cholesky(C_raw + nug * np.eye(C_raw.shape[0]))
            return L, nug
        except np.linalg.LinAlgError:
            if nug >= MAX_NUGGET:
                raise NumericError(
                    "knot Gram matrix not factorizable even at nugget "
                    f"{nug:g}") from None
            nug = nug * 10.0 if nug > 0 else DEFAULT_NUGGET


def precompute_tables(grid, knots, lambdas, a_kappa=1.5, b_kappa=1.5,
                      a_lambda=6.0, b_lambda=4.0, h=0.1,
                      nugget=DEFAULT_NUGGET):
    """Build :class:`GpTables` for a tau grid and a lambda grid.

    The cross-covariance picks up the same nugget as the knot Gram
    matrix wherever a grid abscissa coincides with a knot, so the
    interpolant passes through the knot values exactly.

    Grid-point weights for lambda discretize the Beta(a_lambda,
    b_lambda) prior on rho_h(lambda) by density times the |d rho /
    d lambda| Jacobian, normalized across the grid.
    """
    tpts = grid.points if hasattr(grid, "points") else np.asarray(grid, dtype=float)
    knots = np.asarray(knots, dtype=float)
    lambdas = np.asarray(lambdas, dtype=float)
    m, G, L = knots.shape[0], lambdas.shape[0], tpts.shape[0]

    coincide = np.abs(tpts[:, None] - knots[None, :]) < 1e-12

    A = np.empty((G, L, m))
    chol = np.empty((G, m, m))
    chol_inv = np.empty((G, m, m))
    logdet = np.empty(G)
    for g, lam in enumerate(lambdas):
        d = knots[:, None] - knots[None, :]
        C_raw = np.exp(-(lam * lam) * d * d)
        Lg, used = _factor_with_escalation(C_raw, nugget)
        chol[g] = Lg
        chol_inv[g] = linalg.solve_triangular(Lg, np.eye(m), lower=True)
        logdet[g] = 2.0 * float(np.sum(np.log(np.diag(Lg))))
        dc = tpts[:, None] - knots[None, :]
        Co = np.exp(-(lam * lam) * dc * dc)
        if used:
            Co = Co + used * coincide
        A[g] = linalg.cho_solve((Lg, True), Co.T).T

    rho = rho_corr(lambdas, h)
    logw = (beta_dist.logpdf(rho, a_lambda, b_lambda)
            + np.log(2.0 * h * h * lambdas * rho))
    logw = logw - _sorted_logsumexp(logw)

    return GpTables(knots=knots, lambdas=lambdas, log_prior_weights=logw,
                    A=A, chol=chol, chol_inv=chol_inv, logdet=logdet,
                    a_kappa=float(a_kappa), b_kappa=float(b_kappa),
                    a_lambda=float(a_lambda), b_lambda=float(b_lambda),
                    h=float(h), nugget=float(nugget))


def _sorted_logsumexp(terms):
    """Order-independent log-sum-exp (ascending accumulation)."""
    t = np.sort(np.asarray(terms, dtype=float))
    hi = t[-1]
    if not np.isfinite(hi):
        return hi
    return hi + math.log1p(float(np.sum(np.exp(t[:-1] - hi))))


def marginal_log_prior(W, tables):
    """Log density of a knot vector under the scale-mixed t mixture.

    Returns (logp, weights): the total log prior density with kappa^2
    and lambda integrated/summed out, and the posterior mixture weights
    p_g over the lambda grid given W (softmax of the per-component
    terms).  The quadratic forms use the precomputed Cholesky inverses.
    """
    W = np.asarray(W, dtype=float)
    m = tables.m
    z = tables.chol_inv @ W                       # (G, m)
    quad = np.einsum("gm,gm->g", z, z)
    a, b = tables.a_kappa, tables.b_kappa
    const = (special.gammaln(a + 0.5 * m) - special.gammaln(a)
             - 0.5 * m * math.log(2.0 * math.pi * b))
    terms = (tables.log_prior_weights - 0.5 * tables.logdet
             - (a + 0.5 * m) * np.log1p(quad / (2.0 * b)) + const)
    total = _sorted_logsumexp(terms)
    weights = np.exp(terms - total)
    return float(total), weights


def interpolate_curve(W, weights, tables):
    """Grid values of the curve: sum_g p_g * A_g W."""
    proj = np.tensordot(tables.A, np.asarray(W, dtype=float), axes=([2], [0]))
    return weights @ proj


def curve_on_grid(W, tables):
    """Convenience: mixture weights from the prior, then interpolate."""
    _, weights = marginal_log_prior(W, tables)
    return interpolate_curve(W, weights, tables)


def sample_knot_vector(tables, rng):
    """One draw of a knot vector from the hierarchical prior.

    Samples lambda_g from the grid weights, kappa^2 from its inverse
    gamma, then the Gaussian knot values; marginally a draw from the
    same t mixture that :func:`marginal_log_prior` evaluates.
    """
    g = rng.choice(tables.G, p=tables.prior_weights)
    kappa2 = 1.0 / rng.gamma(tables.a_kappa, 1.0 / tables.b_kappa)
    z = rng.standard_normal(tables.m)
    return math.sqrt(kappa2) * (tables.chol[g] @ z)
