"""Grid-discretized log-likelihood with optional right censoring.

Each observation is bracketed between consecutive tabulated quantile
values Q(t_{l-1} | x) < y <= Q(t_l | x); the density contribution
interpolates the quantile-derivative (slope) linearly within the cell
and the probability level solved for an observation interpolates the
grid levels the same way.  Observations outside the grid's quantile
coverage make the likelihood -inf; for right-censored observations the
coverage bound itself caps the survival contribution instead.
"""

import time

import numpy as np

from .errors import GridMismatchError
from .model import CoefficientTables, build_coefficients
from .taugrid import Dataset, TauGrid, build_tau_grid

SIDE_BELOW = -1
SIDE_IN = 0
SIDE_ABOVE = 1


def _check_tables(X, tables):
    L = tables.grid.L
    if tables.beta0.shape[0] != L or tables.beta.shape[0] != L:
        raise GridMismatchError("coefficient tables do not match their grid")
    if X.shape[1] != tables.beta.shape[1]:
        raise GridMismatchError(
            f"data has p = {X.shape[1]} but tables have p = {tables.beta.shape[1]}")


def bracket_observations(X, y, tables):
    """Locate every observation inside the tabulated quantile fan.

    Returns
    -------
    side : (n,) -1 below coverage, 0 bracketed, +1 above coverage.
    idx : (n,) upper index l of the bracketing cell (valid where side=0).
    alpha : (n,) position inside the cell, ties at the upper quantile
        giving alpha = 1 (the cell below owns its upper edge).
    slopes : (n, L) quantile derivative dbeta0 + x'dbeta at grid points.
    valid : False when some slope is non-positive (invalid tables for
        this data; callers should treat the state as impossible).
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    _check_tables(X, tables)

    slopes = tables.dbeta0[None, :] + X @ tables.dbeta.T
    if slopes.min() <= 0.0:
        return None, None, None, slopes, False
    Q = tables.beta0[None, :] + X @ tables.beta.T

    idx = np.sum(Q < y[:, None], axis=1)
    side = np.zeros(y.shape[0], dtype=np.int8)
    side[idx == 0] = SIDE_BELOW
    side[idx == Q.shape[1]] = SIDE_ABOVE

    inb = side == SIDE_IN
    alpha = np.zeros(y.shape[0])
    rows = np.nonzero(inb)[0]
    u = idx[rows]
    q_lo = Q[rows, u - 1]
    q_hi = Q[rows, u]
    width = q_hi - q_lo
    safe = width > 0.0
    alpha[rows[safe]] = (y[rows[safe]] - q_lo[safe]) / width[safe]
    return side, idx, alpha, slopes, True


def _per_observation(data, tables, use_censoring):
    side, idx, alpha, slopes, valid = bracket_observations(
        data.domain.points, data.y, tables)
    n = data.n
    if not valid:
        return np.full(n, -np.inf)

    t = tables.grid.points
    out = np.empty(n)
    inb = side == SIDE_IN
    rows = np.nonzero(inb)[0]
    u = idx[rows]
    a = alpha[rows]
    dens = (1.0 - a) * slopes[rows, u - 1] + a * slopes[rows, u]
    out[rows] = -np.log(dens)
    out[side == SIDE_BELOW] = -np.inf
    out[side == SIDE_ABOVE] = -np.inf

    if use_censoring and data.has_censoring:
        cens = data.censored == 1
        tau_hat = np.empty(n)
        tau_hat[inb] = t[idx[inb] - 1] + alpha[inb] * (t[idx[inb]] - t[idx[inb] - 1])
        tau_hat[side == SIDE_BELOW] = t[0]
        tau_hat[side == SIDE_ABOVE] = t[-1]
        out[cens] = np.log1p(-tau_hat[cens])
    return out


def per_observation_loglik(data, tables, use_censoring=True):
    """Per-observation log contributions (density or survival terms)."""
    return _per_observation(data, tables, use_censoring)


def log_likelihood(data, tables):
    """Total log-likelihood ignoring censor flags; -inf is a value."""
    terms = _per_observation(data, tables, use_censoring=False)
    return float(np.sum(terms))


def log_likelihood_censored(data, tables):
    """Total log-likelihood with right-censored survival contributions.

    Uncensored observations contribute exactly as in
    :func:`log_likelihood`.  A censored observation contributes
    log(1 - tau_hat) at its interpolated level; beyond grid coverage the
    contribution is capped at log(1 - t_L) above (log(1 - t_1) below)
    rather than -inf, since censoring only asserts survival past y.
    """
    terms = _per_observation(data, tables, use_censoring=True)
    return float(np.sum(terms))


def solve_tau(x, y, tables):
    """Probability level of response y at predictor x, or nan outside.

    Piecewise-linear inverse of the tabulated quantile function; returns
    a value in [t_1, t_L] when y is covered and nan otherwise.
    """
    x = np.asarray(x, dtype=float).ravel()
    side, idx, alpha, _, valid = bracket_observations(
        x[None, :], np.asarray([y], dtype=float), tables)
    if not valid or side[0] != SIDE_IN:
        return float("nan")
    t = tables.grid.points
    u = idx[0]
    return float(t[u - 1] + alpha[0] * (t[u] - t[u - 1]))


def solve_tau_clipped(X, y, tables):
    """Vectorized :func:`solve_tau` clipping out-of-coverage responses
    to the nearest grid endpoint level (used for survival curves)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    side, idx, alpha, _, valid = bracket_observations(X, y, tables)
    if not valid:
        return np.full(y.shape[0], np.nan)
    t = tables.grid.points
    tau = np.empty(y.shape[0])
    inb = side == SIDE_IN
    tau[inb] = t[idx[inb] - 1] + alpha[inb] * (t[idx[inb]] - t[idx[inb] - 1])
    tau[side == SIDE_BELOW] = t[0]
    tau[side == SIDE_ABOVE] = t[-1]
    return tau


def throughput_benchmark(n=1000, p=7, mesh=0.01, budget_seconds=5.0, seed=7):
    """Measure full likelihood evaluations per second.

    Each evaluation rebuilds the coefficient tables from tabulated latent
    curves (re-timing map included) and sums the bracketed log-density
    over n observations, i.e. everything a sampler pays per proposal.
    """
    from .basedist import make_base
    from .geometry import as_domain

    rng = np.random.default_rng(seed)
    Z = rng.standard_normal((n, p))
    X = (rng.uniform(size=n)[:, None] ** (1.0 / p)) * Z / np.linalg.norm(Z, axis=1, keepdims=True)
    domain = as_domain(X)
    grid = build_tau_grid(n, mesh)
    base = make_base("t", 6.0)

    t = grid.points
    wtilde = np.vstack([0.4 * np.sin(2.0 * np.pi * t + phi)
                        for phi in rng.uniform(0, 2 * np.pi, size=p + 1)])
    gamma0, gamma, sigma = 0.3, rng.normal(size=p), 1.2
    tables = build_coefficients(wtilde, gamma0, gamma, sigma, base, grid, domain)
    u = rng.uniform(t[0], t[-1], size=n)
    pos = np.searchsorted(t, u)
    frac = (u - t[pos - 1]) / (t[pos] - t[pos - 1])
    Qs = tables.beta0[None, :] + X @ tables.beta.T
    y = Qs[np.arange(n), pos - 1] * (1 - frac) + Qs[np.arange(n), pos] * frac
    data = Dataset(domain=domain, y=y)

    evals = 0
    start = time.perf_counter()
    while time.perf_counter() - start < budget_seconds:
        tables = build_coefficients(wtilde, gamma0, gamma, sigma, base, grid, domain)
        ll = log_likelihood(data, tables)
        evals += 1
    elapsed = time.perf_counter() - start
    if not np.isfinite(ll):
        raise RuntimeError("benchmark state produced -inf likelihood")
    return evals / elapsed, evals, elapsed
