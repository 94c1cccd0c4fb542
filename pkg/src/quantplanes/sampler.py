"""Adaptive blocked random-walk Metropolis over the model parameters.

The sampler state bundles the knot vectors of the p+1 latent curves
with the anchor coefficients and the log-scale / log-degrees-of-freedom
pair.  One sweep makes p+3 block updates: (W_j, gamma_j) for each
j = 0..p, then (gamma0, gamma) jointly, then (log sigma^2, log nu) --
the anchor coefficients intentionally appear in two blocks.  Every block
runs a Gaussian random-walk Metropolis step whose covariance and step
scale adapt with diminishing step size t^-0.6 toward a 0.234 acceptance
rate.  The prior is flat in (gamma0, gamma) and in log sigma^2, the
standard-logistic prior sits on nu/6, and each knot vector carries the
t-mixture marginal from the GP hierarchy.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .basedist import FAMILY_GAUSSIAN, FAMILY_T, make_base
from .errors import (InitializationError, InvalidParameterError,
                     InvalidStateError)
from .gp import (GpTables, build_lambda_grid, default_knots,
                 interpolate_curve, marginal_log_prior, precompute_tables)
from .likelihood import log_likelihood_censored
from .model import build_coefficients
from .taugrid import build_tau_grid

ACCEPT_TARGET = 0.234
ADAPT_DECAY = 0.6


@dataclass
class ThetaState:
    """Full sampler state; dimension (m+1)(p+1) + 2."""

    W: np.ndarray          # (p+1, m) knot vectors
    gamma0: float
    gamma: np.ndarray      # (p,)
    log_sigma2: float
    log_nu: float

    def copy(self):
        return ThetaState(self.W.copy(), self.gamma0, self.gamma.copy(),
                          self.log_sigma2, self.log_nu)

    def flatten(self):
        return np.concatenate([self.W.ravel(),
                               [self.gamma0], self.gamma,
                               [self.log_sigma2, self.log_nu]])

    @staticmethod
    def from_flat(vec, p, m):
        vec = np.asarray(vec, dtype=float)
        k = (p + 1) * m
        return ThetaState(W=vec[:k].reshape(p + 1, m),
                          gamma0=float(vec[k]),
                          gamma=vec[k + 1:k + 1 + p].copy(),
                          log_sigma2=float(vec[k + 1 + p]),
                          log_nu=float(vec[k + 2 + p]))

    @property
    def sigma(self):
        return math.exp(0.5 * self.log_sigma2)

    @property
    def nu(self):
        return math.exp(self.log_nu)


@dataclass
class BlockAdaptState:
    """Running proposal statistics for one Metropolis block."""

    mean: np.ndarray
    cov: np.ndarray
    log_scale: float = 0.0
    target: float = ACCEPT_TARGET
    count: int = 0

    @staticmethod
    def fresh(x0):
        d = x0.shape[0]
        return BlockAdaptState(mean=x0.copy(), cov=np.eye(d) * (0.1 ** 2 / d))

    def propose(self, x, rng):
        d = x.shape[0]
        jitter = 1e-10 * max(1.0, float(np.trace(self.cov)) / d)
        cov = math.exp(self.log_scale) * (self.cov + jitter * np.eye(d))
        try:
            root = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError:
            root = np.linalg.cholesky(cov + np.eye(d) * (1e-8 + jitter))
        return x + root @ rng.standard_normal(d)

    def update(self, x, accept_prob):
        """Diminishing-adaptation update with step size count^-0.6."""
        self.count += 1
        g = self.count ** -ADAPT_DECAY
        delta = x - self.mean
        self.mean = self.mean + g * delta
        self.cov = self.cov + g * (np.outer(delta, delta) - self.cov)
        self.log_scale += g * (accept_prob - self.target)


@dataclass(frozen=True)
class FitContext:
    """Everything a chain needs besides the data and the state."""

    grid: object
    domain: object
    base_family: str
    gp: GpTables

    def base_for(self, theta):
        if self.base_family == FAMILY_GAUSSIAN:
            return make_base(FAMILY_GAUSSIAN)
        return make_base(FAMILY_T, theta.nu)


@dataclass
class PosteriorDraws:
    """Thinned posterior sample with evaluation traces."""

    samples: np.ndarray        # (S, D) flattened states
    loglik: np.ndarray         # (S,)
    logprior: np.ndarray       # (S,)
    accept_rates: np.ndarray   # (S, B) running per-block acceptance rates
    seed: int
    config: dict
    context: FitContext = field(repr=False, default=None)
    p: int = 0
    m: int = 0

    @property
    def S(self):
        return self.samples.shape[0]

    def theta(self, s):
        return ThetaState.from_flat(self.samples[s], self.p, self.m)

    def coefficient_tables(self, s):
        """Rebuild the coefficient tables of retained draw s."""
        th = self.theta(s)
        wt = latent_curves(th, self.context.gp)
        base = self.context.base_for(th)
        return build_coefficients(wt, th.gamma0, th.gamma, th.sigma, base,
                                  self.context.grid, self.context.domain)


def latent_curves(theta, gp_tables):
    """Interpolate every knot vector of a state onto the tau grid."""
    rows = []
    for j in range(theta.W.shape[0]):
        _, wts = marginal_log_prior(theta.W[j], gp_tables)
        rows.append(interpolate_curve(theta.W[j], wts, gp_tables))
    return np.vstack(rows)


def _nu_log_prior(log_nu):
    """Standard-logistic prior on nu/6, expressed in log-nu coordinates."""
    if log_nu > 700.0:
        return -np.inf
    z = math.exp(log_nu) / 6.0
    return -z - 2.0 * math.log1p(math.exp(-z)) + math.log(z)


def log_prior(theta, gp_tables, base_family=FAMILY_T):
    """Total log prior of a state (flat pieces contribute zero)."""
    total = 0.0
    for j in range(theta.W.shape[0]):
        lp, _ = marginal_log_prior(theta.W[j], gp_tables)
        total += lp
    if base_family == FAMILY_T:
        total += _nu_log_prior(theta.log_nu)
    return total


class _ChainWorkspace:
    """Caches per-curve prior terms and interpolated rows between blocks."""

    def __init__(self, ctx, data, theta):
        self.ctx = ctx
        self.data = data
        self.theta = theta
        p1 = theta.W.shape[0]
        self.logp_w = np.empty(p1)
        self.wtilde = np.empty((p1, ctx.grid.L))
        for j in range(p1):
            self._set_curve(j, theta.W[j])
        self.nu_term = (_nu_log_prior(theta.log_nu)
                        if ctx.base_family == FAMILY_T else 0.0)
        self.loglik = self._likelihood(theta, self.wtilde)

    def _set_curve(self, j, Wj):
        lp, wts = marginal_log_prior(Wj, self.ctx.gp)
        self.logp_w[j] = lp
        self.wtilde[j] = interpolate_curve(Wj, wts, self.ctx.gp)

    def _likelihood(self, theta, wtilde):
        try:
            base = self.ctx.base_for(theta)
            tables = build_coefficients(wtilde, theta.gamma0, theta.gamma,
                                        theta.sigma, base,
                                        self.ctx.grid, self.ctx.domain)
        except (InvalidStateError, InvalidParameterError, OverflowError):
            return -np.inf
        return log_likelihood_censored(self.data, tables)

    @property
    def logprior(self):
        return float(np.sum(self.logp_w)) + self.nu_term

    def logpost(self):
        return self.logprior + self.loglik


def _block_spec(p):
    """(label, block id) pairs; ids >= 0 are curve blocks, -1 the joint
    anchor block, -2 the scale block."""
    blocks = [("w%d" % j, j) for j in range(p + 1)]
    blocks.append(("anchor", -1))
    blocks.append(("scale", -2))
    return blocks


def run_chain(data, config, prepared=None, progress=None):
    """Run one adaptive blocked Metropolis chain.

    Arguments
    ---------
    data : Dataset with centered predictors.
    config : RunConfig (or anything with the same attributes).
    prepared : optional FitContext to reuse precomputed tables across
        fits on identically shaped data.
    progress : optional callable(iteration, total).

    Returns a :class:`PosteriorDraws` whose retained sample count is
    (iters - burnin) / thin.  Fixed seed and config give bit-identical
    output.
    """
    rng = np.random.default_rng(config.seed)
    ctx = prepared if prepared is not None else prepare_context(data, config)
    p, m = ctx.domain.p, ctx.gp.m
    t_base = ctx.base_family == FAMILY_T

    theta = _initial_state(data, config, m)
    ws = _ChainWorkspace(ctx, data, theta)
    if not np.isfinite(ws.loglik):
        raise InitializationError(
            "the starting state has zero likelihood; widen the initial "
            "scale (init_sigma_scale) or check the response scaling")

    blocks = _block_spec(p)
    adapt = []
    for label, j in blocks:
        adapt.append(BlockAdaptState.fresh(_extract(theta, j, t_base)))

    iters = int(config.iters)
    burn = int(round(config.burnin * iters))
    thin = int(config.thin) if config.thin else max(1, (iters - burn) // int(config.target_draws))
    n_keep = (iters - burn) // thin

    D = theta.flatten().shape[0]
    samples = np.empty((n_keep, D))
    lls = np.empty(n_keep)
    lps = np.empty(n_keep)
    acc_trace = np.empty((n_keep, len(blocks)))
    acc_count = np.zeros(len(blocks))
    tries = np.zeros(len(blocks))
    kept = 0

    for it in range(1, iters + 1):
        adapting = not (config.freeze_adapt_after_burnin and it > burn)
        for b, (label, j) in enumerate(blocks):
            x = _extract(theta, j, t_base)
            prop = adapt[b].propose(x, rng)
            cand = theta.copy()
            _inject(cand, j, prop, t_base)
            logr, commit = _evaluate(ws, cand, j, t_base)
            tries[b] += 1
            if logr >= 0.0 or math.log(rng.uniform()) < logr:
                theta = cand
                commit()
                acc_count[b] += 1
                alpha = 1.0 if logr >= 0 else math.exp(logr)
            else:
                alpha = math.exp(logr) if np.isfinite(logr) else 0.0
            if adapting:
                adapt[b].update(_extract(theta, j, t_base), alpha)
        if it > burn and (it - burn) % thin == 0 and kept < n_keep:
            samples[kept] = theta.flatten()
            lls[kept] = ws.loglik
            lps[kept] = ws.logprior
            acc_trace[kept] = acc_count / np.maximum(tries, 1)
            kept += 1
        if progress is not None:
            progress(it, iters)

    return PosteriorDraws(samples=samples[:kept], loglik=lls[:kept],
                          logprior=lps[:kept], accept_rates=acc_trace[:kept],
                          seed=int(config.seed), config=config.to_dict(),
                          context=ctx, p=p, m=m)


def prepare_context(data, config):
    """Build the grid, lambda grid and GP tables for a dataset."""
    grid = build_tau_grid(data.n, config.mesh)
    knots = default_knots(config.knots_m)
    lambdas = build_lambda_grid(grid.points, h=config.h,
                                rho_hi=config.rho_hi, rho_lo=config.rho_lo,
                                nugget=config.nugget)
    gp = precompute_tables(grid, knots, lambdas,
                           a_kappa=config.a_kappa, b_kappa=config.b_kappa,
                           a_lambda=config.a_lambda, b_lambda=config.b_lambda,
                           h=config.h, nugget=config.nugget)
    return FitContext(grid=grid, domain=data.domain,
                      base_family=config.base_family, gp=gp)


def _initial_state(data, config, m):
    """OLS anchor, log residual variance, flat latent curves, nu = 6."""
    X1 = np.column_stack([np.ones(data.n), data.domain.points])
    coef, *_ = np.linalg.lstsq(X1, data.y, rcond=None)
    resid = data.y - X1 @ coef
    var = max(float(np.var(resid)), 1e-12) * config.init_sigma_scale ** 2
    p = data.domain.p
    return ThetaState(W=np.zeros((p + 1, m)),
                      gamma0=float(coef[0]), gamma=coef[1:].copy(),
                      log_sigma2=math.log(var), log_nu=math.log(6.0))


def _extract(theta, j, t_base):
    if j >= 0:
        gj = theta.gamma0 if j == 0 else theta.gamma[j - 1]
        return np.concatenate([theta.W[j], [gj]])
    if j == -1:
        return np.concatenate([[theta.gamma0], theta.gamma])
    if t_base:
        return np.array([theta.log_sigma2, theta.log_nu])
    return np.array([theta.log_sigma2])


def _inject(theta, j, vec, t_base):
    if j >= 0:
        theta.W[j] = vec[:-1]
        if j == 0:
            theta.gamma0 = float(vec[-1])
        else:
            theta.gamma[j - 1] = float(vec[-1])
    elif j == -1:
        theta.gamma0 = float(vec[0])
        theta.gamma = vec[1:].copy()
    else:
        theta.log_sigma2 = float(vec[0])
        if t_base:
            theta.log_nu = float(vec[1])


def _evaluate(ws, cand, j, t_base):
    """Metropolis log ratio for a candidate touching block j.

    Returns (log_ratio, commit) where commit() folds the candidate's
    recomputed pieces into the workspace on acceptance.
    """
    if j >= 0:
        lp_new, wts = marginal_log_prior(cand.W[j], ws.ctx.gp)
        row = interpolate_curve(cand.W[j], wts, ws.ctx.gp)
        wtilde = ws.wtilde.copy()
        wtilde[j] = row
        ll_new = ws._likelihood(cand, wtilde)
        logr = (lp_new - ws.logp_w[j]) + (ll_new - ws.loglik)

        def commit():
            ws.theta = cand
            ws.logp_w[j] = lp_new
            ws.wtilde[j] = row
            ws.loglik = ll_new
    else:
        nu_new = (_nu_log_prior(cand.log_nu)
                  if (j == -2 and t_base) else ws.nu_term)
        if not np.isfinite(nu_new):
            return -np.inf, lambda: None
        ll_new = ws._likelihood(cand, ws.wtilde)
        logr = (nu_new - ws.nu_term) + (ll_new - ws.loglik)

        def commit():
            ws.theta = cand
            ws.nu_term = nu_new
            ws.loglik = ll_new

    if not np.isfinite(logr):
        logr = -np.inf
    return logr, commit
