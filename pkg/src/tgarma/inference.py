"""Posterior construction and sampling.

The posterior combines the partial likelihood over the transformed series
with independent priors: normals for the intercept and ARMA coefficients, a
lognormal for the dispersion parameter u and a uniform(-1,1) for lam.  The
sampler is a single-block random-walk Metropolis in unconstrained
coordinates (log u, atanh lam) started at the posterior mode, with proposal
covariance taken from the inverse negated Hessian there and a scalar step
size adapted during burn-in only.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .errors import DimensionError, DomainError, NumericError, SamplerError
from .model import ModelSpec, ParamVector, loglik, param_names
from .transform import Series, transform_series

LOG_2PI = math.log(2.0 * math.pi)

# Support of the uniform prior on lam; fixed by the model, not configurable.
LAMBDA_BOUNDS = (-1.0, 1.0)

# A proposal in log u beyond this cannot be exponentiated in double
# precision; such points get zero posterior support instead of overflowing.
_MAX_LOG_U = 700.0


@dataclass(frozen=True)
class PriorSpec:
    """Hyperparameters of the independent priors.

    phi_mean / theta_mean default to zero vectors of the model order when
    left as None.  u_logmean / u_logvar parameterize the lognormal prior on
    the dispersion (gamma shape nu or inverse-Gaussian sigma2).
    """

    beta0_mean: float = 0.0
    beta0_var: float = 200.0
    phi_mean: np.ndarray | None = None
    phi_var: float = 200.0
    theta_mean: np.ndarray | None = None
    theta_var: float = 200.0
    u_logmean: float = 0.0
    u_logvar: float = 200.0

    def __post_init__(self):
        for name in ("beta0_var", "phi_var", "theta_var", "u_logvar"):
            if not (getattr(self, name) > 0.0):
                raise DomainError(f"{name} must be positive")

    def resolved_means(self, order):
        """Prior mean vectors for phi and theta, defaults filled in."""
        phi_m = (np.zeros(order.p) if self.phi_mean is None
                 else np.asarray(self.phi_mean, dtype=float))
        theta_m = (np.zeros(order.q) if self.theta_mean is None
                   else np.asarray(self.theta_mean, dtype=float))
        if phi_m.shape != (order.p,) or theta_m.shape != (order.q,):
            raise DimensionError(
                "prior mean vectors do not match the model order"
            )
        return phi_m, theta_m


@dataclass(frozen=True)
class MCMCConfig:
    """Sampler settings; defaults follow the reference run lengths."""

    draws: int = 5000
    burn_in: int = 1000
    thin: int = 3
    seed: int = 0
    target_accept: tuple = (0.3, 0.6)
    adapt_window: int = 50
    initial_scale: float | None = None

    def __post_init__(self):
        if self.draws < 1 or self.burn_in < 0 or self.thin < 1:
            raise DomainError("draws >= 1, burn_in >= 0, thin >= 1 required")
        lo, hi = self.target_accept
        if not (0.0 < lo < hi < 1.0):
            raise DomainError("target_accept must satisfy 0 < lo < hi < 1")
        if self.adapt_window < 1:
            raise DomainError("adapt_window must be positive")


def _normal_logpdf(x, mean, var):
    return -0.5 * (LOG_2PI + math.log(var)) - (x - mean) ** 2 / (2.0 * var)


def log_prior(params, priors, order):
    """Joint log prior density at a parameter point.

    Accepts any object exposing beta0, phi, theta, u, lam so that
    out-of-support points (which ParamVector refuses to represent) can still
    be scored; they return -inf rather than raising.
    """
    if params.u <= 0.0 or not (LAMBDA_BOUNDS[0] <= params.lam <= LAMBDA_BOUNDS[1]):
        return -math.inf
    phi_m, theta_m = priors.resolved_means(order)
    phi = np.asarray(params.phi, dtype=float)
    theta = np.asarray(params.theta, dtype=float)
    if phi.shape != (order.p,) or theta.shape != (order.q,):
        raise DimensionError("parameter dimensions do not match the order")
    total = _normal_logpdf(params.beta0, priors.beta0_mean, priors.beta0_var)
    for j in range(order.p):
        total += _normal_logpdf(phi[j], phi_m[j], priors.phi_var)
    for j in range(order.q):
        total += _normal_logpdf(theta[j], theta_m[j], priors.theta_var)
    logu = math.log(params.u)
    total += -logu + _normal_logpdf(logu, priors.u_logmean, priors.u_logvar)
    total += -math.log(LAMBDA_BOUNDS[1] - LAMBDA_BOUNDS[0])
    return total


def log_posterior(params, priors, raw, spec):
    """Unnormalized log posterior: partial likelihood plus log prior.

    The transform is recomputed from the raw series at the lam carried by
    params, since the transformed data change with lam.  When
    spec.include_jacobian is set, the Box-Cox data Jacobian
    (lam-1)*sum(log y_t) over the modeled range is added so the target is a
    density for the original data rather than the transformed data.
    """
    lp = log_prior(params, priors, spec.order)
    if lp == -math.inf:
        return -math.inf
    ts = transform_series(raw, params.lam, spec.floor_c)
    ll = loglik(ts, params, spec.order, spec.family)
    total = lp + ll
    if spec.include_jacobian:
        logy = np.log(raw.values[spec.order.r:])
        total += (params.lam - 1.0) * float(np.sum(logy))
    return total


# ---------------------------------------------------------------------------
# Unconstrained coordinates.  The sampler and optimizer work on
# z = (beta0, phi, theta, log u [, atanh lam]); the lam coordinate is absent
# when the model pins lam.  The Jacobian of the map is included in the
# target so z-space densities are proper.
# ---------------------------------------------------------------------------

def pack_params(params, spec):
    """Map a ParamVector to unconstrained sampler coordinates."""
    z = [params.beta0, *params.phi, *params.theta, math.log(params.u)]
    if spec.lambda_fixed is None:
        z.append(math.atanh(params.lam))
    return np.array(z, dtype=float)


def unpack_params(z, spec):
    """Inverse of pack_params; returns None for unrepresentable points."""
    order = spec.order
    d = spec.n_sampled
    if z.size != d:
        raise DimensionError(f"expected {d} coordinates, got {z.size}")
    w = z[order.p + order.q + 1]
    if not np.all(np.isfinite(z)) or w > _MAX_LOG_U:
        return None
    lam = spec.lambda_fixed if spec.lambda_fixed is not None \
        else math.tanh(z[-1])
    return ParamVector(
        beta0=z[0],
        phi=z[1:1 + order.p],
        theta=z[1 + order.p:1 + order.p + order.q],
        u=math.exp(w),
        lam=lam,
    )


def _log_cosh(x):
    ax = abs(x)
    return ax + math.log1p(math.exp(-2.0 * ax)) - math.log(2.0)


def log_jacobian(z, spec):
    """log |dtheta/dz| of the unconstraining map at z."""
    order = spec.order
    out = z[order.p + order.q + 1]  # d(exp w)/dw = u
    if spec.lambda_fixed is None:
        # d(tanh zeta)/dzeta = sech^2 zeta; log of it without cancellation
        # for large |zeta|.
        out += -2.0 * _log_cosh(z[-1])
    return out


def log_posterior_unconstrained(z, priors, raw, spec):
    """z-space target: log_posterior at the mapped point plus log Jacobian.

    This is the density the sampler draws from; integrating it over z gives
    the same normalizer as the posterior over theta.
    """
    params = unpack_params(np.asarray(z, dtype=float), spec)
    if params is None:
        return -math.inf
    value = log_posterior(params, priors, raw, spec)
    if value == -math.inf:
        return -math.inf
    return value + log_jacobian(np.asarray(z, dtype=float), spec)


# ---------------------------------------------------------------------------
# Posterior mode and curvature.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ModeResult:
    """Posterior mode in both coordinate systems plus local curvature."""

    params: ParamVector
    z: np.ndarray
    neg_hessian_inv: np.ndarray
    value: float


def maximize_log_density(fn, x0, maxiter=None):
    """Maximize a log density, derivative-free first, then gradient polish.

    Returns (x, value).  Raises SamplerError carrying the best point found
    when neither stage reports convergence.
    """
    x0 = np.asarray(x0, dtype=float)

    def neg(x):
        try:
            v = fn(x)
        except NumericError:
            return math.inf
        if math.isnan(v):
            return math.inf
        return -v

    if maxiter is None:
        maxiter = 600 * max(1, x0.size)
    # inf encodes rejection regions, so inf - inf inside the optimizers is
    # expected; silence the resulting invalid-value warnings locally
    with np.errstate(invalid="ignore", over="ignore"):
        nm = optimize.minimize(
            neg, x0, method="Nelder-Mead",
            options={"maxiter": maxiter, "xatol": 1e-6, "fatol": 1e-9,
                     "adaptive": True},
        )
        best_x, best_f, converged = nm.x, nm.fun, bool(nm.success)
        try:
            bfgs = optimize.minimize(neg, best_x, method="BFGS",
                                     options={"gtol": 1e-6})
        except (ValueError, FloatingPointError):  # line search blowups
            bfgs = None
    if bfgs is not None and np.all(np.isfinite(bfgs.x)) and bfgs.fun <= best_f:
        best_x, best_f = bfgs.x, bfgs.fun
        converged = converged or bool(bfgs.success)
    if not math.isfinite(best_f):
        raise SamplerError(
            "mode search never reached a point of finite density",
            best=(best_x, -best_f),
        )
    if not converged:
        raise SamplerError(
            f"mode search did not converge within {maxiter} iterations",
            best=(best_x, -best_f),
        )
    return best_x, -best_f


def _hessian_fd(fn, x, rel_step=5e-4):
    """Symmetric central-difference Hessian.

    Evaluation points may fall in rejection regions where fn is -inf; the
    resulting NaN entries are the caller's signal, not a warning condition.
    """
    x = np.asarray(x, dtype=float)
    d = x.size
    h = rel_step * (1.0 + np.abs(x))
    hess = np.empty((d, d))
    with np.errstate(invalid="ignore", over="ignore"):
        f0 = fn(x)
        for i in range(d):
            ei = np.zeros(d)
            ei[i] = h[i]
            hess[i, i] = (fn(x + ei) - 2.0 * f0 + fn(x - ei)) / h[i] ** 2
            for j in range(i + 1, d):
                ej = np.zeros(d)
                ej[j] = h[j]
                hess[i, j] = hess[j, i] = (
                    fn(x + ei + ej) - fn(x + ei - ej)
                    - fn(x - ei + ej) + fn(x - ei - ej)
                ) / (4.0 * h[i] * h[j])
    return hess


def neg_hessian_inv_at(fn, x, rel_step=5e-4):
    """Inverse of the negated Hessian of fn at x, regularized to PD."""
    hess = _hessian_fd(fn, x, rel_step)
    if not np.all(np.isfinite(hess)):
        raise SamplerError("non-finite Hessian at the mode")
    a = -0.5 * (hess + hess.T)
    eigval, eigvec = np.linalg.eigh(a)
    if eigval.max() <= 0.0:
        raise SamplerError(
            "negated Hessian has no positive curvature at the mode"
        )
    floor = 1e-8 * eigval.max()
    eigval = np.maximum(eigval, floor)
    cov = (eigvec / eigval) @ eigvec.T
    return 0.5 * (cov + cov.T)


def default_init(raw, spec):
    """Moment-based starting point for the mode search."""
    lam0 = spec.lambda_fixed if spec.lambda_fixed is not None else 0.5
    ts = transform_series(raw, lam0, spec.floor_c)
    zbar = float(np.mean(ts.values))
    zvar = float(np.var(ts.values, ddof=1)) if ts.n > 1 else zbar ** 2
    zvar = max(zvar, 1e-8)
    if spec.family.value == "gamma":
        u0 = min(max(zbar ** 2 / zvar, 0.05), 1e4)
    else:
        u0 = min(max(zvar / zbar ** 3, 1e-6), 1e4)
    return ParamVector(
        beta0=math.log(zbar),
        phi=np.zeros(spec.order.p),
        theta=np.zeros(spec.order.q),
        u=u0,
        lam=lam0,
    )


def find_mode(priors, raw, spec, init=None):
    """Posterior mode in unconstrained coordinates with local covariance.

    The objective is the z-space target (posterior plus map Jacobian), so
    with nearly flat priors the mode coincides with the maximum-likelihood
    point: the lognormal prior's -log u exactly cancels the +log u Jacobian.
    """
    if init is None:
        init = default_init(raw, spec)
    z0 = pack_params(init, spec)

    def fn(z):
        return log_posterior_unconstrained(z, priors, raw, spec)

    z_hat, value = maximize_log_density(fn, z0)
    cov = neg_hessian_inv_at(fn, z_hat)
    params = unpack_params(z_hat, spec)
    if params is None:
        raise SamplerError("mode lies outside representable parameter space")
    return ModeResult(params=params, z=z_hat, neg_hessian_inv=cov, value=value)


# ---------------------------------------------------------------------------
# Random-walk Metropolis.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RWMResult:
    """Raw sampler output in the coordinates the target was given in."""

    draws: np.ndarray
    acceptance_count: int
    proposals: int
    scale: float
    burn_acceptance_rate: float


def random_walk_metropolis(log_density, x0, cov, n_keep, burn_in=1000,
                           thin=3, seed=0, target_accept=(0.3, 0.6),
                           adapt_window=50, initial_scale=None):
    """Single-block Gaussian random-walk Metropolis with burn-in adaptation.

    The proposal is x + s*L*xi with L the Cholesky factor of cov.  s starts
    at 2.38/sqrt(d) (or initial_scale) and is adjusted after each burn-in
    window whose acceptance rate falls outside target_accept; it is frozen
    once burn-in ends, so the kept draws target the exact stationary law.
    NumericError from the target is treated as zero density.
    """
    x0 = np.asarray(x0, dtype=float)
    d = x0.size
    cov = np.asarray(cov, dtype=float)
    if cov.shape != (d, d):
        raise DimensionError("proposal covariance shape does not match x0")
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        raise SamplerError("proposal covariance is not positive definite")
    if n_keep < 1:
        raise DimensionError("n_keep must be positive")

    def ld(x):
        try:
            v = log_density(x)
        except NumericError:
            return -math.inf
        return -math.inf if math.isnan(v) else v

    rng = np.random.default_rng(seed)
    scale = float(initial_scale) if initial_scale else 2.38 / math.sqrt(d)
    lo, hi = target_accept
    mid = 0.5 * (lo + hi)

    current = x0.copy()
    cur_ld = ld(current)
    if not math.isfinite(cur_ld):
        raise SamplerError("initial state has zero density")

    def step(scale):
        nonlocal current, cur_ld
        prop = current + scale * (chol @ rng.standard_normal(d))
        prop_ld = ld(prop)
        if math.log(rng.random()) < prop_ld - cur_ld:
            current = prop
            cur_ld = prop_ld
            return True
        return False

    burn_accepts = 0
    window_accepts = 0
    windows_done = 0
    for i in range(burn_in):
        acc = step(scale)
        burn_accepts += acc
        window_accepts += acc
        if (i + 1) % adapt_window == 0:
            windows_done += 1
            rate = window_accepts / adapt_window
            if rate == 0.0:
                raise SamplerError(
                    "no acceptances over an adaptation window; restart with "
                    "a smaller proposal scale (initial_scale)"
                )
            if not (lo <= rate <= hi):
                scale *= math.exp((rate - mid) / math.sqrt(windows_done))
            window_accepts = 0

    draws = np.empty((n_keep, d))
    accepted = 0
    for k in range(n_keep):
        for _ in range(thin):
            accepted += step(scale)
        draws[k] = current
    return RWMResult(
        draws=draws,
        acceptance_count=accepted,
        proposals=n_keep * thin,
        scale=scale,
        burn_acceptance_rate=(burn_accepts / burn_in) if burn_in else math.nan,
    )


@dataclass(frozen=True)
class Chain:
    """Posterior sample on the natural parameter scale.

    Columns follow param_names order: beta0, phi, theta, u, lambda.  The
    lambda column is constant when the model pinned it.  Draws are stored on
    the natural scale so serialized chains round-trip exactly.
    """

    draws: np.ndarray
    param_names: list
    acceptance_count: int
    proposals: int
    proposal_scale: float
    burn_in: int
    thin: int
    seed: int
    lambda_fixed: float | None = None

    @property
    def n_draws(self):
        return self.draws.shape[0]

    @property
    def acceptance_rate(self):
        return self.acceptance_count / self.proposals

    def column(self, name):
        return self.draws[:, self.param_names.index(name)]


def mh_sample(priors, raw, spec, config=None):
    """Fit the model: mode search, then adaptive random-walk Metropolis.

    Returns a Chain of config.draws kept draws (post burn-in, thinned),
    reproducible bit-for-bit under a fixed config.seed.  A mode search that
    stalls at a finite point is not fatal; sampling starts from the best
    point found, relying on the burn-in adaptation.
    """
    if config is None:
        config = MCMCConfig()
    if not isinstance(raw, Series):
        raw = Series(np.asarray(raw, dtype=float))

    def target(z):
        return log_posterior_unconstrained(z, priors, raw, spec)

    stalled = False
    try:
        mode = find_mode(priors, raw, spec)
        start, proposal_cov = mode.z, mode.neg_hessian_inv
    except SamplerError as exc:
        # A stalled mode search (near-unit-root ridge, floor kinks) still
        # localizes a finite high-density point.  Start there and let the
        # burn-in adaptation shape the proposal; a genuinely broken setup
        # still aborts through the zero-acceptance guard below.
        if exc.best is None:
            raise
        start = np.asarray(exc.best[0], dtype=float)
        if unpack_params(start, spec) is None:
            raise

        def safe_target(z):
            try:
                return target(z)
            except NumericError:
                return -math.inf

        try:
            proposal_cov = neg_hessian_inv_at(safe_target, start)
        except SamplerError:
            proposal_cov = 0.01 * np.eye(start.size)
        stalled = True

    def run(x0, cov):
        return random_walk_metropolis(
            target, x0, cov, config.draws,
            burn_in=config.burn_in, thin=config.thin, seed=config.seed,
            target_accept=config.target_accept,
            adapt_window=config.adapt_window,
            initial_scale=config.initial_scale,
        )

    try:
        res = run(start, proposal_cov)
    except SamplerError:
        if not stalled:
            raise
        # A stall can end hard against a density cliff (a common factor at
        # the unit circle), where no proposal scale accepts.  Retry once
        # from the moment-based starting point with an isotropic proposal.
        z0 = pack_params(default_init(raw, spec), spec)
        res = run(z0, 0.01 * np.eye(z0.size))
    order = spec.order
    q_draws = res.draws
    n_keep = q_draws.shape[0]
    natural = np.empty((n_keep, order.p + order.q + 3))
    natural[:, :order.p + order.q + 1] = q_draws[:, :order.p + order.q + 1]
    natural[:, order.p + order.q + 1] = np.exp(q_draws[:, order.p + order.q + 1])
    if spec.lambda_fixed is None:
        natural[:, -1] = np.tanh(q_draws[:, -1])
    else:
        natural[:, -1] = spec.lambda_fixed
    return Chain(
        draws=natural,
        param_names=param_names(order, spec.family),
        acceptance_count=res.acceptance_count,
        proposals=res.proposals,
        proposal_scale=res.scale,
        burn_in=config.burn_in,
        thin=config.thin,
        seed=config.seed,
        lambda_fixed=spec.lambda_fixed,
    )


# ---------------------------------------------------------------------------
# Diagnostics and summaries.
# ---------------------------------------------------------------------------

def _long_run_variance(x):
    """Spectral density at frequency zero from an AIC-selected AR fit.

    Yule-Walker coefficients come from one Levinson-Durbin sweep over orders
    up to min(20, n/10).  A truncated-kernel estimate understates the
    variance badly on slowly mixing chains, inflating Geweke z-scores; the
    AR form stays calibrated there.  The order scan stops early at a
    near-unit root, where the zero-frequency ratio turns unstable.
    """
    n = x.size
    xc = x - x.mean()
    gamma0 = float(xc @ xc) / n
    if gamma0 == 0.0:
        raise NumericError("degenerate chain: zero variance in a window")
    max_order = min(20, n // 10)
    r = np.empty(max_order + 1)
    r[0] = gamma0
    for k in range(1, max_order + 1):
        r[k] = float(xc[:-k] @ xc[k:]) / n
    best_aic = n * math.log(gamma0)
    best_s2 = gamma0
    phi = np.zeros(max_order)
    prev = np.zeros(max_order)
    sigma2 = gamma0
    for p in range(1, max_order + 1):
        prev[:p - 1] = phi[:p - 1]
        kappa = (r[p] - float(phi[:p - 1] @ r[p - 1:0:-1])) / sigma2
        phi[p - 1] = kappa
        for j in range(p - 1):
            phi[j] = prev[j] - kappa * prev[p - 2 - j]
        sigma2 *= 1.0 - kappa * kappa
        denom = 1.0 - float(np.sum(phi[:p]))
        if sigma2 <= 0.0 or abs(denom) < 1e-8:
            break
        aic = n * math.log(sigma2) + 2.0 * p
        if aic < best_aic:
            best_aic = aic
            best_s2 = sigma2 / (denom * denom)
    if best_s2 <= 0.0 or not math.isfinite(best_s2):
        raise NumericError("degenerate chain: nonpositive long-run variance")
    return best_s2


def geweke(chain, frac_first=0.10, frac_last=0.50):
    """Geweke convergence z-scores comparing early and late chain windows."""
    draws = chain.draws if isinstance(chain, Chain) else np.asarray(chain, dtype=float)
    if draws.ndim == 1:
        draws = draws[:, None]
        squeeze = True
    else:
        squeeze = False
    n = draws.shape[0]
    n_a = int(math.floor(frac_first * n))
    n_b = int(math.floor(frac_last * n))
    if n_a < 10 or n_b < 10:
        raise DimensionError(
            "chain too short for Geweke windows (need >= 10 draws per window)"
        )
    z = np.empty(draws.shape[1])
    for j in range(draws.shape[1]):
        a = draws[:n_a, j]
        b = draws[n - n_b:, j]
        var = _long_run_variance(a) / n_a + _long_run_variance(b) / n_b
        z[j] = (a.mean() - b.mean()) / math.sqrt(var)
    return float(z[0]) if squeeze else z


def hpd(draws, level=0.95):
    """Shortest interval containing ceil(level * n) sorted draws."""
    x = np.sort(np.asarray(draws, dtype=float))
    n = x.size
    if n < 100:
        raise DimensionError("hpd requires at least 100 draws")
    if not (0.0 < level < 1.0):
        raise DimensionError("level must lie in (0, 1)")
    m = int(math.ceil(level * n))
    if m >= n:
        return float(x[0]), float(x[-1])
    widths = x[m - 1:] - x[:n - m + 1]
    i = int(np.argmin(widths))
    return float(x[i]), float(x[i + m - 1])


@dataclass(frozen=True)
class FitSummary:
    """Per-parameter posterior summary on the natural scale."""

    param_names: list
    posterior_mean: np.ndarray
    posterior_sd: np.ndarray
    hpd_lower: np.ndarray
    hpd_upper: np.ndarray
    hpd_level: float
    acceptance_rate: float
    geweke_z: np.ndarray


def summarize(chain, level=0.95):
    """Column means, SDs, HPD intervals, acceptance rate and Geweke z.

    Degenerate columns (for example a pinned lambda) get NaN Geweke scores
    and a zero-width HPD instead of raising.
    """
    draws = chain.draws
    d = draws.shape[1]
    mean = draws.mean(axis=0)
    sd = draws.std(axis=0, ddof=1) if draws.shape[0] > 1 else np.zeros(d)
    lower = np.empty(d)
    upper = np.empty(d)
    z = np.full(d, np.nan)
    for j in range(d):
        col = draws[:, j]
        if col.max() == col.min():
            lower[j] = upper[j] = col[0]
            continue
        lower[j], upper[j] = hpd(col, level)
        try:
            z[j] = geweke(col)
        except NumericError:
            pass
    return FitSummary(
        param_names=list(chain.param_names),
        posterior_mean=mean,
        posterior_sd=sd,
        hpd_lower=lower,
        hpd_upper=upper,
        hpd_level=level,
        acceptance_rate=chain.acceptance_rate,
        geweke_z=z,
    )
