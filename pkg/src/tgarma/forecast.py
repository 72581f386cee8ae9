"""h-step-ahead prediction from a posterior chain.

Each draw extends the link recursion past the end of the sample: lagged
values that fall inside the sample use the observed (floored) transformed
data, lags that fall in the future use the draw's own predicted conditional
mean, and future MA innovations are zero.  The per-draw trajectory is
back-transformed with that draw's lam; points and intervals are taken
across draws on the original scale.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, DomainError, NumericError
from .model import ParamVector, compute_link, sample_family
from .transform import Series, inv_boxcox, transform_series

# A forecast where more than this fraction of draws fail the inverse
# transform is considered unusable.
MAX_EXCLUDED_FRACTION = 0.01

POINT_METHODS = ("mean", "median")


@dataclass(frozen=True)
class ForecastResult:
    """Original-scale forecasts with quantile intervals across draws."""

    horizon: int
    point: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    level: float
    per_draw_mu: np.ndarray
    draws_used: int
    draws_excluded: int
    point_method: str
    observation_noise: bool


def _extend_recursion(params, order, ts, h):
    """Future conditional means on the transformed scale for one draw."""
    n = ts.n
    link = compute_link(ts, params, order)
    # g[t]: log of the value a lag at position t contributes; observed
    # positions use the floored data, future positions the predicted eta.
    g = np.concatenate([ts.log_values, np.zeros(h)])
    eta = np.concatenate([link.eta, np.zeros(h)])
    for k in range(h):
        t = n + k
        acc = params.beta0
        for j in range(order.p):
            acc += params.phi[j] * g[t - 1 - j]
        for j in range(order.q):
            lag = t - 1 - j
            # Future innovations are zero because g[lag] = eta[lag] there.
            acc += params.theta[j] * (g[lag] - eta[lag])
        eta[t] = acc
        g[t] = acc
    eta_future = eta[n:]
    with np.errstate(over="ignore"):
        mu_future = np.exp(eta_future)
    return mu_future


def _simulate_future(params, order, ts, h, spec, rng):
    """Sample one future path on the transformed scale for one draw."""
    n = ts.n
    link = compute_link(ts, params, order)
    g = np.concatenate([ts.log_values, np.zeros(h)])
    eta = np.concatenate([link.eta, np.zeros(h)])
    path = np.empty(h)
    for k in range(h):
        t = n + k
        acc = params.beta0
        for j in range(order.p):
            acc += params.phi[j] * g[t - 1 - j]
        for j in range(order.q):
            lag = t - 1 - j
            acc += params.theta[j] * (g[lag] - eta[lag])
        eta[t] = acc
        mu = math.exp(min(acc, 700.0))
        z = float(sample_family(rng, spec.family, mu, params.u))
        path[k] = z
        g[t] = math.log(max(z, spec.floor_c))
    return path


def forecast(chain, raw, spec, h, level=0.95, point="mean",
             observation_noise=False, seed=0):
    """Forecast h steps ahead from the end of the raw series.

    point selects the across-draw summary ("mean" or "median").  With
    observation_noise=True, future observations are simulated from the
    conditional family along each draw's path, so the intervals cover new
    data rather than the conditional mean.  Draws whose back-transform
    leaves the invertible range are excluded; more than 1% of them is an
    error.
    """
    if h < 1:
        raise DimensionError("horizon must be >= 1")
    if not (0.0 < level < 1.0):
        raise DimensionError("level must lie in (0, 1)")
    if point not in POINT_METHODS:
        raise DimensionError(f"point must be one of {POINT_METHODS}")
    if not isinstance(raw, Series):
        raw = Series(np.asarray(raw, dtype=float))
    draws = chain.draws
    n_draws = draws.shape[0]
    if n_draws == 0:
        raise DimensionError("chain is empty")
    order = spec.order

    rng = np.random.default_rng(seed)
    per_draw_mu = np.empty((n_draws, h))
    original = np.full((n_draws, h), np.nan)
    ok = np.zeros(n_draws, dtype=bool)
    lam_cache = {}
    for l in range(n_draws):
        params = ParamVector.from_array(draws[l], order)
        ts = lam_cache.get(params.lam)
        if ts is None:
            ts = transform_series(raw, params.lam, spec.floor_c)
            if len(lam_cache) < 2:  # worthwhile only for pinned-lam chains
                lam_cache[params.lam] = ts
        mu_future = _extend_recursion(params, order, ts, h)
        per_draw_mu[l] = mu_future
        target = (_simulate_future(params, order, ts, h, spec, rng)
                  if observation_noise else mu_future)
        try:
            back = inv_boxcox(target, params.lam)
        except DomainError:
            continue
        if np.all(np.isfinite(back)):
            original[l] = back
            ok[l] = True
    used = int(np.sum(ok))
    excluded = n_draws - used
    if used == 0 or excluded > MAX_EXCLUDED_FRACTION * n_draws:
        raise NumericError(
            f"back-transform failed for {excluded} of {n_draws} draws"
        )
    kept = original[ok]
    if point == "mean":
        pt = kept.mean(axis=0)
    else:
        pt = np.median(kept, axis=0)
    alpha = 1.0 - level
    lower = np.quantile(kept, alpha / 2.0, axis=0)
    upper = np.quantile(kept, 1.0 - alpha / 2.0, axis=0)
    return ForecastResult(
        horizon=int(h),
        point=pt,
        lower=lower,
        upper=upper,
        level=float(level),
        per_draw_mu=per_draw_mu,
        draws_used=int(used),
        draws_excluded=int(excluded),
        point_method=point,
        observation_noise=bool(observation_noise),
    )


def rolling_one_step(chain, full, n_fit, spec, level=0.95, point="mean"):
    """One-step-ahead forecasts over a trailing holdout block.

    The posterior (chain) comes from a fit on the first n_fit observations;
    each holdout position is then predicted with h=1 using all actual
    observations before it, mirroring an expanding-window evaluation with a
    fixed posterior.  Returns (points, lowers, uppers) arrays of length
    n - n_fit.
    """
    if not isinstance(full, Series):
        full = Series(np.asarray(full, dtype=float))
    n_hold = full.n - n_fit
    if n_hold < 1:
        raise DimensionError("holdout is empty")
    if n_fit <= spec.order.r:
        raise DimensionError("fit window shorter than the model memory")
    pts = np.empty(n_hold)
    los = np.empty(n_hold)
    ups = np.empty(n_hold)
    for k in range(n_hold):
        past = Series(full.values[:n_fit + k])
        res = forecast(chain, past, spec, h=1, level=level, point=point)
        pts[k] = res.point[0]
        los[k] = res.lower[0]
        ups[k] = res.upper[0]
    return pts, los, ups
