# Unit tests for tgarma.forecast: recursion unrolling, back-transform,
# intervals, exclusion handling and the rolling one-step evaluator.
# ==============================================================================
import math

import numpy as np
import pytest

from tgarma.errors import DimensionError, NumericError
from tgarma.forecast import ForecastResult, forecast, rolling_one_step
from tgarma.inference import Chain
from tgarma.model import (Family, ModelOrder, ModelSpec, ParamVector,
                          compute_link, param_names)
from tgarma.transform import Series, inv_boxcox, transform_series


def make_params(beta0, phi=(), theta=(), u=1.0, lam=0.5):
    return ParamVector(
        beta0=beta0, phi=np.asarray(phi, dtype=float),
        theta=np.asarray(theta, dtype=float), u=u, lam=lam,
    )


def fake_chain(draws, order, family=Family.GAMMA, lambda_fixed=None):
    draws = np.asarray(draws, dtype=float)
    if draws.ndim == 1:
        draws = draws.reshape(1, -1)
    return Chain(
        draws=draws, param_names=param_names(order, family),
        acceptance_count=draws.shape[0], proposals=2 * draws.shape[0],
        proposal_scale=1.0, burn_in=0, thin=1, seed=0,
        lambda_fixed=lambda_fixed,
    )


RAW = Series(np.array([2.0, 3.0, 2.5, 4.0, 3.2, 2.8]))


# Hand-unrolled recursions, single draw
# ------------------------------------------------------------------------------
def test_one_step_ar1_hand_oracle():
    """h=1 for (1,0): eta_n = beta0 + phi1 log zf_{n-1}, point inverts it."""
    order = ModelOrder(1, 0)
    spec = ModelSpec(Family.GAMMA, order)
    params = make_params(0.4, phi=[0.3], u=2.0, lam=0.5)
    chain = fake_chain([params.as_array()], order)

    res = forecast(chain, RAW, spec, h=1)
    ts = transform_series(RAW, params.lam, spec.floor_c)
    eta_next = 0.4 + 0.3 * ts.log_values[-1]
    assert res.per_draw_mu[0, 0] == pytest.approx(math.exp(eta_next), rel=1e-12)
    expected = inv_boxcox(math.exp(eta_next), params.lam)
    assert res.point[0] == pytest.approx(expected, rel=1e-12)
    # single draw: the interval collapses onto the point
    assert res.lower[0] == pytest.approx(expected, rel=1e-12)
    assert res.upper[0] == pytest.approx(expected, rel=1e-12)
    assert res.draws_used == 1 and res.draws_excluded == 0


def test_two_step_arma11_future_innovation_is_zero():
    """Step 2 of (1,1): the MA lag falls in the future, so only the AR part
    propagates: eta_{n+1} = beta0 + phi1 * eta_n."""
    order = ModelOrder(1, 1)
    spec = ModelSpec(Family.GAMMA, order)
    params = make_params(0.2, phi=[0.5], theta=[0.4], u=1.0, lam=0.5)
    chain = fake_chain([params.as_array()], order)

    ts = transform_series(RAW, params.lam, spec.floor_c)
    link = compute_link(ts, params, order)
    g_last = ts.log_values[-1]
    eta_f0 = 0.2 + 0.5 * g_last + 0.4 * (g_last - link.eta[-1])
    eta_f1 = 0.2 + 0.5 * eta_f0

    res = forecast(chain, RAW, spec, h=2)
    assert res.per_draw_mu[0] == pytest.approx(
        [math.exp(eta_f0), math.exp(eta_f1)], rel=1e-12
    )
    assert res.point == pytest.approx(
        inv_boxcox(np.exp([eta_f0, eta_f1]), params.lam), rel=1e-12
    )


def test_identity_transform_back_adds_one():
    """lam=1 means z = y - 1, so the point forecast is mu_hat + 1."""
    order = ModelOrder(1, 0)
    spec = ModelSpec(Family.GAMMA, order)
    params = make_params(0.3, phi=[0.2], u=1.0, lam=1.0)
    chain = fake_chain([params.as_array()], order)
    res = forecast(chain, RAW, spec, h=3)
    assert res.point == pytest.approx(res.per_draw_mu[0] + 1.0, rel=1e-12)


def test_per_draw_rows_match_single_draw_runs():
    """Mixed-lambda chains recompute the transform per draw."""
    order = ModelOrder(1, 0)
    spec = ModelSpec(Family.GAMMA, order)
    draws = [
        make_params(0.4, phi=[0.3], u=2.0, lam=0.3).as_array(),
        make_params(0.5, phi=[0.2], u=1.0, lam=0.7).as_array(),
        make_params(0.2, phi=[0.4], u=1.5, lam=1.0).as_array(),
    ]
    combined = forecast(fake_chain(draws, order), RAW, spec, h=2)
    for l, draw in enumerate(draws):
        alone = forecast(fake_chain([draw], order), RAW, spec, h=2)
        assert combined.per_draw_mu[l] == pytest.approx(
            alone.per_draw_mu[0], rel=1e-12
        )


# Points and intervals across draws
# ------------------------------------------------------------------------------
def test_point_mean_vs_median_and_quantiles():
    order = ModelOrder(0, 0)
    spec = ModelSpec(Family.GAMMA, order)
    betas = [0.2, 0.5, 1.1]
    draws = [make_params(b, u=1.0, lam=0.5).as_array() for b in betas]
    chain = fake_chain(draws, order)
    values = inv_boxcox(np.exp(np.array(betas)), 0.5)

    mean_res = forecast(chain, RAW, spec, h=1, point="mean")
    med_res = forecast(chain, RAW, spec, h=1, point="median")
    assert mean_res.point[0] == pytest.approx(values.mean(), rel=1e-12)
    assert med_res.point[0] == pytest.approx(np.median(values), rel=1e-12)
    assert med_res.point_method == "median"
    # central 50% interval = quantiles of the three back-transformed values
    half = forecast(chain, RAW, spec, h=1, level=0.5)
    assert half.lower[0] == pytest.approx(np.quantile(values, 0.25), rel=1e-12)
    assert half.upper[0] == pytest.approx(np.quantile(values, 0.75), rel=1e-12)
    assert half.lower[0] <= med_res.point[0] <= half.upper[0]


def test_degenerate_chain_zero_width_interval():
    order = ModelOrder(1, 0)
    spec = ModelSpec(Family.GAMMA, order)
    draw = make_params(0.4, phi=[0.3], u=2.0, lam=0.5).as_array()
    chain = fake_chain([draw] * 10, order)
    res = forecast(chain, RAW, spec, h=2)
    assert res.lower == pytest.approx(res.point, rel=1e-12)
    assert res.upper == pytest.approx(res.point, rel=1e-12)


# Back-transform exclusions
# ------------------------------------------------------------------------------
def bad_draw():
    # lam z + 1 <= 0: lam = -0.9 and mu = e^5 ~ 148 leaves the invertible
    # range, so this draw cannot be back-transformed.
    return make_params(5.0, u=1.0, lam=-0.9).as_array()


def test_all_draws_failing_raises():
    order = ModelOrder(0, 0)
    spec = ModelSpec(Family.GAMMA, order)
    chain = fake_chain([bad_draw()], order)
    with pytest.raises(NumericError, match="back-transform failed"):
        forecast(chain, RAW, spec, h=1)


def test_exclusion_fraction_boundary():
    """1 bad draw in 100 is tolerated (1%), 1 in 10 is not."""
    order = ModelOrder(0, 0)
    spec = ModelSpec(Family.GAMMA, order)
    good = make_params(0.5, u=1.0, lam=0.5).as_array()

    ok_chain = fake_chain([good] * 99 + [bad_draw()], order)
    res = forecast(ok_chain, RAW, spec, h=1)
    assert res.draws_used == 99 and res.draws_excluded == 1
    assert res.point[0] == pytest.approx(
        inv_boxcox(math.exp(0.5), 0.5), rel=1e-12
    )

    small = fake_chain([good] * 9 + [bad_draw()], order)
    with pytest.raises(NumericError, match="1 of 10"):
        forecast(small, RAW, spec, h=1)


# Observation noise
# ------------------------------------------------------------------------------
def test_observation_noise_widens_and_is_seeded():
    order = ModelOrder(1, 0)
    spec = ModelSpec(Family.GAMMA, order)
    draw = make_params(0.4, phi=[0.3], u=2.0, lam=0.5).as_array()
    chain = fake_chain([draw] * 200, order)

    noiseless = forecast(chain, RAW, spec, h=2)
    noisy = forecast(chain, RAW, spec, h=2, observation_noise=True, seed=5)
    assert np.all(noiseless.upper - noiseless.lower == 0.0)
    assert np.all(noisy.upper - noisy.lower > 0.0)
    assert noisy.observation_noise and not noiseless.observation_noise

    again = forecast(chain, RAW, spec, h=2, observation_noise=True, seed=5)
    other = forecast(chain, RAW, spec, h=2, observation_noise=True, seed=6)
    assert np.array_equal(noisy.point, again.point)
    assert not np.array_equal(noisy.point, other.point)


# Validation
# ------------------------------------------------------------------------------
def test_forecast_validation_errors():
    order = ModelOrder(1, 0)
    spec = ModelSpec(Family.GAMMA, order)
    draw = make_params(0.4, phi=[0.3], u=2.0, lam=0.5).as_array()
    chain = fake_chain([draw], order)
    with pytest.raises(DimensionError, match="horizon"):
        forecast(chain, RAW, spec, h=0)
    for lvl in (0.0, 1.0, -0.2):
        with pytest.raises(DimensionError, match="level"):
            forecast(chain, RAW, spec, h=1, level=lvl)
    with pytest.raises(DimensionError, match="point"):
        forecast(chain, RAW, spec, h=1, point="mode")
    empty = fake_chain(np.empty((0, 4)), order)
    with pytest.raises(DimensionError, match="empty"):
        forecast(empty, RAW, spec, h=1)


def test_forecast_result_type():
    order = ModelOrder(0, 0)
    spec = ModelSpec(Family.GAMMA, order)
    chain = fake_chain([make_params(0.5).as_array()], order)
    res = forecast(chain, RAW, spec, h=4, level=0.8)
    assert isinstance(res, ForecastResult)
    assert res.horizon == 4 and res.level == 0.8
    assert res.point.shape == res.lower.shape == res.upper.shape == (4,)
    assert res.per_draw_mu.shape == (1, 4)


# Rolling one-step evaluation
# ------------------------------------------------------------------------------
def test_rolling_one_step_hand_oracle():
    """Each holdout point is predicted from all actuals before it."""
    order = ModelOrder(1, 0)
    spec = ModelSpec(Family.GAMMA, order)
    params = make_params(0.4, phi=[0.3], u=2.0, lam=0.5)
    chain = fake_chain([params.as_array()], order)
    n_fit = 4

    pts, los, ups = rolling_one_step(chain, RAW, n_fit, spec)
    ts = transform_series(RAW, params.lam, spec.floor_c)
    for k in range(RAW.n - n_fit):
        eta = 0.4 + 0.3 * ts.log_values[n_fit + k - 1]
        expected = inv_boxcox(math.exp(eta), params.lam)
        assert pts[k] == pytest.approx(expected, rel=1e-12)
        assert los[k] == pytest.approx(expected, rel=1e-12)
        assert ups[k] == pytest.approx(expected, rel=1e-12)


def test_rolling_one_step_validation():
    order = ModelOrder(1, 0)
    spec = ModelSpec(Family.GAMMA, order)
    chain = fake_chain([make_params(0.4, phi=[0.3]).as_array()], order)
    with pytest.raises(DimensionError, match="holdout"):
        rolling_one_step(chain, RAW, RAW.n, spec)
    with pytest.raises(DimensionError, match="fit window"):
        rolling_one_step(chain, RAW, spec.order.r, spec)
