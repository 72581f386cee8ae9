# End-to-end acceptance checks: ten numbered checks covering the transform,
# the conditional densities, the sampler, parameter recovery, convergence,
# order selection, real-data reproduction, forecasting, residual calibration
# and artifact determinism.  Each check prints one line
#
#     check NN <name>: PASS|FAIL (<details>)
#
# so running `pytest -s tests/test_acceptance.py` doubles as a report.  The
# m = 100 posterior studies behind checks 4-6 run as session fixtures and
# dominate the runtime (several minutes).  Checks 7 and 8 need the real
# series described in data/README.md and skip when the file is absent.
# ==============================================================================
from pathlib import Path

import numpy as np
import pytest
from scipy import integrate, stats

from tgarma import cli, dataio
from tgarma.assess import criteria_report, mape, quantile_residuals
from tgarma.errors import SamplerError
from tgarma.forecast import rolling_one_step
from tgarma.inference import (MCMCConfig, PriorSpec, mh_sample,
                              random_walk_metropolis, summarize)
from tgarma.model import Family, ModelOrder, ModelSpec, ParamVector, family_logpdf
from tgarma.simlab import (SimConfig, run_replication_study,
                           run_selection_study, simulate_tgarma)
from tgarma.transform import boxcox, inv_boxcox

REAL_DATA = Path(__file__).resolve().parent.parent / "data" / "swedish_fertility.csv"
needs_real_data = pytest.mark.skipif(
    not REAL_DATA.exists(),
    reason="real series not present; see data/README.md",
)

# Truth shared by the simulation studies: gamma TGARMA(1,1).
TRUTH = ParamVector(beta0=0.7, phi=np.array([0.3]), theta=np.array([0.5]),
                    u=0.5, lam=0.3)
ORDER_11 = ModelOrder(1, 1)
STUDY_MCMC = MCMCConfig(draws=3000, burn_in=800, thin=3)


def report(num, name, ok, detail):
    line = f"check {num:02d} {name}: {'PASS' if ok else 'FAIL'} ({detail})"
    print(line)
    return line


def fit_with_backoff(priors, series, spec, mcmc):
    """Retry a fit with shrinking proposal scales after a zero-acceptance abort."""
    last = None
    for scale in (None, 0.5, 0.1, 0.02):
        try:
            return mh_sample(priors, series, spec,
                             MCMCConfig(draws=mcmc.draws, burn_in=mcmc.burn_in,
                                        thin=mcmc.thin, seed=mcmc.seed,
                                        initial_scale=scale))
        except SamplerError as exc:
            last = exc
    raise last


# Session fixtures: the two m = 100 studies and the real-data fits.
# ------------------------------------------------------------------------------
@pytest.fixture(scope="session")
def recovery_study():
    cfg = SimConfig(true_params=TRUTH, order=ORDER_11, family=Family.GAMMA,
                    n=1000, m=100, seed=42, mcmc=STUDY_MCMC, floor_c=1e-6)
    return run_replication_study(cfg)


@pytest.fixture(scope="session")
def selection_study():
    cfg = SimConfig(true_params=TRUTH, order=ORDER_11, family=Family.GAMMA,
                    n=1000, m=100, seed=2024, mcmc=STUDY_MCMC, floor_c=1e-6,
                    criteria_models=(ModelOrder(1, 1), ModelOrder(2, 2)))
    return run_selection_study(cfg)


@pytest.fixture(scope="session")
def real_fits():
    series = dataio.load_series(REAL_DATA)
    fits = {}
    for family in (Family.GAMMA, Family.INVERSE_GAUSSIAN):
        for order in (ModelOrder(1, 0), ModelOrder(2, 2)):
            spec = ModelSpec(family=family, order=order)
            chain = fit_with_backoff(PriorSpec(), series, spec, MCMCConfig())
            fits[(family.value, order.p, order.q)] = (chain, spec)
    return series, fits


# check 01: Box-Cox round trip and continuity at the log branch
# ------------------------------------------------------------------------------
def test_check01_transform():
    y = np.logspace(-1.0, 2.0, 241)
    worst_rt = 0.0
    for lam in (-1.0, -0.5, -0.2, -1e-8, 0.0, 1e-8, 0.31, 0.5, 1.0):
        back = inv_boxcox(boxcox(y, lam), lam)
        worst_rt = max(worst_rt, float(np.max(np.abs(back - y) / np.maximum(1.0, y))))

    y2 = np.linspace(0.5, 5.0, 201)
    worst_ct = 0.0
    for lam in (1e-8, -1e-8, 2e-7, -2e-7):
        worst_ct = max(worst_ct, float(np.max(np.abs(boxcox(y2, lam) - np.log(y2)))))

    ok = worst_rt <= 1e-10 and worst_ct <= 1e-6
    line = report(1, "transform", ok,
                  f"round-trip err {worst_rt:.2e} <= 1e-10, "
                  f"log-limit err {worst_ct:.2e} <= 1e-6")
    assert ok, line


# check 02: conditional densities integrate to one
# ------------------------------------------------------------------------------
def test_check02_density_normalization():
    worst = 0.0
    for family in (Family.GAMMA, Family.INVERSE_GAUSSIAN):
        for mu in (0.5, 1.0, 3.0):
            for u in (0.5, 2.0, 8.0):
                val, _ = integrate.quad(
                    lambda t: np.exp(family_logpdf(family, t, mu, u)),
                    0.0, np.inf, limit=200)
                worst = max(worst, abs(val - 1.0))
    ok = worst <= 1e-6
    line = report(2, "density normalization", ok,
                  f"worst |integral - 1| {worst:.2e} <= 1e-6 over 9-point grids")
    assert ok, line


# check 03: sampler validity on an injected 2-D standard normal
# ------------------------------------------------------------------------------
def test_check03_sampler_normal_target():
    def log_density(x):
        return -0.5 * float(x @ x)

    ks_pass = 0
    mean_err = cov_err = None
    for seed in range(100):
        res = random_walk_metropolis(log_density, np.zeros(2), np.eye(2),
                                     n_keep=5000, burn_in=1000, thin=3,
                                     seed=seed)
        if seed == 0:
            mean_err = float(np.max(np.abs(res.draws.mean(axis=0))))
            cov_err = float(np.max(np.abs(np.cov(res.draws.T) - np.eye(2))))
        # KS on the squared radius (chi-squared with 2 df), thinned again to
        # cut the residual autocorrelation of the kept draws
        r2 = np.sum(res.draws[::5] ** 2, axis=1)
        ks_pass += stats.kstest(r2, "chi2", args=(2,)).pvalue > 0.01

    ok = mean_err <= 0.05 and cov_err <= 0.1 and ks_pass >= 95
    line = report(3, "sampler validity", ok,
                  f"mean err {mean_err:.3f} <= 0.05, cov err {cov_err:.3f} "
                  f"<= 0.1, KS pass {ks_pass}/100 >= 95")
    assert ok, line


# checks 04-05: parameter recovery and convergence over m = 100 refits
# ------------------------------------------------------------------------------
CB_BOUNDS = {"beta0": 0.4086, "phi1": 0.2572, "theta1": 0.1936,
             "nu": 0.1556, "lambda": 0.3508}


def test_check04_parameter_recovery(recovery_study):
    rep = recovery_study
    fails = []
    for j, name in enumerate(rep.param_names):
        if not rep.cb[j] <= CB_BOUNDS[name]:
            fails.append(f"cb[{name}]={rep.cb[j]:.3f}>{CB_BOUNDS[name]}")
        if not 0.8 <= rep.ce[j] <= 1.2:
            fails.append(f"ce[{name}]={rep.ce[j]:.3f}")
    if not 0.3 <= rep.ap <= 0.8:
        fails.append(f"ap={rep.ap:.3f}")
    cb_worst = max(rep.cb[j] / CB_BOUNDS[n] for j, n in enumerate(rep.param_names))
    ok = not fails and rep.m_completed == 100
    line = report(4, "parameter recovery", ok,
                  f"m={rep.m_completed}, worst cb/bound {cb_worst:.2f}, "
                  f"ce {rep.ce.min():.2f}-{rep.ce.max():.2f}, ap {rep.ap:.2f}"
                  + ("; " + ", ".join(fails) if fails else ""))
    assert ok, line


def test_check05_convergence(recovery_study):
    z = np.asarray(recovery_study.geweke_z, dtype=float)
    frac = float(np.mean(np.abs(z) < 2.0))
    ok = frac >= 0.90
    line = report(5, "convergence", ok,
                  f"|geweke z| < 2 for {frac:.1%} of {z.size} values >= 90%")
    assert ok, line


# check 06: order selection between the generating (1,1) and a nesting (2,2)
# ------------------------------------------------------------------------------
def test_check06_selection_ebic(selection_study):
    rep = selection_study
    prop = rep.proportions["ebic"][rep.true_index]
    ok = prop >= 0.85 and rep.m_completed == 100
    line = report(6, "selection (ebic)", ok,
                  f"ebic correct-pick {prop:.2f} >= 0.85 over m={rep.m_completed}")
    assert ok, line


def test_check06_selection_dic(selection_study):
    # Known deficit, kept as a hard assertion.  The (2,2) candidate nests the
    # generating (1,1) model along a flat common-factor direction, and the
    # plug-in penalty (posterior-mean deviance minus deviance at the mean)
    # charges only about 1.1 of the 2 extra parameters there, so the two
    # models sit within a couple of DIC units and the correct-pick rate
    # hovers near 1/3 regardless of chain length.  Relaxing the bound or
    # detuning the sampler to inflate the penalty would misstate what the
    # criterion does, so the 0.6 bar stays and this check stays red.
    rep = selection_study
    prop = rep.proportions["dic"][rep.true_index]
    ok = prop >= 0.6
    line = report(6, "selection (dic)", ok,
                  f"dic correct-pick {prop:.2f} >= 0.6 over m={rep.m_completed}")
    assert ok, line


# check 07: real-data posterior and criteria orderings
# ------------------------------------------------------------------------------
@needs_real_data
def test_check07_real_data_posterior(real_fits):
    series, fits = real_fits
    chain, spec = fits[("gamma", 1, 0)]
    summary = summarize(chain)
    means = dict(zip(summary.param_names, summary.posterior_mean))
    bands = {"beta0": (0.7888, 0.16), "phi1": (0.7157, 0.07),
             "nu": (3.478, 1.1), "lambda": (0.3145, 0.10)}
    fails = [f"{name}={means[name]:.3f} outside {c}+-{w}"
             for name, (c, w) in bands.items()
             if not c - w <= means[name] <= c + w]

    crit = {key: criteria_report(ch, series, sp)
            for key, (ch, sp) in fits.items()}
    if not crit[("gamma", 1, 0)].dic < crit[("gamma", 2, 2)].dic:
        fails.append("gamma dic(1,0) !< dic(2,2)")
    for p, q in ((1, 0), (2, 2)):
        g, ig = crit[("gamma", p, q)], crit[("invgauss", p, q)]
        if not (g.dic < ig.dic and g.ebic < ig.ebic and g.cpo > ig.cpo):
            fails.append(f"gamma does not beat invgauss at ({p},{q})")

    ok = not fails
    line = report(7, "real data", ok,
                  ", ".join(f"{k}={means[k]:.3f}" for k in bands)
                  + ("; " + ", ".join(fails) if fails else ""))
    assert ok, line


# check 08: one-step holdout forecast error on the real series
# ------------------------------------------------------------------------------
@needs_real_data
def test_check08_forecast_mape(real_fits):
    series, _ = real_fits
    n_fit = series.n - 6
    spec = ModelSpec(family=Family.GAMMA, order=ModelOrder(1, 0))
    chain = fit_with_backoff(PriorSpec(),
                             np.asarray(series.values[:n_fit]), spec,
                             MCMCConfig())
    pts, _, _ = rolling_one_step(chain, series, n_fit, spec)
    err = mape(series.values[n_fit:], pts)
    ok = err <= 6.0
    line = report(8, "forecast", ok,
                  f"one-step holdout MAPE {err:.2f}% <= 6%")
    assert ok, line


# check 09: quantile residuals of a well-specified fit are standard normal
# ------------------------------------------------------------------------------
def test_check09_residual_calibration():
    n = 500
    spec = ModelSpec(family=Family.GAMMA, order=ORDER_11, floor_c=1e-6)
    ad_pass = 0
    acf_ok = 0
    for seed in range(100):
        series = simulate_tgarma(TRUTH, ORDER_11, Family.GAMMA, n, seed=seed,
                                 floor_c=1e-6)
        chain = mh_sample(PriorSpec(), series, spec,
                          MCMCConfig(draws=1500, burn_in=500, thin=3,
                                     seed=seed))
        res = quantile_residuals(chain, series, spec, maxlag=20)
        ad = stats.anderson(res.residuals, dist="norm")
        # critical_values aligns with significance levels [15,10,5,2.5,1]%
        ad_pass += ad.statistic < ad.critical_values[-1]
        thr = 3.0 / np.sqrt(res.residuals.size)
        acf_ok += int(np.sum(np.abs(res.acf[1:]) < thr))
    acf_frac = acf_ok / (100 * 20)
    ok = ad_pass >= 95 and acf_frac >= 0.90
    line = report(9, "residual calibration", ok,
                  f"AD pass {ad_pass}/100 >= 95, |acf| within band for "
                  f"{acf_frac:.1%} of lags >= 90%")
    assert ok, line


# check 10: byte-identical artifacts across reruns and worker counts
# ------------------------------------------------------------------------------
def test_check10_determinism(tmp_path):
    series = simulate_tgarma(
        ParamVector(beta0=0.5, phi=np.array([0.3]), theta=np.array([]),
                    u=2.0, lam=0.5),
        ModelOrder(1, 0), Family.GAMMA, 60, seed=5)
    data = tmp_path / "series.csv"
    dataio.write_csv(data, ["value"], [(v,) for v in series.values])

    fit_args = ["fit", "--data", str(data), "--draws", "300", "--burn-in",
                "200", "--thin", "1", "--seed", "9"]
    for out in ("f1", "f2"):
        assert cli.main(fit_args + ["--out", str(tmp_path / out)]) == 0

    study = tmp_path / "study.toml"
    study.write_text(
        "n = 80\nm = 2\nseed = 3\nfamily = \"gamma\"\norder = [1, 0]\n\n"
        "[true_params]\nbeta0 = 0.5\nphi = [0.3]\nu = 2.0\nlambda = 0.5\n\n"
        "[mcmc]\ndraws = 150\nburn_in = 120\nthin = 1\n")
    for out, workers in (("s1", "1"), ("s2", "1"), ("s4", "2")):
        assert cli.main(["simulate", "--config", str(study), "--workers",
                         workers, "--out", str(tmp_path / out)]) == 0

    mismatches = []
    for name in ("chain.csv", "chain_meta.json", "summary.json"):
        if (tmp_path / "f1" / name).read_bytes() != \
                (tmp_path / "f2" / name).read_bytes():
            mismatches.append(f"fit rerun {name}")
    for other in ("s2", "s4"):
        for name in ("replication.csv", "replication.json"):
            if (tmp_path / "s1" / name).read_bytes() != \
                    (tmp_path / other / name).read_bytes():
                mismatches.append(f"study {other} {name}")

    ok = not mismatches
    line = report(10, "determinism", ok,
                  "fit rerun and study workers 1/1/2 byte-identical"
                  if ok else ", ".join(mismatches))
    assert ok, line
