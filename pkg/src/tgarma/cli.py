"""Command-line pipeline: fit, select, forecast, residuals and the two
simulation studies.

Every artifact embeds the resolved configuration and seed; all numeric
output is deterministic under a fixed seed.  Tables printed to the console
use 4 decimal places, stored CSV/JSON keep full precision.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric or
sampler error.
"""

import argparse
import json
import os
import sys

from . import assess, dataio, simlab
from .forecast import forecast as forecast_draws
from .forecast import rolling_one_step
from .errors import (ConfigError, DataError, DimensionError, DomainError,
                     NumericError, SamplerError)
from .inference import MCMCConfig, PriorSpec, mh_sample, summarize
from .model import Family, ModelOrder, ModelSpec
from .transform import Series


def _model_args(parser):
    parser.add_argument("--family", choices=["gamma", "invgauss"],
                        default="gamma")
    parser.add_argument("--p", type=int, default=1, help="AR order")
    parser.add_argument("--q", type=int, default=0, help="MA order")
    parser.add_argument("--lambda-fixed", type=float, default=None,
                        dest="lambda_fixed",
                        help="pin the Box-Cox lambda instead of sampling it")
    parser.add_argument("--floor-c", type=float, default=0.01,
                        dest="floor_c",
                        help="floor applied to transformed values")
    parser.add_argument("--include-jacobian", action=argparse.BooleanOptionalAction,
                        default=True, dest="include_jacobian",
                        help="carry the Box-Cox data Jacobian in the target "
                             "(on by default; required for sampling lambda)")


def _mcmc_args(parser):
    parser.add_argument("--draws", type=int, default=5000,
                        help="kept posterior draws")
    parser.add_argument("--burn-in", type=int, default=1000, dest="burn_in")
    parser.add_argument("--thin", type=int, default=3)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--target-accept", type=float, nargs=2,
                        default=[0.3, 0.6], dest="target_accept",
                        metavar=("LO", "HI"))


def _prior_args(parser):
    parser.add_argument("--prior-var", type=float, default=200.0,
                        dest="prior_var",
                        help="variance of the normal priors on beta0/phi/theta")
    parser.add_argument("--prior-u-logmean", type=float, default=0.0,
                        dest="prior_u_logmean")
    parser.add_argument("--prior-u-logvar", type=float, default=200.0,
                        dest="prior_u_logvar")


def _study_args(parser):
    parser.add_argument("--config", required=True,
                        help="study settings file (.json or .toml)")
    parser.add_argument("--m", type=int, default=None,
                        help="override replication count")
    parser.add_argument("--seed", type=int, default=None,
                        help="override master seed")
    parser.add_argument("--workers", type=int, default=None,
                        help="override worker count")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="tgarma",
        description="Bayesian transformed GARMA models for positive time series",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="sample the posterior and summarize")
    p_fit.add_argument("--data", required=True)
    _model_args(p_fit)
    _mcmc_args(p_fit)
    _prior_args(p_fit)
    p_fit.add_argument("--out", required=True)
    p_fit.set_defaults(func=cmd_fit)

    p_sel = sub.add_parser("select",
                           help="selection criteria over candidate models")
    p_sel.add_argument("--data", required=True)
    p_sel.add_argument("--orders", nargs="+", required=True,
                       metavar="P,Q", help="candidate orders, e.g. 1,0 1,1")
    p_sel.add_argument("--families", nargs="+",
                       choices=["gamma", "invgauss"],
                       default=["gamma", "invgauss"])
    p_sel.add_argument("--lambda-fixed", type=float, default=None,
                       dest="lambda_fixed")
    p_sel.add_argument("--floor-c", type=float, default=0.01, dest="floor_c")
    p_sel.add_argument("--include-jacobian", action=argparse.BooleanOptionalAction,
                       default=True, dest="include_jacobian")
    _mcmc_args(p_sel)
    _prior_args(p_sel)
    p_sel.add_argument("--out", required=True)
    p_sel.set_defaults(func=cmd_select)

    p_fc = sub.add_parser("forecast", help="h-step or holdout forecasting")
    p_fc.add_argument("--data", required=True)
    _model_args(p_fc)
    _mcmc_args(p_fc)
    _prior_args(p_fc)
    p_fc.add_argument("--horizon", type=int, default=6)
    p_fc.add_argument("--level", type=float, default=0.95)
    p_fc.add_argument("--point", choices=["mean", "median"], default="mean")
    p_fc.add_argument("--holdout", type=int, default=0,
                      help="fit without the trailing block, then one-step "
                           "predict it and report MAPE")
    p_fc.add_argument("--predictive", action="store_true",
                      help="sample observation noise for full predictive "
                           "intervals")
    p_fc.add_argument("--out", required=True)
    p_fc.set_defaults(func=cmd_forecast)

    p_res = sub.add_parser("residuals", help="quantile residual diagnostics")
    p_res.add_argument("--data", required=True)
    _model_args(p_res)
    _mcmc_args(p_res)
    _prior_args(p_res)
    p_res.add_argument("--maxlag", type=int, default=20)
    p_res.add_argument("--posterior-averaged", action="store_true",
                       dest="posterior_averaged",
                       help="average the conditional CDF over draws instead "
                            "of plugging in the posterior mean")
    p_res.add_argument("--out", required=True)
    p_res.set_defaults(func=cmd_residuals)

    p_sim = sub.add_parser("simulate",
                           help="parameter-recovery replication study")
    _study_args(p_sim)
    p_sim.add_argument("--out", required=True)
    p_sim.set_defaults(func=cmd_simulate)

    p_ss = sub.add_parser("select-study",
                          help="model-selection proportion study")
    _study_args(p_ss)
    p_ss.add_argument("--out", required=True)
    p_ss.set_defaults(func=cmd_select_study)
    return parser


# ---------------------------------------------------------------------------
# Shared plumbing.
# ---------------------------------------------------------------------------

def _check_positive(name, value, minimum=1):
    if value < minimum:
        raise ConfigError(f"--{name} must be >= {minimum}, got {value}")


def _validate_common(args):
    _check_positive("draws", args.draws)
    _check_positive("burn-in", args.burn_in, minimum=0)
    _check_positive("thin", args.thin)
    lo, hi = args.target_accept
    if not (0.0 < lo < hi < 1.0):
        raise ConfigError("--target-accept must satisfy 0 < LO < HI < 1")
    if not (0.0 < args.floor_c < 1.0):
        raise ConfigError("--floor-c must lie in (0, 1)")
    if args.lambda_fixed is not None and not (-1.0 <= args.lambda_fixed <= 1.0):
        raise ConfigError("--lambda-fixed must lie in [-1, 1]")
    if args.prior_var <= 0 or args.prior_u_logvar <= 0:
        raise ConfigError("prior variances must be positive")


def _spec_from_args(args, p=None, q=None, family=None):
    try:
        order = ModelOrder(args.p if p is None else p,
                           args.q if q is None else q)
        return ModelSpec(
            family=Family.from_name(family or args.family),
            order=order,
            floor_c=args.floor_c,
            lambda_fixed=args.lambda_fixed,
            include_jacobian=args.include_jacobian,
        )
    except (DomainError, DimensionError) as exc:
        raise ConfigError(str(exc))


def _priors_from_args(args):
    return PriorSpec(
        beta0_var=args.prior_var,
        phi_var=args.prior_var,
        theta_var=args.prior_var,
        u_logmean=args.prior_u_logmean,
        u_logvar=args.prior_u_logvar,
    )


def _mcmc_from_args(args):
    return MCMCConfig(
        draws=args.draws,
        burn_in=args.burn_in,
        thin=args.thin,
        seed=args.seed,
        target_accept=tuple(args.target_accept),
    )


def _resolved_config(args, command, **extra):
    cfg = {
        "command": command,
        "data": args.data,
        "floor_c": args.floor_c,
        "lambda_fixed": args.lambda_fixed,
        "include_jacobian": getattr(args, "include_jacobian", False),
        "draws": args.draws,
        "burn_in": args.burn_in,
        "thin": args.thin,
        "seed": args.seed,
        "target_accept": list(args.target_accept),
        "prior_var": args.prior_var,
        "prior_u_logmean": args.prior_u_logmean,
        "prior_u_logvar": args.prior_u_logvar,
    }
    cfg.update(extra)
    return cfg


def _ensure_out(args):
    os.makedirs(args.out, exist_ok=True)
    return args.out


def _print_table(header, rows):
    """Console table at 4 decimal places."""
    def cell(x):
        return f"{x:.4f}" if isinstance(x, float) else str(x)

    str_rows = [[cell(x) for x in row] for row in rows]
    widths = [max(len(h), *(len(r[i]) for r in str_rows)) if str_rows
              else len(h) for i, h in enumerate(header)]
    line = "  ".join(h.ljust(w) for h, w in zip(header, widths))
    print(line)
    print("-" * len(line))
    for row in str_rows:
        print("  ".join(c.ljust(w) for c, w in zip(row, widths)))


# ---------------------------------------------------------------------------
# Commands.
# ---------------------------------------------------------------------------

def cmd_fit(args):
    _validate_common(args)
    spec = _spec_from_args(args)
    series = dataio.load_series(args.data)
    chain = mh_sample(_priors_from_args(args), series, spec,
                      _mcmc_from_args(args))
    summary = summarize(chain)
    out = _ensure_out(args)
    dataio.save_chain(chain, os.path.join(out, "chain.csv"),
                      os.path.join(out, "chain_meta.json"))
    dataio.write_json(os.path.join(out, "summary.json"), {
        "config": _resolved_config(args, "fit", family=args.family,
                                   p=args.p, q=args.q),
        "summary": dataio.summary_to_dict(summary),
    })
    rows = [
        (name, summary.posterior_mean[j], summary.posterior_sd[j],
         summary.hpd_lower[j], summary.hpd_upper[j], summary.geweke_z[j])
        for j, name in enumerate(summary.param_names)
    ]
    _print_table(
        ["parameter", "mean", "sd", "hpd_lower", "hpd_upper", "geweke_z"],
        rows,
    )
    print(f"acceptance rate: {summary.acceptance_rate:.4f}")
    return 0


def _parse_orders(tokens):
    orders = []
    for tok in tokens:
        try:
            p_str, q_str = tok.split(",")
            orders.append(ModelOrder(int(p_str), int(q_str)))
        except (ValueError, DomainError):
            raise ConfigError(f"bad order {tok!r}; expected P,Q like 1,0")
    return orders


def cmd_select(args):
    _validate_common(args)
    orders = _parse_orders(args.orders)
    series = dataio.load_series(args.data)
    priors = _priors_from_args(args)
    mcmc = _mcmc_from_args(args)
    rows = []
    records = []
    for fam_name in args.families:
        for order in orders:
            spec = _spec_from_args(args, p=order.p, q=order.q,
                                   family=fam_name)
            chain = mh_sample(priors, series, spec, mcmc)
            rep = assess.criteria_report(chain, series, spec)
            rows.append((fam_name, order.label, rep.dic, rep.ebic, rep.cpo,
                         rep.n_eff_terms, rep.p_d))
            records.append({
                "family": fam_name, "order": order.label,
                "dic": rep.dic, "ebic": rep.ebic, "cpo": rep.cpo,
                "n_eff_terms": rep.n_eff_terms, "p_d": rep.p_d,
            })
    best = {
        "dic": min(records, key=lambda r: r["dic"]),
        "ebic": min(records, key=lambda r: r["ebic"]),
        "cpo": max(records, key=lambda r: r["cpo"]),
    }
    out = _ensure_out(args)
    dataio.write_csv(
        os.path.join(out, "criteria.csv"),
        ["family", "order", "dic", "ebic", "cpo", "n_eff_terms", "p_d"],
        rows,
    )
    dataio.write_json(os.path.join(out, "select.json"), {
        "config": _resolved_config(args, "select",
                                   families=list(args.families),
                                   orders=[o.label for o in orders]),
        "models": records,
        "best": {k: {"family": v["family"], "order": v["order"]}
                 for k, v in best.items()},
    })
    _print_table(["family", "order", "dic", "ebic", "cpo"],
                 [r[:5] for r in rows])
    return 0


def cmd_forecast(args):
    _validate_common(args)
    if args.horizon < 1:
        raise ConfigError("--horizon must be >= 1")
    if not (0.0 < args.level < 1.0):
        raise ConfigError("--level must lie in (0, 1)")
    if args.holdout < 0:
        raise ConfigError("--holdout must be >= 0")
    spec = _spec_from_args(args)
    full = dataio.load_series(args.data)
    if args.holdout >= full.n:
        raise ConfigError(
            f"--holdout {args.holdout} leaves no data (n={full.n})"
        )
    priors = _priors_from_args(args)
    mcmc = _mcmc_from_args(args)
    out = _ensure_out(args)
    meta = {
        "config": _resolved_config(args, "forecast", family=args.family,
                                   p=args.p, q=args.q,
                                   horizon=args.horizon, level=args.level,
                                   point=args.point, holdout=args.holdout,
                                   predictive=args.predictive),
    }
    if args.holdout > 0:
        n_fit = full.n - args.holdout
        if n_fit <= spec.order.r:
            raise ConfigError("holdout leaves too few observations to fit")
        train = Series(full.values[:n_fit])
        chain = mh_sample(priors, train, spec, mcmc)
        pts, los, ups = rolling_one_step(
            chain, full, n_fit, spec, level=args.level, point=args.point
        )
        actual = full.values[n_fit:]
        mape_val = assess.mape(actual, pts)
        rows = [
            (k + 1, pts[k], los[k], ups[k], actual[k])
            for k in range(args.holdout)
        ]
        dataio.write_csv(os.path.join(out, "forecast.csv"),
                         ["step", "point", "lower", "upper", "actual"], rows)
        meta.update({
            "mode": "holdout-one-step",
            "mape": mape_val,
            "points": list(pts),
            "lower": list(los),
            "upper": list(ups),
            "actual": list(actual),
        })
        print(f"holdout one-step MAPE: {mape_val:.4f}%")
    else:
        chain = mh_sample(priors, full, spec, mcmc)
        res = forecast_draws(chain, full, spec, args.horizon,
                             level=args.level, point=args.point,
                             observation_noise=args.predictive,
                             seed=args.seed)
        rows = [
            (k + 1, res.point[k], res.lower[k], res.upper[k])
            for k in range(res.horizon)
        ]
        dataio.write_csv(os.path.join(out, "forecast.csv"),
                         ["step", "point", "lower", "upper"], rows)
        meta.update({
            "mode": "h-step",
            "mape": None,
            "points": list(res.point),
            "lower": list(res.lower),
            "upper": list(res.upper),
            "draws_used": res.draws_used,
            "draws_excluded": res.draws_excluded,
        })
        _print_table(["step", "point", "lower", "upper"], rows)
    dataio.write_json(os.path.join(out, "forecast.json"), meta)
    return 0


def cmd_residuals(args):
    _validate_common(args)
    if args.maxlag < 1:
        raise ConfigError("--maxlag must be >= 1")
    spec = _spec_from_args(args)
    series = dataio.load_series(args.data)
    chain = mh_sample(_priors_from_args(args), series, spec,
                      _mcmc_from_args(args))
    report = assess.quantile_residuals(
        chain, series, spec, maxlag=args.maxlag,
        posterior_averaged=args.posterior_averaged,
    )
    out = _ensure_out(args)
    lags = list(range(args.maxlag + 1))
    dataio.write_csv(os.path.join(out, "acf.csv"), ["lag", "acf"],
                     list(zip(lags, report.acf)))
    dataio.write_csv(os.path.join(out, "pacf.csv"), ["lag", "pacf"],
                     list(zip(lags, report.pacf)))
    dataio.write_json(os.path.join(out, "residuals.json"), {
        "config": _resolved_config(args, "residuals", family=args.family,
                                   p=args.p, q=args.q, maxlag=args.maxlag,
                                   posterior_averaged=args.posterior_averaged),
        "residuals": list(report.residuals),
        "acf": list(report.acf),
        "pacf": list(report.pacf),
        "n_clamped": report.n_clamped,
    })
    print(f"residuals written; {report.n_clamped} clamped CDF values")
    return 0


def _study_overrides(args):
    return {"m": args.m, "seed": args.seed, "workers": args.workers}


def _sim_config_dict(cfg):
    """Echo of a study config sufficient to re-run it (workers excluded:
    results are worker-count independent by construction)."""
    return {
        "true_params": {
            "beta0": cfg.true_params.beta0,
            "phi": list(cfg.true_params.phi),
            "theta": list(cfg.true_params.theta),
            "u": cfg.true_params.u,
            "lambda": cfg.true_params.lam,
        },
        "order": [cfg.order.p, cfg.order.q],
        "family": cfg.family.value,
        "n": cfg.n,
        "m": cfg.m,
        "seed": cfg.seed,
        "floor_c": cfg.floor_c,
        "mcmc": {"draws": cfg.mcmc.draws, "burn_in": cfg.mcmc.burn_in,
                 "thin": cfg.mcmc.thin},
        "criteria_models": [[o.p, o.q] for o in cfg.criteria_models],
    }


def cmd_simulate(args):
    cfg = simlab.load_sim_config(args.config, _study_overrides(args))
    report = simlab.run_replication_study(cfg)
    out = _ensure_out(args)
    dataio.write_csv(
        os.path.join(out, "replication.csv"),
        ["parameter", "true_value", "mean", "variance", "cb", "ce", "ap"],
        report.table_rows(),
    )
    dataio.write_json(os.path.join(out, "replication.json"), {
        "config": _sim_config_dict(cfg),
        "report": {
            "param_names": report.param_names,
            "true_values": report.true_values,
            "mean": report.est_mean,
            "variance": report.est_variance,
            "cb": report.cb,
            "ce": report.ce,
            "ap": report.ap,
            "m_requested": report.m_requested,
            "m_completed": report.m_completed,
            "failures": report.failures,
        },
    })
    _print_table(
        ["parameter", "true", "mean", "variance", "cb", "ce", "ap"],
        [(r[0], r[1], r[2], r[3], r[4],
          r[5] if r[5] != "" else float("nan"), r[6])
         for r in report.table_rows()],
    )
    print(f"completed {report.m_completed}/{report.m_requested} replications")
    return 0


def cmd_select_study(args):
    cfg = simlab.load_sim_config(args.config, _study_overrides(args))
    report = simlab.run_selection_study(cfg)
    out = _ensure_out(args)
    rows = []
    for crit in simlab.CRITERIA:
        for idx, cand in enumerate(report.candidates):
            rows.append((crit, cand, int(report.counts[crit][idx]),
                         float(report.proportions[crit][idx]),
                         int(idx == report.true_index)))
    dataio.write_csv(
        os.path.join(out, "selection.csv"),
        ["criterion", "candidate", "count", "proportion", "is_true_order"],
        rows,
    )
    dataio.write_json(os.path.join(out, "selection.json"), {
        "config": _sim_config_dict(cfg),
        "report": {
            "candidates": report.candidates,
            "true_index": report.true_index,
            "counts": {k: v for k, v in report.counts.items()},
            "proportions": {k: v for k, v in report.proportions.items()},
            "proportion_correct": report.proportion_correct,
            "m_requested": report.m_requested,
            "m_completed": report.m_completed,
            "failures": report.failures,
        },
    })
    _print_table(["criterion", "correct_proportion"],
                 [(crit, report.proportion_correct[crit])
                  for crit in simlab.CRITERIA])
    return 0


def _emit_error(exc):
    payload = {"error": {"type": type(exc).__name__, "message": str(exc)}}
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    try:
        return args.func(args)
    except ConfigError as exc:
        _emit_error(exc)
        return 2
    except DataError as exc:
        _emit_error(exc)
        return 3
    except (DomainError, DimensionError, NumericError, SamplerError) as exc:
        _emit_error(exc)
        return 4


if __name__ == "__main__":
    sys.exit(main())
