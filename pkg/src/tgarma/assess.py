"""Model comparison criteria and residual diagnostics.

DIC, EBIC and the CPO sum are all computed from one pass over the chain's
per-observation log likelihood terms; quantile residuals invert the fitted
conditional CDF at a plug-in point estimate.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import special, stats

from .errors import DimensionError, DomainError, NumericError
from .model import (ModelOrder, ParamVector, compute_link, family_cdf,
                    loglik, loglik_terms)
from .transform import Series, transform_series

# CDF values this close to 0 or 1 are clamped before the normal quantile.
CDF_CLAMP = 1e-12


@dataclass(frozen=True)
class CriteriaReport:
    """The three selection criteria for one fitted model.

    dic and ebic are on the deviance scale (smaller is better); cpo is the
    sum of log conditional predictive ordinates (larger is better).  p_d is
    the DIC effective-parameter count, kept for reporting.
    """

    dic: float
    ebic: float
    cpo: float
    n_eff_terms: int
    p_d: float


@dataclass(frozen=True)
class ResidualReport:
    """Quantile residuals and their (partial) autocorrelations."""

    residuals: np.ndarray
    acf: np.ndarray
    pacf: np.ndarray
    maxlag: int
    clamped: np.ndarray

    @property
    def n_clamped(self):
        return int(np.sum(self.clamped))


def _order_from_names(names):
    p = sum(1 for s in names if s.startswith("phi"))
    q = sum(1 for s in names if s.startswith("theta"))
    return ModelOrder(p, q)


def posterior_mean_params(chain, order=None):
    """Posterior-mean plug-in point: u and lam averaged on the sampling
    scale (log u, atanh lam) then mapped back; the rest averaged directly."""
    if order is None:
        order = _order_from_names(chain.param_names)
    draws = chain.draws
    mean = draws.mean(axis=0)
    u = math.exp(float(np.mean(np.log(draws[:, order.p + order.q + 1]))))
    lam_col = draws[:, -1]
    if chain.lambda_fixed is not None or lam_col.max() == lam_col.min():
        lam = float(lam_col[0])
    else:
        lam = math.tanh(float(np.mean(np.arctanh(lam_col))))
    return ParamVector(
        beta0=mean[0],
        phi=mean[1:1 + order.p],
        theta=mean[1 + order.p:1 + order.p + order.q],
        u=u,
        lam=lam,
    )


def _term_matrix(chain, raw, spec):
    """Per-draw, per-observation log likelihood terms (Q x n_eff).

    Terms are the model's partial log likelihood of the transformed
    series, so criteria values from chains with different lambda columns
    live on different data scales; candidate comparisons should hold the
    transformation fixed (see run_selection_study).
    """
    if not isinstance(raw, Series):
        raw = Series(np.asarray(raw, dtype=float))
    draws = chain.draws
    q_n = draws.shape[0]
    if q_n == 0:
        raise DimensionError("chain is empty")
    order = spec.order
    n_eff = raw.n - order.r
    out = np.empty((q_n, n_eff))
    lam_col = draws[:, -1]
    constant_lam = lam_col.max() == lam_col.min()
    ts_cache = None
    for l in range(q_n):
        params = ParamVector.from_array(draws[l], order)
        if constant_lam:
            if ts_cache is None:
                ts_cache = transform_series(raw, params.lam, spec.floor_c)
            ts = ts_cache
        else:
            ts = transform_series(raw, params.lam, spec.floor_c)
        terms = loglik_terms(ts, params, order, spec.family)
        if np.any(np.isnan(terms)):
            raise NumericError(f"likelihood term NaN at draw {l}")
        out[l] = terms
    return out


def criteria_report(chain, raw, spec):
    """DIC, EBIC and CPO from a single pass over the chain."""
    if not isinstance(raw, Series):
        raw = Series(np.asarray(raw, dtype=float))
    terms = _term_matrix(chain, raw, spec)
    q_n, n_eff = terms.shape
    deviances = -2.0 * terms.sum(axis=1)
    mean_dev = float(np.mean(deviances))

    theta_bar = posterior_mean_params(chain, spec.order)
    ts_bar = transform_series(raw, theta_bar.lam, spec.floor_c)
    dev_at_mean = -2.0 * loglik(ts_bar, theta_bar, spec.order, spec.family)
    if not math.isfinite(dev_at_mean) or not math.isfinite(mean_dev):
        raise NumericError("non-finite deviance in criteria computation")
    p_d = mean_dev - dev_at_mean
    dic_val = mean_dev + p_d  # = D(theta_bar) + 2 p_D

    d_sampled = spec.n_sampled
    ebic_val = mean_dev + d_sampled * math.log(n_eff)

    # log CPO_t = log Q - logsumexp_l(-terms[l, t]); a -inf term makes the
    # harmonic mean collapse to zero density at t.
    neg = -terms
    log_inv_mean = special.logsumexp(neg, axis=0) - math.log(q_n)
    log_cpo_t = -log_inv_mean
    bad = np.where(~np.isfinite(log_cpo_t))[0]
    if bad.size:
        raise NumericError(
            f"CPO term non-finite at observation index {int(bad[0])}"
        )
    cpo_val = float(np.sum(log_cpo_t))
    return CriteriaReport(
        dic=float(dic_val),
        ebic=float(ebic_val),
        cpo=cpo_val,
        n_eff_terms=int(n_eff),
        p_d=float(p_d),
    )


def dic(chain, raw, spec):
    """Deviance information criterion D(theta_bar) + 2 p_D; smaller wins."""
    return criteria_report(chain, raw, spec).dic


def ebic(chain, raw, spec):
    """Posterior-mean deviance + d log(n_eff); smaller wins."""
    return criteria_report(chain, raw, spec).ebic


def cpo(chain, raw, spec):
    """Sum of log conditional predictive ordinates; larger wins."""
    return criteria_report(chain, raw, spec).cpo


def acf_pacf(x, maxlag=20):
    """Sample autocorrelations and Durbin-Levinson partial autocorrelations.

    Both returned arrays have length maxlag + 1 with index 0 equal to 1.
    """
    x = np.asarray(x, dtype=float)
    if maxlag < 1:
        raise DimensionError("maxlag must be >= 1")
    if x.ndim != 1 or x.size <= maxlag:
        raise DimensionError("series must be 1-D and longer than maxlag")
    xc = x - x.mean()
    denom = float(xc @ xc)
    if denom == 0.0:
        raise NumericError("zero variance series has no autocorrelations")
    acf = np.empty(maxlag + 1)
    acf[0] = 1.0
    for k in range(1, maxlag + 1):
        acf[k] = float(xc[:-k] @ xc[k:]) / denom

    pacf = np.empty(maxlag + 1)
    pacf[0] = 1.0
    phi_prev = np.zeros(0)
    for k in range(1, maxlag + 1):
        if k == 1:
            a = acf[1]
        else:
            num = acf[k] - float(phi_prev @ acf[k - 1:0:-1])
            den = 1.0 - float(phi_prev @ acf[1:k])
            if den == 0.0:
                raise NumericError(
                    f"Durbin-Levinson breakdown at lag {k}"
                )
            a = num / den
        phi_new = np.empty(k)
        phi_new[:k - 1] = phi_prev - a * phi_prev[::-1]
        phi_new[k - 1] = a
        phi_prev = phi_new
        pacf[k] = a
    return acf, pacf


def quantile_residuals(chain_or_point, raw, spec, maxlag=20,
                       posterior_averaged=False):
    """Normal-quantile residuals of the fitted conditional distribution.

    With a Chain, the default plugs in the posterior-mean point estimate;
    posterior_averaged=True instead averages the conditional CDF value over
    all draws before taking the normal quantile.  CDF values within
    CDF_CLAMP of 0 or 1 are clamped and flagged.
    """
    if not isinstance(raw, Series):
        raw = Series(np.asarray(raw, dtype=float))
    order = spec.order

    def cdf_at(params):
        ts = transform_series(raw, params.lam, spec.floor_c)
        link = compute_link(ts, params, order)
        return family_cdf(
            spec.family, ts.values[order.r:], link.mu[order.r:], params.u
        )

    if isinstance(chain_or_point, ParamVector):
        f_vals = cdf_at(chain_or_point)
    elif posterior_averaged:
        draws = chain_or_point.draws
        acc = np.zeros(raw.n - order.r)
        for l in range(draws.shape[0]):
            acc += cdf_at(ParamVector.from_array(draws[l], order))
        f_vals = acc / draws.shape[0]
    else:
        f_vals = cdf_at(posterior_mean_params(chain_or_point, order))

    clamped = (f_vals < CDF_CLAMP) | (f_vals > 1.0 - CDF_CLAMP)
    f_clamped = np.clip(f_vals, CDF_CLAMP, 1.0 - CDF_CLAMP)
    residuals = stats.norm.ppf(f_clamped)
    acf, pacf = acf_pacf(residuals, maxlag=maxlag)
    return ResidualReport(
        residuals=residuals,
        acf=acf,
        pacf=pacf,
        maxlag=maxlag,
        clamped=clamped,
    )


def mape(actual, predicted):
    """Mean absolute percentage error, in percent."""
    a = np.asarray(actual, dtype=float)
    p = np.asarray(predicted, dtype=float)
    if a.shape != p.shape or a.ndim != 1 or a.size == 0:
        raise DimensionError("actual and predicted must be equal-length 1-D")
    if np.any(a <= 0.0):
        raise DomainError("actual values must be strictly positive")
    return 100.0 * float(np.mean(np.abs(a - p) / a))
