"""Jitted inner loops for the link recursion and per-observation densities.

These run inside the MCMC hot path (millions of likelihood evaluations per
study), so they are compiled with numba when available.  The pure-Python
definitions below are the single source of truth; numba only wraps them.
"""

import math

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is an install requirement
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        if args and callable(args[0]):
            return args[0]
        return wrap


LOG_2PI = math.log(2.0 * math.pi)

GAMMA_CODE = 0
INVGAUSS_CODE = 1


@njit(cache=True)
def eta_recursion(logzf, beta0, phi, theta, r):
    """Log-link recursion over a floored transformed series.

    The first r positions seed the recursion with the observed log values;
    modeled positions start at index r.
    """
    n = logzf.size
    p = phi.size
    q = theta.size
    eta = np.empty(n)
    for t in range(r):
        eta[t] = logzf[t]
    for t in range(r, n):
        acc = beta0
        for j in range(p):
            acc += phi[j] * logzf[t - 1 - j]
        for j in range(q):
            acc += theta[j] * (logzf[t - 1 - j] - eta[t - 1 - j])
        eta[t] = acc
    return eta


@njit(cache=True)
def family_terms(zf, logzf, eta, u, r, family_code):
    """Per-observation log density terms for t >= r.

    family_code 0 is gamma with shape u and mean exp(eta); family_code 1 is
    inverse Gaussian with mean exp(eta) and dispersion u.  Written in ratio
    form (z * exp(-eta)) so extreme eta underflows to -inf instead of NaN.
    """
    n = zf.size
    out = np.empty(n - r)
    if family_code == GAMMA_CODE:
        nu = u
        base = -math.lgamma(nu) + nu * math.log(nu)
        for t in range(r, n):
            z = zf[t]
            out[t - r] = (
                base
                - nu * eta[t]
                + (nu - 1.0) * logzf[t]
                - z * nu * np.exp(-eta[t])
            )
    else:
        sigma2 = u
        base = -0.5 * (LOG_2PI + math.log(sigma2))
        for t in range(r, n):
            z = zf[t]
            ratio = z * np.exp(-eta[t])
            out[t - r] = (
                base
                - 1.5 * logzf[t]
                - (ratio - 1.0) * (ratio - 1.0) / (2.0 * sigma2 * z)
            )
    return out
