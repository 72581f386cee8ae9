"""Model definition: conditional families, orders, parameters and likelihood.

The observation model is a GARMA structure on the floored Box-Cox transform
of the data, with a log link.  Conditional on the past, each transformed
value follows either a gamma or an inverse Gaussian distribution whose mean
is exp(eta_t), where eta_t is an ARMA-style recursion in the logs of past
transformed values.
"""

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special, stats

from . import _kernels
from .errors import DimensionError, DomainError, NumericError
from .transform import DEFAULT_FLOOR, TransformedSeries


class Family(enum.Enum):
    """Conditional distribution of the transformed observations."""

    GAMMA = "gamma"
    INVERSE_GAUSSIAN = "invgauss"

    @classmethod
    def from_name(cls, name):
        for fam in cls:
            if fam.value == name:
                return fam
        raise DomainError(
            f"unknown family {name!r}; expected one of "
            f"{[f.value for f in cls]}"
        )

    @property
    def code(self):
        return (
            _kernels.GAMMA_CODE
            if self is Family.GAMMA
            else _kernels.INVGAUSS_CODE
        )

    @property
    def dispersion_name(self):
        """Name of the second family parameter: shape nu or dispersion sigma2."""
        return "nu" if self is Family.GAMMA else "sigma2"


@dataclass(frozen=True, order=True)
class ModelOrder:
    """Autoregressive order p and moving-average order q."""

    p: int
    q: int

    def __post_init__(self):
        if self.p < 0 or self.q < 0:
            raise DomainError("model orders must be nonnegative")

    @property
    def r(self):
        """Number of seed observations consumed before the first modeled term."""
        return max(self.p, self.q)

    @property
    def label(self):
        return f"({self.p},{self.q})"


@dataclass(frozen=True)
class ParamVector:
    """Full parameter point: intercept, AR and MA coefficients, dispersion
    parameter u (gamma shape nu or inverse-Gaussian sigma2) and Box-Cox lam."""

    beta0: float
    phi: np.ndarray
    theta: np.ndarray
    u: float
    lam: float

    def __post_init__(self):
        phi = np.atleast_1d(np.asarray(self.phi, dtype=float))
        theta = np.atleast_1d(np.asarray(self.theta, dtype=float))
        if phi.ndim != 1 or theta.ndim != 1:
            raise DimensionError("phi and theta must be one-dimensional")
        vals = [self.beta0, self.u, self.lam]
        if not (np.all(np.isfinite(phi)) and np.all(np.isfinite(theta))
                and all(math.isfinite(v) for v in vals)):
            raise DomainError("parameters must be finite")
        if self.u <= 0.0:
            raise DomainError("dispersion parameter u must be positive")
        if abs(self.lam) > 1.0:
            raise DomainError("lam must lie in [-1, 1]")
        phi = phi.copy()
        phi.setflags(write=False)
        theta = theta.copy()
        theta.setflags(write=False)
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "beta0", float(self.beta0))
        object.__setattr__(self, "u", float(self.u))
        object.__setattr__(self, "lam", float(self.lam))

    @property
    def order(self):
        return ModelOrder(self.phi.size, self.theta.size)

    def as_array(self):
        """Natural-scale coordinates in the fixed order beta0, phi, theta, u, lam."""
        return np.concatenate(
            [[self.beta0], self.phi, self.theta, [self.u, self.lam]]
        )

    @classmethod
    def from_array(cls, arr, order):
        arr = np.asarray(arr, dtype=float)
        want = order.p + order.q + 3
        if arr.size != want:
            raise DimensionError(
                f"expected {want} coordinates for order {order.label}, "
                f"got {arr.size}"
            )
        return cls(
            beta0=arr[0],
            phi=arr[1:1 + order.p],
            theta=arr[1 + order.p:1 + order.p + order.q],
            u=arr[-2],
            lam=arr[-1],
        )


def param_names(order, family):
    """Column names matching ParamVector.as_array."""
    names = ["beta0"]
    names += [f"phi{j + 1}" for j in range(order.p)]
    names += [f"theta{j + 1}" for j in range(order.q)]
    names += [family.dispersion_name, "lambda"]
    return names


@dataclass(frozen=True)
class ModelSpec:
    """Everything that pins down a model apart from the parameter values.

    include_jacobian controls whether the posterior carries the Box-Cox
    change-of-variables term (lam-1)*sum(log y_t).  It defaults to on:
    without it the target has no interior mode in lam (any compressing
    transform inflates the transformed-data likelihood without bound), so
    lam estimation only works with the term included.  Turning it off is
    only sensible when lam is pinned.
    """

    family: Family
    order: ModelOrder
    floor_c: float = DEFAULT_FLOOR
    lambda_fixed: float | None = None
    include_jacobian: bool = True

    def __post_init__(self):
        if not isinstance(self.family, Family):
            object.__setattr__(self, "family", Family.from_name(self.family))
        if not (0.0 < self.floor_c < 1.0):
            raise DomainError("floor_c must lie in (0, 1)")
        if self.lambda_fixed is not None:
            lf = float(self.lambda_fixed)
            if not math.isfinite(lf) or abs(lf) > 1.0:
                raise DomainError("lambda_fixed must be finite and in [-1, 1]")
            object.__setattr__(self, "lambda_fixed", lf)

    @property
    def n_sampled(self):
        """Number of parameters the sampler actually moves."""
        d = self.order.p + self.order.q + 3
        return d - 1 if self.lambda_fixed is not None else d


@dataclass(frozen=True)
class LinkState:
    """Linear predictor eta and conditional mean mu = exp(eta) over a series.

    Entries before valid_from are seed values, not model output.
    """

    eta: np.ndarray
    mu: np.ndarray
    valid_from: int


# ---------------------------------------------------------------------------
# Conditional densities.  Both are mean-parameterized: the gamma has shape nu
# and variance mu**2/nu, the inverse Gaussian has dispersion sigma2 and
# variance sigma2 * mu**3.
# ---------------------------------------------------------------------------

def _check_density_args(y, mu, u, uname):
    y = np.asarray(y, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if np.any(y <= 0.0) or np.any(mu <= 0.0) or u <= 0.0:
        raise DomainError(f"y, mu and {uname} must all be positive")
    return y, mu


def gamma_logpdf(y, mu, nu):
    """Log density of a gamma with mean mu and shape nu at y."""
    yv, muv = _check_density_args(y, mu, nu, "nu")
    out = (
        -special.gammaln(nu)
        + nu * (np.log(nu) - np.log(muv))
        + (nu - 1.0) * np.log(yv)
        - yv * nu / muv
    )
    return float(out) if np.ndim(y) == 0 and np.ndim(mu) == 0 else out


def invgauss_logpdf(y, mu, sigma2):
    """Log density of an inverse Gaussian with mean mu and dispersion sigma2."""
    yv, muv = _check_density_args(y, mu, sigma2, "sigma2")
    out = (
        -0.5 * (_kernels.LOG_2PI + np.log(sigma2) + 3.0 * np.log(yv))
        - (yv - muv) ** 2 / (2.0 * sigma2 * muv ** 2 * yv)
    )
    return float(out) if np.ndim(y) == 0 and np.ndim(mu) == 0 else out


def family_logpdf(family, y, mu, u):
    if family is Family.GAMMA:
        return gamma_logpdf(y, mu, u)
    return invgauss_logpdf(y, mu, u)


def gamma_cdf(y, mu, nu):
    """CDF companion of gamma_logpdf."""
    yv, muv = _check_density_args(y, mu, nu, "nu")
    out = stats.gamma.cdf(yv, a=nu, scale=muv / nu)
    return float(out) if np.ndim(y) == 0 and np.ndim(mu) == 0 else out


def invgauss_cdf(y, mu, sigma2):
    """CDF companion of invgauss_logpdf."""
    yv, muv = _check_density_args(y, mu, sigma2, "sigma2")
    out = stats.invgauss.cdf(yv, mu=muv * sigma2, scale=1.0 / sigma2)
    return float(out) if np.ndim(y) == 0 and np.ndim(mu) == 0 else out


def family_cdf(family, y, mu, u):
    if family is Family.GAMMA:
        return gamma_cdf(y, mu, u)
    return invgauss_cdf(y, mu, u)


def sample_family(rng, family, mu, u, size=None):
    """Draw from the conditional family with mean mu and dispersion u."""
    mu = np.asarray(mu, dtype=float)
    if np.any(mu <= 0.0) or u <= 0.0:
        raise DomainError("mu and u must be positive")
    if family is Family.GAMMA:
        return rng.gamma(shape=u, scale=mu / u, size=size)
    return rng.wald(mean=mu, scale=1.0 / u, size=size)


# ---------------------------------------------------------------------------
# Link recursion and likelihood.
# ---------------------------------------------------------------------------

def _require_transformed(ts):
    if not isinstance(ts, TransformedSeries):
        raise DimensionError("expected a TransformedSeries")


def compute_link(ts, params, order):
    """Run the log-link recursion over a transformed series.

    The first r = max(p, q) positions seed eta with the observed log
    transformed values; modeled values start at index r.
    """
    _require_transformed(ts)
    if params.phi.size != order.p or params.theta.size != order.q:
        raise DimensionError(
            f"parameter dimensions {params.phi.size},{params.theta.size} "
            f"do not match order {order.label}"
        )
    if ts.n <= order.r:
        raise DimensionError(
            f"series length {ts.n} leaves no modeled observations for "
            f"order {order.label}"
        )
    eta = _kernels.eta_recursion(
        ts.log_values, params.beta0, params.phi, params.theta, order.r
    )
    with np.errstate(over="ignore"):
        mu = np.exp(eta)
    return LinkState(eta=eta, mu=mu, valid_from=order.r)


def loglik_terms(ts, params, order, family):
    """Per-observation conditional log likelihood terms for t >= max(p, q)."""
    link = compute_link(ts, params, order)
    terms = _kernels.family_terms(
        ts.values, ts.log_values, link.eta, params.u, order.r, family.code
    )
    return terms


def loglik(ts, params, order, family):
    """Partial log likelihood: sum of conditional terms past the seed block.

    -inf is a legal value (zero likelihood); NaN raises NumericError.
    """
    total = float(np.sum(loglik_terms(ts, params, order, family)))
    if math.isnan(total):
        raise NumericError("log likelihood evaluated to NaN")
    return total
