"""Box-Cox power transform and the series containers built on it.

The model works on a transformed copy of a positive-valued series.  Because
the downstream link uses logarithms of the transformed values, the transform
output is floored at a small positive constant; the flooring mask is kept so
callers can report how often it was active.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

# Below this magnitude the power transform is numerically indistinguishable
# from its log limit, so the exact log branch is used (and division by a
# vanishing lam is avoided).
EPS_LAMBDA = 1e-7

# Default floor applied to transformed values before taking logs.
DEFAULT_FLOOR = 0.01


def boxcox(y, lam):
    """Box-Cox transform (y**lam - 1)/lam, with the log branch near lam = 0.

    Accepts scalars or arrays of strictly positive values; raises
    DomainError otherwise.
    """
    arr = np.asarray(y, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError("Box-Cox input must be finite")
    if np.any(arr <= 0.0):
        raise DomainError("Box-Cox transform requires strictly positive values")
    if abs(lam) <= EPS_LAMBDA:
        out = np.log(arr)
    else:
        # expm1 form of (y**lam - 1)/lam: the direct difference cancels
        # catastrophically when lam*log(y) is small.
        out = np.expm1(lam * np.log(arr)) / lam
    return float(out) if np.ndim(y) == 0 else out


def inv_boxcox(z, lam):
    """Inverse Box-Cox transform (lam*z + 1)**(1/lam), exp branch near lam = 0.

    Raises DomainError when lam*z + 1 <= 0, where the inverse is undefined.
    """
    arr = np.asarray(z, dtype=float)
    if abs(lam) <= EPS_LAMBDA:
        out = np.exp(arr)
    else:
        prod = lam * arr
        if np.any(prod <= -1.0):
            raise DomainError(
                "outside invertible range: lam*z + 1 must be positive"
            )
        # log1p form of (lam*z + 1)**(1/lam), mirroring the expm1 form of
        # the forward transform so small lam*z keeps full precision.
        out = np.exp(np.log1p(prod) / lam)
    return float(out) if np.ndim(z) == 0 else out


@dataclass(frozen=True)
class Series:
    """A strictly positive, finite, one-dimensional time series."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=float)
        if arr.ndim != 1:
            raise DomainError("series must be one-dimensional")
        if arr.size == 0:
            raise DomainError("series must contain at least one observation")
        if not np.all(np.isfinite(arr)):
            raise DomainError("series values must be finite")
        if np.any(arr <= 0.0):
            raise DomainError("series values must be strictly positive")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def n(self):
        return self.values.size


@dataclass(frozen=True)
class TransformedSeries:
    """Floored Box-Cox transform of a series plus the bookkeeping around it.

    ``values`` holds max(boxcox(y, lam), floor_c) and ``log_values`` its log;
    ``floored`` flags positions where the floor was active.
    """

    values: np.ndarray
    lam: float
    floor_c: float
    floored: np.ndarray
    log_values: np.ndarray = field(repr=False)

    @property
    def n(self):
        return self.values.size


def transform_series(series, lam, floor_c=DEFAULT_FLOOR):
    """Apply the Box-Cox transform to a series and floor the result.

    lam is restricted to [-1, 1] (the range the model samples over) and
    floor_c to (0, 1); logs of the floored output are taken downstream.
    """
    if not isinstance(series, Series):
        series = Series(np.asarray(series, dtype=float))
    if not (np.isfinite(lam) and -1.0 <= lam <= 1.0):
        raise DomainError("lam must lie in [-1, 1]")
    if not (0.0 < floor_c < 1.0):
        raise DomainError("floor_c must lie in (0, 1)")
    z = boxcox(series.values, lam)
    floored = z < floor_c
    zf = np.maximum(z, floor_c)
    zf.setflags(write=False)
    mask = floored.copy()
    mask.setflags(write=False)
    logzf = np.log(zf)
    logzf.setflags(write=False)
    return TransformedSeries(
        values=zf, lam=float(lam), floor_c=float(floor_c),
        floored=mask, log_values=logzf,
    )
