"""QQ regression fits for full, left-censored and winsorized samples.

The ordered data are regressed on Hazen normal scores. The intercept
estimates the mean, the slope the standard deviation. Censoring and
winsorizing drop points from the regression while keeping the full-sample
score positions, and fitted efficiency models turn the loss of information
into effective sample sizes.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (CalibrationError, CalibrationWarning, DegenerateError,
                     DomainError, InsufficientDataError)
from .kernel import std_normal_inv_cdf
from .scores import ScoreVector, hazen_scores

__all__ = [
    "Sample",
    "QQFit",
    "ReferenceInterval",
    "qq_regression",
    "qq_regression_batch",
    "censored_efficiencies",
    "winsor_effective_sizes",
    "fit_full",
    "fit_censored",
    "fit_winsorized",
    "reference_interval",
    "LIMIT_SE_FACTOR",
    "CALIBRATED_N",
]

#: sqrt(1 + 1.96**2 / 2), rounded as used for the 97.5% limit standard error
LIMIT_SE_FACTOR = 1.71
#: sample sizes covered by the simulation-fitted efficiency and test models
CALIBRATED_N = (60, 1080)
MAX_CENSORED_FRACTION = 0.5


@dataclass(frozen=True, eq=False)
class Sample:
    """Sorted observations plus left-censoring metadata.

    ``values`` holds only the observed (uncensored) values. The ``k_censored``
    smallest observations are known only to lie below ``detection_limit``.
    """

    values: np.ndarray
    n_total: int
    k_censored: int = 0
    detection_limit: float | None = None

    def __post_init__(self):
        v = np.sort(np.asarray(self.values, dtype=float).ravel())
        if not np.all(np.isfinite(v)):
            raise DomainError("sample values must be finite")
        if self.k_censored < 0:
            raise DomainError("k_censored must be nonnegative")
        if len(v) != self.n_total - self.k_censored:
            raise DomainError("len(values) must equal n_total - k_censored")
        if self.detection_limit is not None and len(v) and v[0] < self.detection_limit:
            raise DomainError("an observed value lies below the detection limit")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_values(cls, values, censor_below: float | None = None) -> Sample:
        """Build a sample, left-censoring everything below ``censor_below``."""
        v = np.asarray(values, dtype=float).ravel()
        if censor_below is None:
            return cls(v, len(v))
        kept = v[v >= censor_below]
        return cls(kept, len(v), len(v) - len(kept), float(censor_below))

    @property
    def censored_fraction(self) -> float:
        return self.k_censored / self.n_total

    def __len__(self):
        return self.n_total


@dataclass(frozen=True)
class QQFit:
    """Intercept, slope and correlation of a QQ regression with derived
    standard errors and effective sample sizes."""

    intercept: float
    slope: float
    r: float
    n_total: int
    k_censored: int = 0
    w_winsorized: int = 0
    n_eff_mean: float = 0.0
    n_eff_sd: float = 0.0
    n_eff_limit: float = 0.0
    se_mean: float = 0.0
    se_sd: float = 0.0
    se_upper_limit: float = 0.0
    flags: tuple[str, ...] = field(default=())

    @property
    def mean(self) -> float:
        return self.intercept

    @property
    def sd(self) -> float:
        return self.slope

    @property
    def n_used(self) -> int:
        return self.n_total - self.k_censored - 2 * self.w_winsorized

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["flags"] = list(self.flags)
        return d


@dataclass(frozen=True)
class ReferenceInterval:
    lower: float
    upper: float
    coverage: float
    z_multiplier: float
    se_upper: float
    se_lower: float
    assumptions: tuple[str, ...] = ("se_lower taken equal to se_upper by symmetry",)

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["assumptions"] = list(self.assumptions)
        return d


def qq_regression(y, x) -> tuple[float, float, float]:
    """Ordinary least squares of ``y`` on ``x``.

    Returns ``(intercept, slope, r)`` where ``r`` is the Pearson correlation
    of the pairs.
    """
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    if y.shape != x.shape or y.ndim != 1:
        raise DomainError("y and x must be 1-D arrays of equal length")
    if len(y) < 3:
        raise InsufficientDataError(f"QQ regression needs at least 3 points, got {len(y)}")
    xc = x - x.mean()
    yc = y - y.mean()
    sxx = xc @ xc
    syy = yc @ yc
    if sxx <= 0:
        raise DegenerateError("scores have no spread")
    if syy <= 0 or syy <= 1e-28 * (y @ y):
        raise DegenerateError("data have zero variance; QQ correlation undefined")
    sxy = xc @ yc
    slope = sxy / sxx
    intercept = y.mean() - slope * x.mean()
    r = float(np.clip(sxy / math.sqrt(sxx * syy), -1.0, 1.0))
    return float(intercept), float(slope), r


def qq_regression_batch(Y, x):
    """Row-wise QQ regression of each row of ``Y`` on the shared scores ``x``.

    ``x`` may also be a matrix with one score row per data row. Rows with
    zero variance get ``r = nan``.
    """
    Y = np.asarray(Y, dtype=float)
    x = np.asarray(x, dtype=float)
    xm = x.mean(axis=-1, keepdims=True)
    xc = x - xm
    ym = Y.mean(axis=-1, keepdims=True)
    yc = Y - ym
    sxx = np.sum(xc * xc, axis=-1)
    syy = np.sum(yc * yc, axis=-1)
    sxy = np.sum(xc * yc, axis=-1)
    slope = sxy / sxx
    intercept = ym[..., 0] - slope * xm[..., 0]
    with np.errstate(invalid="ignore", divide="ignore"):
        r = np.clip(sxy / np.sqrt(sxx * syy), -1.0, 1.0)
    return intercept, slope, r


def censored_efficiencies(k, n):
    """Efficiencies of the censored fit relative to the full fit.

    Returns ``(mean, sd, limit)`` from the simulation-fitted models, with
    ``f = 1 - k/n`` the uncensored fraction.
    """
    c = np.asarray(k, dtype=float) / n
    f = 1.0 - c
    mean = 1.0 - 1.5 * c ** 1.7
    sd = (2.5 - 1.5 * f) ** -2.0
    limit = (1.38 - 0.37 * f) ** -2.0
    return mean, sd, limit


def winsor_effective_sizes(n, w):
    """Effective sample sizes ``(mean, sd, limit)`` after trimming ``w`` per side."""
    return float(n), n - 5.0 * w, n - 3.5 * w


def _build(intercept, slope, r, n, k, w, neff, flags):
    nm, ns, nl = neff
    flags = list(flags)
    if slope < 0:
        flags.append("negative-slope")
    if not CALIBRATED_N[0] <= n <= CALIBRATED_N[1]:
        flags.append("n-outside-calibration")
        warnings.warn(f"n={n} lies outside the calibrated range {CALIBRATED_N}",
                      CalibrationWarning, stacklevel=3)
    s = abs(slope)
    return QQFit(
        intercept=intercept, slope=slope, r=r, n_total=n, k_censored=k, w_winsorized=w,
        n_eff_mean=float(nm), n_eff_sd=float(ns), n_eff_limit=float(nl),
        se_mean=s / math.sqrt(nm), se_sd=s / math.sqrt(2.0 * ns),
        se_upper_limit=LIMIT_SE_FACTOR * s / math.sqrt(nl),
        flags=tuple(flags),
    )


def _check_uncensored(sample):
    if sample.k_censored:
        raise DomainError("sample is censored; use fit_censored")


def fit_full(sample: Sample) -> QQFit:
    _check_uncensored(sample)
    n = sample.n_total
    if n < 3:
        raise InsufficientDataError(f"need n >= 3, got {n}")
    b0, b1, r = qq_regression(sample.values, hazen_scores(n).values)
    return _build(b0, b1, r, n, 0, 0, (n, n, n), ())


def fit_censored(sample: Sample) -> QQFit:
    """QQ fit with the ``k`` smallest observations left-censored.

    The stored values are paired with Hazen scores at ranks ``k+1..n`` of the
    full sample. Censoring beyond half the sample is outside the fitted
    efficiency models: the fit is still returned but flagged.
    """
    n, k = sample.n_total, sample.k_censored
    if k == 0:
        return fit_full(sample)
    if n - k < 3:
        raise InsufficientDataError(f"only {n - k} uncensored values; need at least 3")
    flags = []
    if k / n > MAX_CENSORED_FRACTION:
        flags.append("censoring-outside-calibration")
        warnings.warn(f"censored fraction {k / n:.3f} exceeds {MAX_CENSORED_FRACTION}",
                      CalibrationWarning, stacklevel=2)
    x = hazen_scores(n).values[k:]
    b0, b1, r = qq_regression(sample.values, x)
    em, es, el = censored_efficiencies(k, n)
    return _build(b0, b1, r, n, k, 0, (n * em, n * es, n * el), flags)


def fit_winsorized(sample: Sample, w: int) -> QQFit:
    """QQ fit omitting the ``w`` smallest and ``w`` largest observations."""
    _check_uncensored(sample)
    n = sample.n_total
    if w < 0 or int(w) != w:
        raise DomainError("w must be a nonnegative integer")
    w = int(w)
    if w == 0:
        return fit_full(sample)
    if n - 2 * w < 3:
        raise InsufficientDataError(f"winsorizing {w} per side leaves {n - 2 * w} points")
    x = hazen_scores(n).values[w:n - w]
    b0, b1, r = qq_regression(sample.values[w:n - w], x)
    return _build(b0, b1, r, n, 0, w, winsor_effective_sizes(n, w), ())


def reference_interval(fit: QQFit, coverage: float = 0.95, *,
                       z_rounded: bool = False) -> ReferenceInterval:
    """Central reference interval ``m -/+ z s`` with the standard error of
    the upper limit.

    ``z_rounded`` replaces the exact 97.5% normal quantile by 1.96 (only
    meaningful for 95% coverage).
    """
    if not 0.0 < coverage < 1.0:
        raise DomainError("coverage must lie in (0, 1)")
    if z_rounded and coverage == 0.95:
        z = 1.96
    else:
        z = std_normal_inv_cdf(0.5 * (1.0 + coverage))
    s = abs(fit.slope)
    if coverage == 0.95:
        se = LIMIT_SE_FACTOR * s / math.sqrt(fit.n_eff_limit)
    else:
        se = s * math.sqrt((1.0 + z * z / 2.0) / fit.n_eff_limit)
    return ReferenceInterval(
        lower=fit.intercept - z * s, upper=fit.intercept + z * s,
        coverage=coverage, z_multiplier=z, se_upper=se, se_lower=se,
    )


def require_calibrated_censoring(sample: Sample):
    if sample.censored_fraction > MAX_CENSORED_FRACTION:
        raise CalibrationError(
            f"censored fraction {sample.censored_fraction:.3f} exceeds the calibrated "
            f"maximum {MAX_CENSORED_FRACTION}")
