"""Normality test based on the QQ correlation.

``1 - r`` is Box-Cox transformed with power -0.1, then standardized with
mean and sd models that are linear in ``ln(n + 30)`` (plus censored-fraction
terms for censored samples). The upper tail of the standardized statistic
gives a one-sided p-value: low correlations map to large statistics.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (CalibrationError, CalibrationWarning, DomainError,
                     InsufficientDataError)
from .kernel import std_normal_cdf
from .qqfit import (CALIBRATED_N, MAX_CENSORED_FRACTION, Sample, fit_censored,
                    fit_full, fit_winsorized)
from .shapefit import fit_boxcox_qqr

__all__ = [
    "VARIANTS",
    "Z_LAMBDA",
    "R_CLAMP",
    "CalibrationCoefficients",
    "BUILTIN_COEFFICIENTS",
    "NormalityTest",
    "z_transform",
    "inverse_z_transform",
    "standardize",
    "mean_sd_model",
    "winsor_count",
    "test_normality",
]

Z_LAMBDA = -0.1
R_CLAMP = 1.0 - 1e-15
MIN_N = 10
WINSOR_FRACTION = 0.025

VARIANTS = ("full", "winsorized", "boxcox", "boxcox-winsorized",
            "censored-original", "censored-boxcox")
CENSORED_VARIANTS = ("censored-original", "censored-boxcox")


@dataclass(frozen=True)
class CalibrationCoefficients:
    """Mean and sd models for the transformed correlation.

    ``mean`` and ``sd`` list coefficients for the regressors
    ``(1, ln(n+30))``, or ``(1, ln(n+30), f, f*ln(n+30))`` for censored
    variants where ``f`` is the censored fraction.
    """

    variant: str
    mean: tuple[float, ...]
    sd: tuple[float, ...]
    provenance: str = "built-in"

    def __post_init__(self):
        if len(self.mean) != len(self.sd) or len(self.mean) not in (2, 4):
            raise DomainError("coefficient sets must have 2 or 4 terms each")

    @property
    def censored(self) -> bool:
        return len(self.mean) == 4

    def evaluate(self, n, f=0.0):
        L = np.log(np.asarray(n, dtype=float) + 30.0)
        if self.censored:
            reg = (1.0, L, f, f * L)
        else:
            reg = (1.0, L)
        mean = sum(c * x for c, x in zip(self.mean, reg))
        sd = sum(c * x for c, x in zip(self.sd, reg))
        return mean, sd


BUILTIN_COEFFICIENTS = {
    "full": CalibrationCoefficients("full", (1.992, -1.802), (0.6717, 0.02561)),
    "winsorized": CalibrationCoefficients("winsorized", (3.12, -2.115), (0.4413, 0.08462)),
    "boxcox": CalibrationCoefficients("boxcox", (1.405, -1.782), (0.5941, 0.03245)),
    "boxcox-winsorized": CalibrationCoefficients(
        "boxcox-winsorized", (2.809, -2.164), (0.4288, 0.07453)),
    "censored-original": CalibrationCoefficients(
        "censored-original", (2.256, -1.923, -0.7297, 0.6353),
        (0.598, 0.05197, 0.2236, -0.01872)),
    "censored-boxcox": CalibrationCoefficients(
        "censored-boxcox", (1.796, -1.937, -1.331, 0.7059),
        (0.475, 0.06489, 0.3955, -0.06081)),
}


@dataclass(frozen=True)
class NormalityTest:
    r: float
    Y: float
    Z: float
    p: float
    variant: str
    n: int
    f: float = 0.0
    alpha: float = 0.05
    reject: bool = False
    model_variant: str = ""
    lambda_hat: float | None = None
    w: int = 0
    calibration_warning: str | None = None
    notes: tuple[str, ...] = field(default=())

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["notes"] = list(self.notes)
        return d


def z_transform(r, *, clamp=False):
    """Box-Cox transform of ``1 - r`` with power -0.1.

    Values of ``r`` at or above 1 are an error unless ``clamp`` is set, in
    which case they are pulled back to ``1 - 1e-15``.
    """
    scalar = np.ndim(r) == 0
    r = np.asarray(r, dtype=float)
    if np.any(r < -1.0) or np.any(np.isnan(r)):
        raise DomainError("QQ correlation must lie in [-1, 1]")
    if clamp:
        r = np.minimum(r, R_CLAMP)
    elif np.any(r >= 1.0):
        raise DomainError("r >= 1 has no finite transform; clamp it first")
    y = np.expm1(Z_LAMBDA * np.log1p(-r)) / Z_LAMBDA
    return float(y) if scalar else y


def inverse_z_transform(y):
    """Map a transformed value back to ``r = 1 - (1 + lam*y)**(1/lam)``."""
    scalar = np.ndim(y) == 0
    y = np.asarray(y, dtype=float)
    r = -np.expm1(np.log1p(Z_LAMBDA * y) / Z_LAMBDA)
    return float(r) if scalar else r


def _coefficients(variant, coefficients):
    table = BUILTIN_COEFFICIENTS if coefficients is None else {**BUILTIN_COEFFICIENTS, **coefficients}
    try:
        return table[variant]
    except KeyError:
        raise DomainError(f"unknown test variant {variant!r}; choose from {VARIANTS}") from None


def mean_sd_model(n, variant: str, f: float = 0.0, coefficients=None):
    """Modelled mean and sd of the transformed correlation."""
    return _coefficients(variant, coefficients).evaluate(n, f)


def standardize(Y, n: int, variant: str, f: float = 0.0, coefficients=None):
    """Standardize a transformed correlation to an approximate N(0, 1) value.

    Returns ``(Z, warning)`` with ``warning`` a string when ``n`` falls
    outside the calibrated sizes, else ``None``.
    """
    cc = _coefficients(variant, coefficients)
    if n < MIN_N:
        raise InsufficientDataError(f"standardization needs n >= {MIN_N}")
    if cc.censored and not 0.0 <= f <= MAX_CENSORED_FRACTION:
        raise CalibrationError(f"censored fraction {f:.3f} outside [0, {MAX_CENSORED_FRACTION}]")
    mean, sd = cc.evaluate(n, f)
    warn = None
    if not CALIBRATED_N[0] <= n <= CALIBRATED_N[1]:
        warn = f"n={n} outside calibrated range {CALIBRATED_N[0]}..{CALIBRATED_N[1]}"
    return (Y - mean) / sd, warn


def winsor_count(n: int) -> int:
    """Points trimmed per side: 2.5% of ``n``, rounded half up."""
    return int(math.floor(WINSOR_FRACTION * n + 0.5))


def test_normality(sample: Sample, variant: str = "full", alpha: float = 0.05,
                   *, coefficients=None, lambda_range=(-3.0, 3.0)) -> NormalityTest:
    """QQ-correlation test of normality.

    Censored variants accept uncensored samples and then fall back to the
    corresponding uncensored model (``full`` or ``boxcox``). Uncensored
    variants reject censored input.
    """
    if variant not in VARIANTS:
        raise DomainError(f"unknown test variant {variant!r}; choose from {VARIANTS}")
    n, k = sample.n_total, sample.k_censored
    notes = []
    if variant in CENSORED_VARIANTS:
        if sample.censored_fraction > MAX_CENSORED_FRACTION:
            raise CalibrationError(
                f"censored fraction {sample.censored_fraction:.3f} exceeds the calibrated "
                f"maximum {MAX_CENSORED_FRACTION}")
    elif k:
        raise DomainError(f"variant {variant!r} needs an uncensored sample; use a censored variant")
    if n < MIN_N or n - k < 3:
        raise InsufficientDataError(f"too few observations for a test (n={n}, censored={k})")

    w = winsor_count(n) if variant.endswith("winsorized") else 0
    if w and n - 2 * w < MIN_N:
        raise InsufficientDataError(f"winsorizing {w} per side leaves fewer than {MIN_N} points")

    lam = None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", CalibrationWarning)
        if variant == "full":
            r = fit_full(sample).r
        elif variant == "winsorized":
            r = fit_winsorized(sample, w).r
        elif variant == "censored-original":
            r = fit_censored(sample).r
        else:
            bc = fit_boxcox_qqr(sample, lambda_range, w=w)
            r, lam = bc.qqr_at_opt, bc.lambda_hat

    model = variant
    f = k / n
    if variant in CENSORED_VARIANTS and k == 0:
        model = "full" if variant == "censored-original" else "boxcox"
        notes.append(f"no censored values; {model!r} model used")

    if r >= R_CLAMP:
        notes.append("r clamped to 1 - 1e-15")
    Y = z_transform(r, clamp=True)
    Z, warn = standardize(Y, n, model, f, coefficients)
    if warn:
        warnings.warn(warn, CalibrationWarning, stacklevel=2)
    p = min(1.0, max(0.0, std_normal_cdf(-Z)))
    return NormalityTest(r=r, Y=Y, Z=Z, p=p, variant=variant, n=n, f=f, alpha=alpha,
                         reject=p < alpha, model_variant=model, lambda_hat=lam, w=w,
                         calibration_warning=warn, notes=tuple(notes))


test_normality.__test__ = False  # keep pytest from collecting it
