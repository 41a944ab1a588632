import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qqmethod.errors import (CalibrationError, CalibrationWarning, DomainError,
                             InsufficientDataError)
from qqmethod.normtest import (BUILTIN_COEFFICIENTS, VARIANTS, CalibrationCoefficients,
                               inverse_z_transform, mean_sd_model, standardize,
                               test_normality as run_test, winsor_count, z_transform)
from qqmethod.qqfit import Sample
from qqmethod.scores import hazen_scores

# mpmath, 30 digits
Y_AT_099 = -5.848931924611135
FULL_120 = (-7.037164799961453, 0.8000223698818051)
CENS_120_Q = (-6.766062519962262, 0.8908529430578119)


def test_transform_anchor_points():
    assert z_transform(0.0) == 0.0
    assert z_transform(0.99) == pytest.approx(Y_AT_099, abs=1e-12)
    assert z_transform(np.array([0.0, 0.99])) == pytest.approx([0.0, Y_AT_099], abs=1e-12)


@given(st.floats(-1.0, 0.999999))
def test_transform_roundtrip(r):
    assert inverse_z_transform(z_transform(r)) == pytest.approx(r, abs=1e-9)


def test_transform_decreasing():
    r = np.linspace(-1, 0.9999, 2000)
    assert np.all(np.diff(z_transform(r)) < 0)


def test_transform_rejects_one_unless_clamped():
    with pytest.raises(DomainError):
        z_transform(1.0)
    assert math.isfinite(z_transform(1.0, clamp=True))
    with pytest.raises(DomainError):
        z_transform(float("nan"))


def test_full_model_at_120():
    assert mean_sd_model(120, "full") == pytest.approx(FULL_120, abs=1e-12)


def test_censored_model_at_120_quarter():
    assert mean_sd_model(120, "censored-original", 0.25) == pytest.approx(CENS_120_Q, abs=1e-12)


def test_censored_model_reduces_at_f0():
    cc = BUILTIN_COEFFICIENTS["censored-original"]
    L = math.log(150)
    assert cc.evaluate(120, 0.0) == pytest.approx((cc.mean[0] + cc.mean[1] * L,
                                                   cc.sd[0] + cc.sd[1] * L), abs=1e-15)


@pytest.mark.parametrize("variant", VARIANTS)
@pytest.mark.parametrize("n", [60, 120, 480, 1080])
def test_standardize_at_model_mean_is_zero(variant, n):
    f = 0.2 if variant.startswith("censored") else 0.0
    mean, sd = mean_sd_model(n, variant, f)
    assert sd > 0
    Z, warn = standardize(mean, n, variant, f)
    assert Z == pytest.approx(0.0, abs=1e-12) and warn is None


def test_standardize_warns_outside_range():
    _, warn = standardize(-6.0, 40, "full")
    assert "outside" in warn
    with pytest.raises(InsufficientDataError):
        standardize(-6.0, 5, "full")
    with pytest.raises(CalibrationError):
        standardize(-6.0, 120, "censored-original", 0.6)


def test_custom_coefficients():
    cc = CalibrationCoefficients("full", (0.0, 0.0), (1.0, 0.0), provenance="unit")
    Z, _ = standardize(-1.5, 100, "full", coefficients={"full": cc})
    assert Z == -1.5
    with pytest.raises(DomainError):
        CalibrationCoefficients("full", (1.0,), (1.0,))


@pytest.mark.parametrize("n,w", [(40, 1), (60, 2), (100, 3), (120, 3), (140, 4), (180, 5), (200, 5)])
def test_winsor_count(n, w):
    assert winsor_count(n) == w


def test_perfect_fit_has_p_near_one():
    s = Sample.from_values(hazen_scores(120).values)
    t = run_test(s)
    assert t.p == pytest.approx(1.0, abs=1e-6)
    assert not t.reject and any("clamped" in x for x in t.notes)


def test_heavy_tails_rejected():
    s = Sample.from_values(np.random.default_rng(0).standard_cauchy(200))
    t = run_test(s)
    assert t.reject and t.p < 1e-3


@settings(max_examples=20, deadline=None)
@given(st.floats(0.01, 1e3), st.floats(-1e3, 1e3))
def test_affine_invariance(a, b):
    y = np.random.default_rng(3).standard_normal(100)
    t0 = run_test(Sample.from_values(y))
    t1 = run_test(Sample.from_values(a * y + b))
    assert t1.Z == pytest.approx(t0.Z, abs=1e-7)


def test_z_decreasing_in_r():
    rng = np.random.default_rng(9)
    pairs = []
    for _ in range(20):
        t = run_test(Sample.from_values(rng.standard_normal(120)))
        pairs.append((t.r, t.Z))
    pairs.sort()
    assert all(a[1] >= b[1] for a, b in zip(pairs, pairs[1:]))


def test_p_is_upper_tail_of_z():
    t = run_test(Sample.from_values(np.random.default_rng(4).standard_normal(120)))
    assert t.p == pytest.approx(0.5 * math.erfc(t.Z / math.sqrt(2)), abs=1e-15)
    assert t.model_variant == "full" and t.f == 0.0


def test_variant_compatibility():
    v = np.random.default_rng(5).lognormal(size=120)
    cens = Sample.from_values(v, censor_below=np.sort(v)[30])
    for variant in ("full", "winsorized", "boxcox", "boxcox-winsorized"):
        with pytest.raises(DomainError):
            run_test(cens, variant)
    t = run_test(cens, "censored-boxcox")
    assert t.f == 0.25 and t.lambda_hat is not None
    heavy = Sample.from_values(v, censor_below=np.sort(v)[72])
    with pytest.raises(CalibrationError):
        run_test(heavy, "censored-original")
    with pytest.raises(DomainError):
        run_test(Sample.from_values(v), "nonsense")


def test_censored_variant_without_censoring_falls_back():
    s = Sample.from_values(np.random.default_rng(6).standard_normal(120))
    t = run_test(s, "censored-original")
    assert t.model_variant == "full"
    assert t.Z == pytest.approx(run_test(s, "full").Z, abs=1e-14)


def test_winsorized_variant_uses_rounded_count():
    s = Sample.from_values(np.random.default_rng(7).standard_normal(120))
    assert run_test(s, "winsorized").w == 3
    assert run_test(Sample.from_values(np.exp(s.values)), "boxcox-winsorized").w == 3


def test_small_sample_errors_and_warning():
    with pytest.raises(InsufficientDataError):
        run_test(Sample.from_values(np.arange(1.0, 9.0)))
    with pytest.warns(CalibrationWarning):
        t = run_test(Sample.from_values(np.random.default_rng(1).standard_normal(30)))
    assert t.calibration_warning is not None


@pytest.mark.slow
@pytest.mark.parametrize("variant", ["full", "winsorized"])
def test_null_size(variant):
    rng = np.random.default_rng(11)
    rej = sum(run_test(Sample.from_values(rng.standard_normal(120)), variant).reject
              for _ in range(2000))
    assert abs(rej / 2000 - 0.05) < 3 * math.sqrt(0.05 * 0.95 / 2000) + 0.01
