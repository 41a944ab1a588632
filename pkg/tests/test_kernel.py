import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qqmethod.errors import DomainError
from qqmethod.kernel import (RngStream, rng_standard_normal, std_normal_cdf,
                             std_normal_inv_cdf, student_t_cdf, student_t_inv_cdf)

# Expected values below were computed with mpmath at 40 digits
# (ncdf, and root finding on the regularized incomplete beta for t).
INV_975 = 1.959963984540054
T_975_5 = 2.5705818356363155
T_975_3P7 = 2.8675207071911895
T_90_HALF = 10.270324410234506
T_99_30 = 2.4572615424005914


def test_cdf_basic():
    assert std_normal_cdf(0.0) == 0.5
    assert std_normal_cdf(1.959964) == pytest.approx(0.975, abs=1e-9)
    assert std_normal_cdf(1.959964) == pytest.approx(0.9750000009035576, abs=1e-15)


@pytest.mark.parametrize("z", [-37.0, -8.5, -3.2, -1.0, -1e-8, 0.3, 2.7, 7.9])
def test_cdf_against_mpmath(z):
    assert std_normal_cdf(z) == pytest.approx(float(mpmath.ncdf(z)), abs=1e-12, rel=1e-12)


@given(st.floats(-40, 40))
def test_cdf_symmetry(z):
    assert std_normal_cdf(z) + std_normal_cdf(-z) == pytest.approx(1.0, abs=1e-15)


def test_cdf_monotone():
    z = np.linspace(-10, 10, 20001)
    assert np.all(np.diff(std_normal_cdf(z)) >= 0)


def test_cdf_rejects_nonfinite():
    with pytest.raises(DomainError):
        std_normal_cdf(float("nan"))
    with pytest.raises(DomainError):
        std_normal_cdf(np.array([0.0, np.inf]))


def test_inv_cdf_values():
    assert std_normal_inv_cdf(0.5) == 0.0
    assert std_normal_inv_cdf(0.975) == pytest.approx(INV_975, abs=1e-12)
    assert std_normal_inv_cdf(0.1) == -std_normal_inv_cdf(0.9)


@pytest.mark.parametrize("p", [0.0, 1.0, -0.1, 1.5, float("nan")])
def test_inv_cdf_domain(p):
    with pytest.raises(DomainError):
        std_normal_inv_cdf(p)


def test_inv_cdf_accuracy_grid():
    p = np.logspace(-8, math.log10(0.5), 5000)
    p = np.concatenate([p, 1 - p])
    assert np.max(np.abs(std_normal_cdf(std_normal_inv_cdf(p)) - p)) <= 1e-10


@given(st.floats(1e-300, 1 - 1e-16))
def test_inv_cdf_odd_symmetry(p):
    q = 1.0 - p
    if 0 < q < 1 and 1.0 - q == p:
        assert std_normal_inv_cdf(p) == pytest.approx(-std_normal_inv_cdf(q), abs=1e-9)


@given(st.floats(-6, 6))
def test_roundtrip(z):
    assert abs(std_normal_inv_cdf(std_normal_cdf(z)) - z) <= 1e-8


def test_t_inv_known_values():
    assert student_t_inv_cdf(0.5, 3.0) == 0.0
    assert student_t_inv_cdf(0.75, 1.0) == pytest.approx(1.0, abs=1e-12)
    assert student_t_inv_cdf(0.975, 5.0) == pytest.approx(T_975_5, abs=1e-10)
    assert student_t_inv_cdf(0.975, 3.7) == pytest.approx(T_975_3P7, abs=1e-10)
    assert student_t_inv_cdf(0.9, 0.5) == pytest.approx(T_90_HALF, rel=1e-10)
    assert student_t_inv_cdf(0.99, 30.0) == pytest.approx(T_99_30, abs=1e-10)


def test_t_inv_reproduces_limit_constant():
    # 20 + 4 * t_{0.975, 5} rounds to the worked-example reference limit
    assert round(20 + 4 * student_t_inv_cdf(0.975, 5.0), 2) == 30.28


def test_t_inv_normal_limit():
    p = np.arange(1, 100) / 100
    assert np.max(np.abs(student_t_inv_cdf(p, 1e6) - std_normal_inv_cdf(p))) < 1e-3


@settings(max_examples=60)
@given(st.floats(0.001, 0.999), st.floats(0.2, 500))
def test_t_inv_roundtrip_and_symmetry(p, nu):
    t = student_t_inv_cdf(p, nu)
    assert student_t_cdf(t, nu) == pytest.approx(p, abs=1e-10)
    assert student_t_inv_cdf(1 - p, nu) == pytest.approx(-t, rel=1e-8, abs=1e-10)


def test_t_inv_monotone_and_broadcast():
    p = np.linspace(0.01, 0.99, 99)
    nu = np.array([[0.7], [3.7], [40.0]])
    t = student_t_inv_cdf(p[None, :], nu)
    assert t.shape == (3, 99)
    assert np.all(np.diff(t, axis=1) > 0)


@pytest.mark.parametrize("p,nu", [(0.0, 3.0), (1.0, 3.0), (0.5, 0.0), (0.5, -1.0)])
def test_t_inv_domain(p, nu):
    with pytest.raises(DomainError):
        student_t_inv_cdf(p, nu)


def test_rng_determinism_and_empty():
    s = RngStream(42, 3)
    assert rng_standard_normal(s, 0).shape == (0,)
    a = rng_standard_normal(s, 1000)
    b = rng_standard_normal(RngStream(42, 3), 1000)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, rng_standard_normal(RngStream(42, 4), 1000))


def test_rng_moments():
    x = rng_standard_normal(RngStream(7), 10**6)
    assert abs(x.mean()) < 0.005
    assert abs(x.std() - 1) < 0.005


def test_rng_substreams_uncorrelated():
    a = rng_standard_normal(RngStream(11, 0), 10**5)
    b = rng_standard_normal(RngStream(11, 1), 10**5)
    c = rng_standard_normal(RngStream(11, 0).substream(5), 10**5)
    assert abs(np.corrcoef(a, b)[0, 1]) < 0.01
    assert abs(np.corrcoef(a, c)[0, 1]) < 0.01


def test_rng_validation():
    with pytest.raises(DomainError):
        RngStream(-1)
    with pytest.raises(DomainError):
        RngStream(1, algorithm_id="MT19937")
    with pytest.raises(DomainError):
        rng_standard_normal(RngStream(1), -1)
