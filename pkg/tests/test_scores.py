import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qqmethod.errors import DomainError
from qqmethod.scores import (BLOM, HAZEN, WEIBULL, PlottingPosition, hazen_scores,
                             normal_scores, plotting_probabilities, t_score_matrix, t_scores)


def test_single_point():
    assert hazen_scores(1).values.tolist() == [0.0]
    assert t_scores(1, 2.5).values.tolist() == [0.0]


def test_hazen_small_n():
    # mpmath inverse normal at 0.125, 0.375, 0.625, 0.875 and 0.25, 0.75
    assert hazen_scores(4).values == pytest.approx(
        [-1.1503493803760082, -0.31863936396437516, 0.31863936396437516, 1.1503493803760082],
        abs=1e-12)
    assert hazen_scores(2).values == pytest.approx([-0.6744897501960817, 0.6744897501960817],
                                                   abs=1e-12)


def test_hazen_is_default_normal_scores():
    assert np.array_equal(hazen_scores(37).values, normal_scores(37).values)
    assert np.array_equal(hazen_scores(37).values, normal_scores(37, PlottingPosition(0.5, 0.5)).values)


def test_weibull_available():
    w = normal_scores(9, WEIBULL).values
    from qqmethod.kernel import std_normal_inv_cdf
    assert w == pytest.approx(std_normal_inv_cdf(np.arange(1, 10) / 10.0), abs=1e-14)


@given(st.integers(1, 400), st.sampled_from([0.0, 0.2, 0.375, 0.5, 0.9]))
def test_symmetry_and_monotone(n, a):
    z = normal_scores(n, PlottingPosition(a, a)).values
    assert np.max(np.abs(z + z[::-1])) <= 1e-12
    assert np.all(np.diff(z) > 0)


def test_asymmetric_requires_opt_in():
    pos = PlottingPosition(0.3, 0.6)
    with pytest.raises(DomainError):
        normal_scores(10, pos)
    z = normal_scores(10, pos, allow_asymmetric=True).values
    p = (np.arange(1, 11) - 0.6) / (11 - 0.9)
    from qqmethod.kernel import std_normal_inv_cdf
    assert z == pytest.approx(std_normal_inv_cdf(p), abs=1e-14)


@pytest.mark.parametrize("a,b", [(1.0, 0.5), (-0.1, 0.0), (0.5, 1.2)])
def test_position_bounds(a, b):
    with pytest.raises(DomainError):
        PlottingPosition(a, b)


def test_bad_n():
    for n in (0, -3, 2.5):
        with pytest.raises(DomainError):
            plotting_probabilities(n)


def test_hazen_blom_proximity():
    h = hazen_scores(120).values
    b = normal_scores(120, BLOM).values
    assert np.mean((h - b) ** 2) < 1e-3


def test_t_scores_cauchy():
    # tan(pi (p - 1/2)) at p = 1/6, 1/2, 5/6
    assert t_scores(3, 1.0).values == pytest.approx([-1.7320508075688772, 0.0, 1.7320508075688772],
                                                    abs=1e-10)


def test_t_scores_normal_limit():
    assert np.max(np.abs(t_scores(10, 1e6).values - hazen_scores(10).values)) < 1e-3


def test_t_scores_symmetric_and_domain():
    t = t_scores(51, 3.7).values
    assert np.max(np.abs(t + t[::-1])) <= 1e-12
    assert np.all(np.diff(t) > 0)
    with pytest.raises(DomainError):
        t_scores(5, 0.0)


@pytest.mark.parametrize("n", [1, 2, 7, 120])
def test_t_score_matrix_matches_rows(n):
    nu = np.array([1.0, 3.7, 50.0])
    M = t_score_matrix(n, nu)
    for row, v in zip(M, nu):
        assert row == pytest.approx(t_scores(n, v).values, abs=1e-12)


def test_scores_are_read_only():
    z = hazen_scores(5).values
    with pytest.raises(ValueError):
        z[0] = 1.0
