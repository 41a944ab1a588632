"""Plotting-position scores: the abscissa of a QQ plot.

Scores approximate expected order statistics by evaluating an inverse CDF
at ``(i - beta) / (n + 1 - alpha - beta)``. The Hazen position
``alpha = beta = 0.5`` is the default throughout the package.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DomainError
from .kernel import std_normal_inv_cdf, student_t_inv_cdf

__all__ = [
    "PlottingPosition",
    "HAZEN",
    "BLOM",
    "WEIBULL",
    "ScoreVector",
    "plotting_probabilities",
    "normal_scores",
    "hazen_scores",
    "t_scores",
]


@dataclass(frozen=True)
class PlottingPosition:
    alpha: float = 0.5
    beta: float = 0.5

    def __post_init__(self):
        for name in ("alpha", "beta"):
            v = getattr(self, name)
            if not 0.0 <= v < 1.0:
                raise DomainError(f"{name} must lie in [0, 1), got {v}")

    @property
    def symmetric(self) -> bool:
        return self.alpha == self.beta


HAZEN = PlottingPosition(0.5, 0.5)
BLOM = PlottingPosition(0.375, 0.375)
WEIBULL = PlottingPosition(0.0, 0.0)


@dataclass(frozen=True, eq=False)
class ScoreVector:
    """Scores for one sample size, distribution and plotting position.

    ``distribution`` is ``"normal"`` or ``"t"``; ``nu`` is set only for t.
    ``values`` is a read-only array.
    """

    n: int
    values: np.ndarray
    distribution: str = "normal"
    position: PlottingPosition = HAZEN
    nu: float | None = None

    def __len__(self):
        return self.n

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)


def _check_n(n):
    if int(n) != n or n < 1:
        raise DomainError(f"n must be a positive integer, got {n}")
    return int(n)


def plotting_probabilities(n: int, position: PlottingPosition = HAZEN) -> np.ndarray:
    n = _check_n(n)
    i = np.arange(1, n + 1, dtype=float)
    p = (i - position.beta) / (n + 1.0 - position.alpha - position.beta)
    if p[0] <= 0.0 or p[-1] >= 1.0:
        raise DomainError("plotting position pushes a probability outside (0, 1)")
    return p


@lru_cache(maxsize=512)
def _normal_cached(n, alpha, beta):
    pos = PlottingPosition(alpha, beta)
    p = plotting_probabilities(n, pos)
    z = std_normal_inv_cdf(p)
    if pos.symmetric:
        # enforce exact point symmetry
        z = 0.5 * (z - z[::-1])
    z.setflags(write=False)
    return z


def normal_scores(n: int, position: PlottingPosition = HAZEN, *,
                  allow_asymmetric: bool = False) -> ScoreVector:
    """Normal scores ``Phi^-1((i - beta) / (n + 1 - alpha - beta))``.

    Unequal ``alpha`` and ``beta`` break the point symmetry a symmetric
    distribution calls for; pass ``allow_asymmetric=True`` to get them anyway.
    """
    n = _check_n(n)
    if not position.symmetric and not allow_asymmetric:
        raise DomainError("alpha != beta gives asymmetric scores; pass allow_asymmetric=True")
    values = _normal_cached(n, float(position.alpha), float(position.beta))
    return ScoreVector(n, values, "normal", position)


def hazen_scores(n: int) -> ScoreVector:
    return normal_scores(n, HAZEN)


@lru_cache(maxsize=256)
def _t_cached(n, nu):
    p = plotting_probabilities(n, HAZEN)
    t = student_t_inv_cdf(p, nu)
    t = 0.5 * (t - t[::-1])
    t.setflags(write=False)
    return t


def t_scores(n: int, nu: float) -> ScoreVector:
    """Student-t scores at the Hazen positions for ``nu`` degrees of freedom."""
    n = _check_n(n)
    if not nu > 0 or not np.isfinite(nu):
        raise DomainError(f"nu must be positive and finite, got {nu}")
    return ScoreVector(n, _t_cached(n, float(nu)), "t", HAZEN, float(nu))


def t_score_matrix(n: int, nu: np.ndarray) -> np.ndarray:
    """Hazen t scores for many ``nu`` at once, shape ``(len(nu), n)``."""
    n = _check_n(n)
    nu = np.asarray(nu, dtype=float).reshape(-1, 1)
    if np.any(nu <= 0):
        raise DomainError("nu must be positive")
    half = (n + 1) // 2
    p = plotting_probabilities(n, HAZEN)[:half]
    lower = student_t_inv_cdf(p[None, :], nu)
    out = np.empty((nu.shape[0], n))
    out[:, :half] = lower
    out[:, n - half:] = -lower[:, ::-1]
    if n % 2:
        out[:, half - 1] = 0.0
    return out
