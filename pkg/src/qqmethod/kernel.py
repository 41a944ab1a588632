"""Probability kernel: normal and Student-t quantiles plus seedable streams.

Everything here accepts scalars or numpy arrays. Scalars in give Python
floats out; arrays in give arrays out.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .errors import DomainError

__all__ = [
    "std_normal_cdf",
    "std_normal_inv_cdf",
    "student_t_cdf",
    "student_t_inv_cdf",
    "RngStream",
    "rng_standard_normal",
]

_SQRT2 = np.sqrt(2.0)
_SQRT2PI = np.sqrt(2.0 * np.pi)

# Acklam's rational approximation, relative error about 1.15e-9 before refinement.
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)
_P_LOW = 0.02425


def _out(x, scalar):
    return float(x) if scalar else x


def std_normal_cdf(z):
    """Standard normal CDF, computed through erfc so both tails keep full
    relative precision."""
    scalar = np.ndim(z) == 0
    z = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(z)):
        raise DomainError("std_normal_cdf requires finite input")
    return _out(0.5 * special.erfc(-z / _SQRT2), scalar)


def _acklam(p):
    p = np.asarray(p, dtype=float)
    x = np.empty_like(p)
    lo = p < _P_LOW
    hi = p > 1.0 - _P_LOW
    mid = ~(lo | hi)

    q = p[mid] - 0.5
    r = q * q
    num = (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q
    den = ((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0
    x[mid] = num / den

    for mask, tail, sign in ((lo, p[lo], 1.0), (hi, 1.0 - p[hi], -1.0)):
        q = np.sqrt(-2.0 * np.log(tail))
        num = ((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]
        den = (((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0
        x[mask] = sign * num / den
    return x


def std_normal_inv_cdf(p):
    """Inverse standard normal CDF.

    Acklam's rational approximation followed by one Halley step against
    :func:`std_normal_cdf`. The step is taken on the smaller tail so that
    ``p`` close to 1 does not lose digits.

    Raises
    ------
    DomainError
        If any ``p`` lies outside the open interval (0, 1).
    """
    scalar = np.ndim(p) == 0
    p = np.asarray(p, dtype=float)
    if not np.all((p > 0.0) & (p < 1.0)):
        raise DomainError("std_normal_inv_cdf requires 0 < p < 1")

    upper = p > 0.5
    tail = np.where(upper, 1.0 - p, p)
    x = _acklam(tail)  # nonpositive
    e = 0.5 * special.erfc(-x / _SQRT2) - tail
    u = e * _SQRT2PI * np.exp(0.5 * x * x)
    x = x - u / (1.0 + 0.5 * x * u)
    x = np.where(upper, -x, x)
    x = np.where(p == 0.5, 0.0, x)
    return _out(x, scalar)


def _t_upper_tail(t, nu):
    # P(T > t) for t >= 0
    return 0.5 * special.betainc(0.5 * nu, 0.5, nu / (nu + t * t))


def _t_log_pdf(t, nu):
    return (special.gammaln(0.5 * (nu + 1.0)) - special.gammaln(0.5 * nu)
            - 0.5 * np.log(nu * np.pi) - 0.5 * (nu + 1.0) * np.log1p(t * t / nu))


def student_t_cdf(t, nu):
    """Student-t CDF via the regularized incomplete beta function."""
    scalar = np.ndim(t) == 0 and np.ndim(nu) == 0
    t, nu = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(nu, dtype=float))
    if np.any(nu <= 0) or not np.all(np.isfinite(t)):
        raise DomainError("student_t_cdf requires finite t and nu > 0")
    tail = _t_upper_tail(np.abs(t), nu)
    return _out(np.where(t >= 0, 1.0 - tail, tail), scalar)


def student_t_inv_cdf(p, nu, *, max_iter=200):
    """Inverse Student-t CDF for real-valued degrees of freedom.

    Solves ``P(T > t) = min(p, 1 - p)`` for ``t >= 0`` with a safeguarded
    Newton iteration inside an expanding bracket, then restores the sign.
    ``nu`` may be an array broadcastable against ``p``.
    """
    scalar = np.ndim(p) == 0 and np.ndim(nu) == 0
    p, nu = np.broadcast_arrays(np.asarray(p, dtype=float), np.asarray(nu, dtype=float))
    if not np.all((p > 0.0) & (p < 1.0)):
        raise DomainError("student_t_inv_cdf requires 0 < p < 1")
    if not np.all(nu > 0.0) or not np.all(np.isfinite(nu)):
        raise DomainError("student_t_inv_cdf requires finite nu > 0")

    q = np.minimum(p, 1.0 - p).ravel()
    nuf = nu.ravel().copy()
    lo = np.zeros_like(q)
    hi = np.ones_like(q)
    # expand the bracket until the tail at hi drops below q
    for _ in range(2000):
        grow = _t_upper_tail(hi, nuf) > q
        if not grow.any():
            break
        hi[grow] *= 2.0
    # normal-quantile start, clipped into the bracket
    t = np.clip(-_acklam(q), lo, hi)
    t = np.where(q == 0.5, 0.0, t)
    active = q < 0.5
    for _ in range(max_iter):
        if not active.any():
            break
        ta, na, qa = t[active], nuf[active], q[active]
        g = _t_upper_tail(ta, na) - qa
        la, ha = lo[active], hi[active]
        la = np.where(g > 0, ta, la)
        ha = np.where(g <= 0, ta, ha)
        dens = np.exp(_t_log_pdf(ta, na))
        with np.errstate(divide="ignore", invalid="ignore"):
            step = g / dens
        nxt = ta + step
        bad = ~np.isfinite(nxt) | (nxt <= la) | (nxt >= ha)
        nxt = np.where(bad, 0.5 * (la + ha), nxt)
        lo[active], hi[active] = la, ha
        t[active] = nxt
        done = (np.abs(nxt - ta) <= 1e-14 * (1.0 + nxt)) | (ha - la <= 1e-15 * (1.0 + ha))
        idx = np.flatnonzero(active)
        active[idx[done]] = False

    t = t.reshape(p.shape)
    t = np.where(p < 0.5, -t, t)
    return _out(t, scalar)


@dataclass(frozen=True)
class RngStream:
    """A named, reproducible random stream.

    Backed by numpy's PCG64 seeded through ``SeedSequence``; ``stream_index``
    and ``key`` become the spawn key, so distinct indices give statistically
    independent streams and identical fields give identical draws.
    """

    seed: int
    stream_index: int = 0
    key: tuple[int, ...] = field(default=())
    algorithm_id: str = "PCG64"

    def __post_init__(self):
        if self.algorithm_id != "PCG64":
            raise DomainError(f"unsupported RNG algorithm {self.algorithm_id!r}")
        if not 0 <= self.seed < 2**64:
            raise DomainError("seed must be a 64-bit unsigned integer")

    def substream(self, *indices: int) -> RngStream:
        return RngStream(self.seed, self.stream_index, self.key + tuple(indices), self.algorithm_id)

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_index, *self.key))
        return np.random.Generator(np.random.PCG64(ss))

    def describe(self) -> dict:
        return {"algorithm_id": self.algorithm_id, "seed": self.seed,
                "stream_index": self.stream_index, "key": list(self.key)}


def rng_standard_normal(stream: RngStream, count: int) -> np.ndarray:
    if count < 0:
        raise DomainError("count must be nonnegative")
    return stream.generator().standard_normal(count)
