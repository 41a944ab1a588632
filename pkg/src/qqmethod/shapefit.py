"""Shape-parameter fitting by maximum QQ correlation.

Box-Cox power (with the profile pseudolikelihood as the conventional
alternative) and Student-t degrees of freedom. Each search evaluates a
coarse grid, then golden-section refines inside the bracket around the best
grid point. All objectives are batched: rows of a data matrix are searched
simultaneously, which is what the simulation studies use.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, InsufficientDataError, SearchWarning
from .kernel import student_t_inv_cdf
from .qqfit import QQFit, Sample, fit_censored, fit_full, fit_winsorized, qq_regression
from .scores import hazen_scores, t_score_matrix, t_scores

__all__ = [
    "BoxCoxFit",
    "TFit",
    "boxcox_transform",
    "boxcox_qqr_batch",
    "boxcox_loglik_batch",
    "maximize_batch",
    "fit_boxcox_qqr",
    "fit_boxcox_pl",
    "fit_t_nu",
    "fit_t_nu_batch",
    "LAMBDA_STEP",
]

LAMBDA_STEP = 0.25
NU_GRID_POINTS = 40
SEARCH_TOL = 1e-4
TIE_TOL = 1e-12
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class BoxCoxFit:
    lambda_hat: float
    method: str
    qqr_at_opt: float
    objective_at_opt: float
    fit_at_opt: QQFit
    lambda_range: tuple[float, float]
    search_trace: tuple[tuple[float, float], ...]
    flags: tuple[str, ...] = field(default=())

    def to_dict(self) -> dict:
        return {
            "lambda_hat": self.lambda_hat, "method": self.method,
            "qqr_at_opt": self.qqr_at_opt, "objective_at_opt": self.objective_at_opt,
            "fit_at_opt": self.fit_at_opt.to_dict(),
            "lambda_range": list(self.lambda_range),
            "search_trace": [list(t) for t in self.search_trace],
            "flags": list(self.flags),
        }


@dataclass(frozen=True)
class TFit:
    """Student-t location/scale/shape fit. ``sigma_hat`` is the t scale
    parameter, not the standard deviation of the data."""

    nu_hat: float
    qqr_at_opt: float
    mu_hat: float
    sigma_hat: float
    upper_limit: float
    lower_limit: float
    coverage: float
    nu_range: tuple[float, float]
    search_trace: tuple[tuple[float, float], ...]
    integer_only: bool = False

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["nu_range"] = list(self.nu_range)
        d["search_trace"] = [list(t) for t in self.search_trace]
        return d


def boxcox_transform(x, lam: float) -> np.ndarray:
    """``(x**lam - 1) / lam``, or ``log(x)`` at ``lam == 0``.

    Computed as ``expm1(lam * log x) / lam`` so the transform stays
    continuous as ``lam`` approaches zero.
    """
    x = np.asarray(x, dtype=float)
    bad = np.flatnonzero(~(x > 0))
    if bad.size:
        raise DomainError(f"Box-Cox requires positive data; offending indices {bad[:10].tolist()}")
    logx = np.log(x)
    if lam == 0:
        return logx
    return np.expm1(lam * logx) / lam


def _bc_from_log(logx, lam):
    # lam broadcast against rows of logx
    lam = np.asarray(lam, dtype=float)
    lamc = lam[..., None] if lam.ndim else lam
    safe = np.where(lamc == 0, 1.0, lamc)
    out = np.expm1(lamc * logx) / safe
    return np.where(lamc == 0, logx, out)


def _row_corr(Y, xc, sxx):
    yc = Y - Y.mean(axis=-1, keepdims=True)
    syy = np.sum(yc * yc, axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        r = np.sum(yc * xc, axis=-1) / np.sqrt(syy * sxx)
    return r


def boxcox_qqr_batch(logx, x, lam):
    """QQ correlation of Box-Cox transformed rows.

    ``logx`` holds log data, each row sorted ascending, aligned with the
    scores ``x``; ``lam`` is a scalar or one value per row.
    """
    x = np.asarray(x, dtype=float)
    xc = x - x.mean()
    return _row_corr(_bc_from_log(logx, lam), xc, xc @ xc)


def boxcox_loglik_batch(logx, lam, slog=None):
    """Box-Cox profile log-likelihood per row.

    ``-(n/2) log(sigma2(lam)) + (lam - 1) * sum(log x)`` with ``sigma2`` the
    ML variance of the transformed row.
    """
    n = logx.shape[-1]
    if slog is None:
        slog = logx.sum(axis=-1)
    y = _bc_from_log(logx, lam)
    var = y.var(axis=-1)
    with np.errstate(divide="ignore"):
        return -0.5 * n * np.log(var) + (np.asarray(lam) - 1.0) * slog


def maximize_batch(objective, grid, bounds, *, prefer="low", tol=SEARCH_TOL,
                   batch=1, record=False, refine=True):
    """Maximize a batched 1-D objective by grid search plus golden section.

    ``objective(params)`` takes an array of shape ``(batch,)`` and returns
    one objective value per row. Grid ties within ``TIE_TOL`` go to the grid
    value closest to ``prefer`` (a number, or ``"high"``/``"low"``). The
    returned optimum never scores below the best grid point. With
    ``refine=False`` the search stops at the best grid point.

    Returns ``(best_param, best_value, trace)`` where ``trace`` is a list of
    ``(param_array, value_array)`` evaluations when ``record`` is set.
    """
    grid = np.asarray(grid, dtype=float)
    lo_b, hi_b = bounds
    trace = []
    vals = np.empty((len(grid), batch))
    for j, g in enumerate(grid):
        v = objective(np.full(batch, g))
        vals[j] = np.where(np.isnan(v), -np.inf, v)
        if record:
            trace.append((np.full(batch, g), v))

    if prefer == "high":
        pref = -grid
    elif prefer == "low":
        pref = grid
    else:
        pref = np.abs(grid - float(prefer))
    top = vals.max(axis=0)
    tied = vals >= top - TIE_TOL
    rank = np.where(tied, pref[:, None], np.inf)
    j = np.argmin(rank, axis=0)
    best_p = grid[j]
    best_v = vals[j, np.arange(batch)]

    if len(grid) == 1 or not refine:
        return best_p, best_v, trace
    a = grid[np.maximum(j - 1, 0)]
    b = grid[np.minimum(j + 1, len(grid) - 1)]
    a = np.maximum(a, lo_b)
    b = np.minimum(b, hi_b)

    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc = objective(c)
    fd = objective(d)
    if record:
        trace += [(c.copy(), fc), (d.copy(), fd)]
    fc = np.where(np.isnan(fc), -np.inf, fc)
    fd = np.where(np.isnan(fd), -np.inf, fd)
    width = float(np.max(b - a))
    n_iter = 0 if width <= tol else int(math.ceil(math.log(tol / width) / math.log(_INVPHI)))
    for _ in range(n_iter):
        left = fc >= fd
        # keep [a, d] where c wins, else [c, b]
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        d_new = np.where(left, c, a + _INVPHI * (b - a))
        c_new = np.where(left, b - _INVPHI * (b - a), d)
        fd_keep = np.where(left, fc, fd)
        fc_keep = np.where(left, fc, fd)
        probe = np.where(left, c_new, d_new)
        fp = objective(probe)
        if record:
            trace.append((probe.copy(), fp))
        fp = np.where(np.isnan(fp), -np.inf, fp)
        fc = np.where(left, fp, fc_keep)
        fd = np.where(left, fd_keep, fp)
        c, d = c_new, d_new

    cand = np.where(fc >= fd, c, d)
    fcand = np.maximum(fc, fd)
    better = fcand > best_v
    best_p = np.where(better, cand, best_p)
    best_v = np.where(better, fcand, best_v)
    return best_p, best_v, trace


def _lambda_grid(lambda_range):
    lo, hi = map(float, lambda_range)
    if not lo < hi:
        raise DomainError("lambda_range must be an increasing interval")
    grid = np.arange(math.ceil(lo / LAMBDA_STEP), math.floor(hi / LAMBDA_STEP) + 1) * LAMBDA_STEP
    return np.unique(np.concatenate([[lo], grid, [hi]]))


def _trim_indices(sample, w):
    n, k = sample.n_total, sample.k_censored
    if w and k:
        raise DomainError("winsorizing and censoring are not combined")
    return slice(w, len(sample.values) - w), slice(k + w, n - w)


def _prepare_boxcox(sample, w):
    if sample.n_total < 10:
        raise InsufficientDataError("Box-Cox fitting needs n >= 10")
    vals = sample.values
    bad = np.flatnonzero(~(vals > 0))
    if bad.size:
        raise DomainError(f"Box-Cox requires positive data; offending indices {bad[:10].tolist()}")
    vs, xs = _trim_indices(sample, w)
    logx = np.log(vals)[vs]
    x = hazen_scores(sample.n_total).values[xs]
    if len(logx) < 3:
        raise InsufficientDataError("too few points remain for the QQ correlation")
    return logx, x


def _fit_transformed(sample, lam, w):
    y = boxcox_transform(sample.values, lam)
    s = Sample(y, sample.n_total, sample.k_censored)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        if sample.k_censored:
            return fit_censored(s)
        return fit_winsorized(s, w) if w else fit_full(s)


def _trace_pairs(trace):
    return tuple((float(p[0]), float(v[0])) for p, v in trace)


def _boxcox_fit(sample, lambda_range, w, method):
    logx, x = _prepare_boxcox(sample, w)
    grid = _lambda_grid(lambda_range)
    if method == "max-qqr":
        def obj(lam):
            return boxcox_qqr_batch(logx[None, :], x, lam)
    else:
        slog = logx.sum()

        def obj(lam):
            return boxcox_loglik_batch(logx[None, :], lam, slog)
    lam, val, trace = maximize_batch(obj, grid, (grid[0], grid[-1]), prefer=1.0, record=True)
    lam_hat, best = float(lam[0]), float(val[0])
    traced = np.array([v[0] for _, v in trace], dtype=float)
    flags = []
    if not np.isfinite(best):
        raise InsufficientDataError("objective undefined over the whole lambda range")
    if np.nanmax(traced) - np.nanmin(traced) <= TIE_TOL * max(1.0, abs(best)):
        flags.append("flat-objective")
        warnings.warn("objective is flat over the lambda range; returning lambda = 1",
                      SearchWarning, stacklevel=3)
        lam_hat = 1.0
        best = float(obj(np.array([1.0]))[0])
    fit = _fit_transformed(sample, lam_hat, w)
    return BoxCoxFit(lam_hat, method, fit.r, best, fit, (float(grid[0]), float(grid[-1])),
                     _trace_pairs(trace), tuple(flags))


def fit_boxcox_qqr(sample: Sample, lambda_range=(-3.0, 3.0), *, w: int = 0) -> BoxCoxFit:
    """Box-Cox power maximizing the QQ correlation of the transformed data.

    ``w`` winsorizes the QQ regression at every trial power; a censored
    sample uses its stored values against the upper full-sample scores.
    """
    return _boxcox_fit(sample, lambda_range, w, "max-qqr")


def fit_boxcox_pl(sample: Sample, lambda_range=(-3.0, 3.0)) -> BoxCoxFit:
    """Box-Cox power maximizing the profile log-likelihood."""
    if sample.k_censored:
        raise DomainError("pseudolikelihood fit is defined for uncensored samples only")
    return _boxcox_fit(sample, lambda_range, 0, "pseudolikelihood")


def _nu_grid(nu_range, integer_only):
    lo, hi = map(float, nu_range)
    if not 0 < lo < hi:
        raise DomainError("nu_range must satisfy 0 < lo < hi")
    if integer_only:
        grid = np.arange(math.ceil(lo), math.floor(hi) + 1, dtype=float)
        if grid.size == 0:
            raise DomainError("no integer nu inside nu_range")
        return grid
    return np.geomspace(lo, hi, NU_GRID_POINTS)


def fit_t_nu_batch(Y, nu_range=(1.0, 200.0), *, integer_only=False):
    """Max-QQr t fit for each row of ``Y`` (rows sorted ascending).

    Returns ``(nu_hat, qqr, intercept, slope)`` arrays.
    """
    Y = np.asarray(Y, dtype=float)
    batch, n = Y.shape
    grid = _nu_grid(nu_range, integer_only)
    yc = Y - Y.mean(axis=1, keepdims=True)
    syy = np.sum(yc * yc, axis=1)
    cache = {}

    def obj(nu):
        uniq = np.unique(nu)
        if len(uniq) == 1:
            key = float(uniq[0])
            if key not in cache:
                cache[key] = t_scores(n, key).values
            T = cache[key][None, :]
        else:
            T = t_score_matrix(n, nu)
        Tc = T - T.mean(axis=1, keepdims=True)
        stt = np.sum(Tc * Tc, axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.sum(yc * Tc, axis=1) / np.sqrt(stt * syy)

    if integer_only:
        nu, val, _ = maximize_batch(obj, grid, (grid[0], grid[-1]), prefer="high", batch=batch,
                                  refine=False)
        nu_hat = nu
    else:
        # refine on log(nu); the grid is geometric
        lg = np.log(grid)
        lnu, val, _ = maximize_batch(lambda u: obj(np.exp(u)), lg, (lg[0], lg[-1]),
                                     prefer="high", tol=SEARCH_TOL / grid[-1], batch=batch)
        nu_hat = np.exp(lnu)
    T = t_score_matrix(n, nu_hat)
    b0, b1, r = _batch_line(Y, T)
    return nu_hat, r, b0, b1


def _batch_line(Y, T):
    Tm = T.mean(axis=1, keepdims=True)
    Tc = T - Tm
    ym = Y.mean(axis=1, keepdims=True)
    yc = Y - ym
    stt = np.sum(Tc * Tc, axis=1)
    b1 = np.sum(Tc * yc, axis=1) / stt
    b0 = ym[:, 0] - b1 * Tm[:, 0]
    r = np.sum(Tc * yc, axis=1) / np.sqrt(stt * np.sum(yc * yc, axis=1))
    return b0, b1, r


def fit_t_nu(sample: Sample, nu_range=(1.0, 200.0), integer_only: bool = False,
             coverage: float = 0.95) -> TFit:
    """Fit location, scale and degrees of freedom of a t model by max QQr.

    For each trial ``nu`` the ordered data are regressed on Hazen t scores;
    the ``nu`` giving the largest correlation wins, and its intercept and
    slope estimate location and scale.
    """
    if sample.k_censored:
        raise DomainError("t fitting is defined for uncensored samples only")
    n = sample.n_total
    if n < 10:
        raise InsufficientDataError("t fitting needs n >= 10")
    y = sample.values
    qq_regression(y, hazen_scores(n).values)  # raises on degenerate data
    grid = _nu_grid(nu_range, integer_only)

    def obj(nu):
        T = t_scores(n, float(nu[0])).values
        return np.array([qq_regression(y, T)[2]])

    if integer_only:
        nu, _, trace = maximize_batch(obj, grid, (grid[0], grid[-1]), prefer="high", record=True,
                                       refine=False)
        nu_hat = float(nu[0])
    else:
        lg = np.log(grid)
        u, _, trace = maximize_batch(lambda u: obj(np.exp(u)), lg, (lg[0], lg[-1]),
                                     prefer="high", tol=SEARCH_TOL / grid[-1], record=True)
        nu_hat = float(np.exp(u[0]))
        trace = [(np.exp(p), v) for p, v in trace]
    mu, sigma, r = qq_regression(y, t_scores(n, nu_hat).values)
    q = student_t_inv_cdf(0.5 * (1.0 + coverage), nu_hat)
    return TFit(nu_hat, r, mu, sigma, mu + sigma * q, mu - sigma * q, coverage,
                (float(grid[0]), float(grid[-1])), _trace_pairs(trace), integer_only)


def boxcox_batch_fit(X, lambda_range=(-3.0, 3.0), method="max-qqr", *, w=0, k=0):
    """Batched Box-Cox estimate for each row of the positive matrix ``X``.

    Rows must be sorted ascending. With ``k`` > 0 the rows hold only the
    uncensored values of samples of size ``X.shape[1] + k``. Returns
    ``(lambda_hat, objective, qqr)``.
    """
    X = np.asarray(X, dtype=float)
    batch, m = X.shape
    n = m + k
    logx = np.log(X)
    if w:
        logx = logx[:, w:m - w]
    x = hazen_scores(n).values[k + w:n - w]
    grid = _lambda_grid(lambda_range)
    if method == "max-qqr":
        def obj(lam):
            return boxcox_qqr_batch(logx, x, lam)
    elif method == "pseudolikelihood":
        if k or w:
            raise DomainError("pseudolikelihood is defined for full samples only")
        slog = logx.sum(axis=1)

        def obj(lam):
            return boxcox_loglik_batch(logx, lam, slog)
    else:
        raise DomainError(f"unknown Box-Cox method {method!r}")
    lam, val, _ = maximize_batch(obj, grid, (grid[0], grid[-1]), prefer=1.0, batch=batch)
    qqr = boxcox_qqr_batch(logx, x, lam)
    return lam, val, qqr

