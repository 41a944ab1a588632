"""Seeded Monte Carlo studies of the QQ estimators and test.

Each ``run_*`` function takes a :class:`StudyConfig` and returns a
:class:`StudyReport` holding per-cell summaries with Monte Carlo standard
errors, the published reference values where they exist, tolerance checks
against them, and plot-ready rows for the corresponding figure.

Replicate ``r`` of cell ``c`` always draws from the substream
``(seed, c, r)``, so results do not depend on evaluation order. Studies
that compare several treatments of the same sample (censoring levels,
winsorizing depths, shifts) reuse one set of draws across treatments.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .errors import DomainError, FormatError
from .kernel import RngStream, std_normal_cdf, std_normal_inv_cdf
from .normtest import mean_sd_model, winsor_count, z_transform
from .qqfit import LIMIT_SE_FACTOR, censored_efficiencies, qq_regression_batch
from .scores import PlottingPosition, hazen_scores, normal_scores
from .shapefit import boxcox_batch_fit, fit_t_nu_batch

__all__ = [
    "STUDIES",
    "StudyConfig",
    "StudyReport",
    "default_config",
    "run_study",
    "run_score_profile",
    "run_slope_efficiency",
    "run_censoring_study",
    "run_winsor_study",
    "run_boxcox_study",
    "run_calibration",
    "run_power_study",
    "run_t_recovery",
    "read_external_pvalues",
]

Z975 = std_normal_inv_cdf(0.975)
DEFAULT_CALIBRATION_SIZES = (60, 80, 100, 120, 160, 200, 240, 320, 400, 480, 640, 840, 1080)

# Published values used for side-by-side comparison.
PUBLISHED_SLOPE = {
    30: dict(s_mean=0.9919, slope_mean=0.9793, s_sd=0.1305, slope_sd=0.1292,
             s_rmse=0.1308, slope_rmse=0.1309, efficiency=99.86),
    60: dict(s_mean=0.9958, slope_mean=0.9883, s_sd=0.0920, slope_sd=0.0915,
             s_rmse=0.0921, slope_rmse=0.0922, efficiency=99.70),
    120: dict(s_mean=0.9982, slope_mean=0.9939, s_sd=0.0646, slope_sd=0.0645,
              s_rmse=0.0647, slope_rmse=0.0648, efficiency=99.61),
    240: dict(s_mean=0.9991, slope_mean=0.9967, s_sd=0.0455, slope_sd=0.0455,
              s_rmse=0.0455, slope_rmse=0.0456, efficiency=99.89),
}
PUBLISHED_WINSOR_LOSS = {
    "mean": {80: (0.4, 0.3, 1.6, 3.3, 3.2), 120: (1.7, 1.5, 1.3, 3.3, 4.4),
             160: (-0.9, 2.0, 2.3, -1.8, 1.0), 200: (-2.5, 3.2, 4.7, 0.9, 2.3),
             240: (-0.7, -0.9, 0.1, 2.2, -2.7)},
    "sd": {80: (4.8, 9.0, 13.5, 16.3, 20.6), 120: (5.0, 10.2, 12.9, 19.1, 21.6),
           160: (5.4, 10.6, 13.0, 19.0, 24.0), 200: (8.3, 9.5, 13.2, 21.9, 25.4),
           240: (6.3, 6.3, 15.5, 28.7, 29.3)},
    "limit": {80: (3.3, 6.5, 9.8, 12.4, 17.0), 120: (3.6, 7.2, 10.3, 15.9, 16.7),
              160: (3.4, 6.7, 9.5, 9.7, 17.5), 200: (5.6, 9.8, 11.6, 16.4, 16.6),
              240: (5.8, 7.3, 13.1, 25.3, 17.9)},
}
# lambda: (bias QQ, bias PL, sd QQ, sd PL, rmse QQ, rmse PL, efficiency)
PUBLISHED_BOXCOX = {
    -2.0: (0.014, 0.073, 0.592, 0.564, 0.592, 0.568, 92.0),
    -1.5: (0.011, 0.056, 0.440, 0.419, 0.440, 0.422, 92.0),
    -1.0: (0.012, 0.042, 0.293, 0.279, 0.293, 0.282, 92.6),
    -0.5: (0.005, 0.020, 0.146, 0.139, 0.146, 0.140, 92.1),
    0.0: (-0.004, -0.004, 0.315, 0.306, 0.315, 0.306, 94.4),
    0.5: (-0.003, -0.017, 0.148, 0.140, 0.148, 0.141, 91.4),
    1.0: (-0.009, -0.039, 0.294, 0.279, 0.294, 0.282, 91.8),
    1.5: (-0.013, -0.058, 0.451, 0.429, 0.452, 0.433, 91.8),
    2.0: (-0.012, -0.071, 0.585, 0.556, 0.585, 0.561, 91.7),
}
PUBLISHED_NULL_MODELS = {
    "full": dict(A=1.992, B=-1.802, D=0.6717, E=0.02561, mean_r2=0.9999, mean_res_sd=0.0164),
    "winsorized": dict(A=3.12, B=-2.115, D=0.4413, E=0.08462, mean_r2=0.9999, mean_res_sd=0.0173),
    "boxcox": dict(A=1.405, B=-1.782, D=0.5941, E=0.03245, mean_r2=0.9998, mean_res_sd=0.0196),
    "boxcox-winsorized": dict(A=2.809, B=-2.164, D=0.4288, E=0.07453, mean_r2=0.9999,
                              mean_res_sd=0.0172),
}
PUBLISHED_CENSORED_MODELS = {
    "censored-original": dict(mean=(2.256, -1.923, -0.7297, 0.6353),
                              sd=(0.598, 0.05197, 0.2236, -0.01872)),
    "censored-boxcox": dict(mean=(1.796, -1.937, -1.331, 0.7059),
                            sd=(0.475, 0.06489, 0.3955, -0.06081)),
}

STUDIES = ("A-profile", "B-efficiency", "C-censoring", "D-winsor", "E-boxcox",
           "F-calibrate", "G-power", "H-tfit")

_DEFAULTS = {
    "A-profile": dict(replicates=5000, sample_sizes=(120,), full=100_000,
                      params=dict(grid=[round(0.05 * i, 2) for i in range(19)])),
    "B-efficiency": dict(replicates=10_000, sample_sizes=(30, 60, 120, 240), full=10_000,
                         params={}),
    "C-censoring": dict(replicates=2000, sample_sizes=(60, 120, 240, 480), full=100_000,
                        params=dict(censored_fractions=[round(0.05 * i, 2) for i in range(1, 11)])),
    "D-winsor": dict(replicates=10_000, sample_sizes=(80, 120, 160, 200, 240), full=100_000,
                     params=dict(winsor=[1, 2, 3, 4, 5])),
    "E-boxcox": dict(replicates=2000, sample_sizes=(120,), full=10_000,
                     params=dict(lambdas=[-2 + 0.25 * i for i in range(17)],
                                 lambda_range=[-3.0, 3.0], mean=1.0, sd=0.25)),
    "F-calibrate": dict(replicates=2000, sample_sizes=DEFAULT_CALIBRATION_SIZES, full=100_000,
                        params=dict(variants=["full", "winsorized", "boxcox", "boxcox-winsorized"],
                                    censored=False,
                                    censored_fractions=[round(0.05 * i, 2) for i in range(1, 11)])),
    "G-power": dict(replicates=5000, sample_sizes=(120,), full=10_000,
                    params=dict(shifts=[round(1 + 0.1 * i, 1) for i in range(11)], mean=3.0,
                                alpha=0.05, variants=["full"], sw_pvalues=None)),
    "H-tfit": dict(replicates=500, sample_sizes=(120,), full=10_000,
                   params=dict(mu=20.0, sigma=4.0, nu=5.0, nu_range=[1.0, 200.0])),
}


@dataclass
class StudyConfig:
    study_id: str
    replicates: int | None = None
    sample_sizes: tuple[int, ...] | None = None
    seed: int = 20240601
    params: dict = field(default_factory=dict)
    full_scale: bool = False

    def __post_init__(self):
        if self.study_id not in STUDIES:
            raise DomainError(f"unknown study {self.study_id!r}; choose from {STUDIES}")
        d = _DEFAULTS[self.study_id]
        if self.replicates is None:
            self.replicates = d["full"] if self.full_scale else d["replicates"]
        if self.sample_sizes is None:
            self.sample_sizes = d["sample_sizes"]
        self.sample_sizes = tuple(int(n) for n in self.sample_sizes)
        self.params = {**d["params"], **(self.params or {})}
        if self.replicates < 100:
            raise DomainError("replicates must be at least 100")

    @property
    def stream(self) -> RngStream:
        return RngStream(self.seed)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["sample_sizes"] = list(self.sample_sizes)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> StudyConfig:
        known = {"study_id", "replicates", "sample_sizes", "seed", "params", "full_scale"}
        extra = set(d) - known
        if extra:
            raise DomainError(f"unknown config keys {sorted(extra)}")
        return cls(**d)


def default_config(study_id: str, **overrides) -> StudyConfig:
    return StudyConfig(study_id, **overrides)


@dataclass
class StudyReport:
    study_id: str
    config: dict
    rng: dict
    cells: list[dict]
    summary: dict
    reference: dict
    checks: list[dict]
    figures: dict[str, list[dict]]
    runtime_s: float = 0.0
    version: str = __version__

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks)

    def check(self, name: str) -> dict:
        for c in self.checks:
            if c["name"] == name:
                return c
        raise KeyError(name)

    def to_dict(self, include_runtime: bool = True) -> dict:
        d = asdict(self)
        if not include_runtime:
            d.pop("runtime_s")
        return _jsonable(d)

    def to_json(self, include_runtime: bool = True) -> str:
        return json.dumps(self.to_dict(include_runtime), indent=2, sort_keys=True)

    def figure_csv(self, name: str) -> str:
        rows = self.figures[name]
        buf = io.StringIO()
        if rows:
            w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
            w.writeheader()
            for row in rows:
                w.writerow({k: _csv_value(v) for k, v in row.items()})
        return buf.getvalue()

    def write(self, out_dir) -> list[Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = [out / f"report_{self.study_id}.json"]
        paths[0].write_text(self.to_json())
        for name in self.figures:
            p = out / f"figure_{name}.csv"
            p.write_text(self.figure_csv(name))
            paths.append(p)
        return paths


def _csv_value(v):
    if isinstance(v, float) and not math.isfinite(v):
        return ""
    return v


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


# Monte Carlo standard errors -------------------------------------------------

def _mcse_mean(a):
    return float(np.std(a, ddof=1) / math.sqrt(len(a)))


def _mcse_sd(a):
    return float(np.std(a, ddof=1) / math.sqrt(2.0 * (len(a) - 1)))


def _summ(est, truth):
    """mean, sd, RMSE of an estimator with their MC standard errors."""
    est = np.asarray(est, dtype=float)
    err2 = (est - truth) ** 2
    rmse = math.sqrt(err2.mean())
    return dict(
        mean=float(est.mean()), mean_mcse=_mcse_mean(est),
        bias=float(est.mean() - truth),
        sd=float(est.std(ddof=1)), sd_mcse=_mcse_sd(est),
        rmse=rmse, rmse_mcse=_mcse_mean(err2) / (2.0 * rmse) if rmse > 0 else 0.0,
    )


def _ratio(a, b):
    """Ratio of means of paired per-replicate quantities, with delta-method SE."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    ratio = a.mean() / b.mean()
    infl = (a - ratio * b) / b.mean()
    return float(ratio), _mcse_mean(infl)


def _var_ratio(u, v):
    """var(u) / var(v) for paired samples."""
    return _ratio((u - u.mean()) ** 2, (v - v.mean()) ** 2)


def _rate(hits):
    p = float(np.mean(hits))
    return p, math.sqrt(max(p * (1 - p), 1e-12) / len(hits))


def _linfit(x, y):
    """OLS of y on x: (intercept, slope, se_intercept, se_slope, r2, res_sd)."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    X = np.column_stack([np.ones_like(x), x])
    return _ols(X, y)


def _ols(X, y):
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    dof = max(len(y) - X.shape[1], 1)
    s2 = resid @ resid / dof
    cov = s2 * np.linalg.inv(X.T @ X)
    tss = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - (resid @ resid) / tss if tss > 0 else float("nan")
    return coef, np.sqrt(np.diag(cov)), float(r2), float(math.sqrt(s2))


def _check(name, value, target, tol, mcse=0.0, *, lo=None, hi=None, reference=None):
    """Tolerance check; the half-width is the larger of ``tol`` and 3 MCSE."""
    half = max(tol, 3.0 * mcse) if tol is not None else None
    if lo is None and half is not None:
        lo = target - half
    if hi is None and half is not None:
        hi = target + half
    ok = (lo is None or value >= lo) and (hi is None or value <= hi)
    return dict(name=name, value=_jsonable(value), mcse=_jsonable(mcse), target=_jsonable(target),
                lo=_jsonable(lo), hi=_jsonable(hi), reference=reference, passed=bool(ok))


# Draws -----------------------------------------------------------------------

def _normal_block(stream: RngStream, cell: int, reps: int, n: int) -> np.ndarray:
    out = np.empty((reps, n))
    for r in range(reps):
        out[r] = stream.substream(cell, r).generator().standard_normal(n)
    return out


def _sorted_normal(stream, cell, reps, n):
    return np.sort(_normal_block(stream, cell, reps, n), axis=1)


def _report(config, cells, summary, reference, checks, figures, t0):
    return StudyReport(config.study_id, config.to_dict(), config.stream.describe(), cells,
                       summary, reference, checks, figures, time.perf_counter() - t0)


# Studies ---------------------------------------------------------------------

def run_score_profile(config: StudyConfig) -> StudyReport:
    """Efficiency of the QQ slope over a grid of symmetric plotting positions."""
    t0 = time.perf_counter()
    grid = [float(a) for a in config.params["grid"]]
    if not all(0.0 <= a <= 0.9 for a in grid):
        raise DomainError("plotting-position grid must lie in [0, 0.9]")
    n = config.sample_sizes[0]
    X = _sorted_normal(config.stream, 0, config.replicates, n)
    s = X.std(axis=1, ddof=1)
    err_s = (s - 1.0) ** 2
    errs = []
    for a in grid:
        x = normal_scores(n, PlottingPosition(a, a)).values
        slope = qq_regression_batch(X, x)[1]
        errs.append((slope - 1.0) ** 2)
    mse = np.array([e.mean() for e in errs])
    jbest = int(np.argmin(mse))
    cells, fig = [], []
    for a, e, m in zip(grid, errs, mse):
        eff, eff_se = _ratio(errs[jbest], e)
        vs_s, vs_s_se = _ratio(err_s, e)
        cell = dict(n=n, alpha_beta=a, mse_slope=float(m), mse_slope_mcse=_mcse_mean(e),
                    efficiency=eff, efficiency_mcse=eff_se,
                    efficiency_vs_s=vs_s, efficiency_vs_s_mcse=vs_s_se)
        cells.append(cell)
        fig.append(dict(alpha_beta=a, efficiency=eff, efficiency_mcse=eff_se,
                        efficiency_vs_s=vs_s))
    by_a = {c["alpha_beta"]: c for c in cells}
    summary = dict(argmax=grid[jbest], mse_s=float(err_s.mean()))
    checks = [_check("argmax", grid[jbest], 0.47, None, lo=0.40, hi=0.55,
                     reference="empirical maximum 0.47")]
    if 0.5 in by_a:
        c = by_a[0.5]
        summary["efficiency_hazen"] = c["efficiency"]
        checks.append(_check("hazen_within_0.5pct", c["efficiency"], 1.0, None,
                             c["efficiency_mcse"], lo=0.995, reference="no perceptible loss at 0.5"))
    if 0.375 in by_a:
        summary["efficiency_blom"] = by_a[0.375]["efficiency"]
    if 0.0 in by_a:
        c = by_a[0.0]
        summary["efficiency_weibull"] = c["efficiency"]
        checks.append(_check("weibull_2pct_below_max", c["efficiency"], 1.0, None,
                             c["efficiency_mcse"], hi=0.98, reference="Weibull score is poor"))
    return _report(config, cells, summary, {"argmax": 0.47}, checks, {"A1": fig}, t0)


def run_slope_efficiency(config: StudyConfig) -> StudyReport:
    """Sample sd versus QQ slope as estimators of sigma."""
    t0 = time.perf_counter()
    cells, checks, fig = [], [], []
    for ci, n in enumerate(config.sample_sizes):
        X = _sorted_normal(config.stream, ci, config.replicates, n)
        s = X.std(axis=1, ddof=1)
        slope = qq_regression_batch(X, hazen_scores(n).values)[1]
        ss, sq = _summ(s, 1.0), _summ(slope, 1.0)
        eff, eff_se = _ratio((s - 1) ** 2, (slope - 1) ** 2)
        cell = dict(n=n, s=ss, slope=sq, efficiency=100 * eff, efficiency_mcse=100 * eff_se)
        cells.append(cell)
        for i in range(min(100, len(s))):
            fig.append(dict(n=n, replicate=i, s=float(s[i]), slope=float(slope[i])))
        ref = PUBLISHED_SLOPE.get(n)
        if ref:
            checks += [
                _check(f"n{n}_slope_mean", sq["mean"], ref["slope_mean"], 0.003, sq["mean_mcse"],
                       reference="published slope study"),
                _check(f"n{n}_slope_sd", sq["sd"], ref["slope_sd"], 0.002, sq["sd_mcse"],
                       reference="published slope study"),
                _check(f"n{n}_s_mean", ss["mean"], ref["s_mean"], 0.003, ss["mean_mcse"],
                       reference="published slope study"),
                _check(f"n{n}_efficiency", 100 * eff, ref["efficiency"], 0.5, 100 * eff_se,
                       reference="published slope study"),
            ]
        checks.append(_check(f"n{n}_efficiency_ge_99", 100 * eff, 99.0, None, 100 * eff_se,
                             lo=99.0 - 3 * 100 * eff_se))
    return _report(config, cells, {}, {"published_slope": PUBLISHED_SLOPE}, checks, {"B1": fig}, t0)


def run_censoring_study(config: StudyConfig) -> StudyReport:
    """Efficiency of left-censored QQ estimates against the fitted models."""
    t0 = time.perf_counter()
    fracs = [float(c) for c in config.params["censored_fractions"]]
    if not all(0.0 < c <= 0.5 for c in fracs):
        raise DomainError("censored fractions must lie in (0, 0.5]")
    cells, checks, c1 = [], [], []
    for ci, n in enumerate(config.sample_sizes):
        X = _sorted_normal(config.stream, ci, config.replicates, n)
        x = hazen_scores(n).values
        m0, s0, _ = qq_regression_batch(X, x)
        L0 = m0 + Z975 * s0
        for c in fracs:
            k = int(round(c * n))
            m, s, _ = qq_regression_batch(X[:, k:], x[k:])
            L = m + Z975 * s
            em, es, el = censored_efficiencies(k, n)
            cell = dict(n=n, k=k, censored=k / n, f=1 - k / n)
            for name, full, cens, model in (("mean", m0, m, em), ("sd", s0, s, es),
                                            ("limit", L0, L, el)):
                eff, se = _var_ratio(full, cens)
                cell[f"{name}_efficiency"] = eff
                cell[f"{name}_efficiency_mcse"] = se
                cell[f"{name}_model"] = float(model)
                checks.append(_check(f"n{n}_f{cell['f']:.2f}_{name}", eff, float(model), 0.05, se,
                                     reference="fitted efficiency model"))
            cells.append(cell)
            c1.append(dict(n=n, f=cell["f"], limit_efficiency=cell["limit_efficiency"],
                           limit_efficiency_mcse=cell["limit_efficiency_mcse"]))
            checks.append(_check(f"n{n}_f{cell['f']:.2f}_limit_beats_sd",
                                 cell["limit_efficiency"] - cell["sd_efficiency"], 0.0, None,
                                 lo=0.0))
    c2, spread = [], {}
    for c in fracs:
        rows = [cell for cell in cells if abs(cell["censored"] - c) < 0.02]
        row = dict(censored=c, f=1 - c)
        for name in ("mean", "sd", "limit"):
            vals = [r[f"{name}_efficiency"] for r in rows]
            row[f"{name}_efficiency"] = float(np.mean(vals))
            row[f"{name}_model"] = float(np.mean([r[f"{name}_model"] for r in rows]))
        lim = [r["limit_efficiency"] for r in rows]
        spread[c] = float(max(lim) - min(lim))
        c2.append(row)
        if len(rows) > 1:
            mc = max(r["limit_efficiency_mcse"] for r in rows)
            checks.append(_check(f"flat_in_n_c{c:.2f}", spread[c], 0.0, None, mc,
                                 hi=max(0.05, 3 * math.sqrt(2) * mc)))
    summary = dict(limit_spread_across_n={str(k): v for k, v in spread.items()})
    reference = dict(models={"mean": "1 - 1.5 (k/n)^1.7", "sd": "(2.5 - 1.5 f)^-2",
                             "limit": "(1.38 - 0.37 f)^-2"})
    return _report(config, cells, summary, reference, checks, {"C1": c1, "C2": c2}, t0)


def run_winsor_study(config: StudyConfig) -> StudyReport:
    """Effective sample size lost by winsorizing the QQ regression."""
    t0 = time.perf_counter()
    ws = [int(w) for w in config.params["winsor"]]
    cells, checks, slopes = [], [], {}
    for ci, n in enumerate(config.sample_sizes):
        if any(n - 2 * w < 10 for w in ws):
            raise DomainError(f"n={n} too small for winsor depths {ws}")
        X = _sorted_normal(config.stream, ci, config.replicates, n)
        x = hazen_scores(n).values
        for w in [0] + ws:
            m, s, _ = qq_regression_batch(X[:, w:n - w], x[w:n - w])
            L = m + Z975 * s
            cell = dict(n=n, w=w)
            for name, est, scale in (("mean", m, 1.0), ("sd", s, 0.5),
                                     ("limit", L, LIMIT_SE_FACTOR ** 2)):
                dev = (est - est.mean()) ** 2
                var = float(dev.mean())
                neff = scale / var
                se = neff * _mcse_mean(dev) / var
                cell[f"{name}_n_eff"] = neff
                cell[f"{name}_loss"] = n - neff
                cell[f"{name}_loss_mcse"] = se
                if 1 <= w <= 5 and n in PUBLISHED_WINSOR_LOSS[name]:
                    cell[f"{name}_loss_published"] = PUBLISHED_WINSOR_LOSS[name][n][w - 1]
            cells.append(cell)
        for name in ("mean", "sd", "limit"):
            rows = [c for c in cells if c["n"] == n and c["w"] > 0]
            coef, se, _, _ = _linfit([c["w"] for c in rows], [c[f"{name}_loss"] for c in rows])
            slopes[(n, name)] = (float(coef[1]), float(se[1]))
    summary = {"loss_slope": {f"{n}_{name}": dict(slope=v[0], se=v[1])
                              for (n, name), v in slopes.items()}}
    for (n, name), (b, se) in slopes.items():
        target, tol = {"mean": (0.0, 1.5), "sd": (5.0, 1.5), "limit": (3.5, 1.5)}[name]
        checks.append(_check(f"n{n}_{name}_loss_slope", b, target, tol, se,
                             reference=f"n_eff model slope {target}"))
    fig = [{k: c.get(k) for k in ("n", "w", "mean_loss", "sd_loss", "limit_loss")} for c in cells]
    reference = {"published_winsor_loss": PUBLISHED_WINSOR_LOSS,
                 "models": {"mean": "n", "sd": "n - 5w", "limit": "n - 3.5w"}}
    return _report(config, cells, summary, reference, checks, {"D1": fig}, t0)


def _positive_normal(stream, cell, reps, n, mean, sd):
    """Normal draws with nonpositive values redrawn from a continuation substream."""
    out = np.empty((reps, n))
    for r in range(reps):
        g = stream.substream(cell, r).generator()
        v = mean + sd * g.standard_normal(n)
        while np.any(v <= 0):
            bad = v <= 0
            v[bad] = mean + sd * g.standard_normal(int(bad.sum()))
        out[r] = v
    return out


def run_boxcox_study(config: StudyConfig) -> StudyReport:
    """Max-QQr versus pseudolikelihood estimates of the Box-Cox power."""
    t0 = time.perf_counter()
    p = config.params
    lams = [float(l) for l in p["lambdas"]]
    if not all(-2.0 <= l <= 2.0 and abs(l * 4 - round(l * 4)) < 1e-9 for l in lams):
        raise DomainError("lambda grid must be a subset of -2, -1.75, ..., 2")
    n = config.sample_sizes[0]
    cells, checks, fig = [], [], []
    for ci, lam in enumerate(lams):
        base = _positive_normal(config.stream, ci, config.replicates, n, p["mean"], p["sd"])
        Y = np.exp(base) if lam == 0 else base ** (1.0 / lam)
        Y = np.sort(Y, axis=1)
        qq = boxcox_batch_fit(Y, p["lambda_range"], "max-qqr")[0]
        pl = boxcox_batch_fit(Y, p["lambda_range"], "pseudolikelihood")[0]
        sq, sp = _summ(qq, lam), _summ(pl, lam)
        eff, eff_se = _ratio((pl - lam) ** 2, (qq - lam) ** 2)
        corr = float(np.corrcoef(qq, pl)[0, 1])
        cell = dict(lam=lam, qq=sq, pl=sp, efficiency=100 * eff, efficiency_mcse=100 * eff_se,
                    correlation=corr, correlation_mcse=(1 - corr ** 2) / math.sqrt(len(qq)))
        cells.append(cell)
        for i in range(min(200, len(qq))):
            fig.append(dict(lam=lam, replicate=i, qq=float(qq[i]), pl=float(pl[i])))
        ref = PUBLISHED_BOXCOX.get(lam)
        if ref:
            checks.append(_check(f"lam{lam:+.2f}_efficiency", 100 * eff, ref[6], 4.0,
                                 100 * eff_se, reference="published Box-Cox study"))
        if lam != 0:
            diff = abs(sq["bias"]) - abs(sp["bias"])
            checks.append(_check(f"lam{lam:+.2f}_qq_bias_smaller", diff, 0.0, None,
                                 hi=3 * math.hypot(sq["mean_mcse"], sp["mean_mcse"])))
    mean_eff = float(np.mean([c["efficiency"] for c in cells]))
    mean_corr = float(np.mean([c["correlation"] for c in cells]))
    mean_eff_se = float(math.sqrt(sum(c["efficiency_mcse"] ** 2 for c in cells)) / len(cells))
    summary = dict(mean_efficiency=mean_eff, mean_efficiency_mcse=mean_eff_se,
                   mean_correlation=mean_corr)
    if len(cells) >= 5:
        checks.append(_check("mean_efficiency", mean_eff, 92.2, 4.0, mean_eff_se,
                             reference="average efficiency 92.2"))
    checks.append(_check("qq_pl_correlation", min(c["correlation"] for c in cells), 0.9957,
                         None, lo=0.98, reference="average QQ-PL correlation 0.9957"))
    reference = {"published_boxcox": {str(k): dict(zip(("bias_qq", "bias_pl", "sd_qq", "sd_pl", "rmse_qq",
                                                "rmse_pl", "efficiency"), v))
                              for k, v in PUBLISHED_BOXCOX.items()},
                 "mean_efficiency": 92.2, "correlation": 0.9957}
    return _report(config, cells, summary, reference, checks, {"E1": fig}, t0)


def _variant_r(X, variant, n, lambda_range=(-3.0, 3.0)):
    x = hazen_scores(n).values
    w = winsor_count(n)
    if variant == "full":
        return qq_regression_batch(X, x)[2]
    if variant == "winsorized":
        return qq_regression_batch(X[:, w:n - w], x[w:n - w])[2]
    if variant == "boxcox":
        return boxcox_batch_fit(np.exp(X), lambda_range)[2]
    if variant == "boxcox-winsorized":
        return boxcox_batch_fit(np.exp(X), lambda_range, w=w)[2]
    raise DomainError(f"unsupported calibration variant {variant!r}")


def run_calibration(config: StudyConfig) -> StudyReport:
    """Refit the mean/sd models of the transformed QQ correlation."""
    t0 = time.perf_counter()
    p = config.params
    variants = list(p["variants"])
    sizes = config.sample_sizes
    R = config.replicates
    stats = {v: [] for v in variants}
    f3 = []
    for ci, n in enumerate(sizes):
        X = _sorted_normal(config.stream, ci, R, n)
        for v in variants:
            Y = z_transform(_variant_r(X, v, n), clamp=True)
            stats[v].append((float(Y.mean()), _mcse_mean(Y), float(Y.std(ddof=1)), _mcse_sd(Y)))
            if n == 120:
                mu, sd = mean_sd_model(n, v)
                Z = np.sort((Y - mu) / sd)
                q = hazen_scores(len(Z)).values
                step = max(1, len(Z) // 500)
                f3 += [dict(variant=v, normal_score=float(q[i]), z=float(Z[i]))
                       for i in range(0, len(Z), step)]
    L = np.log(np.asarray(sizes, float) + 30.0)
    cells, checks, f1, f2 = [], [], [], []
    summary = {}
    for v in variants:
        arr = np.array(stats[v])
        mc, mse_, mr2, mres = _linfit(L, arr[:, 0])
        sc, sse, sr2, sres = _linfit(L, arr[:, 2])
        fit = dict(A=float(mc[0]), A_se=float(mse_[0]), B=float(mc[1]), B_se=float(mse_[1]),
                   mean_r2=mr2, mean_res_sd=mres,
                   D=float(sc[0]), D_se=float(sse[0]), E=float(sc[1]), E_se=float(sse[1]),
                   sd_r2=sr2, sd_res_sd=sres,
                   mean_mc_noise=float(np.mean(arr[:, 1])))
        summary[v] = fit
        for n, row, l in zip(sizes, arr, L):
            cells.append(dict(variant=v, n=n, ln_n30=float(l), mean_Y=row[0], mean_Y_mcse=row[1],
                              sd_Y=row[2], sd_Y_mcse=row[3]))
            ref = PUBLISHED_NULL_MODELS.get(v)
            f1.append(dict(variant=v, n=n, ln_n30=float(l), mean_Y=row[0],
                           published_model=(ref["A"] + ref["B"] * l) if ref else None))
            f2.append(dict(variant=v, n=n, ln_n30=float(l), sd_Y=row[2],
                           published_model=(ref["D"] + ref["E"] * l) if ref else None))
        ref = PUBLISHED_NULL_MODELS.get(v)
        if ref:
            checks.append(_check(f"{v}_B", fit["B"], ref["B"], 0.05, fit["B_se"],
                                 reference="published mean-model slope"))
            checks.append(_check(f"{v}_E", fit["E"], ref["E"], 0.02, fit["E_se"],
                                 reference="published sd-model slope"))
            checks.append(_check(f"{v}_mean_r2", fit["mean_r2"], ref["mean_r2"], None, lo=0.999,
                                 reference="published mean-model R squared"))
            # residual sd mixes model misfit with per-cell MC noise
            checks.append(_check(f"{v}_mean_res_sd", fit["mean_res_sd"], ref["mean_res_sd"], None,
                                 fit["mean_mc_noise"],
                                 hi=ref["mean_res_sd"] + max(0.01, 3 * fit["mean_mc_noise"]),
                                 reference="published mean-model residual sd"))
    figures = {"F1": f1, "F2": f2, "F3": f3}
    reference = {"published_null_models": PUBLISHED_NULL_MODELS}
    if p.get("censored"):
        cens = _calibrate_censored(config, [float(c) for c in p["censored_fractions"]])
        summary["censored"] = cens["summary"]
        cells += cens["cells"]
        checks += cens["checks"]
        reference["published_censored_models"] = PUBLISHED_CENSORED_MODELS
    return _report(config, cells, summary, reference, checks, figures, t0)


def _calibrate_censored(config, fracs):
    sizes, R = config.sample_sizes, config.replicates
    rows = {"censored-original": [], "censored-boxcox": []}
    for ci, n in enumerate(sizes):
        X = _sorted_normal(config.stream, 100 + ci, R, n)
        x = hazen_scores(n).values
        for f in fracs:
            k = int(round(f * n))
            r0 = qq_regression_batch(X[:, k:], x[k:])[2]
            r1 = boxcox_batch_fit(np.exp(X[:, k:]), k=k)[2]
            for v, r in (("censored-original", r0), ("censored-boxcox", r1)):
                Y = z_transform(r, clamp=True)
                rows[v].append((n, k / n, float(Y.mean()), float(Y.std(ddof=1)), _mcse_mean(Y)))
    summary, cells, checks = {}, [], []
    for v, data in rows.items():
        d = np.array(data)
        L = np.log(d[:, 0] + 30.0)
        X = np.column_stack([np.ones_like(L), L, d[:, 1], d[:, 1] * L])
        mc, mse_, mr2, mres = _ols(X, d[:, 2])
        sc, sse, sr2, sres = _ols(X, d[:, 3])
        summary[v] = dict(mean=mc.tolist(), mean_se=mse_.tolist(), mean_r2=mr2, mean_res_sd=mres,
                          sd=sc.tolist(), sd_se=sse.tolist(), sd_r2=sr2, sd_res_sd=sres)
        ref = PUBLISHED_CENSORED_MODELS[v]
        pm = X @ np.array(ref["mean"])
        cells += [dict(variant=v, n=int(a[0]), f=a[1], mean_Y=a[2], sd_Y=a[3], mean_Y_mcse=a[4],
                       published_mean_model=float(m)) for a, m in zip(data, pm)]
        dev = float(np.max(np.abs(pm - d[:, 2])))
        checks.append(_check(f"{v}_published_mean_model_fit", dev, 0.0, None,
                             hi=0.15 + 3 * float(np.max(d[:, 4])), reference="published censored models"))
    return dict(summary=summary, cells=cells, checks=checks)


def read_external_pvalues(path) -> dict[int, float]:
    """Read a two-column CSV ``replicate_id,p``; a header row is optional.

    ``replicate_id`` is ``shift_index * replicates + replicate``.
    """
    out = {}
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), 1):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise FormatError(f"{path}:{lineno}: expected 2 columns, got {len(row)}")
            a, b = (c.strip() for c in row)
            if lineno == 1 and a.lower() == "replicate_id":
                continue
            try:
                rid, pv = int(a), float(b)
            except ValueError:
                raise FormatError(f"{path}:{lineno}: cannot parse {row!r}") from None
            if not 0.0 <= pv <= 1.0:
                raise FormatError(f"{path}:{lineno}: p-value {pv} outside [0, 1]")
            out[rid] = pv
    return out


def run_power_study(config: StudyConfig) -> StudyReport:
    """Rejection rate of the QQr test on normal(mean, 1) data raised to powers.

    Negative draws keep their sign under the power so the transform stays
    monotone. All shifts reuse the same base draws.
    """
    t0 = time.perf_counter()
    p = config.params
    shifts = [float(s) for s in p["shifts"]]
    if not all(1.0 <= s <= 2.0 for s in shifts):
        raise DomainError("shift powers must lie in [1, 2]")
    n, R, alpha = config.sample_sizes[0], config.replicates, float(p["alpha"])
    base = p["mean"] + _normal_block(config.stream, 0, R, n)
    sw = read_external_pvalues(p["sw_pvalues"]) if p.get("sw_pvalues") else None
    cells, fig, checks = [], [], []
    for si, shift in enumerate(shifts):
        Xs = np.sort(np.sign(base) * np.abs(base) ** shift, axis=1)
        cell = dict(shift=shift, n=n)
        for v in p["variants"]:
            Y = z_transform(_variant_r(Xs, v, n), clamp=True)
            mu, sd = mean_sd_model(n, v)
            pv = std_normal_cdf(-(Y - mu) / sd)
            rate, se = _rate(pv < alpha)
            cell[f"{v}_rejection"] = rate
            cell[f"{v}_rejection_mcse"] = se
        if sw is not None:
            got = [sw[si * R + r] for r in range(R) if si * R + r in sw]
            if got:
                rate, se = _rate(np.asarray(got) < alpha)
                cell.update(sw_rejection=rate, sw_rejection_mcse=se, sw_count=len(got))
        cells.append(cell)
        fig.append({k: v for k, v in cell.items() if not k.endswith("mcse")})
    for v in p["variants"]:
        rates = [c[f"{v}_rejection"] for c in cells]
        if shifts and shifts[0] == 1.0:
            checks.append(_check(f"{v}_size_at_shift_1", rates[0], alpha, None,
                                 cells[0][f"{v}_rejection_mcse"], lo=0.035, hi=0.065))
        drops = [b - a for a, b in zip(rates, rates[1:])]
        checks.append(_check(f"{v}_nondecreasing", min(drops) if drops else 0.0, 0.0, None, lo=0.0))
    return _report(config, cells, {}, {}, checks, {"G1": fig}, t0)


def run_t_recovery(config: StudyConfig) -> StudyReport:
    """Recover location, scale and degrees of freedom from t-distributed samples."""
    from .kernel import student_t_inv_cdf

    t0 = time.perf_counter()
    p = config.params
    n, R = config.sample_sizes[0], config.replicates
    mu, sigma, nu = float(p["mu"]), float(p["sigma"]), float(p["nu"])
    rows = np.empty((R, n))
    for r in range(R):
        rows[r] = config.stream.substream(0, r).generator().standard_t(nu, n)
    X = np.sort(mu + sigma * rows, axis=1)
    nu_hat, qqr, m, s = fit_t_nu_batch(X, tuple(p["nu_range"]))
    q = student_t_inv_cdf(0.975, nu_hat)
    upper = m + s * q
    truth = mu + sigma * student_t_inv_cdf(0.975, nu)
    m0, s0, _ = qq_regression_batch(X, hazen_scores(n).values)
    normal_upper = m0 + Z975 * s0
    under, under_se = _rate(normal_upper < truth)
    summary = dict(true_upper=truth, median_nu=float(np.median(nu_hat)),
                   mu=_summ(m, mu), sigma=_summ(s, sigma), upper=_summ(upper, truth),
                   normal_upper=_summ(normal_upper, truth),
                   normal_underestimates=under, normal_underestimates_mcse=under_se,
                   mean_qqr=float(qqr.mean()))
    checks = [
        _check("median_nu", summary["median_nu"], nu, None, lo=3.0, hi=9.0),
        _check("mean_mu", summary["mu"]["mean"], mu, 0.2, summary["mu"]["mean_mcse"]),
        _check("mean_upper", summary["upper"]["mean"], truth, 0.8, summary["upper"]["mean_mcse"]),
        _check("normal_underestimates", under, 0.8, None, lo=0.8),
    ]
    cells = [dict(replicate=i, nu_hat=float(nu_hat[i]), qqr=float(qqr[i]), mu_hat=float(m[i]),
                  sigma_hat=float(s[i]), upper=float(upper[i]),
                  normal_upper=float(normal_upper[i])) for i in range(R)]
    return _report(config, cells, summary, {"true_upper": truth}, checks, {"H1": cells}, t0)


_RUNNERS = {
    "A-profile": run_score_profile,
    "B-efficiency": run_slope_efficiency,
    "C-censoring": run_censoring_study,
    "D-winsor": run_winsor_study,
    "E-boxcox": run_boxcox_study,
    "F-calibrate": run_calibration,
    "G-power": run_power_study,
    "H-tfit": run_t_recovery,
}


def run_study(config: StudyConfig) -> StudyReport:
    return _RUNNERS[config.study_id](config)
