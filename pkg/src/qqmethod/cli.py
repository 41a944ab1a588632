"""Command-line interface.

Subcommands: scores, fit, test, boxcox, tfit, simulate. Results go out as a
JSON envelope (``--json`` to stdout, or ``-o FILE``) with a plain-text table
on stdout otherwise.

Exit codes: 0 success, 2 usage, 3 data or domain error, 4 a ``--strict``
simulation missed a published value.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
import warnings
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .errors import FormatError, QQError
from .normtest import VARIANTS, test_normality
from .qqfit import Sample, fit_censored, fit_full, fit_winsorized, reference_interval
from .scores import PlottingPosition, normal_scores, t_scores
from .shapefit import fit_boxcox_pl, fit_boxcox_qqr, fit_t_nu
from .simharness import STUDIES, StudyConfig, run_study

EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_STRICT = 4


def parse_sample(text: str, *, column: str | None = None, censor_below: float | None = None,
                 source: str = "<input>") -> Sample:
    """Parse plain (one value per line) or CSV text into a :class:`Sample`.

    Entries written ``<L`` are left-censored below ``L``. Blank lines and
    lines starting with ``#`` are skipped in plain input.
    """
    entries = []  # (lineno, raw)
    if column is None:
        for lineno, line in enumerate(text.splitlines(), 1):
            tok = line.strip()
            if tok and not tok.startswith("#"):
                entries.append((lineno, tok))
    else:
        reader = csv.DictReader(io.StringIO(text))
        if reader.fieldnames is None or column not in reader.fieldnames:
            raise FormatError(f"{source}: no column named {column!r}")
        for lineno, row in enumerate(reader, 2):
            tok = (row.get(column) or "").strip()
            if tok:
                entries.append((lineno, tok))

    observed, limits = [], []
    for lineno, tok in entries:
        censored = tok.startswith("<")
        try:
            v = float(tok[1:] if censored else tok)
        except ValueError:
            raise FormatError(f"{source}:{lineno}: cannot parse {tok!r} as a number") from None
        if not math.isfinite(v):
            raise FormatError(f"{source}:{lineno}: non-finite value {tok!r}")
        if censored:
            limits.append(v)
        elif censor_below is not None and v < censor_below:
            limits.append(censor_below)
        else:
            observed.append(v)
    if not entries:
        raise FormatError(f"{source}: no data values found")
    n = len(observed) + len(limits)
    if not limits:
        return Sample(np.array(observed), n)
    dl = max(limits)
    if observed and min(observed) < dl:
        raise FormatError(f"{source}: an observed value lies below the censoring limit {dl}; "
                          "only a single lower detection limit is supported")
    return Sample(np.array(observed), n, len(limits), dl)


def _finite_or_null(obj, path="", nulls=None):
    if isinstance(obj, dict):
        return {k: _finite_or_null(v, f"{path}.{k}" if path else str(k), nulls)
                for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite_or_null(v, f"{path}[{i}]", nulls) for i, v in enumerate(obj)]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isfinite(v):
            return v
        nulls[path] = "nan" if math.isnan(v) else "infinite"
        return None
    return obj


def envelope(command: str, argv: list[str], payload: dict, digest: str | None,
             warn: list[str]) -> dict:
    nulls: dict[str, str] = {}
    result = _finite_or_null(payload, "", nulls)
    return {
        "tool": "qqmethod",
        "version": __version__,
        "command": command,
        "argv": list(argv),
        "input_digest": digest,
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "result": result,
        "nulls": nulls,
        "warnings": [str(getattr(w, "message", w)) for w in warn],
    }


def _read_input(path: str) -> tuple[str, str]:
    data = sys.stdin.buffer.read() if path == "-" else Path(path).read_bytes()
    return data.decode("utf-8-sig"), "sha256:" + hashlib.sha256(data).hexdigest()


def _table(rows: list[tuple[str, object]]) -> str:
    width = max(len(k) for k, _ in rows)
    out = []
    for k, v in rows:
        if isinstance(v, float):
            v = f"{v:.6g}"
        out.append(f"{k:<{width}}  {v}")
    return "\n".join(out)


def _emit(args, env: dict, rows: list[tuple[str, object]]):
    text = json.dumps(env, indent=2, sort_keys=True, allow_nan=False)
    if args.output:
        Path(args.output).write_text(text + "\n")
    if args.json:
        print(text)
    else:
        print(_table(rows))


def _write_trace(path, trace):
    best = -math.inf
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["param", "objective", "best_so_far"])
        for p, v in trace:
            if v == v:
                best = max(best, v)
            w.writerow([repr(p), repr(v), repr(best)])


def _load(args):
    text, digest = _read_input(args.input)
    src = "<stdin>" if args.input == "-" else args.input
    sample = parse_sample(text, column=args.column, censor_below=args.censor_below, source=src)
    return sample, digest


def cmd_scores(args, argv, warn):
    if args.nu is not None:
        sv = t_scores(args.n, args.nu)
    else:
        pos = PlottingPosition(args.alpha, args.beta if args.beta is not None else args.alpha)
        sv = normal_scores(args.n, pos, allow_asymmetric=args.allow_asymmetric)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["i", "score"])
    for i, v in enumerate(sv.values, 1):
        w.writerow([i, repr(float(v))])
    return 0


def cmd_fit(args, argv, warn):
    sample, digest = _load(args)
    if args.winsor:
        if sample.k_censored:
            raise QQError("--winsor cannot be applied to censored data")
        fit = fit_winsorized(sample, args.winsor)
    elif sample.k_censored:
        fit = fit_censored(sample)
    else:
        fit = fit_full(sample)
    ri = reference_interval(fit, args.coverage, z_rounded=args.z_rounded)
    payload = {"fit": fit.to_dict(), "interval": ri.to_dict(),
               "n": fit.n_total, "k": fit.k_censored, "w": fit.w_winsorized,
               "censored_fraction": fit.k_censored / fit.n_total,
               "detection_limit": sample.detection_limit}
    env = envelope("fit", argv, payload, digest, warn)
    _emit(args, env, [
        ("n", fit.n_total), ("censored", fit.k_censored), ("winsorized/side", fit.w_winsorized),
        ("mean (intercept)", fit.intercept), ("sd (slope)", fit.slope), ("QQ r", fit.r),
        ("n_eff mean/sd/limit", f"{fit.n_eff_mean:.1f} / {fit.n_eff_sd:.1f} / {fit.n_eff_limit:.1f}"),
        ("se mean", fit.se_mean), ("se sd", fit.se_sd),
        (f"{100 * ri.coverage:g}% interval", f"[{ri.lower:.6g}, {ri.upper:.6g}]"),
        ("se upper limit", ri.se_upper),
    ])
    return 0


def cmd_test(args, argv, warn):
    sample, digest = _load(args)
    res = test_normality(sample, args.variant, args.alpha)
    env = envelope("test", argv, res.to_dict(), digest, warn)
    _emit(args, env, [
        ("variant", res.variant), ("n", res.n), ("censored fraction", res.f),
        ("QQ r", res.r), ("Y", res.Y), ("Z", res.Z), ("p", res.p),
        ("decision", f"{'reject' if res.reject else 'do not reject'} normality at {res.alpha:g}"),
    ] + ([("Box-Cox lambda", res.lambda_hat)] if res.lambda_hat is not None else []))
    return 0


def cmd_boxcox(args, argv, warn):
    sample, digest = _load(args)
    rng = tuple(args.range) if args.range else (-3.0, 3.0)
    if args.method == "pl":
        fit = fit_boxcox_pl(sample, rng)
    else:
        fit = fit_boxcox_qqr(sample, rng)
    if args.trace_csv:
        _write_trace(args.trace_csv, fit.search_trace)
    env = envelope("boxcox", argv, fit.to_dict(), digest, warn)
    f = fit.fit_at_opt
    _emit(args, env, [
        ("method", fit.method), ("lambda", fit.lambda_hat), ("QQ r at optimum", fit.qqr_at_opt),
        ("intercept (transformed)", f.intercept), ("slope (transformed)", f.slope),
        ("evaluations", len(fit.search_trace)),
    ])
    return 0


def cmd_tfit(args, argv, warn):
    sample, digest = _load(args)
    rng = tuple(args.range) if args.range else (1.0, 200.0)
    fit = fit_t_nu(sample, rng, integer_only=args.integer_nu, coverage=args.coverage)
    if args.trace_csv:
        _write_trace(args.trace_csv, fit.search_trace)
    env = envelope("tfit", argv, fit.to_dict(), digest, warn)
    _emit(args, env, [
        ("nu", fit.nu_hat), ("QQ r at optimum", fit.qqr_at_opt), ("mu (intercept)", fit.mu_hat),
        ("sigma (slope)", fit.sigma_hat),
        (f"{100 * fit.coverage:g}% limits", f"[{fit.lower_limit:.6g}, {fit.upper_limit:.6g}]"),
    ])
    return 0


def cmd_simulate(args, argv, warn):
    cfg = {}
    if args.config:
        try:
            cfg = json.loads(Path(args.config).read_text())
        except json.JSONDecodeError as exc:
            raise FormatError(f"{args.config}: invalid JSON ({exc})") from None
        if cfg.get("study_id", args.study) != args.study:
            raise QQError("config study_id does not match the requested study")
        cfg.pop("study_id", None)
    for key, val in (("replicates", args.replicates), ("seed", args.seed),
                     ("sample_sizes", args.sizes)):
        if val is not None:
            cfg[key] = val
    if args.full_scale:
        cfg["full_scale"] = True
    if args.sw_pvalues:
        cfg.setdefault("params", {})["sw_pvalues"] = args.sw_pvalues
    config = StudyConfig.from_dict({"study_id": args.study, **cfg})
    report = run_study(config)
    out = Path(args.out or f"sim_{args.study}")
    paths = report.write(out)
    if args.json:
        print(report.to_json())
    else:
        print(f"study {report.study_id}: {config.replicates} replicates, "
              f"{report.runtime_s:.1f}s, seed {config.seed}")
        for c in report.checks:
            flag = "PASS" if c["passed"] else "FAIL"
            print(f"  {flag}  {c['name']}: {c['value']!r} in [{c['lo']}, {c['hi']}]")
        for p in paths:
            print(f"wrote {p}")
    if args.strict and not report.passed:
        return EXIT_STRICT
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="qqmethod", description="QQ regression fits, normality tests and simulation studies.")
    ap.add_argument("--version", action="version", version=f"qqmethod {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def out_flags(p):
        p.add_argument("--json", action="store_true", help="print the JSON envelope to stdout")
        p.add_argument("-o", "--output", help="also write the JSON envelope to this file")

    def input_flags(p, censor=True):
        p.add_argument("input", help="data file, or - for stdin")
        p.add_argument("--column", help="read this named column of a CSV file")
        if censor:
            p.add_argument("--censor-below", type=float, metavar="L",
                           help="treat values below L as left-censored")
        else:
            p.set_defaults(censor_below=None)

    p = sub.add_parser("scores", help="print plotting-position scores as CSV")
    p.add_argument("n", type=int)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--beta", type=float)
    p.add_argument("--allow-asymmetric", action="store_true")
    p.add_argument("--t", dest="nu", type=float, metavar="NU", help="Student-t scores")
    p.set_defaults(func=cmd_scores)

    p = sub.add_parser("fit", help="QQ fit and reference interval")
    input_flags(p)
    p.add_argument("--winsor", type=int, default=0, metavar="W")
    p.add_argument("--coverage", type=float, default=0.95)
    p.add_argument("--z-rounded", action="store_true", help="use z = 1.96 for 95%% coverage")
    out_flags(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("test", help="QQ-correlation normality test")
    input_flags(p)
    p.add_argument("--variant", choices=VARIANTS, default="full")
    p.add_argument("--alpha", type=float, default=0.05)
    out_flags(p)
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("boxcox", help="fit a Box-Cox power")
    input_flags(p, censor=False)
    p.add_argument("--method", choices=("qqr", "pl"), default="qqr")
    p.add_argument("--range", type=float, nargs=2, metavar=("LO", "HI"))
    p.add_argument("--trace-csv", metavar="PATH")
    out_flags(p)
    p.set_defaults(func=cmd_boxcox)

    p = sub.add_parser("tfit", help="fit a Student-t location/scale/df model")
    input_flags(p, censor=False)
    p.add_argument("--range", type=float, nargs=2, metavar=("LO", "HI"))
    p.add_argument("--integer-nu", action="store_true")
    p.add_argument("--coverage", type=float, default=0.95)
    p.add_argument("--trace-csv", metavar="PATH")
    out_flags(p)
    p.set_defaults(func=cmd_tfit)

    p = sub.add_parser("simulate", help="run a Monte Carlo study")
    p.add_argument("study", choices=STUDIES)
    p.add_argument("--config", help="JSON StudyConfig file")
    p.add_argument("--replicates", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--sizes", type=int, nargs="+")
    p.add_argument("--full-scale", action="store_true")
    p.add_argument("--sw-pvalues", help="CSV of external Shapiro-Wilk p-values (G-power)")
    p.add_argument("--out", help="output directory (default sim_<study>)")
    p.add_argument("--strict", action="store_true", help="exit 4 when a published-value check fails")
    p.add_argument("--json", action="store_true", help="print the report JSON to stdout")
    p.set_defaults(func=cmd_simulate)
    return ap


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "winsor", 0) and getattr(args, "censor_below", None) is not None:
        parser.error("--winsor and --censor-below are mutually exclusive")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            code = args.func(args, argv, caught)
        except QQError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_DATA
        except OSError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_DATA
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    return code


def load_schema(name: str) -> dict:
    """Return a shipped JSON schema: envelope, fit, test, boxcox, tfit or study_report."""
    from importlib import resources

    return json.loads(resources.files("qqmethod").joinpath(f"schemas/{name}.schema.json").read_text())


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
