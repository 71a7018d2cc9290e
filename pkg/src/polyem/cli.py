"""Command-line interface, config parsing, and CSV emission.

Subcommands: run, rates, lowerbound, check-modulus, check-paths.  Runs are
configured by a line-oriented key=value file plus flag overrides; every
errors.csv is accompanied by a JSON manifest so a result file is
reproducible on its own.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__, backend
from .harness import (
    RNG_SCHEME,
    ErrorRow,
    ErrorTable,
    ExperimentConfig,
    RateReport,
    build_rate_report,
    lower_bound_check,
    moment_identity_check,
    run_experiment,
)
from .modulus import (
    ModulusSpec,
    check_dini_integral,
    check_slow_variation,
    g_series,
    level_weights,
    psi,
    rho,
    sawtooth,
    time_factor,
)
from .paths import aggregate, partial_sums, sample_fine_increments

_CONFIG_KEYS = ("example", "n_list", "n_ref", "samples", "p_list", "seed",
                "beta", "K", "workers", "ls_window")


@dataclass(frozen=True)
class RunManifest:
    config: dict
    quad_tol: float
    rng_scheme: str
    version: str
    backend: str
    duration_s: float


def _parse_int_list(text: str) -> tuple:
    return tuple(int(v) for v in text.split(",") if v.strip())


def parse_config(path: str | None = None, overrides: dict | None = None) -> ExperimentConfig:
    """Key=value config file plus override mapping; overrides win."""
    values: dict = {}
    if path is not None:
        with open(path) as fh:
            for lineno, raw in enumerate(fh, 1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ValueError(f"{path}:{lineno}: expected key=value, got {raw!r}")
                key, val = (s.strip() for s in line.split("=", 1))
                if key not in _CONFIG_KEYS:
                    raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
                values[key] = val
    if overrides:
        for key, val in overrides.items():
            if val is not None:
                values[key] = val

    def take(key, conv, default):
        if key not in values:
            return default
        v = values[key]
        return conv(v) if isinstance(v, str) else v

    try:
        return ExperimentConfig(
            problem=take("example", str, "A"),
            n_list=take("n_list", _parse_int_list, (64, 128, 256, 512, 1024, 2048, 4096, 8192)),
            n_ref=take("n_ref", int, 2 ** 18),
            samples=take("samples", int, 5000),
            p_list=take("p_list", _parse_int_list, (2, 4)),
            master_seed=take("seed", int, 20240801),
            beta=take("beta", float, 3.0),
            K=take("K", int, 800),
            workers=take("workers", int, int(os.environ.get("POLYEM_WORKERS", "1"))),
            ls_window=take("ls_window", int, None),
        )
    except ValueError as exc:
        raise ValueError(f"invalid configuration: {exc}") from exc


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def emit_csv(table: ErrorTable, path: str) -> None:
    """errors.csv: one row per (n, p) with endpoint/supremum errors and
    jackknife standard errors; manifest written as a JSON sibling."""
    with open(path, "w") as fh:
        fh.write("n,p,err_end,se_end,err_sup,se_sup\n")
        for r in table.rows:
            fh.write(f"{r.n},{_fmt(r.p)},{_fmt(r.err_end)},{_fmt(r.se_end)},"
                     f"{_fmt(r.err_sup)},{_fmt(r.se_sup)}\n")


def write_manifest(manifest: RunManifest, csv_path: str) -> str:
    out = csv_path + ".manifest.json"
    with open(out, "w") as fh:
        json.dump(manifest.__dict__, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return out


def read_errors_csv(path: str) -> ErrorTable:
    rows = []
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "n,p,err_end,se_end,err_sup,se_sup":
            raise ValueError(f"{path}: unrecognized errors.csv header {header!r}")
        for raw in fh:
            if not raw.strip():
                continue
            n, p, ee, se, es, ss = raw.strip().split(",")
            rows.append(ErrorRow(n=int(n), p=float(p), err_end=float(ee),
                                 se_end=float(se), err_sup=float(es), se_sup=float(ss)))
    meta = {}
    man = path + ".manifest.json"
    if os.path.exists(man):
        with open(man) as fh:
            meta = json.load(fh)
    return ErrorTable(rows=rows, metadata=meta)


def emit_rates_csv(report: RateReport, path: str) -> None:
    """rates.csv: local rates per (n, p) plus trailing LS-slope rows."""
    with open(path, "w") as fh:
        fh.write("n,p,rate_end,rate_sup\n")
        for r in report.rows:
            re = "" if r.rate_end is None else _fmt(r.rate_end)
            rs = "" if r.rate_sup is None else _fmt(r.rate_sup)
            fh.write(f"{r.n},{_fmt(r.p)},{re},{rs}\n")
        for p in sorted({r.p for r in report.rows}):
            if (p, "end") in report.ls:
                fh.write(f"ls_slope_end,{_fmt(p)},{_fmt(report.ls[(p, 'end')])},\n")
            if (p, "sup") in report.ls:
                fh.write(f"ls_slope_sup,{_fmt(p)},,{_fmt(report.ls[(p, 'sup')])}\n")


def read_rates_csv(path: str) -> RateReport:
    from .harness import RateRow

    rows, ls = [], {}
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "n,p,rate_end,rate_sup":
            raise ValueError(f"{path}: unrecognized rates.csv header {header!r}")
        for raw in fh:
            if not raw.strip():
                continue
            n, p, re, rs = raw.strip().split(",")
            if n == "ls_slope_end":
                ls[(float(p), "end")] = float(re)
            elif n == "ls_slope_sup":
                ls[(float(p), "sup")] = float(rs)
            else:
                rows.append(RateRow(n=int(n), p=float(p),
                                    rate_end=float(re) if re else None,
                                    rate_sup=float(rs) if rs else None))
    return RateReport(rows=rows, ls=ls)


def emit_loglog_data(table: ErrorTable, path: str) -> None:
    """Log-log plot data: per-series blocks of 'log2_n log2_err' rows, plus a
    slope -1/2 reference line anchored at the coarsest level (when >= 2 levels)."""
    levels = table.levels()
    with open(path, "w") as fh:
        for p in table.orders():
            for metric in ("end", "sup"):
                fh.write(f"# series p={_fmt(p)} {metric}\n")
                for n in levels:
                    e = getattr(table.row(n, p), f"err_{metric}")
                    if e > 0:
                        fh.write(f"{_fmt(np.log2(n))} {_fmt(np.log2(e))}\n")
        if len(levels) >= 2:
            p0 = table.orders()[0]
            anchor = table.row(levels[0], p0).err_end
            if anchor > 0:
                fh.write("# reference slope -1/2\n")
                for n in levels:
                    y = np.log2(anchor) - 0.5 * (np.log2(n) - np.log2(levels[0]))
                    fh.write(f"{_fmt(np.log2(n))} {_fmt(y)}\n")


# ---------------------------------------------------------------------------
# subcommands

def _config_from_args(args) -> ExperimentConfig:
    overrides = {
        "example": args.example,
        "n_list": args.n_list,
        "n_ref": args.n_ref,
        "samples": args.samples,
        "p_list": args.p_list,
        "seed": args.seed,
        "beta": args.beta,
        "K": args.K,
        "workers": args.workers,
        "ls_window": args.ls_window,
    }
    return parse_config(args.config, overrides)


def _cmd_run(args) -> int:
    config = _config_from_args(args)
    t0 = time.monotonic()
    table = run_experiment(config)
    duration = time.monotonic() - t0
    emit_csv(table, args.out)
    write_manifest(RunManifest(
        config={**config.__dict__, "n_list": list(config.n_list),
                "p_list": list(config.p_list)},
        quad_tol=config.quad_tol, rng_scheme=RNG_SCHEME,
        version=__version__, backend=backend.active_backend(),
        duration_s=round(duration, 3),
    ), args.out)
    if args.loglog:
        emit_loglog_data(table, args.loglog)
    print(f"wrote {args.out} ({len(table.rows)} rows, {duration:.1f}s)")
    return 0


def _cmd_rates(args) -> int:
    table = read_errors_csv(args.errors)
    report = build_rate_report(table, args.ls_window)
    emit_rates_csv(report, args.out)
    print(f"wrote {args.out} ({len(report.rows)} rate rows)")
    return 0


def _cmd_lowerbound(args) -> int:
    config = _config_from_args(args)
    report = lower_bound_check(config)
    if report["degenerate"]:
        print(report["note"])
        return 0
    slope, ratio = report["slope"], report["scaled_ratio"]
    lo, hi = args.slope_band
    ok = lo <= slope <= hi and ratio <= args.ratio_max
    print(f"lowerbound: LS slope {slope:.4f} (band [{lo}, {hi}]), "
          f"scaled-error spread {ratio:.4f} (max {args.ratio_max}) -> "
          f"{'pass' if ok else 'FAIL'}")
    if not ok:
        print("lowerbound check failed", file=sys.stderr)
        return 1
    return 0


def _cmd_check_modulus(args) -> int:
    spec = ModulusSpec(beta=args.beta, K=args.K)
    failures = []

    def check(name, cond):
        print(f"  {name}: {'ok' if cond else 'FAIL'}")
        if not cond:
            failures.append(name)

    check("rho(1) == 1", abs(rho(1.0, spec) - 1.0) < 1e-15)
    check("sawtooth fixed points", sawtooth(0.0) == 0.0 and sawtooth(0.25) == 0.25
          and sawtooth(0.75) == 0.25)
    rng = np.random.default_rng(7)
    v = rng.uniform(-50, 50, 10_000)
    check("sawtooth periodicity", np.allclose(sawtooth(v), sawtooth(v + 1.0), atol=1e-9))
    u = rng.uniform(-50, 50, 10_000)
    check("sawtooth 1-Lipschitz", np.all(np.abs(sawtooth(u) - sawtooth(v)) <= np.abs(u - v) + 1e-15))
    x = rng.uniform(-5, 5, 10_000)
    g = g_series(x, spec)
    check("g bounded by rho(1/2)/2", np.all(g >= 0) and np.all(g <= rho(0.5, spec) / 2 + 1e-15))
    check("psi odd and bounded", psi(0.0) == 0.0 and abs(psi(1.0) - 0.5) < 1e-15
          and np.all(np.abs(psi(x)) < 1.0))
    sv = check_slow_variation(spec, [2.0, 10.0], [1e-3, 1e-6, 1e-9])
    sv_ok = all(
        all(abs(a - 1.0) > abs(b - 1.0) for a, b in zip(ratios, ratios[1:]))
        for ratios in sv["ratios"].values()
    )
    check("slow variation (deviations shrink toward 0)", sv_ok)
    dini = check_dini_integral(spec, 0.5, [1e-4, 1e-8, 1e-12])
    check("Dini integral stabilizes",
          abs(dini["partials"][-1] - dini["closed_form"][-1]) < 1e-8
          and dini["successive_diffs"][-1] < dini["successive_diffs"][0])
    check("time_factor(1) == 1", abs(time_factor(1.0) - 1.0) < 1e-15)
    if failures:
        print(f"check-modulus: {len(failures)} failure(s)", file=sys.stderr)
        return 1
    print("check-modulus: all checks passed")
    return 0


def _cmd_check_paths(args) -> int:
    failures = []

    def check(name, cond):
        print(f"  {name}: {'ok' if cond else 'FAIL'}")
        if not cond:
            failures.append(name)

    for n in (1, 64, 8192):
        rep = moment_identity_check(n, args.draws, master_seed=args.seed)
        check(f"moment identity n={n}", rep["passed"])
    b1 = sample_fine_increments(args.seed, 0, 1024, 2)
    b2 = sample_fine_increments(args.seed, 0, 1024, 2)
    check("reproducibility", np.array_equal(b1.fine_increments, b2.fine_increments))
    coarse = aggregate(b1, 64)
    check("aggregation total",
          abs(coarse.sum() - b1.fine_increments.sum()) < 1e-12)
    W = partial_sums(b1)
    check("partial sums endpoints", W[0, 0] == 0.0
          and abs(W[0, -1] - b1.fine_increments[0].sum()) < 1e-12)
    if failures:
        print(f"check-paths: {len(failures)} failure(s)", file=sys.stderr)
        return 1
    print("check-paths: all checks passed")
    return 0


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--example", help="problem name: A, B, lower")
    p.add_argument("--n-list", dest="n_list", help="comma-separated dyadic grid sizes")
    p.add_argument("--n-ref", dest="n_ref", type=int, help="reference grid size (power of two)")
    p.add_argument("--samples", type=int, help="Monte Carlo sample count")
    p.add_argument("--p-list", dest="p_list", help="comma-separated moment orders")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--beta", type=float, help="modulus exponent")
    p.add_argument("--K", type=int, help="series truncation level")
    p.add_argument("--workers", type=int, help="worker process count")
    p.add_argument("--ls-window", dest="ls_window", type=int,
                   help="restrict LS slope to the finest this many levels")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="polyem",
                                     description="Strong-convergence experiments for the "
                                                 "polygonal Euler-Maruyama scheme")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a coupled strong-error experiment")
    _add_config_flags(p_run)
    p_run.add_argument("--out", default="errors.csv")
    p_run.add_argument("--loglog", help="also write log-log plot data to this path")
    p_run.set_defaults(func=_cmd_run)

    p_rates = sub.add_parser("rates", help="compute two-level rates and LS slopes from errors.csv")
    p_rates.add_argument("--errors", required=True)
    p_rates.add_argument("--out", default="rates.csv")
    p_rates.add_argument("--ls-window", dest="ls_window", type=int)
    p_rates.set_defaults(func=_cmd_rates)

    p_lb = sub.add_parser("lowerbound", help="order-1/2 optimality check (classical EM)")
    _add_config_flags(p_lb)
    p_lb.add_argument("--slope-band", nargs=2, type=float, default=(0.42, 0.60),
                      metavar=("LO", "HI"))
    p_lb.add_argument("--ratio-max", type=float, default=2.0)
    p_lb.set_defaults(func=_cmd_lowerbound)

    p_cm = sub.add_parser("check-modulus", help="numeric property suite for the modulus blocks")
    p_cm.add_argument("--beta", type=float, default=3.0)
    p_cm.add_argument("--K", type=int, default=800)
    p_cm.set_defaults(func=_cmd_check_modulus)

    p_cp = sub.add_parser("check-paths", help="moment identity and path invariants")
    p_cp.add_argument("--draws", type=int, default=1_000_000)
    p_cp.add_argument("--seed", type=int, default=20240801)
    p_cp.set_defaults(func=_cmd_check_paths)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
