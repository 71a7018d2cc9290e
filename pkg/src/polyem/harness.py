"""Coupled-path Monte Carlo experiments and rate estimation.

Every sample drives all discretization levels and the fine reference solve
with the same Wiener increments; strong L^p errors at the endpoint and as
a fine-grid supremum are reduced in sample-index order so results are
byte-identical for any worker count.
"""

from __future__ import annotations

import multiprocessing
import os
from dataclasses import dataclass, field

import numpy as np

from . import backend
from .models import SdeProblem, lower_bound_problem, problem_by_name
from .modulus import ModulusSpec
from .paths import aggregate, derive_stream, sample_fine_increments, standard_normals
from .quadrature import WeightTable, build_weight_table
from .scheme import SchemeError, extend_to_fine, solve_on_grid

__all__ = [
    "ExperimentConfig",
    "ErrorRow",
    "ErrorTable",
    "RateRow",
    "RateReport",
    "run_experiment",
    "two_level_rates",
    "ls_slope",
    "build_rate_report",
    "lower_bound_check",
    "moment_identity_check",
]

RNG_SCHEME = "philox128/splitmix64-avalanche/inverse-cdf-normals/v1"


def _is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class ExperimentConfig:
    problem: str = "A"
    n_list: tuple = (64, 128, 256, 512, 1024, 2048, 4096, 8192)
    n_ref: int = 2 ** 18
    samples: int = 5000
    p_list: tuple = (2, 4)
    master_seed: int = 20240801
    beta: float = 3.0
    K: int = 800
    workers: int = 1
    ls_window: int | None = None   # None = all levels, int = finest w levels
    scheme: str = "polygonal"
    quad_tol: float = 1e-12

    def __post_init__(self):
        if not _is_pow2(self.n_ref):
            raise ValueError("n_ref must be a power of two")
        if list(self.n_list) != sorted(set(self.n_list)):
            raise ValueError("n_list must be strictly increasing")
        for n in self.n_list:
            if not _is_pow2(n) or self.n_ref % n != 0:
                raise ValueError("grid sizes must be powers of two dividing n_ref")
        if self.samples < 1:
            raise ValueError("samples must be >= 1")
        if any(p < 1 for p in self.p_list):
            raise ValueError("moment orders must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    def modulus_spec(self) -> ModulusSpec:
        return ModulusSpec(beta=self.beta, K=self.K)


@dataclass(frozen=True)
class ErrorRow:
    n: int
    p: float
    err_end: float
    se_end: float
    err_sup: float
    se_sup: float


@dataclass(frozen=True)
class ErrorTable:
    rows: list
    metadata: dict = field(default_factory=dict)

    def row(self, n: int, p: float) -> ErrorRow:
        for r in self.rows:
            if r.n == n and r.p == p:
                return r
        raise KeyError((n, p))

    def levels(self) -> list:
        return sorted({r.n for r in self.rows})

    def orders(self) -> list:
        return sorted({r.p for r in self.rows})


@dataclass(frozen=True)
class RateRow:
    n: int          # finer level of the pair (n/2, n)
    p: float
    rate_end: float | None
    rate_sup: float | None


@dataclass(frozen=True)
class RateReport:
    rows: list
    ls: dict = field(default_factory=dict)   # (p, "end"|"sup") -> slope
    ls_window: int | None = None


# Worker state inherited through fork; set in the parent right before the pool
# is spawned so coefficient closures need not be pickled.
_WORK: dict = {}


def _build_tables(config: ExperimentConfig, needs_weights: bool) -> dict:
    if not needs_weights:
        return {}
    sizes = sorted(set(config.n_list) | {config.n_ref})
    return {n: build_weight_table(n, config.quad_tol) for n in sizes}


def _sample_errors(i: int) -> np.ndarray:
    problem: SdeProblem = _WORK["problem"]
    config: ExperimentConfig = _WORK["config"]
    tables: dict = _WORK["tables"]
    try:
        bundle = sample_fine_increments(config.master_seed, i, config.n_ref, problem.dim)
        fine_w = tables.get(config.n_ref)
        ref = solve_on_grid(problem, config.n_ref, bundle.fine_increments, fine_w,
                            scheme=config.scheme)
        out = np.empty((len(config.n_list), 2))
        for idx, n in enumerate(config.n_list):
            inc = aggregate(bundle, n)
            coarse = solve_on_grid(problem, n, inc, tables.get(n), scheme=config.scheme)
            ext = extend_to_fine(problem, coarse, bundle, fine_w)
            diff = ref.states - ext
            dist = np.sqrt(np.sum(diff * diff, axis=1))
            end = float(np.linalg.norm(ref.states[-1] - coarse.states[-1]))
            out[idx, 0] = end
            out[idx, 1] = max(float(dist.max()), end)
        return out
    except SchemeError as exc:
        raise SchemeError(f"sample {i} aborted: {exc}") from exc


def _lp_with_jackknife(dist: np.ndarray, p: float) -> tuple[float, float]:
    m = dist.shape[0]
    v = dist ** p
    total = float(np.sum(v))
    err = (total / m) ** (1.0 / p)
    if m < 2:
        return err, 0.0
    loo = ((total - v) / (m - 1)) ** (1.0 / p)
    se = float(np.sqrt((m - 1) / m * np.sum((loo - loo.mean()) ** 2)))
    return err, se


def run_experiment(config: ExperimentConfig, problem: SdeProblem | None = None) -> ErrorTable:
    """Coupled strong-error measurement over all levels of the config.

    A problem instance may be injected (test hooks); by default the catalog
    problem named in the config is used.
    """
    if problem is None:
        problem = problem_by_name(config.problem, config.modulus_spec())
    tables = _build_tables(config, problem.has_singular_part)

    _WORK["problem"] = problem
    _WORK["config"] = config
    _WORK["tables"] = tables
    try:
        if config.workers == 1:
            results = [_sample_errors(i) for i in range(config.samples)]
        else:
            ctx = multiprocessing.get_context("fork")
            chunk = max(1, config.samples // (4 * config.workers))
            with ctx.Pool(config.workers) as pool:
                results = pool.map(_sample_errors, range(config.samples), chunksize=chunk)
    finally:
        _WORK.clear()

    dists = np.stack(results)        # (M, len(n_list), 2), sample-index order
    rows = []
    for idx, n in enumerate(config.n_list):
        for p in config.p_list:
            err_end, se_end = _lp_with_jackknife(dists[:, idx, 0], p)
            err_sup, se_sup = _lp_with_jackknife(dists[:, idx, 1], p)
            rows.append(ErrorRow(n=n, p=p, err_end=err_end, se_end=se_end,
                                 err_sup=err_sup, se_sup=se_sup))
    meta = {
        "problem": problem.name,
        "scheme": config.scheme,
        "samples": config.samples,
        "n_ref": config.n_ref,
        "master_seed": config.master_seed,
        "beta": config.beta,
        "K": config.K,
        "tolerance_used": config.quad_tol,
        "rng_scheme": RNG_SCHEME,
        "backend": backend.active_backend(),
    }
    return ErrorTable(rows=rows, metadata=meta)


def _rate(e_coarse: float, e_fine: float) -> float | None:
    if e_coarse <= 0 or e_fine <= 0:
        return None
    return float(np.log2(e_coarse / e_fine))


def two_level_rates(table: ErrorTable) -> RateReport:
    """Local rates log2(E(n)/E(2n)) per consecutive level pair, keyed by the finer level."""
    rows = []
    levels = table.levels()
    for p in table.orders():
        for lo, hi in zip(levels, levels[1:]):
            if hi != 2 * lo:
                continue
            a, b = table.row(lo, p), table.row(hi, p)
            rows.append(RateRow(n=hi, p=p,
                                rate_end=_rate(a.err_end, b.err_end),
                                rate_sup=_rate(a.err_sup, b.err_sup)))
    return RateReport(rows=rows)


def ls_slope(table: ErrorTable, level_window: int | None = None) -> dict:
    """Negated least-squares slope of log2 E against log2 n per (p, metric).

    level_window restricts the fit to the finest that many levels.
    """
    out = {}
    levels = table.levels()
    if level_window is not None:
        levels = levels[-level_window:]
    for p in table.orders():
        for metric in ("end", "sup"):
            pts = [(n, getattr(table.row(n, p), f"err_{metric}")) for n in levels]
            pts = [(n, e) for n, e in pts if e > 0]
            if len(pts) < 2:
                raise ValueError(f"insufficient positive-error levels for LS slope (p={p}, {metric})")
            x = np.log2([n for n, _ in pts])
            y = np.log2([e for _, e in pts])
            out[(p, metric)] = float(-np.polyfit(x, y, 1)[0])
    return out


def build_rate_report(table: ErrorTable, level_window: int | None = None) -> RateReport:
    partial = two_level_rates(table)
    return RateReport(rows=partial.rows, ls=ls_slope(table, level_window),
                      ls_window=level_window)


def lower_bound_check(config: ExperimentConfig, problem: SdeProblem | None = None) -> dict:
    """Order-1/2 optimality check for the driftless catalog problem.

    Runs classical EM, reports the p=2 endpoint LS slope and the spread of
    the scaled errors s(n) = sqrt(n) E(n); a near-constant s certifies
    E comparable to n^(-1/2) from both sides.
    """
    if problem is None:
        problem = lower_bound_problem()
    if problem.has_singular_part:
        raise SchemeError("lower bound check requires a bounded-in-time drift")
    import dataclasses

    cfg = dataclasses.replace(config, problem=problem.name, scheme="classical",
                              p_list=tuple(sorted(set(config.p_list) | {2})))
    table = run_experiment(cfg, problem=problem)
    errs = {n: table.row(n, 2).err_end for n in cfg.n_list}
    if all(e <= 1e-12 for e in errs.values()):
        return {"degenerate": True, "note": "degenerate: scheme exact", "errors": errs,
                "table": table}
    slope = ls_slope(table, config.ls_window)[(2, "end")]
    s = {n: np.sqrt(n) * e for n, e in errs.items()}
    ratio = max(s.values()) / min(s.values())
    return {"degenerate": False, "errors": errs, "slope": slope,
            "scaled": s, "scaled_ratio": ratio, "table": table}


def moment_identity_check(n: int, draws: int, master_seed: int = 20240801,
                          stream_index: int = 0) -> dict:
    """Empirical check of E[((dW)^2 - 1/n)^2] = 2/n^2 for dW ~ N(0, 1/n)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    gen = derive_stream(master_seed, stream_index)
    dw = standard_normals(gen, draws) * np.sqrt(1.0 / n)
    stat = (dw * dw - 1.0 / n) ** 2
    mean = float(stat.mean())
    se = float(stat.std(ddof=1) / np.sqrt(draws))
    target = 2.0 / n ** 2
    return {"n": n, "draws": draws, "mean": mean, "se": se, "target": target,
            "deviation": abs(mean - target),
            "passed": abs(mean - target) <= 4.0 * se}
