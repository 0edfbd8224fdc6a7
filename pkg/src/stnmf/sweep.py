"""Noise sweeps comparing the summarization methods on synthetic graphs.

A sweep is a grid of cells ``(sizes, gamma_b, gamma_d)``; each cell runs
``trials`` graphs and every method on each graph.  Seeds are derived from
``base_seed`` and a stable hash of the cell index, trial index and method, so
results do not depend on execution order or worker count.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .baselines import spectral_cluster, undirected_summarize
from .graph import symmetrize, to_skew
from .metrics import TrialRecord, assignment_accuracy, records_to_csv
from .solver import SolverConfig, discrete_errors, harden, solve, summarize_partition
from .synthetic import DipsSpec, NoiseConfig, add_noise, generate_dips, measure_noise, parse_pattern, staggered_sizes

__all__ = [
    "METHODS",
    "WORKERS_ENV",
    "SweepSpec",
    "Cell",
    "derive_seed",
    "run_trial",
    "run_sweep",
    "summarize_records",
    "summary_to_csv",
]

METHODS = ("adaptive", "fixed", "spectral", "undirected")
RESERVED_METHODS = ("wncut",)
WORKERS_ENV = "STNMF_WORKERS"


def derive_seed(base_seed: int, *parts) -> int:
    """``base_seed`` plus a 32-bit blake2b hash of ``parts``."""
    key = ":".join(str(p) for p in parts).encode()
    h = int.from_bytes(hashlib.blake2b(key, digest_size=4).digest(), "big")
    return int(base_seed) + h


@dataclass(frozen=True)
class SolverSettings:
    max_iters: int = 2000
    rel_tol: float = 1e-8
    lambda_scale: float = 1.0
    init: str = "nndsvd"
    undirected_scheme: str = "adaptive"

    def config(self, k: int, scheme: str, seed: int) -> SolverConfig:
        return SolverConfig(k=k, scheme=scheme, lambda_scale=self.lambda_scale, max_iters=self.max_iters,
                            rel_tol=self.rel_tol, seed=seed, init=self.init)


@dataclass(frozen=True)
class SweepSpec:
    """Grid definition; see README for the JSON schema."""

    gamma_b: tuple[float, ...] = (0.0, 0.1, 0.2, 0.3, 0.4, 0.5)
    gamma_d: tuple[float, ...] = (0.0, 0.1, 0.2, 0.3)
    n: tuple[int, ...] = (40, 100)
    k: tuple[int, ...] = (2, 4)
    group_sizes: Optional[tuple[tuple[int, ...], ...]] = None
    trials: int = 20
    methods: tuple[str, ...] = METHODS
    base_seed: int = 0
    pattern: str = "banded"
    density: float = 1.0
    weight: float = 1.0
    solver: SolverSettings = field(default_factory=SolverSettings)
    output: str = "sweep.csv"
    summary: Optional[str] = None
    record_time: bool = False

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if not self.gamma_b or not self.gamma_d or not self.methods:
            raise ValueError("grid must be non-empty")
        for m in self.methods:
            if m in RESERVED_METHODS:
                raise ValueError(f"method {m!r} is reserved and not implemented")
            if m not in METHODS:
                raise ValueError(f"unknown method {m!r}; choose from {METHODS}")
        if len(set(self.methods)) != len(self.methods):
            raise ValueError("duplicate methods")
        if self.group_sizes is None and (not self.n or not self.k):
            raise ValueError("grid must be non-empty")
        if self.solver.undirected_scheme not in ("fixed", "adaptive"):
            raise ValueError("undirected_scheme must be 'fixed' or 'adaptive'")
        for size in self.sizes():
            DipsSpec(size, parse_pattern(self.pattern, len(size)), self.weight, self.density)
        for g in self.gamma_b:
            NoiseConfig(g, 0.0)
        for g in self.gamma_d:
            NoiseConfig(0.0, g)

    def sizes(self) -> list[tuple[int, ...]]:
        if self.group_sizes is not None:
            return [tuple(int(x) for x in s) for s in self.group_sizes]
        return [tuple(staggered_sizes(n, k)) for n in self.n for k in self.k]

    def cells(self) -> list["Cell"]:
        out = []
        for sizes in self.sizes():
            for gb in self.gamma_b:
                for gd in self.gamma_d:
                    out.append(Cell(len(out), sizes, float(gb), float(gd)))
        return out

    def summary_path(self) -> str:
        if self.summary is not None:
            return self.summary
        p = Path(self.output)
        return str(p.with_name(p.stem + ".summary.csv"))

    @classmethod
    def from_dict(cls, d: dict) -> "SweepSpec":
        d = dict(d)
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown sweep keys: {sorted(unknown)}")
        for key in ("gamma_b", "gamma_d", "n", "k", "methods"):
            if key in d:
                if not isinstance(d[key], list):
                    d[key] = [d[key]]
                d[key] = tuple(d[key])
        if d.get("group_sizes") is not None:
            d["group_sizes"] = tuple(tuple(s) for s in d["group_sizes"])
        if "solver" in d:
            d["solver"] = SolverSettings(**d["solver"])
        return cls(**d)

    @classmethod
    def load(cls, path: Union[str, Path]) -> "SweepSpec":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def to_dict(self) -> dict:
        d = asdict(self)
        for key in ("gamma_b", "gamma_d", "n", "k", "methods"):
            d[key] = list(d[key])
        if d["group_sizes"] is not None:
            d["group_sizes"] = [list(s) for s in d["group_sizes"]]
        return d


@dataclass(frozen=True)
class Cell:
    index: int
    sizes: tuple[int, ...]
    gamma_b: float
    gamma_d: float

    @property
    def n(self) -> int:
        return sum(self.sizes)

    @property
    def k(self) -> int:
        return len(self.sizes)


def _errors(g, summary) -> tuple[float, float]:
    return discrete_errors(g, summary.compact())


def _run_method(method: str, lg, spec: SweepSpec, seed: int) -> dict:
    k = lg.spec.k
    g = lg.graph
    if method in ("adaptive", "fixed"):
        result = solve(to_skew(g), spec.solver.config(k, method, seed))
        summary = harden(result.factors)
        err_w, err_d = _errors(g, summary)
        return {"assignment": summary.assignment, "err_w": err_w, "err_d": err_d,
                "residual": result.residual, "iters": result.iters}
    W = symmetrize(g)
    if method == "spectral":
        res = spectral_cluster(W, k, seed)
        residual = iters = None
    else:
        res = undirected_summarize(W, k, spec.solver.config(k, spec.solver.undirected_scheme, seed))
        residual, iters = res.aux["residual"], res.aux["iters"]
    err_w, err_d = _errors(g, summarize_partition(g, res.assignment, k))
    return {"assignment": res.assignment, "err_w": err_w, "err_d": err_d,
            "residual": residual, "iters": iters}


def run_trial(spec: SweepSpec, cell: Cell, trial: int) -> list[TrialRecord]:
    """One graph for ``(cell, trial)`` and one record per method."""
    base = dict(k=cell.k, n=cell.n)
    graph_seed = derive_seed(spec.base_seed, cell.index, trial, "graph")
    try:
        dips = DipsSpec(cell.sizes, parse_pattern(spec.pattern, cell.k), spec.weight, spec.density)
        noise = NoiseConfig(cell.gamma_b, cell.gamma_d, derive_seed(spec.base_seed, cell.index, trial, "noise"))
        lg = add_noise(generate_dips(dips, graph_seed), noise)
        gb, gd = measure_noise(lg)
    except (ValueError, ArithmeticError) as exc:
        msg = f"{type(exc).__name__}: {exc}"
        return [TrialRecord(method=m, gamma_b=None, gamma_d=None,
                            seed=derive_seed(spec.base_seed, cell.index, trial, m), error=msg, **base)
                for m in spec.methods]

    records = []
    for m in spec.methods:
        seed = derive_seed(spec.base_seed, cell.index, trial, m)
        start = time.perf_counter()
        try:
            out = _run_method(m, lg, spec, seed)
        except (ValueError, ArithmeticError, RuntimeError) as exc:
            records.append(TrialRecord(method=m, gamma_b=gb, gamma_d=gd, seed=seed,
                                       error=f"{type(exc).__name__}: {exc}", **base))
            continue
        elapsed = time.perf_counter() - start
        records.append(TrialRecord(
            method=m, gamma_b=gb, gamma_d=gd, seed=seed,
            accuracy=assignment_accuracy(out["assignment"], lg.truth, cell.k),
            err_w=float(out["err_w"]), err_d=float(out["err_d"]),
            residual=None if out["residual"] is None else float(out["residual"]),
            iters=out["iters"],
            wall_time=elapsed if spec.record_time else None,
            **base,
        ))
    return records


def _trial_task(args):
    spec, cell, trial = args
    return run_trial(spec, cell, trial)


def worker_count(requested: Optional[int] = None) -> int:
    n = requested if requested is not None else (os.cpu_count() or 1)
    cap = os.environ.get(WORKERS_ENV)
    if cap:
        n = min(n, int(cap))
    return max(1, n)


def run_sweep(spec: SweepSpec, workers: Optional[int] = None) -> list[tuple[Cell, TrialRecord]]:
    """All ``(cell, record)`` pairs in canonical (cell, trial, method) order."""
    tasks = [(spec, cell, t) for cell in spec.cells() for t in range(spec.trials)]
    n = worker_count(workers)
    if n == 1:
        results = [_trial_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=n) as pool:
            # map preserves task order, so completion order never leaks into output
            results = list(pool.map(_trial_task, tasks, chunksize=max(1, len(tasks) // (4 * n))))
    out = []
    for (_, cell, _), recs in zip(tasks, results):
        out.extend((cell, r) for r in recs)
    return out


SUMMARY_HEADER = ("n", "k", "gamma_b", "gamma_d", "method", "trials", "errors",
                  "mean_accuracy", "std_accuracy", "mean_err_w", "mean_err_d",
                  "mean_gamma_b_measured", "mean_gamma_d_measured")


def summarize_records(pairs: Sequence[tuple[Cell, TrialRecord]]) -> list[dict]:
    """Per (cell, method) mean and standard deviation over successful trials."""
    groups: dict[tuple[int, str], list[TrialRecord]] = {}
    cells: dict[int, Cell] = {}
    for cell, r in pairs:
        groups.setdefault((cell.index, r.method), []).append(r)
        cells[cell.index] = cell
    rows = []
    for (idx, method), recs in groups.items():
        cell = cells[idx]
        ok = [r for r in recs if not r.error]

        def stat(name, fn):
            vals = [getattr(r, name) for r in ok]
            return fn(np.array(vals, dtype=float)) if vals else None

        rows.append({
            "n": cell.n, "k": cell.k, "gamma_b": cell.gamma_b, "gamma_d": cell.gamma_d,
            "method": method, "trials": len(recs), "errors": len(recs) - len(ok),
            "mean_accuracy": stat("accuracy", np.mean),
            "std_accuracy": stat("accuracy", np.std),
            "mean_err_w": stat("err_w", np.mean),
            "mean_err_d": stat("err_d", np.mean),
            "mean_gamma_b_measured": stat("gamma_b", np.mean),
            "mean_gamma_d_measured": stat("gamma_d", np.mean),
        })
    return rows


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return repr(v) if math.isfinite(v) else str(v)
    return str(v)


def summary_to_csv(rows: Sequence[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_HEADER)
    for row in rows:
        w.writerow([_fmt(row[h]) for h in SUMMARY_HEADER])
    return buf.getvalue()


def write_sweep(spec: SweepSpec, pairs: Sequence[tuple[Cell, TrialRecord]],
                output: Optional[str] = None, summary: Optional[str] = None) -> tuple[str, str]:
    out = output or spec.output
    summ = summary or spec.summary_path()
    Path(out).write_text(records_to_csv(r for _, r in pairs), encoding="utf-8")
    Path(summ).write_text(summary_to_csv(summarize_records(pairs)), encoding="utf-8")
    return out, summ
