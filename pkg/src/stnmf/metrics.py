"""Assignment accuracy, trajectory diagnostics and per-trial records."""
from __future__ import annotations

import csv
import io
import itertools
import json
import math
from dataclasses import asdict, dataclass, fields
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

__all__ = [
    "TrialRecord",
    "CSV_HEADER",
    "EXHAUSTIVE_MAX_K",
    "assignment_accuracy",
    "trajectory_check",
    "records_to_csv",
    "records_to_jsonl",
]

EXHAUSTIVE_MAX_K = 8


def _confusion(pred: np.ndarray, truth: np.ndarray, k: int) -> np.ndarray:
    """``C[p, t]`` counts vertices predicted ``p`` with truth ``t``; unassigned
    and out-of-range predictions are dropped (they never match)."""
    keep = (pred >= 0) & (pred < k)
    C = np.zeros((k, k), dtype=np.int64)
    np.add.at(C, (pred[keep], truth[keep]), 1)
    return C


def assignment_accuracy(pred: Sequence[int], truth: Sequence[int], k: int,
                        method: Optional[str] = None) -> float:
    """Fraction of vertices matching ``truth`` under the best relabeling of ``pred``.

    Exhaustive search over the ``k!`` relabelings for ``k <= 8``, Hungarian
    matching on the confusion matrix above that.  ``method`` forces
    ``"exhaustive"`` or ``"hungarian"``.
    """
    pred = np.asarray(pred, dtype=int)
    truth = np.asarray(truth, dtype=int)
    if pred.shape != truth.shape:
        raise ValueError(f"length mismatch: {pred.shape[0]} predictions, {truth.shape[0]} labels")
    if pred.size == 0:
        return 0.0
    if np.any((truth < 0) | (truth >= k)):
        raise ValueError("truth labels must lie in 0..k-1")
    C = _confusion(pred, truth, k)
    if method is None:
        method = "exhaustive" if k <= EXHAUSTIVE_MAX_K else "hungarian"
    if method == "exhaustive":
        idx = np.arange(k)
        best = max(int(C[idx, list(perm)].sum()) for perm in itertools.permutations(range(k)))
    elif method == "hungarian":
        rows, cols = linear_sum_assignment(C, maximize=True)
        best = int(C[rows, cols].sum())
    else:
        raise ValueError(f"unknown method {method!r}")
    return best / pred.size


def trajectory_check(trajectory: Sequence[float], slack: float = 1e-10) -> tuple[bool, float]:
    """``(monotone, worst_violation)`` for a supposedly non-increasing sequence.

    An increase counts as a violation when it exceeds
    ``slack * max(1, |previous value|)``; ``worst_violation`` is the largest
    relative increase ``(next - prev) / max(1, |prev|)`` (0 if none).
    """
    if len(trajectory) == 0:
        raise ValueError("empty trajectory")
    x = np.asarray(trajectory, dtype=float)
    if x.size < 2:
        return True, 0.0
    rel = np.diff(x) / np.maximum(1.0, np.abs(x[:-1]))
    worst = max(0.0, float(rel.max()))
    return bool(worst <= slack), worst


@dataclass
class TrialRecord:
    method: str
    k: int
    n: int
    gamma_b: Optional[float]  # measured; blank when the graph could not be built
    gamma_d: Optional[float]
    seed: int
    accuracy: Optional[float] = None
    err_w: Optional[float] = None
    err_d: Optional[float] = None
    residual: Optional[float] = None
    iters: Optional[int] = None
    wall_time: Optional[float] = None
    error: str = ""

    def __post_init__(self):
        if self.accuracy is not None and not 0 <= self.accuracy <= 1:
            raise ValueError("accuracy must lie in [0, 1]")
        for name in ("err_w", "err_d"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise ValueError(f"{name} must be non-negative")


CSV_HEADER = tuple(f.name for f in fields(TrialRecord))


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else str(v)
    return str(v)


def records_to_csv(records: Iterable[TrialRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in records:
        w.writerow([_cell(getattr(r, h)) for h in CSV_HEADER])
    return buf.getvalue()


def records_to_jsonl(records: Iterable[TrialRecord]) -> str:
    return "".join(json.dumps(asdict(r), sort_keys=False) + "\n" for r in records)
