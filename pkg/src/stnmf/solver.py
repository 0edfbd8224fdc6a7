"""Structured non-negative matrix factorization ``T ~ U S U^T``.

``T`` is the skew-symmetric adjacency of a directed graph, ``U >= 0`` assigns
vertices to compressed nodes and the skew-symmetric ``S`` holds the directed
relations between them.  Two multiplicative schemes are provided:

* ``fixed``: penalty ``tr(Lambda (U^T U - I))`` with a user-chosen
  symmetric non-negative ``Lambda``, then a multiplicative ``S`` update.
* ``adaptive``: ``Lambda`` eliminated through the KKT condition, followed by
  column normalization of ``U`` and ``S = U^T T U``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .graph import DirectedGraph, to_asymmetric
from .linalg import frobenius_sq, neg_part, pos_part, truncated_svd

__all__ = [
    "EPS",
    "SCHEMES",
    "INITS",
    "FactorPair",
    "SolverConfig",
    "SolveResult",
    "Summarization",
    "SolverError",
    "NonFiniteError",
    "DegenerateCollapseError",
    "objective_reg",
    "objective_residual",
    "objective_adaptive",
    "nndsvd_init",
    "random_init",
    "init_S",
    "orient_relations",
    "normalize_columns",
    "step_fixed",
    "step_adaptive",
    "iterate",
    "solve",
    "harden",
    "summarize_partition",
    "discrete_errors",
    "result_to_dict",
]

log = logging.getLogger(__name__)

EPS = 1e-12
SCHEMES = ("fixed", "adaptive")
INITS = ("nndsvd", "uniform-random")


class SolverError(ArithmeticError):
    pass


class NonFiniteError(SolverError):
    def __init__(self, factor: str, index: tuple[int, ...], value: float):
        self.factor = factor
        self.index = index
        self.value = value
        super().__init__(f"non-finite entry {factor}{list(index)} = {value}")


class DegenerateCollapseError(SolverError):
    def __init__(self, columns: Sequence[int]):
        self.columns = list(columns)
        super().__init__(f"column(s) {self.columns} of U collapsed to zero")


@dataclass(frozen=True)
class FactorPair:
    """Assignment factor ``U`` (n x k, non-negative) and relation factor ``S``."""

    U: np.ndarray
    S: np.ndarray

    def __post_init__(self):
        U = np.asarray(self.U, dtype=float)
        S = np.asarray(self.S, dtype=float)
        if U.ndim != 2 or S.shape != (U.shape[1], U.shape[1]):
            raise ValueError(f"shape mismatch: U {U.shape}, S {S.shape}")
        if np.any(U < 0):
            raise ValueError("U must be entrywise non-negative")
        if np.any(S + S.T != 0):
            raise ValueError("S must be exactly skew-symmetric")
        object.__setattr__(self, "U", U)
        object.__setattr__(self, "S", S)

    @property
    def k(self) -> int:
        return self.U.shape[1]


@dataclass(frozen=True)
class SolverConfig:
    k: int
    scheme: str = "adaptive"
    lambda_scale: float = 1.0
    max_iters: int = 2000
    rel_tol: float = 1e-8
    seed: int = 0
    init: str = "nndsvd"
    # full symmetric non-negative Lambda for the fixed scheme; overrides lambda_scale
    lambda_matrix: Optional[tuple[tuple[float, ...], ...]] = None

    def __post_init__(self):
        if self.k < 2:
            raise ValueError(f"k must be at least 2, got {self.k}")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if self.init not in INITS:
            raise ValueError(f"init must be one of {INITS}, got {self.init!r}")
        if not self.lambda_scale >= 0:
            raise ValueError("lambda_scale must be non-negative")
        if self.max_iters < 1:
            raise ValueError("max_iters must be positive")
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be positive")
        if self.lambda_matrix is not None:
            L = np.asarray(self.lambda_matrix, dtype=float)
            if L.shape != (self.k, self.k):
                raise ValueError(f"lambda_matrix must be {self.k}x{self.k}")
            if np.any(L != L.T) or np.any(L < 0):
                raise ValueError("lambda_matrix must be symmetric and non-negative")
            object.__setattr__(self, "lambda_matrix", tuple(tuple(float(x) for x in row) for row in L))

    def regularizer(self) -> np.ndarray:
        if self.lambda_matrix is not None:
            return np.array(self.lambda_matrix, dtype=float)
        return self.lambda_scale * np.ones((self.k, self.k))


@dataclass
class SolveResult:
    factors: FactorPair
    trajectory: list[float]
    iters: int
    converged: bool
    residual: float
    degenerate: bool = False
    init_fallback: bool = False


@dataclass(frozen=True)
class Summarization:
    """Hard assignment of vertices to ``k`` compressed nodes (-1 = unassigned)
    plus directed relations ``(I, J, weight)``."""

    k: int
    assignment: np.ndarray
    relations: tuple[tuple[int, int, float], ...] = ()

    def __post_init__(self):
        a = np.asarray(self.assignment, dtype=int)
        if np.any((a < -1) | (a >= self.k)):
            raise ValueError("assignment labels must lie in {-1, 0..k-1}")
        rels = tuple((int(i), int(j), float(w)) for i, j, w in self.relations)
        pairs = set()
        for i, j, _ in rels:
            if i == j:
                raise ValueError(f"self-relation on compressed node {i}")
            if not (0 <= i < self.k and 0 <= j < self.k):
                raise ValueError(f"relation {i}->{j} out of range")
            key = (min(i, j), max(i, j))
            if key in pairs:
                raise ValueError(f"more than one relation between {key[0]} and {key[1]}")
            pairs.add(key)
        object.__setattr__(self, "assignment", a)
        object.__setattr__(self, "relations", rels)

    def groups(self) -> list[np.ndarray]:
        return [np.flatnonzero(self.assignment == I) for I in range(self.k)]

    def compact(self) -> "Summarization":
        """Drop empty compressed nodes and relabel the rest consecutively."""
        used = [I for I in range(self.k) if np.any(self.assignment == I)]
        remap = {old: new for new, old in enumerate(used)}
        a = np.array([remap.get(int(x), -1) for x in self.assignment], dtype=int)
        rels = tuple((remap[i], remap[j], w) for i, j, w in self.relations if i in remap and j in remap)
        return Summarization(max(len(used), 1), a, rels)


def _check_dims(T: np.ndarray, f: FactorPair) -> None:
    if T.ndim != 2 or T.shape[0] != T.shape[1]:
        raise ValueError(f"T must be square, got {T.shape}")
    if T.shape[0] != f.U.shape[0]:
        raise ValueError(f"dimension mismatch: T is {T.shape}, U is {f.U.shape}")


def _antisym(X: np.ndarray) -> np.ndarray:
    # exact skew symmetry: (a-b)/2 and (b-a)/2 are bitwise negatives
    return (X - X.T) / 2


def _reg_value(T, U, S, Lambda) -> float:
    k = U.shape[1]
    return frobenius_sq(T - U @ S @ U.T) + float(np.trace(Lambda @ (U.T @ U - np.eye(k))))


def _adaptive_value(T, U, S) -> float:
    Q = T.T @ U @ S
    M = U.T @ U
    P = S.T @ M @ S
    Qp, Qm = pos_part(Q), neg_part(Q)
    Pm = neg_part(P)
    inner = -2 * U.T @ Qp - M @ Pm + M @ (U.T @ Qp + Pm - U.T @ Qm) + 2 * U.T @ Qm
    return frobenius_sq(T) + float(np.trace(inner))


def objective_reg(T: np.ndarray, f: FactorPair, Lambda: np.ndarray) -> float:
    """``||T - U S U^T||_F^2 + tr(Lambda (U^T U - I))``."""
    T = np.asarray(T, dtype=float)
    _check_dims(T, f)
    Lambda = np.asarray(Lambda, dtype=float)
    if Lambda.shape != (f.k, f.k):
        raise ValueError(f"Lambda must be {f.k}x{f.k}, got {Lambda.shape}")
    return _reg_value(T, f.U, f.S, Lambda)


def objective_residual(T: np.ndarray, f: FactorPair) -> float:
    T = np.asarray(T, dtype=float)
    _check_dims(T, f)
    return frobenius_sq(T - f.U @ f.S @ f.U.T)


def objective_adaptive(T: np.ndarray, f: FactorPair) -> float:
    """Objective minimized by the adaptive scheme, offset by ``||T||_F^2``.

    With ``Q = T^T U S`` and ``P = S^T U^T U S`` and the KKT choice
    ``Lambda = U^T Q - P`` substituted into the penalized objective::

        ||T||^2 + tr(-2 U^T Q+ - U^T U P- + U^T U (U^T Q+ + P- - U^T Q-) + 2 U^T Q-)

    The constant offset makes the value equal the residual whenever ``U`` is
    orthonormal and ``S = U^T T U``.
    """
    T = np.asarray(T, dtype=float)
    _check_dims(T, f)
    return _adaptive_value(T, f.U, f.S)


def init_S(k: int) -> np.ndarray:
    """``+1`` above the diagonal, ``-1`` below.

    Every off-diagonal entry is nonzero: a zero in ``S`` can never become
    nonzero under the multiplicative update.
    """
    if k < 2:
        raise ValueError(f"k must be at least 2, got {k}")
    upper = np.triu(np.ones((k, k)), 1)
    return upper - upper.T


def random_init(n: int, k: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    U = rng.random((n, k)) + EPS
    return U / np.linalg.norm(U, axis=0)


def nndsvd_init(T: np.ndarray, k: int, seed: int = 0) -> tuple[np.ndarray, bool]:
    """Non-negative SVD start for ``U``; returns ``(U0, fallback_used)``.

    Runs NNDSVD on the out-edge part ``A = T+``.  Since ``U`` multiplies ``S``
    from both sides, both the left factor (sources) and the right factor
    (targets) of each triplet are candidate columns.  For every triplet the
    sign whose ``||u_s|| * ||v_s||`` is larger is kept, as in standard
    NNDSVD; parallel duplicates are skipped.  Missing columns (zero graph,
    low rank) are filled with random non-negative unit vectors and the
    fallback flag is set.
    """
    T = np.asarray(T, dtype=float)
    n = T.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    A = pos_part(T)
    cols: list[np.ndarray] = []
    if np.any(A):
        for trip in truncated_svd(A, k, seed):
            if trip.sigma <= 1e-12:
                break
            up, um = pos_part(trip.u), neg_part(trip.u)
            vp, vm = pos_part(trip.v), neg_part(trip.v)
            if np.linalg.norm(up) * np.linalg.norm(vp) >= np.linalg.norm(um) * np.linalg.norm(vm):
                parts = (up, vp)
            else:
                parts = (um, vm)
            for c in parts:
                norm = np.linalg.norm(c)
                if norm == 0:
                    continue
                c = c / norm
                if all(c @ d < 1 - 1e-8 for d in cols):
                    cols.append(c)
                if len(cols) == k:
                    break
            if len(cols) == k:
                break
    fallback = len(cols) < k
    if fallback:
        extra = random_init(n, k - len(cols), seed)
        cols.extend(extra.T)
    return np.column_stack(cols), fallback


def orient_relations(S0: np.ndarray, U0: np.ndarray, T: np.ndarray) -> np.ndarray:
    """Flip signs of ``S0`` to agree with ``U0^T T U0`` where that is nonzero.

    The column order produced by the initializer is arbitrary, so the sign
    pattern of ``init_S`` may point relations the wrong way; the first
    ``U`` update then zeroes whole columns.  Magnitudes and nonzero pattern
    of ``S0`` are kept.
    """
    C = _antisym(U0.T @ T @ U0)
    scale = np.abs(C).max()
    if scale == 0:
        return S0.copy()
    return np.where(np.abs(C) > 1e-9 * scale, np.sign(C) * np.abs(S0), S0)


def normalize_columns(U: np.ndarray) -> np.ndarray:
    """``U D^{-1/2}`` with ``D = diag(U^T U)``."""
    norms = np.linalg.norm(U, axis=0)
    dead = np.flatnonzero(norms == 0)
    if dead.size:
        raise DegenerateCollapseError(dead.tolist())
    return U / norms


def _guarded(den: np.ndarray) -> np.ndarray:
    return np.maximum(den, EPS)


def _signed_guard(den: np.ndarray) -> np.ndarray:
    return np.where(np.abs(den) < EPS, np.copysign(EPS, den), den)


def _check_finite(name: str, X: np.ndarray) -> None:
    bad = ~np.isfinite(X)
    if bad.any():
        idx = tuple(int(i) for i in np.argwhere(bad)[0])
        raise NonFiniteError(name, idx, float(X[idx]))


def _split(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    Xp = np.maximum(X, 0.0)
    return Xp, Xp - X


def _fixed_arrays(T, U, S, Lambda, project=_antisym, cache=None):
    """One fixed-scheme pass.

    ``cache`` is ``(TU, M, N)`` for the incoming ``U`` (``T U``, ``U^T U``,
    ``U^T T U``); the same triple for the outgoing ``U`` is returned.
    """
    TU, M = cache[:2] if cache is not None else (T @ U, U.T @ U)
    Qp, Qm = _split(TU @ S.T)
    Pp, Pm = _split(S.T @ M @ S)
    U = U * (Qp + U @ Pm) / np.maximum(Qm + U @ (Pp + Lambda), EPS)
    TU = T @ U
    M = U.T @ U
    N = U.T @ TU
    S = project(S * N / _signed_guard(M @ S @ M))
    return U, S, (TU, M, N)


def _adaptive_arrays(T, U, S, project=_antisym, cache=None):
    """One adaptive pass; ``cache`` as for ``_fixed_arrays``."""
    TU, M = cache[:2] if cache is not None else (T @ U, U.T @ U)
    Qp = np.maximum(TU @ S.T, 0.0)
    UPm = U @ np.maximum(-(S.T @ M @ S), 0.0)
    U = U * (Qp + UPm) / np.maximum(U @ (U.T @ Qp) + UPm, EPS)
    U = normalize_columns(U)
    TU = T @ U
    N = U.T @ TU
    S = project(N)
    return U, S, (TU, U.T @ U, N)


def _locate_nonfinite(U: np.ndarray, S: np.ndarray) -> None:
    _check_finite("U", U)
    _check_finite("S", S)


def step_fixed(T: np.ndarray, f: FactorPair, Lambda: np.ndarray) -> FactorPair:
    """One pass of the constant-regularizer scheme: ``U`` update, then ``S``."""
    T = np.asarray(T, dtype=float)
    _check_dims(T, f)
    Lambda = np.asarray(Lambda, dtype=float)
    if Lambda.shape != (f.k, f.k) or np.any(Lambda != Lambda.T) or np.any(Lambda < 0):
        raise ValueError("Lambda must be a symmetric non-negative k x k matrix")
    U, S, _ = _fixed_arrays(T, f.U, f.S, Lambda)
    _locate_nonfinite(U, S)
    return FactorPair(U, S)


def step_adaptive(T: np.ndarray, f: FactorPair) -> FactorPair:
    """One pass of the adaptive scheme: ``U`` update, normalize, ``S = U^T T U``."""
    T = np.asarray(T, dtype=float)
    _check_dims(T, f)
    U, S, _ = _adaptive_arrays(T, f.U, f.S)
    _locate_nonfinite(U, S)
    return FactorPair(U, S)


def _residual_from_cache(T, T_sq, U, S, cache) -> float:
    """``||T - U S U^T||^2`` from k x k products, recomputed directly near zero
    where the expansion loses relative precision."""
    _, M, N = cache
    val = T_sq - 2.0 * float(np.vdot(N, S)) + float(np.vdot(S.T @ M @ S, M))
    if val < 1e-6 * T_sq:
        return frobenius_sq(T - U @ S @ U.T)
    return val


def _fixed_objective(T, T_sq, Lambda):
    offset = float(np.trace(Lambda))

    def objective(U, S, cache):
        return _residual_from_cache(T, T_sq, U, S, cache) + float(np.vdot(Lambda, cache[1])) - offset
    return objective


def _adaptive_objective(T_sq):
    def objective(U, S, cache):
        TU, M, _ = cache
        Qp, Qm = _split(-TU @ S)
        Pm = np.maximum(-(S.T @ M @ S), 0.0)
        UQp, UQm = U.T @ Qp, U.T @ Qm
        # tr(M X) = <M, X^T> for symmetric M
        inner = (-2.0 * np.trace(UQp) + 2.0 * np.trace(UQm)
                 - np.vdot(M, Pm.T) + np.vdot(M, (UQp + Pm - UQm).T))
        return T_sq + float(inner)
    return objective


def iterate(step, objective, U, S, max_iters: int, rel_tol: float):
    """Shared driver: ``step(U, S, cache) -> (U, S, cache)`` and
    ``objective(U, S, cache) -> float`` (cache starts as ``None``).

    Returns ``(U, S, trajectory, iters, converged)``; converged means the
    relative objective change stayed below ``rel_tol`` for 3 iterations.
    """
    trajectory: list[float] = []
    streak = 0
    it = 0
    cache = None
    for it in range(1, max_iters + 1):
        U, S, cache = step(U, S, cache)
        val = objective(U, S, cache)
        if not math.isfinite(val):
            _locate_nonfinite(U, S)
            raise NonFiniteError("objective", (it,), val)
        if trajectory:
            prev = trajectory[-1]
            change = abs(val - prev) / max(abs(prev), 1e-300) if val != prev else 0.0
            streak = streak + 1 if change < rel_tol else 0
        trajectory.append(val)
        if streak >= 3:
            break
    _locate_nonfinite(U, S)
    return U, S, trajectory, it, streak >= 3


def _check_kkt(T: np.ndarray, f: FactorPair) -> None:
    U, S = f.U, f.S
    Q = T.T @ U @ S
    P = S.T @ (U.T @ U) @ S
    lam = U.T @ Q - P
    worst = float((lam + pos_part(P)).min())
    if worst < -1e-8 * max(1.0, float(np.abs(lam).max())):
        log.warning("adaptive regularizer violates Lambda + P+ >= 0 (min entry %.3e)", worst)


def solve(T: np.ndarray, cfg: SolverConfig, U0: Optional[np.ndarray] = None,
          S0: Optional[np.ndarray] = None) -> SolveResult:
    """Iterate the configured scheme until the objective settles.

    Stops when the relative change of the objective stays below
    ``cfg.rel_tol`` for three consecutive iterations, or after
    ``cfg.max_iters``.  ``U0``/``S0`` override the configured initialization.
    """
    T = np.asarray(T, dtype=float)
    if T.ndim != 2 or T.shape[0] != T.shape[1]:
        raise ValueError(f"T must be square, got {T.shape}")
    if np.abs(T + T.T).max(initial=0.0) > 1e-12 * max(1.0, np.abs(T).max(initial=0.0)):
        raise ValueError("T must be skew-symmetric")
    n, k = T.shape[0], cfg.k
    if k > n:
        raise ValueError(f"k={k} exceeds vertex count n={n}")

    fallback = False
    if U0 is None:
        if cfg.init == "nndsvd":
            U0, fallback = nndsvd_init(T, k, cfg.seed)
        else:
            U0 = random_init(n, k, cfg.seed)
    U0 = np.asarray(U0, dtype=float)
    if S0 is None:
        S0 = orient_relations(init_S(k), U0, T)

    if not np.any(T):
        f = FactorPair(U0, np.zeros((k, k)))
        return SolveResult(f, [0.0], 1, True, 0.0, degenerate=True, init_fallback=fallback)

    FactorPair(U0, S0)  # validates the starting point
    T_sq = frobenius_sq(T)
    if cfg.scheme == "fixed":
        Lambda = cfg.regularizer()
        step = lambda U, S, c: _fixed_arrays(T, U, S, Lambda, cache=c)  # noqa: E731
        objective = _fixed_objective(T, T_sq, Lambda)
    else:
        step = lambda U, S, c: _adaptive_arrays(T, U, S, cache=c)  # noqa: E731
        objective = _adaptive_objective(T_sq)

    U, S, trajectory, iters, converged = iterate(step, objective, U0, S0, cfg.max_iters, cfg.rel_tol)
    f = FactorPair(U, S)
    if cfg.scheme == "adaptive" and converged:
        _check_kkt(T, f)
    return SolveResult(f, trajectory, iters, converged, objective_residual(T, f), init_fallback=fallback)


def harden(f: FactorPair, eps_assign: float = 1e-6, rel_threshold: float = 1e-6) -> Summarization:
    """Row-wise argmax of ``U`` (lowest column wins ties); relations from ``S > 0``."""
    if eps_assign < 0:
        raise ValueError("eps_assign must be non-negative")
    U, S = f.U, f.S
    k = f.k
    labels = np.argmax(U, axis=1) if U.shape[0] else np.zeros(0, dtype=int)
    peak = U.max(axis=1) if U.shape[0] else np.zeros(0)
    labels = np.where(peak > eps_assign, labels, -1)
    relations = []
    top = np.abs(S).max()
    if top > 0:
        thr = rel_threshold * top
        for I in range(k):
            for J in range(k):
                if I != J and S[I, J] > thr:
                    relations.append((I, J, float(S[I, J])))
    return Summarization(k, labels, tuple(relations))


def summarize_partition(g: DirectedGraph, assignment: Sequence[int], k: int) -> Summarization:
    """Summarization of a given partition with relations from block means of ``T``.

    For each pair of compressed nodes the relation points along the sign of
    the mean skew adjacency over the block, weighted by its magnitude.
    """
    A = to_asymmetric(g)
    T = A - A.T
    a = np.asarray(assignment, dtype=int)
    groups = [np.flatnonzero(a == I) for I in range(k)]
    rels = []
    for I in range(k):
        for J in range(I + 1, k):
            if groups[I].size == 0 or groups[J].size == 0:
                continue
            m = float(T[np.ix_(groups[I], groups[J])].mean())
            if m > 0:
                rels.append((I, J, m))
            elif m < 0:
                rels.append((J, I, -m))
    return Summarization(k, a, tuple(rels))


def discrete_errors(g: DirectedGraph, s: Summarization) -> tuple[float, float]:
    """Weighted and direction reconstruction errors of a hard summarization.

    ``err_w`` sums, over all ordered pairs of compressed nodes ``(I, J)``, the
    size-normalized squared deviation of ``A`` from its block mean over
    ``C_I x C_J``.  ``err_d`` counts ordered cross-group vertex pairs whose
    sign in ``T`` differs from the sign of the relation between their groups
    (an absent relation has sign 0, which never matches an edge).
    Unassigned vertices are ignored.
    """
    a = s.assignment
    if a.shape[0] != g.n:
        raise ValueError(f"assignment has {a.shape[0]} entries for {g.n} vertices")
    groups = s.groups()
    empty = [I for I, grp in enumerate(groups) if grp.size == 0]
    if empty:
        raise ValueError(f"compressed node(s) {empty} are empty")
    A = to_asymmetric(g)
    T = A - A.T
    R = np.zeros((s.k, s.k))
    for I, J, w in s.relations:
        R[I, J] = np.sign(w)
        R[J, I] = -np.sign(w)
    err_w = 0.0
    err_d = 0
    for I, ci in enumerate(groups):
        for J, cj in enumerate(groups):
            block = A[np.ix_(ci, cj)]
            err_w += float(np.mean((block - block.mean()) ** 2))
            if I != J:
                err_d += int(np.count_nonzero(np.sign(T[np.ix_(ci, cj)]) != R[I, J]))
    return err_w, float(err_d)


def result_to_dict(cfg: SolverConfig, result: SolveResult, summary: Summarization) -> dict:
    return {
        "k": cfg.k,
        "scheme": cfg.scheme,
        "iters": result.iters,
        "converged": result.converged,
        "objective_trajectory": [float(x) for x in result.trajectory],
        "assignment": [int(x) for x in summary.assignment],
        "relations": [[i, j, w] for i, j, w in summary.relations],
        "residual": float(result.residual),
        "degenerate": result.degenerate,
        "init_fallback": result.init_fallback,
    }
