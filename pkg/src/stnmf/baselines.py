"""Comparison methods working on the undirected skeleton ``W = |T|``.

* ``spectral``: normalized-Laplacian embedding followed by k-means.
* ``undirected``: the same multiplicative factorization as the directed
  solver, with a symmetric relation factor fitted to ``W``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import frobenius_sq, truncated_svd
from .solver import (
    SolverConfig,
    _adaptive_arrays,
    _fixed_arrays,
    _fixed_objective,
    _residual_from_cache,
    iterate,
    nndsvd_init,
    random_init,
)

__all__ = ["BaselineResult", "DEGREE_FLOOR", "kmeans", "spectral_cluster", "undirected_summarize"]

DEGREE_FLOOR = 1e-12
KMEANS_RESTARTS = 100
KMEANS_MAX_ITER = 300
KMEANS_TOL = 1e-9
# distances and inertias this close (relative to the data scale) count as ties
TIE_TOL = 1e-9


@dataclass
class BaselineResult:
    method: str
    assignment: np.ndarray
    aux: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.method not in ("spectral", "undirected"):
            raise ValueError(f"unknown baseline {self.method!r}")
        self.assignment = np.asarray(self.assignment, dtype=int)

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "assignment": [int(x) for x in self.assignment],
            "aux": self.aux,
        }


def kmeans(X: np.ndarray, k: int, seed: int = 0, restarts: int = KMEANS_RESTARTS,
           max_iter: int = KMEANS_MAX_ITER, tol: float = KMEANS_TOL) -> tuple[np.ndarray, float]:
    """Lloyd's k-means from ``restarts`` k-means++ seedings, run as one batch.

    A restart stops once its inertia improves by at most ``tol`` relative to
    the current value.  Empty clusters keep their previous center.  Returns
    the labels and inertia of the best restart.

    Near-ties (within ``TIE_TOL`` times the largest squared row norm) go to
    the lowest center index when assigning points and to the lowest restart
    index when picking the result, so rounding-level perturbations of ``X``
    cannot flip points that sit on a symmetry plane of the data.
    """
    X = np.asarray(X, dtype=float)
    n, d = X.shape
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    rng = np.random.default_rng(seed)
    R = restarts
    rows = np.arange(R)
    slack = TIE_TOL * max(float((X * X).sum(axis=1).max()), np.finfo(float).tiny)

    centers = np.empty((R, k, d))
    centers[:, 0] = X[rng.integers(n, size=R)]
    closest = ((X[None, :, :] - centers[:, 0:1, :]) ** 2).sum(-1)
    for c in range(1, k):
        total = closest.sum(axis=1)
        cum = np.cumsum(closest, axis=1)
        draw = rng.random(R) * total
        pick = np.minimum((cum <= draw[:, None]).sum(axis=1), n - 1)
        # all mass on chosen points: fall back to a uniform draw
        uniform = rng.integers(n, size=R)
        pick = np.where(total > 0, pick, uniform)
        centers[:, c] = X[pick]
        closest = np.minimum(closest, ((X[None, :, :] - centers[:, c:c + 1, :]) ** 2).sum(-1))

    active = np.ones(R, dtype=bool)
    inertia = np.full(R, np.inf)
    labels = np.zeros((R, n), dtype=int)
    for _ in range(max_iter):
        dist = ((X[None, :, None, :] - centers[:, None, :, :]) ** 2).sum(-1)
        near = dist <= dist.min(axis=2, keepdims=True) + slack
        new_labels = near.argmax(axis=2)
        new_inertia = np.take_along_axis(dist, new_labels[:, :, None], axis=2)[:, :, 0].sum(axis=1)
        labels[active] = new_labels[active]
        done = active & (inertia - new_inertia <= tol * new_inertia)
        inertia[active] = new_inertia[active]
        active &= ~done
        if not active.any():
            break
        onehot = np.zeros((R, n, k))
        onehot[rows[:, None], np.arange(n)[None, :], new_labels] = 1.0
        counts = onehot.sum(axis=1)
        sums = np.einsum("rnk,nd->rkd", onehot, X)
        filled = counts > 0
        upd = active[:, None] & filled
        centers[upd] = sums[upd] / counts[upd][:, None]
    best = int(np.argmax(inertia <= inertia.min() + n * slack))
    return labels[best], float(inertia[best])


def _check_symmetric(W: np.ndarray, k: int) -> np.ndarray:
    W = np.asarray(W, dtype=float)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise ValueError(f"W must be square, got {W.shape}")
    if np.any(W != W.T):
        raise ValueError("W must be symmetric")
    if np.any(W < 0):
        raise ValueError("W must be non-negative")
    if k > W.shape[0]:
        raise ValueError(f"k={k} exceeds vertex count n={W.shape[0]}")
    return W


def spectral_cluster(W: np.ndarray, k: int, seed: int = 0) -> BaselineResult:
    """k-means on the row-normalized bottom-``k`` eigenvectors of ``L_sym``.

    The eigenvectors come from the top singular pairs of ``2I - L_sym``,
    which is symmetric positive semidefinite.  Vertices with zero degree get
    the floor ``DEGREE_FLOOR`` and land in an arbitrary cluster; their count
    is reported in ``aux``.
    """
    W = _check_symmetric(W, k)
    if np.any(np.diag(W) != 0):
        raise ValueError("W must have a zero diagonal")
    if k < 1:
        raise ValueError("k must be positive")
    n = W.shape[0]
    deg = W.sum(axis=1)
    isolated = int(np.count_nonzero(deg == 0))
    if k == n:
        return BaselineResult("spectral", np.arange(n), {"eigenvalues": [], "isolated": isolated})

    d = 1.0 / np.sqrt(np.maximum(deg, DEGREE_FLOOR))
    shifted = np.eye(n) + d[:, None] * W * d[None, :]
    trips = truncated_svd(shifted, k, seed)
    emb = np.column_stack([t.u for t in trips])
    norms = np.linalg.norm(emb, axis=1, keepdims=True)
    emb = emb / np.where(norms > 0, norms, 1.0)

    labels, inertia = kmeans(emb, k, seed)
    eig = [2.0 - t.sigma for t in trips]
    return BaselineResult("spectral", labels, {"eigenvalues": eig, "isolated": isolated,
                                               "inertia": inertia})


def _sym(X: np.ndarray) -> np.ndarray:
    return (X + X.T) / 2


def undirected_summarize(W: np.ndarray, k: int, cfg: SolverConfig) -> BaselineResult:
    """Fit ``W ~ U S U^T`` with ``U >= 0`` and symmetric ``S``, then argmax ``U``.

    Uses the update rules of ``cfg.scheme`` with ``S0`` all ones off the
    diagonal.  ``aux`` carries the residual, iteration count, convergence
    flag and the degenerate flag (set for ``W = 0``).
    """
    W = _check_symmetric(W, k)
    if k != cfg.k:
        raise ValueError(f"k={k} disagrees with cfg.k={cfg.k}")
    n = W.shape[0]
    if cfg.init == "nndsvd":
        U0, fallback = nndsvd_init(W, k, cfg.seed)
    else:
        U0, fallback = random_init(n, k, cfg.seed), False
    S0 = np.ones((k, k)) - np.eye(k)

    if not np.any(W):
        labels = np.argmax(U0, axis=1)
        aux = {"residual": 0.0, "iters": 1, "converged": True, "degenerate": True,
               "init_fallback": fallback}
        return BaselineResult("undirected", labels, aux)

    W_sq = frobenius_sq(W)
    if cfg.scheme == "fixed":
        Lambda = cfg.regularizer()
        step = lambda U, S, c: _fixed_arrays(W, U, S, Lambda, project=_sym, cache=c)  # noqa: E731
        objective = _fixed_objective(W, W_sq, Lambda)
    else:
        step = lambda U, S, c: _adaptive_arrays(W, U, S, project=_sym, cache=c)  # noqa: E731
        objective = lambda U, S, c: _residual_from_cache(W, W_sq, U, S, c)  # noqa: E731

    U, S, trajectory, iters, converged = iterate(step, objective, U0, S0, cfg.max_iters, cfg.rel_tol)
    aux = {
        "residual": frobenius_sq(W - U @ S @ U.T),
        "iters": iters,
        "converged": converged,
        "degenerate": False,
        "init_fallback": fallback,
        "S": S.tolist(),
    }
    return BaselineResult("undirected", np.argmax(U, axis=1), aux)
