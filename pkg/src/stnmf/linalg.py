"""Dense matrix helpers: positive/negative parts, norms and a truncated SVD."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "SvdTriplet",
    "SvdConvergenceError",
    "pos_part",
    "neg_part",
    "frobenius_sq",
    "truncated_svd",
]

SVD_MAX_ITERS = 10_000
SVD_TOL = 1e-12
# up to this many columns the block spans the whole row space and a single
# Rayleigh-Ritz sweep is exact; beyond it the block has 2k+4 columns
FULL_BLOCK_COLS = 128


class SvdConvergenceError(RuntimeError):
    def __init__(self, residual: float, iters: int):
        self.residual = residual
        self.iters = iters
        super().__init__(f"subspace iteration did not converge in {iters} sweeps (residual {residual:.3e})")


@dataclass(frozen=True)
class SvdTriplet:
    u: np.ndarray
    sigma: float
    v: np.ndarray


def pos_part(M: np.ndarray) -> np.ndarray:
    return np.maximum(M, 0.0)


def neg_part(M: np.ndarray) -> np.ndarray:
    return np.maximum(-M, 0.0)


def frobenius_sq(M: np.ndarray) -> float:
    M = np.asarray(M, dtype=float)
    return float(np.sum(M * M))


def _sign_normalize(u: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    i = int(np.argmax(np.abs(u)))
    if u[i] < 0:
        return -u, -v
    return u, v


def truncated_svd(M: np.ndarray, k: int, seed: int = 0, tol: float = SVD_TOL,
                  max_iters: int = SVD_MAX_ITERS) -> list[SvdTriplet]:
    """Leading ``k`` singular triplets of ``M`` by block subspace iteration.

    The block iterates ``V <- orth(M^T M V)`` with a few extra columns beyond
    ``k``, or all columns when ``M`` has at most ``FULL_BLOCK_COLS`` of them.
    Each sweep a Rayleigh-Ritz step on ``M V`` extracts the current singular
    estimates.  Iteration stops once every returned triplet has
    ``||M^T u - sigma v|| <= tol * max(1, sigma_1)``.  Each ``u`` is flipped
    so its largest-magnitude entry is positive.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2:
        raise ValueError("expected a 2-D matrix")
    rows, cols = M.shape
    if not 1 <= k <= min(rows, cols):
        raise ValueError(f"k={k} must lie in [1, {min(rows, cols)}]")
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix has non-finite entries")

    p = cols if cols <= FULL_BLOCK_COLS else min(cols, 2 * k + 4)
    rng = np.random.default_rng(seed)
    V, _ = np.linalg.qr(rng.standard_normal((cols, p)))
    MT = M.T
    residual = np.inf
    for sweep in range(1, max_iters + 1):
        Z = M @ V
        Ub, s, Wt = np.linalg.svd(Z, full_matrices=False)
        W = Wt.T
        MtZ = MT @ Z
        U_k = Ub[:, :k]
        V_k = V @ W[:, :k]
        scale = max(1.0, float(s[0]))
        R = MT @ U_k - V_k * s[:k]
        residual = float(np.linalg.norm(R, axis=0).max()) / scale
        if residual <= tol:
            break
        V, _ = np.linalg.qr(MtZ)
    else:
        raise SvdConvergenceError(residual, max_iters)

    out = []
    for i in range(k):
        u, v = _sign_normalize(U_k[:, i].copy(), V_k[:, i].copy())
        v /= np.linalg.norm(v)
        out.append(SvdTriplet(u=u, sigma=float(s[i]), v=v))
    return out
