"""Ground-truth directed block graphs with background and direction noise.

A noiseless graph has every edge between two groups pointing the same way
and no edges inside a group.  Noise is measured by two ratios:

* background ``gamma_b``: weight of edges outside the pattern blocks over
  the weight inside them;
* direction ``gamma_d``: weight of pattern edges pointing against their
  block's direction over the weight pointing along it.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Union

import numpy as np
from scipy.sparse.csgraph import connected_components

from .graph import DirectedGraph, read_edge_list, write_edge_list

__all__ = [
    "DipsSpec",
    "NoiseConfig",
    "LabeledGraph",
    "NoiseUnreachableError",
    "PATTERNS",
    "chain_pattern",
    "banded_pattern",
    "transitive_pattern",
    "named_pattern",
    "parse_pattern",
    "pattern_from_pairs",
    "staggered_sizes",
    "generate_dips",
    "add_noise",
    "measure_noise",
    "save_labeled",
    "load_labeled",
    "sidecar_path",
]

MAX_BLOCK_ATTEMPTS = 1000


class NoiseUnreachableError(ValueError):
    def __init__(self, requested: float, attainable: float):
        self.requested = requested
        self.attainable = attainable
        super().__init__(
            f"background noise ratio {requested} unreachable; at most {attainable:.6g} is attainable"
        )


def chain_pattern(k: int) -> tuple[tuple[int, ...], ...]:
    """``0 -> 1 -> ... -> k-1``."""
    return pattern_from_pairs(k, [(i, i + 1) for i in range(k - 1)])


def banded_pattern(k: int, width: int = 2) -> tuple[tuple[int, ...], ...]:
    """``I -> J`` whenever ``1 <= J - I <= width``."""
    return pattern_from_pairs(k, [(i, j) for i in range(k) for j in range(i + 1, min(k, i + width + 1))])


def transitive_pattern(k: int) -> tuple[tuple[int, ...], ...]:
    """``I -> J`` for every ``I < J``; leaves no unrelated group pairs."""
    return banded_pattern(k, k)


PATTERNS = {"chain": chain_pattern, "banded": banded_pattern, "transitive": transitive_pattern}


def named_pattern(name: str, k: int) -> tuple[tuple[int, ...], ...]:
    try:
        return PATTERNS[name](k)
    except KeyError:
        raise ValueError(f"unknown pattern {name!r}; choose from {sorted(PATTERNS)}") from None


def parse_pattern(text: str, k: int) -> tuple[tuple[int, ...], ...]:
    """A pattern name or comma-separated ``I:J`` pairs, e.g. ``0:1,1:2``."""
    text = text.strip()
    if text in PATTERNS:
        return named_pattern(text, k)
    pairs = []
    for item in text.split(","):
        try:
            i, j = item.split(":")
            pairs.append((int(i), int(j)))
        except ValueError:
            raise ValueError(f"bad relation {item!r}; expected I:J") from None
    return pattern_from_pairs(k, pairs)


def pattern_from_pairs(k: int, pairs: Iterable[tuple[int, int]]) -> tuple[tuple[int, ...], ...]:
    P = np.zeros((k, k), dtype=int)
    for i, j in pairs:
        if not (0 <= i < k and 0 <= j < k):
            raise ValueError(f"relation {i}->{j} out of range for k={k}")
        if i == j:
            raise ValueError(f"self-relation {i}->{j}")
        if P[j, i]:
            raise ValueError(f"relations {i}->{j} and {j}->{i} both given")
        P[i, j] = 1
    return tuple(tuple(int(x) for x in row) for row in P)


def staggered_sizes(n: int, k: int) -> list[int]:
    """Split ``n`` into ``k`` group sizes proportional to ``k, k+1, ..., 2k-1``.

    Unequal sizes keep the leading singular values of chained all-ones
    blocks distinct.  Rounding uses largest remainders.
    """
    if k < 1 or n < k:
        raise ValueError(f"cannot split n={n} into k={k} non-empty groups")
    w = np.arange(k, 2 * k, dtype=float)
    raw = n * w / w.sum()
    sizes = np.floor(raw).astype(int)
    for i in np.argsort(-(raw - sizes), kind="stable")[: n - sizes.sum()]:
        sizes[i] += 1
    if np.any(sizes < 1):
        raise ValueError(f"cannot split n={n} into k={k} non-empty groups")
    return [int(x) for x in sizes]


@dataclass(frozen=True)
class DipsSpec:
    group_sizes: tuple[int, ...]
    relation_pattern: tuple[tuple[int, ...], ...]
    edge_weight: float = 1.0
    block_density: float = 1.0

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.group_sizes)
        if not sizes or any(s < 1 for s in sizes):
            raise ValueError("group sizes must be positive")
        k = len(sizes)
        P = np.asarray(self.relation_pattern, dtype=float)
        if P.shape != (k, k):
            raise ValueError(f"relation pattern must be {k}x{k}")
        if np.any(np.diag(P) != 0):
            raise ValueError("relation pattern must have a zero diagonal")
        if np.any((P != 0) & (P.T != 0)):
            raise ValueError("relation pattern must not contain both I->J and J->I")
        if not (self.edge_weight > 0 and math.isfinite(self.edge_weight)):
            raise ValueError("edge weight must be positive")
        if not 0 < self.block_density <= 1:
            raise ValueError("block density must lie in (0, 1]")
        object.__setattr__(self, "group_sizes", sizes)
        object.__setattr__(self, "relation_pattern", tuple(tuple(int(x != 0) for x in row) for row in P))

    @property
    def k(self) -> int:
        return len(self.group_sizes)

    @property
    def n(self) -> int:
        return sum(self.group_sizes)

    def pattern(self) -> np.ndarray:
        return np.array(self.relation_pattern, dtype=bool)

    def labels(self) -> np.ndarray:
        return np.repeat(np.arange(self.k), self.group_sizes)

    def to_dict(self) -> dict:
        return {
            "group_sizes": list(self.group_sizes),
            "relation_pattern": [list(r) for r in self.relation_pattern],
            "edge_weight": self.edge_weight,
            "block_density": self.block_density,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DipsSpec":
        return cls(
            tuple(d["group_sizes"]),
            tuple(tuple(r) for r in d["relation_pattern"]),
            float(d.get("edge_weight", 1.0)),
            float(d.get("block_density", 1.0)),
        )


@dataclass(frozen=True)
class NoiseConfig:
    gamma_b: float = 0.0
    gamma_d: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not self.gamma_b >= 0:
            raise ValueError("gamma_b must be non-negative")
        if not 0 <= self.gamma_d < 0.5:
            raise ValueError("gamma_d must lie in [0, 0.5)")


@dataclass(frozen=True)
class LabeledGraph:
    graph: DirectedGraph
    truth: tuple[int, ...]
    spec: DipsSpec
    noise: NoiseConfig = field(default_factory=NoiseConfig)

    def __post_init__(self):
        truth = tuple(int(t) for t in self.truth)
        if len(truth) != self.graph.n:
            raise ValueError("truth labels must cover every vertex")
        if any(not 0 <= t < self.spec.k for t in truth):
            raise ValueError("truth labels out of range")
        object.__setattr__(self, "truth", truth)


def _block_ok(block: np.ndarray) -> bool:
    a, b = block.shape
    adj = np.zeros((a + b, a + b))
    adj[:a, a:] = block
    ncomp, _ = connected_components(adj, directed=False)
    if ncomp != 1:
        return False
    if min(a, b) == 1:
        return True
    s = np.linalg.svd(block, compute_uv=False)
    return s[0] - s[1] > 1e-9 * s[0]


def generate_dips(spec: DipsSpec, seed: int) -> LabeledGraph:
    """Exact block graph: each pattern block ``I -> J`` gets edges ``i -> j``
    independently with probability ``block_density``.

    Blocks whose bipartite skeleton is disconnected or whose leading
    singular value is repeated are redrawn.
    """
    rng = np.random.default_rng(seed)
    offsets = np.concatenate([[0], np.cumsum(spec.group_sizes)])
    P = spec.pattern()
    A = np.zeros((spec.n, spec.n))
    for I, J in zip(*np.nonzero(P)):
        a, b = spec.group_sizes[I], spec.group_sizes[J]
        if spec.block_density >= 1:
            block = np.ones((a, b))
        else:
            for _ in range(MAX_BLOCK_ATTEMPTS):
                block = (rng.random((a, b)) < spec.block_density).astype(float)
                if _block_ok(block):
                    break
            else:
                raise ValueError(
                    f"could not draw a connected block {I}->{J} at density {spec.block_density}"
                )
        A[offsets[I]:offsets[I + 1], offsets[J]:offsets[J + 1]] = block * spec.edge_weight
    g = DirectedGraph.from_matrix(A)
    return LabeledGraph(g, tuple(spec.labels()), spec, NoiseConfig(0.0, 0.0, seed))


def _first_reaching(target: float, ratio) -> int:
    """Smallest ``m`` with ``ratio(m) >= target`` for increasing ``ratio``."""
    m = 0
    while ratio(m) < target:
        m += 1
    return m


def add_noise(lg: LabeledGraph, noise: NoiseConfig) -> LabeledGraph:
    """Inject direction noise (edge flips) and then background noise.

    Direction noise reverses uniformly chosen pattern edges until the
    reversed weight over the remaining forward weight first reaches
    ``gamma_d``.  Background noise adds unit-weight edges with random
    direction on free vertex pairs (same group, or groups with no relation)
    until the added weight over the pattern weight first reaches ``gamma_b``.
    """
    rng = np.random.default_rng(noise.seed)
    n = lg.graph.n
    t = np.asarray(lg.truth)
    P = lg.spec.pattern()
    edges = sorted(lg.graph.edges)

    if noise.gamma_d > 0 and edges:
        order = rng.permutation(len(edges))
        weights = np.array([edges[i][2] for i in order])
        total = float(sum(w for _, _, w in edges))
        flipped_cum = np.concatenate([[0.0], np.cumsum(weights)])

        def ratio_d(m):
            if m > len(order):
                return math.inf
            back = float(flipped_cum[m])
            fwd = total - back
            return math.inf if fwd <= 0 else back / fwd

        m = _first_reaching(noise.gamma_d, ratio_d)
        flip = set(int(i) for i in order[:m])
        edges = [(d, s, w) if i in flip else (s, d, w) for i, (s, d, w) in enumerate(edges)]

    if noise.gamma_b > 0:
        pattern_w = float(sum(w for _, _, w in edges))
        if pattern_w <= 0:
            raise NoiseUnreachableError(noise.gamma_b, 0.0)
        occupied = np.zeros((n, n), dtype=bool)
        for s, d, _ in edges:
            occupied[s, d] = occupied[d, s] = True
        iu, ju = np.triu_indices(n, 1)
        related = P[t[iu], t[ju]] | P[t[ju], t[iu]]
        free = ~related & ~occupied[iu, ju]
        fi, fj = iu[free], ju[free]
        attainable = len(fi) / pattern_w
        m = _first_reaching(noise.gamma_b, lambda m: m / pattern_w if m <= len(fi) else math.inf)
        if m > len(fi):
            raise NoiseUnreachableError(noise.gamma_b, attainable)
        pick = rng.permutation(len(fi))[:m]
        forward = rng.random(m) < 0.5
        for p, fw in zip(pick, forward):
            i, j = int(fi[p]), int(fj[p])
            edges.append((i, j, 1.0) if fw else (j, i, 1.0))

    g = DirectedGraph(n, tuple(edges)).canonical()
    return LabeledGraph(g, lg.truth, lg.spec, noise)


def measure_noise(lg: LabeledGraph) -> tuple[float, float]:
    """``(gamma_b, gamma_d)`` recomputed from the graph and ground truth."""
    t = lg.truth
    P = lg.spec.pattern()
    fwd = back = off = 0.0
    for s, d, w in sorted(lg.graph.edges):
        I, J = t[s], t[d]
        if P[I, J]:
            fwd += w
        elif P[J, I]:
            back += w
        else:
            off += w
    if fwd + back == 0:
        raise ValueError("graph has no weight inside the pattern blocks")
    gamma_d = back / fwd if fwd > 0 else math.inf
    return off / (fwd + back), gamma_d


def sidecar_path(path: Union[str, Path]) -> Path:
    path = Path(path)
    return path.with_name(path.stem + ".truth.json")


def save_labeled(lg: LabeledGraph, path: Union[str, Path]) -> Path:
    """Write the edge list to ``path`` and the ground truth next to it."""
    write_edge_list(lg.graph, path)
    side = sidecar_path(path)
    payload = {
        "truth": list(lg.truth),
        "spec": lg.spec.to_dict(),
        "noise": asdict(lg.noise),
        "measured": list(measure_noise(lg)),
    }
    side.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    return side


def load_labeled(path: Union[str, Path]) -> LabeledGraph:
    g = read_edge_list(path)
    meta = json.loads(sidecar_path(path).read_text(encoding="utf-8"))
    noise = NoiseConfig(**meta.get("noise", {}))
    return LabeledGraph(g, tuple(meta["truth"]), DipsSpec.from_dict(meta["spec"]), noise)
