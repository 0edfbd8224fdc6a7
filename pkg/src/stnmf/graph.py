"""Directed graph container, adjacency matrices and the edge-list text format.

Edge-list format: one edge per line, ``src dst [weight]`` separated by
whitespace, weight defaulting to 1.0.  Lines starting with ``#`` are
comments, except for an optional ``# n=<int>`` header that fixes the vertex
count (needed when trailing vertices are isolated).
"""
from __future__ import annotations

import io
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterable, Union

import numpy as np

__all__ = [
    "DirectedGraph",
    "EdgeListError",
    "load_edge_list",
    "read_edge_list",
    "dump_edge_list",
    "write_edge_list",
    "to_asymmetric",
    "to_skew",
    "symmetrize",
]

_HEADER = re.compile(r"^#\s*n\s*=\s*(\d+)\s*$")


class EdgeListError(ValueError):
    """Raised for malformed edge lists; carries the 1-based line number."""

    def __init__(self, message: str, lineno: int | None = None, source: str | None = None):
        self.lineno = lineno
        self.source = source
        where = ""
        if source is not None:
            where += f"{source}:"
        if lineno is not None:
            where += f"line {lineno}: "
        elif where:
            where += " "
        super().__init__(where + message)


@dataclass(frozen=True)
class DirectedGraph:
    """Simple weighted directed graph on vertices ``0..n-1``.

    ``edges`` holds ``(src, dst, weight)`` triples.  The constructor checks
    that the graph is simple: no self-loops, at most one edge per unordered
    pair, strictly positive finite weights.
    """

    n: int
    edges: tuple[tuple[int, int, float], ...] = ()

    def __post_init__(self):
        if self.n < 0:
            raise ValueError(f"vertex count must be non-negative, got {self.n}")
        edges = tuple((int(s), int(d), float(w)) for s, d, w in self.edges)
        seen = set()
        for s, d, w in edges:
            _check_edge(s, d, w, self.n)
            pair = (s, d) if s < d else (d, s)
            if pair in seen:
                raise ValueError(f"duplicate vertex pair {pair[0]}-{pair[1]}")
            seen.add(pair)
        object.__setattr__(self, "edges", edges)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def canonical(self) -> "DirectedGraph":
        return DirectedGraph(self.n, tuple(sorted(self.edges)))

    @classmethod
    def from_matrix(cls, A: np.ndarray) -> "DirectedGraph":
        """Build a graph from a non-negative asymmetric adjacency matrix."""
        A = np.asarray(A, dtype=float)
        src, dst = np.nonzero(A)
        return cls(A.shape[0], tuple((int(i), int(j), float(A[i, j])) for i, j in zip(src, dst)))


def _check_edge(s: int, d: int, w: float, n: int) -> None:
    if not (0 <= s < n and 0 <= d < n):
        raise ValueError(f"edge {s}->{d} out of range for n={n}")
    if s == d:
        raise ValueError(f"self-loop at vertex {s}")
    if not math.isfinite(w):
        raise ValueError(f"non-finite weight on edge {s}->{d}")
    if w < 0:
        raise ValueError(f"negative weight {w!r} on edge {s}->{d}")
    if w == 0:
        raise ValueError(f"zero weight on edge {s}->{d}")


def _parse_lines(lines: Iterable[str], source: str | None) -> DirectedGraph:
    declared_n = None
    edges = []
    seen: dict[tuple[int, int], int] = {}
    max_id = -1
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            m = _HEADER.match(line)
            if m:
                declared_n = int(m.group(1))
            continue
        parts = line.split()
        if len(parts) not in (2, 3):
            raise EdgeListError(f"expected 'src dst [weight]', got {line!r}", lineno, source)
        try:
            s, d = int(parts[0]), int(parts[1])
            w = float(parts[2]) if len(parts) == 3 else 1.0
        except ValueError:
            raise EdgeListError(f"cannot parse {line!r}", lineno, source) from None
        if s < 0 or d < 0:
            raise EdgeListError("negative vertex id", lineno, source)
        if s == d:
            raise EdgeListError(f"self-loop at vertex {s}", lineno, source)
        if not math.isfinite(w):
            raise EdgeListError(f"non-finite weight {parts[2]!r}", lineno, source)
        if w < 0:
            raise EdgeListError(f"negative weight {w!r}", lineno, source)
        if w == 0:
            raise EdgeListError("zero weight", lineno, source)
        pair = (s, d) if s < d else (d, s)
        if pair in seen:
            raise EdgeListError(
                f"duplicate pair {pair[0]}-{pair[1]} (first seen on line {seen[pair]})", lineno, source
            )
        seen[pair] = lineno
        max_id = max(max_id, s, d)
        edges.append((s, d, w))
    n = max_id + 1
    if declared_n is not None:
        if declared_n < n:
            raise EdgeListError(f"header n={declared_n} but vertex id {max_id} present", None, source)
        n = declared_n
    return DirectedGraph(n, tuple(edges))


def load_edge_list(source: Union[IO[bytes], IO[str]], name: str | None = None) -> DirectedGraph:
    """Parse an edge list from a binary (UTF-8) or text stream."""
    data = source.read()
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise EdgeListError(f"not UTF-8 text ({exc})", None, name) from None
    return _parse_lines(io.StringIO(data), name)


def read_edge_list(path: Union[str, Path]) -> DirectedGraph:
    path = Path(path)
    with path.open("rb") as fh:
        return load_edge_list(fh, name=str(path))


def dump_edge_list(g: DirectedGraph) -> str:
    """Canonical serialization: ``# n=`` header, edges sorted by (src, dst)."""
    out = [f"# n={g.n}"]
    for s, d, w in sorted(g.edges):
        out.append(f"{s} {d} {w!r}")
    return "\n".join(out) + "\n"


def write_edge_list(g: DirectedGraph, path: Union[str, Path]) -> None:
    Path(path).write_text(dump_edge_list(g), encoding="utf-8")


def to_asymmetric(g: DirectedGraph) -> np.ndarray:
    """``A[i, j]`` = weight of edge i->j, zero elsewhere."""
    A = np.zeros((g.n, g.n))
    for s, d, w in g.edges:
        A[s, d] = w
    return A


def to_skew(g: DirectedGraph) -> np.ndarray:
    """Skew-symmetric adjacency ``T = A - A^T``."""
    A = to_asymmetric(g)
    return A - A.T


def symmetrize(g: DirectedGraph) -> np.ndarray:
    """Undirected skeleton ``W = |T|``."""
    return np.abs(to_skew(g))
