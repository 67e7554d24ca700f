"""Value dependency graphs: signed directed fuzzy graphs over requirements.

An edge ``(i, j)`` states that selecting requirement ``j`` influences the
value of requirement ``i``.  Each edge carries a quality (positive or
negative) and a strength in ``(0, 1]``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np


class PathError(ValueError):
    """Raised for a dependency path that is not a simple path of the graph."""


class Quality(enum.Enum):
    POSITIVE = "+"
    NEGATIVE = "-"
    NONSPECIFIED = "±"

    def __mul__(self, other: "Quality") -> "Quality":
        # qualitative serial inference; nonspecified absorbs
        if not isinstance(other, Quality):
            return NotImplemented
        if self is Quality.NONSPECIFIED or other is Quality.NONSPECIFIED:
            return Quality.NONSPECIFIED
        if self is other:
            return Quality.POSITIVE
        return Quality.NEGATIVE

    @classmethod
    def parse(cls, text: str) -> "Quality":
        aliases = {"+": cls.POSITIVE, "-": cls.NEGATIVE, "±": cls.NONSPECIFIED,
                   "+-": cls.NONSPECIFIED}
        try:
            return aliases[text.strip()]
        except KeyError:
            raise ValueError(f"unknown quality {text!r}") from None


@dataclass(frozen=True)
class Edge:
    quality: Quality
    strength: float

    def __post_init__(self):
        if self.quality is Quality.NONSPECIFIED:
            raise ValueError("explicit edges must be positive or negative")
        if not 0.0 < self.strength <= 1.0:
            raise ValueError(f"edge strength must lie in (0, 1], got {self.strength}")


@dataclass(frozen=True)
class ValueDependencyGraph:
    """Immutable VDG on nodes ``0..n-1``.

    ``edges`` maps an ordered pair ``(i, j)`` to its :class:`Edge`.  Absent
    pairs have strength 0 and a nonspecified quality.
    """

    n: int
    edges: Mapping[tuple[int, int], Edge] = field(default_factory=dict)

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("node count must be non-negative")
        checked = {}
        for (i, j), edge in self.edges.items():
            i, j = int(i), int(j)
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise ValueError(f"edge ({i}, {j}) out of range for n={self.n}")
            if i == j:
                raise ValueError(f"self-edge on node {i}")
            if not isinstance(edge, Edge):
                edge = Edge(*edge)
            checked[(i, j)] = edge
        object.__setattr__(self, "edges", checked)

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple]) -> "ValueDependencyGraph":
        """Build from ``(i, j, quality, strength)`` tuples; parallel edges are rejected."""
        table: dict[tuple[int, int], Edge] = {}
        for i, j, quality, strength in edges:
            if isinstance(quality, str):
                quality = Quality.parse(quality)
            key = (int(i), int(j))
            if key in table:
                raise ValueError(f"duplicate edge {key}")
            table[key] = Edge(quality, float(strength))
        return cls(n, table)

    def strength(self, i: int, j: int) -> float:
        edge = self.edges.get((i, j))
        return 0.0 if edge is None else edge.strength

    def quality(self, i: int, j: int) -> Quality:
        edge = self.edges.get((i, j))
        return Quality.NONSPECIFIED if edge is None else edge.quality

    def edge_list(self) -> list[tuple[int, int, Quality, float]]:
        return [(i, j, e.quality, e.strength) for (i, j), e in sorted(self.edges.items())]

    def with_edges(self, updates: Mapping[tuple[int, int], Edge]) -> "ValueDependencyGraph":
        merged = dict(self.edges)
        merged.update(updates)
        return ValueDependencyGraph(self.n, merged)

    def signed_matrices(self) -> tuple[np.ndarray, np.ndarray]:
        """Dense explicit strengths split by quality: ``(positive, negative)``."""
        pos = np.zeros((self.n, self.n))
        neg = np.zeros((self.n, self.n))
        for (i, j), e in self.edges.items():
            (pos if e.quality is Quality.POSITIVE else neg)[i, j] = e.strength
        return pos, neg


@dataclass(frozen=True)
class InfluenceMatrix:
    rho_pos: np.ndarray
    rho_neg: np.ndarray
    influence: np.ndarray

    @classmethod
    def from_influence(cls, influence) -> "InfluenceMatrix":
        """Wrap a bare overall-influence matrix (e.g. read from CSV)."""
        infl = np.array(influence, dtype=float)
        if infl.ndim != 2 or infl.shape[0] != infl.shape[1]:
            raise ValueError("influence matrix must be square")
        if np.any(np.abs(infl) > 1.0):
            raise ValueError("influence entries must lie in [-1, 1]")
        return cls(np.clip(infl, 0.0, None), np.clip(-infl, 0.0, None), infl)

    @property
    def n(self) -> int:
        return self.influence.shape[0]


def _check_path(path: Sequence[int], g: ValueDependencyGraph) -> list[Edge]:
    if len(path) < 2:
        raise PathError("a dependency path needs at least one edge")
    if len(set(path)) != len(path):
        raise PathError(f"path {tuple(path)} repeats a node")
    edges = []
    for a, b in zip(path, path[1:]):
        edge = g.edges.get((a, b))
        if edge is None:
            raise PathError(f"no edge ({a}, {b}) in graph")
        edges.append(edge)
    return edges


def path_strength(path: Sequence[int], g: ValueDependencyGraph) -> float:
    """Strength of the weakest edge along ``path``."""
    return min(e.strength for e in _check_path(path, g))


def path_quality(path: Sequence[int], g: ValueDependencyGraph) -> Quality:
    edges = _check_path(path, g)
    q = edges[0].quality
    for e in edges[1:]:
        q = q * e.quality
    return q


def _relax_sweep(pos: np.ndarray, neg: np.ndarray) -> bool:
    n = pos.shape[0]
    changed = False
    for k in range(n):
        pk_col, nk_col = pos[:, k].copy(), neg[:, k].copy()
        pk_row, nk_row = pos[k, :].copy(), neg[k, :].copy()
        via_pp = np.minimum.outer(pk_col, pk_row)
        via_nn = np.minimum.outer(nk_col, nk_row)
        via_pn = np.minimum.outer(pk_col, nk_row)
        via_np = np.minimum.outer(nk_col, pk_row)
        new_pos = np.maximum(pos, np.maximum(via_pp, via_nn))
        new_neg = np.maximum(neg, np.maximum(via_pn, via_np))
        if not changed and (np.any(new_pos > pos) or np.any(new_neg > neg)):
            changed = True
        pos[:] = new_pos
        neg[:] = new_neg
    return changed


def propagate(g: ValueDependencyGraph) -> InfluenceMatrix:
    """All-pairs strongest positive/negative dependency strengths and overall influence.

    Runs the four-case max-min Floyd-Warshall relaxation (positive via
    ``++`` and ``--``, negative via ``+-`` and ``-+``).  Entries start at 0
    rather than minus infinity: every real strength is positive and updates
    use a strict comparison, so the two initialisations agree after the
    final clamp.  The diagonal is relaxed like any other entry, which lets a
    sign-flipping cycle through ``k`` feed later pairs; sweeps repeat until
    nothing changes, giving the least fixed point.  The reported diagonal
    is zero.
    """
    pos, neg = g.signed_matrices()
    while _relax_sweep(pos, neg):
        pass
    np.fill_diagonal(pos, 0.0)
    np.fill_diagonal(neg, 0.0)
    return InfluenceMatrix(pos, neg, pos - neg)


def influence(m: InfluenceMatrix, i: int, j: int) -> float:
    n = m.n
    if not (0 <= i < n and 0 <= j < n):
        raise IndexError(f"index ({i}, {j}) out of range for n={n}")
    return float(m.rho_pos[i, j] - m.rho_neg[i, j])


def vdl(g: ValueDependencyGraph) -> float:
    """Fraction of the ``n(n-1)`` ordered pairs carrying an explicit edge."""
    if g.n < 2:
        raise ValueError("VDL needs at least two requirements")
    return len(g.edges) / (g.n * (g.n - 1))


def nvdl(g: ValueDependencyGraph) -> float:
    """Fraction of explicit edges that are negative."""
    k = len(g.edges)
    if k == 0:
        raise ValueError("NVDL is undefined on a graph without edges")
    m = sum(1 for e in g.edges.values() if e.quality is Quality.NEGATIVE)
    return m / k
