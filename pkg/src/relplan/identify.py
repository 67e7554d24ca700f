"""Identify explicit value dependencies from binary user-preference data.

The causal strength of ``r_j`` on ``r_i`` is the Eells measure
``p(r_i | r_j) - p(r_i | not r_j)``; its sign gives the edge quality and a
membership function of its magnitude gives the edge strength.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .vdg import Edge, Quality, ValueDependencyGraph


class DegenerateEstimateWarning(UserWarning):
    """A conditional probability was estimated from an empty conditioning class."""


@dataclass(frozen=True)
class PreferenceMatrix:
    """Users x requirements 0/1 observations (1 = the user prefers the requirement)."""

    cells: np.ndarray

    def __post_init__(self):
        cells = np.asarray(self.cells)
        if cells.ndim != 2:
            raise ValueError("preference matrix must be two-dimensional")
        if cells.shape[0] < 1 or cells.shape[1] < 1:
            raise ValueError("preference matrix needs at least one user and one requirement")
        if not np.isin(cells, (0, 1)).all():
            raise ValueError("preference cells must be 0 or 1")
        cells = cells.astype(np.int8)
        cells.setflags(write=False)
        object.__setattr__(self, "cells", cells)

    @property
    def users(self) -> int:
        return self.cells.shape[0]

    @property
    def n(self) -> int:
        return self.cells.shape[1]


@dataclass(frozen=True)
class MembershipFunction:
    """Maps a causal-strength magnitude in [0, 1] to an edge strength.

    ``identity`` returns its argument.  ``ramp`` is 0 below ``low``, 1 at or
    above ``high`` and linear in between.
    """

    kind: str = "identity"
    low: float = 0.16
    high: float = 0.83

    def __post_init__(self):
        if self.kind not in ("identity", "ramp"):
            raise ValueError(f"unknown membership kind {self.kind!r}")
        if self.kind == "ramp" and not 0.0 <= self.low < self.high <= 1.0:
            raise ValueError("ramp needs 0 <= low < high <= 1")

    def __call__(self, x: float) -> float:
        if self.kind == "identity":
            return float(x)
        if x < self.low:
            return 0.0
        if x >= self.high:
            return 1.0
        return (x - self.low) / (self.high - self.low)


def _conditionals(hits, totals, smoothing: float):
    """(hits + a) / (totals + 2a); empty classes with a == 0 give 0 and a mask."""
    hits = np.asarray(hits, dtype=float)
    totals = np.asarray(totals, dtype=float)
    denom = totals + 2.0 * smoothing
    empty = denom == 0
    with np.errstate(invalid="ignore", divide="ignore"):
        p = np.where(empty, 0.0, (hits + smoothing) / np.where(empty, 1.0, denom))
    return p, empty


def eells(prefs: PreferenceMatrix, i: int, j: int, smoothing: float = 0.0) -> float:
    """Eells causal strength of ``r_j`` on ``r_i``.

    Emits :class:`DegenerateEstimateWarning` when a conditioning class is
    empty and ``smoothing`` is 0; the affected term then counts as 0.
    """
    n = prefs.n
    if not (0 <= i < n and 0 <= j < n):
        raise IndexError(f"index ({i}, {j}) out of range for n={n}")
    if i == j:
        raise ValueError("Eells measure needs two distinct requirements")
    if smoothing < 0:
        raise ValueError("smoothing must be non-negative")
    ri = prefs.cells[:, i].astype(bool)
    rj = prefs.cells[:, j].astype(bool)
    (p_with, p_without), empty = _conditionals(
        [np.sum(ri & rj), np.sum(ri & ~rj)], [np.sum(rj), np.sum(~rj)], smoothing)
    if empty.any():
        warnings.warn(f"empty conditioning class for pair ({i}, {j}); term taken as 0",
                      DegenerateEstimateWarning, stacklevel=2)
    return float(p_with - p_without)


def eells_matrix(prefs: PreferenceMatrix, smoothing: float = 0.0) -> np.ndarray:
    """All-pairs Eells measures; entry ``[i, j]`` is the strength of ``r_j`` on ``r_i``.

    Uses one co-occurrence product, Theta(n^2 u).  The diagonal is 0.
    """
    if smoothing < 0:
        raise ValueError("smoothing must be non-negative")
    x = prefs.cells.astype(np.int64)
    u = x.shape[0]
    both = x.T @ x                   # both[i, j] = #users preferring r_i and r_j
    col = x.sum(axis=0)
    p_with, empty_with = _conditionals(both, np.broadcast_to(col, both.shape), smoothing)
    p_without, empty_without = _conditionals(
        col[:, None] - both, np.broadcast_to(u - col, both.shape), smoothing)
    eta = p_with - p_without
    np.fill_diagonal(eta, 0.0)
    degenerate = empty_with | empty_without
    np.fill_diagonal(degenerate, False)
    if degenerate.any():
        cols = sorted(set(np.nonzero(degenerate)[1].tolist()))
        warnings.warn(f"empty conditioning class for requirement columns {cols}; "
                      "affected terms taken as 0", DegenerateEstimateWarning, stacklevel=2)
    return eta


def quality_from_eells(eta: float) -> Quality:
    if not -1.0 <= eta <= 1.0:
        raise ValueError(f"Eells measure must lie in [-1, 1], got {eta}")
    if eta > 0:
        return Quality.POSITIVE
    if eta < 0:
        return Quality.NEGATIVE
    return Quality.NONSPECIFIED


def strength_from_eells(eta: float, f: MembershipFunction = MembershipFunction()) -> float:
    return f(abs(eta))


def build_vdg(prefs: PreferenceMatrix, f: MembershipFunction = MembershipFunction(),
              smoothing: float = 0.0) -> ValueDependencyGraph:
    """Edges ``(i, j)`` for every ordered pair whose mapped strength is positive."""
    if prefs.n < 2:
        raise ValueError("need at least two requirements to identify dependencies")
    eta = eells_matrix(prefs, smoothing)
    edges = {}
    for i in range(prefs.n):
        for j in range(prefs.n):
            if i == j:
                continue
            e = float(eta[i, j])
            s = strength_from_eells(e, f)
            if s > 0:
                edges[(i, j)] = Edge(quality_from_eells(e), min(s, 1.0))
    return ValueDependencyGraph(prefs.n, edges)


INTRINSIC_KINDS = {"requires": Quality.POSITIVE, "conflicts": Quality.NEGATIVE}


def merge_intrinsic(g: ValueDependencyGraph,
                    intrinsic: Iterable[tuple[int, int, str]]) -> ValueDependencyGraph:
    """Overlay full-strength ``requires`` (+) and ``conflicts`` (-) edges."""
    updates = {}
    for i, j, kind in intrinsic:
        if kind not in INTRINSIC_KINDS:
            raise ValueError(f"unknown intrinsic dependency kind {kind!r}")
        if not (0 <= i < g.n and 0 <= j < g.n) or i == j:
            raise ValueError(f"invalid intrinsic dependency ({i}, {j})")
        updates[(i, j)] = Edge(INTRINSIC_KINDS[kind], 1.0)
    return g.with_edges(updates)
