"""Release planning models: value arithmetic and the BKP, BKP-PC and DA-SRP solvers."""

from __future__ import annotations

import enum
import heapq
import itertools
import math
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .vdg import InfluenceMatrix, Quality

EPS = 1e-12


class Model(enum.Enum):
    BKP = "bkp"
    BKP_PC = "bkp-pc"
    DA_SRP = "da-srp"


@dataclass(frozen=True)
class RequirementSet:
    cost: np.ndarray
    value: np.ndarray
    ids: tuple = ()

    def __post_init__(self):
        cost = np.asarray(self.cost, dtype=float)
        value = np.asarray(self.value, dtype=float)
        if cost.ndim != 1 or cost.shape != value.shape:
            raise ValueError("cost and value must be 1-d arrays of equal length")
        if np.any(cost < 0) or np.any(value < 0):
            raise ValueError("costs and values must be non-negative")
        ids = tuple(self.ids) or tuple(f"r{i + 1}" for i in range(len(cost)))
        if len(ids) != len(cost):
            raise ValueError("one id per requirement")
        object.__setattr__(self, "cost", cost)
        object.__setattr__(self, "value", value)
        object.__setattr__(self, "ids", ids)

    @property
    def n(self) -> int:
        return len(self.cost)


@dataclass(frozen=True)
class PlanProblem:
    reqs: RequirementSet
    infl: InfluenceMatrix
    budget: float
    model: Model = Model.DA_SRP
    # (j, k, quality) triples; only BKP-PC reads them
    bkp_pc_edges: tuple = ()

    def __post_init__(self):
        if self.infl.n != self.reqs.n:
            raise ValueError(f"influence matrix is {self.infl.n}x{self.infl.n} "
                             f"but there are {self.reqs.n} requirements")
        if not self.budget >= 0:
            raise ValueError("budget must be non-negative")
        if isinstance(self.model, str):
            object.__setattr__(self, "model", Model(self.model))


@dataclass
class SolverStats:
    nodes: int = 0
    wall_time: float = 0.0
    proven: bool = True
    method: str = ""


@dataclass
class PlanSolution:
    x: np.ndarray
    penalties: np.ndarray
    ov: float
    av: float
    feasible: bool
    stats: SolverStats = field(default_factory=SolverStats)

    @property
    def selected(self) -> list[int]:
        return [int(i) for i in np.flatnonzero(self.x)]

    def to_json(self, timing: bool = False) -> dict:
        """JSON document; wall time is left out unless ``timing`` so files stay reproducible."""
        stats = {"nodes": self.stats.nodes, "proven": self.stats.proven,
                 "method": self.stats.method}
        if timing:
            stats["wall_time"] = self.stats.wall_time
        return {
            "x": [int(v) for v in self.x],
            "penalties": [float(p) for p in self.penalties],
            "ov": float(self.ov),
            "av": float(self.av),
            "feasible": bool(self.feasible),
            "stats": stats,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "PlanSolution":
        st = doc.get("stats", {})
        return cls(np.array(doc["x"], dtype=np.int8), np.array(doc["penalties"], dtype=float),
                   float(doc["ov"]), float(doc["av"]), bool(doc["feasible"]),
                   SolverStats(int(st.get("nodes", 0)), float(st.get("wall_time", 0.0)),
                               bool(st.get("proven", True)), str(st.get("method", ""))))


# ---------------------------------------------------------------------------
# value arithmetic


def _influence_array(infl) -> np.ndarray:
    return infl.influence if isinstance(infl, InfluenceMatrix) else np.asarray(infl, dtype=float)


def penalty_terms(infl) -> tuple[np.ndarray, np.ndarray]:
    """Per-pair penalty contributions when ``r_j`` is ignored / selected.

    ``ignored[i, j]`` is the positive part of ``I[i, j]`` and ``selected[i, j]``
    the negative part; the diagonal is zero in both.
    """
    I = _influence_array(infl)
    ignored = (np.abs(I) + I) / 2.0
    selected = (np.abs(I) - I) / 2.0
    np.fill_diagonal(ignored, 0.0)
    np.fill_diagonal(selected, 0.0)
    return ignored, selected


def penalties(infl, x) -> np.ndarray:
    """Penalty of every requirement under selection ``x``."""
    I = _influence_array(infl)
    x = np.asarray(x)
    n = I.shape[0]
    if n == 0:
        return np.zeros(0)
    terms = (np.abs(I) + (1 - 2 * x)[None, :] * I) / 2.0
    np.fill_diagonal(terms, 0.0)
    return terms.max(axis=1)


def penalty(infl, x, i: int) -> float:
    """Supremum over ``j != i`` of ``(|I_ij| + (1 - 2 x_j) I_ij) / 2``."""
    I = _influence_array(infl)
    x = np.asarray(x)
    best = 0.0
    for j in range(I.shape[0]):
        if j != i:
            best = max(best, (abs(I[i, j]) + (1 - 2 * int(x[j])) * I[i, j]) / 2.0)
    return float(best)


def expected_value(reqs: RequirementSet, infl, x, i: int) -> float:
    return (1.0 - penalty(infl, x, i)) * float(reqs.value[i])


def overall_value(reqs: RequirementSet, infl, x) -> float:
    x = np.asarray(x)
    return float(np.sum(x * (1.0 - penalties(infl, x)) * reqs.value))


def accumulated_value(reqs: RequirementSet, x) -> float:
    return float(np.sum(np.asarray(x) * reqs.value))


def make_solution(problem: PlanProblem, x, stats: SolverStats) -> PlanSolution:
    """Package ``x`` with recomputed penalties, OV and AV."""
    x = np.asarray(x, dtype=np.int8)
    p = penalties(problem.infl, x)
    feasible = float(x @ problem.reqs.cost) <= problem.budget + 1e-9
    return PlanSolution(x, p, overall_value(problem.reqs, problem.infl, x),
                        accumulated_value(problem.reqs, x), feasible, stats)


# ---------------------------------------------------------------------------
# shared helpers


class _Deadline:
    def __init__(self, time_limit: float | None, node_limit: int | None):
        self.start = time.perf_counter()
        self.time_limit = time_limit
        self.node_limit = node_limit
        self.nodes = 0

    def tick(self) -> bool:
        """Count a node; True when a limit is hit."""
        self.nodes += 1
        if self.node_limit is not None and self.nodes > self.node_limit:
            return True
        if self.time_limit is not None:
            return time.perf_counter() - self.start > self.time_limit
        return False

    def elapsed(self) -> float:
        return time.perf_counter() - self.start


def _ratio_order(value: np.ndarray, cost: np.ndarray) -> list[int]:
    """Indices by decreasing value/cost (zero cost first), ties by index."""
    ratio = np.where(cost > 0, value / np.where(cost > 0, cost, 1.0), np.inf)
    return sorted(range(len(cost)), key=lambda i: (-ratio[i], i))


def _fractional_bound(order, value, cost, capacity, free) -> float:
    """Dantzig bound over ``free`` items, scanned in the given ratio order."""
    total = 0.0
    for i in order:
        if not free[i] or value[i] <= 0:
            continue
        if cost[i] <= capacity:
            capacity -= cost[i]
            total += value[i]
        else:
            return total + value[i] * capacity / cost[i]
    return total


# ---------------------------------------------------------------------------
# BKP


def _bkp_dp(value, cost, budget):
    n = len(value)
    cap = int(math.floor(min(budget, cost.sum()) + 1e-9))
    w = np.rint(cost).astype(np.int64)
    dp = np.zeros(cap + 1)
    keep = np.zeros((n, cap + 1), dtype=bool)
    for i in range(n):
        if w[i] > cap:
            continue
        cand = np.full(cap + 1, -np.inf)
        cand[w[i]:] = dp[:cap + 1 - w[i]] + value[i]
        take = cand >= dp
        keep[i] = take
        dp = np.where(take, cand, dp)
    x = np.zeros(n, dtype=np.int8)
    c = cap
    for i in range(n - 1, -1, -1):
        if keep[i, c]:
            x[i] = 1
            c -= w[i]
    return x


def _bkp_bb(value, cost, budget, clock: _Deadline):
    n = len(value)
    order = _ratio_order(value, cost)
    best_val, best_x = -1.0, np.zeros(n, dtype=np.int8)
    x = np.zeros(n, dtype=np.int8)
    hit = False

    def bound(depth, cap):
        total = 0.0
        for i in order[depth:]:
            if cost[i] <= cap:
                cap -= cost[i]
                total += value[i]
            else:
                return total + value[i] * cap / cost[i]
        return total

    def dfs(depth, cap, val):
        nonlocal best_val, best_x, hit
        if hit or clock.tick():
            hit = True
            return
        if depth == n:
            if val > best_val:
                best_val, best_x = val, x.copy()
            return
        if val + bound(depth, cap) <= best_val + EPS:
            return
        i = order[depth]
        if cost[i] <= cap + 1e-9:
            x[i] = 1
            dfs(depth + 1, cap - cost[i], val + value[i])
            x[i] = 0
        dfs(depth + 1, cap, val)

    dfs(0, float(budget), 0.0)
    return best_x, not hit


def solve_bkp(problem: PlanProblem, time_limit: float | None = None,
              node_limit: int | None = None) -> PlanSolution:
    """Classical 0-1 knapsack on values; OV is reported post hoc."""
    value, cost = problem.reqs.value, problem.reqs.cost
    clock = _Deadline(time_limit, node_limit)
    if problem.reqs.n == 0:
        return make_solution(problem, np.zeros(0), SolverStats(0, 0.0, True, "empty"))
    if np.allclose(cost, np.rint(cost), atol=1e-9, rtol=0):
        x, proven, method = _bkp_dp(value, cost, problem.budget), True, "dp"
    else:
        x, proven = _bkp_bb(value, cost, problem.budget, clock)
        method = "branch-and-bound"
    return make_solution(problem, x, SolverStats(clock.nodes, clock.elapsed(), proven, method))


# ---------------------------------------------------------------------------
# BKP-PC


class _Implications:
    """Unit propagation over precedence constraints ``x_j <= x_k`` / ``x_j + x_k <= 1``."""

    def __init__(self, n: int, edges):
        self.on_one = [[] for _ in range(n)]   # x_i = 1 forces (k, value)
        self.on_zero = [[] for _ in range(n)]  # x_i = 0 forces (k, value)
        for j, k, q in edges:
            q = Quality.parse(q) if isinstance(q, str) else q
            if q is Quality.POSITIVE:
                self.on_one[j].append((k, 1))
                self.on_zero[k].append((j, 0))
            elif q is Quality.NEGATIVE:
                self.on_one[j].append((k, 0))
                self.on_one[k].append((j, 0))

    def assign(self, state: list, i: int, v: int, trail: list, cost, spent: list, budget) -> bool:
        """Set ``x_i = v`` and everything it forces; False on conflict or overspend."""
        stack = [(i, v)]
        while stack:
            a, val = stack.pop()
            cur = state[a]
            if cur == val:
                continue
            if cur != -1:
                return False
            state[a] = val
            trail.append(a)
            if val == 1:
                spent[0] += cost[a]
                if spent[0] > budget + 1e-9:
                    return False
            stack.extend(self.on_one[a] if val == 1 else self.on_zero[a])
        return True


def solve_bkp_pc(problem: PlanProblem, time_limit: float | None = None,
                 node_limit: int | None = None) -> PlanSolution:
    """Knapsack with every explicit dependency edge as a hard precedence constraint."""
    reqs = problem.reqs
    n, value, cost, budget = reqs.n, reqs.value, reqs.cost, problem.budget
    clock = _Deadline(time_limit, node_limit)
    imp = _Implications(n, problem.bkp_pc_edges)
    state = [-1] * n
    spent = [0.0]

    def undo(trail, saved_spent):
        for a in trail:
            state[a] = -1
        spent[0] = saved_spent

    # root probing: a requirement whose selection is contradictory is fixed to 0
    changed = True
    while changed:
        changed = False
        for i in range(n):
            if state[i] != -1:
                continue
            trail, saved = [], spent[0]
            ok = imp.assign(state, i, 1, trail, cost, spent, budget)
            undo(trail, saved)
            if not ok:
                trail = []
                if not imp.assign(state, i, 0, trail, cost, spent, budget):
                    raise RuntimeError("root propagation failed on an all-zero-feasible model")
                changed = True

    order = _ratio_order(value, cost)
    best = {"val": -1.0, "x": np.zeros(n, dtype=np.int8)}
    hit = False

    def bound():
        free = [s == -1 for s in state]
        fixed = sum(value[i] for i in range(n) if state[i] == 1)
        return fixed + _fractional_bound(order, value, cost, budget - spent[0], free)

    def dfs():
        nonlocal hit
        if hit or clock.tick():
            hit = True
            return
        nxt = next((i for i in order if state[i] == -1), None)
        if nxt is None:
            val = sum(value[i] for i in range(n) if state[i] == 1)
            if val > best["val"]:
                best["val"] = val
                best["x"] = np.array(state, dtype=np.int8)
            return
        if bound() <= best["val"] + EPS:
            return
        for v in (1, 0):
            trail, saved = [], spent[0]
            if imp.assign(state, nxt, v, trail, cost, spent, budget):
                dfs()
            undo(trail, saved)

    dfs()
    return make_solution(problem, best["x"],
                         SolverStats(clock.nodes, clock.elapsed(), not hit, "branch-and-bound"))


# ---------------------------------------------------------------------------
# DA-SRP


def solve_da_srp(problem: PlanProblem, time_limit: float | None = None,
                 node_limit: int | None = None,
                 warm_starts: Sequence = ()) -> PlanSolution:
    """Exact DA-SRP optimum by best-first branch and bound over the selection vector.

    Variables are fixed in a static order (decreasing cost, ties by lowest
    index), select-branch first.  A node's bound charges each requirement the
    penalty already forced by fixed variables and solves the remaining
    knapsack fractionally; free variables can only add penalty, so the bound
    is admissible.  Integral points are scored with the exact penalty.  When
    a limit is hit the best incumbent is returned with ``proven=False``.
    """
    reqs = problem.reqs
    n, value, cost, budget = reqs.n, reqs.value, reqs.cost, problem.budget
    clock = _Deadline(time_limit, node_limit)
    if n == 0:
        return make_solution(problem, np.zeros(0), SolverStats(0, 0.0, True, "empty"))
    I = problem.infl.influence
    if_ignored, if_selected = penalty_terms(I)
    # expensive requirements first: their decisions move the bound most
    order = np.array(sorted(range(n), key=lambda i: (-cost[i], i)))
    greedy_order = np.array(_ratio_order(value, cost))

    def score(x):
        return float(np.sum(x * (1.0 - penalties(I, x)) * value))

    best_x = np.zeros(n, dtype=np.int8)
    best_val = 0.0
    for cand in warm_starts:
        cand = np.asarray(getattr(cand, "x", cand), dtype=np.int8)
        if cand.shape == (n,) and float(cand @ cost) <= budget + 1e-9:
            s = score(cand)
            if s > best_val + EPS:
                best_x, best_val = cand.copy(), s

    def greedy_completion(x, depth, spent):
        x = x.copy()
        free = np.zeros(n, dtype=bool)
        free[order[depth:]] = True
        for i in greedy_order:
            if free[i] and value[i] > 0 and spent + cost[i] <= budget + 1e-9:
                x[i] = 1
                spent += cost[i]
        return x

    # per requirement, all j by decreasing ignored-term, fixed for the whole search
    floor_rank = np.argsort(-if_ignored, axis=1, kind="stable")
    floor_terms = np.take_along_axis(if_ignored, floor_rank, axis=1)
    floor_cost = cost[floor_rank]
    position = np.empty(n, dtype=np.intp)
    position[order] = np.arange(n)

    def budget_floor(depth, spent, lb):
        # keeping p_i below t requires buying every free j with ignored-term > t;
        # the first prefix (strongest first) that overruns the budget sets a floor
        if depth == n:
            return lb
        free = position >= depth
        cum = np.cumsum(np.where(free[floor_rank], floor_cost, 0.0), axis=1)
        cap = np.full(n, budget - spent + 1e-9)
        cap[free] -= cost[free]
        over = (cum > cap[:, None]) & free[floor_rank]
        first = over.argmax(axis=1)
        floor = np.where(over.any(axis=1), floor_terms[np.arange(n), first], 0.0)
        return np.maximum(lb, floor)

    def upper_bound(x, depth, spent, lb):
        reduced = (1.0 - budget_floor(depth, spent, lb)) * value
        fixed, rest = order[:depth], order[depth:]
        total = float(reduced[fixed] @ x[fixed])
        rv, rc = reduced[rest], cost[rest]
        keep = rv > 0
        rv, rc = rv[keep], rc[keep]
        if rv.size == 0:
            return total
        ratio = np.where(rc > 0, rv / np.where(rc > 0, rc, 1.0), np.inf)
        rank = np.argsort(-ratio, kind="stable")
        rv, rc = rv[rank], rc[rank]
        cum_c = np.cumsum(rc)
        cap = budget - spent + 1e-9
        k = int(np.searchsorted(cum_c, cap, side="right"))
        total += float(rv[:k].sum())
        if k < rv.size:
            room = cap - (cum_c[k - 1] if k else 0.0)
            total += float(rv[k] * room / rc[k])
        return total

    counter = itertools.count()
    root_x = np.zeros(n, dtype=np.int8)
    root_lb = np.zeros(n)
    heap = [(-upper_bound(root_x, 0, 0.0, root_lb), next(counter), 0, 0.0, root_x, root_lb)]
    hit = False
    while heap:
        neg_ub, _, depth, spent, x, lb = heapq.heappop(heap)
        if -neg_ub <= best_val + EPS:
            break
        if clock.tick():
            hit = True
            break
        cand = greedy_completion(x, depth, spent)
        s = score(cand)
        if s > best_val + EPS:
            best_x, best_val = cand, s
        if depth == n:
            continue
        i = order[depth]
        for v in (1, 0):
            if v == 1 and spent + cost[i] > budget + 1e-9:
                continue
            child = x.copy()
            child[i] = v
            child_lb = np.maximum(lb, (if_selected if v else if_ignored)[:, i])
            child_spent = spent + cost[i] * v
            ub = upper_bound(child, depth + 1, child_spent, child_lb)
            if ub > best_val + EPS:
                heapq.heappush(heap, (-ub, next(counter), depth + 1, child_spent, child, child_lb))
    return make_solution(problem, best_x,
                         SolverStats(clock.nodes, clock.elapsed(), not hit, "best-first-bnb"))


SOLVERS = {Model.BKP: solve_bkp, Model.BKP_PC: solve_bkp_pc, Model.DA_SRP: solve_da_srp}


def solve(problem: PlanProblem, **limits) -> PlanSolution:
    return SOLVERS[problem.model](problem, **limits)
