"""Simulation harness: random VDGs, budget x VDL sweeps and runtime measurement."""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .plan import Model, PlanProblem, RequirementSet, solve_bkp, solve_bkp_pc, solve_da_srp
from .vdg import Edge, Quality, ValueDependencyGraph, propagate

log = logging.getLogger(__name__)

ALL_MODELS = (Model.BKP, Model.BKP_PC, Model.DA_SRP)
METRICS = ("pct_ov", "pct_av", "infeasible_rate", "unproven_rate")

# Table 3 of the case-study project: 27 requirements
TABLE3_COST = [5, 20, 0, 10, 1, 20, 6, 5, 16, 10, 4, 3, 5, 7, 15, 13, 14, 3, 10, 7, 12, 15, 8, 2,
               10, 0, 1]
TABLE3_VALUE = [10, 20, 4, 17, 3, 20, 15, 9, 20, 16, 20, 10, 6, 8, 8, 10, 6, 10, 20, 20, 15, 20,
                20, 5, 0, 0, 0]


def table3() -> RequirementSet:
    return RequirementSet(np.array(TABLE3_COST, float), np.array(TABLE3_VALUE, float))


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def random_vdg(n: int, vdl: float, nvdl: float, seed) -> ValueDependencyGraph:
    """Random VDG with exactly ``round(vdl * n(n-1))`` edges, ``round(nvdl * k)`` negative.

    Pairs and negative edges are chosen uniformly without replacement;
    strengths are uniform on (0, 1].  ``seed`` is anything numpy accepts.
    """
    if n < 2:
        raise ValueError("need at least two requirements")
    if not (0 <= vdl <= 1 and 0 <= nvdl <= 1):
        raise ValueError("vdl and nvdl must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    pairs = n * (n - 1)
    k = _round_half_up(vdl * pairs)
    m = _round_half_up(nvdl * k)
    chosen = rng.choice(pairs, size=k, replace=False)
    negative = set(rng.choice(k, size=m, replace=False).tolist()) if k else set()
    strengths = 1.0 - rng.random(k)
    edges = {}
    for idx, code in enumerate(chosen.tolist()):
        i, r = divmod(code, n - 1)
        j = r if r < i else r + 1
        q = Quality.NEGATIVE if idx in negative else Quality.POSITIVE
        edges[(i, j)] = Edge(q, float(strengths[idx]))
    return ValueDependencyGraph(n, edges)


def solve_all(reqs, g, budget, models=ALL_MODELS, time_limit=None):
    """Solve the requested models on one instance; DA-SRP is warm-started from the others."""
    infl = propagate(g)
    edges = tuple((i, j, e.quality) for (i, j), e in sorted(g.edges.items()))
    out = {}
    for model in (Model.BKP, Model.BKP_PC):
        if model in models or Model.DA_SRP in models:
            solver = solve_bkp if model is Model.BKP else solve_bkp_pc
            out[model] = solver(PlanProblem(reqs, infl, budget, model, edges), time_limit=time_limit)
    if Model.DA_SRP in models:
        out[Model.DA_SRP] = solve_da_srp(PlanProblem(reqs, infl, budget, Model.DA_SRP, edges),
                                         time_limit=time_limit, warm_starts=list(out.values()))
    return {m: s for m, s in out.items() if m in models}


@dataclass
class SweepConfig:
    dataset: RequirementSet = field(default_factory=table3)
    vdl_grid: tuple = (0.0, 0.05, 0.1, 0.2, 0.4, 0.6, 0.8, 1.0)
    budget_grid: tuple = (0, 10, 20, 30, 40, 50, 60, 70, 80, 90, 100)
    nvdl: float = 0.0
    trials: int = 20
    seed: int = 0
    time_limit: float | None = 60.0

    def __post_init__(self):
        if not self.vdl_grid or not self.budget_grid:
            raise ValueError("grids must be non-empty")
        if self.trials < 1:
            raise ValueError("need at least one trial per cell")
        if any(not 0 <= v <= 1 for v in self.vdl_grid):
            raise ValueError("vdl grid values must lie in [0, 1]")
        if any(not 0 <= b <= 100 for b in self.budget_grid):
            raise ValueError("budget percentages must lie in [0, 100]")


@dataclass
class TrialRecord:
    vdl: float
    budget_pct: float
    trial: int
    model: Model
    ov: float
    av: float
    feasible: bool
    proven: bool
    n_selected: int


@dataclass
class SweepGrid:
    """Per-cell means keyed by ``(vdl, budget_pct, model)`` plus the per-trial records."""

    config: SweepConfig
    cells: dict = field(default_factory=dict)
    records: list = field(default_factory=list)

    def mean(self, vdl, budget_pct, model, metric) -> float:
        return self.cells[(vdl, budget_pct, Model(model))][metric]

    def rows(self):
        """Long-form rows ``(vdl, budget_pct, nvdl, model, metric, mean, trials)``."""
        for (vdl, bpct, model), stats in sorted(self.cells.items(),
                                                key=lambda kv: (kv[0][0], kv[0][1],
                                                                ALL_MODELS.index(kv[0][2]))):
            for metric in METRICS:
                yield (vdl, bpct, self.config.nvdl, model.value, metric, stats[metric],
                       self.config.trials)


def cell_seed(seed: int, vdl_index: int, budget_index: int, trial: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([seed, vdl_index, budget_index, trial])


def run_cell(config: SweepConfig, vdl_index: int, budget_index: int, models=ALL_MODELS):
    """All trials of one grid cell; returns the per-trial records."""
    reqs = config.dataset
    vdl = config.vdl_grid[vdl_index]
    bpct = config.budget_grid[budget_index]
    budget = bpct * float(reqs.cost.sum()) / 100.0
    records = []
    for t in range(config.trials):
        g = random_vdg(reqs.n, vdl, config.nvdl, cell_seed(config.seed, vdl_index, budget_index, t))
        for model, sol in solve_all(reqs, g, budget, models, config.time_limit).items():
            records.append(TrialRecord(vdl, bpct, t, model, sol.ov, sol.av, sol.feasible,
                                       sol.stats.proven, len(sol.selected)))
    return records


def aggregate(config: SweepConfig, records) -> dict:
    total = float(config.dataset.value.sum())

    def pct(v):
        return 100.0 * v / total if total > 0 else 0.0

    groups = {}
    for r in records:
        groups.setdefault((r.vdl, r.budget_pct, r.model), []).append(r)
    cells = {}
    for key, rs in groups.items():
        cells[key] = {
            "pct_ov": float(np.mean([pct(r.ov) for r in rs])),
            "pct_av": float(np.mean([pct(r.av) for r in rs])),
            "infeasible_rate": float(np.mean([not r.feasible for r in rs])),
            "unproven_rate": float(np.mean([not r.proven for r in rs])),
        }
    return cells


def _cell_job(args):
    config, vi, bi, models = args
    return (vi, bi), run_cell(config, vi, bi, models)


def sweep(config: SweepConfig, models=ALL_MODELS, workers: int = 1, done=None,
          on_cell=None) -> SweepGrid:
    """Run every (vdl, budget%) cell.

    ``done`` maps already-computed ``(vdl_index, budget_index)`` cells to
    their records (used for resuming); ``on_cell`` is called with each newly
    finished cell.  Results do not depend on ``workers``.
    """
    done = dict(done or {})
    todo = [(config, vi, bi, models)
            for vi in range(len(config.vdl_grid)) for bi in range(len(config.budget_grid))
            if (vi, bi) not in done]
    if workers > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = pool.map(_cell_job, todo)
            for key, recs in results:
                done[key] = recs
                if on_cell:
                    on_cell(key, recs)
    else:
        for job in todo:
            key, recs = _cell_job(job)
            done[key] = recs
            if on_cell:
                on_cell(key, recs)
    records = [r for key in sorted(done) for r in done[key]]
    return SweepGrid(config, aggregate(config, records), records)


@dataclass
class TimingRow:
    size: int
    model: Model
    wall_time: float
    nodes: int
    proven: bool
    ov: float
    av: float
    selected: tuple


def random_instance(size: int, seed, vdl: float = 0.05, nvdl: float = 0.0):
    """Uniform integer costs/values in [1, 100] and a random VDG."""
    rng = np.random.default_rng(seed)
    reqs = RequirementSet(rng.integers(1, 101, size).astype(float),
                          rng.integers(1, 101, size).astype(float))
    g = random_vdg(size, vdl, nvdl, rng.integers(2 ** 32)) if size >= 2 else ValueDependencyGraph(size)
    return reqs, g


def timing_run(sizes, seed: int = 0, timeout: float = 120.0, budget_pct: float = 50.0,
               vdl: float = 0.05, nvdl: float = 0.0):
    """Wall time of each model on one random instance per size."""
    rows = []
    for size in sizes:
        if size < 1:
            raise ValueError("sizes must be positive")
        reqs, g = random_instance(size, np.random.SeedSequence([seed, size]), vdl, nvdl)
        infl = propagate(g)
        edges = tuple((i, j, e.quality) for (i, j), e in sorted(g.edges.items()))
        budget = budget_pct * float(reqs.cost.sum()) / 100.0
        warm = []
        for model in ALL_MODELS:
            problem = PlanProblem(reqs, infl, budget, model, edges)
            start = time.perf_counter()
            if model is Model.BKP:
                sol = solve_bkp(problem, time_limit=timeout)
            elif model is Model.BKP_PC:
                sol = solve_bkp_pc(problem, time_limit=timeout)
            else:
                sol = solve_da_srp(problem, time_limit=timeout, warm_starts=warm)
            elapsed = time.perf_counter() - start
            warm.append(sol)
            if not sol.stats.proven:
                log.warning("size %d model %s stopped at the time limit", size, model.value)
            rows.append(TimingRow(size, model, elapsed, sol.stats.nodes, sol.stats.proven,
                                  sol.ov, sol.av, tuple(sol.selected)))
    return rows
