"""Command-line entry point: ``relplan {identify,resample,plan,simulate,timing}``.

Exit codes: 0 success, 2 bad usage or input data, 3 incomplete run
(a solver limit was reached, so some result is unproven).
"""

from __future__ import annotations

import argparse
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from . import io as rio
from .identify import MembershipFunction, PreferenceMatrix, build_vdg, merge_intrinsic
from .plan import Model, PlanProblem, solve
from .resample import fit, sample
from .sim import ALL_MODELS, SweepConfig, TrialRecord, sweep, table3, timing_run
from .vdg import InfluenceMatrix, propagate

log = logging.getLogger("relplan")

EXIT_OK, EXIT_DATA, EXIT_INCOMPLETE = 0, 2, 3


class UsageError(Exception):
    pass


def _floats(text: str) -> tuple:
    try:
        return tuple(float(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> tuple:
    try:
        return tuple(int(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _manifest(out: Path, command: str, params: dict, outputs: list[str]) -> None:
    clean = {k: (str(v) if isinstance(v, Path) else v) for k, v in params.items()
             if k not in ("func", "out_dir")}
    rio.write_json(out / "manifest.json", {"command": command, "version": __version__,
                                           "parameters": clean, "outputs": sorted(outputs)})


def _membership(args) -> MembershipFunction:
    try:
        return MembershipFunction(args.membership, args.ramp_low, args.ramp_high)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


# identify ---------------------------------------------------------------------


def cmd_identify(args) -> int:
    prefs, names, _ = rio.read_preferences(args.prefs)
    if prefs.n < 2:
        raise UsageError("need at least two requirement columns")
    if args.smoothing < 0:
        raise UsageError("--smoothing must be non-negative")
    f = _membership(args)
    if args.source != "original":
        m = args.resample_m or 10 * prefs.users
        synthetic = sample(fit(prefs), m, args.seed)
        prefs = synthetic if args.source == "resampled" else PreferenceMatrix(
            np.vstack([prefs.cells, synthetic.cells]))
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        g = build_vdg(prefs, f, args.smoothing)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    if args.intrinsic:
        g = merge_intrinsic(g, rio.read_intrinsic(args.intrinsic))
    out = _out_dir(args)
    rio.write_vdg(out / "vdg.json", g)
    rio.write_matrix(out / "influence.csv", propagate(g).influence, names)
    _manifest(out, "identify", vars(args), ["vdg.json", "influence.csv"])
    print(f"identified {len(g.edges)} dependencies among {g.n} requirements")
    return EXIT_OK


# resample ---------------------------------------------------------------------


def cmd_resample(args) -> int:
    prefs, names, _ = rio.read_preferences(args.prefs)
    m = args.m if args.m is not None else 10 * prefs.users
    if m < 1:
        raise UsageError("--m must be at least 1")
    model = fit(prefs)  # unattainable-covariance residuals are logged as warnings
    out = _out_dir(args)
    rio.write_preferences(out / "samples.csv", sample(model, m, args.seed), names)
    rio.write_model(out / "model.json", model)
    _manifest(out, "resample", {**vars(args), "m": m}, ["samples.csv", "model.json"])
    print(f"wrote {m} synthetic users for {prefs.n} requirements")
    return EXIT_OK


# plan -------------------------------------------------------------------------


def cmd_plan(args) -> int:
    reqs = rio.read_requirements(args.reqs)
    edges = ()
    if args.vdg:
        g = rio.read_vdg(args.vdg)
        if g.n != reqs.n:
            raise UsageError(f"VDG has {g.n} nodes but there are {reqs.n} requirements")
        infl = propagate(g)
        edges = tuple((i, j, q) for i, j, q, _ in g.edge_list())
    else:
        matrix, _ = rio.read_matrix(args.influence)
        if matrix.shape[0] != reqs.n:
            raise UsageError(f"influence matrix is {matrix.shape[0]}x{matrix.shape[0]} "
                             f"but there are {reqs.n} requirements")
        try:
            infl = InfluenceMatrix.from_influence(matrix)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    model = Model(args.model)
    if model is Model.BKP_PC and not args.vdg:
        raise UsageError("bkp-pc needs explicit edges: pass --vdg")
    budget = args.budget if args.budget is not None else args.budget_pct * float(reqs.cost.sum()) / 100
    if budget < 0:
        raise UsageError("budget must be non-negative")
    sol = solve(PlanProblem(reqs, infl, budget, model, edges), time_limit=args.timeout_s)
    out = _out_dir(args)
    rio.write_json(out / "solution.json", sol.to_json())
    _manifest(out, "plan", {**vars(args), "budget": budget}, ["solution.json"])
    print(f"model={model.value} AV={sol.av:g} OV={sol.ov:g} selected={len(sol.selected)} "
          f"time={sol.stats.wall_time:.3f}s proven={sol.stats.proven}")
    return EXIT_OK if sol.stats.proven else EXIT_INCOMPLETE


# simulate ---------------------------------------------------------------------


def _record_to_json(r: TrialRecord) -> dict:
    return {"vdl": r.vdl, "budget_pct": r.budget_pct, "trial": r.trial, "model": r.model.value,
            "ov": r.ov, "av": r.av, "feasible": r.feasible, "proven": r.proven,
            "n_selected": r.n_selected}


def _record_from_json(d: dict) -> TrialRecord:
    return TrialRecord(d["vdl"], d["budget_pct"], d["trial"], Model(d["model"]), d["ov"], d["av"],
                       d["feasible"], d["proven"], d["n_selected"])


def cmd_simulate(args) -> int:
    reqs = rio.read_requirements(args.reqs) if args.reqs else table3()
    try:
        config = SweepConfig(reqs, args.vdl_grid, args.budget_grid, args.nvdl, args.trials,
                             args.seed, args.timeout_s)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if not 0 <= args.nvdl <= 1:
        raise UsageError("--nvdl must lie in [0, 1]")
    out = _out_dir(args)
    cell_dir = out / "cells"
    cell_dir.mkdir(exist_ok=True)
    done = {}
    if args.resume:
        for vi in range(len(config.vdl_grid)):
            for bi in range(len(config.budget_grid)):
                path = cell_dir / f"{vi}_{bi}.json"
                if path.exists():
                    done[(vi, bi)] = [_record_from_json(d) for d in rio.read_json(path)]
        log.info("resuming with %d completed cells", len(done))

    def save(key, records):
        rio.write_json(cell_dir / f"{key[0]}_{key[1]}.json", [_record_to_json(r) for r in records])

    grid = sweep(config, ALL_MODELS, workers=args.workers, done=done, on_cell=save)
    rio.write_csv(out / "grid.csv", ["vdl", "budget_pct", "nvdl", "model", "metric", "mean", "trials"],
                   ([repr(float(a)), repr(float(b)), repr(float(c)), m, k, repr(float(v)), t]
                    for a, b, c, m, k, v, t in grid.rows()))
    _manifest(out, "simulate", {**vars(args), "vdl_grid": list(config.vdl_grid),
                                "budget_grid": list(config.budget_grid),
                                "cell_seeding": "SeedSequence([seed, vdl_index, budget_index, trial])"},
              ["grid.csv"])
    unproven = sum(not r.proven for r in grid.records)
    print(f"{len(grid.cells)} cell/model aggregates written; {unproven} unproven solves")
    return EXIT_OK if unproven == 0 else EXIT_INCOMPLETE


# timing -----------------------------------------------------------------------


def cmd_timing(args) -> int:
    if any(s < 1 for s in args.sizes):
        raise UsageError("--sizes must be positive")
    rows = timing_run(args.sizes, args.seed, args.timeout_s, args.budget_pct, args.vdl, args.nvdl)
    out = _out_dir(args)
    rio.write_csv(out / "timing.csv", ["size", "model", "wall_time", "nodes", "proven", "ov", "av"],
                   ([r.size, r.model.value, f"{r.wall_time:.6f}", r.nodes, int(r.proven),
                     repr(float(r.ov)), repr(float(r.av))] for r in rows))
    _manifest(out, "timing", vars(args), ["timing.csv"])
    for r in rows:
        print(f"size={r.size} model={r.model.value} time={r.wall_time:.3f}s proven={r.proven}")
    return EXIT_OK if all(r.proven for r in rows) else EXIT_INCOMPLETE


# parser -----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="relplan", description="Dependency-aware software release planning.")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("identify", help="identify dependencies from a preference CSV")
    p.add_argument("prefs")
    p.add_argument("--out-dir", default=".")
    p.add_argument("--membership", choices=("identity", "ramp"), default="identity")
    p.add_argument("--ramp-low", type=float, default=0.16)
    p.add_argument("--ramp-high", type=float, default=0.83)
    p.add_argument("--smoothing", type=float, default=0.0)
    p.add_argument("--intrinsic", help="CSV of from,to,kind (requires|conflicts)")
    p.add_argument("--source", choices=("original", "resampled", "pooled"), default="original",
                   help="estimate from the input, a resample of it, or both stacked")
    p.add_argument("--resample-m", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_identify)

    p = sub.add_parser("resample", help="fit a dichotomized Gaussian and draw synthetic users")
    p.add_argument("prefs")
    p.add_argument("--out-dir", default=".")
    p.add_argument("--m", type=int, default=None, help="sample size (default 10 x users)")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_resample)

    p = sub.add_parser("plan", help="select requirements under a budget")
    p.add_argument("reqs")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--vdg")
    src.add_argument("--influence")
    b = p.add_mutually_exclusive_group(required=True)
    b.add_argument("--budget", type=float)
    b.add_argument("--budget-pct", type=float)
    p.add_argument("--model", choices=[m.value for m in Model], default="da-srp")
    p.add_argument("--timeout-s", type=float, default=120.0)
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("simulate", help="budget x VDL sweep comparing the three models")
    p.add_argument("--reqs", help="requirements CSV (default: built-in 27-requirement dataset)")
    p.add_argument("--vdl-grid", type=_floats, default=SweepConfig.vdl_grid,
                   help="comma-separated dependency levels in [0, 1]")
    p.add_argument("--budget-grid", type=_floats, default=SweepConfig.budget_grid,
                   help="comma-separated budget percentages in [0, 100]")
    p.add_argument("--nvdl", type=float, default=0.0, help="fraction of negative edges")
    p.add_argument("--trials", type=int, default=20, help="random graphs per cell")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--timeout-s", type=float, default=60.0, help="per-solve time limit")
    p.add_argument("--workers", type=int, default=1, help="parallel worker processes")
    p.add_argument("--resume", action="store_true",
                   help="reuse cell files already present in OUT_DIR/cells")
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("timing", help="runtime of each model on random instances")
    p.add_argument("--sizes", type=_ints, default=(1, 10, 50, 100, 200, 500),
                   help="comma-separated instance sizes")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--timeout-s", type=float, default=120.0)
    p.add_argument("--budget-pct", type=float, default=50.0)
    p.add_argument("--vdl", type=float, default=0.05)
    p.add_argument("--nvdl", type=float, default=0.0)
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_timing)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (rio.DataError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
