"""Linearized DA-SRP as an explicit mixed-integer linear program.

Variables are laid out as ``[x_0..x_{n-1}, p_0..p_{n-1}, y_0..y_{n-1}]``
where ``y_i`` stands for the product ``x_i * p_i``.  Rows are kept in
``lower <= A @ z <= upper`` form so the instance can be handed to any MILP
solver; :func:`solve_highs` does that with scipy's HiGHS binding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .plan import PlanProblem, PlanSolution, SolverStats, make_solution


@dataclass(frozen=True)
class LinearizedMILP:
    n: int
    objective: np.ndarray       # maximise objective @ z
    A: sparse.csr_matrix
    row_lower: np.ndarray
    row_upper: np.ndarray
    var_lower: np.ndarray
    var_upper: np.ndarray
    integrality: np.ndarray     # 1 for binary x, 0 for continuous p, y
    row_kind: tuple             # "penalty" | "linearization" | "budget"

    @property
    def n_binary(self) -> int:
        return int(self.integrality.sum())

    @property
    def n_continuous(self) -> int:
        return len(self.integrality) - self.n_binary

    def count(self, kind: str) -> int:
        return sum(1 for k in self.row_kind if k == kind)

    def complete(self, x) -> np.ndarray:
        """Cheapest feasible ``(x, p, y)`` for a binary ``x``."""
        n = self.n
        x = np.asarray(x, dtype=float)
        rows = [r for r, k in enumerate(self.row_kind) if k == "penalty"]
        A = self.A[rows].toarray()
        # each penalty row reads p_i + I_ij x_j >= rhs
        need = self.row_lower[rows] - A[:, :n] @ x
        owner = A[:, n:2 * n].argmax(axis=1)
        p = np.zeros(n)
        np.maximum.at(p, owner, need)
        p = np.clip(p, 0.0, 1.0)
        y = x * p
        return np.concatenate([x, p, y])

    def is_feasible(self, z, tol: float = 1e-9) -> bool:
        az = self.A @ z
        return bool(np.all(az >= self.row_lower - tol) and np.all(az <= self.row_upper + tol)
                    and np.all(z >= self.var_lower - tol) and np.all(z <= self.var_upper + tol))


def linearize_da_srp(problem: PlanProblem) -> LinearizedMILP:
    n = problem.reqs.n
    I = problem.infl.influence
    v = problem.reqs.value
    xs, ps, ys = np.arange(n), np.arange(n, 2 * n), np.arange(2 * n, 3 * n)
    rows, cols, vals, lo, hi, kind = [], [], [], [], [], []
    r = 0

    def row(entries, lower, upper, k):
        nonlocal r
        for c, a in entries:
            rows.append(r)
            cols.append(c)
            vals.append(a)
        lo.append(lower)
        hi.append(upper)
        kind.append(k)
        r += 1

    for i in range(n):
        for j in range(n):
            if i != j:
                # p_i >= (|I| + (1 - 2 x_j) I) / 2  <=>  p_i + I x_j >= max(I, 0)
                row([(ps[i], 1.0), (xs[j], float(I[i, j]))], max(float(I[i, j]), 0.0), np.inf,
                    "penalty")
    for i in range(n):
        row([(ys[i], 1.0), (ps[i], -1.0)], -np.inf, 0.0, "linearization")
        row([(ys[i], 1.0), (xs[i], -1.0)], -np.inf, 0.0, "linearization")
        row([(ys[i], 1.0), (ps[i], -1.0), (xs[i], -1.0)], -1.0, np.inf, "linearization")
        row([(ys[i], 1.0)], 0.0, np.inf, "linearization")
    row([(xs[i], float(problem.reqs.cost[i])) for i in range(n)], -np.inf, float(problem.budget),
        "budget")

    A = sparse.csr_matrix((vals, (rows, cols)), shape=(r, 3 * n))
    objective = np.concatenate([v, np.zeros(n), -v])
    var_lower = np.concatenate([np.zeros(2 * n), np.full(n, -np.inf)])
    var_upper = np.concatenate([np.ones(2 * n), np.full(n, np.inf)])
    integrality = np.concatenate([np.ones(n), np.zeros(2 * n)]).astype(int)
    return LinearizedMILP(n, objective, A, np.array(lo), np.array(hi), var_lower, var_upper,
                          integrality, tuple(kind))


def solve_highs(problem: PlanProblem, time_limit: float | None = None) -> PlanSolution:
    """Solve the linearized model with HiGHS (external-solver adapter)."""
    from scipy.optimize import Bounds, LinearConstraint, milp

    model = linearize_da_srp(problem)
    options = {"time_limit": time_limit} if time_limit else {}
    res = milp(-model.objective, integrality=model.integrality,
               bounds=Bounds(model.var_lower, model.var_upper),
               constraints=LinearConstraint(model.A, model.row_lower, model.row_upper),
               options=options)
    if res.x is None:
        raise RuntimeError(f"HiGHS returned no solution: {res.message}")
    x = np.rint(res.x[:model.n]).astype(np.int8)
    return make_solution(problem, x, SolverStats(0, 0.0, res.status == 0, "highs"))
