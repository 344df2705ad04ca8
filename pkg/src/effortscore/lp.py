"""Dense two-phase primal simplex for small linear programs.

Programs are stated as ``maximize c . z`` over free variables ``z`` subject to
rows ``a . z (<=|=|>=) b``.  The embedded solver splits free variables into
nonnegative parts, adds slacks, and runs a textbook two-phase tableau simplex
with Bland's rule.  ``solve`` accepts any other backend with the same call
signature, e.g. :func:`scipy_backend`.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import DimensionError, SolverError

PIVOT_TOL = 1e-9
# smallest entry accepted as a pivot in the ratio test; smaller ones are treated as round-off
RATIO_PIVOT_TOL = 1e-7
FEAS_TOL = 1e-7

RELATIONS = ("<=", "=", ">=")


class Status(str, enum.Enum):
    OPTIMAL = "optimal"
    UNBOUNDED = "unbounded"
    INFEASIBLE = "infeasible"


@dataclass(frozen=True, eq=False)
class LinearProgram:
    objective: np.ndarray
    A: np.ndarray
    relations: tuple[str, ...]
    rhs: np.ndarray
    names: tuple[str, ...] | None = None

    def __post_init__(self):
        c = np.asarray(self.objective, dtype=float).reshape(-1)
        A = np.asarray(self.A, dtype=float).reshape(-1, c.size)
        b = np.asarray(self.rhs, dtype=float).reshape(-1)
        rel = tuple(self.relations)
        if A.shape[0] != b.size or len(rel) != b.size:
            raise DimensionError("A, relations and rhs must have one entry per constraint")
        if any(r not in RELATIONS for r in rel):
            raise ValueError(f"relations must be among {RELATIONS}")
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
            raise ValueError("linear program has non-finite coefficients")
        object.__setattr__(self, "objective", c)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "rhs", b)
        object.__setattr__(self, "relations", rel)

    @classmethod
    def from_rows(cls, objective, rows: Iterable[tuple[Sequence[float], str, float]], names=None):
        c = np.asarray(objective, dtype=float)
        rows = list(rows)
        A = np.array([r[0] for r in rows], dtype=float).reshape(len(rows), c.size)
        return cls(c, A, tuple(r[1] for r in rows), [r[2] for r in rows], names)

    @property
    def num_vars(self) -> int:
        return self.objective.size

    @property
    def num_constraints(self) -> int:
        return self.rhs.size

    def residuals(self, z) -> np.ndarray:
        """Constraint violations at ``z`` (zero where satisfied)."""
        lhs = self.A @ z
        viol = np.zeros_like(lhs)
        for k, rel in enumerate(self.relations):
            d = lhs[k] - self.rhs[k]
            viol[k] = max(d, 0.0) if rel == "<=" else max(-d, 0.0) if rel == ">=" else abs(d)
        return viol

    def to_lp_format(self) -> str:
        """Plain-text dump in the usual CPLEX-LP style, for debugging."""
        names = self.names or tuple(f"z{j}" for j in range(self.num_vars))

        def expr(coeffs):
            terms = [f"{'-' if a < 0 else '+'} {abs(a):.12g} {names[j]}" for j, a in enumerate(coeffs) if a != 0]
            return " ".join(terms) if terms else "0"

        lines = ["Maximize", f" obj: {expr(self.objective)}", "Subject To"]
        for k in range(self.num_constraints):
            lines.append(f" c{k}: {expr(self.A[k])} {self.relations[k]} {self.rhs[k]:.12g}")
        lines += ["Bounds"] + [f" {n} free" for n in names] + ["End"]
        return "\n".join(lines) + "\n"


@dataclass(frozen=True, eq=False)
class LpResult:
    status: Status
    x: np.ndarray | None = None
    value: float | None = None
    iterations: int = 0

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL


def _pivot(T: np.ndarray, basis: np.ndarray, row: int, col: int) -> None:
    T[row] /= T[row, col]
    col_vals = T[:, col].copy()
    col_vals[row] = 0.0
    T -= np.outer(col_vals, T[row])
    T[np.abs(T) < 1e-13] = 0.0
    basis[row] = col


def _run_simplex(T, basis, allowed, max_iter, iters):
    """Minimize the objective held in the last row of ``T`` (Bland's rule).

    Returns ``(status, iterations)``.
    """
    m = T.shape[0] - 1
    while True:
        costs = T[m, :-1]
        candidates = np.nonzero((costs < -PIVOT_TOL) & allowed)[0]
        if candidates.size == 0:
            return Status.OPTIMAL, iters
        if iters >= max_iter:
            raise SolverError(
                f"simplex hit the iteration cap ({max_iter}) with {candidates.size} improving columns"
            )
        col = candidates[0]
        column = T[:m, col]
        rows = np.nonzero(column > RATIO_PIVOT_TOL)[0]
        if rows.size == 0:
            return Status.UNBOUNDED, iters
        # rounding can leave degenerate rows at -1e-17; treat them as zero
        ratios = np.maximum(T[rows, -1], 0.0) / column[rows]
        best = ratios.min()
        tied = rows[ratios <= best + PIVOT_TOL * max(1.0, abs(best))]
        # largest pivot among ratio ties keeps round-off from compounding;
        # remaining ties go to the smallest basic index (Bland)
        piv = column[tied]
        tied = tied[piv >= piv.max() * (1 - 1e-12)]
        row = tied[np.argmin(basis[tied])]
        _pivot(T, basis, row, col)
        iters += 1


def _refactor(A, b, cost, basis):
    try:
        Binv = np.linalg.inv(A[:, basis])
    except np.linalg.LinAlgError:
        return None
    m = A.shape[0]
    T = np.zeros((m + 1, A.shape[1] + 1))
    T[:m, :-1] = Binv @ A
    T[:m, -1] = Binv @ b
    T[m, :-1] = cost
    T[m] -= cost[basis] @ T[:m]
    T[np.abs(T) < 1e-13] = 0.0
    return T


def simplex_backend(lp: LinearProgram) -> LpResult:
    """Two-phase tableau simplex with Bland's anti-cycling rule."""
    m, n = lp.num_constraints, lp.num_vars
    if m == 0:
        if np.any(lp.objective != 0):
            return LpResult(Status.UNBOUNDED)
        return LpResult(Status.OPTIMAL, np.zeros(n), 0.0)

    # columns: z+ (n), z- (n), slacks (one per inequality), artificials
    A = np.hstack([lp.A, -lp.A])
    b = lp.rhs.copy()
    ineq = [k for k, r in enumerate(lp.relations) if r != "="]
    S = np.zeros((m, len(ineq)))
    for s, k in enumerate(ineq):
        S[k, s] = 1.0 if lp.relations[k] == "<=" else -1.0
    A = np.hstack([A, S])
    # negate so rhs >= 0, and so zero-rhs ">=" rows start with their slack basic
    flip = (b < 0) | ((b == 0) & np.array([r == ">=" for r in lp.relations]))
    A[flip] *= -1
    b[flip] *= -1

    n_struct = A.shape[1]
    basis = np.full(m, -1)
    for s, k in enumerate(ineq):
        if A[k, 2 * n + s] == 1.0:
            basis[k] = 2 * n + s
    need_art = np.nonzero(basis < 0)[0]
    art = np.zeros((m, need_art.size))
    art[need_art, np.arange(need_art.size)] = 1.0
    basis[need_art] = n_struct + np.arange(need_art.size)
    n_total = n_struct + need_art.size

    T = np.zeros((m + 1, n_total + 1))
    T[:m, :n_struct] = A
    T[:m, n_struct:n_total] = art
    T[:m, -1] = b
    max_iter = 100 * (m + n_total)

    iters = 0
    if need_art.size:
        T[m, n_struct:n_total] = 1.0
        T[m] -= T[need_art].sum(axis=0)
        allowed = np.ones(n_total, dtype=bool)
        _, iters = _run_simplex(T, basis, allowed, max_iter, iters)
        scale = max(1.0, np.abs(b).max())
        if -T[m, -1] > FEAS_TOL * scale:
            return LpResult(Status.INFEASIBLE, iterations=iters)
        # drive zero-level artificials out of the basis; drop redundant rows
        keep = np.ones(m + 1, dtype=bool)
        for row in np.nonzero(basis >= n_struct)[0]:
            mag = np.abs(T[row, :n_struct])
            if mag.max() > PIVOT_TOL:
                _pivot(T, basis, row, int(np.argmax(mag)))
            else:
                keep[row] = False
        T = np.delete(T[keep], np.s_[n_struct:n_total], axis=1)
        basis = basis[keep[:m]]
        A, b = A[keep[:-1]], b[keep[:-1]]
        m = T.shape[0] - 1

    cost = np.concatenate([-lp.objective, lp.objective, np.zeros(n_struct - 2 * n)])
    T[m, :] = 0.0
    T[m, :n_struct] = cost
    T[m] -= cost[basis] @ T[:m]
    allowed = np.ones(n_struct, dtype=bool)
    for _ in range(5):
        status, iters = _run_simplex(T, basis, allowed, max_iter, iters)
        if status is not Status.OPTIMAL:
            return LpResult(status, iterations=iters)
        # rebuild the tableau from the original rows; stop once it agrees
        fresh = _refactor(A, b, cost, basis)
        if fresh is None or np.all(fresh[m, :-1] >= -PIVOT_TOL) and np.all(fresh[:m, -1] >= -FEAS_TOL):
            break
        T = fresh

    values = np.zeros(n_struct)
    values[basis] = T[:m, -1]
    z = values[:n] - values[n : 2 * n]
    return LpResult(Status.OPTIMAL, z, float(lp.objective @ z), iters)


def scipy_backend(lp: LinearProgram) -> LpResult:
    """Delegate to ``scipy.optimize.linprog`` (HiGHS)."""
    from scipy.optimize import linprog

    le = [k for k, r in enumerate(lp.relations) if r == "<="]
    ge = [k for k, r in enumerate(lp.relations) if r == ">="]
    eq = [k for k, r in enumerate(lp.relations) if r == "="]
    A_ub = np.vstack([lp.A[le], -lp.A[ge]]) if le or ge else None
    b_ub = np.concatenate([lp.rhs[le], -lp.rhs[ge]]) if le or ge else None
    res = linprog(
        -lp.objective,
        A_ub=A_ub,
        b_ub=b_ub,
        A_eq=lp.A[eq] if eq else None,
        b_eq=lp.rhs[eq] if eq else None,
        bounds=[(None, None)] * lp.num_vars,
        method="highs",
    )
    if res.status == 2:
        return LpResult(Status.INFEASIBLE)
    if res.status == 3:
        return LpResult(Status.UNBOUNDED)
    if res.status != 0:
        raise SolverError(f"scipy linprog failed: {res.message}")
    return LpResult(Status.OPTIMAL, res.x, float(lp.objective @ res.x), int(res.nit))


BACKENDS: dict[str, Callable[[LinearProgram], LpResult]] = {
    "simplex": simplex_backend,
    "highs": scipy_backend,
}


def solve(lp: LinearProgram, backend: str | Callable[[LinearProgram], LpResult] = "simplex") -> LpResult:
    """Solve ``lp`` and check the returned point against every constraint."""
    fn = BACKENDS[backend] if isinstance(backend, str) else backend
    result = fn(lp)
    if result.optimal:
        worst = float(lp.residuals(result.x).max(initial=0.0))
        if worst > FEAS_TOL * max(1.0, np.abs(lp.rhs).max(initial=0.0)):
            raise SolverError(f"solution violates a constraint by {worst:.3g}")
    return result
