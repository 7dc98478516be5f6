"""Dense linear programs and a deterministic two-phase primal simplex.

Minimizes c @ x subject to per-row <=, =, >= constraints and variable
bounds (lower defaults to 0; upper optional; either may be infinite).
A solve is a pure function of its inputs: Dantzig pricing with fixed
tie-breaks (lowest eligible column index, then lowest row index), and
Bland's rule takes over after a stall so degenerate instances terminate.
Rerunning an identical program returns bit-identical results.

Outcomes that are mathematically meaningful (infeasible, unbounded,
iteration limit) are status codes, never exceptions.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

__all__ = ["LE", "EQ", "GE", "LpStatus", "LinearProgram", "LpSolution", "solve"]

LE, EQ, GE = "<=", "=", ">="
_SENSES = (LE, EQ, GE)

# Pivots with smaller magnitude than this are treated as zero in the ratio test.
_PIVOT_TOL = 1e-10
# Iterations without objective progress before switching to Bland's rule.
_STALL_LIMIT = 100


class LpStatus(Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    ITERATION_LIMIT = "iteration_limit"


@dataclass(frozen=True)
class LinearProgram:
    """min c @ x  s.t.  A x (<=|=|>=) b,  lower <= x <= upper."""

    c: np.ndarray
    A: np.ndarray
    senses: tuple
    b: np.ndarray
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float)
        A = np.asarray(self.A, dtype=float)
        if A.ndim != 2:
            A = np.atleast_2d(A)
        b = np.asarray(self.b, dtype=float)
        senses = tuple(self.senses)
        n = c.shape[0]
        if A.shape != (b.shape[0], n):
            raise ValueError(f"A shape {A.shape} inconsistent with |c|={n}, |b|={b.shape[0]}")
        if len(senses) != b.shape[0]:
            raise ValueError("one sense per constraint row required")
        if any(s not in _SENSES for s in senses):
            raise ValueError(f"senses must be one of {_SENSES}")
        lower = np.zeros(n) if self.lower is None else np.asarray(self.lower, dtype=float)
        upper = np.full(n, np.inf) if self.upper is None else np.asarray(self.upper, dtype=float)
        if lower.shape != (n,) or upper.shape != (n,):
            raise ValueError("bounds must have one entry per variable")
        for arr, name in ((c, "c"), (A, "A"), (b, "b")):
            if not np.isfinite(arr).all():
                raise ValueError(f"{name} contains non-finite coefficients")
        if np.isnan(lower).any() or np.isnan(upper).any():
            raise ValueError("bounds may be infinite but not NaN")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "senses", senses)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def n_vars(self) -> int:
        return self.c.shape[0]

    @property
    def n_rows(self) -> int:
        return self.b.shape[0]


@dataclass(frozen=True)
class LpSolution:
    status: LpStatus
    objective: float | None
    x: np.ndarray | None
    iterations: int


def _run_simplex(T, basis, max_iter, tol):
    """Pivot the tableau to optimality in place.

    T is (m+1) x (width+1): constraint rows with the rhs in the last
    column, reduced costs in the last row, and -objective in the corner.
    Returns (status, iterations_used).
    """
    m = T.shape[0] - 1
    bland = False
    stall = 0
    last_obj = -T[-1, -1]
    iters = 0
    while iters < max_iter:
        rc = T[-1, :-1]
        if bland:
            eligible = np.nonzero(rc < -tol)[0]
            if eligible.size == 0:
                return LpStatus.OPTIMAL, iters
            col = int(eligible[0])
        else:
            col = int(np.argmin(rc))  # first minimum: lowest column index on ties
            if rc[col] >= -tol:
                return LpStatus.OPTIMAL, iters
        colv = T[:m, col]
        positive = np.nonzero(colv > _PIVOT_TOL)[0]
        if positive.size == 0:
            return LpStatus.UNBOUNDED, iters
        ratios = T[positive, -1] / colv[positive]
        best = ratios.min()
        tied = positive[ratios <= best]
        if bland:
            row = int(tied[np.argmin([basis[i] for i in tied])])
        else:
            row = int(tied[0])  # lowest row index
        _pivot(T, row, col)
        basis[row] = col
        iters += 1
        obj = -T[-1, -1]
        if obj < last_obj - 1e-12:
            stall = 0
            last_obj = obj
        else:
            stall += 1
            if stall >= _STALL_LIMIT:
                bland = True
    return LpStatus.ITERATION_LIMIT, iters


def _pivot(T, row, col):
    T[row] /= T[row, col]
    colv = T[:, col].copy()
    colv[row] = 0.0
    T -= np.outer(colv, T[row])
    T[:, col] = 0.0
    T[row, col] = 1.0


def _set_objective_row(T, basis, costs):
    """Reduced-cost row for a basis of unit columns: costs - sum(c_B * rows)."""
    T[-1, :-1] = costs
    T[-1, -1] = 0.0
    for i, col in enumerate(basis):
        cb = costs[col]
        if cb != 0.0:
            T[-1] -= cb * T[i]


def solve(lp: LinearProgram, tol: float = 1e-9, max_iter: int = 50000) -> LpSolution:
    """Two-phase primal simplex on a dense tableau.

    Parameters
    ----------
    lp : the program to solve
    tol : feasibility / reduced-cost tolerance
    max_iter : cap on total pivots across both phases

    Returns
    -------
    LpSolution with the primal vector in the original variable space when
    status is OPTIMAL.
    """
    if tol <= 0 or max_iter < 1:
        raise ValueError("tol must be positive and max_iter >= 1")
    n = lp.n_vars
    lower, upper = lp.lower, lp.upper
    if np.any(lower > upper):
        return LpSolution(LpStatus.INFEASIBLE, None, None, 0)

    # Standard form: every column u >= 0 with x[j] = shift[j] + sign * u.
    # Free variables split into a +/- pair; finite upper bounds become rows.
    shift = np.zeros(n)
    col_orig = []
    col_sign = []
    ub_rows = []  # (standard column, residual upper bound)
    for j in range(n):
        lo, hi = lower[j], upper[j]
        if np.isneginf(lo) and np.isposinf(hi):
            col_orig += [j, j]
            col_sign += [1.0, -1.0]
        elif np.isneginf(lo):
            shift[j] = hi
            col_orig.append(j)
            col_sign.append(-1.0)
        else:
            shift[j] = lo
            col_orig.append(j)
            col_sign.append(1.0)
            if np.isfinite(hi):
                ub_rows.append((len(col_orig) - 1, hi - lo))

    sign_arr = np.array(col_sign)
    ns = len(col_orig)
    m0 = lp.n_rows
    m = m0 + len(ub_rows)

    body = np.zeros((m, ns))
    body[:m0] = lp.A[:, col_orig] * sign_arr
    rhs = np.empty(m)
    rhs[:m0] = lp.b - lp.A @ shift
    senses = list(lp.senses)
    for r, (k, res) in enumerate(ub_rows):
        body[m0 + r, k] = 1.0
        rhs[m0 + r] = res
        senses.append(LE)
    costs_struct = lp.c[col_orig] * sign_arr

    # Slack / surplus columns, then sign-normalize so rhs >= 0.
    slack_of_row = np.full(m, -1, dtype=int)
    slack_cols = []
    for i, sense in enumerate(senses):
        if sense == EQ:
            continue
        coln = np.zeros(m)
        coln[i] = 1.0 if sense == LE else -1.0
        slack_of_row[i] = ns + len(slack_cols)
        slack_cols.append(coln)
    width = ns + len(slack_cols)
    full = np.zeros((m, width))
    full[:, :ns] = body
    for k, coln in enumerate(slack_cols):
        full[:, ns + k] = coln

    flip = rhs < 0
    full[flip] *= -1.0
    rhs = np.where(flip, -rhs, rhs)

    # Initial basis: a row's own slack if it survived normalization as +1,
    # otherwise an artificial column.
    basis = [-1] * m
    art_cols = []
    for i in range(m):
        sc = slack_of_row[i]
        if sc >= 0 and full[i, sc] == 1.0:
            basis[i] = sc
        else:
            art_cols.append(i)
    n_art = len(art_cols)
    art_base = width
    T = np.zeros((m + 1, width + n_art + 1))
    T[:m, :width] = full
    T[:m, -1] = rhs
    for k, i in enumerate(art_cols):
        T[i, art_base + k] = 1.0
        basis[i] = art_base + k

    iterations = 0
    if n_art:
        phase1_costs = np.zeros(width + n_art)
        phase1_costs[art_base:] = 1.0
        _set_objective_row(T, basis, phase1_costs)
        status, used = _run_simplex(T, basis, max_iter, tol)
        iterations += used
        if status is not LpStatus.OPTIMAL:
            # Phase 1 is bounded below by 0; anything but optimal is a blown budget.
            return LpSolution(LpStatus.ITERATION_LIMIT, None, None, iterations)
        if -T[-1, -1] > tol * max(1.0, float(np.abs(rhs).max(initial=0.0))):
            return LpSolution(LpStatus.INFEASIBLE, None, None, iterations)
        # Drive leftover zero-level artificials out of the basis; a row with
        # no eligible pivot is redundant and is dropped.
        drop = []
        for i in range(m):
            if basis[i] < art_base:
                continue
            row = T[i, :art_base]
            candidates = np.nonzero(np.abs(row) > 1e-7)[0]
            if candidates.size:
                _pivot(T, i, int(candidates[0]))
                basis[i] = int(candidates[0])
            else:
                drop.append(i)
        if drop:
            keep = [i for i in range(m) if i not in set(drop)]
            T = T[keep + [m]]
            basis = [basis[i] for i in keep]
            m = len(keep)
    T = np.hstack([T[:, :width], T[:, -1:]])

    phase2_costs = np.concatenate([costs_struct, np.zeros(width - ns)])
    _set_objective_row(T, basis, phase2_costs)
    status, used = _run_simplex(T, basis, max_iter - iterations, tol)
    iterations += used
    if status is not LpStatus.OPTIMAL:
        return LpSolution(status, None, None, iterations)

    x_std = np.zeros(width)
    for i, col in enumerate(basis):
        x_std[col] = max(T[i, -1], 0.0)
    x = shift.copy()
    for k in range(ns):
        x[col_orig[k]] += col_sign[k] * x_std[k]
    return LpSolution(LpStatus.OPTIMAL, float(lp.c @ x), x, iterations)
