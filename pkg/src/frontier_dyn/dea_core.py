"""Dynamic slacks-based efficiency evaluation over panel data.

For one evaluated DMU against a reference set, the model minimizes the
ratio of (weighted mean of 1 - average input/bad-link excess ratios) to
(weighted mean of 1 + average output/good-link shortage ratios), subject
to per-period balance equalities, link-continuity rows tying consecutive
periods, and an optional per-period convexity row. The fractional program
is linearized with the Charnes-Cooper change of variables: a scaling
variable q multiplies every intensity and slack, and one normalization
row pins the scaled denominator to exactly 1.

Two variants:

* standard -- the evaluated DMU belongs to the reference set and all
  slacks are non-negative; scores land in (0, 1].
* super-efficiency -- the evaluated DMU is excluded from the reference
  set and slacks are sign-free (the balance equalities then measure how
  far the unit sits beyond the frontier of the others), so scores may
  exceed 1 and a solve may come back infeasible.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .lp_solver import EQ, LinearProgram, LpStatus, solve
from .panel_data import PanelDataset, Variable, VariableRole

__all__ = [
    "Variant",
    "SolveStatus",
    "SbmConfig",
    "EfficiencyResult",
    "DeaError",
    "EmptyReferenceSet",
    "EvaluatedNotInReference",
    "EvaluatedInReference",
    "SolverAnomaly",
    "build_model",
    "evaluate_dmu",
    "evaluate_all",
    "static_sbm",
]

OBJECTIVE_FORM = "weighted_slack_ratio"  # the only objective algebra in v1


class Variant(Enum):
    STANDARD = "standard"
    SUPER_EFFICIENCY = "super"


class SolveStatus(Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"


class DeaError(Exception):
    pass


class EmptyReferenceSet(DeaError):
    pass


class EvaluatedNotInReference(DeaError):
    pass


class EvaluatedInReference(DeaError):
    pass


class SolverAnomaly(DeaError):
    """The LP behaved in a way the model rules out (internal error signal)."""


@dataclass(frozen=True)
class SbmConfig:
    """Evaluation settings.

    weights is one positive weight per period (None means all ones);
    vrs keeps the per-period convexity row; ratio terms whose datum falls
    below zero_denominator_epsilon are dropped from the objective with the
    period's averaging divisor reduced accordingly.
    """

    weights: tuple | None = None
    variant: Variant = Variant.STANDARD
    vrs: bool = True
    zero_denominator_epsilon: float = 1e-12
    objective_form: str = OBJECTIVE_FORM
    lp_tol: float = 1e-9
    lp_max_iter: int = 50000

    def __post_init__(self):
        if self.weights is not None:
            w = tuple(float(x) for x in self.weights)
            if any(x <= 0 for x in w):
                raise ValueError("period weights must be positive")
            object.__setattr__(self, "weights", w)
        if self.zero_denominator_epsilon <= 0:
            raise ValueError("zero_denominator_epsilon must be positive")
        if self.objective_form != OBJECTIVE_FORM:
            raise ValueError(f"unsupported objective form {self.objective_form!r}")

    def period_weights(self, n_periods: int) -> np.ndarray:
        if self.weights is None:
            return np.ones(n_periods)
        if len(self.weights) != n_periods:
            raise ValueError(
                f"got {len(self.weights)} period weights for {n_periods} periods"
            )
        return np.array(self.weights)


@dataclass(frozen=True)
class EfficiencyResult:
    """Outcome of one DMU evaluation.

    slacks maps period label -> variable name -> recovered slack (input
    excess, output shortage, good-link shortage, bad-link excess; under
    super-efficiency these may be negative, measuring the margin by which
    the unit beats the reference frontier). lambdas maps period label ->
    reference DMU id -> intensity weight. rho is NaN when infeasible.
    """

    rho: float
    status: SolveStatus
    slacks: dict
    lambdas: dict
    dropped_ratio_terms: int


@dataclass(frozen=True)
class _Layout:
    ref_ids: tuple
    n_ref: int
    T: int
    V: int
    q_col: int
    dropped: int

    def lam_col(self, t: int, r: int) -> int:
        return t * self.n_ref + r

    def slack_col(self, t: int, v: int) -> int:
        return self.T * self.n_ref + t * self.V + v


_NUM_ROLES = (VariableRole.INPUT, VariableRole.BAD_LINK)
_DEN_ROLES = (VariableRole.OUTPUT, VariableRole.GOOD_LINK)


def _assemble(data: PanelDataset, evaluated: str, reference, config: SbmConfig):
    ref_set = set(reference)
    if not ref_set:
        raise EmptyReferenceSet("reference set is empty")
    if config.variant is Variant.STANDARD and evaluated not in ref_set:
        raise EvaluatedNotInReference(
            f"standard variant requires {evaluated!r} in its own reference set"
        )
    if config.variant is Variant.SUPER_EFFICIENCY and evaluated in ref_set:
        raise EvaluatedInReference(
            f"super-efficiency requires {evaluated!r} excluded from the reference set"
        )

    j0 = data.dmu_index(evaluated)
    ref_ids = tuple(d for d in data.dmu_ids if d in ref_set)
    if len(ref_ids) != len(ref_set):
        missing = sorted(ref_set - set(ref_ids))
        raise KeyError(f"reference ids not in dataset: {missing}")
    ref_rows = [data.dmu_index(d) for d in ref_ids]

    T, V = data.n_periods, data.n_variables
    n_ref = len(ref_ids)
    W = config.period_weights(T)
    eps = config.zero_denominator_epsilon
    x0 = data.values[j0]  # (T, V)
    ref_vals = data.values[ref_rows]  # (n_ref, T, V)
    roles = [v.role for v in data.variables]
    good_idx = data.role_indices(VariableRole.GOOD_LINK)
    bad_idx = data.role_indices(VariableRole.BAD_LINK)

    n_cols = T * n_ref + T * V + 1
    q_col = n_cols - 1
    n_rows = T * V + (len(good_idx) + len(bad_idx)) * (T - 1) + (T if config.vrs else 0) + 1
    A = np.zeros((n_rows, n_cols))
    b = np.zeros(n_rows)
    lay = _Layout(ref_ids, n_ref, T, V, q_col, 0)

    row = 0
    for t in range(T):
        lam = slice(lay.lam_col(t, 0), lay.lam_col(t, 0) + n_ref)
        for v in range(V):
            A[row, lam] = ref_vals[:, t, v]
            sign = 1.0 if roles[v] in _NUM_ROLES else -1.0
            A[row, lay.slack_col(t, v)] = sign
            A[row, q_col] = -x0[t, v]
            row += 1
    for t in range(T - 1):
        lam_t = slice(lay.lam_col(t, 0), lay.lam_col(t, 0) + n_ref)
        lam_n = slice(lay.lam_col(t + 1, 0), lay.lam_col(t + 1, 0) + n_ref)
        for v in (*bad_idx, *good_idx):
            A[row, lam_t] = ref_vals[:, t, v]
            A[row, lam_n] = -ref_vals[:, t, v]
            row += 1
    if config.vrs:
        for t in range(T):
            A[row, lay.lam_col(t, 0) : lay.lam_col(t, 0) + n_ref] = 1.0
            A[row, q_col] = -1.0
            row += 1

    # Normalization row pins the scaled denominator to 1; the objective is
    # the scaled numerator. Ratio terms with a near-zero datum are dropped
    # and the period's averaging divisor shrinks by the same count.
    c = np.zeros(n_cols)
    norm = A[row]
    c[q_col] = W.sum() / T
    norm[q_col] = W.sum() / T
    dropped = 0
    for t in range(T):
        num_kept = [v for v in range(V) if roles[v] in _NUM_ROLES and x0[t, v] >= eps]
        den_kept = [v for v in range(V) if roles[v] in _DEN_ROLES and x0[t, v] >= eps]
        dropped += sum(1 for v in range(V) if roles[v] in _NUM_ROLES) - len(num_kept)
        dropped += sum(1 for v in range(V) if roles[v] in _DEN_ROLES) - len(den_kept)
        for v in num_kept:
            c[lay.slack_col(t, v)] = -W[t] / (T * len(num_kept) * x0[t, v])
        for v in den_kept:
            norm[lay.slack_col(t, v)] = W[t] / (T * len(den_kept) * x0[t, v])
    b[row] = 1.0
    lay = _Layout(ref_ids, n_ref, T, V, q_col, dropped)

    lower = np.zeros(n_cols)
    if config.variant is Variant.SUPER_EFFICIENCY:
        lower[T * n_ref : T * n_ref + T * V] = -np.inf
    lp = LinearProgram(c=c, A=A, senses=(EQ,) * n_rows, b=b, lower=lower)
    return lp, lay


def build_model(
    data: PanelDataset, evaluated: str, reference, config: SbmConfig | None = None
) -> LinearProgram:
    """Assemble the linearized evaluation program for one DMU.

    Columns: per-period intensity weights over the reference set, then one
    scaled slack per (period, variable), then the scaling variable q.
    Rows: per-period balance equalities, link continuity across consecutive
    periods, per-period convexity (when vrs), and the normalization row.
    """
    lp, _ = _assemble(data, evaluated, reference, config or SbmConfig())
    return lp


def evaluate_dmu(
    data: PanelDataset, evaluated: str, reference, config: SbmConfig | None = None
) -> EfficiencyResult:
    """Solve the evaluation program and recover original-scale quantities.

    rho is the LP optimum (the denominator is normalized to 1); slacks and
    intensities are recovered by dividing the scaled optimum through by q.
    """
    config = config or SbmConfig()
    lp, lay = _assemble(data, evaluated, reference, config)
    sol = solve(lp, tol=config.lp_tol, max_iter=config.lp_max_iter)

    if sol.status is LpStatus.INFEASIBLE:
        if config.variant is Variant.STANDARD:
            raise SolverAnomaly(
                f"standard evaluation of {evaluated!r} reported infeasible; "
                "the self-referencing point is always feasible"
            )
        return EfficiencyResult(float("nan"), SolveStatus.INFEASIBLE, {}, {}, lay.dropped)
    if sol.status is not LpStatus.OPTIMAL:
        raise SolverAnomaly(f"LP terminated with {sol.status.value} for {evaluated!r}")

    q = sol.x[lay.q_col]
    if q <= 1e-10:
        raise SolverAnomaly(f"scaling variable collapsed to {q!r} for {evaluated!r}")
    slacks = {}
    lambdas = {}
    for t, period in enumerate(data.periods):
        slacks[period] = {
            var.name: float(sol.x[lay.slack_col(t, v)] / q)
            for v, var in enumerate(data.variables)
        }
        lambdas[period] = {
            dmu: float(sol.x[lay.lam_col(t, r)] / q) for r, dmu in enumerate(lay.ref_ids)
        }
    return EfficiencyResult(
        float(sol.objective), SolveStatus.OPTIMAL, slacks, lambdas, lay.dropped
    )


def _reference_for(data: PanelDataset, dmu: str, config: SbmConfig):
    if config.variant is Variant.STANDARD:
        return data.dmu_ids
    return tuple(d for d in data.dmu_ids if d != dmu)


def _evaluate_one(data: PanelDataset, dmu: str, config: SbmConfig):
    return dmu, evaluate_dmu(data, dmu, _reference_for(data, dmu, config), config)


_WORKER_CTX = {}


def _worker_init(data, config):
    _WORKER_CTX["data"] = data
    _WORKER_CTX["config"] = config


def _worker_eval(dmu):
    return _evaluate_one(_WORKER_CTX["data"], dmu, _WORKER_CTX["config"])


def rank_order(results) -> list:
    """Sort (dmu, result) pairs: descending rho, infeasible last, id on ties."""

    def key(item):
        dmu, res = item
        bad = res.status is not SolveStatus.OPTIMAL
        return (bad, 0.0 if bad else -res.rho, dmu)

    return sorted(results, key=key)


def evaluate_all(
    data: PanelDataset, config: SbmConfig | None = None, jobs: int = 1
) -> list:
    """Evaluate every DMU against the full set (standard) or all others
    (super-efficiency) and return ranked (dmu, EfficiencyResult) pairs.

    Per-DMU solves are independent; jobs > 1 fans them out over processes.
    """
    config = config or SbmConfig()
    dmus = data.dmu_ids
    if jobs > 1 and len(dmus) > 1:
        import concurrent.futures as cf

        chunk = max(1, len(dmus) // (jobs * 4))
        with cf.ProcessPoolExecutor(
            max_workers=jobs, initializer=_worker_init, initargs=(data, config)
        ) as pool:
            results = list(pool.map(_worker_eval, dmus, chunksize=chunk))
    else:
        results = [_evaluate_one(data, d, config) for d in dmus]
    return rank_order(results)


_STATIC_ROLE = {
    VariableRole.GOOD_LINK: VariableRole.OUTPUT,
    VariableRole.BAD_LINK: VariableRole.INPUT,
}


def static_view(data: PanelDataset, period: int) -> PanelDataset:
    """Single-period dataset with links recast by what they act as:
    good links become outputs, bad links become inputs."""
    if not 1 <= period <= data.n_periods:
        raise ValueError(f"period ordinal {period} outside 1..{data.n_periods}")
    variables = [
        Variable(v.name, _STATIC_ROLE.get(v.role, v.role)) for v in data.variables
    ]
    return PanelDataset(
        data.dmu_ids,
        (data.periods[period - 1],),
        variables,
        data.values[:, period - 1 : period, :],
    )


def static_sbm(
    data: PanelDataset, period: int, evaluated: str, config: SbmConfig | None = None
) -> EfficiencyResult:
    """Classic single-period evaluation on period ordinal t (1-based)."""
    config = config or SbmConfig()
    view = static_view(data, period)
    sub = SbmConfig(
        weights=None,
        variant=config.variant,
        vrs=config.vrs,
        zero_denominator_epsilon=config.zero_denominator_epsilon,
        lp_tol=config.lp_tol,
        lp_max_iter=config.lp_max_iter,
    )
    return evaluate_dmu(view, evaluated, _reference_for(view, evaluated, sub), sub)
