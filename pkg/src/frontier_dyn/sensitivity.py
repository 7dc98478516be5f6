"""Cluster-upgrade sensitivity: what each branch must change to match the
worst branch of the next-better cluster.

Deltas are computed on per-branch values aggregated over periods (mean,
the only v1 mode) and signed by role: inputs and bad links can only be
decreased, outputs and good links only increased. Applying a row's deltas
makes the branch weakly dominate the target by construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .panel_data import PanelDataset, VariableRole

__all__ = [
    "Delta",
    "SensitivityReport",
    "EmptyCluster",
    "worst_branch",
    "compute_deltas",
    "sensitivity_report",
    "apply_deltas",
    "deltas_from_aggregates",
    "render_delta",
    "MEAN_OVER_PERIODS",
]

MEAN_OVER_PERIODS = "mean_over_periods"

_DECREASE_ROLES = (VariableRole.INPUT, VariableRole.BAD_LINK)


class EmptyCluster(Exception):
    pass


@dataclass(frozen=True)
class Delta:
    """Required change for one variable: no_change, increase, or decrease.

    Amounts are positive magnitudes in aggregated-variable units; the sign
    convention lives in the kind.
    """

    kind: str
    amount: float = 0.0

    def __post_init__(self):
        if self.kind not in ("no_change", "increase", "decrease"):
            raise ValueError(f"bad delta kind {self.kind!r}")
        if self.kind == "no_change":
            if self.amount != 0.0:
                raise ValueError("no_change carries no amount")
        elif self.amount <= 0:
            raise ValueError(f"{self.kind} needs a positive amount")

    @classmethod
    def no_change(cls) -> "Delta":
        return cls("no_change")

    @classmethod
    def increase(cls, amount: float) -> "Delta":
        return cls("increase", float(amount))

    @classmethod
    def decrease(cls, amount: float) -> "Delta":
        return cls("decrease", float(amount))

    @property
    def signed(self) -> float:
        if self.kind == "increase":
            return self.amount
        if self.kind == "decrease":
            return -self.amount
        return 0.0


def render_delta(delta: Delta) -> str:
    """Paper-style signed cell: negative for decreases, 'No Change' otherwise."""
    if delta.kind == "no_change":
        return "No Change"
    return format(delta.signed, ".12g")


def worst_branch(members, rho_by_branch) -> str:
    """Member with the minimum score; ties go to the lowest branch id."""
    members = tuple(members)
    if not members:
        raise EmptyCluster("cluster has no members")
    return min(members, key=lambda d: (rho_by_branch[d], d))


def aggregate_over_periods(data: PanelDataset, branch: str) -> np.ndarray:
    """Per-variable mean across the panel's periods for one branch."""
    return data.values[data.dmu_index(branch)].mean(axis=0)


def deltas_from_aggregates(roles, branch_vals, target_vals) -> tuple:
    deltas = []
    for role, b, w in zip(roles, branch_vals, target_vals):
        if role in _DECREASE_ROLES:
            deltas.append(Delta.decrease(b - w) if b > w else Delta.no_change())
        else:
            deltas.append(Delta.increase(w - b) if b < w else Delta.no_change())
    return tuple(deltas)


def compute_deltas(
    data: PanelDataset,
    branch: str,
    target_worst: str,
    aggregation: str = MEAN_OVER_PERIODS,
) -> dict:
    """Per-variable change moving `branch` to the level of `target_worst`.

    Inputs and bad links: decrease down to the target when above it.
    Outputs and good links: increase up to the target when below it.
    Returns {variable name: Delta} in schema order.
    """
    if aggregation != MEAN_OVER_PERIODS:
        raise ValueError(f"unsupported aggregation {aggregation!r}")
    roles = [v.role for v in data.variables]
    b = aggregate_over_periods(data, branch)
    w = aggregate_over_periods(data, target_worst)
    deltas = deltas_from_aggregates(roles, b, w)
    return {var.name: d for var, d in zip(data.variables, deltas)}


def apply_deltas(aggregates, deltas) -> np.ndarray:
    """Aggregated values after carrying out every delta."""
    return np.asarray(aggregates, dtype=float) + np.array([d.signed for d in deltas])


@dataclass(frozen=True)
class SensitivityReport:
    """All upgrade requirements for one cluster against the next-better one."""

    source_cluster: int
    target_cluster: int
    source_label: str
    target_label: str
    worst_target_branch: str
    rows: tuple  # (branch id, {variable: Delta}) sorted by branch id
    aggregation: str = MEAN_OVER_PERIODS


def sensitivity_report(
    data: PanelDataset, cluster_by_branch, grading, rho_by_branch
) -> list:
    """One report per non-top cluster, in grade order (best source first).

    cluster_by_branch maps branch id -> cluster index; grading supplies the
    best-to-worst cluster order and labels; every member of a source
    cluster is compared against the worst branch of the adjacent better
    cluster.
    """
    members_of = {}
    for branch, cluster in cluster_by_branch.items():
        members_of.setdefault(cluster, []).append(branch)

    reports = []
    for pos in range(1, len(grading.order)):
        source = grading.order[pos]
        target = grading.order[pos - 1]
        worst = worst_branch(members_of.get(target, ()), rho_by_branch)
        rows = tuple(
            (branch, compute_deltas(data, branch, worst))
            for branch in sorted(members_of.get(source, ()))
        )
        reports.append(
            SensitivityReport(
                source_cluster=source,
                target_cluster=target,
                source_label=grading.labels[pos],
                target_label=grading.labels[pos - 1],
                worst_target_branch=worst,
                rows=rows,
            )
        )
    return reports
