"""Heuristic evaluation for large DMU populations.

Instead of solving one program against the full reference set, the
non-evaluated DMUs are shuffled into p near-equal classes; the evaluated
DMU is scored against each class and the class scores are averaged.
Classes that come back infeasible (possible under super-efficiency) are
skipped from the average and counted, which is exactly what makes the
scheme a remedy for infeasible full-set programs.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .dea_core import SbmConfig, SolveStatus, Variant, evaluate_dmu
from .panel_data import PanelDataset

__all__ = [
    "PartitionPlan",
    "HeuristicResult",
    "PartitionError",
    "PTooLarge",
    "AllClassesInfeasible",
    "partition",
    "evaluate_heuristic",
    "evaluate_heuristic_all",
    "derive_seed",
]


class PartitionError(Exception):
    pass


class PTooLarge(PartitionError):
    pass


class AllClassesInfeasible(PartitionError):
    pass


@dataclass(frozen=True)
class PartitionPlan:
    """Assignment of every non-evaluated DMU to one of p classes (1..p)."""

    p: int
    seed: int
    evaluated: str
    assignments: dict

    def members(self, class_index: int) -> tuple:
        return tuple(
            d for d, c in sorted(self.assignments.items()) if c == class_index
        )

    def classes(self) -> list:
        return [self.members(c) for c in range(1, self.p + 1)]


def partition(dmus, evaluated: str, p: int, seed: int) -> PartitionPlan:
    """Shuffle the non-evaluated ids and deal them round-robin into p classes.

    Deterministic given the id set, the evaluated DMU, p, and seed: ids are
    canonicalized by sorting before the seeded shuffle, so the incoming
    iteration order is irrelevant. Class sizes differ by at most one.
    """
    others = sorted(set(dmus) - {evaluated})
    if p < 1:
        raise ValueError("p must be >= 1")
    if p > len(others):
        raise PTooLarge(f"p={p} exceeds the {len(others)} non-evaluated DMUs")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(others))
    assignments = {others[int(j)]: (i % p) + 1 for i, j in enumerate(order)}
    return PartitionPlan(p=p, seed=seed, evaluated=evaluated, assignments=assignments)


@dataclass(frozen=True)
class HeuristicResult:
    """Per-class scores plus their average over the classes that solved."""

    plan: PartitionPlan
    class_results: tuple  # EfficiencyResult per class, index 0 -> class 1
    mean_rho: float
    feasible_class_count: int

    @property
    def class_rhos(self) -> tuple:
        return tuple(
            r.rho for r in self.class_results if r.status is SolveStatus.OPTIMAL
        )

    @property
    def status(self) -> SolveStatus:
        return (
            SolveStatus.OPTIMAL
            if self.feasible_class_count >= 1
            else SolveStatus.INFEASIBLE
        )

    @property
    def dropped_ratio_terms(self) -> int:
        return sum(r.dropped_ratio_terms for r in self.class_results)


def derive_seed(seed: int, dmu_id: str) -> int:
    """Stable per-DMU seed split, so one run seed drives every partition."""
    digest = hashlib.blake2b(f"{seed}|{dmu_id}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "big")


def _heuristic_core(data, evaluated, p, seed, config) -> HeuristicResult:
    plan = partition(data.dmu_ids, evaluated, p, derive_seed(seed, evaluated))
    results = []
    for members in plan.classes():
        if config.variant is Variant.STANDARD:
            reference = (*members, evaluated)
        else:
            reference = members
        results.append(evaluate_dmu(data, evaluated, reference, config))
    rhos = [r.rho for r in results if r.status is SolveStatus.OPTIMAL]
    return HeuristicResult(
        plan=plan,
        class_results=tuple(results),
        mean_rho=float(np.mean(rhos)) if rhos else float("nan"),
        feasible_class_count=len(rhos),
    )


def evaluate_heuristic(
    data: PanelDataset,
    evaluated: str,
    p: int,
    seed: int,
    config: SbmConfig | None = None,
) -> HeuristicResult:
    """Score one DMU against each of its p random classes and average.

    Standard variant adds the evaluated DMU to every class reference;
    super-efficiency scores against the class alone. With p=1 the single
    class is the full complement, so the heuristic reduces to the exact
    evaluation.
    """
    result = _heuristic_core(data, evaluated, p, seed, config or SbmConfig())
    if result.feasible_class_count == 0:
        raise AllClassesInfeasible(
            f"all {p} class evaluations of {evaluated!r} were infeasible"
        )
    return result


def _heuristic_one(data, dmu, p, seed, config):
    return dmu, _heuristic_core(data, dmu, p, seed, config)


_WORKER_CTX = {}


def _worker_init(data, p, seed, config):
    _WORKER_CTX.update(data=data, p=p, seed=seed, config=config)


def _worker_eval(dmu):
    c = _WORKER_CTX
    return _heuristic_one(c["data"], dmu, c["p"], c["seed"], c["config"])


def evaluate_heuristic_all(
    data: PanelDataset,
    p: int,
    seed: int,
    config: SbmConfig | None = None,
    jobs: int = 1,
) -> list:
    """Heuristic scores for every DMU, ranked by mean rho (infeasible last)."""
    config = config or SbmConfig()
    dmus = data.dmu_ids
    if jobs > 1 and len(dmus) > 1:
        import concurrent.futures as cf

        chunk = max(1, len(dmus) // (jobs * 4))
        with cf.ProcessPoolExecutor(
            max_workers=jobs, initializer=_worker_init, initargs=(data, p, seed, config)
        ) as pool:
            results = list(pool.map(_worker_eval, dmus, chunksize=chunk))
    else:
        results = [_heuristic_one(data, d, p, seed, config) for d in dmus]

    def key(item):
        dmu, res = item
        bad = res.feasible_class_count < 1
        return (bad, 0.0 if bad else -res.mean_rho, dmu)

    return sorted(results, key=key)
