"""K-means over efficiency scores, silhouette-driven k selection, grading.

Clustering runs on the 1-D score vector coming out of the ranking (points
may be higher-dimensional; the engine does not care). Cluster quality is
the within-cluster squared dispersion; the number of clusters is picked by
the silhouette criterion unless the caller overrides it, mirroring the
managerial practice of forcing the grade count the business already uses.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

__all__ = [
    "ClusterModel",
    "ClusterGrading",
    "grade_labels_for",
    "ClusterGrading",
    "ClusteringError",
    "KTooLarge",
    "SingleCluster",
    "kmeans",
    "silhouette",
    "select_k",
    "grade_clusters",
]


class ClusteringError(Exception):
    pass


class KTooLarge(ClusteringError):
    pass


class SingleCluster(ClusteringError):
    pass


@dataclass(frozen=True)
class ClusterModel:
    """Converged k-means state.

    centers are the means of their members; dispersion is the summed
    squared distance of every point to its center; d_history records the
    dispersion after each Lloyd iteration (non-increasing). silhouette is
    None for k=1. grade_labels stays None until grading is attached.
    """

    k: int
    centers: np.ndarray
    assignments: np.ndarray
    dispersion: float
    d_history: tuple
    silhouette: float | None = None
    grade_labels: tuple | None = None

    def with_grades(self, grading: "ClusterGrading") -> "ClusterModel":
        return replace(self, grade_labels=grading.labels)


def _as_points(points) -> np.ndarray:
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise ValueError("points must be a non-empty 1-D or 2-D array")
    if not np.isfinite(arr).all():
        raise ValueError("points must be finite")
    return arr


def _kmeanspp_init(pts: np.ndarray, k: int, rng) -> np.ndarray:
    n = pts.shape[0]
    centers = np.empty((k, pts.shape[1]))
    centers[0] = pts[int(rng.integers(n))]
    d2 = ((pts - centers[0]) ** 2).sum(axis=1)
    for c in range(1, k):
        total = d2.sum()
        if total <= 0:
            # Remaining mass degenerate: fall back to the first unused distinct point.
            seen = {tuple(x) for x in centers[:c]}
            pick = next(i for i in range(n) if tuple(pts[i]) not in seen)
        else:
            pick = int(rng.choice(n, p=d2 / total))
        centers[c] = pts[pick]
        d2 = np.minimum(d2, ((pts - centers[c]) ** 2).sum(axis=1))
    return centers


def kmeans(points, k: int, seed: int, max_iter: int = 300) -> ClusterModel:
    """Lloyd iterations from a seeded k-means++ start.

    Runs to an assignment fixpoint or max_iter. Ties in the nearest-center
    assignment go to the lowest cluster index. A cluster that empties is
    re-seeded with the point farthest from its own center. The recorded
    dispersion history never increases.
    """
    pts = _as_points(points)
    n = pts.shape[0]
    distinct = np.unique(pts, axis=0).shape[0]
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > distinct:
        raise KTooLarge(f"k={k} exceeds the {distinct} distinct points")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")

    rng = np.random.default_rng(seed)
    centers = _kmeanspp_init(pts, k, rng)
    assign = None
    history = []
    for _ in range(max_iter):
        d2 = ((pts[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new_assign = d2.argmin(axis=1)
        moved = set()
        for c in range(k):
            if (new_assign == c).any():
                continue
            own = d2[np.arange(n), new_assign]
            candidates = [i for i in range(n) if i not in moved]
            far = max(candidates, key=lambda i: (own[i], -i))
            new_assign[far] = c
            moved.add(far)
        if assign is not None and np.array_equal(new_assign, assign):
            break
        assign = new_assign
        centers = np.stack([pts[assign == c].mean(axis=0) for c in range(k)])
        history.append(float(((pts - centers[assign]) ** 2).sum()))

    assign.setflags(write=False)
    centers.setflags(write=False)
    sil = silhouette(pts, assign) if k >= 2 else None
    return ClusterModel(
        k=k,
        centers=centers,
        assignments=assign,
        dispersion=history[-1],
        d_history=tuple(history),
        silhouette=sil,
    )


def silhouette(points, assignments) -> float:
    """Mean silhouette: (b - a) / max(a, b) per point, 0/0 taken as 0.

    a is the mean distance to the rest of the point's own cluster; b is the
    smallest mean distance to any other cluster. Points in singleton
    clusters contribute 0.
    """
    pts = _as_points(points)
    assign = np.asarray(assignments)
    labels = np.unique(assign)
    if labels.size < 2:
        raise SingleCluster("silhouette needs at least two clusters")
    dist = np.sqrt(((pts[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2))
    scores = np.zeros(pts.shape[0])
    masks = {lab: assign == lab for lab in labels}
    for i in range(pts.shape[0]):
        own = masks[assign[i]]
        if own.sum() == 1:
            continue
        a = dist[i, own].sum() / (own.sum() - 1)
        b = min(dist[i, masks[lab]].mean() for lab in labels if lab != assign[i])
        denom = max(a, b)
        scores[i] = 0.0 if denom == 0 else (b - a) / denom
    return float(scores.mean())


def select_k(points, k_min: int, k_max: int, seed: int, override: int | None = None):
    """Silhouette sweep over k_min..k_max; returns (chosen k, per-k table).

    The argmax-silhouette k wins unless override is given; the full table
    is returned either way so the report shows what the override rejected.
    """
    pts = _as_points(points)
    distinct = np.unique(pts, axis=0).shape[0]
    if not 2 <= k_min <= k_max:
        raise ValueError("need 2 <= k_min <= k_max")
    if k_max > distinct:
        raise KTooLarge(f"k_max={k_max} exceeds the {distinct} distinct points")
    table = []
    for k in range(k_min, k_max + 1):
        table.append((k, kmeans(pts, k, seed).silhouette))
    best_k = max(table, key=lambda item: item[1])[0]
    if override is not None:
        if not 2 <= override <= distinct:
            raise KTooLarge(f"override k={override} outside 2..{distinct}")
        return override, tuple(table)
    return best_k, tuple(table)


_SEVEN_GRADES = ("Special", "Privileged", "Rank-1", "Rank-2", "Rank-3", "Rank-4", "Rank-5")


def grade_labels_for(k: int) -> tuple:
    if k == 7:
        return _SEVEN_GRADES
    return tuple(f"Grade-{i}" for i in range(1, k + 1))


@dataclass(frozen=True)
class ClusterGrading:
    """Clusters ordered best-to-worst by center efficiency, with labels."""

    order: tuple  # cluster indices, descending center efficiency
    labels: tuple  # grade label per position in `order`
    center_efficiency: tuple  # mean member score per position in `order`

    def label_of_cluster(self, cluster: int) -> str:
        return self.labels[self.order.index(cluster)]


def grade_clusters(model: ClusterModel, rho_per_point) -> ClusterGrading:
    """Order clusters by descending center efficiency and attach grade labels.

    Center efficiency is the mean score of the cluster's members, so the
    grading depends only on the partition, never on cluster numbering.
    """
    rho = np.asarray(rho_per_point, dtype=float)
    if rho.shape[0] != model.assignments.shape[0]:
        raise ValueError("rho_per_point must align with the clustered points")
    eff = [float(rho[model.assignments == c].mean()) for c in range(model.k)]
    order = sorted(range(model.k), key=lambda c: (-eff[c], c))
    return ClusterGrading(
        order=tuple(order),
        labels=grade_labels_for(model.k),
        center_efficiency=tuple(eff[c] for c in order),
    )
