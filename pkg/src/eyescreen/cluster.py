"""Ward-linkage agglomerative clustering, PCA projection and cluster profiles."""
from __future__ import annotations

from dataclasses import dataclass
from math import comb
from typing import Sequence

import numpy as np
import pandas as pd

from .errors import DataError

SPECTRUM = ("proficient", "average", "poor")


@dataclass
class Dendrogram:
    """Merge history. Row ``i`` of ``merges`` joins ``a < b`` into cluster ``n + i``.

    Cluster ids follow the usual linkage-matrix convention: leaves are
    ``0..n-1`` and the ``i``-th merge creates ``n + i``. Heights are
    ``sqrt(2 * ward_cost_increase)``, i.e. plain Euclidean distance for two
    singletons.
    """

    merges: np.ndarray  # (n-1, 2) int
    heights: np.ndarray  # (n-1,)
    sizes: np.ndarray  # (n-1,) int
    n_leaves: int

    def to_dict(self) -> dict:
        return {
            "n_leaves": self.n_leaves,
            "merges": [
                {"a": int(a), "b": int(b), "height": float(h), "size": int(s)}
                for (a, b), h, s in zip(self.merges, self.heights, self.sizes)
            ],
        }

    def linkage_matrix(self) -> np.ndarray:
        return np.column_stack([self.merges.astype(float), self.heights, self.sizes.astype(float)])


@dataclass
class ClusterAssignment:
    labels: np.ndarray
    k: int


@dataclass
class PcaProjection:
    components: np.ndarray  # (n_components, d), rows are unit vectors
    explained_variance_ratio: np.ndarray
    mean: np.ndarray
    coords: np.ndarray  # (n, n_components)


def ward_agglomerate(X) -> Dendrogram:
    """Naive Ward agglomeration with Lance-Williams distance updates.

    The working matrix holds ``2 * ward_cost`` (squared Euclidean distance
    between singletons). A merged cluster lives in the lower of its two
    slots, so a slot index is always the smallest row index among its
    members; equal costs resolve to the lexicographically lowest slot pair.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise DataError("Ward clustering needs at least two rows")
    if not np.all(np.isfinite(X)):
        raise DataError("Ward clustering needs finite input")
    n = X.shape[0]
    if n <= 600:
        D = ((X[:, None, :] - X[None, :, :]) ** 2).sum(axis=2)
    else:
        sq = (X * X).sum(axis=1)
        D = np.maximum(sq[:, None] + sq[None, :] - 2.0 * X @ X.T, 0.0)
    np.fill_diagonal(D, np.inf)

    size = np.ones(n, dtype=np.int64)
    cid = np.arange(n)
    active = np.ones(n, dtype=bool)
    merges = np.empty((n - 1, 2), dtype=np.int64)
    heights = np.empty(n - 1)
    sizes = np.empty(n - 1, dtype=np.int64)

    for step in range(n - 1):
        flat = int(np.argmin(D))
        i, j = divmod(flat, n)
        if i > j:
            i, j = j, i
        dij = D[i, j]
        ni, nj = size[i], size[j]
        a, b = sorted((cid[i], cid[j]))
        merges[step] = (a, b)
        heights[step] = np.sqrt(max(dij, 0.0))
        sizes[step] = ni + nj

        nk = size.astype(np.float64)
        new = ((ni + nk) * D[i] + (nj + nk) * D[j] - nk * dij) / (ni + nj + nk)
        active[j] = False
        new[~active] = np.inf
        new[i] = np.inf
        D[i, :] = new
        D[:, i] = new
        D[j, :] = np.inf
        D[:, j] = np.inf
        size[i] = ni + nj
        cid[i] = n + step
    return Dendrogram(merges, heights, sizes, n)


def cut(dendrogram: Dendrogram, k: int) -> ClusterAssignment:
    """Undo the last ``k - 1`` merges; ids follow each cluster's smallest row."""
    n = dendrogram.n_leaves
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    parent = np.arange(2 * n - 1)

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for step in range(n - k):
        a, b = dendrogram.merges[step]
        parent[find(a)] = n + step
        parent[find(b)] = n + step
    roots = np.array([find(i) for i in range(n)])
    labels = np.empty(n, dtype=np.int64)
    mapping: dict[int, int] = {}
    for i, r in enumerate(roots):
        if r not in mapping:
            mapping[r] = len(mapping)
        labels[i] = mapping[r]
    return ClusterAssignment(labels, k)


def pca_project(X, n_components: int = 2) -> PcaProjection:
    """Principal axes via SVD of the centred data.

    Each axis is signed so its largest-magnitude loading is positive.
    """
    X = np.asarray(X, dtype=np.float64)
    n, d = X.shape
    if n < 2 or d < 1:
        raise DataError("PCA needs at least two rows")
    if not 1 <= n_components <= min(n, d):
        raise ValueError(f"n_components must be in [1, {min(n, d)}]")
    mean = X.mean(axis=0)
    Xc = X - mean
    _, s, vt = np.linalg.svd(Xc, full_matrices=False)
    var = s ** 2 / (n - 1)
    total = var.sum()
    if total <= 0:
        raise DataError("data has zero variance; no principal direction")
    comps = vt[:n_components].copy()
    for row in comps:
        j = int(np.argmax(np.abs(row)))
        if row[j] < 0:
            row *= -1.0
    ratios = var[:n_components] / total
    return PcaProjection(comps, ratios, mean, Xc @ comps.T)


def profile_clusters(X, assignment: ClusterAssignment, feature_names: Sequence[str],
                     order_by: str = "dwell_time") -> dict:
    """Per-cluster mean/median/count of each feature.

    Clusters are additionally ranked by mean ``order_by`` (ascending); with
    three clusters the ranks read proficient, average, poor.
    """
    X = np.asarray(X, dtype=np.float64)
    names = list(feature_names)
    rows = []
    means = {}
    for c in range(assignment.k):
        members = X[assignment.labels == c]
        stats = {}
        for j, name in enumerate(names):
            col = members[:, j]
            stats[name] = {"mean": float(col.mean()), "median": float(np.median(col)),
                           "count": int(col.size)}
        rows.append({"cluster": c, "size": int(members.shape[0]), "features": stats})
        if order_by in names:
            means[c] = stats[order_by]["mean"]
    ordering = sorted(means, key=lambda c: (means[c], c)) if means else list(range(assignment.k))
    if assignment.k == len(SPECTRUM):
        names_by_rank = list(SPECTRUM)
    else:
        names_by_rank = [f"rank_{r}" for r in range(assignment.k)]
    for rank, c in enumerate(ordering):
        rows[c]["rank"] = rank
        rows[c]["reader_group"] = names_by_rank[rank]
    return {"order_by": order_by if means else None, "ordering": ordering, "clusters": rows}


def profile_table(profile: dict) -> pd.DataFrame:
    recs = []
    for row in profile["clusters"]:
        for feat, st in row["features"].items():
            recs.append({"cluster": row["cluster"], "reader_group": row.get("reader_group"),
                         "feature": feat, **st})
    return pd.DataFrame(recs)


def adjusted_rand_index(a, b) -> float:
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError("partitions must have equal length")
    n = a.size
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1), dtype=np.int64)
    np.add.at(table, (ai, bi), 1)
    sum_cells = sum(comb(int(v), 2) for v in table.ravel())
    sum_a = sum(comb(int(v), 2) for v in table.sum(axis=1))
    sum_b = sum(comb(int(v), 2) for v in table.sum(axis=0))
    total = comb(n, 2)
    if total == 0:
        return 1.0
    expected = sum_a * sum_b / total
    max_index = (sum_a + sum_b) / 2
    if max_index == expected:
        return 1.0
    return float((sum_cells - expected) / (max_index - expected))


def aggregate(frame: pd.DataFrame, by: str, columns: Sequence[str]) -> pd.DataFrame:
    """Mean of each column per group, groups in first-appearance order."""
    return frame.groupby(by, sort=False)[list(columns)].mean()
