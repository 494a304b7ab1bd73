"""CART decision trees and a bagged random forest classifier (binary labels).

The split search and prediction loops are compiled with numba. Every tree
draws its bootstrap rows and per-node feature subsets from a private
stream derived from ``(seed, tree_index)``, so a forest is identical no
matter how many worker threads build it.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numba
import numpy as np

from .errors import DataError

MODEL_FORMAT_VERSION = 1

_MASK64 = np.uint64(0xFFFFFFFFFFFFFFFF)


@dataclass(frozen=True)
class HyperParams:
    n_trees: int = 100
    max_depth: int | None = None
    min_samples_split: int = 2
    min_samples_leaf: int = 1
    # int = count per split, float in (0, 1] = fraction of columns, None = floor(sqrt(d))
    max_features: int | float | None = None
    bootstrap_fraction: float = 1.0
    bootstrap: bool = True
    seed: int = 0

    def validate(self, n_features: int | None = None) -> None:
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.min_samples_split < 2:
            raise ValueError("min_samples_split must be >= 2")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be >= 1")
        if self.max_depth is not None and self.max_depth < 0:
            raise ValueError("max_depth must be >= 0 or None")
        if not self.bootstrap_fraction > 0:
            raise ValueError("bootstrap_fraction must be > 0")
        if n_features is not None:
            self.resolve_max_features(n_features)

    def resolve_max_features(self, d: int) -> int:
        mf = self.max_features
        if mf is None:
            m = max(1, int(math.isqrt(d)))
        elif isinstance(mf, float):
            if not 0.0 < mf <= 1.0:
                raise ValueError(f"max_features fraction must be in (0, 1], got {mf}")
            m = max(1, int(math.floor(mf * d)))
        else:
            m = int(mf)
        if not 1 <= m <= d:
            raise ValueError(f"max_features={mf} resolves to {m}, outside [1, {d}]")
        return m


@dataclass
class DecisionTree:
    """Flat node arrays; ``feature == -1`` marks a leaf.

    ``count0``/``count1`` hold training class counts for every node, and
    ``importance`` holds ``(n_node / n_root) * gini_decrease`` for internal
    nodes (zero at leaves).
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    count0: np.ndarray
    count1: np.ndarray
    importance: np.ndarray

    @property
    def n_nodes(self) -> int:
        return int(self.feature.shape[0])

    @property
    def n_splits(self) -> int:
        return int(np.count_nonzero(self.feature >= 0))

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "count0": self.count0.tolist(),
            "count1": self.count1.tolist(),
            "importance": self.importance.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DecisionTree":
        return cls(
            feature=np.asarray(d["feature"], dtype=np.int64),
            threshold=np.asarray(d["threshold"], dtype=np.float64),
            left=np.asarray(d["left"], dtype=np.int64),
            right=np.asarray(d["right"], dtype=np.int64),
            count0=np.asarray(d["count0"], dtype=np.int64),
            count1=np.asarray(d["count1"], dtype=np.int64),
            importance=np.asarray(d["importance"], dtype=np.float64),
        )


@dataclass
class ForestModel:
    trees: list[DecisionTree]
    params: HyperParams
    feature_names: list[str]
    importances: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.importances is None:
            self.importances = feature_importance(self)

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def predict_proba(self, X) -> np.ndarray:
        return predict_proba(self, X)

    def predict(self, X) -> np.ndarray:
        return predict(self, X)

    def to_dict(self) -> dict:
        return {
            "format_version": MODEL_FORMAT_VERSION,
            "feature_names": list(self.feature_names),
            "params": asdict(self.params),
            "importances": self.importances.tolist(),
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ForestModel":
        if d.get("format_version") != MODEL_FORMAT_VERSION:
            raise ValueError(f"unsupported model format {d.get('format_version')!r}")
        return cls(
            trees=[DecisionTree.from_dict(t) for t in d["trees"]],
            params=HyperParams(**d["params"]),
            feature_names=list(d["feature_names"]),
            importances=np.asarray(d["importances"], dtype=np.float64),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def loads(cls, text: str) -> "ForestModel":
        return cls.from_dict(json.loads(text))


# --------------------------------------------------------------------------
# compiled kernels


@numba.njit(cache=True, nogil=True)
def _splitmix64(state):
    state[0] = state[0] + np.uint64(0x9E3779B97F4A7C15)
    z = state[0]
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@numba.njit(cache=True, nogil=True)
def _grow(X, y, rows, max_features, max_depth, min_split, min_leaf, seed):
    n = rows.shape[0]
    d = X.shape[1]
    cap = 2 * n + 1
    feature = np.full(cap, -1, np.int64)
    threshold = np.zeros(cap, np.float64)
    left = np.full(cap, -1, np.int64)
    right = np.full(cap, -1, np.int64)
    count0 = np.zeros(cap, np.int64)
    count1 = np.zeros(cap, np.int64)
    importance = np.zeros(cap, np.float64)

    idx = rows.copy()
    buf = np.empty(n, np.int64)
    vals = np.empty(n, np.float64)
    labs = np.empty(n, np.int64)
    perm = np.arange(d)
    state = np.empty(1, np.uint64)
    state[0] = np.uint64(seed)

    st_node = np.empty(cap, np.int64)
    st_start = np.empty(cap, np.int64)
    st_end = np.empty(cap, np.int64)
    st_depth = np.empty(cap, np.int64)
    top = 0
    st_node[0] = 0
    st_start[0] = 0
    st_end[0] = n
    st_depth[0] = 0
    top = 1
    n_nodes = 1

    while top > 0:
        top -= 1
        node = st_node[top]
        start = st_start[top]
        end = st_end[top]
        depth = st_depth[top]
        m = end - start

        c1 = 0
        for i in range(start, end):
            c1 += y[idx[i]]
        c0 = m - c1
        count0[node] = c0
        count1[node] = c1
        if c0 == 0 or c1 == 0:
            continue
        if max_depth >= 0 and depth >= max_depth:
            continue
        if m < min_split:
            continue

        # partial Fisher-Yates: first max_features entries of perm
        for i in range(d):
            perm[i] = i
        for i in range(max_features):
            j = i + np.int64(_splitmix64(state) % np.uint64(d - i))
            tmp = perm[i]
            perm[i] = perm[j]
            perm[j] = tmp

        best_score = -1.0
        best_f = -1
        best_t = 0.0
        for k in range(max_features):
            f = perm[k]
            for i in range(m):
                vals[i] = X[idx[start + i], f]
            order = np.argsort(vals[:m], kind="mergesort")
            if vals[order[0]] == vals[order[m - 1]]:
                continue
            for i in range(m):
                labs[i] = y[idx[start + order[i]]]
            nl1 = 0
            for i in range(m - 1):
                nl1 += labs[i]
                lo = vals[order[i]]
                hi = vals[order[i + 1]]
                if lo == hi:
                    continue
                nl = i + 1
                nr = m - nl
                if nl < min_leaf or nr < min_leaf:
                    continue
                nl0 = nl - nl1
                nr1 = c1 - nl1
                nr0 = nr - nr1
                score = (nl0 * nl0 + nl1 * nl1) / nl + (nr0 * nr0 + nr1 * nr1) / nr
                t = lo + (hi - lo) / 2.0
                if t >= hi:
                    t = lo
                if score > best_score or (
                    score == best_score and (f < best_f or (f == best_f and t < best_t))
                ):
                    best_score = score
                    best_f = f
                    best_t = t

        if best_f < 0:
            continue

        parent_sq = (c0 * c0 + c1 * c1) / m
        delta = (best_score - parent_sq) / m
        if delta < 0.0:
            delta = 0.0
        importance[node] = (m / n) * delta
        feature[node] = best_f
        threshold[node] = best_t

        # stable partition of idx[start:end]
        nl = 0
        for i in range(start, end):
            if X[idx[i], best_f] <= best_t:
                buf[nl] = idx[i]
                nl += 1
        nr = 0
        for i in range(start, end):
            if not X[idx[i], best_f] <= best_t:
                buf[nl + nr] = idx[i]
                nr += 1
        for i in range(m):
            idx[start + i] = buf[i]

        lnode = n_nodes
        rnode = n_nodes + 1
        n_nodes += 2
        left[node] = lnode
        right[node] = rnode
        # right pushed first so the left subtree is expanded first
        st_node[top] = rnode
        st_start[top] = start + nl
        st_end[top] = end
        st_depth[top] = depth + 1
        top += 1
        st_node[top] = lnode
        st_start[top] = start
        st_end[top] = start + nl
        st_depth[top] = depth + 1
        top += 1

    return (
        feature[:n_nodes].copy(),
        threshold[:n_nodes].copy(),
        left[:n_nodes].copy(),
        right[:n_nodes].copy(),
        count0[:n_nodes].copy(),
        count1[:n_nodes].copy(),
        importance[:n_nodes].copy(),
    )


@numba.njit(cache=True, nogil=True)
def _tree_proba(X, feature, threshold, left, right, count0, count1, out):
    for r in range(X.shape[0]):
        node = 0
        while feature[node] >= 0:
            if X[r, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[r] += count1[node] / (count0[node] + count1[node])


# --------------------------------------------------------------------------


def _check_xy(X, y) -> tuple[np.ndarray, np.ndarray]:
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.ndim != 2:
        raise DataError("X must be two-dimensional")
    if X.shape[0] == 0:
        raise DataError("cannot train on zero rows")
    if y.shape[0] != X.shape[0]:
        raise DataError(f"X has {X.shape[0]} rows but y has {y.shape[0]}")
    if not np.all(np.isfinite(X)):
        raise DataError("X contains NaN or infinite values")
    if not np.all((y == 0) | (y == 1)):
        raise DataError("labels must be 0/1")
    return X, y.astype(np.int64)


def tree_seed_stream(seed: int, tree_index: int) -> np.random.Generator:
    """Counter-based generator private to one tree of one forest."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(tree_index)])))


def train_tree(X, y, params: HyperParams, rng: np.random.Generator, rows=None) -> DecisionTree:
    """Grow one CART tree on ``rows`` of (X, y) (all rows when omitted)."""
    X, y = _check_xy(X, y)
    params.validate(X.shape[1])
    if rows is None:
        rows = np.arange(X.shape[0], dtype=np.int64)
    rows = np.asarray(rows, dtype=np.int64)
    if rows.shape[0] == 0:
        raise DataError("cannot train on zero rows")
    seed = int(rng.integers(0, 2**63 - 1, dtype=np.int64))
    arrays = _grow(
        X,
        y,
        rows,
        params.resolve_max_features(X.shape[1]),
        -1 if params.max_depth is None else int(params.max_depth),
        int(params.min_samples_split),
        int(params.min_samples_leaf),
        seed,
    )
    return DecisionTree(*arrays)


def _bootstrap_rows(n: int, params: HyperParams, rng: np.random.Generator) -> np.ndarray:
    if not params.bootstrap:
        return np.arange(n, dtype=np.int64)
    size = max(1, int(round(params.bootstrap_fraction * n)))
    return rng.integers(0, n, size=size, dtype=np.int64)


def train_forest(X, y, params: HyperParams, feature_names: Sequence[str] | None = None,
                 n_jobs: int = 1) -> ForestModel:
    X, y = _check_xy(X, y)
    params.validate(X.shape[1])
    n = X.shape[0]
    if feature_names is None:
        feature_names = [f"x{i}" for i in range(X.shape[1])]
    if len(feature_names) != X.shape[1]:
        raise ValueError("feature_names length does not match X")

    def build(i: int) -> DecisionTree:
        rng = tree_seed_stream(params.seed, i)
        rows = _bootstrap_rows(n, params, rng)
        return train_tree(X, y, params, rng, rows=rows)

    if n_jobs > 1 and params.n_trees > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as ex:
            trees = list(ex.map(build, range(params.n_trees)))
    else:
        trees = [build(i) for i in range(params.n_trees)]
    return ForestModel(trees=trees, params=params, feature_names=list(feature_names))


def predict_proba(model: ForestModel, X) -> np.ndarray:
    """Mean over trees of the class-1 fraction in the reached leaf."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise DataError(
            f"expected {model.n_features} feature columns, got {X.shape[1] if X.ndim == 2 else X.ndim}"
        )
    out = np.zeros(X.shape[0], dtype=np.float64)
    for t in model.trees:
        _tree_proba(X, t.feature, t.threshold, t.left, t.right, t.count0, t.count1, out)
    return out / len(model.trees)


def predict(model: ForestModel, X) -> np.ndarray:
    # a 0.5 tie goes to class 0
    return (predict_proba(model, X) > 0.5).astype(np.int64)


def feature_importance(model: ForestModel) -> np.ndarray:
    """Weighted Gini decrease per feature, summed over trees, normalized to 1."""
    imp = np.zeros(model.n_features, dtype=np.float64)
    for t in model.trees:
        split = t.feature >= 0
        np.add.at(imp, t.feature[split], t.importance[split])
    total = imp.sum()
    if total > 0:
        imp /= total
    return imp
