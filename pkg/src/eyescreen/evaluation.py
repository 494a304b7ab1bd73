"""Cross-validation, confusion matrices, classification metrics and ROC/AUC."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .errors import DataError
from .forest import HyperParams, predict_proba, train_forest

ROC_GRID = np.linspace(0.0, 1.0, 101)


@dataclass
class FoldPlan:
    folds: list[np.ndarray]
    seed: int
    stratified: bool

    @property
    def k(self) -> int:
        return len(self.folds)

    @property
    def n(self) -> int:
        return int(sum(f.size for f in self.folds))

    def train_test(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        test = self.folds[i]
        train = np.sort(np.concatenate([f for j, f in enumerate(self.folds) if j != i]))
        return train, test


class Confusion(NamedTuple):
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


class Metrics(NamedTuple):
    accuracy: float
    precision: float
    recall: float
    f1: float
    undefined: tuple[str, ...] = ()


def kfold_split(n: int, k: int = 9, seed: int = 0, stratify=None) -> FoldPlan:
    """Shuffle, then deal rows round-robin into ``k`` folds.

    With ``stratify`` each class is shuffled separately and the classes are
    dealt one after another, so every fold gets its share of each class.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    if k > n:
        raise ValueError(f"cannot split {n} rows into {k} folds")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), n, k]))
    if stratify is None:
        order = rng.permutation(n)
    else:
        labels = np.asarray(stratify)
        if labels.shape[0] != n:
            raise ValueError("stratify labels must have length n")
        parts = []
        for cls in np.unique(labels):
            members = np.flatnonzero(labels == cls)
            parts.append(members[rng.permutation(members.size)])
        order = np.concatenate(parts)
    assign = np.arange(n) % k
    folds = [np.sort(order[assign == i]) for i in range(k)]
    return FoldPlan(folds, int(seed), stratify is not None)


def confusion(y_true, y_pred) -> Confusion:
    t = np.asarray(y_true)
    p = np.asarray(y_pred)
    if t.shape != p.shape:
        raise ValueError(f"length mismatch: {t.shape[0]} labels vs {p.shape[0]} predictions")
    return Confusion(
        tp=int(np.sum((t == 1) & (p == 1))),
        fp=int(np.sum((t == 0) & (p == 1))),
        tn=int(np.sum((t == 0) & (p == 0))),
        fn=int(np.sum((t == 1) & (p == 0))),
    )


def metrics(c: Confusion) -> Metrics:
    """Zero-denominator ratios are reported as 0 and named in ``undefined``."""
    tp, fp, tn, fn = c
    if min(c) < 0:
        raise ValueError("confusion counts must be non-negative")
    total = tp + fp + tn + fn
    if total == 0:
        raise ValueError("empty confusion matrix")
    undefined = []
    accuracy = (tp + tn) / total
    if tp + fp:
        precision = tp / (tp + fp)
    else:
        precision = 0.0
        undefined.append("precision")
    if tp + fn:
        recall = tp / (tp + fn)
    else:
        recall = 0.0
        undefined.append("recall")
    if precision + recall:
        f1 = 2 * precision * recall / (precision + recall)
    else:
        f1 = 0.0
        undefined.append("f1")
    return Metrics(accuracy, precision, recall, f1, tuple(undefined))


def roc_curve(y_true, scores) -> np.ndarray:
    """(FPR, TPR) points from (0, 0) to (1, 1), one step per distinct score."""
    y = np.asarray(y_true)
    s = np.asarray(scores, dtype=np.float64)
    if y.shape != s.shape:
        raise ValueError("labels and scores must align")
    n_pos = int(np.sum(y == 1))
    n_neg = int(np.sum(y == 0))
    if n_pos == 0 or n_neg == 0:
        raise DataError("ROC needs both classes present")
    order = np.argsort(-s, kind="mergesort")
    s_sorted = s[order]
    y_sorted = y[order]
    tps = np.cumsum(y_sorted == 1)
    fps = np.cumsum(y_sorted == 0)
    # last index of each group of equal scores
    ends = np.flatnonzero(np.r_[s_sorted[1:] != s_sorted[:-1], True])
    fpr = np.r_[0.0, fps[ends] / n_neg]
    tpr = np.r_[0.0, tps[ends] / n_pos]
    return np.column_stack([fpr, tpr])


def auc(points) -> float:
    pts = np.asarray(points, dtype=np.float64)
    x, y = pts[:, 0], pts[:, 1]
    return float(np.sum((x[1:] - x[:-1]) * (y[1:] + y[:-1]) / 2.0))


def interpolate_roc(points, grid=ROC_GRID) -> np.ndarray:
    """TPR at each grid FPR, taking the top of vertical steps."""
    pts = np.asarray(points, dtype=np.float64)
    fpr, tpr = pts[:, 0], pts[:, 1]
    grid = np.asarray(grid, dtype=np.float64)
    # last point at or left of x (the top of any vertical step there) ...
    i = np.clip(np.searchsorted(fpr, grid, side="right") - 1, 0, fpr.size - 1)
    # ... joined to the first point strictly to its right
    j = np.minimum(i + 1, fpr.size - 1)
    span = fpr[j] - fpr[i]
    with np.errstate(invalid="ignore", divide="ignore"):
        w = np.where(span > 0, (grid - fpr[i]) / span, 0.0)
    return tpr[i] + np.clip(w, 0.0, 1.0) * (tpr[j] - tpr[i])


# --------------------------------------------------------------------------


@dataclass
class FoldResult:
    index: int
    n_train: int
    n_test: int
    confusion: Confusion
    metrics: Metrics
    auc: float | None
    roc: np.ndarray | None
    flags: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "fold": self.index,
            "n_train": self.n_train,
            "n_test": self.n_test,
            "confusion": self.confusion._asdict(),
            "accuracy": self.metrics.accuracy,
            "precision": self.metrics.precision,
            "recall": self.metrics.recall,
            "f1": self.metrics.f1,
            "undefined": list(self.metrics.undefined),
            "auc": self.auc,
            "roc": None if self.roc is None else self.roc.tolist(),
            "flags": self.flags,
        }


@dataclass
class EvalReport:
    folds: list[FoldResult]
    mean_metrics: dict[str, float]
    mean_confusion: dict[str, float]
    mean_roc: np.ndarray | None
    mean_auc: float | None
    params: HyperParams | None = None
    feature_names: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        from dataclasses import asdict

        return {
            "k": len(self.folds),
            "feature_names": self.feature_names,
            "params": None if self.params is None else asdict(self.params),
            "mean": self.mean_metrics,
            "mean_confusion": self.mean_confusion,
            "mean_auc": self.mean_auc,
            "mean_roc": None if self.mean_roc is None else {
                "fpr": ROC_GRID.tolist(), "tpr": self.mean_roc.tolist()},
            "folds": [f.to_dict() for f in self.folds],
        }


def summarize(folds: Sequence[FoldResult]) -> tuple[dict, dict, np.ndarray | None, float | None]:
    mean_metrics = {
        name: float(np.mean([getattr(f.metrics, name) for f in folds]))
        for name in ("accuracy", "precision", "recall", "f1")
    }
    mean_confusion = {
        name: float(np.mean([getattr(f.confusion, name) for f in folds]))
        for name in Confusion._fields
    }
    curves = [interpolate_roc(f.roc) for f in folds if f.roc is not None]
    mean_roc = np.mean(curves, axis=0) if curves else None
    aucs = [f.auc for f in folds if f.auc is not None]
    mean_auc = float(np.mean(aucs)) if aucs else None
    return mean_metrics, mean_confusion, mean_roc, mean_auc


def cross_validate(X, y, params: HyperParams, plan: FoldPlan, balance: bool = True,
                   feature_names: Sequence[str] | None = None, n_jobs: int = 1,
                   fit_predict=None) -> EvalReport:
    """Train on each fold's complement, score the held-out fold.

    Balancing (majority down-sampling) only ever touches training rows.
    ``fit_predict(X_train, y_train, X_test) -> scores`` swaps out the forest,
    mainly for tests.
    """
    from .tune import balance_resample

    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if plan.n != X.shape[0]:
        raise ValueError(f"fold plan covers {plan.n} rows, data has {X.shape[0]}")

    folds = []
    for i in range(plan.k):
        train, test = plan.train_test(i)
        Xtr, ytr = X[train], y[train]
        flags = []
        if balance:
            if np.unique(ytr).size == 2:
                Xtr, ytr = balance_resample(Xtr, ytr, seed=params.seed + i)
            else:
                flags.append("training fold has one class; not balanced")
        if fit_predict is None:
            model = train_forest(Xtr, ytr, params, feature_names=feature_names, n_jobs=n_jobs)
            scores = predict_proba(model, X[test])
        else:
            scores = np.asarray(fit_predict(Xtr, ytr, X[test]), dtype=np.float64)
        pred = (scores > 0.5).astype(np.int64)
        c = confusion(y[test], pred)
        roc = fold_auc = None
        if np.unique(y[test]).size == 2:
            roc = roc_curve(y[test], scores)
            fold_auc = auc(roc)
        else:
            flags.append("test fold has one class; ROC skipped")
        folds.append(FoldResult(i, int(ytr.size), int(test.size), c, metrics(c), fold_auc, roc, flags))

    mean_metrics, mean_confusion, mean_roc, mean_auc = summarize(folds)
    return EvalReport(folds, mean_metrics, mean_confusion, mean_roc, mean_auc, params,
                      list(feature_names or []))
