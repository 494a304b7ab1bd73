"""Class balancing, surrogate-guided hyperparameter search and feature selection."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import DataError
from .evaluation import kfold_split
from .forest import HyperParams, feature_importance, predict, train_forest

DEFAULT_DIMENSIONS: dict[str, tuple[float, float, str]] = {
    "n_trees": (10, 100, "int"),
    "max_depth": (3, 30, "int"),
    "min_samples_leaf": (1, 10, "int"),
    "max_features": (0.1, 1.0, "float"),
}

# Reference set of impactful features, compared against each ranking for
# information only. It overlaps the default leakage exclusions (both
# regression counts, saccade_duration), so full agreement is not expected.
REFERENCE_ENHANCED = (
    "regression_in_count", "first_run_fixation_count", "saccade_duration", "ia_right",
    "first_fixation_time", "regression_out_count", "first_fixation_index", "first_fixation_y",
    "first_fixation_x", "word_number", "skip", "word_length",
)


def balance_resample(X, y, seed: int = 0):
    """Down-sample the majority class (without replacement) to the minority size.

    Rows keep their original relative order.
    """
    X = np.asarray(X)
    y = np.asarray(y)
    classes, counts = np.unique(y, return_counts=True)
    if classes.size < 2:
        raise DataError("balancing needs two classes")
    if classes.size > 2:
        raise DataError("balancing supports binary labels only")
    n_min = int(counts.min())
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 7]))
    keep = []
    for cls, cnt in zip(classes, counts):
        members = np.flatnonzero(y == cls)
        if cnt > n_min:
            members = np.sort(rng.choice(members, size=n_min, replace=False))
        keep.append(members)
    rows = np.sort(np.concatenate(keep))
    return X[rows], y[rows]


def subsample(X, y, max_rows: int | None, seed: int):
    if max_rows is None or len(y) <= max_rows:
        return np.asarray(X), np.asarray(y)
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 11]))
    rows = np.sort(rng.choice(len(y), size=int(max_rows), replace=False))
    return np.asarray(X)[rows], np.asarray(y)[rows]


def cv_accuracy(X, y, params: HyperParams, k: int = 3, seed: int = 0, n_jobs: int = 1) -> float:
    """Mean held-out accuracy of a forest over a stratified k-fold plan."""
    y = np.asarray(y, dtype=np.int64)
    plan = kfold_split(len(y), k=k, seed=seed, stratify=y)
    accs = []
    for i in range(plan.k):
        train, test = plan.train_test(i)
        if np.unique(y[train]).size < 2:
            pred = np.full(test.size, y[train][0])
        else:
            model = train_forest(X[train], y[train], params, n_jobs=n_jobs)
            pred = predict(model, X[test])
        accs.append(float(np.mean(pred == y[test])))
    return float(np.mean(accs))


def _majority_accuracy(y, k: int, seed: int) -> float:
    y = np.asarray(y, dtype=np.int64)
    plan = kfold_split(len(y), k=k, seed=seed, stratify=y)
    accs = []
    for i in range(plan.k):
        train, test = plan.train_test(i)
        majority = 1 if 2 * y[train].sum() > train.size else 0
        accs.append(float(np.mean(y[test] == majority)))
    return float(np.mean(accs))


# --------------------------------------------------------------------------


@dataclass
class SearchSpace:
    dimensions: dict[str, tuple[float, float, str]] = field(default_factory=lambda: dict(DEFAULT_DIMENSIONS))
    n_initial: int = 8
    n_iterations: int = 25
    n_candidates: int = 64
    n_neighbors: int = 3
    exploration: float = 0.1
    seed: int = 0

    def __post_init__(self):
        for name, (lo, hi, kind) in self.dimensions.items():
            if name not in HyperParams.__dataclass_fields__:
                raise ValueError(f"unknown hyperparameter {name!r}")
            if kind not in ("int", "float"):
                raise ValueError(f"{name}: kind must be 'int' or 'float'")
            if not lo <= hi:
                raise ValueError(f"{name}: bounds out of order ({lo}, {hi})")
        if self.n_initial < 1 or self.n_iterations < 0:
            raise ValueError("budget must have n_initial >= 1 and n_iterations >= 0")

    @property
    def budget(self) -> int:
        return self.n_initial + self.n_iterations

    @classmethod
    def from_mapping(cls, m: Mapping | None) -> "SearchSpace":
        m = dict(m or {})
        if "dimensions" in m:
            m["dimensions"] = {k: (v[0], v[1], v[2]) for k, v in m["dimensions"].items()}
        return cls(**m)

    def decode(self, u: np.ndarray) -> dict:
        out = {}
        for ui, (name, (lo, hi, kind)) in zip(u, self.dimensions.items()):
            if kind == "int":
                out[name] = int(min(hi, lo + np.floor(ui * (hi - lo + 1))))
            else:
                out[name] = float(lo + ui * (hi - lo))
        return out

    def encode(self, config: Mapping) -> np.ndarray:
        return np.array([
            0.0 if hi == lo else (config[name] - lo) / (hi - lo)
            for name, (lo, hi, _) in self.dimensions.items()
        ])

    def contains(self, config: Mapping) -> bool:
        return all(lo <= config[name] <= hi for name, (lo, hi, _) in self.dimensions.items())


@dataclass
class TuneTrace:
    history: list[dict] = field(default_factory=list)

    @property
    def best_index(self) -> int:
        scores = [h["score"] for h in self.history]
        return int(np.argmax(scores))

    @property
    def best_config(self) -> dict:
        return dict(self.history[self.best_index]["config"])

    @property
    def best_score(self) -> float:
        return float(self.history[self.best_index]["score"])

    def to_dict(self) -> dict:
        return {"history": self.history, "best_config": self.best_config,
                "best_score": self.best_score, "best_index": self.best_index}


def _acquisition(cands: np.ndarray, seen: np.ndarray, scores: np.ndarray, best: float,
                 k: int, exploration: float) -> np.ndarray:
    # k-NN surrogate: neighbour mean + spread as optimistic estimate, plus distance bonus
    dist = np.sqrt(((cands[:, None, :] - seen[None, :, :]) ** 2).sum(axis=2))
    k = min(k, seen.shape[0])
    nn = np.argsort(dist, axis=1, kind="stable")[:, :k]
    nn_scores = scores[nn]
    mu = nn_scores.mean(axis=1)
    sigma = nn_scores.std(axis=1)
    mean_dist = np.take_along_axis(dist, nn, axis=1).mean(axis=1)
    return np.maximum(0.0, mu + sigma - best) + exploration * mean_dist


def bayes_tune(X, y, space: SearchSpace | None = None, cv_folds: int = 3, seed: int | None = None,
               base_params: HyperParams | None = None,
               objective: Callable[[HyperParams], float] | None = None,
               n_jobs: int = 1) -> TuneTrace:
    """Sequential model-based search over forest hyperparameters.

    ``n_initial`` uniformly random configurations are scored first; every
    later round scores the one of ``n_candidates`` random proposals with the
    highest acquisition value under a k-nearest-neighbour surrogate fitted in
    the unit-cube encoding of the space. The default objective is stratified
    k-fold CV accuracy.
    """
    space = space or SearchSpace()
    if cv_folds < 2:
        raise ValueError("cv_folds must be >= 2")
    seed = space.seed if seed is None else int(seed)
    base = base_params or HyperParams(seed=seed)
    if objective is None:
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)

        def objective(p: HyperParams) -> float:
            return cv_accuracy(X, y, p, k=cv_folds, seed=seed, n_jobs=n_jobs)

    rng = np.random.default_rng(np.random.SeedSequence([seed, 3]))
    dims = len(space.dimensions)
    trace = TuneTrace()
    seen: list[np.ndarray] = []
    scores: list[float] = []

    def evaluate(config: dict, phase: str, acq: float | None) -> None:
        params = replace(base, **config)
        score = float(objective(params))
        trace.history.append({"config": config, "score": score, "phase": phase, "acquisition": acq})
        seen.append(space.encode(config))
        scores.append(score)

    for _ in range(space.n_initial):
        evaluate(space.decode(rng.random(dims)), "initial", None)
    for _ in range(space.n_iterations):
        cand_u = rng.random((space.n_candidates, dims))
        configs = [space.decode(u) for u in cand_u]
        enc = np.array([space.encode(c) for c in configs])
        acq = _acquisition(enc, np.array(seen), np.array(scores), max(scores),
                           space.n_neighbors, space.exploration)
        j = int(np.argmax(acq))
        evaluate(configs[j], "guided", float(acq[j]))
    return trace


# --------------------------------------------------------------------------


@dataclass
class Selection:
    selected: list[str]
    scores: list[float]
    baseline: float
    rounds: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def forward_select(X, y, feature_names: Sequence[str], candidates: Sequence[str] | None = None,
                   max_k: int = 12, epsilon: float = 1e-4, seed: int = 0,
                   params: HyperParams | None = None, cv_folds: int = 3, n_jobs: int = 1) -> Selection:
    """Greedy forward selection by stratified k-fold CV accuracy.

    The starting score is the accuracy of predicting each training fold's
    majority class, so a first feature must beat that by ``epsilon``.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    names = list(feature_names)
    candidates = list(names if candidates is None else candidates)
    missing = [c for c in candidates if c not in names]
    if missing:
        raise DataError(f"unknown candidate features: {missing}")
    params = params or HyperParams(n_trees=25, seed=seed)
    current = _majority_accuracy(y, cv_folds, seed)
    result = Selection([], [], current)
    remaining = list(candidates)
    while remaining and len(result.selected) < max_k:
        round_scores = {}
        for cand in remaining:
            cols = [names.index(c) for c in result.selected + [cand]]
            p = params
            if isinstance(p.max_features, int) and p.max_features > len(cols):
                p = replace(p, max_features=len(cols))
            round_scores[cand] = cv_accuracy(X[:, cols], y, p, k=cv_folds, seed=seed, n_jobs=n_jobs)
        best = max(remaining, key=lambda c: (round_scores[c], -remaining.index(c)))
        result.rounds.append({"scores": round_scores, "best": best})
        if round_scores[best] - current < epsilon:
            break
        current = round_scores[best]
        result.selected.append(best)
        result.scores.append(current)
        remaining.remove(best)
    return result


@dataclass
class Enhanced:
    ranking: list[tuple[str, float]]
    excluded: list[str]
    trace: TuneTrace
    n_rows: int

    def reference_check(self, top: int = len(REFERENCE_ENHANCED)) -> dict:
        ranked = [f for f, _ in self.ranking[:top]]
        return {
            "reference": list(REFERENCE_ENHANCED),
            "top": top,
            "matched": [f for f in REFERENCE_ENHANCED if f in ranked],
            "excluded_by_config": [f for f in REFERENCE_ENHANCED if f in self.excluded],
        }

    def to_dict(self) -> dict:
        return {
            "ranking": [{"feature": f, "importance": v} for f, v in self.ranking],
            "reference_check": self.reference_check(),
            "excluded": self.excluded,
            "tune": self.trace.to_dict(),
            "n_rows": self.n_rows,
        }


def enhanced_features(X, y, feature_names: Sequence[str], exclusions: Sequence[str], seed: int = 0,
                      space: SearchSpace | None = None, cv_folds: int = 3,
                      max_rows: int | None = None, n_jobs: int = 1) -> Enhanced:
    """Importance ranking of the non-label features on balanced data.

    Columns in ``exclusions`` (the label's own constituents) never reach the
    forest, so they cannot leak the target into the ranking.
    """
    names = list(feature_names)
    kept = [n for n in names if n not in set(exclusions)]
    if not kept:
        raise DataError("leakage exclusions remove every feature")
    Xk = np.asarray(X, dtype=np.float64)[:, [names.index(n) for n in kept]]
    Xs, ys = subsample(Xk, y, max_rows, seed)
    Xb, yb = balance_resample(Xs, ys, seed=seed)
    trace = bayes_tune(Xb, yb, space, cv_folds=cv_folds, seed=seed, n_jobs=n_jobs)
    params = replace(HyperParams(seed=seed), **trace.best_config)
    model = train_forest(Xb, yb, params, feature_names=kept, n_jobs=n_jobs)
    imp = feature_importance(model)
    order = sorted(range(len(kept)), key=lambda i: (-imp[i], i))
    return Enhanced([(kept[i], float(imp[i])) for i in order], [n for n in names if n not in kept],
                    trace, int(yb.size))
