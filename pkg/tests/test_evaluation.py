import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from eyescreen.errors import DataError
from eyescreen.evaluation import (ROC_GRID, Confusion, auc, confusion, cross_validate, interpolate_roc,
                                  kfold_split, metrics, roc_curve)
from eyescreen.forest import HyperParams
from oracles import concordance_auc


class TestKfold:
    def test_singletons(self):
        plan = kfold_split(9, 9)
        assert [f.size for f in plan.folds] == [1] * 9

    def test_size_rule(self):
        sizes = sorted(f.size for f in kfold_split(10, 9).folds)
        assert sizes == [1] * 8 + [2]

    def test_stratified_balanced_folds(self):
        y = np.r_[np.zeros(9, int), np.ones(9, int)]
        plan = kfold_split(18, 9, seed=3, stratify=y)
        assert all(sorted(y[f]) == [0, 1] for f in plan.folds)

    def test_partition_and_reproducible(self):
        a = kfold_split(100, 7, seed=5)
        b = kfold_split(100, 7, seed=5)
        assert np.array_equal(np.sort(np.concatenate(a.folds)), np.arange(100))
        assert all(np.array_equal(x, z) for x, z in zip(a.folds, b.folds))
        assert not all(np.array_equal(x, z) for x, z in zip(a.folds, kfold_split(100, 7, seed=6).folds))

    def test_errors(self):
        with pytest.raises(ValueError):
            kfold_split(3, 4)
        with pytest.raises(ValueError):
            kfold_split(3, 1)


class TestConfusionMetrics:
    def test_hand_counted(self):
        assert confusion([1, 1, 0, 0], [1, 0, 0, 1]) == Confusion(1, 1, 1, 1)

    def test_perfect(self):
        c = confusion([1, 0, 1], [1, 0, 1])
        assert c.fp == 0 and c.fn == 0

    def test_all_positive(self):
        assert confusion([1, 1, 0, 0], [1, 1, 1, 1]) == Confusion(2, 2, 0, 0)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            confusion([1, 0], [1])

    def test_half(self):
        m = metrics(Confusion(1, 1, 1, 1))
        assert (m.accuracy, m.precision, m.recall, m.f1) == (0.5, 0.5, 0.5, 0.5)
        assert m.undefined == ()

    def test_no_positive_predictions(self):
        m = metrics(Confusion(0, 0, 3, 2))
        assert m.precision == 0.0 and "precision" in m.undefined
        assert m.accuracy == 0.6

    def test_empty(self):
        with pytest.raises(ValueError):
            metrics(Confusion(0, 0, 0, 0))

    @settings(max_examples=100, deadline=None)
    @given(st.tuples(*[st.integers(0, 50)] * 4).filter(lambda c: sum(c) > 0))
    def test_formulas(self, c):
        tp, fp, tn, fn = c
        m = metrics(Confusion(*c))
        assert m.accuracy == (tp + tn) / sum(c)
        if tp + fp:
            assert m.precision == tp / (tp + fp)
        if tp + fn:
            assert m.recall == tp / (tp + fn)
        assert 0 <= m.f1 <= 1


class TestRoc:
    def test_hand_enumerated(self):
        pts = roc_curve([1, 0, 1, 0], [0.9, 0.8, 0.7, 0.1])
        np.testing.assert_array_equal(pts, [[0, 0], [0, 0.5], [0.5, 0.5], [0.5, 1], [1, 1]])
        assert auc(pts) == 0.75

    def test_perfect_separation(self):
        pts = roc_curve([0, 0, 1, 1], [0.1, 0.2, 0.8, 0.9])
        assert [0.0, 1.0] in pts.tolist()
        assert auc(pts) == 1.0

    def test_constant_scores(self):
        pts = roc_curve([0, 1, 0, 1], [0.5] * 4)
        np.testing.assert_array_equal(pts, [[0, 0], [1, 1]])
        assert auc(pts) == 0.5

    def test_single_class(self):
        with pytest.raises(DataError):
            roc_curve([1, 1], [0.2, 0.3])

    def test_random_scores_near_half(self):
        rng = np.random.default_rng(0)
        y = rng.integers(0, 2, 10_000)
        assert abs(auc(roc_curve(y, rng.random(10_000))) - 0.5) <= 0.02

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2**31), st.integers(2, 60), st.integers(2, 8))
    def test_equals_concordance(self, seed, n, levels):
        rng = np.random.default_rng(seed)
        y = rng.integers(0, 2, n)
        y[:2] = [0, 1]
        s = rng.integers(0, levels, n) / levels  # forces ties
        assert auc(roc_curve(y, s)) == pytest.approx(concordance_auc(y, s), abs=1e-9)

    def test_interpolation_takes_step_top(self):
        pts = np.array([[0, 0], [0, 0.5], [0.5, 0.5], [0.5, 1], [1, 1]])
        tpr = interpolate_roc(pts)
        assert tpr[0] == 0.5 and tpr[50] == 1.0 and tpr[25] == 0.5
        assert tpr.shape == ROC_GRID.shape


class TestCrossValidate:
    def test_perfect_model(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(90, 2))
        y = (X[:, 0] > 0).astype(int)
        plan = kfold_split(90, 9, stratify=y)
        rep = cross_validate(X, y, HyperParams(), plan, fit_predict=lambda a, b, t: (t[:, 0] > 0).astype(float))
        assert all(f.metrics.accuracy == 1.0 for f in rep.folds)
        assert rep.mean_auc == 1.0

    def test_shuffled_labels_near_chance(self):
        rng = np.random.default_rng(1)
        X = rng.normal(size=(450, 3))
        y = rng.permutation(np.r_[np.zeros(225, int), np.ones(225, int)])
        rep = cross_validate(X, y, HyperParams(n_trees=30, seed=1), kfold_split(450, 9, seed=1, stratify=y))
        assert abs(rep.mean_metrics["accuracy"] - 0.5) <= 0.05

    def test_balancing_only_touches_training(self):
        X = np.arange(100, dtype=float)[:, None]
        y = (np.arange(100) < 20).astype(int)
        plan = kfold_split(100, 5, stratify=y)
        seen = []

        def fit_predict(Xtr, ytr, Xte):
            seen.append(np.bincount(ytr).tolist())
            return np.zeros(len(Xte))

        rep = cross_validate(X, y, HyperParams(), plan, balance=True, fit_predict=fit_predict)
        assert seen == [[16, 16]] * 5
        assert all(f.n_test == 20 for f in rep.folds)
        assert all(f.confusion.fn + f.confusion.tp == 4 for f in rep.folds)

    def test_single_class_test_fold_flagged(self):
        X = np.arange(10, dtype=float)[:, None]
        y = np.r_[np.zeros(8, int), 1, 1]
        plan = kfold_split(10, 5, seed=0)
        rep = cross_validate(X, y, HyperParams(n_trees=3), plan, balance=False)
        skipped = [f for f in rep.folds if f.roc is None]
        assert skipped and all("ROC skipped" in f.flags[0] for f in skipped)
        for f in rep.folds:
            assert f.metrics.accuracy == (f.confusion.tp + f.confusion.tn) / f.confusion.total

    def test_report_json_shape(self):
        rng = np.random.default_rng(2)
        X = rng.normal(size=(60, 2))
        y = (X[:, 1] > 0).astype(int)
        d = cross_validate(X, y, HyperParams(n_trees=5), kfold_split(60, 3, stratify=y)).to_dict()
        assert d["k"] == 3 and len(d["mean_roc"]["tpr"]) == 101
        acc = np.mean([f["accuracy"] for f in d["folds"]])
        assert d["mean"]["accuracy"] == pytest.approx(acc)
