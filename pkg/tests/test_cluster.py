import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings, strategies as st
from scipy.cluster.hierarchy import linkage
from sklearn.metrics import adjusted_rand_score

from eyescreen.cluster import (ClusterAssignment, adjusted_rand_index, aggregate, cut, pca_project,
                               profile_clusters, profile_table, ward_agglomerate)
from eyescreen.errors import DataError
from oracles import pca_by_covariance, ward_bruteforce


def _blobs(seed=0, per=4, d=2):
    rng = np.random.default_rng(seed)
    centres = np.array([[0, 0], [20, 0], [0, 20]])[:, :d]
    return np.vstack([c + rng.normal(0, 0.5, (per, d)) for c in centres])


class TestWard:
    def test_two_points(self):
        d = ward_agglomerate([[0.0, 0.0], [3.0, 4.0]])
        assert d.merges.tolist() == [[0, 1]] and d.heights[0] == 5.0

    def test_collinear(self):
        d = ward_agglomerate([[0.0], [1.0], [10.0]])
        assert d.merges[0].tolist() == [0, 1]
        assert d.merges[1].tolist() == [2, 3]

    def test_blobs_separate_last(self):
        X = _blobs()
        d = ward_agglomerate(X)
        labels = cut(d, 3).labels
        assert labels.tolist() == [0] * 4 + [1] * 4 + [2] * 4
        assert d.heights[-2] > 10 * d.heights[-3]

    def test_tie_break_lowest_pair(self):
        # unit square: four equal nearest pairs; (0, 1) wins, then (2, 3)
        d = ward_agglomerate([[0, 0], [1, 0], [0, 1], [1, 1]])
        assert d.merges[:2].tolist() == [[0, 1], [2, 3]]

    def test_matches_bruteforce(self):
        for seed in range(10):
            X = np.random.default_rng(seed).normal(size=(9, 3))
            d = ward_agglomerate(X)
            merges, heights = ward_bruteforce(X)
            assert d.merges.tolist() == [list(m) for m in merges]
            np.testing.assert_allclose(d.heights, heights, rtol=0, atol=1e-9)

    def test_matches_scipy(self):
        X = np.random.default_rng(4).normal(size=(30, 4))
        ref = linkage(X, method="ward")
        d = ward_agglomerate(X)
        np.testing.assert_allclose(d.heights, ref[:, 2], atol=1e-9)
        np.testing.assert_array_equal(d.sizes, ref[:, 3])

    def test_gram_path_agrees(self):
        X = np.random.default_rng(1).normal(size=(650, 3))
        d = ward_agglomerate(X)
        ref = linkage(X, method="ward")
        np.testing.assert_allclose(d.heights, ref[:, 2], atol=1e-7)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**31), st.integers(2, 25), st.integers(1, 4))
    def test_monotone_heights(self, seed, n, dim):
        X = np.random.default_rng(seed).normal(size=(n, dim))
        d = ward_agglomerate(X)
        assert np.all(np.diff(d.heights) >= -1e-12)
        assert d.sizes[-1] == n

    def test_errors(self):
        with pytest.raises(DataError):
            ward_agglomerate([[1.0]])
        with pytest.raises(DataError):
            ward_agglomerate([[1.0], [np.nan]])

    def test_to_dict(self):
        dd = ward_agglomerate([[0.0], [1.0], [5.0]]).to_dict()
        assert dd["n_leaves"] == 3 and len(dd["merges"]) == 2
        assert dd["merges"][0] == {"a": 0, "b": 1, "height": 1.0, "size": 2}


class TestCut:
    def test_extremes(self):
        d = ward_agglomerate(_blobs())
        assert set(cut(d, 1).labels) == {0}
        assert cut(d, 12).labels.tolist() == list(range(12))

    def test_out_of_range(self):
        d = ward_agglomerate(_blobs())
        with pytest.raises(ValueError):
            cut(d, 0)
        with pytest.raises(ValueError):
            cut(d, 13)

    def test_ids_follow_smallest_row(self):
        X = np.array([[10.0], [0.0], [10.1], [0.1]])
        assert cut(ward_agglomerate(X), 2).labels.tolist() == [0, 1, 0, 1]


class TestPca:
    def test_line(self):
        x = np.arange(10.0)
        p = pca_project(np.column_stack([x, 2 * x]), 2)
        np.testing.assert_allclose(p.components[0], np.array([1, 2]) / np.sqrt(5), atol=1e-12)
        assert p.explained_variance_ratio[1] == pytest.approx(0, abs=1e-12)

    def test_isotropic(self):
        X = np.random.default_rng(0).normal(size=(10_000, 2))
        np.testing.assert_allclose(pca_project(X).explained_variance_ratio, [0.5, 0.5], atol=0.02)

    def test_triangle_distances_preserved(self):
        X = np.array([[0.0, 0.0], [3.0, 1.0], [1.0, 4.0]])
        c = pca_project(X, 2).coords
        dist = lambda A: np.linalg.norm(A[:, None] - A[None], axis=2)  # noqa: E731
        np.testing.assert_allclose(dist(c), dist(X), atol=1e-12)

    def test_zero_variance(self):
        with pytest.raises(DataError):
            pca_project(np.ones((4, 3)))

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**31), st.integers(3, 60), st.integers(2, 8))
    def test_matches_covariance_oracle(self, seed, n, d):
        X = np.random.default_rng(seed).normal(size=(n, d)) * np.arange(1, d + 1)
        k = min(2, d)
        p = pca_project(X, k)
        comps, ratios, coords = pca_by_covariance(X, k)
        np.testing.assert_allclose(p.components, comps, atol=1e-6)
        np.testing.assert_allclose(p.coords, coords, atol=1e-6)
        np.testing.assert_allclose(p.explained_variance_ratio, ratios, atol=1e-9)
        np.testing.assert_allclose(p.components @ p.components.T, np.eye(k), atol=1e-9)

    def test_full_rank_ratios_sum_to_one(self):
        X = np.random.default_rng(2).normal(size=(40, 5))
        assert pca_project(X, 5).explained_variance_ratio.sum() == pytest.approx(1.0, abs=1e-9)


class TestProfiles:
    def test_identical_rows(self):
        X = np.tile([1.0, 2.0], (4, 1))
        prof = profile_clusters(X, ClusterAssignment(np.zeros(4, int), 1), ["a", "b"], order_by="a")
        st_ = prof["clusters"][0]["features"]["a"]
        assert st_ == {"mean": 1.0, "median": 1.0, "count": 4}
        assert len(profile_table(prof)) == 2

    def test_spectrum_by_dwell(self):
        X = np.array([[300.0], [100.0], [200.0]])
        prof = profile_clusters(X, ClusterAssignment(np.array([0, 1, 2]), 3), ["dwell_time"])
        groups = {c["cluster"]: c["reader_group"] for c in prof["clusters"]}
        assert groups == {0: "poor", 1: "proficient", 2: "average"}
        assert prof["ordering"] == [1, 2, 0]

    def test_rank_names_for_other_k(self):
        X = np.array([[2.0], [1.0]])
        prof = profile_clusters(X, ClusterAssignment(np.array([0, 1]), 2), ["dwell_time"])
        assert [c["reader_group"] for c in prof["clusters"]] == ["rank_1", "rank_0"]


class TestAri:
    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.tuples(st.integers(0, 3), st.integers(0, 4)), min_size=2, max_size=60))
    def test_matches_sklearn(self, pairs):
        a, b = map(list, zip(*pairs))
        assert adjusted_rand_index(a, b) == pytest.approx(adjusted_rand_score(a, b), abs=1e-12)

    def test_label_names_irrelevant(self):
        assert adjusted_rand_index([0, 0, 1, 1], ["x", "x", "y", "y"]) == 1.0


def test_aggregate_keeps_first_appearance_order():
    frame = pd.DataFrame({"pid": ["b", "a", "b"], "v": [1.0, 5.0, 3.0]})
    agg = aggregate(frame, "pid", ["v"])
    assert agg.index.tolist() == ["b", "a"] and agg["v"].tolist() == [2.0, 5.0]
