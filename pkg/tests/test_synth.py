import numpy as np
import pandas as pd
import pytest

from eyescreen.cluster import cut, profile_clusters, ward_agglomerate
from eyescreen.errors import ConfigError
from eyescreen.ingest import DEFAULT_DROP, ColumnMap, frame_from_strings, to_records
from eyescreen.synth import DEFAULT_PROFILES, ReaderProfile, SynthConfig, generate


def test_shape_and_truth(small_corpus):
    rec = small_corpus.records
    assert len(rec) == 9 * 4 * 25
    assert small_corpus.truth.shape == (9, 2)
    assert small_corpus.truth["profile"].value_counts().to_dict() == {"proficient": 3, "average": 3, "poor": 3}
    assert "profile" not in rec.columns
    assert set(DEFAULT_DROP) <= set(rec.columns)


def test_deterministic():
    cfg = SynthConfig(participants_per_profile=2, texts=3, words_per_text=20, seed=9, missingness={"word": 0.1})
    a, b = generate(cfg), generate(cfg)
    pd.testing.assert_frame_equal(a.records, b.records)
    assert a.injected_missing == b.injected_missing
    c = generate(SynthConfig(participants_per_profile=2, texts=3, words_per_text=20, seed=10))
    assert not a.records["dwell_time"].equals(c.records["dwell_time"])


def test_zero_spread_profile_is_constant():
    flat = ReaderProfile("flat", dwell_sd=0, dwell_per_char=0, amplitude_sd=0, saccade_duration_sd=0,
                         regression_in_rate=0, regression_out_rate=0, extra_fixation_rate=0, skip_prob=0)
    rec = generate(SynthConfig(participants_per_profile=3, texts=2, words_per_text=15), [flat]).records
    for col in ("dwell_time", "first_saccade_amplitude", "regression_in_count", "regression_out_count",
                "fixation_count", "skip"):
        assert rec[col].nunique() == 1, col
    duration = rec["first_saccade_end_time"] - rec["first_saccade_start_time"]
    assert np.allclose(duration, duration.iloc[0], atol=0.011)


def test_dwell_means():
    profiles = [ReaderProfile(p.name, dwell_mean=p.dwell_mean, dwell_sd=30.0, dwell_per_char=0.0, skip_prob=0.0)
                for p in DEFAULT_PROFILES]
    corpus = generate(SynthConfig(participants_per_profile=10, texts=20, words_per_text=50, seed=1), profiles)
    rec = corpus.records.merge(corpus.truth, on="participant_id")
    means = rec.groupby("profile")["dwell_time"].mean()
    for p in profiles:
        assert abs(means[p.name] - p.dwell_mean) <= 5, (p.name, means[p.name])


def test_record_invariants_hold(small_corpus):
    for r in to_records(small_corpus.records.drop(columns=list(DEFAULT_DROP))):
        r.validate()
    rec = small_corpus.records
    assert ((rec["skip"] == 1) == (rec["fixation_count"] == 0)).all()


def test_missingness_counts():
    cfg = SynthConfig(participants_per_profile=2, texts=3, words_per_text=40, missingness={"skip": 0.2, "word": 0.05})
    corpus = generate(cfg)
    assert corpus.records["skip"].isna().sum() == corpus.injected_missing["skip"]
    assert corpus.records["word"].isna().sum() == corpus.injected_missing["word"]
    assert 0.15 < corpus.injected_missing["skip"] / len(corpus.records) < 0.25


def test_report_frame_parses_without_warnings(small_corpus):
    frame = small_corpus.report_frame()
    assert "IA_DWELL_TIME" in frame.columns
    df = frame_from_strings(frame, ColumnMap())
    assert not df["word"].isna().any()


def test_invalid_profiles():
    with pytest.raises(ConfigError):
        generate(profiles=[ReaderProfile("x", skip_prob=1.5)])
    with pytest.raises(ConfigError):
        generate(SynthConfig(texts=0))
    with pytest.raises(ConfigError):
        generate(SynthConfig(missingness={"nope": 0.1}))


def test_poor_cluster_profile():
    corpus = generate(SynthConfig(participants_per_profile=6, texts=6, words_per_text=40, seed=2))
    cols = ["dwell_time", "first_saccade_amplitude", "fixation_count"]
    per = corpus.records.groupby("participant_id", sort=False)[cols].mean()
    X = (per - per.min()) / (per.max() - per.min())
    assignment = cut(ward_agglomerate(X.to_numpy()), 3)
    prof = profile_clusters(per.to_numpy(), assignment, cols)
    by_group = {c["reader_group"]: c["features"] for c in prof["clusters"]}
    for col in ("first_saccade_amplitude", "fixation_count"):
        assert by_group["poor"][col]["mean"] > by_group["average"][col]["mean"] > by_group["proficient"][col]["mean"]
