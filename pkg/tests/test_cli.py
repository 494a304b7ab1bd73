import json
import xml.etree.ElementTree as ET
from pathlib import Path

import numpy as np
import pandas as pd
import pytest
import yaml

from eyescreen import SCHEMA_VERSION
from eyescreen import config as config_mod
from eyescreen.cli import main
from eyescreen.features import LABEL_COLUMN
from eyescreen.pipeline import run_clean, run_featurize, run_synth
from conftest import SMALL


@pytest.fixture
def cfg_file(tmp_path):
    path = tmp_path / "cfg.yaml"
    path.write_text(yaml.safe_dump(SMALL))
    return path


def _run(cfg_file, out, *args):
    return main([*args, "-c", str(cfg_file), "-o", str(out)])


@pytest.fixture(scope="module")
def staged(tmp_path_factory):
    """synth -> clean -> featurize once for the module."""
    tmp = tmp_path_factory.mktemp("staged")
    cfg_path = tmp / "cfg.yaml"
    cfg_path.write_text(yaml.safe_dump(SMALL))
    out = tmp / "out"
    assert _run(cfg_path, out, "synth") == 0
    assert _run(cfg_path, out, "clean", str(out / "corpus.csv")) == 0
    assert _run(cfg_path, out, "featurize", str(out / "cleaned.csv")) == 0
    return cfg_path, out


def _json(path):
    data = json.loads(Path(path).read_text())
    assert data["schema_version"] == SCHEMA_VERSION
    return data


def test_synth_rows(staged):
    _, out = staged
    corpus = pd.read_csv(out / "corpus.csv")
    s = SMALL["synth"]
    assert len(corpus) == 3 * s["participants_per_profile"] * s["texts"] * s["words_per_text"]
    assert _json(out / "synth_report.json")["rows"] == len(corpus)


def test_clean_round_trips_without_missingness(staged):
    _, out = staged
    corpus = pd.read_csv(out / "corpus.csv", dtype=str, keep_default_na=False)
    cleaned = pd.read_csv(out / "cleaned.csv", dtype=str, keep_default_na=False)
    pd.testing.assert_frame_equal(corpus.drop(columns=["IA_REGRESSION_PATH_DURATION", "IA_FIRST_RUN_DWELL_TIME"]),
                                  cleaned)
    report = _json(out / "cleaning_report.json")
    assert report["warnings"] == [] and report["rows_missing_word"] == 0


def test_featurize_outputs(staged):
    _, out = staged
    feats = pd.read_csv(out / "features.csv")
    assert "saccade_duration" in feats.columns and LABEL_COLUMN in feats.columns
    report = _json(out / "featurize_report.json")
    assert set(report["labels"]["thresholds"]) == {"first_saccade_amplitude", "dwell_time", "regression_in_count",
                                                    "regression_out_count", "fixation_count", "saccade_duration"}
    assert report["labels"]["positive_rate"] == pytest.approx(feats[LABEL_COLUMN].mean())


def test_train_eval_cluster(staged, tmp_path):
    cfg_path, staged_out = staged
    out = tmp_path / "run"
    out.mkdir()
    features = staged_out / "features.csv"
    assert _run(cfg_path, out, "train", str(features)) == 0
    trace = _json(out / "tune_trace.json")
    assert len(trace["tune"]["history"]) == 6
    assert len(trace["selected_features"]) <= 12
    model = _json(out / "model.json")
    assert model["feature_names"] == trace["selected_features"]

    assert _run(cfg_path, out, "eval", str(features), "--cv-k", "3") == 0
    rep = _json(out / "eval_report.json")
    assert rep["k"] == 3
    for f in rep["folds"]:
        c = f["confusion"]
        assert f["accuracy"] == pytest.approx((c["tp"] + c["tn"]) / sum(c.values()))
    for name in ("roc.svg", "confusion.svg"):
        ET.parse(out / name)

    assert _run(cfg_path, out, "cluster", str(features), "--truth", str(staged_out / "truth.csv")) == 0
    assign = pd.read_csv(out / "assignments.csv")
    assert assign["cluster"].nunique() == 3
    tree = ET.parse(out / "scatter.svg")
    points = [e for e in tree.iter() if e.get("class") == "point"]
    assert len(points) == len(assign) == 3 * SMALL["synth"]["participants_per_profile"]
    prof = _json(out / "profiles.json")
    dwell = {c["reader_group"]: c["features"]["dwell_time"]["mean"] for c in prof["clusters"]}
    assert dwell["proficient"] <= dwell["average"] <= dwell["poor"]
    assert "adjusted_rand_index" in prof
    assert len(_json(out / "dendrogram.json")["merges"]) == len(assign) - 1


def test_train_rerun_identical(staged, tmp_path):
    cfg_path, staged_out = staged
    features = staged_out / "features.csv"
    outs = [tmp_path / "a", tmp_path / "b"]
    for o in outs:
        assert _run(cfg_path, o, "train", str(features)) == 0
    for name in ("model.json", "tune_trace.json"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()


def test_missing_word_count_reported(tmp_path):
    cfg = config_mod.load(None, {**SMALL, "synth": {**SMALL["synth"], "missingness": {"word": 0.05, "skip": 0.2}}})
    out = tmp_path / "o"
    paths = run_synth(cfg, out)
    injected = _json(out / "synth_report.json")["injected_missing"]
    run_clean(paths["corpus"], cfg, out)
    report = _json(out / "cleaning_report.json")
    assert report["rows_missing_word"] == injected["word"] > 0
    assert report["imputation_iterations"] >= 1
    run_featurize(out / "cleaned.csv", cfg, out)


def test_flag_overrides_file(tmp_path, cfg_file):
    cfg = config_mod.load(cfg_file, {"seed": 7, "cluster": {"k": 4}})
    assert cfg["seed"] == 7 and cfg["cluster"]["k"] == 4
    assert cfg["synth"]["texts"] == SMALL["synth"]["texts"]
    assert config_mod.load(cfg_file)["seed"] == 0


class TestExitCodes:
    def test_unknown_section(self, tmp_path):
        bad = tmp_path / "bad.yaml"
        bad.write_text("bogus: 1\n")
        assert main(["synth", "-c", str(bad), "-o", str(tmp_path)]) == 2

    def test_invalid_value(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"eval": {"k": 1}}))
        assert main(["synth", "-c", str(bad), "-o", str(tmp_path)]) == 2

    def test_missing_header_is_schema_error(self, tmp_path, capsys):
        p = tmp_path / "r.csv"
        p.write_text("Participant_ID,Word\np1,a\n")
        assert main(["clean", str(p), "-o", str(tmp_path)]) == 2
        assert "IA_DWELL_TIME" in capsys.readouterr().err

    def test_missing_input_is_data_error(self, tmp_path):
        assert main(["clean", str(tmp_path / "nope.csv"), "-o", str(tmp_path)]) == 3

    def test_single_class_labels(self, tmp_path):
        p = tmp_path / "f.csv"
        pd.DataFrame({"participant_id": ["a", "b"], "text_id": [1, 1], "x": [0.1, 0.2],
                      LABEL_COLUMN: [0, 0]}).to_csv(p, index=False)
        assert main(["train", str(p), "-o", str(tmp_path)]) == 3


def test_run_command_small(tmp_path, cfg_file):
    out = tmp_path / "all"
    assert _run(cfg_file, out, "run", "-k", "3", "--cv-k", "3") == 0
    for name in ("corpus.csv", "cleaned.csv", "features.csv", "model.json", "eval_report.json",
                 "assignments.csv", "profiles.json"):
        assert (out / name).exists(), name
    assert np.isfinite(_json(out / "eval_report.json")["mean"]["accuracy"])
