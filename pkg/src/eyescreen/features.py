"""Derived features, min-max scaling and percentile-based difficulty labels."""
from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
import pandas as pd

from .errors import DataError
from .ingest import CleaningReport, numeric

log = logging.getLogger(__name__)

LABEL_COLUMN = "Reading_Difficulties"
KEY_COLUMNS = ("participant_id", "text_id")

FEATURE_COLUMNS = (
    "word_number",
    "sentence_number",
    "word_in_sentence_number",
    "word_length",
    "dwell_time",
    "first_saccade_amplitude",
    "saccade_duration",
    "regression_in_count",
    "regression_out_count",
    "fixation_count",
    "first_run_fixation_count",
    "first_fixation_index",
    "first_fixation_time",
    "first_fixation_x",
    "first_fixation_y",
    "ia_right",
    "skip",
    "word_tfidf",
)

# Display names as they appear in interest-area report documentation.
DISPLAY_NAMES = {
    "word_number": "Word_Number",
    "sentence_number": "Sentence_Number",
    "word_in_sentence_number": "Word_In_Sentence_Number",
    "word_length": "Word_Length",
    "dwell_time": "Ia_Dwell_Time",
    "first_saccade_amplitude": "Ia_First_Saccade_Amplitude",
    "saccade_duration": "Saccade_Duration",
    "regression_in_count": "Ia_Regression_In_Count",
    "regression_out_count": "Ia_Regression_Out_Count",
    "fixation_count": "Ia_Fixation_Count",
    "first_run_fixation_count": "Ia_First_Run_Fixation_Count",
    "first_fixation_index": "Ia_First_Fixation_Index",
    "first_fixation_time": "Ia_First_Fixation_Time",
    "first_fixation_x": "Ia_First_Fixation_X",
    "first_fixation_y": "Ia_First_Fixation_Y",
    "ia_right": "Ia_Right",
    "skip": "Ia_Skip",
    "word_tfidf": "Word_Cleaned_TfIdf",
}

BASIC_METRICS = (
    "first_saccade_amplitude",
    "dwell_time",
    "regression_in_count",
    "regression_out_count",
    "fixation_count",
    "saccade_duration",
)


@dataclass
class FeatureMatrix:
    columns: list[str]
    values: np.ndarray
    keys: pd.DataFrame = field(default_factory=pd.DataFrame)
    scaling: dict[str, tuple[float, float]] = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2 or self.values.shape[1] != len(self.columns):
            raise DataError("values shape does not match column names")
        if len(set(self.columns)) != len(self.columns):
            raise DataError("column names must be unique")
        if not np.all(np.isfinite(self.values)):
            bad = [c for c, ok in zip(self.columns, np.isfinite(self.values).all(axis=0)) if not ok]
            raise DataError(f"non-finite values in columns: {bad}")

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    def column(self, name: str) -> np.ndarray:
        try:
            return self.values[:, self.columns.index(name)]
        except ValueError:
            raise DataError(f"feature column {name!r} not present") from None

    def select(self, names: Sequence[str]) -> np.ndarray:
        missing = [n for n in names if n not in self.columns]
        if missing:
            raise DataError(f"feature column(s) not present: {missing}")
        return self.values[:, [self.columns.index(n) for n in names]]

    def to_frame(self) -> pd.DataFrame:
        df = pd.DataFrame(self.values, columns=self.columns)
        if len(self.keys):
            df = pd.concat([self.keys.reset_index(drop=True), df], axis=1)
        return df


@dataclass
class LabelVector:
    labels: np.ndarray
    thresholds: dict[str, float]
    directions: dict[str, str]
    rule: str
    percentile: float
    flag_rates: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "percentile": self.percentile,
            "rule": self.rule,
            "thresholds": self.thresholds,
            "directions": self.directions,
            "flag_rates": self.flag_rates,
            "positive_rate": float(self.labels.mean()) if self.labels.size else 0.0,
        }


@dataclass
class MetricSpec:
    directions: dict[str, str] = field(default_factory=lambda: {m: "upper" for m in BASIC_METRICS})
    percentile: float = 95.0
    rule: str = "or"

    def __post_init__(self):
        for m, d in self.directions.items():
            if d not in ("upper", "lower"):
                raise ValueError(f"direction for {m} must be 'upper' or 'lower', got {d!r}")
        if not 0 <= self.percentile <= 100:
            raise ValueError("percentile must be in [0, 100]")
        _rule_min_flags(self.rule, len(self.directions))

    @classmethod
    def from_mapping(cls, m: Mapping | None) -> "MetricSpec":
        m = dict(m or {})
        kw = {}
        if "directions" in m:
            kw["directions"] = dict(m["directions"])
        if "percentile" in m:
            kw["percentile"] = float(m["percentile"])
        if "rule" in m:
            kw["rule"] = str(m["rule"])
        return cls(**kw)


def _rule_min_flags(rule: str, n_metrics: int) -> int:
    if rule == "or":
        return 1
    if rule == "and":
        return n_metrics
    m = re.fullmatch(r"atleast:(\d+)", rule)
    if m and 1 <= int(m.group(1)) <= n_metrics:
        return int(m.group(1))
    raise ValueError(f"unknown combination rule {rule!r} (use 'or', 'and' or 'atleast:K')")


# --------------------------------------------------------------------------


def saccade_duration(start, end):
    """``end - start``; NaN where either side is missing. Scalars or arrays."""
    start_a = np.asarray(start, dtype=np.float64)
    end_a = np.asarray(end, dtype=np.float64)
    with np.errstate(invalid="ignore"):
        bad = end_a < start_a
    if np.any(bad):
        raise DataError(f"{int(np.sum(bad))} saccade(s) end before they start")
    out = end_a - start_a
    return float(out) if out.ndim == 0 else out


def clean_word(word: str) -> str:
    return re.sub(r"[^0-9a-z]", "", str(word).lower())


def tfidf(words: Sequence[str], documents: Sequence) -> np.ndarray:
    """Per-row weight of the row's own (cleaned) word within its own document.

    tf is the raw count over the document's token count; idf is the smoothed
    ``ln((1 + N) / (1 + df)) + 1``.
    """
    if len(words) == 0:
        raise DataError("empty corpus")
    if len(words) != len(documents):
        raise ValueError("words and documents must align")
    df = pd.DataFrame({"term": [clean_word(w) for w in words], "doc": list(documents)})
    n_docs = df["doc"].nunique(dropna=False)
    doc_len = df.groupby("doc", dropna=False)["term"].transform("size")
    count = df.groupby(["doc", "term"], dropna=False)["term"].transform("size")
    doc_freq = df.drop_duplicates(["doc", "term"]).groupby("term").size()
    idf = np.log((1.0 + n_docs) / (1.0 + df["term"].map(doc_freq).to_numpy(dtype=float))) + 1.0
    return (count / doc_len).to_numpy(dtype=float) * idf


def minmax_scale(fm: FeatureMatrix, columns: Sequence[str] | None = None) -> FeatureMatrix:
    columns = list(fm.columns if columns is None else columns)
    values = fm.values.copy()
    scaling = dict(fm.scaling)
    for name in columns:
        j = fm.columns.index(name)
        col = values[:, j].copy()
        lo, hi = float(col.min()), float(col.max())
        if hi == lo:
            log.warning("column %s is constant; scaled to zeros", name)
            values[:, j] = 0.0
        else:
            values[:, j] = (col - lo) / (hi - lo)
            # guard the exact endpoints against rounding
            values[col == lo, j] = 0.0
            values[col == hi, j] = 1.0
        scaling[name] = (lo, hi)
    return FeatureMatrix(list(fm.columns), values, fm.keys, scaling)


def percentile(values, p: float) -> float:
    """Linear-interpolation percentile (rank ``p/100 * (n-1)`` on sorted values)."""
    v = np.sort(np.asarray(values, dtype=np.float64).ravel())
    if v.size == 0:
        raise DataError("percentile of empty input")
    if not 0 <= p <= 100:
        raise ValueError("p must be in [0, 100]")
    rank = p / 100.0 * (v.size - 1)
    lo = int(math.floor(rank))
    hi = int(math.ceil(rank))
    frac = rank - lo
    if lo == hi or frac == 0.0:
        return float(v[lo])
    return float(v[lo] + (v[hi] - v[lo]) * frac)


def label_reading_difficulty(fm: FeatureMatrix, spec: MetricSpec | None = None) -> LabelVector:
    spec = spec or MetricSpec()
    n_required = _rule_min_flags(spec.rule, len(spec.directions))
    flags = np.zeros(fm.n_rows, dtype=np.int64)
    thresholds, rates = {}, {}
    for metric, direction in spec.directions.items():
        col = fm.column(metric)
        thr = percentile(col, spec.percentile)
        hit = col > thr if direction == "upper" else col < thr
        thresholds[metric] = thr
        rates[metric] = float(hit.mean())
        flags += hit
    labels = (flags >= n_required).astype(np.int64)
    return LabelVector(labels, thresholds, dict(spec.directions), spec.rule, spec.percentile, rates)


# --------------------------------------------------------------------------


@dataclass
class FeaturizeResult:
    raw: FeatureMatrix
    scaled: FeatureMatrix
    labels: LabelVector
    filled_cells: dict[str, int]
    dropped_columns: list[str]

    def to_frame(self) -> pd.DataFrame:
        df = self.scaled.to_frame()
        df[LABEL_COLUMN] = self.labels.labels
        return df

    def report(self) -> dict:
        return {
            "labels": self.labels.to_dict(),
            "scaling": {k: list(v) for k, v in self.scaled.scaling.items()},
            "filled_cells": self.filled_cells,
            "dropped_columns": self.dropped_columns,
            "n_rows": self.scaled.n_rows,
            "columns": self.scaled.columns,
        }


def build_matrix(df: pd.DataFrame, report: CleaningReport | None = None) -> tuple[FeatureMatrix, dict, list]:
    """Feature matrix from a cleaned frame; numeric gaps take the column median."""
    cols: dict[str, np.ndarray] = {}
    for name in FEATURE_COLUMNS:
        if name == "saccade_duration":
            if {"first_saccade_start_time", "first_saccade_end_time"} <= set(df.columns):
                cols[name] = saccade_duration(numeric(df, "first_saccade_start_time").to_numpy(),
                                              numeric(df, "first_saccade_end_time").to_numpy())
        elif name == "word_tfidf":
            cols[name] = tfidf(df["word"].astype(str).tolist(), df["text_id"].tolist())
        elif name in df.columns:
            cols[name] = numeric(df, name).to_numpy()
    filled, dropped = {}, []
    for name in list(cols):
        v = cols[name]
        nan = np.isnan(v)
        if nan.all():
            dropped.append(name)
            del cols[name]
            msg = f"feature {name} has no observed values; dropped"
            if report is not None:
                report.warn(msg)
            else:
                log.warning(msg)
            continue
        if nan.any():
            cols[name] = np.where(nan, np.median(v[~nan]), v)
            filled[name] = int(nan.sum())
    keys = pd.DataFrame({k: df[k].to_numpy() for k in KEY_COLUMNS if k in df.columns})
    fm = FeatureMatrix(list(cols), np.column_stack(list(cols.values())), keys)
    return fm, filled, dropped


def featurize(df: pd.DataFrame, spec: MetricSpec | None = None,
              scale_columns: Sequence[str] | None = None) -> FeaturizeResult:
    """Labels come from unscaled values; the emitted matrix is min-max scaled."""
    fm, filled, dropped = build_matrix(df)
    labels = label_reading_difficulty(fm, spec)
    if scale_columns is None:
        scale_columns = [c for c in fm.columns if c != "skip"]
    scaled = minmax_scale(fm, scale_columns)
    return FeaturizeResult(fm, scaled, labels, filled, dropped)


def read_features(path) -> tuple[FeatureMatrix, np.ndarray]:
    df = pd.read_csv(path, dtype={"participant_id": str})
    if LABEL_COLUMN not in df.columns:
        raise DataError(f"{path}: no {LABEL_COLUMN} column")
    keys = df[[c for c in KEY_COLUMNS if c in df.columns]]
    feat = [c for c in df.columns if c not in KEY_COLUMNS and c != LABEL_COLUMN]
    values = df[feat].to_numpy(dtype=np.float64)
    return FeatureMatrix(feat, values, keys), df[LABEL_COLUMN].to_numpy(dtype=np.int64)
