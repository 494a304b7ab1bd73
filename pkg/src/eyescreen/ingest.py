"""Parsing and cleaning of interest-area (one row per word) eye-tracking reports.

Frames handled here hold *string* cells: mapped columns are renamed to
canonical field names, unmapped columns ride along untouched, and missing
cells are NaN. Keeping strings means a cleaned report can be written back
byte-for-byte wherever nothing changed.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np
import pandas as pd

from .errors import DataError, SchemaError

log = logging.getLogger(__name__)

ID_FIELDS = ("participant_id", "text_id")
INT_FIELDS = (
    "text_id",
    "sentence_number",
    "word_in_sentence_number",
    "word_number",
    "word_length",
    "regression_in_count",
    "regression_out_count",
    "fixation_count",
    "first_run_fixation_count",
    "first_fixation_index",
    "skip",
)
FLOAT_FIELDS = (
    "dwell_time",
    "first_saccade_amplitude",
    "first_saccade_start_time",
    "first_saccade_end_time",
    "first_fixation_time",
    "first_fixation_x",
    "first_fixation_y",
    "ia_right",
)
NUMERIC_FIELDS = INT_FIELDS + FLOAT_FIELDS

DEFAULT_HEADERS: dict[str, str] = {
    "participant_id": "Participant_ID",
    "text_id": "Text_ID",
    "sentence_number": "Sentence_Number",
    "word_in_sentence_number": "Word_In_Sentence_Number",
    "word_number": "Word_Number",
    "word": "Word",
    "word_length": "Word_Length",
    "dwell_time": "IA_DWELL_TIME",
    "first_saccade_amplitude": "IA_FIRST_SACCADE_AMPLITUDE",
    "first_saccade_start_time": "IA_FIRST_SACCADE_START_TIME",
    "first_saccade_end_time": "IA_FIRST_SACCADE_END_TIME",
    "regression_in_count": "IA_REGRESSION_IN_COUNT",
    "regression_out_count": "IA_REGRESSION_OUT_COUNT",
    "fixation_count": "IA_FIXATION_COUNT",
    "first_run_fixation_count": "IA_FIRST_RUN_FIXATION_COUNT",
    "first_fixation_index": "IA_FIRST_FIXATION_INDEX",
    "first_fixation_time": "IA_FIRST_FIXATION_TIME",
    "first_fixation_x": "IA_FIRST_FIXATION_X",
    "first_fixation_y": "IA_FIRST_FIXATION_Y",
    "ia_right": "IA_RIGHT",
    "skip": "IA_SKIP",
}
CANONICAL_FIELDS = tuple(DEFAULT_HEADERS)
DEFAULT_DROP = ("IA_REGRESSION_PATH_DURATION", "IA_FIRST_RUN_DWELL_TIME")
FILL_FIELDS = ("sentence_number", "word_in_sentence_number")


@dataclass
class ColumnMap:
    """Canonical field -> CSV header. A ``None`` header declares the field absent."""

    headers: dict[str, str | None] = field(default_factory=lambda: dict(DEFAULT_HEADERS))
    drop: list[str] = field(default_factory=lambda: list(DEFAULT_DROP))
    missing_sentinel: str = "."

    def __post_init__(self):
        unknown = set(self.headers) - set(CANONICAL_FIELDS)
        if unknown:
            raise SchemaError(f"unknown canonical fields in column map: {sorted(unknown)}")
        merged = dict(DEFAULT_HEADERS)
        merged.update(self.headers)
        self.headers = merged
        present = [h for h in self.headers.values() if h is not None]
        dupes = sorted({h for h in present if present.count(h) > 1})
        if dupes:
            raise SchemaError(f"headers mapped to more than one field: {dupes}")
        for required in ("participant_id", "text_id", "word"):
            if self.headers.get(required) is None:
                raise SchemaError(f"field {required!r} cannot be declared absent")

    @property
    def present(self) -> dict[str, str]:
        return {k: v for k, v in self.headers.items() if v is not None}

    @classmethod
    def from_mapping(cls, m: Mapping | None) -> "ColumnMap":
        m = dict(m or {})
        return cls(
            headers=dict(m.get("headers", {})),
            drop=list(m.get("drop", DEFAULT_DROP)),
            missing_sentinel=str(m.get("missing_sentinel", ".")),
        )


@dataclass
class IaRecord:
    """One interest-area row in typed form. Optional numeric fields use None."""

    participant_id: str
    text_id: int
    word: str
    word_length: int
    dwell_time: float
    sentence_number: int | None = None
    word_in_sentence_number: int | None = None
    word_number: int | None = None
    first_saccade_amplitude: float | None = None
    first_saccade_start_time: float | None = None
    first_saccade_end_time: float | None = None
    regression_in_count: int = 0
    regression_out_count: int = 0
    fixation_count: int = 0
    first_run_fixation_count: int = 0
    first_fixation_index: int | None = None
    first_fixation_time: float | None = None
    first_fixation_x: float | None = None
    first_fixation_y: float | None = None
    ia_right: float | None = None
    skip: int | None = None

    def validate(self) -> None:
        if not self.word:
            raise DataError("word must be non-empty")
        if self.word_length < 1:
            raise DataError("word_length must be positive")
        if self.dwell_time < 0:
            raise DataError("dwell_time must be >= 0")
        if self.first_saccade_amplitude is not None and self.first_saccade_amplitude < 0:
            raise DataError("first_saccade_amplitude must be >= 0")
        s, e = self.first_saccade_start_time, self.first_saccade_end_time
        if s is not None and e is not None and e < s:
            raise DataError(f"saccade end {e} precedes start {s}")
        for name in ("regression_in_count", "regression_out_count", "fixation_count",
                     "first_run_fixation_count"):
            if getattr(self, name) < 0:
                raise DataError(f"{name} must be >= 0")
        if self.skip is not None and self.skip not in (0, 1):
            raise DataError("skip must be 0 or 1")

    @classmethod
    def from_row(cls, row: Mapping) -> "IaRecord":
        kw = {}
        for name in cls.__dataclass_fields__:
            v = row.get(name)
            if v is None or (isinstance(v, float) and math.isnan(v)):
                continue
            if name in INT_FIELDS:
                kw[name] = int(float(v))
            elif name in FLOAT_FIELDS:
                kw[name] = float(v)
            else:
                kw[name] = str(v)
        return cls(**kw)


@dataclass
class CleaningReport:
    rows_in: int = 0
    rows_out: int = 0
    malformed_cells: dict[str, int] = field(default_factory=dict)
    dropped_columns: list[str] = field(default_factory=list)
    rows_missing_word: int = 0
    cells_forward_filled: dict[str, int] = field(default_factory=dict)
    leading_gaps: dict[str, int] = field(default_factory=dict)
    skip_missing: int = 0
    imputation_iterations: int = 0
    imputation_changed_fraction: list[float] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def warn(self, msg: str) -> None:
        log.warning(msg)
        self.warnings.append(msg)


# --------------------------------------------------------------------------
# parsing / writing


def _is_missing(s: pd.Series, sentinel: str) -> pd.Series:
    return s.isna() | (s.str.strip() == "") | (s == sentinel)


def parse_csv(path, cmap: ColumnMap | None = None, report: CleaningReport | None = None) -> pd.DataFrame:
    """Read a report as strings, rename mapped headers, blank malformed numerics."""
    cmap = cmap or ColumnMap()
    path = Path(path)
    if not path.exists():
        raise DataError(f"input file not found: {path}")
    try:
        raw = pd.read_csv(path, dtype=str, keep_default_na=False, na_filter=False, encoding="utf-8")
    except pd.errors.EmptyDataError as exc:
        raise SchemaError(f"{path}: no header row") from exc
    return frame_from_strings(raw, cmap, report)


def frame_from_strings(raw: pd.DataFrame, cmap: ColumnMap, report: CleaningReport | None = None) -> pd.DataFrame:
    missing = [h for h in cmap.present.values() if h not in raw.columns]
    if missing:
        raise SchemaError(f"missing mapped header(s): {', '.join(missing)}")
    inverse = {h: k for k, h in cmap.present.items()}
    df = raw.rename(columns=inverse).astype(object)
    if df.columns.duplicated().any():
        dup = sorted(set(df.columns[df.columns.duplicated()]))
        raise SchemaError(f"unmapped columns collide with canonical field names: {dup}")
    for col in df.columns:
        df.loc[_is_missing(df[col].astype(str), cmap.missing_sentinel), col] = np.nan
    for name in NUMERIC_FIELDS:
        if name not in df.columns:
            continue
        vals = pd.to_numeric(df[name], errors="coerce")
        bad = vals.isna() & df[name].notna()
        nbad = int(bad.sum())
        if nbad:
            df.loc[bad, name] = np.nan
            if report is not None:
                report.malformed_cells[name] = report.malformed_cells.get(name, 0) + nbad
    if report is not None:
        report.rows_in = len(df)
    return df.reset_index(drop=True)


def write_csv(df: pd.DataFrame, path, cmap: ColumnMap | None = None) -> None:
    cmap = cmap or ColumnMap()
    out = df.rename(columns=cmap.present)
    out.to_csv(path, index=False, na_rep=cmap.missing_sentinel, lineterminator="\n")


def numeric(df: pd.DataFrame, name: str) -> pd.Series:
    return pd.to_numeric(df[name], errors="coerce").astype(float)


def to_records(df: pd.DataFrame) -> list[IaRecord]:
    return [IaRecord.from_row(r) for r in df.to_dict("records")]


# --------------------------------------------------------------------------
# cleaning steps, applied in this order by ``clean``


def drop_columns(df: pd.DataFrame, cmap: ColumnMap, report: CleaningReport | None = None) -> pd.DataFrame:
    inverse = {h: k for k, h in cmap.present.items()}
    names = set(cmap.drop) | {inverse[h] for h in cmap.drop if h in inverse}
    present = [c for c in df.columns if c in names]
    if report is not None:
        report.dropped_columns.extend(cmap.present.get(c, c) for c in present)
    return df.drop(columns=present)


def drop_missing_word(df: pd.DataFrame, report: CleaningReport | None = None) -> pd.DataFrame:
    word = df["word"]
    keep = word.notna() & (word.astype(str).str.strip() != "")
    removed = int((~keep).sum())
    out = df.loc[keep].reset_index(drop=True)
    if report is not None:
        report.rows_missing_word += removed
        if removed and out.empty:
            report.warn("every row lacks a word value; dataset is empty")
    elif out.empty and removed:
        log.warning("every row lacks a word value; dataset is empty")
    return out


def forward_fill(df: pd.DataFrame, fields: Iterable[str] = FILL_FIELDS,
                 report: CleaningReport | None = None) -> pd.DataFrame:
    """Fill gaps from the nearest earlier row of the same (participant, text)."""
    out = df.copy()
    keys = [out[k].fillna("<missing>") for k in ID_FIELDS]
    for name in fields:
        if name not in out.columns:
            continue
        before = out[name].isna()
        filled = out[name].groupby(keys, sort=False).ffill()
        out[name] = filled
        after = out[name].isna()
        n_filled = int((before & ~after).sum())
        n_lead = int(after.sum())
        if report is not None:
            report.cells_forward_filled[name] = report.cells_forward_filled.get(name, 0) + n_filled
            if n_lead:
                report.leading_gaps[name] = report.leading_gaps.get(name, 0) + n_lead
                report.warn(f"{n_lead} leading missing value(s) in {name} left unfilled")
        elif n_lead:
            log.warning("%d leading missing value(s) in %s left unfilled", n_lead, name)
    return out


def skip_predictors(df: pd.DataFrame) -> tuple[np.ndarray, list[str]]:
    """Numeric predictor matrix for skip imputation; gaps take the column median."""
    names = [c for c in NUMERIC_FIELDS if c in df.columns and c not in ("skip", "text_id")]
    cols = []
    for c in names:
        v = numeric(df, c).to_numpy()
        if np.isnan(v).all():
            v = np.zeros_like(v)
        else:
            v = np.where(np.isnan(v), np.nanmedian(v), v)
        cols.append(v)
    X = np.column_stack(cols) if cols else np.zeros((len(df), 1))
    return X, names


def impute_skip(df: pd.DataFrame, seed: int = 0, max_iters: int = 10, tol_frac: float = 0.01,
                n_trees: int = 20, max_train_rows: int | None = 20000, n_jobs: int = 1,
                report: CleaningReport | None = None) -> pd.DataFrame:
    """Iterative random-forest imputation of the binary skip column.

    Missing entries start at the observed mode; each round fits a forest on
    rows with an observed skip and re-predicts the missing ones, stopping once
    fewer than ``tol_frac`` of them change (or after ``max_iters`` rounds).
    """
    from .forest import HyperParams, predict, train_forest

    if "skip" not in df.columns:
        return df
    skip = numeric(df, "skip")
    miss = skip.isna().to_numpy()
    if report is not None:
        report.skip_missing = int(miss.sum())
    if not miss.any():
        return df
    observed = skip[~miss].to_numpy()
    if observed.size == 0:
        raise DataError("no observed skip values; cannot impute")
    bad = ~np.isin(observed, (0.0, 1.0))
    if bad.any():
        raise DataError("observed skip values must be 0 or 1")

    n1 = int(observed.sum())
    mode = 1 if n1 > observed.size - n1 else 0
    current = np.full(int(miss.sum()), mode, dtype=np.int64)
    y_obs = observed.astype(np.int64)

    X, _ = skip_predictors(df)
    obs_rows = np.flatnonzero(~miss)
    if max_train_rows is not None and obs_rows.size > max_train_rows:
        sub = np.random.default_rng(np.random.SeedSequence([seed, 1])).choice(
            obs_rows.size, size=max_train_rows, replace=False)
        sub.sort()
        train_rows, y_train = obs_rows[sub], y_obs[sub]
    else:
        train_rows, y_train = obs_rows, y_obs

    iterations = 0
    for it in range(max_iters):
        iterations = it + 1
        if np.unique(y_train).size == 1:
            new = np.full_like(current, int(y_train[0]))
        else:
            params = HyperParams(n_trees=n_trees, seed=seed)
            model = train_forest(X[train_rows], y_train, params, n_jobs=n_jobs)
            new = predict(model, X[miss])
        changed = float(np.mean(new != current))
        current = new
        if report is not None:
            report.imputation_changed_fraction.append(changed)
        if changed < tol_frac:
            break
    if report is not None:
        report.imputation_iterations = iterations

    out = df.copy()
    out.loc[miss, "skip"] = [str(int(v)) for v in current]
    return out


def clean(df: pd.DataFrame, cmap: ColumnMap, seed: int = 0, report: CleaningReport | None = None,
          impute: Mapping | None = None, n_jobs: int = 1) -> pd.DataFrame:
    report = report if report is not None else CleaningReport()
    if not report.rows_in:
        report.rows_in = len(df)
    df = drop_columns(df, cmap, report)
    df = drop_missing_word(df, report)
    if df.empty:
        raise DataError("no rows left after removing rows without a word")
    df = forward_fill(df, FILL_FIELDS, report)
    df = impute_skip(df, seed=seed, report=report, n_jobs=n_jobs, **dict(impute or {}))
    report.rows_out = len(df)
    return df
