"""Synthetic interest-area corpora with known reader profiles.

Every participant reads every text; each participant belongs to one
profile whose distributions drive their eye-movement metrics. The output
uses the same header vocabulary the ingest module expects, so synthetic
corpora exercise the whole pipeline.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Mapping, Sequence

import numpy as np
import pandas as pd
from scipy.special import ndtr, ndtri

from .errors import ConfigError
from .ingest import DEFAULT_DROP, DEFAULT_HEADERS, INT_FIELDS

CHAR_WIDTH = 12.0
LINE_WIDTH = 1100.0
LINE_HEIGHT = 48.0
LEFT_MARGIN = 80.0
TOP_MARGIN = 120.0


@dataclass(frozen=True)
class ReaderProfile:
    name: str
    dwell_mean: float = 250.0
    dwell_sd: float = 80.0
    dwell_per_char: float = 8.0
    amplitude_mean: float = 2.4
    amplitude_sd: float = 0.9
    saccade_duration_mean: float = 38.0
    saccade_duration_sd: float = 10.0
    regression_in_rate: float = 0.15
    regression_out_rate: float = 0.15
    extra_fixation_rate: float = 0.4
    skip_prob: float = 0.2

    def validate(self) -> None:
        for name in ("dwell_sd", "amplitude_sd", "saccade_duration_sd"):
            if getattr(self, name) < 0:
                raise ConfigError(f"profile {self.name}: {name} must be >= 0")
        for name in ("regression_in_rate", "regression_out_rate", "extra_fixation_rate"):
            if getattr(self, name) < 0:
                raise ConfigError(f"profile {self.name}: {name} must be >= 0")
        for name in ("dwell_mean", "amplitude_mean", "saccade_duration_mean"):
            if getattr(self, name) < 0:
                raise ConfigError(f"profile {self.name}: {name} must be >= 0")
        if not 0.0 <= self.skip_prob <= 1.0:
            raise ConfigError(f"profile {self.name}: skip_prob must be in [0, 1]")


DEFAULT_PROFILES = (
    ReaderProfile("proficient", dwell_mean=180.0, dwell_sd=30.0, amplitude_mean=2.0, amplitude_sd=0.6,
                  saccade_duration_mean=30.0, saccade_duration_sd=6.0, regression_in_rate=0.15,
                  regression_out_rate=0.15, extra_fixation_rate=0.2, skip_prob=0.30),
    ReaderProfile("average", dwell_mean=260.0, dwell_sd=30.0, amplitude_mean=2.4, amplitude_sd=0.6,
                  saccade_duration_mean=38.0, saccade_duration_sd=6.0, regression_in_rate=0.08,
                  regression_out_rate=0.08, extra_fixation_rate=0.4, skip_prob=0.20),
    ReaderProfile("poor", dwell_mean=420.0, dwell_sd=30.0, amplitude_mean=3.4, amplitude_sd=0.8,
                  saccade_duration_mean=52.0, saccade_duration_sd=8.0, regression_in_rate=0.45,
                  regression_out_rate=0.45, extra_fixation_rate=1.2, skip_prob=0.10),
)


@dataclass
class SynthConfig:
    participants_per_profile: int = 28
    texts: int = 55
    words_per_text: int = 50
    seed: int = 0
    # canonical field name -> fraction of cells blanked after generation
    missingness: dict[str, float] = field(default_factory=dict)

    def validate(self) -> None:
        for name in ("participants_per_profile", "texts", "words_per_text"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        for col, rate in self.missingness.items():
            if col not in DEFAULT_HEADERS:
                raise ConfigError(f"missingness names unknown field {col!r}")
            if not 0.0 <= rate < 1.0:
                raise ConfigError(f"missingness for {col} must be in [0, 1)")

    @classmethod
    def from_mapping(cls, m: Mapping | None) -> "SynthConfig":
        m = dict(m or {})
        m.pop("profiles", None)
        return cls(**m)


def profiles_from_config(items: Sequence[Mapping] | None) -> tuple[ReaderProfile, ...]:
    if not items:
        return DEFAULT_PROFILES
    return tuple(ReaderProfile(**dict(p)) for p in items)


@dataclass
class SynthCorpus:
    records: pd.DataFrame  # canonical column names, numeric dtypes, NaN = missing
    truth: pd.DataFrame  # participant_id, profile
    injected_missing: dict[str, int]

    def report_frame(self, headers: Mapping[str, str] | None = None) -> pd.DataFrame:
        """String-celled frame with report headers ('.' marks missing)."""
        headers = dict(DEFAULT_HEADERS if headers is None else headers)
        out = {}
        for col in self.records.columns:
            s = self.records[col]
            if col in ("participant_id", "word"):
                cells = s.astype(object).where(s.notna(), ".")
            elif col in INT_FIELDS:
                cells = s.map(lambda v: "." if pd.isna(v) else str(int(v)))
            else:
                cells = s.map(lambda v: "." if pd.isna(v) else f"{v:.2f}")
            out[headers.get(col, col)] = cells.to_numpy()
        return pd.DataFrame(out)


def _truncnorm(rng: np.random.Generator, mean, sd, size) -> np.ndarray:
    """Normal(mean, sd) truncated below at 0, by inverse-CDF sampling."""
    mean = np.broadcast_to(np.asarray(mean, dtype=np.float64), size)
    sd = np.broadcast_to(np.asarray(sd, dtype=np.float64), size)
    u = rng.random(size)
    out = mean.copy()
    pos = sd > 0
    a = ndtr(-mean[pos] / sd[pos])
    q = a + u[pos] * (1.0 - a)
    q = np.clip(q, 1e-300, 1.0 - 1e-16)
    out[pos] = np.maximum(mean[pos] + sd[pos] * ndtri(q), 0.0)
    return out


def _vocabulary(rng: np.random.Generator, size: int = 400) -> list[str]:
    letters = np.array(list("abcdefghijklmnopqrstuvwxyz"))
    lengths = 1 + rng.poisson(3.5, size=size)
    return ["".join(rng.choice(letters, size=n)) for n in lengths]


def _texts(rng: np.random.Generator, n_texts: int, n_words: int):
    vocab = _vocabulary(rng)
    ranks = np.arange(1, len(vocab) + 1)
    freq = 1.0 / ranks
    freq /= freq.sum()
    words = np.empty((n_texts, n_words), dtype=object)
    sent = np.empty((n_texts, n_words), dtype=np.int64)
    wis = np.empty((n_texts, n_words), dtype=np.int64)
    for t in range(n_texts):
        picks = rng.choice(len(vocab), size=n_words, p=freq)
        s, pos = 1, 0
        sent_len = int(rng.integers(12, 26))
        for w in range(n_words):
            pos += 1
            token = vocab[picks[w]]
            if pos == sent_len or w == n_words - 1:
                token += "."
            words[t, w] = token
            sent[t, w] = s
            wis[t, w] = pos
            if pos == sent_len:
                s, pos = s + 1, 0
                sent_len = int(rng.integers(12, 26))
    return words, sent, wis


def generate(config: SynthConfig | None = None,
             profiles: Sequence[ReaderProfile] = DEFAULT_PROFILES) -> SynthCorpus:
    config = config or SynthConfig()
    config.validate()
    if not profiles:
        raise ConfigError("at least one reader profile is required")
    for p in profiles:
        p.validate()

    root = np.random.SeedSequence(int(config.seed))
    text_ss, part_ss, miss_ss = root.spawn(3)
    T, W = config.texts, config.words_per_text
    words, sent, wis = _texts(np.random.default_rng(text_ss), T, W)
    word_len = np.vectorize(lambda s: len(s.rstrip(".")))(words).astype(np.int64)

    # layout is shared by every reader of a text
    left = np.empty((T, W))
    top = np.empty((T, W))
    for t in range(T):
        x, line = LEFT_MARGIN, 0
        for w in range(W):
            width = word_len[t, w] * CHAR_WIDTH + CHAR_WIDTH
            if x + width > LEFT_MARGIN + LINE_WIDTH:
                x, line = LEFT_MARGIN, line + 1
            left[t, w] = x
            top[t, w] = TOP_MARGIN + line * LINE_HEIGHT
            x += width
    right = left + word_len * CHAR_WIDTH

    n_prof = len(profiles)
    n_part = config.participants_per_profile * n_prof
    assignment = np.arange(n_part) % n_prof
    pids = [f"p{i + 1:03d}" for i in range(n_part)]
    part_streams = part_ss.spawn(n_part)

    blocks = []
    for i in range(n_part):
        prof = profiles[assignment[i]]
        rng = np.random.default_rng(part_streams[i])
        shape = (T, W)
        skip = (rng.random(shape) < prof.skip_prob).astype(np.int64)
        fix = np.where(skip == 1, 0, 1 + rng.poisson(prof.extra_fixation_rate, shape))
        first_run = np.where(fix > 0, 1 + rng.binomial(np.maximum(fix - 1, 0), 0.6), 0)
        dwell_mu = prof.dwell_mean + prof.dwell_per_char * (word_len - 5)
        dwell = np.where(skip == 1, 0.0, _truncnorm(rng, np.maximum(dwell_mu, 0.0), prof.dwell_sd, shape))
        reg_in = np.where(skip == 1, 0, rng.poisson(prof.regression_in_rate, shape))
        reg_out = np.where(skip == 1, 0, rng.poisson(prof.regression_out_rate, shape))
        amp = _truncnorm(rng, prof.amplitude_mean, prof.amplitude_sd, shape)
        sdur = _truncnorm(rng, prof.saccade_duration_mean, prof.saccade_duration_sd, shape)
        # onset of each word within its trial: time spent on the preceding words
        onset = np.cumsum(dwell + 60.0, axis=1) - (dwell + 60.0)
        sstart = onset + rng.random(shape) * np.maximum(dwell, 50.0)
        send = sstart + sdur
        first_fix_time = np.where(fix > 0, dwell / np.maximum(fix, 1) * (0.8 + 0.4 * rng.random(shape)), np.nan)
        fix_index = np.where(fix > 0, np.cumsum(fix, axis=1) - fix + 1, np.nan)
        fx = np.where(fix > 0, left + rng.random(shape) * (right - left), np.nan)
        fy = np.where(fix > 0, top + rng.normal(0.0, 4.0, shape) + LINE_HEIGHT / 2, np.nan)
        reg_path = np.where(fix > 0, dwell + reg_out * rng.uniform(80, 250, shape), np.nan)
        first_run_dwell = np.where(fix > 0, dwell * first_run / np.maximum(fix, 1), np.nan)

        blocks.append(pd.DataFrame({
            "participant_id": pids[i],
            "text_id": np.repeat(np.arange(1, T + 1), W),
            "sentence_number": sent.ravel(),
            "word_in_sentence_number": wis.ravel(),
            "word_number": np.tile(np.arange(1, W + 1), T),
            "word": words.ravel(),
            "word_length": word_len.ravel(),
            "dwell_time": dwell.ravel(),
            "first_saccade_amplitude": amp.ravel(),
            "first_saccade_start_time": sstart.ravel(),
            "first_saccade_end_time": send.ravel(),
            "regression_in_count": reg_in.ravel(),
            "regression_out_count": reg_out.ravel(),
            "fixation_count": fix.ravel(),
            "first_run_fixation_count": first_run.ravel(),
            "first_fixation_index": fix_index.ravel(),
            "first_fixation_time": first_fix_time.ravel(),
            "first_fixation_x": fx.ravel(),
            "first_fixation_y": fy.ravel(),
            "ia_right": right.ravel(),
            "skip": skip.ravel(),
            DEFAULT_DROP[0]: reg_path.ravel(),
            DEFAULT_DROP[1]: first_run_dwell.ravel(),
        }))
    records = pd.concat(blocks, ignore_index=True)
    # reported values are rounded to 2 decimals; round before checks so saccade ordering survives
    for col in ("first_saccade_start_time", "first_saccade_end_time"):
        records[col] = records[col].round(2)

    injected = {}
    mrng = np.random.default_rng(miss_ss)
    for col in sorted(config.missingness):
        rate = config.missingness[col]
        mask = mrng.random(len(records)) < rate
        injected[col] = int(mask.sum())
        if col in INT_FIELDS:
            records[col] = records[col].astype("float64")
        if col in ("word", "participant_id"):
            records[col] = records[col].astype(object)
        records.loc[mask, col] = np.nan
    truth = pd.DataFrame({"participant_id": pids, "profile": [profiles[a].name for a in assignment]})
    return SynthCorpus(records, truth, injected)


def profile_dict(p: ReaderProfile) -> dict:
    return asdict(p)
