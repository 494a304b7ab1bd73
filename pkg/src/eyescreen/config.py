"""Pipeline configuration: one YAML/JSON file with a section per command.

Precedence is flags > file > defaults. Every section is validated by
building the objects the stages will use, so a bad config fails at load
time rather than halfway through a run.
"""
from __future__ import annotations

import copy
import json
from pathlib import Path
from typing import Any, Mapping

import yaml

from .errors import ConfigError, SchemaError
from .features import BASIC_METRICS, MetricSpec
from .ingest import ColumnMap
from .synth import SynthConfig, profiles_from_config
from .tune import SearchSpace

DEFAULTS: dict[str, Any] = {
    "seed": 0,
    "n_jobs": 1,
    "output_dir": "out",
    "columns": {},
    "synth": {
        "participants_per_profile": 28,
        "texts": 55,
        "words_per_text": 50,
        "missingness": {},
        "profiles": None,
    },
    "clean": {
        "impute": {"max_iters": 10, "tol_frac": 0.01, "n_trees": 20, "max_train_rows": 20000},
    },
    "featurize": {
        "metric_spec": {"directions": {m: "upper" for m in BASIC_METRICS}, "percentile": 95.0, "rule": "or"},
        "scale_columns": None,
    },
    "train": {
        "max_rows": 4000,
        "cv_folds": 3,
        "exclusions": list(BASIC_METRICS),
        "enhance": {"n_initial": 4, "n_iterations": 6,
                    "dimensions": {"n_trees": [10, 40, "int"], "max_depth": [3, 20, "int"],
                                   "min_samples_leaf": [1, 10, "int"]}},
        "select": {"max_k": 12, "epsilon": 1e-4, "n_trees": 15},
        "search": {"n_initial": 8, "n_iterations": 25,
                   "dimensions": {"n_trees": [10, 60, "int"], "max_depth": [3, 25, "int"],
                                  "min_samples_leaf": [1, 10, "int"], "max_features": [0.2, 1.0, "float"]}},
        "final_max_rows": 20000,
    },
    "eval": {"k": 9, "stratified": True, "balance": True, "max_rows": 20000},
    "cluster": {"k": 3, "unit": "participant", "features": None, "max_rows": 2000, "top_enhanced": 12},
}


def _merge(base: dict, override: Mapping) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, Mapping) and isinstance(out.get(key), dict) and key not in ("dimensions", "directions"):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def load(path: str | Path | None = None, overrides: Mapping | None = None) -> dict:
    raw: dict = {}
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        text = path.read_text(encoding="utf-8")
        try:
            raw = json.loads(text) if path.suffix == ".json" else (yaml.safe_load(text) or {})
        except (ValueError, yaml.YAMLError) as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
    unknown = set(raw) - set(DEFAULTS)
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    cfg = _merge(DEFAULTS, raw)
    if overrides:
        cfg = _merge(cfg, {k: v for k, v in overrides.items() if v is not None})
    validate(cfg)
    return cfg


def validate(cfg: dict) -> None:
    try:
        column_map(cfg)
        metric_spec(cfg)
        synth_config(cfg)
        profiles_from_config(cfg["synth"].get("profiles"))
        search_space(cfg, "search")
        search_space(cfg, "enhance")
    except SchemaError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    if int(cfg["eval"]["k"]) < 2:
        raise ConfigError("eval.k must be >= 2")
    if int(cfg["train"]["cv_folds"]) < 2:
        raise ConfigError("train.cv_folds must be >= 2")
    if int(cfg["cluster"]["k"]) < 1:
        raise ConfigError("cluster.k must be >= 1")
    if cfg["cluster"]["unit"] not in ("participant", "row"):
        raise ConfigError("cluster.unit must be 'participant' or 'row'")
    if int(cfg["train"]["select"]["max_k"]) < 0:
        raise ConfigError("train.select.max_k must be >= 0")
    if int(cfg["n_jobs"]) < 1:
        raise ConfigError("n_jobs must be >= 1")


def column_map(cfg: dict) -> ColumnMap:
    return ColumnMap.from_mapping(cfg.get("columns"))


def metric_spec(cfg: dict) -> MetricSpec:
    return MetricSpec.from_mapping(cfg["featurize"]["metric_spec"])


def synth_config(cfg: dict) -> SynthConfig:
    s = dict(cfg["synth"])
    s.setdefault("seed", cfg["seed"])
    if s.get("seed") is None:
        s["seed"] = cfg["seed"]
    return SynthConfig.from_mapping(s)


def search_space(cfg: dict, section: str) -> SearchSpace:
    m = dict(cfg["train"][section])
    m["seed"] = cfg["seed"]
    return SearchSpace.from_mapping(m)
