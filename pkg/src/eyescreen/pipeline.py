"""The six pipeline stages as file-in/file-out functions used by the CLI."""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np
import pandas as pd

from . import SCHEMA_VERSION, config as config_mod, svg
from .cluster import (adjusted_rand_index, aggregate, cut, pca_project, profile_clusters,
                      ward_agglomerate)
from .errors import DataError
from .evaluation import cross_validate, kfold_split
from .features import BASIC_METRICS, featurize, read_features
from .forest import ForestModel, HyperParams, train_forest
from .ingest import CleaningReport, clean, parse_csv, write_csv
from .synth import generate, profiles_from_config
from .tune import (balance_resample, bayes_tune, cv_accuracy, enhanced_features, forward_select,
                   subsample)

log = logging.getLogger(__name__)


def write_json(path: Path, payload: dict) -> None:
    body = {"schema_version": SCHEMA_VERSION, **payload}
    path.write_text(json.dumps(body, indent=2, sort_keys=True, allow_nan=False) + "\n", encoding="utf-8")


def _out(cfg: dict, out_dir=None) -> Path:
    p = Path(out_dir or cfg["output_dir"])
    p.mkdir(parents=True, exist_ok=True)
    return p


# --------------------------------------------------------------------------


def run_synth(cfg: dict, out_dir=None) -> dict[str, Path]:
    out = _out(cfg, out_dir)
    corpus = generate(config_mod.synth_config(cfg), profiles_from_config(cfg["synth"].get("profiles")))
    cmap = config_mod.column_map(cfg)
    frame = corpus.report_frame(cmap.present)
    paths = {"corpus": out / "corpus.csv", "truth": out / "truth.csv"}
    frame.to_csv(paths["corpus"], index=False, lineterminator="\n")
    corpus.truth.to_csv(paths["truth"], index=False, lineterminator="\n")
    write_json(out / "synth_report.json", {"rows": len(frame), "injected_missing": corpus.injected_missing,
                                           "participants": len(corpus.truth)})
    return paths


def run_clean(input_csv, cfg: dict, out_dir=None) -> dict[str, Path]:
    out = _out(cfg, out_dir)
    cmap = config_mod.column_map(cfg)
    report = CleaningReport()
    df = parse_csv(input_csv, cmap, report)
    df = clean(df, cmap, seed=int(cfg["seed"]), report=report, impute=cfg["clean"]["impute"],
               n_jobs=int(cfg["n_jobs"]))
    paths = {"cleaned": out / "cleaned.csv", "report": out / "cleaning_report.json"}
    write_csv(df, paths["cleaned"], cmap)
    write_json(paths["report"], asdict(report))
    return paths


def run_featurize(cleaned_csv, cfg: dict, out_dir=None) -> dict[str, Path]:
    out = _out(cfg, out_dir)
    cmap = config_mod.column_map(cfg)
    df = parse_csv(cleaned_csv, cmap)
    if df.empty:
        raise DataError("cleaned input has no rows")
    result = featurize(df, config_mod.metric_spec(cfg), cfg["featurize"].get("scale_columns"))
    paths = {"features": out / "features.csv", "report": out / "featurize_report.json"}
    result.to_frame().to_csv(paths["features"], index=False, lineterminator="\n")
    write_json(paths["report"], result.report())
    return paths


def run_train(features_csv, cfg: dict, out_dir=None) -> dict[str, Path]:
    out = _out(cfg, out_dir)
    seed = int(cfg["seed"])
    n_jobs = int(cfg["n_jobs"])
    tcfg = cfg["train"]
    folds = int(tcfg["cv_folds"])
    fm, y = read_features(features_csv)
    names = fm.columns
    if np.unique(y).size < 2:
        raise DataError("labels contain a single class; nothing to train")

    Xs, ys = subsample(fm.values, y, tcfg["max_rows"], seed)
    exclusions = [c for c in tcfg["exclusions"] if c in names]
    enh = enhanced_features(Xs, ys, names, exclusions, seed=seed,
                            space=config_mod.search_space(cfg, "enhance"), cv_folds=folds, n_jobs=n_jobs)
    basic = [m for m in BASIC_METRICS if m in names]
    candidates = basic + [f for f, _ in enh.ranking if f not in basic]

    Xb, yb = balance_resample(Xs, ys, seed=seed)
    sel_cfg = tcfg["select"]
    selection = forward_select(Xb, yb, names, candidates, max_k=int(sel_cfg["max_k"]),
                               epsilon=float(sel_cfg["epsilon"]), seed=seed,
                               params=HyperParams(n_trees=int(sel_cfg["n_trees"]), seed=seed),
                               cv_folds=folds, n_jobs=n_jobs)
    selected = selection.selected or candidates[:1]
    cols = [names.index(c) for c in selected]

    trace = bayes_tune(Xb[:, cols], yb, config_mod.search_space(cfg, "search"), cv_folds=folds,
                       seed=seed, n_jobs=n_jobs)
    best = replace(HyperParams(seed=seed), **trace.best_config)
    benchmark = {
        "selected_features": trace.best_score,
        "all_features": cv_accuracy(Xb, yb, best, k=folds, seed=seed, n_jobs=n_jobs),
    }

    Xf, yf = subsample(fm.values, y, tcfg["final_max_rows"], seed + 1)
    Xf, yf = balance_resample(Xf, yf, seed=seed)
    model = train_forest(Xf[:, cols], yf, best, feature_names=selected, n_jobs=n_jobs)

    paths = {"model": out / "model.json", "trace": out / "tune_trace.json"}
    write_json(paths["model"], model.to_dict())
    write_json(paths["trace"], {
        "enhanced": enh.to_dict(),
        "candidates": candidates,
        "selection": selection.to_dict(),
        "selected_features": selected,
        "tune": trace.to_dict(),
        "best_params": asdict(best),
        "benchmark_cv_accuracy": benchmark,
    })
    return paths


def load_model(path) -> ForestModel:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    data.pop("schema_version", None)
    return ForestModel.from_dict(data)


def run_eval(features_csv, cfg: dict, out_dir=None, model_path=None) -> dict[str, Path]:
    out = _out(cfg, out_dir)
    seed = int(cfg["seed"])
    ecfg = cfg["eval"]
    fm, y = read_features(features_csv)
    model_path = Path(model_path) if model_path else out / "model.json"
    if model_path.exists():
        model = load_model(model_path)
        names, params = model.feature_names, model.params
    else:
        log.warning("no model at %s; evaluating all features with default hyperparameters", model_path)
        names, params = fm.columns, HyperParams(seed=seed)
    X, ys = subsample(fm.select(names), y, ecfg["max_rows"], seed + 2)
    plan = kfold_split(len(ys), k=int(ecfg["k"]), seed=seed, stratify=ys if ecfg["stratified"] else None)
    report = cross_validate(X, ys, params, plan, balance=bool(ecfg["balance"]), feature_names=names,
                            n_jobs=int(cfg["n_jobs"]))

    paths = {"report": out / "eval_report.json", "roc": out / "roc.svg", "confusion": out / "confusion.svg"}
    write_json(paths["report"], report.to_dict())
    mc = report.mean_confusion
    paths["confusion"].write_text(svg.confusion([[mc["tn"], mc["fp"]], [mc["fn"], mc["tp"]]]), encoding="utf-8")
    from .evaluation import ROC_GRID

    paths["roc"].write_text(svg.roc([f.roc for f in report.folds if f.roc is not None], ROC_GRID,
                                    report.mean_roc, report.mean_auc), encoding="utf-8")
    return paths


def cluster_features(fm_columns, cfg: dict, out: Path) -> tuple[list[str], str]:
    chosen = cfg["cluster"].get("features")
    if chosen:
        return list(chosen), "config"
    basic = [m for m in BASIC_METRICS if m in fm_columns]
    trace_path = out / "tune_trace.json"
    if trace_path.exists():
        trace = json.loads(trace_path.read_text(encoding="utf-8"))
        ranked = [r["feature"] for r in trace["enhanced"]["ranking"]][: int(cfg["cluster"]["top_enhanced"])]
        return basic + [f for f in ranked if f not in basic and f in fm_columns], "tune_trace"
    return list(fm_columns), "all"


def run_cluster(features_csv, cfg: dict, out_dir=None, truth_csv=None) -> dict[str, Path]:
    out = _out(cfg, out_dir)
    seed = int(cfg["seed"])
    ccfg = cfg["cluster"]
    fm, _ = read_features(features_csv)
    names, source = cluster_features(fm.columns, cfg, out)
    X = fm.select(names)
    if ccfg["unit"] == "participant":
        if "participant_id" not in fm.keys.columns:
            raise DataError("participant clustering needs a participant_id column")
        frame = pd.DataFrame(X, columns=names)
        frame.insert(0, "participant_id", fm.keys["participant_id"].astype(str).to_numpy())
        agg = aggregate(frame, "participant_id", names)
        ids = agg.index.astype(str).tolist()
        Xc = agg.to_numpy()
    else:
        rows = np.arange(fm.n_rows)
        cap = ccfg.get("max_rows")
        if cap is not None and rows.size > cap:
            rng = np.random.default_rng(np.random.SeedSequence([seed, 5]))
            rows = np.sort(rng.choice(rows.size, size=int(cap), replace=False))
        ids = [str(r) for r in rows]
        Xc = X[rows]

    k = int(ccfg["k"])
    if Xc.shape[0] < max(2, k):
        raise DataError(f"{Xc.shape[0]} units cannot form {k} clusters")
    dendro = ward_agglomerate(Xc)
    assignment = cut(dendro, k)
    proj = pca_project(Xc, 2)
    profile = profile_clusters(Xc, assignment, names)
    profile["unit"] = ccfg["unit"]
    profile["features"] = names
    profile["feature_source"] = source
    profile["assumptions"] = [
        "features are min-max scaled per row before clustering",
        f"clustering unit: {ccfg['unit']}",
    ]
    profile["pca_explained_variance_ratio"] = proj.explained_variance_ratio.tolist()

    id_col = "participant_id" if ccfg["unit"] == "participant" else "row"
    assign_df = pd.DataFrame({id_col: ids, "cluster": assignment.labels,
                              "pc1": proj.coords[:, 0], "pc2": proj.coords[:, 1]})
    if truth_csv is not None and ccfg["unit"] == "participant":
        truth = pd.read_csv(truth_csv, dtype={"participant_id": str})
        merged = assign_df.merge(truth, on="participant_id", how="left")
        if merged["profile"].notna().all():
            profile["adjusted_rand_index"] = adjusted_rand_index(merged["cluster"], merged["profile"])

    paths = {"assignments": out / "assignments.csv", "dendrogram": out / "dendrogram.json",
             "scatter": out / "scatter.svg", "profiles": out / "profiles.json"}
    assign_df.to_csv(paths["assignments"], index=False, lineterminator="\n")
    write_json(paths["dendrogram"], dendro.to_dict())
    write_json(paths["profiles"], profile)
    paths["scatter"].write_text(svg.scatter(proj.coords, assignment.labels), encoding="utf-8")
    return paths
