"""Command-line entry point: ``eyescreen <command> [options]``.

Exit codes: 0 success, 2 config/schema error, 3 data error, 4 internal error.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__, config as config_mod, pipeline
from .errors import PipelineError

log = logging.getLogger("eyescreen")


def _overrides(args: argparse.Namespace) -> dict:
    o: dict = {"seed": args.seed, "n_jobs": args.n_jobs, "output_dir": args.out}
    if getattr(args, "k", None) is not None:
        o["cluster"] = {"k": args.k}
    if getattr(args, "cv_k", None) is not None:
        o["eval"] = {"k": args.cv_k}
    if getattr(args, "unit", None) is not None:
        o.setdefault("cluster", {})["unit"] = args.unit
    return o


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-c", "--config", help="YAML or JSON pipeline config")
    common.add_argument("-o", "--out", help="output directory (default: config output_dir)")
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("--n-jobs", type=int, dest="n_jobs", help="worker threads for forest training")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="eyescreen",
                                description="Screen eye-tracking interest-area reports for reading difficulty.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    sub.add_parser("synth", parents=[common], help="generate a synthetic corpus + ground truth")
    s = sub.add_parser("clean", parents=[common], help="drop, fill and impute an interest-area report")
    s.add_argument("input", help="report CSV")
    s = sub.add_parser("featurize", parents=[common], help="derive features and difficulty labels")
    s.add_argument("input", help="cleaned CSV")
    s = sub.add_parser("train", parents=[common], help="rank features, select, tune and fit the forest")
    s.add_argument("input", help="features CSV")
    s = sub.add_parser("eval", parents=[common], help="k-fold evaluation with ROC and confusion plots")
    s.add_argument("input", help="features CSV")
    s.add_argument("--model", help="model.json (default: <out>/model.json)")
    s.add_argument("--cv-k", type=int, dest="cv_k", help="number of folds")
    s = sub.add_parser("cluster", parents=[common], help="Ward clustering, PCA scatter and profiles")
    s.add_argument("input", help="features CSV")
    s.add_argument("-k", type=int, help="number of clusters (default 3)")
    s.add_argument("--unit", choices=("participant", "row"))
    s.add_argument("--truth", help="ground-truth CSV (participant_id, profile) for scoring")
    s = sub.add_parser("run", parents=[common], help="synth/clean/featurize/train/eval/cluster in one go")
    s.add_argument("--input", help="report CSV (default: generate a synthetic corpus)")
    s.add_argument("-k", type=int, help="number of clusters (default 3)")
    s.add_argument("--cv-k", type=int, dest="cv_k", help="number of folds")
    return p


def dispatch(args: argparse.Namespace) -> dict:
    cfg = config_mod.load(args.config, _overrides(args))
    out = Path(cfg["output_dir"])
    cmd = args.command
    if cmd == "synth":
        return pipeline.run_synth(cfg, out)
    if cmd == "clean":
        return pipeline.run_clean(args.input, cfg, out)
    if cmd == "featurize":
        return pipeline.run_featurize(args.input, cfg, out)
    if cmd == "train":
        return pipeline.run_train(args.input, cfg, out)
    if cmd == "eval":
        return pipeline.run_eval(args.input, cfg, out, model_path=args.model)
    if cmd == "cluster":
        return pipeline.run_cluster(args.input, cfg, out, truth_csv=args.truth)
    if cmd == "run":
        paths: dict = {}
        truth = None
        source = args.input
        if source is None:
            paths.update(pipeline.run_synth(cfg, out))
            source, truth = paths["corpus"], paths["truth"]
        cleaned = paths["cleaned"] = pipeline.run_clean(source, cfg, out)["cleaned"]
        features = paths["features"] = pipeline.run_featurize(cleaned, cfg, out)["features"]
        paths.update(pipeline.run_train(features, cfg, out))
        paths.update(pipeline.run_eval(features, cfg, out))
        paths.update(pipeline.run_cluster(features, cfg, out, truth_csv=truth))
        return paths
    raise AssertionError(cmd)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        paths = dispatch(args)
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except Exception as exc:  # noqa: BLE001
        log.debug("internal error", exc_info=True)
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 4
    for name, path in paths.items():
        print(f"{name}: {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
