"""
thumbqc - Command Line Entry Point

Assembles the preprocessing, training, HPO, inference, evaluation and
benchmark commands into one ``thumbqc`` executable:

    thumbqc preprocess --input thumbs/ --scale L --out tiles/
    thumbqc train --config train.json --manifest slides.csv --out model/
    thumbqc hpo --config hpo.json --manifest slides.csv --out study/ [--resume]
    thumbqc infer --input thumbs/ --model model/ --out verdicts.jsonl
    thumbqc eval --manifest slides.csv --model model/ --split test --out metrics.csv
    thumbqc bench --approaches xs_slides,tiled_soft_vote --backbones desk,transpath --out bench.json

Exit codes: 0 on success (per-slide errors included), 2 for configuration and
model bundle errors, 3 when there is nothing to process. Any ThumbQCError that
reaches this module is printed to stderr as its JSON detail.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional

from thumbqc import __version__
from thumbqc.backbone.weights import load_weights_file
from thumbqc.core.config import LogLevel, Settings, get_settings
from thumbqc.core.errors import ConfigurationError, ThumbQCError
from thumbqc.core.runtime import configure_logging
from thumbqc.harness.bench import run_bench
from thumbqc.harness.bundle import load_bundle, save_bundle
from thumbqc.harness.evaluation import evaluate_manifest, write_evaluation
from thumbqc.harness.inference import collect_inputs, infer_slides, write_results
from thumbqc.harness.preprocess import export_slides
from thumbqc.heads.classifier import HEAD_PRESETS
from thumbqc.hpo.config import HPOConfig, ObjectiveName
from thumbqc.hpo.objectives import head_size_objective, quadratic_objective
from thumbqc.hpo.study import run_study
from thumbqc.imaging.geometry import ScaleName, get_scale
from thumbqc.schemas.approach import Approach
from thumbqc.schemas.manifest import Manifest, Split
from thumbqc.training.config import TrainConfig, load_config
from thumbqc.training.splits import read_manifest, split_dataset, write_manifest
from thumbqc.training.trainer import train, write_epoch_log

logger = logging.getLogger(__name__)

EPOCH_LOG_FILE = "epochs.jsonl"
STUDY_LOG_FILE = "study.jsonl"
BEST_TRIAL_FILE = "best.json"


def _positive_int(raw: str) -> int:
    value = int(raw)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {raw}")
    return value


def _resolve_seed(args: argparse.Namespace, settings: Settings, configured: int) -> int:
    if args.seed is not None:
        return args.seed
    return settings.resolve_seed(configured)


def _threads(args: argparse.Namespace, settings: Settings) -> Optional[int]:
    return args.threads or settings.threads


def _require_manifest(args: argparse.Namespace) -> Manifest:
    if args.manifest is None:
        raise ConfigurationError(f"`thumbqc {args.command}` needs --manifest")
    return read_manifest(args.manifest)


def _with_splits(manifest: Manifest, seed: int) -> Manifest:
    if any(r.split is not None for r in manifest.records):
        return manifest
    logger.info("Manifest has no split column; assigning a stratified split with seed %d", seed)
    return split_dataset(manifest.records, seed=seed)


def _with_settings(config: TrainConfig, settings: Settings, seed: int) -> TrainConfig:
    """Apply the run seed and, unless the config sets them, the normalisation settings."""
    update: Dict[str, object] = {"seed": seed}
    if "norm_mean" not in config.model_fields_set:
        update["norm_mean"] = settings.norm_mean
    if "norm_std" not in config.model_fields_set:
        update["norm_std"] = settings.norm_std
    return config.model_copy(update=update)


def _train_config(args: argparse.Namespace, settings: Settings) -> TrainConfig:
    config = load_config(TrainConfig, args.config) if args.config else TrainConfig()
    return _with_settings(config, settings, _resolve_seed(args, settings, config.seed))


def cmd_preprocess(args: argparse.Namespace, settings: Settings) -> int:
    records = collect_inputs(args.manifest, args.input)
    errors = export_slides(records, get_scale(args.scale), args.out)
    return 0 if len(errors) < len(records) else 1


def cmd_train(args: argparse.Namespace, settings: Settings) -> int:
    config = _train_config(args, settings)
    manifest = _with_splits(_require_manifest(args), config.seed)
    backbone_weights = load_weights_file(args.backbone_weights) if args.backbone_weights else None
    out = Path(args.out)
    result = train(manifest, config, backbone_weights)
    save_bundle(result.model, out, seed=config.seed)
    write_epoch_log(result.epochs, out / EPOCH_LOG_FILE)
    write_manifest(manifest, out / "manifest.csv")
    logger.info("Best epoch %d with val accuracy %.4f", result.best_epoch, result.best_val_accuracy)
    return 0


def cmd_hpo(args: argparse.Namespace, settings: Settings) -> int:
    config = load_config(HPOConfig, args.config) if args.config else HPOConfig()
    seed = _resolve_seed(args, settings, config.seed)
    if config.objective is ObjectiveName.quadratic:
        objective = quadratic_objective(config.space, config.quadratic_center)
    else:
        train_config = _with_settings(config.train, settings, seed)
        manifest = _with_splits(_require_manifest(args), seed)
        backbone_weights = load_weights_file(args.backbone_weights) if args.backbone_weights else None
        objective = head_size_objective(manifest, train_config, backbone_weights)

    out = Path(args.out)
    state = run_study(
        config.space,
        objective,
        max_budget=config.max_budget,
        eta=config.eta,
        seed=seed,
        max_trials=config.max_trials,
        sampler=config.sampler,
        gamma=config.gamma,
        n_startup=config.n_startup,
        n_candidates=config.n_candidates,
        n_workers=config.n_workers,
        log_path=out / STUDY_LOG_FILE,
        resume=args.resume,
    )
    best = state.best_trial
    summary = {
        "trials": len(state.trials),
        "status_counts": {s.value: c for s, c in state.status_counts().items()},
        "best": None if best is None else {
            "trial_id": best.trial_id,
            "point": best.point,
            "value": best.final_value,
            "budget": best.final_budget,
        },
    }
    (out / BEST_TRIAL_FILE).write_text(json.dumps(summary, indent=2) + "\n")
    return 0


def cmd_infer(args: argparse.Namespace, settings: Settings) -> int:
    model = load_bundle(args.model)
    records = collect_inputs(args.manifest, args.input)
    results = infer_slides(model, records, _threads(args, settings))
    write_results(results, args.out)
    return 0


def cmd_eval(args: argparse.Namespace, settings: Settings) -> int:
    model = load_bundle(args.model)
    manifest = _require_manifest(args)
    split = Split(args.split) if args.split else None
    reports = evaluate_manifest(model, manifest, split, _threads(args, settings), by_scanner=args.by_scanner)
    json_path = write_evaluation(reports, args.out)
    logger.info("Wrote %d metric rows to %s and %s", len(reports), args.out, json_path)
    return 0


def _parse_approaches(raw: Optional[str]) -> List[Approach]:
    if not raw:
        return list(Approach)
    try:
        return [Approach(name.strip()) for name in raw.split(",") if name.strip()]
    except ValueError as e:
        raise ConfigurationError(str(e), action=f"Choose from {[a.value for a in Approach]}")


def _parse_backbones(raw: Optional[str]) -> List[str]:
    if not raw:
        return ["desk"]
    names = [name.strip() for name in raw.split(",") if name.strip()]
    unknown = [name for name in names if name not in HEAD_PRESETS]
    if unknown:
        raise ConfigurationError(f"unknown backbone presets {unknown}", action=f"Choose from {sorted(HEAD_PRESETS)}")
    return names


def cmd_bench(args: argparse.Namespace, settings: Settings) -> int:
    if args.model and (args.approaches or args.backbones):
        raise ConfigurationError(
            "--approaches and --backbones cannot be combined with --model",
            action="Bench a bundle alone, or drop --model to bench preset models",
        )
    model = load_bundle(args.model) if args.model else None
    report = run_bench(
        _parse_approaches(args.approaches),
        iterations=args.iterations if args.iterations is not None else settings.bench_iterations,
        warmup=args.warmup if args.warmup is not None else settings.bench_warmup,
        seed=_resolve_seed(args, settings, 0),
        model=model,
        backbones=_parse_backbones(args.backbones),
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(report.model_dump_json(indent=2) + "\n")
    return 0


COMMANDS: Dict[str, Callable[[argparse.Namespace, Settings], int]] = {
    "preprocess": cmd_preprocess,
    "train": cmd_train,
    "hpo": cmd_hpo,
    "infer": cmd_infer,
    "eval": cmd_eval,
    "bench": cmd_bench,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--log-level", type=str.upper, choices=[level.value for level in LogLevel], default=None,
        help="Logging level (default: THUMBQC_LOG_LEVEL)",
    )
    common.add_argument("--seed", type=int, default=None, help="Overrides config seed and THUMBQC_SEED")
    common.add_argument("--threads", type=_positive_int, default=None, help="Slide-level workers (default: all cores)")

    parser = argparse.ArgumentParser(prog="thumbqc", description="Fixation QC from WSI thumbnails")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", parents=[common], help="Export canonical images and tile grids")
    p.add_argument("--manifest", help="CSV or JSONL manifest")
    p.add_argument("--input", help="Directory of PNG/PPM thumbnails")
    p.add_argument("--scale", default=ScaleName.L.value, choices=[s.value for s in ScaleName])
    p.add_argument("--out", required=True, help="Output directory")

    p = sub.add_parser("train", parents=[common], help="Train a model bundle")
    p.add_argument("--config", help="TrainConfig JSON (defaults if omitted)")
    p.add_argument("--manifest", help="CSV or JSONL manifest with labels")
    p.add_argument("--backbone-weights", help="Pretrained backbone weight container")
    p.add_argument("--out", required=True, help="Bundle directory")

    p = sub.add_parser("hpo", parents=[common], help="Run a head-size study")
    p.add_argument("--config", help="HPOConfig JSON (defaults if omitted)")
    p.add_argument("--manifest", help="Manifest for the train objective")
    p.add_argument("--backbone-weights", help="Pretrained backbone weight container")
    p.add_argument("--resume", action="store_true", help="Replay and continue the study log in --out")
    p.add_argument("--out", required=True, help="Study directory")

    p = sub.add_parser("infer", parents=[common], help="Classify thumbnails")
    p.add_argument("--manifest", help="CSV or JSONL manifest")
    p.add_argument("--input", help="Directory of PNG/PPM thumbnails")
    p.add_argument("--model", required=True, help="Model bundle directory")
    p.add_argument("--out", default="verdicts.jsonl", help="Verdict JSONL file")

    p = sub.add_parser("eval", parents=[common], help="Per-dataset metrics on a labelled manifest")
    p.add_argument("--manifest", help="CSV or JSONL manifest with labels")
    p.add_argument("--model", required=True, help="Model bundle directory")
    p.add_argument("--split", choices=[s.value for s in Split], help="Restrict to one split")
    p.add_argument("--by-scanner", action="store_true", help="One row per dataset and scanner")
    p.add_argument("--out", default="metrics.csv", help="CSV table; a JSON report is written next to it")

    p = sub.add_parser("bench", parents=[common], help="Single-threaded latency benchmark")
    p.add_argument("--model", help="Model bundle (default: seeded preset models)")
    p.add_argument("--approaches", help="Comma-separated approaches (default: all)")
    p.add_argument("--backbones", help="Comma-separated backbone presets, randomly initialised (default: desk)")
    p.add_argument("--iterations", type=int, default=None, help="Timed passes (default: THUMBQC_BENCH_ITERATIONS)")
    p.add_argument("--warmup", type=int, default=None, help="Warmup passes (default: THUMBQC_BENCH_WARMUP)")
    p.add_argument("--out", default="bench.json", help="Bench report JSON")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    settings = get_settings()
    configure_logging(args.log_level or settings.log_level.value)
    try:
        return COMMANDS[args.command](args, settings)
    except ThumbQCError as e:
        logger.error("%s", e.message)
        print(json.dumps(e.detail), file=sys.stderr)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
