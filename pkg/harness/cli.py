#!/usr/bin/env python3
"""
HGCT Command-Line Harness
=========================

One entry point for every tool of the repository:

  train          train a model on a JSON-lines dataset directory
  eval           evaluate a checkpoint and write its score matrix
  fuse           fuse score matrices of several modality streams
  count          analytic parameter and MAC/FLOP report
  gradcheck      finite-difference oracle over every block type
  ablate         run one ablation axis
  synth          write the synthetic dataset
  dump-features  per-stage feature responses of a checkpoint

Every run writes its resolved manifest.json and config.txt to its output
directory; `train --manifest <run>/manifest.json` re-runs from a manifest alone.

Exit codes: 0 success, 1 runtime failure, 2 usage error, 3 configuration error.

Example Usage:
    python -m harness synth --seed 7 --out data/synth
    python -m harness train --data data/synth --set model.num_classes=8 --out runs/joint
    python -m harness count --config default
    python -m harness gradcheck --blocks all --dtype f64
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path
from typing import Any

from dotenv import load_dotenv

from common.exceptions import ConfigError, HgctError, NumericalError, UsageError
from common.state import FileRunRepository
from common.types import AblationAxis, DType, ModelConfig, RunManifest, TrainConfig
from common.utils import config_run_id
from harness.config import dump_config, load_config
from harness.output import (
    emit_output,
    format_ablation_table,
    format_cost_report,
    format_eval_result,
    format_fusion,
    format_gradcheck_summary,
    format_header,
    format_run_report,
)
from hgct.checkpoint import load_checkpoint
from hgct.counting import DEFAULT_FRAMES, cost_report
from hgct.features import dump_feature_responses
from hgct.model import build_model
from hgct.verification import resolve_blocks, run_gradcheck_suite
from skeleton.data import DatasetSplit, load_jsonl, write_jsonl
from skeleton.graph import SkeletonGraph, load_graph
from skeleton.preprocess import prepare_split
from skeleton.synth import SynthSpec, nearest_centroid_accuracy, synth_dataset
from training.ablation import run_ablation, save_ablation
from training.fusion import fuse_scores, read_scores_csv, write_scores_csv
from training.trainer import SCORES_FILE, evaluate, train

logger = logging.getLogger(__name__)

TOOL_VERSION = "0.1.0"
RUNS_DIR = Path("runs")
TRAIN_FILE = "train.jsonl"
TEST_FILE = "test.jsonl"
SYNTH_RUN_DIR = "run"
FEATURES_FILE = "features.csv"
DEFAULT_DUMP_SAMPLES = 8

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_CONFIG = 3


def main(argv: list[str] | None = None) -> int:
    """Main entry point; returns the process exit code."""
    load_dotenv(Path(__file__).parent.parent / ".env")

    try:
        args = _parse_args(argv)
    except SystemExit as e:
        # argparse exits 0 after --help and 2 on a usage error
        return e.code if isinstance(e.code, int) else EXIT_USAGE

    logging.basicConfig(
        level=args.log_level.upper(),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    )

    try:
        return args.handler(args)
    except ConfigError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except UsageError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except HgctError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_FAILURE
    except OSError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_FAILURE
    except KeyboardInterrupt:
        print("\n\nInterrupted by user", file=sys.stderr)
        return EXIT_FAILURE


# ============================================================================
# Subcommands
# ============================================================================


def _cmd_train(args: argparse.Namespace) -> int:
    repository = FileRunRepository()
    options: dict[str, Any] = {}
    if args.manifest:
        manifest = repository.load_manifest(Path(args.manifest))
        model_config, train_config = manifest.model, manifest.train
        data_dir = args.data or (manifest.data_paths[0] if manifest.data_paths else None)
        out = args.out or manifest.output_dir or None
        options.update(manifest.options)
    else:
        model_config, train_config = _resolve_configs(args)
        data_dir, out = args.data, args.out
    if args.max_epochs is not None:
        options["max_epochs"] = args.max_epochs
    if not data_dir:
        raise UsageError("train needs --data <dir with train.jsonl and test.jsonl>")

    graph = load_graph(model_config.graph)
    train_split, test_split = _load_dataset(Path(data_dir), graph)
    run_dir = _start_run("train", model_config, train_config, [str(data_dir)], out, options, repository)
    emit_output(None, format_header(f"TRAIN  {run_dir}"))

    result = train(
        model_config,
        train_config,
        train_split,
        test_split,
        run_dir=run_dir,
        graph=graph,
        repository=repository,
        max_epochs=options.get("max_epochs"),
    )
    emit_output(None, format_run_report(result.report))
    return EXIT_OK


def _cmd_eval(args: argparse.Namespace) -> int:
    _, train_config = _resolve_configs(args)
    model = load_checkpoint(args.checkpoint)
    model_dtype = next(p for _, p in model.named_parameters()).data.dtype
    train_config = replace(train_config, dtype=DType.parse(model_dtype.name))
    split = _load_split(Path(args.data), args.split, model.graph)

    run_dir = _start_run(
        "eval",
        model.config,
        train_config,
        [args.data],
        args.out,
        {"checkpoint": str(args.checkpoint), "split": args.split},
    )
    result = evaluate(model, split, train_config)
    write_scores_csv(run_dir / SCORES_FILE, result.scores)
    FileRunRepository().save_report(run_dir, "eval", result.to_dict())
    emit_output(None, format_eval_result(result))
    return EXIT_OK


def _cmd_fuse(args: argparse.Namespace) -> int:
    model_config, train_config = _resolve_configs(args)
    streams = [(path, read_scores_csv(path)) for path in args.scores]
    weights = [1.0] * len(streams) if args.weights is None else _parse_weights(args.weights)
    fused = fuse_scores([s for _, s in streams], weights)

    run_dir = _start_run("fuse", model_config, train_config, list(args.scores), args.out, {"weights": weights})
    write_scores_csv(run_dir / SCORES_FILE, fused)
    report = {
        "streams": [{"path": p, "accuracy": s.accuracy} for p, s in streams],
        "weights": weights,
        "fused_accuracy": fused.accuracy,
    }
    FileRunRepository().save_report(run_dir, "fusion", report)
    emit_output(None, format_fusion(streams, weights, fused))
    return EXIT_OK


def _cmd_count(args: argparse.Namespace) -> int:
    model_config, train_config = _resolve_configs(args)
    report = cost_report(model_config, args.frames, args.joints)
    if args.check:
        built = build_model(model_config, seed=train_config.seed).num_parameters()
        if built != report.params:
            raise NumericalError(f"analytic parameter count {report.params} != constructed model {built}")
        logger.info("Analytic count matches the constructed model (%d parameters)", built)

    run_dir = _start_run(
        "count", model_config, train_config, [], args.out, {"frames": args.frames, "joints": args.joints}
    )
    FileRunRepository().save_report(run_dir, "count", report.to_dict())
    emit_output(None, format_cost_report(report, per_block=args.per_block))
    return EXIT_OK


def _cmd_gradcheck(args: argparse.Namespace) -> int:
    model_config, train_config = _resolve_configs(args)
    if train_config.dtype != DType.FLOAT64:
        raise UsageError("gradcheck runs in float64; pass --dtype f64")
    blocks = resolve_blocks(args.blocks)
    if args.seeds < 1:
        raise UsageError(f"--seeds must be >= 1, got {args.seeds}")

    run_dir = _start_run(
        "gradcheck", model_config, train_config, [], args.out, {"blocks": blocks, "seeds": args.seeds}
    )
    summary = run_gradcheck_suite(blocks, seeds=args.seeds)
    FileRunRepository().save_report(run_dir, "gradcheck", summary.to_dict())
    emit_output(None, format_gradcheck_summary(summary))
    return EXIT_OK if summary.passed else EXIT_FAILURE


def _cmd_ablate(args: argparse.Namespace) -> int:
    model_config, train_config = _resolve_configs(args)
    graph = load_graph(model_config.graph)
    train_split = test_split = None
    if not args.params_only:
        if not args.data:
            raise UsageError("ablate needs --data unless --params-only is given")
        train_split, test_split = _load_dataset(Path(args.data), graph)

    run_dir = _start_run(
        "ablate",
        model_config,
        train_config,
        [args.data] if args.data else [],
        args.out,
        {"axis": args.axis, "params_only": args.params_only},
    )
    table = run_ablation(
        args.axis, model_config, train_config, train_split, test_split, graph=graph, params_only=args.params_only
    )
    save_ablation(run_dir, table)
    emit_output(None, format_ablation_table(table))
    return EXIT_OK


def _cmd_synth(args: argparse.Namespace) -> int:
    model_config, train_config = _resolve_configs(args)
    spec = SynthSpec(
        classes=args.classes,
        per_class=args.per_class,
        frames=args.frames,
        noise_sigma=args.noise,
        seed=train_config.seed,
        test_per_class=args.test_per_class,
    )
    out = Path(args.out) if args.out else RUNS_DIR / f"synth-seed{spec.seed}"
    train_split, test_split = synth_dataset(spec)
    write_jsonl(train_split, out / TRAIN_FILE)
    write_jsonl(test_split, out / TEST_FILE)
    # The dataset directory owns manifest.json, so the run record goes one level down
    _start_run(
        "synth",
        model_config,
        train_config,
        [],
        str(out / SYNTH_RUN_DIR),
        {"classes": spec.classes, "per_class": spec.per_class, "frames": spec.frames, "noise": spec.noise_sigma},
    )
    baseline = nearest_centroid_accuracy(train_split, test_split)
    emit_output(
        None,
        f"Wrote {len(train_split)} train / {len(test_split)} test samples to {out}\n"
        f"Nearest-centroid baseline accuracy: {baseline:.4f}",
    )
    return EXIT_OK


def _cmd_dump_features(args: argparse.Namespace) -> int:
    _, train_config = _resolve_configs(args)
    model = load_checkpoint(args.checkpoint)
    split = _load_split(Path(args.data), args.split, model.graph)
    dtype = next(p for _, p in model.named_parameters()).data.dtype.type
    x, _ = prepare_split(split, model.graph, train_config.modality, train_config.frames, dtype)
    batch = x[: args.samples]
    if len(batch) == 0:
        raise UsageError(f"split '{args.split}' has no samples to dump")
    if batch.shape[-1] == 1:
        batch = batch[..., 0]

    run_dir = _start_run(
        "dump-features",
        model.config,
        train_config,
        [args.data],
        args.out,
        {"checkpoint": str(args.checkpoint), "split": args.split, "samples": len(batch)},
    )
    responses = dump_feature_responses(model, batch, run_dir / FEATURES_FILE)
    emit_output(None, f"Wrote {len(responses)} response series to {run_dir / FEATURES_FILE}")
    return EXIT_OK


# ============================================================================
# Private Helper Functions
# ============================================================================


def _flag_assignments(args: argparse.Namespace) -> list[str]:
    """key=value strings for the dedicated flags that were given."""
    mapping = {
        "seed": "train.seed",
        "dtype": "train.dtype",
        "epochs": "train.epochs",
        "modality": "train.modality",
        "topology": "model.topology",
        "alpha": "model.alpha",
        "gamma": "model.gamma",
    }
    assignments = [f"{key}={getattr(args, name)}" for name, key in mapping.items() if getattr(args, name) is not None]
    if args.no_joint_type:
        assignments.append("model.dstt.joint_type=false")
    if args.no_frame_order:
        assignments.append("model.dstt.frame_order=false")
    return assignments


def _resolve_configs(args: argparse.Namespace) -> tuple[ModelConfig, TrainConfig]:
    return load_config(args.config, args.set or [], _flag_assignments(args))


def _start_run(
    command: str,
    model_config: ModelConfig,
    train_config: TrainConfig,
    data_paths: list[str],
    out: str | None,
    options: dict[str, Any],
    repository: FileRunRepository | None = None,
) -> Path:
    """Create the output directory and write manifest.json and config.txt into it."""
    config_text = dump_config(model_config, train_config)
    run_dir = Path(out) if out else RUNS_DIR / f"{command}-{config_run_id(config_text, train_config.seed)}"
    repository = repository or FileRunRepository()
    manifest = RunManifest(
        command=command,
        model=model_config,
        train=train_config,
        data_paths=data_paths,
        seed=train_config.seed,
        tool_version=TOOL_VERSION,
        output_dir=str(run_dir),
        options=options,
    )
    repository.save_manifest(run_dir, manifest)
    repository.save_config_text(run_dir, config_text)
    logger.info("Run directory: %s", run_dir)
    return run_dir


def _load_split(data_dir: Path, name: str, graph: SkeletonGraph) -> DatasetSplit:
    return load_jsonl(data_dir / f"{name}.jsonl", num_joints=graph.num_joints, name=name)


def _load_dataset(data_dir: Path, graph: SkeletonGraph) -> tuple[DatasetSplit, DatasetSplit]:
    return _load_split(data_dir, Path(TRAIN_FILE).stem, graph), _load_split(data_dir, Path(TEST_FILE).stem, graph)


def _parse_weights(text: str) -> list[float]:
    try:
        return [float(w) for w in text.split(",")]
    except ValueError as e:
        raise UsageError(f"--weights must be a comma list of numbers, got '{text}'") from e


def _add_config_options(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("configuration")
    group.add_argument("--config", type=str, default=None, help="key=value config file, or 'default'")
    group.add_argument(
        "--set",
        action="append",
        metavar="KEY=VALUE",
        help="Override one config key (repeatable, applied after --config)",
    )
    group.add_argument("--seed", type=int, default=None, help="Seed of every random stream")
    group.add_argument("--dtype", type=str, default=None, help="float32 | float64 (f32 | f64)")
    group.add_argument("--epochs", type=int, default=None, help="Training epochs")
    group.add_argument("--topology", choices=["fixed", "learnable", "scaled"], default=None)
    group.add_argument("--alpha", type=str, default=None, help="Temporal channel fraction, e.g. 1/4")
    group.add_argument("--gamma", type=int, default=None, help="CwFF expansion factor")
    group.add_argument("--no-joint-type", action="store_true", help="Disable the joint-type encoding")
    group.add_argument("--no-frame-order", action="store_true", help="Disable the frame-order encoding")
    group.add_argument("--modality", choices=["joint", "bone", "joint-motion", "bone-motion"], default=None)
    group.add_argument("--out", type=str, default=None, help="Output directory (default: runs/<command>-<id>)")


def _parse_args(argv: list[str] | None = None) -> argparse.Namespace:
    """Parse command line arguments."""
    parser = argparse.ArgumentParser(
        prog="python -m harness",
        description="HGCT skeleton action recognition - training, evaluation and verification tools",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Synthetic data and a reduced model:
  python -m harness synth --seed 7 --out data/synth
  python -m harness train --data data/synth --config reduced.txt --out runs/joint

  # Re-run from a manifest:
  python -m harness train --manifest runs/joint/manifest.json --out runs/joint-again

  # Cost report and gradient checks:
  python -m harness count --config default --per-block
  python -m harness gradcheck --blocks all --dtype f64

Environment Variables (Optional):
  HGCT_LOG_LEVEL       Default for --log-level
  HGCT_DEBUG_NUMERICS  Check every forward op for non-finite values
""",
    )
    parser.add_argument(
        "--log-level",
        type=str,
        default=os.getenv("HGCT_LOG_LEVEL", "INFO"),
        choices=["DEBUG", "INFO", "WARNING", "ERROR", "debug", "info", "warning", "error"],
        help="Logging level (default: HGCT_LOG_LEVEL or INFO)",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    train_parser = subparsers.add_parser("train", help="Train on a dataset directory")
    _add_config_options(train_parser)
    train_parser.add_argument("--data", type=str, default=None, help="Directory with train.jsonl and test.jsonl")
    train_parser.add_argument("--manifest", type=str, default=None, help="Re-run a previous run's manifest.json")
    train_parser.add_argument("--max-epochs", type=int, default=None, help="Stop after this many epochs")
    train_parser.set_defaults(handler=_cmd_train)

    eval_parser = subparsers.add_parser("eval", help="Evaluate a checkpoint")
    _add_config_options(eval_parser)
    eval_parser.add_argument("--checkpoint", type=str, required=True)
    eval_parser.add_argument("--data", type=str, required=True)
    eval_parser.add_argument("--split", type=str, default="test", help="Split file stem (default: test)")
    eval_parser.set_defaults(handler=_cmd_eval)

    fuse_parser = subparsers.add_parser("fuse", help="Fuse score files of several streams")
    _add_config_options(fuse_parser)
    fuse_parser.add_argument("--scores", nargs="+", required=True, help="scores.csv files of the streams")
    fuse_parser.add_argument("--weights", type=str, default=None, help="Comma list of stream weights")
    fuse_parser.set_defaults(handler=_cmd_fuse)

    count_parser = subparsers.add_parser("count", help="Analytic parameter and FLOP count")
    _add_config_options(count_parser)
    count_parser.add_argument("--frames", type=int, default=DEFAULT_FRAMES)
    count_parser.add_argument("--joints", type=int, default=None)
    count_parser.add_argument("--per-block", action="store_true", help="Itemize by block")
    count_parser.add_argument("--check", action="store_true", help="Compare against a constructed model")
    count_parser.set_defaults(handler=_cmd_count)

    gradcheck_parser = subparsers.add_parser("gradcheck", help="Finite-difference gradient checks")
    _add_config_options(gradcheck_parser)
    gradcheck_parser.add_argument("--blocks", type=str, default="all", help="'all' or a comma list of blocks")
    gradcheck_parser.add_argument("--seeds", type=int, default=10)
    gradcheck_parser.set_defaults(handler=_cmd_gradcheck, dtype="f64")

    ablate_parser = subparsers.add_parser("ablate", help="Run one ablation axis")
    _add_config_options(ablate_parser)
    ablate_parser.add_argument("--axis", choices=[a.value for a in AblationAxis], required=True)
    ablate_parser.add_argument("--data", type=str, default=None)
    ablate_parser.add_argument("--params-only", action="store_true", help="Count parameters without training")
    ablate_parser.set_defaults(handler=_cmd_ablate)

    synth_parser = subparsers.add_parser("synth", help="Write the synthetic dataset")
    _add_config_options(synth_parser)
    synth_parser.add_argument("--classes", type=int, default=8)
    synth_parser.add_argument("--per-class", type=int, default=250)
    synth_parser.add_argument("--test-per-class", type=int, default=None)
    synth_parser.add_argument("--frames", type=int, default=64)
    synth_parser.add_argument("--noise", type=float, default=0.01)
    synth_parser.set_defaults(handler=_cmd_synth)

    dump_parser = subparsers.add_parser("dump-features", help="Dump per-stage feature responses")
    _add_config_options(dump_parser)
    dump_parser.add_argument("--checkpoint", type=str, required=True)
    dump_parser.add_argument("--data", type=str, required=True)
    dump_parser.add_argument("--split", type=str, default="test")
    dump_parser.add_argument("--samples", type=int, default=DEFAULT_DUMP_SAMPLES)
    dump_parser.set_defaults(handler=_cmd_dump_features)

    return parser.parse_args(argv)


if __name__ == "__main__":
    sys.exit(main())
