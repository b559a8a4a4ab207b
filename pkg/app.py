"""
Command-line application for recdenoiser.

Sub-commands train models, evaluate checkpoints, run noise-robustness and
sensitivity sweeps, export learned masks and generate synthetic datasets.
Every command writes its artifacts and a manifest.json into a run directory.

Exit codes: 0 success, 2 usage or configuration error, 3 data or checkpoint
error, 4 numerical failure.
"""

import argparse
import logging
import os
import sys
import time
from typing import Any, Dict, List, Optional, Sequence, Tuple

from config import get_config
from core.checkpoint import Checkpoint, load_checkpoint
from core.denoiser import export_masks
from core.exceptions import CheckpointError, ConfigError, DataError, NumericalError
from core.model import ModelConfig
from core.trainer import ESTIMATOR_CHOICES, TrainConfig, Trainer
from core.training_loop import TrainingLoop
from data.interactions import (
    ITEM_MAP_FILE,
    SplitDataset,
    filter_interactions,
    load_interactions,
    split_leave_one_out,
    write_interactions,
)
from data.synthetic import NOISE_PROFILES, SyntheticSpec, generate_synthetic, write_noise_positions
from evaluation.ranking import evaluate, write_report_csv
from evaluation.sweep import (
    REPORT_COLUMNS,
    SENSITIVITY_PARAMETERS,
    SUMMARY_COLUMNS,
    SWEEP_RATIOS,
    SWEEP_VARIANTS,
    check_ratios,
    noise_sweep,
    sensitivity_sweep,
    summarize,
    write_rows_csv,
)
from runs import FileRunStore, RunManifest, create_run_directory, fingerprint_file, write_manifest
from variants import registry

# Configure logging
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4

MODEL_FLAGS = ("max_len", "dim", "num_blocks", "num_heads", "dropout_rate", "weight_decay", "attention_dropout")
RESUME_IGNORED_FLAGS = (
    "estimator", "variant", "beta", "gamma", "learning_rate", "mask_learning_rate", "batch_size", "eval_every",
    "patience", "seed", "jacobian_probes", "jvp_eps", "mask_init", "window_size", "drop_keep_prob", "top_n",
    "num_negatives", "eval_seed",
)


def _float_list(text: str) -> List[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got '{text}'")


def _int_list(text: str) -> List[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got '{text}'")


def _str_list(text: str) -> List[str]:
    return [part.strip() for part in text.split(",") if part.strip()]


def _variant_help(schemas: Dict[str, Dict[str, Any]]) -> str:
    """One help entry per registered variant with its options and defaults."""
    entries = []
    for name, schema in schemas.items():
        options = ", ".join(f"{option}={spec['default']}" for option, spec in schema["parameters"].items())
        entries.append(f"{name}{f' ({options})' if options else ''}: {schema['description']}")
    return "attention variant; defaults to full or the estimator's denoiser. " + "; ".join(entries)


def _option_default(schemas: Dict[str, Dict[str, Any]], variant: str, option: str, fallback: Any) -> Any:
    parameters = schemas.get(variant, {}).get("parameters", {})
    return parameters.get(option, {}).get("default", fallback)


def _add_model_flags(parser: argparse.ArgumentParser, defaults: Dict[str, Any]) -> None:
    model = defaults["model"]
    parser.add_argument("--max-len", type=int, default=model["max_len"], help="sequence length n")
    parser.add_argument("--dim", type=int, default=model["dim"], help="hidden dimension d")
    parser.add_argument("--num-blocks", type=int, default=model["num_blocks"])
    parser.add_argument("--num-heads", type=int, default=model["num_heads"])
    parser.add_argument("--dropout-rate", type=float, default=model["dropout_rate"])
    parser.add_argument("--weight-decay", type=float, default=model["weight_decay"])
    parser.add_argument("--attention-dropout", action="store_true", default=model["attention_dropout"])


def _add_train_flags(parser: argparse.ArgumentParser, defaults: Dict[str, Any]) -> None:
    train, evaluation = defaults["train"], defaults["eval"]
    schemas = registry.list_variants()
    parser.add_argument("--estimator", choices=ESTIMATOR_CHOICES, default=train["estimator"])
    parser.add_argument("--variant", choices=["", *schemas], default="", help=_variant_help(schemas))
    parser.add_argument("--beta", type=float, default=train["beta"], help="sparsity weight")
    parser.add_argument("--gamma", type=float, default=train["gamma"], help="Jacobian penalty weight")
    parser.add_argument("--learning-rate", type=float, default=train["learning_rate"])
    parser.add_argument("--mask-learning-rate", type=float, default=train["mask_learning_rate"])
    parser.add_argument("--batch-size", type=int, default=train["batch_size"])
    parser.add_argument("--max-epochs", type=int, default=train["max_epochs"])
    parser.add_argument("--eval-every", type=int, default=train["eval_every"])
    parser.add_argument("--patience", type=int, default=train["patience"])
    parser.add_argument("--seed", type=int, default=train["seed"])
    parser.add_argument("--jacobian-probes", type=int, default=train["jacobian_probes"])
    parser.add_argument("--jvp-eps", type=float, default=train["jvp_eps"])
    parser.add_argument("--mask-init", type=float, default=train["mask_init"])
    parser.add_argument("--window-size", type=int, default=_option_default(schemas, "window", "window_size", 5))
    parser.add_argument("--drop-keep-prob", type=float, default=_option_default(schemas, "random-drop", "drop_keep_prob", 0.8))
    parser.add_argument("--top-n", type=int, default=evaluation["top_n"])
    parser.add_argument("--num-negatives", type=int, default=evaluation["num_negatives"])
    parser.add_argument("--eval-seed", type=int, default=evaluation["eval_seed"])


def _add_data_flags(parser: argparse.ArgumentParser, defaults: Dict[str, Any]) -> None:
    parser.add_argument("--data", required=True, help="interaction file: 'user item [timestamp]' per line")
    parser.add_argument("--min-user-interactions", type=int, default=defaults["data"]["min_user_interactions"])
    parser.add_argument("--min-item-interactions", type=int, default=defaults["data"]["min_item_interactions"])


def _add_run_flags(parser: argparse.ArgumentParser, defaults: Dict[str, Any]) -> None:
    parser.add_argument("--run-root", default=defaults["runs"]["root"], help="parent of new run directories")
    parser.add_argument("--run-dir", default=None, help="explicit run directory (resumes sweeps)")


def build_parser(defaults: Optional[Dict[str, Any]] = None) -> argparse.ArgumentParser:
    """
    Build the argument parser; flag defaults come from get_config().
    """
    defaults = defaults or get_config()
    parser = argparse.ArgumentParser(prog="recdenoiser", description="Sequential recommendation with learned attention masks")
    commands = parser.add_subparsers(dest="command", required=True)

    train = commands.add_parser("train", help="train a model")
    _add_data_flags(train, defaults)
    _add_model_flags(train, defaults)
    _add_train_flags(train, defaults)
    _add_run_flags(train, defaults)
    train.add_argument("--resume", default=None, help="checkpoint to continue training from")

    evaluation = commands.add_parser("eval", help="evaluate a checkpoint")
    _add_data_flags(evaluation, defaults)
    _add_run_flags(evaluation, defaults)
    evaluation.add_argument("--checkpoint", required=True)
    evaluation.add_argument("--split", choices=("valid", "test"), default="test")
    evaluation.add_argument("--output", default=None, help="report CSV path")

    sweep = commands.add_parser("noise-sweep", help="train every variant at every corruption ratio")
    _add_data_flags(sweep, defaults)
    _add_model_flags(sweep, defaults)
    _add_train_flags(sweep, defaults)
    _add_run_flags(sweep, defaults)
    sweep.add_argument("--ratios", type=_float_list, default=list(SWEEP_RATIOS))
    sweep.add_argument("--variants", type=_str_list, default=list(SWEEP_VARIANTS))
    sweep.add_argument("--seeds", type=_int_list, default=[0, 1, 2, 3, 4])
    sweep.add_argument("--allow-any-ratio", action="store_true")

    masks = commands.add_parser("export-masks", help="write per-block keep probabilities")
    _add_run_flags(masks, defaults)
    masks.add_argument("--checkpoint", required=True)
    masks.add_argument("--output", default=None, help="output directory")

    sensitivity = commands.add_parser("sensitivity", help="sweep beta, gamma or max_len")
    _add_data_flags(sensitivity, defaults)
    _add_model_flags(sensitivity, defaults)
    _add_train_flags(sensitivity, defaults)
    _add_run_flags(sensitivity, defaults)
    sensitivity.add_argument("--parameter", choices=SENSITIVITY_PARAMETERS, required=True)
    sensitivity.add_argument("--values", type=_float_list, default=[1e-1, 1e-2, 1e-3, 1e-4, 1e-5])
    sensitivity.add_argument("--seeds", type=_int_list, default=[0])
    sensitivity.add_argument("--fixed-other", type=float, default=1e-2)

    generate = commands.add_parser("generate", help="write a synthetic planted-noise dataset")
    _add_run_flags(generate, defaults)
    generate.add_argument("--output", default=None, help="output directory")
    generate.add_argument("--users", type=int, default=2000)
    generate.add_argument("--items", type=int, default=500)
    generate.add_argument("--min-length", type=int, default=10)
    generate.add_argument("--max-length", type=int, default=30)
    generate.add_argument("--noise-ratio", type=float, default=0.2)
    generate.add_argument("--clusters", type=int, default=8)
    generate.add_argument("--successors", type=int, default=3)
    generate.add_argument("--noise-profile", choices=NOISE_PROFILES, default="age")
    generate.add_argument("--seed", type=int, default=0)
    return parser


def configs_from_args(args: argparse.Namespace, num_items: int = 1) -> Tuple[ModelConfig, TrainConfig]:
    """Map flags one-to-one onto ModelConfig and TrainConfig and validate them."""
    model_config = ModelConfig(
        num_items=num_items,
        max_len=args.max_len,
        dim=args.dim,
        num_blocks=args.num_blocks,
        num_heads=args.num_heads,
        dropout_rate=args.dropout_rate,
        weight_decay=args.weight_decay,
        attention_dropout=args.attention_dropout,
    )
    train_config = TrainConfig(
        estimator=args.estimator,
        beta=args.beta,
        gamma=args.gamma,
        learning_rate=args.learning_rate,
        mask_learning_rate=args.mask_learning_rate,
        batch_size=args.batch_size,
        max_epochs=args.max_epochs,
        eval_every=args.eval_every,
        patience=args.patience,
        seed=args.seed,
        jacobian_probes=args.jacobian_probes,
        jvp_eps=args.jvp_eps,
        mask_init=args.mask_init,
        variant=args.variant,
        window_size=args.window_size,
        drop_keep_prob=args.drop_keep_prob,
        top_n=args.top_n,
        num_negatives=args.num_negatives,
        eval_seed=args.eval_seed,
    )
    model_config.validate()
    train_config.validate()
    if train_config.resolved_variant() not in registry.variants:
        raise ConfigError(f"Variant '{train_config.resolved_variant()}' not found in registry")
    return model_config, train_config


def load_dataset(args: argparse.Namespace, run_dir: str) -> Tuple[SplitDataset, Dict[str, Any]]:
    """Load, filter and split the dataset; the id map goes into the run directory."""
    log = load_interactions(args.data, map_path=os.path.join(run_dir, ITEM_MAP_FILE))
    if args.min_user_interactions > 0 or args.min_item_interactions > 0:
        log = filter_interactions(log, args.min_user_interactions, args.min_item_interactions)
    split = split_leave_one_out(log)
    if not split.users:
        raise DataError(f"No user in {args.data} has at least 3 interactions")
    info = {
        "path": os.path.abspath(args.data),
        "fingerprint": fingerprint_file(args.data),
        "num_users": len(split.users),
        "num_items": split.num_items,
    }
    return split, info


def _run_dir(args: argparse.Namespace) -> str:
    if args.run_dir:
        os.makedirs(args.run_dir, exist_ok=True)
        return args.run_dir
    return create_run_directory(args.run_root, args.command)


def _finish(run_dir: str, manifest: RunManifest, started: float, status: str = "complete") -> None:
    manifest.status = status
    manifest.wall_clock_seconds = time.time() - started
    manifest.artifacts["manifest"] = os.path.join(run_dir, "manifest.json")
    write_manifest(run_dir, manifest)


def _explicit_train_flags(args: argparse.Namespace) -> Dict[str, Any]:
    """Flags of a train invocation whose values differ from the parser defaults."""
    reference = vars(build_parser().parse_args(["train", "--data", args.data]))
    return {dest: value for dest, value in vars(args).items() if dest in reference and reference[dest] != value}


def resume_expectations(args: argparse.Namespace, checkpoint: Checkpoint, num_items: int) -> ModelConfig:
    """
    Model config a resumed run must match, warning about flags the checkpoint overrides.

    Model flags given on the command line become part of the expected config,
    so a mismatch fails the load and names the field. Training flags other
    than --max-epochs are replaced by the checkpoint's values.
    """
    explicit = _explicit_train_flags(args)
    stored = checkpoint.train_config.to_dict()
    for name in RESUME_IGNORED_FLAGS:
        if name in explicit and explicit[name] != stored.get(name):
            logger.warning(f"Ignoring --{name.replace('_', '-')}={explicit[name]} on resume; the checkpoint's {name}={stored.get(name)} is kept")
    overrides = {name: explicit[name] for name in MODEL_FLAGS if name in explicit}
    return ModelConfig(**{**checkpoint.model_config.to_dict(), **overrides, "num_items": num_items})


def cmd_train(args: argparse.Namespace) -> int:
    """Train a model; writes checkpoint.json, log.csv, masks/ and the manifest."""
    if args.resume:
        checkpoint = load_checkpoint(args.resume)
        model_config, train_config = checkpoint.model_config, checkpoint.train_config
    else:
        model_config, train_config = configs_from_args(args)
    run_dir = _run_dir(args)
    started = time.time()
    split, data_info = load_dataset(args, run_dir)

    manifest = RunManifest(command="train", config={}, seed=train_config.seed, dataset_fingerprint=data_info["fingerprint"], started_at=started)
    checkpoint_path = os.path.join(run_dir, "checkpoint.json")
    log_path = os.path.join(run_dir, "log.csv")
    try:
        if args.resume:
            expected = resume_expectations(args, checkpoint, split.num_items)
            loop = TrainingLoop.resume(args.resume, split, max_epochs=args.max_epochs, expected_model=expected,
                                       log_path=log_path, checkpoint_path=checkpoint_path)
        else:
            model_config.num_items = split.num_items
            trainer = Trainer(model_config, train_config, split)
            loop = TrainingLoop(trainer, log_path=log_path, checkpoint_path=checkpoint_path, data_info=data_info)
        manifest.config = {"model": loop.trainer.model_config.to_dict(), "train": loop.trainer.train_config.to_dict(), "data": data_info}
        if loop.trainer.train_config.is_backbone:
            manifest.tags.append("backbone")
        summary = loop.start()
    except NumericalError:
        _finish(run_dir, manifest, started, status="failed")
        raise

    manifest.artifacts.update({"checkpoint": checkpoint_path, "log": log_path, "item_map": os.path.join(run_dir, ITEM_MAP_FILE)})
    if loop.trainer.variant.learnable:
        export_masks(loop.trainer.variant.logits, os.path.join(run_dir, "masks"))
        manifest.artifacts["masks"] = os.path.join(run_dir, "masks")
    manifest.results = {key: summary[key] for key in ("status", "epochs", "best_epoch", "best_val_ndcg10")}
    _finish(run_dir, manifest, started)
    print(f"Training {summary['status']} after {summary['epochs']} epochs; run directory: {run_dir}")
    return EXIT_OK


def _variant_for_checkpoint(checkpoint):
    train_config = checkpoint.train_config
    variant = registry.create(
        train_config.resolved_variant(),
        checkpoint.model_config.num_blocks,
        checkpoint.model_config.max_len,
        beta=train_config.beta,
        mask_init=train_config.mask_init,
        window_size=train_config.window_size,
        drop_keep_prob=train_config.drop_keep_prob,
    )
    variant.load_mask_params(checkpoint.evaluation_mask_params())
    return variant


def cmd_eval(args: argparse.Namespace) -> int:
    """Evaluate a checkpoint on the validation or test items."""
    checkpoint = load_checkpoint(args.checkpoint)
    run_dir = _run_dir(args)
    started = time.time()
    split, data_info = load_dataset(args, run_dir)
    if checkpoint.model_config.num_items != split.num_items:
        raise CheckpointError(f"Checkpoint config mismatch on field 'num_items': checkpoint has {checkpoint.model_config.num_items}, data has {split.num_items}")

    variant = _variant_for_checkpoint(checkpoint)
    train_config = checkpoint.train_config
    report = evaluate(
        checkpoint.evaluation_params(),
        checkpoint.model_config,
        split,
        stage=args.split,
        masks=variant.evaluation_masks(),
        top_n=train_config.top_n,
        num_negatives=train_config.num_negatives,
        seed=train_config.eval_seed,
    )
    output = args.output or os.path.join(run_dir, "report.csv")
    write_report_csv(report, output)

    manifest = RunManifest(
        command="eval",
        config={"checkpoint": os.path.abspath(args.checkpoint), "split": args.split, "data": data_info},
        seed=train_config.eval_seed,
        dataset_fingerprint=data_info["fingerprint"],
        artifacts={"report": output},
        started_at=started,
        results={"hit10": report.hit, "ndcg10": report.ndcg},
    )
    _finish(run_dir, manifest, started)
    print(f"{args.split}: hit@{report.top_n}={report.hit:.4f} ndcg@{report.top_n}={report.ndcg:.4f}")
    return EXIT_OK


def cmd_noise_sweep(args: argparse.Namespace) -> int:
    """Noise-robustness sweep; resumable through --run-dir."""
    ratios = check_ratios(args.ratios, args.allow_any_ratio)
    for variant in args.variants:
        if variant not in registry.variants:
            raise ConfigError(f"Variant '{variant}' not found in registry")
    model_config, train_config = configs_from_args(args)
    run_dir = _run_dir(args)
    started = time.time()
    split, data_info = load_dataset(args, run_dir)
    model_config.num_items = split.num_items

    store = FileRunStore(os.path.join(run_dir, "cells"))
    corruption_dir = os.path.join(run_dir, "corruption")
    rows = noise_sweep(split, model_config, train_config, ratios, args.variants, args.seeds, store, args.allow_any_ratio,
                       corruption_dir=corruption_dir)
    report_path = write_rows_csv(rows, REPORT_COLUMNS, os.path.join(run_dir, "report.csv"))
    summary_path = write_rows_csv(summarize(rows), SUMMARY_COLUMNS, os.path.join(run_dir, "summary.csv"))

    manifest = RunManifest(
        command="noise-sweep",
        config={"model": model_config.to_dict(), "train": train_config.to_dict(), "data": data_info,
                "ratios": ratios, "variants": list(args.variants), "seeds": list(args.seeds)},
        seed=train_config.seed,
        dataset_fingerprint=data_info["fingerprint"],
        artifacts={"report": report_path, "summary": summary_path, "cells": store.directory,
                   "corruption": corruption_dir},
        started_at=started,
        results={"cells": len(rows)},
    )
    _finish(run_dir, manifest, started)
    print(f"Sweep finished: {len(rows)} cells; run directory: {run_dir}")
    return EXIT_OK


def cmd_export_masks(args: argparse.Namespace) -> int:
    """Write block_<l>.csv files with the keep probability of every causal pair."""
    checkpoint = load_checkpoint(args.checkpoint)
    variant = _variant_for_checkpoint(checkpoint)
    if not variant.learnable:
        raise ConfigError(f"Checkpoint variant '{variant.name}' has no mask logits to export")
    run_dir = _run_dir(args)
    started = time.time()
    output = args.output or os.path.join(run_dir, "masks")
    paths = export_masks(variant.logits, output)
    manifest = RunManifest(
        command="export-masks",
        config={"checkpoint": os.path.abspath(args.checkpoint)},
        seed=checkpoint.train_config.seed,
        artifacts={f"block_{block}": path for block, path in enumerate(paths)},
        started_at=started,
    )
    _finish(run_dir, manifest, started)
    print(f"Exported {len(paths)} mask files to {output}")
    return EXIT_OK


def cmd_sensitivity(args: argparse.Namespace) -> int:
    """Sweep beta, gamma or max_len and report test metrics per value."""
    model_config, train_config = configs_from_args(args)
    if train_config.resolved_variant() not in ("denoiser-arm", "denoiser-ar"):
        raise ConfigError("Sensitivity sweeps need a denoiser variant (estimator arm or ar)")
    run_dir = _run_dir(args)
    started = time.time()
    split, data_info = load_dataset(args, run_dir)
    model_config.num_items = split.num_items

    store = FileRunStore(os.path.join(run_dir, "cells"))
    rows = sensitivity_sweep(split, model_config, train_config, args.parameter, args.values, args.seeds, args.fixed_other, store)
    report_path = write_rows_csv(rows, ["parameter", "value", "seed", "hit10", "ndcg10"], os.path.join(run_dir, "report.csv"))
    summary_path = write_rows_csv(
        summarize(rows, keys=("parameter", "value")),
        ["parameter", "value", "runs", "hit10_mean", "hit10_std", "ndcg10_mean", "ndcg10_std"],
        os.path.join(run_dir, "summary.csv"),
    )
    manifest = RunManifest(
        command="sensitivity",
        config={"model": model_config.to_dict(), "train": train_config.to_dict(), "data": data_info,
                "parameter": args.parameter, "values": list(args.values), "seeds": list(args.seeds)},
        seed=train_config.seed,
        dataset_fingerprint=data_info["fingerprint"],
        artifacts={"report": report_path, "summary": summary_path},
        started_at=started,
    )
    _finish(run_dir, manifest, started)
    print(f"Sensitivity sweep finished: {len(rows)} runs; run directory: {run_dir}")
    return EXIT_OK


def cmd_generate(args: argparse.Namespace) -> int:
    """Write interactions.txt and noise_positions.csv for a synthetic dataset."""
    spec = SyntheticSpec(
        num_users=args.users,
        num_items=args.items,
        min_length=args.min_length,
        max_length=args.max_length,
        noise_ratio=args.noise_ratio,
        seed=args.seed,
        num_clusters=args.clusters,
        successors=args.successors,
        noise_profile=args.noise_profile,
    )
    spec.validate()
    run_dir = _run_dir(args)
    started = time.time()
    output = args.output or run_dir
    os.makedirs(output, exist_ok=True)
    dataset = generate_synthetic(spec)
    data_path = write_interactions(dataset.log, os.path.join(output, "interactions.txt"))
    noise_path = write_noise_positions(dataset, os.path.join(output, "noise_positions.csv"))
    manifest = RunManifest(
        command="generate",
        config={"synthetic": vars(spec).copy()},
        seed=spec.seed,
        dataset_fingerprint=fingerprint_file(data_path),
        artifacts={"data": data_path, "noise_positions": noise_path},
        started_at=started,
    )
    _finish(run_dir, manifest, started)
    print(f"Wrote {dataset.log.num_interactions} interactions to {data_path}")
    return EXIT_OK


COMMANDS = {
    "train": cmd_train,
    "eval": cmd_eval,
    "noise-sweep": cmd_noise_sweep,
    "export-masks": cmd_export_masks,
    "sensitivity": cmd_sensitivity,
    "generate": cmd_generate,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Parse arguments, run one command and map errors onto exit codes.

    Args:
        argv: Arguments without the program name (defaults to sys.argv[1:])

    Returns:
        Process exit code
    """
    defaults = get_config()
    logging.getLogger().setLevel(defaults["logging"]["level"])
    parser = build_parser(defaults)
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if isinstance(e.code, int) else EXIT_USAGE

    try:
        return COMMANDS[args.command](args)
    except ConfigError as e:
        logger.error(f"Configuration error: {str(e)}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as e:
        logger.error(f"Data error: {str(e)}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as e:
        logger.error(f"Numerical failure: {str(e)} {e.diagnostics}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
