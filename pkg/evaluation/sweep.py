"""
Experiment sweeps: noise robustness and regularizer sensitivity.

Every (variant, ratio, seed) cell trains from scratch on a corrupted copy of
the training data and is evaluated on the test items. Finished cells are
recorded in a run store, so an interrupted sweep resumes where it stopped.
The corruption map of each (ratio, seed) pair can be exported, and cells of
mask-learning variants report how well the trained mask separates corrupted
positions from clean ones.
"""

import csv
import logging
import os
from dataclasses import replace
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, Set, Tuple

import numpy as np

from core.exceptions import ConfigError
from core.model import ModelConfig
from core.trainer import FIXED_VARIANTS, TrainConfig, Trainer
from core.training_loop import TrainingLoop
from data.corruption import MAX_RATIO, corrupt_training, export_corruption_csv
from data.interactions import SplitDataset
from runs.base import RunStore
from .ranking import evaluate
from .recovery import mask_noise_recovery

logger = logging.getLogger(__name__)

SWEEP_RATIOS = (0.0, 0.05, 0.10, 0.15, 0.20, 0.25)
SWEEP_VARIANTS = ("full", "denoiser-arm", "denoiser-ar", "window", "random-drop")
REPORT_COLUMNS = ["variant", "ratio", "seed", "hit10", "ndcg10", "recovery_difference", "recovery_p"]
SUMMARY_COLUMNS = ["variant", "ratio", "runs", "hit10_mean", "hit10_std", "ndcg10_mean", "ndcg10_std"]
SENSITIVITY_PARAMETERS = ("beta", "gamma", "max_len")


def config_for_variant(base: TrainConfig, variant: str, seed: Optional[int] = None) -> TrainConfig:
    """
    Training config for one variant: fixed variants train without an
    estimator and without the sparsity term.
    """
    seed = base.seed if seed is None else seed
    if variant in FIXED_VARIANTS:
        return replace(base, variant=variant, estimator="none", beta=0.0, seed=seed)
    if variant.startswith("denoiser-"):
        return replace(base, variant=variant, estimator=variant[len("denoiser-"):], seed=seed)
    raise ConfigError(f"Unknown variant '{variant}'")


def cell_id(variant: str, ratio: float, seed: int) -> str:
    return f"cell-{variant}-ratio={ratio:g}-seed={seed}"


def corruption_file(directory: str, ratio: float, seed: int) -> str:
    return os.path.join(directory, f"corruption-ratio={ratio:g}-seed={seed}.csv")


def train_and_evaluate(
    split: SplitDataset,
    model_config: ModelConfig,
    train_config: TrainConfig,
    noisy_positions: Optional[Set[Tuple[str, int]]] = None,
) -> Dict[str, Any]:
    """
    Train a fresh model and report test Hit@N / NDCG@N.

    When noisy positions are given and the variant learns masks, the
    clean-minus-noisy keep-probability difference and its p-value are
    reported as well.
    """
    trainer = Trainer(model_config, train_config, split)
    TrainingLoop(trainer).start()
    report = evaluate(
        trainer.params,
        model_config,
        split,
        stage="test",
        masks=trainer.evaluation_masks(),
        top_n=train_config.top_n,
        num_negatives=train_config.num_negatives,
        seed=train_config.eval_seed,
    )
    metrics: Dict[str, Any] = {"hit10": report.hit, "ndcg10": report.ndcg}
    if noisy_positions and trainer.variant.learnable:
        recovery = mask_noise_recovery(trainer.variant.logits, noisy_positions, split, model_config.max_len,
                                       train_config.mask_init)
        if recovery.applicable:
            metrics["recovery_difference"] = recovery.difference
            metrics["recovery_p"] = recovery.p_value
    return metrics


def check_ratios(ratios: Iterable[float], allow_any_ratio: bool = False) -> List[float]:
    """Validate sweep ratios before any training starts."""
    upper = 1.0 if allow_any_ratio else MAX_RATIO
    ratios = [float(ratio) for ratio in ratios]
    for ratio in ratios:
        if not 0.0 <= ratio <= upper:
            raise ConfigError(f"Corruption ratio {ratio} outside [0, {upper}]; pass allow_any_ratio to override")
    return ratios


def noise_sweep(
    split: SplitDataset,
    model_config: ModelConfig,
    train_config: TrainConfig,
    ratios: Sequence[float] = SWEEP_RATIOS,
    variants: Sequence[str] = SWEEP_VARIANTS,
    seeds: Sequence[int] = (0, 1, 2, 3, 4),
    store: Optional[RunStore] = None,
    allow_any_ratio: bool = False,
    progress_callback: Optional[Callable[[Dict[str, Any]], None]] = None,
    corruption_dir: Optional[str] = None,
) -> List[Dict[str, Any]]:
    """
    Train and evaluate every (variant, ratio, seed) cell.

    Corruption of a cell depends on (seed, ratio) only, so all variants of a
    seed see the same corrupted data.

    Args:
        split: Clean dataset
        model_config: Backbone config
        train_config: Base training config (variant and seed are overridden)
        ratios: Corruption ratios
        variants: Attention variants
        seeds: Seeds; each one drives corruption, initialisation and training
        store: Records finished cells; completed cells are skipped
        allow_any_ratio: Accept ratios above 0.25
        progress_callback: Called with each finished row
        corruption_dir: Directory for one ``user,position,old_item,new_item``
            CSV per (ratio, seed)

    Returns:
        One row per cell with the REPORT_COLUMNS keys; the recovery columns
        are None for fixed variants and uncorrupted data
    """
    ratios = check_ratios(ratios, allow_any_ratio)
    configs = {variant: config_for_variant(train_config, variant) for variant in variants}
    for config in configs.values():
        config.validate()
    if corruption_dir:
        os.makedirs(corruption_dir, exist_ok=True)

    rows = []
    for ratio in ratios:
        for seed in seeds:
            corrupted = None
            noisy_positions: Set[Tuple[str, int]] = set()
            for variant in variants:
                reference_id = cell_id(variant, ratio, seed)
                record = store.get(reference_id) if store is not None else None
                if record is not None and record.get("status") == "complete":
                    logger.warning(f"Skipping completed cell {reference_id}")
                    rows.append({key: record.get(key) for key in REPORT_COLUMNS})
                    continue
                if corrupted is None:
                    rng = np.random.default_rng([int(seed), int(round(ratio * 10000))])
                    corrupted, records = corrupt_training(split, ratio, rng, allow_any_ratio)
                    noisy_positions = {(entry.user, entry.position) for entry in records}
                    if corruption_dir:
                        export_corruption_csv(records, corruption_file(corruption_dir, ratio, int(seed)))
                metrics = train_and_evaluate(corrupted, model_config, replace(configs[variant], seed=int(seed)),
                                             noisy_positions)
                row = {"variant": variant, "ratio": ratio, "seed": int(seed),
                       "recovery_difference": None, "recovery_p": None, **metrics}
                if store is not None:
                    store.add({**row, "status": "complete"}, reference_id=reference_id)
                logger.info(f"Cell {reference_id}: hit10={row['hit10']:.4f} ndcg10={row['ndcg10']:.4f}")
                rows.append(row)
                if progress_callback:
                    progress_callback(row)
    return rows


def summarize(rows: Sequence[Dict[str, Any]], keys: Sequence[str] = ("variant", "ratio")) -> List[Dict[str, Any]]:
    """
    Mean and standard deviation (ddof=1, 0 for a single run) per cell.
    """
    groups: Dict[tuple, List[Dict[str, Any]]] = {}
    for row in rows:
        groups.setdefault(tuple(row[key] for key in keys), []).append(row)
    summary = []
    for group_key, members in groups.items():
        entry = dict(zip(keys, group_key))
        entry["runs"] = len(members)
        for metric in ("hit10", "ndcg10"):
            values = np.array([member[metric] for member in members], dtype=np.float64)
            entry[f"{metric}_mean"] = float(values.mean())
            entry[f"{metric}_std"] = float(values.std(ddof=1)) if len(values) > 1 else 0.0
        summary.append(entry)
    return summary


def write_rows_csv(rows: Sequence[Dict[str, Any]], columns: Sequence[str], path: str) -> str:
    with open(path, "w", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=list(columns), extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
    return path


def sensitivity_sweep(
    split: SplitDataset,
    model_config: ModelConfig,
    train_config: TrainConfig,
    parameter: str,
    values: Sequence[float],
    seeds: Sequence[int] = (0,),
    fixed_other: float = 1e-2,
    store: Optional[RunStore] = None,
) -> List[Dict[str, Any]]:
    """
    Test Hit@10 / NDCG@10 as one hyper-parameter varies.

    Sweeping beta fixes gamma at ``fixed_other`` and vice versa; sweeping
    max_len changes the backbone's sequence length and keeps both weights.

    Args:
        split: Dataset
        model_config: Backbone config
        train_config: Base training config (a denoiser estimator)
        parameter: "beta", "gamma" or "max_len"
        values: Values to try
        seeds: Seeds per value
        fixed_other: Weight of the regularizer that is not swept
        store: Records finished runs

    Returns:
        Rows with parameter, value, seed, hit10, ndcg10
    """
    if parameter not in SENSITIVITY_PARAMETERS:
        raise ConfigError(f"parameter must be one of {SENSITIVITY_PARAMETERS}, got '{parameter}'")
    rows = []
    for value in values:
        for seed in seeds:
            reference_id = f"sensitivity-{parameter}={value:g}-seed={seed}"
            record = store.get(reference_id) if store is not None else None
            if record is not None and record.get("status") == "complete":
                logger.warning(f"Skipping completed run {reference_id}")
                rows.append({key: record[key] for key in ("parameter", "value", "seed", "hit10", "ndcg10")})
                continue
            run_model, run_train = model_config, replace(train_config, seed=int(seed))
            if parameter == "beta":
                run_train = replace(run_train, beta=float(value), gamma=fixed_other)
            elif parameter == "gamma":
                run_train = replace(run_train, gamma=float(value), beta=fixed_other)
            else:
                run_model = replace(model_config, max_len=int(value))
            run_train.validate()
            metrics = train_and_evaluate(split, run_model, run_train)
            row = {"parameter": parameter, "value": value, "seed": int(seed), **metrics}
            if store is not None:
                store.add({**row, "status": "complete"}, reference_id=reference_id)
            logger.info(f"{parameter}={value:g} seed={seed}: hit10={row['hit10']:.4f}")
            rows.append(row)
    return rows
