"""
Training-set corruption for noise-robustness experiments.

A fraction of the training positions is overwritten with items drawn
uniformly from those that are nobody's validation or test item. Sequence
lengths, validation and test items are never touched.
"""

import csv
import logging
import math
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from core.exceptions import ConfigError, DataError
from .interactions import SplitDataset

logger = logging.getLogger(__name__)

MAX_RATIO = 0.25


@dataclass(frozen=True)
class CorruptionRecord:
    user: str
    position: int
    old_item: int
    new_item: int


def replacement_pool(split: SplitDataset) -> np.ndarray:
    """Items that are no user's validation or test item."""
    held_out = set(split.valid.values()) | set(split.test.values())
    return np.array([item for item in range(1, split.num_items + 1) if item not in held_out], dtype=np.int64)


def corrupt_training(
    split: SplitDataset,
    ratio: float,
    rng: np.random.Generator,
    allow_any_ratio: bool = False,
) -> Tuple[SplitDataset, List[CorruptionRecord]]:
    """
    Replace floor(ratio * total training items) positions.

    Args:
        split: Clean dataset (not modified)
        ratio: Fraction of training positions to replace
        rng: Generator for positions and replacements
        allow_any_ratio: Accept ratios above 0.25 (up to 1)

    Returns:
        Corrupted copy of the split and the corruption map

    Raises:
        ConfigError: If the ratio is out of range
        DataError: If positions must be replaced but the pool is empty
    """
    upper = 1.0 if allow_any_ratio else MAX_RATIO
    if not 0.0 <= ratio <= upper:
        raise ConfigError(f"Corruption ratio {ratio} outside [0, {upper}]")

    positions = [(user, index) for user in split.users for index in range(len(split.train[user]))]
    count = int(math.floor(ratio * len(positions) + 1e-9))
    train = {user: list(split.train[user]) for user in split.users}
    if count == 0:
        return split.with_train(train), []

    pool = replacement_pool(split)
    if pool.size == 0:
        raise DataError("Replacement pool is empty: every item is a validation or test item")

    chosen = np.sort(rng.choice(len(positions), size=count, replace=False))
    replacements = rng.choice(pool, size=count, replace=True)
    records = []
    for flat_index, new_item in zip(chosen, replacements):
        user, index = positions[flat_index]
        records.append(CorruptionRecord(user, index, train[user][index], int(new_item)))
        train[user][index] = int(new_item)
    logger.info(f"Corrupted {count} of {len(positions)} training positions (ratio={ratio})")
    return split.with_train(train), records


def export_corruption_csv(records: List[CorruptionRecord], path: str) -> str:
    """Write ``user,position,old_item,new_item`` rows."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["user", "position", "old_item", "new_item"])
        for record in records:
            writer.writerow([record.user, record.position, record.old_item, record.new_item])
    return path
