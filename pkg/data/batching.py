"""
Training batches: shifted next-item targets and one sampled negative per
position.
"""

import logging
from dataclasses import dataclass
from typing import Iterator, List, Optional, Set, Tuple

import numpy as np

from core.exceptions import DataError
from .interactions import SplitDataset, pad_truncate

logger = logging.getLogger(__name__)


@dataclass
class Batch:
    users: List[str]
    inputs: np.ndarray
    targets: np.ndarray
    negatives: np.ndarray
    histories: List[Set[int]]

    def __len__(self) -> int:
        return len(self.users)


def training_example(train_sequence: List[int], n: int) -> Tuple[List[int], List[int]]:
    """Input train[:-1] and target train[1:], both padded to n."""
    return pad_truncate(train_sequence[:-1], n), pad_truncate(train_sequence[1:], n)


def sample_negatives(targets: np.ndarray, history: Set[int], num_items: int, rng: np.random.Generator) -> np.ndarray:
    """
    One uniform negative per non-padding target, outside the user's history.

    Args:
        targets: Target ids, 0 where no negative is needed
        history: Items the user interacted with
        num_items: Number of items |I|
        rng: Generator

    Returns:
        Array shaped like targets, 0 at padding targets

    Raises:
        DataError: If the history covers every item
    """
    targets = np.asarray(targets)
    negatives = np.zeros(targets.shape, dtype=np.int64)
    needed = targets != 0
    if not needed.any():
        return negatives
    excluded = np.array(sorted(item for item in history if 1 <= item <= num_items), dtype=np.int64)
    if len(excluded) >= num_items:
        raise DataError(f"No negative items available: history covers all {num_items} items")
    pending = np.flatnonzero(needed)
    while pending.size:
        draws = rng.integers(1, num_items + 1, size=pending.size)
        accepted = ~np.isin(draws, excluded)
        negatives.flat[pending[accepted]] = draws[accepted]
        pending = pending[~accepted]
    return negatives


def iterate_batches(
    split: SplitDataset,
    n: int,
    batch_size: int,
    rng: np.random.Generator,
    users: Optional[List[str]] = None,
    shuffle: bool = True,
) -> Iterator[Batch]:
    """
    Yield batches of users in a (seeded) shuffled order.

    Args:
        split: Dataset
        n: Sequence length
        batch_size: Users per batch
        rng: Generator for the order and the negatives
        users: Subset of users, defaults to all
        shuffle: Shuffle the user order

    Yields:
        Batch
    """
    if batch_size < 1:
        raise DataError(f"batch_size must be >= 1, got {batch_size}")
    users = list(split.users if users is None else users)
    order = rng.permutation(len(users)) if shuffle else np.arange(len(users))
    for start in range(0, len(users), batch_size):
        chunk = [users[i] for i in order[start:start + batch_size]]
        inputs, targets, negatives, histories = [], [], [], []
        for user in chunk:
            source, target = training_example(split.train[user], n)
            history = split.history(user)
            inputs.append(source)
            targets.append(target)
            negatives.append(sample_negatives(np.array(target), history, split.num_items, rng))
            histories.append(history)
        yield Batch(
            users=chunk,
            inputs=np.array(inputs, dtype=np.int64),
            targets=np.array(targets, dtype=np.int64),
            negatives=np.array(negatives, dtype=np.int64),
            histories=histories,
        )
