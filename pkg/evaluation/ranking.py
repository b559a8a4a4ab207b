"""
Sampled-negative ranking evaluation.

Each user's ground-truth item is ranked against 100 negatives drawn
uniformly from items outside the user's full history. Negatives are seeded
per (eval seed, user index), so a dataset and a seed always produce the same
candidates. Ties are broken pessimistically: the ground truth goes after
every negative with an equal score.
"""

import csv
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Set

import numpy as np

from core.exceptions import DataError
from core.model import ModelConfig, ModelParams, sequence_representations
from data.interactions import SplitDataset, user_sequences
from .metrics import hit_at_n, ndcg_at_n

logger = logging.getLogger(__name__)


@dataclass
class EvalReport:
    """
    Mean Hit@N and NDCG@N over users, plus per-user ranks.
    """

    hit: float
    ndcg: float
    top_n: int
    num_negatives: int
    seed: int
    stage: str
    ranks: Dict[str, int] = field(default_factory=dict)

    def as_row(self) -> Dict[str, float]:
        return {f"hit{self.top_n}": self.hit, f"ndcg{self.top_n}": self.ndcg}


def rank_candidates(
    f_t: np.ndarray,
    ground_truth: int,
    negatives: Sequence[int],
    params: ModelParams,
    history: Optional[Set[int]] = None,
) -> int:
    """
    1-based rank of the ground truth among itself and the negatives.

    Args:
        f_t: User state (d,)
        ground_truth: Target item id
        negatives: Negative item ids
        params: Backbone parameters (for the item table)
        history: When given, negatives must not belong to it

    Returns:
        1 + number of negatives scoring at least as high as the ground truth

    Raises:
        DataError: If a negative belongs to the history
    """
    negatives = np.asarray(negatives, dtype=np.int64)
    if history is not None:
        overlap = set(negatives.tolist()) & set(history)
        if overlap:
            raise DataError(f"Evaluation negatives {sorted(overlap)} belong to the user's history")
    table = params["item_table"]
    truth_score = float(table[ground_truth] @ f_t)
    negative_scores = table[negatives] @ f_t
    return 1 + int(np.count_nonzero(negative_scores >= truth_score))


def evaluation_negatives(history: Set[int], num_items: int, num_negatives: int, seed: int, user_index: int) -> np.ndarray:
    """Negatives without replacement from items outside history, seeded per user."""
    candidates = np.setdiff1d(np.arange(1, num_items + 1), np.array(sorted(history), dtype=np.int64))
    if candidates.size < num_negatives:
        raise DataError(f"Only {candidates.size} items outside the history, {num_negatives} negatives requested")
    rng = np.random.default_rng([seed, user_index])
    return rng.choice(candidates, size=num_negatives, replace=False)


def evaluate(
    params: ModelParams,
    config: ModelConfig,
    split: SplitDataset,
    stage: str = "test",
    masks: Optional[List[np.ndarray]] = None,
    top_n: int = 10,
    num_negatives: int = 100,
    seed: int = 2022,
    users: Optional[List[str]] = None,
    batch_size: int = 256,
) -> EvalReport:
    """
    Evaluate a model on the validation or test items.

    Args:
        params: Backbone parameters
        config: Backbone config
        split: Dataset
        stage: "valid" or "test"
        masks: Evaluation masks per block, None for full attention
        top_n: N of Hit@N / NDCG@N
        num_negatives: Negatives per user
        seed: Negative-sampling seed
        users: Subset of users, defaults to all
        batch_size: Users per forward pass

    Returns:
        EvalReport
    """
    users = list(split.users if users is None else users)
    index_of = {user: index for index, user in enumerate(split.users)}
    ranks: Dict[str, int] = {}
    for start in range(0, len(users), batch_size):
        chunk = users[start:start + batch_size]
        inputs, truths = user_sequences(split, chunk, config.max_len, stage)
        states = sequence_representations(params, np.array(inputs, dtype=np.int64), config, masks)
        for user, state, truth in zip(chunk, states, truths):
            history = split.history(user)
            negatives = evaluation_negatives(history, split.num_items, num_negatives, seed, index_of[user])
            ranks[user] = rank_candidates(state, truth, negatives, params)

    if not ranks:
        return EvalReport(0.0, 0.0, top_n, num_negatives, seed, stage, ranks)
    hit = float(np.mean([hit_at_n(rank, top_n) for rank in ranks.values()]))
    ndcg = float(np.mean([ndcg_at_n(rank, top_n) for rank in ranks.values()]))
    return EvalReport(hit, ndcg, top_n, num_negatives, seed, stage, ranks)


def write_report_csv(report: EvalReport, path: str) -> str:
    """Write per-user ranks and metrics, then a mean row."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["user", "rank", f"hit{report.top_n}", f"ndcg{report.top_n}"])
        for user, rank in report.ranks.items():
            writer.writerow([user, rank, hit_at_n(rank, report.top_n), repr(ndcg_at_n(rank, report.top_n))])
        writer.writerow(["mean", "", repr(report.hit), repr(report.ndcg)])
    return path
