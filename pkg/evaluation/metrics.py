"""
Top-N ranking metrics.
"""

from typing import Iterable, Tuple

import numpy as np


def hit_at_n(rank: int, n: int = 10) -> int:
    """1 if the ground truth is ranked within the top n, else 0."""
    if rank < 1 or n < 1:
        raise ValueError(f"rank and n must be >= 1, got rank={rank}, n={n}")
    return int(rank <= n)


def ndcg_at_n(rank: int, n: int = 10) -> float:
    """1 / log2(rank + 1) within the top n, else 0 (one relevant item)."""
    if rank < 1 or n < 1:
        raise ValueError(f"rank and n must be >= 1, got rank={rank}, n={n}")
    return float(1.0 / np.log2(rank + 1)) if rank <= n else 0.0


def relative_improvement(model: float, baseline: float) -> float:
    """Percentage improvement 100 * (model - baseline) / baseline."""
    if baseline <= 0:
        raise ValueError(f"Baseline must be positive, got {baseline}")
    return 100.0 * (model - baseline) / baseline


def mean_relative_improvement(pairs: Iterable[Tuple[float, float]]) -> float:
    """Average of relative_improvement over (model, baseline) pairs."""
    values = [relative_improvement(model, baseline) for model, baseline in pairs]
    if not values:
        raise ValueError("No (model, baseline) pairs given")
    return float(np.mean(values))
