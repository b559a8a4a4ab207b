"""
Synthetic interaction logs with planted noise.

Users belong to hidden clusters. Each cluster has its own pool of items
(pools overlap) and a sparse Markov chain over the pool: every item has a
few successors with Dirichlet-drawn probabilities. Clean sequences walk the
chain; afterwards a fraction of positions is overwritten with uniformly
random items and the overwritten positions are returned as ground truth.
"""

import csv
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Set, Tuple

import numpy as np

from core.exceptions import ConfigError
from .interactions import InteractionLog

logger = logging.getLogger(__name__)

NOISE_PROFILES = ("age", "uniform")


@dataclass
class SyntheticSpec:
    """
    Parameters of the synthetic generator.

    noise_profile "age" makes older positions more likely to be overwritten
    (weight proportional to distance from the end of the sequence), so noise
    has a positional signature; "uniform" picks positions uniformly. The
    last ``protected_tail`` positions of each user are never overwritten,
    which keeps validation and test items clean.
    """

    num_users: int = 200
    num_items: int = 100
    min_length: int = 10
    max_length: int = 30
    noise_ratio: float = 0.0
    seed: int = 0
    num_clusters: int = 4
    successors: int = 3
    concentration: float = 1.0
    noise_profile: str = "age"
    protected_tail: int = 2

    def validate(self) -> None:
        if self.num_users < 1 or self.num_items < 2:
            raise ConfigError(f"Need at least 1 user and 2 items, got {self.num_users} and {self.num_items}")
        if not 3 <= self.min_length <= self.max_length:
            raise ConfigError(f"Sequence lengths must satisfy 3 <= min_length <= max_length, got {self.min_length}, {self.max_length}")
        if not 0.0 <= self.noise_ratio <= 0.5:
            raise ConfigError(f"noise_ratio must lie in [0, 0.5], got {self.noise_ratio}")
        if self.num_clusters < 1 or self.successors < 1:
            raise ConfigError("num_clusters and successors must be >= 1")
        if self.concentration <= 0:
            raise ConfigError(f"concentration must be positive, got {self.concentration}")
        if self.noise_profile not in NOISE_PROFILES:
            raise ConfigError(f"Unknown noise_profile '{self.noise_profile}', expected one of {NOISE_PROFILES}")
        if self.protected_tail < 0:
            raise ConfigError(f"protected_tail must be >= 0, got {self.protected_tail}")


@dataclass
class SyntheticDataset:
    """
    Generated log plus ground truth.

    Attributes:
        log: Interaction log; item "i{k}" has internal id k
        noisy_positions: (user, index) pairs overwritten with noise
        user_clusters: Hidden cluster of each user
        successor_ids: (C, |I|+1, k) successor items per cluster and item
        successor_probs: (C, |I|+1, k) matching transition probabilities
    """

    log: InteractionLog
    noisy_positions: Set[Tuple[str, int]]
    user_clusters: Dict[str, int]
    successor_ids: np.ndarray
    successor_probs: np.ndarray
    pools: List[np.ndarray] = field(default_factory=list)

    def transition_matrix(self, cluster: int) -> np.ndarray:
        """Dense (|I|+1, |I|+1) transition matrix of one cluster."""
        size = self.successor_ids.shape[1]
        matrix = np.zeros((size, size))
        for item in self.pools[cluster]:
            np.add.at(matrix[item], self.successor_ids[cluster, item], self.successor_probs[cluster, item])
        return matrix


def _cluster_pools(spec: SyntheticSpec, rng: np.random.Generator) -> List[np.ndarray]:
    pool_size = min(spec.num_items, max(spec.successors + 1, int(math.ceil(2 * spec.num_items / spec.num_clusters))))
    return [np.sort(rng.choice(np.arange(1, spec.num_items + 1), size=pool_size, replace=False)) for _ in range(spec.num_clusters)]


def generate_synthetic(spec: SyntheticSpec) -> SyntheticDataset:
    """
    Generate a reproducible synthetic dataset.

    Args:
        spec: Generator parameters

    Returns:
        SyntheticDataset; the same spec always yields identical output
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    pools = _cluster_pools(spec, rng)
    k = min(spec.successors, min(len(pool) for pool in pools))

    successor_ids = np.zeros((spec.num_clusters, spec.num_items + 1, k), dtype=np.int64)
    successor_probs = np.zeros((spec.num_clusters, spec.num_items + 1, k))
    for cluster, pool in enumerate(pools):
        for item in pool:
            successor_ids[cluster, item] = rng.choice(pool, size=k, replace=False)
            successor_probs[cluster, item] = rng.dirichlet(np.full(k, spec.concentration))

    sequences: Dict[str, List[int]] = {}
    user_clusters: Dict[str, int] = {}
    for index in range(spec.num_users):
        user = f"u{index}"
        cluster = int(rng.integers(spec.num_clusters))
        length = int(rng.integers(spec.min_length, spec.max_length + 1))
        current = int(rng.choice(pools[cluster]))
        sequence = [current]
        for _ in range(length - 1):
            step = rng.choice(k, p=successor_probs[cluster, current])
            current = int(successor_ids[cluster, current, step])
            sequence.append(current)
        sequences[user] = sequence
        user_clusters[user] = cluster

    noisy_positions: Set[Tuple[str, int]] = set()
    eligible: List[Tuple[str, int]] = []
    weights: List[float] = []
    for user, sequence in sequences.items():
        last = len(sequence) - spec.protected_tail
        for position in range(last):
            eligible.append((user, position))
            weights.append(float(last - position) if spec.noise_profile == "age" else 1.0)
    count = int(math.floor(spec.noise_ratio * len(eligible) + 1e-9))
    if count:
        probabilities = np.asarray(weights) / np.sum(weights)
        chosen = rng.choice(len(eligible), size=count, replace=False, p=probabilities)
        for flat_index in np.sort(chosen):
            user, position = eligible[flat_index]
            sequences[user][position] = int(rng.integers(1, spec.num_items + 1))
            noisy_positions.add((user, position))

    item_map = {f"i{item}": item for item in range(1, spec.num_items + 1)}
    log = InteractionLog(sequences=sequences, item_map=item_map)
    logger.info(f"Generated {log.num_users} synthetic users, {log.num_interactions} interactions, {len(noisy_positions)} noisy positions")
    return SyntheticDataset(log, noisy_positions, user_clusters, successor_ids, successor_probs, pools)


def write_noise_positions(dataset: SyntheticDataset, path: str) -> str:
    """Write ``user,position`` rows for the planted-noise positions."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["user", "position"])
        for user, position in sorted(dataset.noisy_positions, key=lambda up: (int(up[0][1:]), up[1])):
            writer.writerow([user, position])
    return path
