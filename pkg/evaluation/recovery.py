"""
Does a trained mask drop the positions that hold planted noise?

For each block the inference mask's column mean over causal rows gives the
average keep-probability of attending to a position. Training positions are
mapped onto their padded column, and the profile values at noisy and clean
positions are compared with a one-sided rank-sum test.
"""

import logging
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import mannwhitneyu

from core.denoiser import MASK_INIT, gate_support, inference_masks, init_mask_logits
from data.interactions import SplitDataset, slot_of_position

logger = logging.getLogger(__name__)


@dataclass
class RecoveryResult:
    applicable: bool
    difference: Optional[float] = None
    p_value: Optional[float] = None
    clean_mean: Optional[float] = None
    noisy_mean: Optional[float] = None
    clean_count: int = 0
    noisy_count: int = 0


def column_keep_profile(masks: Sequence[np.ndarray]) -> np.ndarray:
    """(n,) keep-probability of each key column, averaged over causal rows and blocks."""
    profiles = []
    for mask in masks:
        support = gate_support(mask)
        totals = np.where(support, mask, 0.0).sum(axis=0)
        profiles.append(totals / support.sum(axis=0))
    return np.mean(profiles, axis=0)


def mask_noise_recovery(
    logits: Sequence[np.ndarray],
    noisy_positions: Iterable[Tuple[str, int]],
    split: SplitDataset,
    max_len: int,
    mask_init: float = MASK_INIT,
) -> RecoveryResult:
    """
    Clean-minus-noisy difference of mean keep-probability.

    Profile values are taken relative to the profile of an untrained mask
    (all logits equal to mask_init), so an untrained mask reports exactly 0.

    Args:
        logits: Trained per-block mask logits
        noisy_positions: (user, training index) pairs holding planted noise
        split: The (noisy) dataset the mask was trained on
        max_len: Sequence length n
        mask_init: Initial logit value

    Returns:
        RecoveryResult; not applicable when no noisy position is visible
    """
    profile = column_keep_profile(inference_masks(logits))
    reference = column_keep_profile(inference_masks(init_mask_logits(len(logits), max_len, mask_init)))
    deviation = profile - reference

    noisy_set = set(noisy_positions)
    clean: List[float] = []
    noisy: List[float] = []
    for user in split.users:
        length = len(split.train[user]) - 1
        for position in range(max(length, 0)):
            slot = slot_of_position(position, length, max_len)
            if slot is None:
                continue
            (noisy if (user, position) in noisy_set else clean).append(float(deviation[slot]))

    if not noisy or not clean:
        return RecoveryResult(applicable=False, clean_count=len(clean), noisy_count=len(noisy))

    clean_mean = float(np.mean(clean))
    noisy_mean = float(np.mean(noisy))
    difference = clean_mean - noisy_mean
    if np.ptp(clean + noisy) == 0.0:
        p_value = 1.0
    else:
        p_value = float(mannwhitneyu(clean, noisy, alternative="greater").pvalue)
    logger.info(f"Mask noise recovery: difference={difference:.4f} p={p_value:.4g} ({len(clean)} clean, {len(noisy)} noisy)")
    return RecoveryResult(True, difference, p_value, clean_mean, noisy_mean, len(clean), len(noisy))
