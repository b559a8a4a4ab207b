"""
Attention variants without learnable parameters.
"""

from typing import List, Optional

import numpy as np

from core.denoiser import MaskSample, window_mask
from core.exceptions import ConfigError
from .base import AttentionVariant


class FullAttention(AttentionVariant):
    name = "full"
    description = "Unmasked causal attention (the backbone)"

    def training_masks(self, rng: np.random.Generator) -> Optional[MaskSample]:
        return None

    def evaluation_masks(self) -> Optional[List[np.ndarray]]:
        return None


class WindowAttention(AttentionVariant):
    name = "window"
    description = "Fixed causal sliding window of the most recent positions"

    def __init__(self, num_blocks: int, max_len: int, window_size: int = 5):
        super().__init__(num_blocks, max_len)
        self.window_size = window_size
        self.mask = window_mask(max_len, window_size)

    def training_masks(self, rng: np.random.Generator) -> Optional[MaskSample]:
        masks = [self.mask] * self.num_blocks
        return MaskSample(uniforms=[], masks=masks)

    def evaluation_masks(self) -> Optional[List[np.ndarray]]:
        return [self.mask] * self.num_blocks


class RandomDropAttention(AttentionVariant):
    """
    Each link kept with a fixed probability per batch, the expectation at
    evaluation; a structured dropout on attention.
    """

    name = "random-drop"
    description = "Random binary masks with a fixed keep probability"

    def __init__(self, num_blocks: int, max_len: int, drop_keep_prob: float = 0.8):
        super().__init__(num_blocks, max_len)
        if not 0.0 < drop_keep_prob <= 1.0:
            raise ConfigError(f"drop_keep_prob must lie in (0, 1], got {drop_keep_prob}")
        self.keep_prob = drop_keep_prob

    def training_masks(self, rng: np.random.Generator) -> Optional[MaskSample]:
        uniforms = [rng.random((self.max_len, self.max_len)) for _ in range(self.num_blocks)]
        masks = [(u < self.keep_prob).astype(np.float64) for u in uniforms]
        return MaskSample(uniforms, masks)

    def evaluation_masks(self) -> Optional[List[np.ndarray]]:
        return [np.full((self.max_len, self.max_len), self.keep_prob) for _ in range(self.num_blocks)]
