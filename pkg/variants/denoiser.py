"""
Learnable binary masks trained with the ARM or AR estimator.
"""

from typing import Callable, Dict, List, Optional

import numpy as np

from core.denoiser import MASK_INIT, MaskDenoiser, MaskSample
from .base import AttentionVariant


class DenoiserVariant(AttentionVariant):
    """Per-block mask logits sampled each batch and clipped at evaluation."""

    learnable = True
    estimator = "arm"

    def __init__(self, num_blocks: int, max_len: int, beta: float = 1e-2, mask_init: float = MASK_INIT):
        super().__init__(num_blocks, max_len)
        self.denoiser = MaskDenoiser(num_blocks, max_len, estimator=self.estimator, beta=beta, init=mask_init)

    def training_masks(self, rng: np.random.Generator) -> Optional[MaskSample]:
        return self.denoiser.sample(rng)

    def evaluation_masks(self) -> Optional[List[np.ndarray]]:
        return self.denoiser.inference_masks()

    def mask_gradient(
        self,
        sample: Optional[MaskSample],
        loss: float,
        anti_loss_fn: Optional[Callable[[List[np.ndarray]], float]] = None,
    ) -> Dict[str, np.ndarray]:
        grads = self.denoiser.gradient(sample, loss, anti_loss_fn)
        return {f"mask{block}": grad for block, grad in enumerate(grads)}

    def mask_params(self) -> Dict[str, np.ndarray]:
        return self.denoiser.param_dict()

    def load_mask_params(self, params: Dict[str, np.ndarray]) -> None:
        self.denoiser.load_param_dict(params)

    def extra_loss_evaluations(self) -> int:
        return self.denoiser.loss_evaluations() - 1

    def l0(self) -> float:
        return self.denoiser.l0()

    def density(self) -> float:
        return self.denoiser.density()

    @property
    def logits(self) -> List[np.ndarray]:
        return self.denoiser.logits


class ArmDenoiserVariant(DenoiserVariant):
    name = "denoiser-arm"
    description = "Learned masks, antithetic estimator with two loss evaluations per batch"
    estimator = "arm"


class ArDenoiserVariant(DenoiserVariant):
    name = "denoiser-ar"
    description = "Learned masks, single-evaluation estimator"
    estimator = "ar"
