"""
Base attention-variant interface for recdenoiser.

An attention variant decides which per-block masks multiply the attention
maps: a fresh sample for every training batch, and a deterministic mask at
evaluation. Variants with learnable mask logits also turn the batch loss
into a gradient for those logits.
"""

from abc import ABC, abstractmethod
from typing import Any, Callable, Dict, List, Optional
import inspect
import logging

import numpy as np

from core.denoiser import MaskSample, causal_pairs, retained_count

# Configure logging
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)


class AttentionVariant(ABC):
    """
    Abstract base class for all attention variants.

    Subclasses set ``name`` and ``description`` and implement the two mask
    methods. Returning None from either means unmasked attention.
    """

    name: str = ""
    description: str = ""
    learnable: bool = False

    def __init__(self, num_blocks: int, max_len: int):
        """
        Initialize a variant for a backbone shape.

        Args:
            num_blocks: Number of transformer blocks
            max_len: Sequence length n
        """
        self.num_blocks = num_blocks
        self.max_len = max_len

    @abstractmethod
    def training_masks(self, rng: np.random.Generator) -> Optional[MaskSample]:
        """
        Masks for one training batch.

        Args:
            rng: Generator for stochastic masks

        Returns:
            MaskSample, or None for unmasked attention
        """
        pass

    @abstractmethod
    def evaluation_masks(self) -> Optional[List[np.ndarray]]:
        """Deterministic per-block masks used at evaluation, or None."""
        pass

    def mask_gradient(
        self,
        sample: Optional[MaskSample],
        loss: float,
        anti_loss_fn: Optional[Callable[[List[np.ndarray]], float]] = None,
    ) -> Dict[str, np.ndarray]:
        """Gradient for the mask logits; empty for variants without any."""
        return {}

    def mask_params(self) -> Dict[str, np.ndarray]:
        return {}

    def load_mask_params(self, params: Dict[str, np.ndarray]) -> None:
        pass

    def extra_loss_evaluations(self) -> int:
        """BCE evaluations per step on top of the one that trains the backbone."""
        return 0

    def l0(self) -> float:
        return 0.0

    def density(self) -> float:
        """Fraction of causal links the evaluation mask keeps."""
        masks = self.evaluation_masks()
        if masks is None:
            return 1.0
        return retained_count(masks) / (len(masks) * causal_pairs(self.max_len))

    @classmethod
    def get_schema(cls) -> Dict[str, Any]:
        """
        Describe this variant and its constructor options.

        Returns:
            Dictionary with name, description, learnable flag and options
        """
        return {
            "name": cls.name,
            "description": cls.description,
            "learnable": cls.learnable,
            "parameters": cls._get_parameters_schema(),
        }

    @classmethod
    def _get_parameters_schema(cls) -> Dict[str, Any]:
        signature = inspect.signature(cls.__init__)
        parameters = {}
        for param_name, param in signature.parameters.items():
            if param_name in ("self", "num_blocks", "max_len"):
                continue
            param_type = "string"
            if param.annotation == int:
                param_type = "integer"
            elif param.annotation == float:
                param_type = "number"
            elif param.annotation == bool:
                param_type = "boolean"
            parameters[param_name] = {
                "type": param_type,
                "default": None if param.default == inspect.Parameter.empty else param.default,
            }
        return parameters
