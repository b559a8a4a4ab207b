"""
Attention variants for recdenoiser.

Every variant decides which masks multiply the attention maps during
training and evaluation: full attention, learned masks (ARM or AR), a fixed
sliding window, or random drops.
"""

from .base import AttentionVariant
from .variant_registry import VariantRegistry, registry

__all__ = ['AttentionVariant', 'VariantRegistry', 'registry']
