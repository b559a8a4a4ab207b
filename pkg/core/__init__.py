"""
Core module for recdenoiser.

Tensors and gradients, the sequential recommendation backbone, trainable
attention masks, Jacobian regularization and the joint trainer.
"""

from .exceptions import (
    CheckpointError,
    ConfigError,
    DataError,
    NumericalError,
    RecDenoiserError,
    ShapeError,
)
from .tensor import GradTape, Tensor, backward

__all__ = [
    'CheckpointError', 'ConfigError', 'DataError', 'NumericalError', 'RecDenoiserError', 'ShapeError',
    'GradTape', 'Tensor', 'backward',
]
