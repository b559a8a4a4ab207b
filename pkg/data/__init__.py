"""
Data module for recdenoiser.

Interaction logs, leave-one-out splits, training batches, corruption and
synthetic planted-noise datasets.
"""

from .interactions import InteractionLog, SplitDataset, load_interactions, split_leave_one_out, pad_truncate
from .batching import Batch, iterate_batches, sample_negatives
from .corruption import CorruptionRecord, corrupt_training
from .synthetic import SyntheticDataset, SyntheticSpec, generate_synthetic

__all__ = [
    'InteractionLog', 'SplitDataset', 'load_interactions', 'split_leave_one_out', 'pad_truncate',
    'Batch', 'iterate_batches', 'sample_negatives',
    'CorruptionRecord', 'corrupt_training',
    'SyntheticDataset', 'SyntheticSpec', 'generate_synthetic',
]
