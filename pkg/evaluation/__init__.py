"""
Evaluation module for recdenoiser: ranking metrics, sampled-negative
evaluation, mask noise recovery and experiment sweeps.
"""

from .metrics import hit_at_n, mean_relative_improvement, ndcg_at_n, relative_improvement
from .ranking import EvalReport, evaluate, rank_candidates
from .recovery import RecoveryResult, mask_noise_recovery

__all__ = [
    'hit_at_n', 'ndcg_at_n', 'relative_improvement', 'mean_relative_improvement',
    'EvalReport', 'evaluate', 'rank_candidates',
    'RecoveryResult', 'mask_noise_recovery',
]
