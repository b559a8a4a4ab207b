"""
Trainable binary attention masks.

Each transformer block owns an (n, n) matrix of mask logits Phi. Masks are
sampled as Z = I[U < sigmoid(Phi)] with U uniform, the number of retained
links is penalised through its expectation sum(sigmoid(Phi)), and the logits
are learned with the ARM (antithetic, two loss evaluations) or AR (one loss
evaluation) gradient estimators. At evaluation the deterministic mask keeps
sigmoid(Phi) where it exceeds 0.5 and zeroes the rest.

Arrays that are square and 2-D are treated as attention masks: only causal
(v <= u) entries count as gates. Any other shape (e.g. a flat vector in a toy
problem) counts every entry as a gate.
"""

import csv
import itertools
import logging
import os
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import expit

from .exceptions import ConfigError

logger = logging.getLogger(__name__)

MASK_INIT = 2.0
CLIP_THRESHOLD = 0.5
MAX_EXACT_GATES = 20
ESTIMATORS = ("arm", "ar")

MaskLogits = List[np.ndarray]
LossFn = Callable[[List[np.ndarray]], float]


@dataclass
class MaskSample:
    """Uniform draws U and the binary masks Z = I[U < g(Phi)] per block."""

    uniforms: List[np.ndarray]
    masks: List[np.ndarray]


def causal_pairs(n: int) -> int:
    """Number of causal (v <= u) position pairs, n(n+1)/2."""
    return n * (n + 1) // 2


def gate_support(logits: np.ndarray) -> np.ndarray:
    """Boolean array marking which entries are gates."""
    logits = np.asarray(logits)
    if logits.ndim == 2 and logits.shape[0] == logits.shape[1]:
        return np.tril(np.ones(logits.shape, dtype=bool))
    return np.ones(logits.shape, dtype=bool)


def init_mask_logits(num_blocks: int, max_len: int, init: float = MASK_INIT) -> MaskLogits:
    """One (n, n) logit matrix per block, filled with init."""
    return [np.full((max_len, max_len), float(init)) for _ in range(num_blocks)]


def draw_uniforms(logits: Sequence[np.ndarray], rng: np.random.Generator) -> List[np.ndarray]:
    return [rng.random(np.shape(phi)) for phi in logits]


def sample_masks(logits: Sequence[np.ndarray], uniforms: Sequence[np.ndarray]) -> List[np.ndarray]:
    """
    Binary masks Z = I[U < sigmoid(Phi)].

    Args:
        logits: Per-block mask logits
        uniforms: Per-block draws in [0, 1], shaped like the logits

    Returns:
        Per-block float arrays of 0s and 1s
    """
    return [(np.asarray(u) < expit(phi)).astype(np.float64) for phi, u in zip(logits, uniforms)]


def antithetic_masks(logits: Sequence[np.ndarray], uniforms: Sequence[np.ndarray]) -> List[np.ndarray]:
    """Masks I[U > sigmoid(-Phi)] evaluated alongside sample_masks by ARM."""
    return [(np.asarray(u) > expit(-np.asarray(phi))).astype(np.float64) for phi, u in zip(logits, uniforms)]


def l0_surrogate(logits: Sequence[np.ndarray]) -> float:
    """Expected number of retained links: sum of sigmoid(Phi) over gates."""
    return float(sum(np.sum(expit(phi)[gate_support(phi)]) for phi in logits))


def l0_gradient(logits: Sequence[np.ndarray]) -> List[np.ndarray]:
    """Analytic gradient g(1 - g) of the surrogate, zero outside the gates."""
    grads = []
    for phi in logits:
        keep_prob = expit(phi)
        grads.append(np.where(gate_support(phi), keep_prob * (1.0 - keep_prob), 0.0))
    return grads


def ar_combine(
    loss: float,
    logits: Sequence[np.ndarray],
    uniforms: Sequence[np.ndarray],
    beta: float = 0.0,
) -> List[np.ndarray]:
    """
    AR gradient from an already evaluated loss L(I[U < g(Phi)]).

    Returns:
        Per-block L * (1 - 2U) + beta * g'(Phi), zero outside the gates
    """
    surrogate = l0_gradient(logits)
    grads = []
    for phi, u, reg in zip(logits, uniforms, surrogate):
        term = loss * (1.0 - 2.0 * np.asarray(u))
        grads.append(np.where(gate_support(phi), term, 0.0) + beta * reg)
    return grads


def arm_combine(
    anti_loss: float,
    loss: float,
    logits: Sequence[np.ndarray],
    uniforms: Sequence[np.ndarray],
    beta: float = 0.0,
) -> List[np.ndarray]:
    """
    ARM gradient from the antithetic pair of losses.

    Args:
        anti_loss: L(I[U > g(-Phi)])
        loss: L(I[U < g(Phi)])
        logits: Per-block mask logits
        uniforms: The shared draws U
        beta: Sparsity weight

    Returns:
        Per-block (anti_loss - loss) * (U - 1/2) + beta * g'(Phi)
    """
    surrogate = l0_gradient(logits)
    difference = anti_loss - loss
    grads = []
    for phi, u, reg in zip(logits, uniforms, surrogate):
        term = difference * (np.asarray(u) - 0.5)
        grads.append(np.where(gate_support(phi), term, 0.0) + beta * reg)
    return grads


def ar_gradient(
    logits: Sequence[np.ndarray],
    loss_fn: LossFn,
    rng: np.random.Generator,
    beta: float = 0.0,
) -> Tuple[List[np.ndarray], MaskSample]:
    """
    One-sample AR estimate of the mask-logit gradient (one loss evaluation).

    Args:
        logits: Per-block mask logits
        loss_fn: Loss of a list of per-block binary masks
        rng: Generator for U
        beta: Sparsity weight

    Returns:
        Gradient per block and the sample that was evaluated
    """
    uniforms = draw_uniforms(logits, rng)
    masks = sample_masks(logits, uniforms)
    loss = float(loss_fn(masks))
    return ar_combine(loss, logits, uniforms, beta), MaskSample(uniforms, masks)


def arm_gradient(
    logits: Sequence[np.ndarray],
    loss_fn: LossFn,
    rng: np.random.Generator,
    beta: float = 0.0,
) -> Tuple[List[np.ndarray], MaskSample]:
    """
    One antithetic-pair ARM estimate (exactly two loss evaluations).

    Args:
        logits: Per-block mask logits
        loss_fn: Loss of a list of per-block binary masks
        rng: Generator for U
        beta: Sparsity weight

    Returns:
        Gradient per block and the I[U < g(Phi)] sample
    """
    uniforms = draw_uniforms(logits, rng)
    masks = sample_masks(logits, uniforms)
    anti_loss = float(loss_fn(antithetic_masks(logits, uniforms)))
    loss = float(loss_fn(masks))
    return arm_combine(anti_loss, loss, logits, uniforms, beta), MaskSample(uniforms, masks)


def estimator_samples(
    estimator: str,
    logits: np.ndarray,
    batch_loss_fn: Callable[[np.ndarray], np.ndarray],
    num_samples: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """
    Vectorised single-sample gradient draws for a flat vector of gates.

    Args:
        estimator: "arm" or "ar"
        logits: (k,) gate logits
        batch_loss_fn: Maps an (S, k) array of binary states to (S,) losses
        num_samples: Number of independent draws S
        rng: Generator for U

    Returns:
        (S, k) array, one gradient estimate per row (no sparsity term)
    """
    logits = np.asarray(logits, dtype=np.float64).reshape(-1)
    uniforms = rng.random((num_samples, logits.size))
    states = (uniforms < expit(logits)).astype(np.float64)
    losses = np.asarray(batch_loss_fn(states), dtype=np.float64)
    if estimator == "ar":
        return losses[:, None] * (1.0 - 2.0 * uniforms)
    if estimator == "arm":
        anti_states = (uniforms > expit(-logits)).astype(np.float64)
        anti_losses = np.asarray(batch_loss_fn(anti_states), dtype=np.float64)
        return (anti_losses - losses)[:, None] * (uniforms - 0.5)
    raise ConfigError(f"Unknown estimator '{estimator}', expected one of {ESTIMATORS}")


def exact_expected_gradient(logits: np.ndarray, loss_fn: Callable[[np.ndarray], float]) -> np.ndarray:
    """
    Exact gradient of E_{z ~ Bern(g(Phi))}[L(z)] by enumerating all states.

    Uses d/dPhi_i E[L] = sum_z p(z) L(z) (z_i - g_i).

    Args:
        logits: (k,) gate logits, k <= 20
        loss_fn: Loss of one binary state vector

    Returns:
        (k,) gradient

    Raises:
        ConfigError: If there are more than 20 gates
    """
    logits = np.asarray(logits, dtype=np.float64).reshape(-1)
    k = logits.size
    if k > MAX_EXACT_GATES:
        raise ConfigError(f"Exact enumeration refused for {k} gates (limit {MAX_EXACT_GATES})")
    keep_prob = expit(logits)
    gradient = np.zeros(k)
    for bits in itertools.product((0.0, 1.0), repeat=k):
        state = np.array(bits)
        probability = float(np.prod(np.where(state > 0, keep_prob, 1.0 - keep_prob)))
        if probability == 0.0:
            continue
        gradient += probability * float(loss_fn(state)) * (state - keep_prob)
    return gradient


def inference_mask(logits: np.ndarray) -> np.ndarray:
    """Deterministic mask: sigmoid(Phi), with values <= 0.5 set to 0."""
    keep_prob = expit(np.asarray(logits, dtype=np.float64))
    return np.where(keep_prob > CLIP_THRESHOLD, keep_prob, 0.0)


def inference_masks(logits: Sequence[np.ndarray]) -> List[np.ndarray]:
    return [inference_mask(phi) for phi in logits]


def window_mask(n: int, w: int) -> np.ndarray:
    """
    Causal sliding-window mask: 1 iff 0 <= u - v < w.

    Raises:
        ConfigError: If w < 1
    """
    if w < 1:
        raise ConfigError(f"Window size must be >= 1, got {w}")
    offset = np.arange(n)[:, None] - np.arange(n)[None, :]
    return ((offset >= 0) & (offset < w)).astype(np.float64)


def retained_count(masks: Sequence[np.ndarray]) -> int:
    """Number of non-zero gate entries across blocks."""
    return int(sum(np.count_nonzero(np.asarray(m)[gate_support(m)]) for m in masks))


def mask_density(logits: Sequence[np.ndarray]) -> float:
    """Fraction of gates kept by the inference mask."""
    total = sum(int(gate_support(phi).sum()) for phi in logits)
    if total == 0:
        return 0.0
    return retained_count(inference_masks(logits)) / total


def export_masks(logits: Sequence[np.ndarray], directory: str) -> List[str]:
    """
    Write one CSV per block with the keep probability of each causal pair.

    Args:
        logits: Per-block (n, n) mask logits
        directory: Output directory, created when missing

    Returns:
        Paths of the written files (block_0.csv, block_1.csv, ...)
    """
    os.makedirs(directory, exist_ok=True)
    paths = []
    for block, phi in enumerate(logits):
        keep_prob = expit(np.asarray(phi, dtype=np.float64))
        path = os.path.join(directory, f"block_{block}.csv")
        with open(path, "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["u", "v", "keep_prob"])
            for u, v in zip(*np.nonzero(gate_support(phi))):
                writer.writerow([int(u), int(v), repr(float(keep_prob[u, v]))])
        paths.append(path)
    logger.info(f"Exported {len(paths)} mask files to {directory}")
    return paths


class MaskDenoiser:
    """
    Per-block mask logits together with their estimator and sparsity weight.

    The trainer asks for one sample per batch, evaluates the backbone loss
    under it, and hands the loss back to ``gradient``; ARM additionally
    evaluates the antithetic masks through ``anti_loss_fn``.
    """

    def __init__(
        self,
        num_blocks: int,
        max_len: int,
        estimator: str = "arm",
        beta: float = 1e-2,
        init: float = MASK_INIT,
        logits: Optional[MaskLogits] = None,
    ):
        if estimator not in ESTIMATORS:
            raise ConfigError(f"Unknown estimator '{estimator}', expected one of {ESTIMATORS}")
        if beta < 0:
            raise ConfigError(f"beta must be >= 0, got {beta}")
        self.estimator = estimator
        self.beta = beta
        self.logits: MaskLogits = (
            [np.array(phi, dtype=np.float64) for phi in logits]
            if logits is not None
            else init_mask_logits(num_blocks, max_len, init)
        )
        for phi in self.logits:
            if phi.shape != (max_len, max_len) or not np.all(np.isfinite(phi)):
                raise ConfigError(f"Mask logits must be finite ({max_len}, {max_len}) arrays, got {phi.shape}")

    def sample(self, rng: np.random.Generator) -> MaskSample:
        uniforms = draw_uniforms(self.logits, rng)
        return MaskSample(uniforms, sample_masks(self.logits, uniforms))

    def gradient(self, sample: MaskSample, loss: float, anti_loss_fn: Optional[LossFn] = None) -> List[np.ndarray]:
        """
        Estimator gradient for the logits given the loss under ``sample``.

        Args:
            sample: The batch's mask sample
            loss: L_BCE evaluated under sample.masks
            anti_loss_fn: Evaluates the loss under other masks (ARM only)

        Returns:
            Gradient per block
        """
        if self.estimator == "ar":
            return ar_combine(loss, self.logits, sample.uniforms, self.beta)
        if anti_loss_fn is None:
            raise ConfigError("ARM needs a loss function for the antithetic masks")
        anti_loss = float(anti_loss_fn(antithetic_masks(self.logits, sample.uniforms)))
        return arm_combine(anti_loss, loss, self.logits, sample.uniforms, self.beta)

    def loss_evaluations(self) -> int:
        """BCE evaluations one estimator step costs."""
        return 2 if self.estimator == "arm" else 1

    def param_dict(self) -> Dict[str, np.ndarray]:
        return {f"mask{block}": phi for block, phi in enumerate(self.logits)}

    def load_param_dict(self, params: Dict[str, np.ndarray]) -> None:
        self.logits = [np.array(params[f"mask{block}"], dtype=np.float64) for block in range(len(self.logits))]

    def inference_masks(self) -> List[np.ndarray]:
        return inference_masks(self.logits)

    def l0(self) -> float:
        return l0_surrogate(self.logits)

    def density(self) -> float:
        return mask_density(self.logits)
