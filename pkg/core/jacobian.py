"""
Jacobian regularization of transformer blocks.

The squared Frobenius norm of each block's input-output Jacobian is
estimated with Hutchinson probes, E||J eta||^2 = ||J||_F^2, where J eta is
taken by central differences of two ordinary forward passes recorded on
the tape. Gradients of the penalty therefore only need first-order
reverse mode.
"""

import logging
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence

import numpy as np

from .exceptions import ConfigError
from .tensor import GradTape, Tensor

logger = logging.getLogger(__name__)

BlockFn = Callable[[Tensor], Tensor]


def jvp_finite_difference(tape: GradTape, f: BlockFn, x: Tensor, eta: np.ndarray, eps: float = 1e-3) -> Tensor:
    """
    Central-difference Jacobian-vector product (f(x + eps*eta) - f(x - eps*eta)) / (2*eps).

    Args:
        tape: Tape to record on
        f: Deterministic function of a tensor
        x: Point of linearisation (gradients flow through it)
        eta: Probe shaped like x, or with extra leading axes
        eps: Step size

    Returns:
        Tensor shaped like f's output
    """
    if eps <= 0:
        raise ConfigError(f"JVP step must be positive, got {eps}")
    step = tape.constant(eps * np.asarray(eta, dtype=np.float64))
    upper = f(tape.add(x, step))
    lower = f(tape.subtract(x, step))
    return tape.scale(tape.subtract(upper, lower), 1.0 / (2.0 * eps))


def draw_probes(shape: Sequence[int], count: int, rng: np.random.Generator) -> np.ndarray:
    """Standard normal probes stacked on a leading axis: (count, *shape)."""
    if count < 1:
        raise ConfigError(f"Number of probes must be >= 1, got {count}")
    return rng.standard_normal((count,) + tuple(shape))


def hutchinson_frobenius(
    tape: GradTape,
    f: BlockFn,
    x: Tensor,
    probes: np.ndarray,
    eps: float = 1e-3,
) -> Tensor:
    """
    Hutchinson estimate of ||J_f(x)||_F^2: mean over probes of ||J eta||^2.

    All probes run in one stacked forward pass, so f must accept a leading
    probe axis.

    Args:
        tape: Tape to record on
        f: Deterministic block function
        x: Block input
        probes: (P, *x.shape) probe stack
        eps: JVP step size

    Returns:
        Scalar tensor
    """
    probes = np.asarray(probes, dtype=np.float64)
    count = probes.shape[0]
    if probes.shape[1:] != x.shape:
        raise ConfigError(f"Probe shape {probes.shape[1:]} does not match input shape {x.shape}")
    stacked = tape.add(tape.constant(np.zeros(probes.shape)), x)
    product = jvp_finite_difference(tape, f, stacked, probes, eps)
    return tape.scale(tape.squared_norm(product), 1.0 / count)


def explicit_jacobian(f: Callable[[np.ndarray], np.ndarray], x: np.ndarray, eps: float = 1e-6) -> np.ndarray:
    """
    Dense Jacobian built column by column with central differences.

    Returns:
        (out.size, x.size) matrix
    """
    x = np.array(x, dtype=np.float64)
    flat = x.reshape(-1)
    columns = []
    for index in range(flat.size):
        original = flat[index]
        flat[index] = original + eps
        upper = np.asarray(f(x), dtype=np.float64).reshape(-1)
        flat[index] = original - eps
        lower = np.asarray(f(x), dtype=np.float64).reshape(-1)
        flat[index] = original
        columns.append((upper - lower) / (2.0 * eps))
    return np.stack(columns, axis=1)


@dataclass(frozen=True)
class JacobianProbe:
    """Probe settings: JVP step size and projections per block per batch."""

    eps: float = 1e-3
    num_projections: int = 1

    def validate(self) -> "JacobianProbe":
        if self.num_projections < 1:
            raise ConfigError(f"jacobian_probes must be >= 1, got {self.num_projections}")
        if not self.eps > 0:
            raise ConfigError(f"jvp_eps must be positive, got {self.eps}")
        return self


class JacobianRegularizer:
    """
    Sum over blocks of Hutchinson Frobenius estimates, R_J.

    Block functions passed to ``penalty`` must run without dropout and with
    the batch's mask sample held fixed, so R_J regularizes the backbone only.
    """

    def __init__(self, gamma: float = 1e-3, probes: int = 1, eps: float = 1e-3):
        if gamma < 0:
            raise ConfigError(f"gamma must be >= 0, got {gamma}")
        self.gamma = gamma
        self.probe = JacobianProbe(eps=eps, num_projections=probes).validate()
        self.probe_count = 0

    @property
    def probes(self) -> int:
        return self.probe.num_projections

    @property
    def eps(self) -> float:
        return self.probe.eps

    @property
    def active(self) -> bool:
        return self.gamma > 0

    def draw(self, block_inputs: Sequence[Tensor], rng: np.random.Generator) -> List[np.ndarray]:
        return [draw_probes(x.shape, self.probes, rng) for x in block_inputs]

    def penalty(
        self,
        tape: GradTape,
        block_inputs: Sequence[Tensor],
        block_fns: Sequence[BlockFn],
        rng: Optional[np.random.Generator] = None,
        probes: Optional[Sequence[np.ndarray]] = None,
    ) -> Optional[Tensor]:
        """
        Unscaled penalty R_J, or None when gamma is 0.

        Args:
            tape: Tape to record on
            block_inputs: Input representation of each block
            block_fns: Deterministic function of each block
            rng: Generator for fresh probes
            probes: Frozen probes per block, used instead of rng

        Returns:
            Scalar tensor or None
        """
        if not self.active:
            return None
        if probes is None:
            if rng is None:
                raise ConfigError("Jacobian penalty needs probes or a random generator")
            probes = self.draw(block_inputs, rng)
        total = None
        for x, f, eta in zip(block_inputs, block_fns, probes):
            estimate = hutchinson_frobenius(tape, f, x, eta, self.eps)
            self.probe_count += int(np.shape(eta)[0])
            total = estimate if total is None else tape.add(total, estimate)
        return total
