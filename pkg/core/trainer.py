"""
Joint training of the backbone and the attention masks.

Each mini-batch draws one mask sample, runs the backbone under it, and
minimises L_BCE + beta * R_M + gamma * R_J: the backbone parameters by
adaptive-moment descent on the tape gradient, the mask logits by the
configured estimator with their own learning rate.
"""

import logging
from dataclasses import asdict, dataclass, fields
from typing import Any, Dict, List, Optional

import numpy as np

from data.batching import Batch, iterate_batches
from data.interactions import SplitDataset
from .exceptions import ConfigError, NumericalError
from .jacobian import JacobianRegularizer
from .model import (
    BCEResult,
    ModelConfig,
    ModelParams,
    bce_loss,
    bind_constants,
    bind_params,
    init_params,
    transformer_block,
)
from .optim import AdamOptimizer
from .tensor import GradTape, Tensor, backward

logger = logging.getLogger(__name__)

ESTIMATOR_CHOICES = ("arm", "ar", "none")
FIXED_VARIANTS = ("full", "window", "random-drop")
SEED_RANGE = 2 ** 62


@dataclass
class TrainConfig:
    """
    Training hyper-parameters.

    ``variant`` selects the attention variant; when empty it follows the
    estimator (arm -> denoiser-arm, ar -> denoiser-ar, none -> full).
    """

    estimator: str = "arm"
    beta: float = 1e-2
    gamma: float = 1e-3
    learning_rate: float = 1e-3
    mask_learning_rate: float = 1e-2
    batch_size: int = 128
    max_epochs: int = 200
    eval_every: int = 5
    patience: int = 20
    seed: int = 42
    jacobian_probes: int = 1
    jvp_eps: float = 1e-3
    mask_init: float = 2.0
    variant: str = ""
    window_size: int = 5
    drop_keep_prob: float = 0.8
    top_n: int = 10
    num_negatives: int = 100
    eval_seed: int = 2022

    def resolved_variant(self) -> str:
        if self.variant:
            return self.variant
        return {"arm": "denoiser-arm", "ar": "denoiser-ar"}.get(self.estimator, "full")

    def validate(self) -> None:
        """
        Check value ranges and flag combinations.

        Raises:
            ConfigError: Naming the offending field
        """
        if self.estimator not in ESTIMATOR_CHOICES:
            raise ConfigError(f"estimator must be one of {ESTIMATOR_CHOICES}, got '{self.estimator}'")
        if self.beta < 0 or self.gamma < 0:
            raise ConfigError(f"beta and gamma must be >= 0, got beta={self.beta}, gamma={self.gamma}")
        variant = self.resolved_variant()
        if self.estimator == "none" and self.beta > 0:
            raise ConfigError(f"estimator=none trains no masks, so beta must be 0 (got {self.beta})")
        if variant in FIXED_VARIANTS and self.estimator != "none":
            raise ConfigError(f"variant '{variant}' has no mask logits; use estimator=none")
        if variant.startswith("denoiser-") and variant != f"denoiser-{self.estimator}":
            raise ConfigError(f"variant '{variant}' does not match estimator '{self.estimator}'")
        if self.learning_rate <= 0 or self.mask_learning_rate <= 0:
            raise ConfigError("learning_rate and mask_learning_rate must be positive")
        for name in ("batch_size", "max_epochs", "eval_every", "patience", "jacobian_probes", "top_n", "num_negatives"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.jvp_eps <= 0:
            raise ConfigError(f"jvp_eps must be positive, got {self.jvp_eps}")
        if not np.isfinite(self.mask_init):
            raise ConfigError(f"mask_init must be finite, got {self.mask_init}")

    @property
    def is_backbone(self) -> bool:
        """True when the run is the plain backbone (no masks, no regularizers)."""
        return self.resolved_variant() == "full" and self.beta == 0 and self.gamma == 0

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"Unknown train config fields: {sorted(unknown)}")
        return cls(**data)


@dataclass
class JointLoss:
    """Joint objective on the tape and its parts as floats."""

    total: Tensor
    bce: float
    decay: float
    l0: float
    jacobian: float
    bce_result: BCEResult


@dataclass
class EpochMetrics:
    epoch: int
    loss: float
    bce: float
    l0: float
    jacobian: float
    mask_density: float
    batches: int


def joint_loss(
    tape: GradTape,
    bound: Dict[str, Tensor],
    batch: Batch,
    config: ModelConfig,
    masks: Optional[List[np.ndarray]] = None,
    beta: float = 0.0,
    l0: float = 0.0,
    regularizer: Optional[JacobianRegularizer] = None,
    probes: Optional[List[np.ndarray]] = None,
    probe_rng: Optional[np.random.Generator] = None,
    training: bool = False,
    rng: Optional[np.random.Generator] = None,
) -> JointLoss:
    """
    L_BCE + beta * l0 + gamma * R_J for one batch under fixed masks.

    The surrogate value l0 depends on the mask logits only and enters as a
    constant. R_J is skipped when the regularizer is missing or gamma is 0.

    Args:
        tape: Tape to record on
        bound: Backbone parameters bound on the tape
        batch: Mini-batch
        config: Backbone config
        masks: Per-block masks (None for unmasked attention)
        beta: Sparsity weight
        l0: Current surrogate value sum(sigmoid(Phi))
        regularizer: Jacobian regularizer
        probes: Frozen Hutchinson probes per block
        probe_rng: Generator for fresh probes
        training: Enables dropout in the BCE pass
        rng: Generator for dropout

    Returns:
        JointLoss
    """
    bce = bce_loss(tape, bound, batch.inputs, batch.targets, batch.negatives, config, masks, training, rng)
    total = bce.total
    jacobian = 0.0
    if regularizer is not None and regularizer.active:
        forward = bce.forward

        def block_fn(block: int):
            mask = masks[block] if masks is not None else None
            return lambda x: transformer_block(
                tape, x, block, bound, config, forward.keep, forward.nonpad, mask, training=False
            )[0]

        penalty = regularizer.penalty(
            tape, forward.block_inputs, [block_fn(b) for b in range(config.num_blocks)], probe_rng, probes
        )
        jacobian = penalty.item()
        total = tape.add(total, tape.scale(penalty, regularizer.gamma))
    if beta * l0 != 0.0:
        total = tape.add(total, tape.constant(beta * l0))
    return JointLoss(total, bce.data_term.item(), bce.decay, l0, jacobian, bce)


class Trainer:
    """
    Owns the backbone parameters, the attention variant and both optimizers.

    Random streams are derived from the seed per epoch, so any epoch can be
    replayed from a checkpoint of the state before it:
    data order and negatives use default_rng([seed, epoch, 0]); mask samples,
    dropout seeds and probes use default_rng([seed, epoch, 1]).
    """

    def __init__(
        self,
        model_config: ModelConfig,
        train_config: TrainConfig,
        split: SplitDataset,
        variant: Optional[Any] = None,
        params: Optional[ModelParams] = None,
    ):
        """
        Initialize a trainer.

        Args:
            model_config: Backbone config
            train_config: Training config
            split: Training data
            variant: Attention variant; built from the registry when None
            params: Initial parameters; drawn from the seed when None
        """
        model_config.validate()
        train_config.validate()
        self.model_config = model_config
        self.train_config = train_config
        self.split = split
        if variant is None:
            from variants import registry
            variant = registry.create(
                train_config.resolved_variant(),
                model_config.num_blocks,
                model_config.max_len,
                beta=train_config.beta,
                mask_init=train_config.mask_init,
                window_size=train_config.window_size,
                drop_keep_prob=train_config.drop_keep_prob,
            )
        self.variant = variant
        self.params = params if params is not None else init_params(model_config, np.random.default_rng(train_config.seed))
        self.optimizer = AdamOptimizer(lr=train_config.learning_rate)
        self.mask_optimizer = AdamOptimizer(lr=train_config.mask_learning_rate)
        self.regularizer = JacobianRegularizer(train_config.gamma, train_config.jacobian_probes, train_config.jvp_eps)
        self.bce_evaluations = 0
        self.steps = 0
        logger.info(f"Training variant '{variant.name}' with {1 + variant.extra_loss_evaluations()} loss evaluation(s) per step")

    def _anti_loss_fn(self, batch: Batch, dropout_seed: int):
        def evaluate(masks: List[np.ndarray]) -> float:
            tape = GradTape(record=False)
            bound = bind_constants(tape, self.params)
            rng = np.random.default_rng(dropout_seed)
            result = bce_loss(tape, bound, batch.inputs, batch.targets, batch.negatives, self.model_config, masks, True, rng)
            self.bce_evaluations += 1
            return result.data_term.item()
        return evaluate

    def train_step(self, batch: Batch, step_rng: np.random.Generator, epoch: int = 0) -> JointLoss:
        """
        One joint update on a mini-batch.

        Args:
            batch: Mini-batch
            step_rng: Generator for the mask sample, dropout and probes
            epoch: Current epoch, for diagnostics

        Returns:
            The joint loss evaluated before the update

        Raises:
            NumericalError: If the loss is not finite
        """
        sample = self.variant.training_masks(step_rng)
        masks = sample.masks if sample is not None else None
        dropout_seed = int(step_rng.integers(SEED_RANGE))

        tape = GradTape()
        bound = bind_params(tape, self.params)
        loss = joint_loss(
            tape,
            bound,
            batch,
            self.model_config,
            masks,
            beta=self.train_config.beta if self.variant.learnable else 0.0,
            l0=self.variant.l0(),
            regularizer=self.regularizer,
            probe_rng=step_rng,
            training=True,
            rng=np.random.default_rng(dropout_seed),
        )
        self.bce_evaluations += 1

        value = loss.total.item()
        if not np.isfinite(value):
            diagnostics = {
                "epoch": epoch,
                "step": self.steps,
                "users": list(batch.users),
                "loss": value,
                "bce": loss.bce,
                "decay": loss.decay,
                "l0": loss.l0,
                "jacobian": loss.jacobian,
            }
            logger.error(f"Non-finite loss at epoch {epoch}, step {self.steps}: {diagnostics}")
            raise NumericalError(f"Non-finite loss {value} at epoch {epoch}, step {self.steps}", diagnostics)

        grads = backward(tape, loss.total)
        if self.variant.learnable:
            anti_loss_fn = self._anti_loss_fn(batch, dropout_seed) if self.variant.extra_loss_evaluations() else None
            mask_grads = self.variant.mask_gradient(sample, loss.bce, anti_loss_fn)
            mask_params = self.variant.mask_params()
            self.mask_optimizer.step(mask_params, mask_grads)
            self.variant.load_mask_params(mask_params)
        self.optimizer.step(self.params, grads)
        self.steps += 1
        return loss

    def train_epoch(self, epoch: int) -> EpochMetrics:
        """
        One pass over all users.

        Args:
            epoch: Epoch number (1-based); selects the random streams

        Returns:
            Mean loss parts over the epoch's batches
        """
        seed = self.train_config.seed
        data_rng = np.random.default_rng([seed, epoch, 0])
        step_rng = np.random.default_rng([seed, epoch, 1])
        totals = {"loss": 0.0, "bce": 0.0, "l0": 0.0, "jacobian": 0.0}
        batches = 0
        for batch in iterate_batches(self.split, self.model_config.max_len, self.train_config.batch_size, data_rng):
            loss = self.train_step(batch, step_rng, epoch)
            totals["loss"] += loss.total.item()
            totals["bce"] += loss.bce
            totals["l0"] += loss.l0
            totals["jacobian"] += loss.jacobian
            batches += 1
        scale = 1.0 / max(batches, 1)
        return EpochMetrics(
            epoch=epoch,
            loss=totals["loss"] * scale,
            bce=totals["bce"] * scale,
            l0=totals["l0"] * scale,
            jacobian=totals["jacobian"] * scale,
            mask_density=self.variant.density(),
            batches=batches,
        )

    def evaluation_masks(self) -> Optional[List[np.ndarray]]:
        return self.variant.evaluation_masks()

    def state_dict(self) -> Dict[str, Any]:
        return {
            "optimizer": self.optimizer.state_dict(),
            "mask_optimizer": self.mask_optimizer.state_dict(),
            "steps": self.steps,
            "bce_evaluations": self.bce_evaluations,
        }

    def load_state_dict(self, state: Dict[str, Any]) -> None:
        self.optimizer.load_state_dict(state.get("optimizer"))
        self.mask_optimizer.load_state_dict(state.get("mask_optimizer"))
        self.steps = int(state.get("steps", 0))
        self.bce_evaluations = int(state.get("bce_evaluations", 0))
