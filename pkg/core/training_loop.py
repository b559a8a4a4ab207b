"""
Epoch loop for recdenoiser training.

Runs epochs until the epoch budget is used up or validation NDCG@10 has not
improved for ``patience`` evaluations, writes one log row per evaluation,
checkpoints after each evaluation, and restores the best parameters at
the end.
"""

import csv
import logging
import os
from typing import Any, Callable, Dict, List, Optional

import numpy as np

from data.interactions import SplitDataset
from evaluation.ranking import evaluate
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .exceptions import NumericalError
from .model import ModelConfig
from .trainer import EpochMetrics, Trainer

logger = logging.getLogger(__name__)

LOG_COLUMNS = ["epoch", "loss", "bce", "l0", "jacobian", "val_hit10", "val_ndcg10", "mask_density"]


def _copy(arrays: Dict[str, np.ndarray]) -> Dict[str, np.ndarray]:
    return {name: np.array(array) for name, array in arrays.items()}


class TrainingLoop:
    """
    Drives a Trainer through epochs with validation and early stopping.
    """

    def __init__(
        self,
        trainer: Trainer,
        log_path: Optional[str] = None,
        checkpoint_path: Optional[str] = None,
        status_callback: Optional[Callable[[Dict[str, Any]], None]] = None,
        data_info: Optional[Dict[str, Any]] = None,
    ):
        """
        Initialize the loop.

        Args:
            trainer: Trainer to drive
            log_path: CSV log, one row per evaluation
            checkpoint_path: Checkpoint written after each evaluation
            status_callback: Called with a status dict after each evaluation
            data_info: Dataset description stored in checkpoints
        """
        self.trainer = trainer
        self.log_path = log_path
        self.checkpoint_path = checkpoint_path
        self.status_callback = status_callback
        self.data_info = data_info or {}

        self.status = "idle"
        self.epoch = 0
        self.best_ndcg = -1.0
        self.best_epoch = 0
        self.bad_evaluations = 0
        self.best_params: Optional[Dict[str, np.ndarray]] = None
        self.best_mask_params: Optional[Dict[str, np.ndarray]] = None
        self.history: List[Dict[str, float]] = []

    def start(self) -> Dict[str, Any]:
        """
        Train until the budget is spent or early stopping triggers.

        Returns:
            Summary with status, epochs run, best epoch and last log row

        Raises:
            NumericalError: If a step produces a non-finite loss
        """
        config = self.trainer.train_config
        self.status = "training"
        logger.info(f"Starting training at epoch {self.epoch + 1} of {config.max_epochs} ({config.resolved_variant()})")
        while self.should_continue():
            epoch = self.epoch + 1
            try:
                metrics = self.execute_epoch(epoch)
            except NumericalError as e:
                self.handle_error(e)
                raise
            self.epoch = epoch
            if epoch % config.eval_every == 0 or epoch == config.max_epochs:
                self.execute_validation(metrics)

        if self.status == "training":
            self.status = "completed"
        self.save()
        if self.best_params is not None:
            self.trainer.params = _copy(self.best_params)
            if self.best_mask_params:
                self.trainer.variant.load_mask_params(_copy(self.best_mask_params))

        final_status = {
            "status": self.status,
            "epochs": self.epoch,
            "best_epoch": self.best_epoch,
            "best_val_ndcg10": self.best_ndcg,
            "last": self.history[-1] if self.history else None,
        }
        if self.status_callback:
            self.status_callback(final_status)
        return final_status

    def execute_epoch(self, epoch: int) -> EpochMetrics:
        return self.trainer.train_epoch(epoch)

    def execute_validation(self, metrics: EpochMetrics) -> Dict[str, float]:
        """
        Evaluate on the validation items, log, track the best epoch, checkpoint.

        Returns:
            The log row
        """
        trainer = self.trainer
        config = trainer.train_config
        report = evaluate(
            trainer.params,
            trainer.model_config,
            trainer.split,
            stage="valid",
            masks=trainer.evaluation_masks(),
            top_n=config.top_n,
            num_negatives=config.num_negatives,
            seed=config.eval_seed,
        )
        row = {
            "epoch": metrics.epoch,
            "loss": metrics.loss,
            "bce": metrics.bce,
            "l0": metrics.l0,
            "jacobian": metrics.jacobian,
            "val_hit10": report.hit,
            "val_ndcg10": report.ndcg,
            "mask_density": metrics.mask_density,
        }
        self.history.append(row)
        self.write_log_row(row)
        logger.info(
            f"Epoch {metrics.epoch}: loss={metrics.loss:.4f} bce={metrics.bce:.4f} l0={metrics.l0:.2f} "
            f"jacobian={metrics.jacobian:.4f} val_hit10={report.hit:.4f} val_ndcg10={report.ndcg:.4f} "
            f"mask_density={metrics.mask_density:.3f}"
        )

        if report.ndcg > self.best_ndcg:
            self.best_ndcg = report.ndcg
            self.best_epoch = metrics.epoch
            self.bad_evaluations = 0
            self.best_params = _copy(trainer.params)
            self.best_mask_params = _copy(trainer.variant.mask_params())
        else:
            self.bad_evaluations += 1
            if self.bad_evaluations >= config.patience:
                self.status = "early_stopped"
                logger.warning(f"Early stopping at epoch {metrics.epoch}; best epoch {self.best_epoch}")

        self.save()
        if self.status_callback:
            self.status_callback({"status": self.status, "epoch": metrics.epoch, "row": row})
        return row

    def handle_error(self, error: NumericalError) -> None:
        self.status = "failed"
        logger.error(f"Training failed: {str(error)}")
        if self.status_callback:
            self.status_callback({"status": "failed", "epoch": self.epoch + 1, "diagnostics": error.diagnostics})

    def should_continue(self) -> bool:
        return self.status == "training" and self.epoch < self.trainer.train_config.max_epochs

    def write_log_row(self, row: Dict[str, float]) -> None:
        if not self.log_path:
            return
        new_file = not os.path.exists(self.log_path) or os.path.getsize(self.log_path) == 0
        with open(self.log_path, "a", newline="") as handle:
            writer = csv.DictWriter(handle, fieldnames=LOG_COLUMNS)
            if new_file:
                writer.writeheader()
            writer.writerow({key: (value if key == "epoch" else repr(float(value))) for key, value in row.items()})

    def state_dict(self) -> Dict[str, Any]:
        return {
            "status": self.status,
            "best_ndcg": self.best_ndcg,
            "best_epoch": self.best_epoch,
            "bad_evaluations": self.bad_evaluations,
            "best_params": self.best_params,
            "best_mask_params": self.best_mask_params,
            "history": self.history,
        }

    def load_state_dict(self, state: Dict[str, Any], epoch: int) -> None:
        self.epoch = epoch
        self.status = state.get("status", "idle")
        if self.status in ("completed", "training"):
            self.status = "idle"
        self.best_ndcg = float(state.get("best_ndcg", -1.0))
        self.best_epoch = int(state.get("best_epoch", 0))
        self.bad_evaluations = int(state.get("bad_evaluations", 0))
        self.best_params = state.get("best_params")
        self.best_mask_params = state.get("best_mask_params")
        self.history = list(state.get("history", []))

    def to_checkpoint(self) -> Checkpoint:
        trainer = self.trainer
        return Checkpoint(
            model_config=trainer.model_config,
            train_config=trainer.train_config,
            params=trainer.params,
            mask_params=trainer.variant.mask_params(),
            epoch=self.epoch,
            trainer_state=trainer.state_dict(),
            loop_state=self.state_dict(),
            data_info=self.data_info,
        )

    def save(self) -> None:
        if self.checkpoint_path:
            save_checkpoint(self.checkpoint_path, self.to_checkpoint())

    @classmethod
    def resume(
        cls,
        checkpoint_path: str,
        split: SplitDataset,
        /,
        max_epochs: Optional[int] = None,
        expected_model: Optional[ModelConfig] = None,
        **kwargs: Any,
    ) -> "TrainingLoop":
        """
        Rebuild a trainer and loop from a checkpoint to continue training.

        Args:
            checkpoint_path: Checkpoint to resume from
            split: The dataset the run was trained on
            max_epochs: New epoch budget (defaults to the stored one)
            expected_model: When given, the stored model config must match it
            **kwargs: Passed to the TrainingLoop constructor

        Returns:
            TrainingLoop positioned after the checkpoint's epoch
        """
        checkpoint = load_checkpoint(checkpoint_path, expected_model=expected_model)
        train_config = checkpoint.train_config
        if max_epochs is not None:
            train_config.max_epochs = max_epochs
        trainer = Trainer(checkpoint.model_config, train_config, split, params=checkpoint.params)
        trainer.variant.load_mask_params(checkpoint.mask_params)
        trainer.load_state_dict(checkpoint.trainer_state)
        kwargs.setdefault("checkpoint_path", checkpoint_path)
        kwargs.setdefault("data_info", checkpoint.data_info)
        loop = cls(trainer, **kwargs)
        loop.load_state_dict(checkpoint.loop_state, checkpoint.epoch)
        return loop
