# recdenoiser - Trainer Test Script

"""
Tests for joint training: config validation, the reduction to the plain
backbone, estimator cost, joint-loss gradients, checkpoints and resuming.
"""

import os
import json
import sys
import shutil
import logging
import tempfile
import unittest

import numpy as np

# Add the project root to the Python path
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from core.checkpoint import load_checkpoint, save_checkpoint
from core.exceptions import CheckpointError, ConfigError, NumericalError
from core.jacobian import JacobianRegularizer, draw_probes
from core.model import ModelConfig, bce_loss, bind_constants, bind_params, init_params
from core.optim import AdamOptimizer
from core.tensor import GradTape, assert_gradients_close, backward, finite_diff_gradient
from core.trainer import TrainConfig, Trainer, joint_loss
from core.training_loop import LOG_COLUMNS, TrainingLoop
from data.batching import Batch, iterate_batches
from data.interactions import split_leave_one_out
from data.synthetic import SyntheticSpec, generate_synthetic

# Configure logging
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)


def small_split(num_users=24, seed=0):
    spec = SyntheticSpec(num_users=num_users, num_items=60, min_length=5, max_length=9, seed=seed)
    return split_leave_one_out(generate_synthetic(spec).log)


def small_model(split, dropout_rate=0.0):
    return ModelConfig(num_items=split.num_items, max_len=6, dim=8, num_blocks=2, num_heads=2, dropout_rate=dropout_rate)


class TrainConfigTestCase(unittest.TestCase):
    """Test case for training-config validation."""

    def test_variant_follows_estimator(self):
        self.assertEqual(TrainConfig(estimator="arm").resolved_variant(), "denoiser-arm")
        self.assertEqual(TrainConfig(estimator="ar").resolved_variant(), "denoiser-ar")
        self.assertEqual(TrainConfig(estimator="none", beta=0.0).resolved_variant(), "full")
        self.assertTrue(TrainConfig(estimator="none", beta=0.0, gamma=0.0).is_backbone)
        self.assertFalse(TrainConfig(estimator="none", beta=0.0, gamma=0.1).is_backbone)

    def test_invalid_combinations(self):
        with self.assertRaises(ConfigError):
            TrainConfig(estimator="none", beta=0.01).validate()
        with self.assertRaises(ConfigError):
            TrainConfig(estimator="arm", variant="window").validate()
        with self.assertRaises(ConfigError):
            TrainConfig(estimator="arm", variant="denoiser-ar").validate()
        with self.assertRaises(ConfigError):
            TrainConfig(estimator="reinforce").validate()
        with self.assertRaises(ConfigError):
            TrainConfig(gamma=-1.0).validate()
        with self.assertRaises(ConfigError):
            TrainConfig(batch_size=0).validate()
        TrainConfig(estimator="none", beta=0.0, variant="window").validate()

    def test_dict_round_trip(self):
        config = TrainConfig(estimator="ar", beta=0.1, seed=3)
        self.assertEqual(TrainConfig.from_dict(config.to_dict()), config)
        with self.assertRaises(ConfigError):
            TrainConfig.from_dict({"learning_rate": 0.1, "momentum": 0.9})


class TrainerTestCase(unittest.TestCase):
    """Test case for the joint trainer."""

    def setUp(self):
        """Set up test fixtures."""
        self.split = small_split()
        self.temp_dir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.temp_dir)

    def backbone_trajectory(self, model_config, train_config, epochs):
        """Mask-free reference loop: BCE, tape gradient and Adam only."""
        params = init_params(model_config, np.random.default_rng(train_config.seed))
        optimizer = AdamOptimizer(lr=train_config.learning_rate)
        losses = []
        for epoch in range(1, epochs + 1):
            data_rng = np.random.default_rng([train_config.seed, epoch, 0])
            for batch in iterate_batches(self.split, model_config.max_len, train_config.batch_size, data_rng):
                tape = GradTape()
                loss = bce_loss(tape, bind_params(tape, params), batch.inputs, batch.targets, batch.negatives, model_config)
                losses.append(loss.total.item())
                optimizer.step(params, backward(tape, loss.total))
        return losses, params

    def trainer_trajectory(self, trainer, epochs):
        losses = []
        data_seed = trainer.train_config.seed
        for epoch in range(1, epochs + 1):
            data_rng = np.random.default_rng([data_seed, epoch, 0])
            step_rng = np.random.default_rng([data_seed, epoch, 1])
            for batch in iterate_batches(self.split, trainer.model_config.max_len, trainer.train_config.batch_size, data_rng):
                losses.append(trainer.train_step(batch, step_rng, epoch).total.item())
        return losses

    def test_reduces_to_backbone(self):
        """estimator=none with beta=gamma=0 reproduces the plain backbone bitwise."""
        model_config = small_model(self.split)
        train_config = TrainConfig(estimator="none", beta=0.0, gamma=0.0, batch_size=8, seed=5)
        expected_losses, expected_params = self.backbone_trajectory(model_config, train_config, 5)
        trainer = Trainer(model_config, train_config, self.split)
        losses = self.trainer_trajectory(trainer, 5)
        self.assertEqual(losses, expected_losses)
        for name, array in expected_params.items():
            self.assertTrue(np.array_equal(trainer.params[name], array), name)

    def test_all_ones_window_matches_backbone(self):
        model_config = small_model(self.split)
        backbone = Trainer(model_config, TrainConfig(estimator="none", beta=0.0, gamma=0.0, batch_size=8), self.split)
        window = Trainer(
            model_config,
            TrainConfig(estimator="none", beta=0.0, gamma=0.0, batch_size=8, variant="window", window_size=model_config.max_len),
            self.split,
        )
        self.assertEqual(self.trainer_trajectory(backbone, 2), self.trainer_trajectory(window, 2))

    def test_bce_evaluations_per_step(self):
        model_config = small_model(self.split)
        for estimator, per_step in (("arm", 2), ("ar", 1), ("none", 1)):
            beta = 0.0 if estimator == "none" else 0.01
            trainer = Trainer(model_config, TrainConfig(estimator=estimator, beta=beta, gamma=0.0, batch_size=8), self.split)
            metrics = trainer.train_epoch(1)
            self.assertEqual(trainer.bce_evaluations, per_step * metrics.batches, estimator)
            self.assertEqual(trainer.steps, metrics.batches)

    def test_mask_logits_move_only_for_denoisers(self):
        model_config = small_model(self.split)
        trainer = Trainer(model_config, TrainConfig(estimator="arm", beta=0.1, gamma=0.0, batch_size=8), self.split)
        before = {name: array.copy() for name, array in trainer.variant.mask_params().items()}
        trainer.train_epoch(1)
        after = trainer.variant.mask_params()
        self.assertTrue(any(not np.array_equal(before[name], after[name]) for name in before))
        # Entries above the diagonal are not gates.
        for name in after:
            np.testing.assert_array_equal(np.triu(after[name], 1), np.triu(before[name], 1))

    def test_jacobian_penalty_reported(self):
        model_config = small_model(self.split)
        trainer = Trainer(model_config, TrainConfig(estimator="arm", beta=0.01, gamma=0.01, batch_size=8), self.split)
        metrics = trainer.train_epoch(1)
        self.assertGreater(metrics.jacobian, 0.0)
        self.assertEqual(trainer.regularizer.probe_count, metrics.batches * model_config.num_blocks)

    def test_joint_loss_gradients(self):
        """Joint-loss gradients with a frozen mask sample and frozen probes match finite differences."""
        config = ModelConfig(num_items=6, max_len=6, dim=8, num_blocks=2, num_heads=2, dropout_rate=0.0, weight_decay=0.01)
        params = init_params(config, np.random.default_rng(4))
        histories = [{1, 2, 3, 4, 5, 6}, {2, 3, 4, 5, 6}]
        batch = Batch(
            users=["a", "b"],
            inputs=np.array([[0, 1, 2, 3, 4, 5], [0, 0, 6, 5, 4, 3]]),
            targets=np.array([[1, 2, 3, 4, 5, 6], [0, 0, 5, 4, 3, 2]]),
            negatives=np.array([[6, 5, 4, 3, 2, 1], [0, 0, 1, 1, 1, 1]]),
            histories=histories,
        )
        rng = np.random.default_rng(8)
        masks = []
        for _ in range(2):
            mask = np.tril((rng.random((6, 6)) < 0.8).astype(np.float64))
            np.fill_diagonal(mask, 1.0)
            masks.append(mask)
        probes = [draw_probes((2, 6, 8), 1, rng) for _ in range(2)]
        regularizer = JacobianRegularizer(gamma=0.1, probes=1, eps=1e-3)

        def loss_for(trial, record):
            tape = GradTape(record=record)
            bound = bind_params(tape, trial) if record else bind_constants(tape, trial)
            loss = joint_loss(tape, bound, batch, config, masks, beta=0.01, l0=3.0, regularizer=regularizer, probes=probes)
            return tape, loss

        tape, loss = loss_for(params, True)
        self.assertGreater(loss.jacobian, 0.0)
        analytic = backward(tape, loss.total)
        for name in params:
            def f(array, name=name):
                trial = dict(params)
                trial[name] = array
                return loss_for(trial, False)[1].total.item()
            numeric = finite_diff_gradient(f, params[name], eps=1e-5)
            assert_gradients_close(analytic[name], numeric, rtol=1e-4, label=name)

    def test_non_finite_loss_raises_with_diagnostics(self):
        model_config = small_model(self.split)
        trainer = Trainer(model_config, TrainConfig(estimator="none", beta=0.0, gamma=0.0, batch_size=8), self.split)
        trainer.params["item_table"][1:] = np.nan
        batch = next(iterate_batches(self.split, model_config.max_len, 8, np.random.default_rng(0)))
        with self.assertRaises(NumericalError) as context:
            trainer.train_step(batch, np.random.default_rng(1), epoch=3)
        self.assertEqual(context.exception.diagnostics["epoch"], 3)
        self.assertEqual(context.exception.diagnostics["users"], batch.users)


class CheckpointTestCase(unittest.TestCase):
    """Test case for checkpoints, the training loop and resuming."""

    def setUp(self):
        """Set up test fixtures."""
        self.split = small_split(num_users=20, seed=3)
        self.temp_dir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.temp_dir)

    def make_loop(self, max_epochs, name, dropout_rate=0.2):
        model_config = small_model(self.split, dropout_rate)
        train_config = TrainConfig(estimator="arm", beta=0.01, gamma=0.001, batch_size=8, max_epochs=max_epochs,
                                   eval_every=1, num_negatives=20)
        trainer = Trainer(model_config, train_config, self.split)
        return TrainingLoop(
            trainer,
            log_path=os.path.join(self.temp_dir, f"{name}.csv"),
            checkpoint_path=os.path.join(self.temp_dir, f"{name}.json"),
        )

    def test_save_load_save_is_identical(self):
        loop = self.make_loop(1, "run")
        loop.start()
        path = os.path.join(self.temp_dir, "run.json")
        copy = os.path.join(self.temp_dir, "copy.json")
        checkpoint = load_checkpoint(path)
        save_checkpoint(copy, checkpoint)
        with open(path) as a, open(copy) as b:
            self.assertEqual(a.read(), b.read())
        for name, array in loop.trainer.variant.mask_params().items():
            self.assertTrue(np.array_equal(checkpoint.mask_params[name], array))

    def test_file_layout(self):
        loop = self.make_loop(1, "run")
        loop.start()
        with open(os.path.join(self.temp_dir, "run.json")) as handle:
            document = json.load(handle)
        self.assertIn("config", document)
        self.assertIn("tensors", document)
        self.assertEqual(document["config"]["model"], loop.trainer.model_config.to_dict())
        self.assertEqual(document["config"]["train"]["estimator"], "arm")

        tensors = document["tensors"]
        for name, array in loop.trainer.params.items():
            entry = tensors[f"params/{name}"]
            self.assertEqual(set(entry), {"shape", "data"})
            self.assertEqual(entry["shape"], list(array.shape))
            self.assertEqual(len(entry["data"]), array.size)
            self.assertTrue(np.array_equal(np.array(entry["data"]).reshape(entry["shape"]), array))
        for name in loop.trainer.variant.mask_params():
            self.assertIn(f"mask/{name}", tensors)
        for entry in tensors.values():
            self.assertEqual(int(np.prod(entry["shape"])), len(entry["data"]))

    def test_config_mismatch_and_corruption(self):
        loop = self.make_loop(1, "run")
        loop.start()
        path = os.path.join(self.temp_dir, "run.json")
        other = ModelConfig(**{**loop.trainer.model_config.to_dict(), "dim": 16})
        with self.assertRaisesRegex(CheckpointError, "dim"):
            load_checkpoint(path, expected_model=other)
        load_checkpoint(path, expected_model=loop.trainer.model_config)

        with open(path) as handle:
            text = handle.read()
        broken = os.path.join(self.temp_dir, "broken.json")
        with open(broken, "w") as handle:
            handle.write(text.replace('"epoch":1', '"epoch":2', 1))
        with self.assertRaises(CheckpointError):
            load_checkpoint(broken)
        with self.assertRaises(CheckpointError):
            load_checkpoint(os.path.join(self.temp_dir, "missing.json"))

    def test_log_rows(self):
        loop = self.make_loop(2, "run")
        summary = loop.start()
        self.assertEqual(summary["status"], "completed")
        self.assertEqual(summary["epochs"], 2)
        with open(os.path.join(self.temp_dir, "run.csv")) as handle:
            lines = handle.read().splitlines()
        self.assertEqual(lines[0], ",".join(LOG_COLUMNS))
        self.assertEqual(len(lines), 3)

    def test_early_stopping(self):
        loop = self.make_loop(30, "run")
        loop.trainer.train_config.patience = 1
        loop.trainer.train_config.learning_rate = 1e-9
        loop.trainer.optimizer.lr = 1e-9
        loop.trainer.mask_optimizer.lr = 1e-9
        summary = loop.start()
        self.assertEqual(summary["status"], "early_stopped")
        self.assertLess(summary["epochs"], 30)

    def test_resume_matches_uninterrupted_run(self):
        straight = self.make_loop(2, "straight")
        straight.start()

        first = self.make_loop(1, "resumed")
        first.start()
        resumed = TrainingLoop.resume(os.path.join(self.temp_dir, "resumed.json"), self.split, max_epochs=2,
                                      log_path=os.path.join(self.temp_dir, "resumed.csv"))
        self.assertEqual(resumed.epoch, 1)
        resumed.start()

        expected = load_checkpoint(os.path.join(self.temp_dir, "straight.json"))
        actual = load_checkpoint(os.path.join(self.temp_dir, "resumed.json"))
        self.assertEqual(actual.epoch, 2)
        for name, array in expected.params.items():
            self.assertTrue(np.array_equal(actual.params[name], array), name)
        for name, array in expected.mask_params.items():
            self.assertTrue(np.array_equal(actual.mask_params[name], array), name)
        self.assertEqual(expected.loop_state["history"], actual.loop_state["history"])


if __name__ == "__main__":
    unittest.main()
