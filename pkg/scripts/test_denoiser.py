# recdenoiser - Denoiser Test Script

"""
Tests for the trainable attention masks: sampling, the sparsity surrogate,
the ARM and AR estimators against exact enumeration, clipping, export and
the attention-variant registry.
"""

import os
import sys
import csv
import shutil
import logging
import tempfile
import unittest

import numpy as np
from scipy.special import expit
from scipy.stats import norm

# Add the project root to the Python path
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from core.denoiser import (
    MaskDenoiser,
    antithetic_masks,
    ar_gradient,
    arm_gradient,
    causal_pairs,
    draw_uniforms,
    estimator_samples,
    exact_expected_gradient,
    export_masks,
    inference_mask,
    init_mask_logits,
    l0_gradient,
    l0_surrogate,
    mask_density,
    retained_count,
    sample_masks,
    window_mask,
)
from core.exceptions import ConfigError
from core.tensor import finite_diff_gradient
from variants import registry
from variants.denoiser import ArDenoiserVariant, ArmDenoiserVariant
from variants.fixed import FullAttention, RandomDropAttention, WindowAttention

# Configure logging
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)

GATES = 12
SAMPLES = 200000
FAMILYWISE_ALPHA = 0.01


def familywise_bound(comparisons, alpha=FAMILYWISE_ALPHA):
    """Two-sided z bound keeping the chance of any false alarm below alpha."""
    return float(norm.ppf(1.0 - alpha / (2.0 * comparisons)))


def table_loss(table):
    """Loss of a binary state vector (or a stack of them) looked up in a table."""
    weights = 2 ** np.arange(GATES)

    def loss(states):
        index = np.asarray(states, dtype=np.int64) @ weights
        return table[index]
    return loss


class DenoiserTestCase(unittest.TestCase):
    """Test case for mask sampling and the gradient estimators."""

    def setUp(self):
        """Set up test fixtures."""
        self.rng = np.random.default_rng(2022)
        self.temp_dir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.temp_dir)

    def test_causal_pairs(self):
        self.assertEqual(causal_pairs(25), 325)
        self.assertEqual(causal_pairs(1), 1)

    def test_l0_surrogate_matches_loop(self):
        logits = [self.rng.normal(size=(5, 5)) for _ in range(2)]
        expected = 0.0
        for phi in logits:
            for u in range(5):
                for v in range(u + 1):
                    expected += 1.0 / (1.0 + np.exp(-phi[u, v]))
        self.assertAlmostEqual(l0_surrogate(logits), expected, places=12)

    def test_l0_gradient_matches_finite_differences(self):
        phi = self.rng.normal(size=(4, 4))
        numeric = finite_diff_gradient(lambda x: l0_surrogate([x]), phi)
        np.testing.assert_allclose(l0_gradient([phi])[0], numeric, atol=1e-8)

    def test_sampling_frequency(self):
        logits = [np.full((3, 3), 1.0)]
        kept = np.zeros((3, 3))
        for _ in range(4000):
            kept += sample_masks(logits, draw_uniforms(logits, self.rng))[0]
        np.testing.assert_allclose(kept / 4000, np.full((3, 3), expit(1.0)), atol=0.03)

    def test_antithetic_masks_use_the_same_draws(self):
        logits = [self.rng.normal(size=(4, 4))]
        uniforms = draw_uniforms(logits, self.rng)
        expected = (uniforms[0] > expit(-logits[0])).astype(np.float64)
        np.testing.assert_array_equal(antithetic_masks(logits, uniforms)[0], expected)

    def test_init_keeps_every_link(self):
        logits = init_mask_logits(2, 6)
        self.assertEqual(len(logits), 2)
        self.assertEqual(mask_density(logits), 1.0)
        self.assertEqual(retained_count([inference_mask(phi) for phi in logits]), 2 * causal_pairs(6))

    def test_inference_mask_clips_at_half(self):
        phi = np.array([[0.0, -1.0], [0.01, 3.0]])
        mask = inference_mask(phi)
        self.assertEqual(mask[0, 0], 0.0)
        self.assertEqual(mask[0, 1], 0.0)
        self.assertAlmostEqual(mask[1, 0], expit(0.01))
        self.assertAlmostEqual(mask[1, 1], expit(3.0))

    def test_window_mask(self):
        expected = np.array([
            [1, 0, 0, 0],
            [1, 1, 0, 0],
            [0, 1, 1, 0],
            [0, 0, 1, 1],
        ], dtype=np.float64)
        np.testing.assert_array_equal(window_mask(4, 2), expected)
        np.testing.assert_array_equal(window_mask(3, 10), np.tril(np.ones((3, 3))))
        with self.assertRaises(ConfigError):
            window_mask(4, 0)

    def test_exact_gradient_matches_finite_differences(self):
        table = self.rng.normal(size=2 ** 4)
        weights = 2 ** np.arange(4)
        loss = lambda state: table[int(np.asarray(state, dtype=np.int64) @ weights)]
        phi = self.rng.normal(size=4)

        def expectation(logits):
            g = expit(logits)
            total = 0.0
            for index in range(16):
                state = (index >> np.arange(4)) & 1
                total += np.prod(np.where(state, g, 1 - g)) * loss(state)
            return total

        numeric = finite_diff_gradient(expectation, phi)
        np.testing.assert_allclose(exact_expected_gradient(phi, loss), numeric, atol=1e-8)

    def test_exact_gradient_refuses_large_problems(self):
        with self.assertRaises(ConfigError):
            exact_expected_gradient(np.zeros(21), lambda state: 0.0)

    def test_estimators_are_unbiased_and_arm_has_lower_variance(self):
        table = 5.0 + self.rng.normal(size=2 ** GATES)
        loss = table_loss(table)
        phi = self.rng.normal(scale=1.5, size=GATES)
        exact = exact_expected_gradient(phi, loss)
        # Bonferroni over both estimators and every coordinate.
        bound = familywise_bound(2 * GATES)
        self.assertGreaterEqual(bound, 3.0)

        variances = {}
        for estimator in ("arm", "ar"):
            draws = estimator_samples(estimator, phi, loss, SAMPLES, np.random.default_rng(17))
            mean = draws.mean(axis=0)
            standard_error = draws.std(axis=0, ddof=1) / np.sqrt(SAMPLES)
            self.assertTrue(
                np.all(np.abs(mean - exact) <= bound * standard_error),
                f"{estimator}: mean {mean} vs exact {exact} (se {standard_error})",
            )
            variances[estimator] = draws.var(axis=0, ddof=1)
        self.assertTrue(np.all(variances["arm"] <= 1.05 * variances["ar"]))
        self.assertGreaterEqual(np.mean(variances["arm"] < variances["ar"]), 0.8)

    def test_single_sample_estimators(self):
        logits = [self.rng.normal(size=(3, 3))]
        calls = []

        def loss_fn(masks):
            calls.append(masks)
            return float(np.sum(masks[0]))

        grads, sample = arm_gradient(logits, loss_fn, np.random.default_rng(0), beta=0.1)
        self.assertEqual(len(calls), 2)
        self.assertEqual(grads[0].shape, (3, 3))
        self.assertEqual(grads[0][0, 2], 0.0)
        np.testing.assert_array_equal(sample.masks[0], sample_masks(logits, sample.uniforms)[0])

        calls.clear()
        ar_grads, _ = ar_gradient(logits, loss_fn, np.random.default_rng(0))
        self.assertEqual(len(calls), 1)
        self.assertEqual(ar_grads[0][0, 1], 0.0)

    def test_mask_denoiser_gradient(self):
        denoiser = MaskDenoiser(2, 4, estimator="arm", beta=0.0)
        sample = denoiser.sample(np.random.default_rng(1))
        anti_calls = []

        def anti_loss(masks):
            anti_calls.append(masks)
            return 3.0

        grads = denoiser.gradient(sample, 1.0, anti_loss)
        self.assertEqual(len(anti_calls), 1)
        expected = np.where(np.tril(np.ones((4, 4), dtype=bool)), 2.0 * (sample.uniforms[0] - 0.5), 0.0)
        np.testing.assert_allclose(grads[0], expected)
        self.assertEqual(denoiser.loss_evaluations(), 2)
        with self.assertRaises(ConfigError):
            denoiser.gradient(sample, 1.0)
        with self.assertRaises(ConfigError):
            MaskDenoiser(2, 4, estimator="reinforce")

    def test_mask_denoiser_param_round_trip(self):
        denoiser = MaskDenoiser(2, 3, estimator="ar")
        params = {name: value - 5.0 for name, value in denoiser.param_dict().items()}
        denoiser.load_param_dict(params)
        self.assertEqual(denoiser.density(), 0.0)
        self.assertAlmostEqual(denoiser.l0(), 2 * causal_pairs(3) * expit(-3.0))

    def test_export_masks(self):
        logits = init_mask_logits(2, 4)
        logits[1][3, 0] = -1.0
        paths = export_masks(logits, os.path.join(self.temp_dir, "masks"))
        self.assertEqual([os.path.basename(p) for p in paths], ["block_0.csv", "block_1.csv"])
        with open(paths[1]) as handle:
            rows = list(csv.DictReader(handle))
        self.assertEqual(len(rows), causal_pairs(4))
        lookup = {(int(r["u"]), int(r["v"])): float(r["keep_prob"]) for r in rows}
        self.assertEqual(lookup[(3, 0)], float(expit(-1.0)))
        self.assertNotIn((0, 3), lookup)


class VariantTestCase(unittest.TestCase):
    """Test case for the attention-variant registry."""

    def test_registry_lists_every_variant(self):
        self.assertEqual(
            sorted(registry.variants),
            ["denoiser-ar", "denoiser-arm", "full", "random-drop", "window"],
        )
        schema = registry.list_variants()["window"]
        self.assertIn("window_size", schema["parameters"])
        self.assertEqual(schema["parameters"]["window_size"]["type"], "integer")

    def test_create_filters_options(self):
        variant = registry.create("window", 2, 6, beta=0.1, window_size=3)
        self.assertIsInstance(variant, WindowAttention)
        np.testing.assert_array_equal(variant.evaluation_masks()[0], window_mask(6, 3))
        with self.assertRaises(ConfigError):
            registry.create("sliding", 2, 6)

    def test_fixed_variants(self):
        rng = np.random.default_rng(0)
        full = FullAttention(2, 5)
        self.assertIsNone(full.training_masks(rng))
        self.assertIsNone(full.evaluation_masks())
        self.assertFalse(full.learnable)

        drop = RandomDropAttention(2, 5, drop_keep_prob=0.6)
        sample = drop.training_masks(rng)
        self.assertEqual(len(sample.masks), 2)
        self.assertTrue(set(np.unique(sample.masks[0])) <= {0.0, 1.0})
        np.testing.assert_array_equal(drop.evaluation_masks()[1], np.full((5, 5), 0.6))
        with self.assertRaises(ConfigError):
            RandomDropAttention(2, 5, drop_keep_prob=0.0)

    def test_denoiser_variants(self):
        arm = ArmDenoiserVariant(2, 4, beta=0.01)
        ar = ArDenoiserVariant(2, 4, beta=0.01)
        self.assertTrue(arm.learnable)
        self.assertEqual(arm.extra_loss_evaluations(), 1)
        self.assertEqual(ar.extra_loss_evaluations(), 0)
        self.assertEqual(sorted(arm.mask_params()), ["mask0", "mask1"])
        self.assertEqual(arm.density(), 1.0)
        sample = ar.training_masks(np.random.default_rng(0))
        grads = ar.mask_gradient(sample, 2.0)
        self.assertEqual(sorted(grads), ["mask0", "mask1"])


if __name__ == "__main__":
    unittest.main()
