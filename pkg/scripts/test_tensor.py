# recdenoiser - Tensor Test Script

"""
Tests for the gradient tape: every op kind against central finite
differences, plus shape errors and replay determinism.
"""

import os
import sys
import logging
import unittest

import numpy as np

# Add the project root to the Python path
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from core.exceptions import ShapeError
from core.tensor import GradTape, assert_gradients_close, backward, finite_diff_gradient

# Configure logging
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)

INSTANCES = 100


def projected(build, inputs, weights):
    """Scalar sum(build(tape, *tensors) * weights) and its tape gradient."""
    tape = GradTape()
    tensors = [tape.watch(f"x{i}", array) for i, array in enumerate(inputs)]
    out = build(tape, *tensors)
    loss = tape.reduce_sum(tape.multiply(out, tape.constant(weights)))
    return loss, backward(tape, loss)


def numeric_gradients(build, inputs, weights):
    grads = []
    for index in range(len(inputs)):
        def f(x, index=index):
            arrays = [np.array(a) for a in inputs]
            arrays[index] = x
            tape = GradTape(record=False)
            tensors = [tape.constant(a) for a in arrays]
            return float(np.sum(build(tape, *tensors).data * weights))
        grads.append(finite_diff_gradient(f, inputs[index], eps=1e-5))
    return grads


class TensorTestCase(unittest.TestCase):
    """Test case for the tape and its op kinds."""

    def setUp(self):
        """Set up test fixtures."""
        self.rng = np.random.default_rng(7)

    def check_op(self, build, shapes, positive=False, out_shape=None):
        for _ in range(INSTANCES):
            inputs = [self.rng.normal(size=shape) for shape in shapes]
            if positive:
                inputs = [np.abs(a) + 0.5 for a in inputs]
            dry = GradTape(record=False)
            out = build(dry, *[dry.constant(a) for a in inputs])
            weights = self.rng.normal(size=out.shape)
            _, analytic = projected(build, inputs, weights)
            numeric = numeric_gradients(build, inputs, weights)
            for index, grad in enumerate(numeric):
                assert_gradients_close(analytic[f"x{index}"], grad, rtol=1e-4, label=f"input {index}")

    def test_matmul_matches_triple_loop(self):
        """matmul of 2x3 and 3x2 equals the triple-loop product exactly."""
        a = self.rng.normal(size=(2, 3))
        b = self.rng.normal(size=(3, 2))
        tape = GradTape()
        out = tape.matmul(tape.constant(a), tape.constant(b)).data
        expected = np.zeros((2, 2))
        for i in range(2):
            for j in range(2):
                total = 0.0
                for k in range(3):
                    total += a[i, k] * b[k, j]
                expected[i, j] = total
        np.testing.assert_allclose(out, expected, rtol=1e-15, atol=1e-15)

    def test_matmul_shape_mismatch(self):
        tape = GradTape()
        with self.assertRaises(ShapeError):
            tape.matmul(tape.constant(np.ones((2, 3))), tape.constant(np.ones((2, 3))))

    def test_elementwise_gradients(self):
        self.check_op(lambda t, a, b: t.matmul(a, b), [(2, 3, 4), (4, 5)])
        self.check_op(lambda t, a: t.transpose(a), [(2, 3, 4)])
        self.check_op(lambda t, a, b: t.add(a, b), [(3, 4), (4,)])
        self.check_op(lambda t, a, b: t.multiply(a, b), [(2, 3), (2, 3)])
        self.check_op(lambda t, a: t.scale(a, -2.5), [(3, 3)])
        self.check_op(lambda t, a: t.sigmoid(a), [(4, 3)])
        self.check_op(lambda t, a: t.log(a), [(4, 3)], positive=True)

    def test_relu_gradient(self):
        # Keep inputs away from the kink.
        for _ in range(INSTANCES):
            x = self.rng.normal(size=(3, 4))
            x = np.where(np.abs(x) < 1e-3, 0.5, x)
            weights = self.rng.normal(size=x.shape)
            _, analytic = projected(lambda t, a: t.relu(a), [x], weights)
            numeric = numeric_gradients(lambda t, a: t.relu(a), [x], weights)
            assert_gradients_close(analytic["x0"], numeric[0])

    def test_softmax_rows_gradient(self):
        self.check_op(lambda t, a: t.softmax_rows(a), [(2, 4, 4)])
        x = self.rng.normal(size=(3, 5))
        tape = GradTape(record=False)
        rows = tape.softmax_rows(tape.constant(x)).data.sum(axis=-1)
        np.testing.assert_allclose(rows, np.ones(3), atol=1e-12)

    def test_masked_fill_gradient(self):
        keep = np.tril(np.ones((4, 4), dtype=bool))
        self.check_op(lambda t, a: t.softmax_rows(t.masked_fill(a, keep, -1e9)), [(4, 4)])

    def test_gather_and_select_gradients(self):
        ids = np.array([[0, 2, 2], [1, 3, 0]])
        self.check_op(lambda t, table: t.embedding_gather(table, ids), [(4, 3)])
        self.check_op(lambda t, a: t.row_select(a, np.array([2, 0]), axis=-2), [(2, 3, 4)])

    def test_reduce_and_layer_norm_gradients(self):
        self.check_op(lambda t, a: t.reduce_sum(a, axis=-1), [(3, 4)])
        self.check_op(lambda t, a: t.reduce_sum(a, axis=0, keepdims=True), [(3, 4)])
        self.check_op(lambda t, x, g, b: t.layer_norm(x, g, b), [(2, 3, 5), (5,), (5,)])

    def test_composite_gradient(self):
        """A 3-layer composite matches finite differences within 1e-4."""
        w1 = self.rng.normal(size=(4, 6))
        w2 = self.rng.normal(size=(6, 5))
        w3 = self.rng.normal(size=(5, 3))
        x = self.rng.normal(size=(2, 4))

        def build(tape, a, b, c, inp):
            hidden = tape.sigmoid(tape.matmul(inp, a))
            hidden = tape.layer_norm(tape.matmul(hidden, b), tape.constant(np.ones(5)), tape.constant(np.zeros(5)))
            return tape.softmax_rows(tape.matmul(hidden, c))

        weights = self.rng.normal(size=(2, 3))
        _, analytic = projected(build, [w1, w2, w3, x], weights)
        numeric = numeric_gradients(build, [w1, w2, w3, x], weights)
        for index, grad in enumerate(numeric):
            assert_gradients_close(analytic[f"x{index}"], grad, rtol=1e-4)

    def test_backward_replay_is_deterministic(self):
        w = self.rng.normal(size=(4, 4))
        x = self.rng.normal(size=(3, 4))
        tape = GradTape()
        weight = tape.watch("w", w)
        out = tape.reduce_sum(tape.sigmoid(tape.matmul(tape.constant(x), weight)))
        first = backward(tape, out)["w"]
        second = backward(tape, out)["w"]
        self.assertTrue(np.array_equal(first, second))

    def test_backward_requires_scalar(self):
        tape = GradTape()
        x = tape.watch("x", np.ones((2, 2)))
        with self.assertRaises(ShapeError):
            backward(tape, tape.scale(x, 2.0))

    def test_unused_parameter_gets_zero_gradient(self):
        tape = GradTape()
        used = tape.watch("used", np.ones(3))
        tape.watch("unused", np.ones((2, 2)))
        grads = backward(tape, tape.reduce_sum(used))
        np.testing.assert_array_equal(grads["unused"], np.zeros((2, 2)))
        np.testing.assert_array_equal(grads["used"], np.ones(3))

    def test_non_recording_tape_records_nothing(self):
        tape = GradTape(record=False)
        x = tape.watch("x", np.ones(3))
        tape.reduce_sum(tape.sigmoid(x))
        self.assertEqual(tape.records, [])

    def test_finite_diff_rejects_bad_step(self):
        with self.assertRaises(ValueError):
            finite_diff_gradient(lambda x: float(np.sum(x)), np.ones(2), eps=0.0)


if __name__ == "__main__":
    unittest.main()
