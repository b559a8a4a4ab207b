"""
Dense tensors and reverse-mode gradients for recdenoiser.

This module provides an immutable float64 Tensor, a GradTape that records a
fixed set of differentiable ops, the backward pass over that tape, and the
central finite-difference oracle used to check gradients.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import expit

from .exceptions import ShapeError

logger = logging.getLogger(__name__)

LOG_FLOOR = 1e-12
LAYER_NORM_EPS = 1e-8


class Tensor:
    """
    Immutable dense array of 64-bit floats identified on a GradTape.

    The wrapped array is a read-only view, so a Tensor can be shared across
    threads once created.
    """

    __slots__ = ("data", "tensor_id", "requires_grad")

    def __init__(self, data: Any, tensor_id: int, requires_grad: bool = False):
        array = np.asarray(data, dtype=np.float64)
        view = array.view()
        view.flags.writeable = False
        self.data = view
        self.tensor_id = tensor_id
        self.requires_grad = requires_grad

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError("item", self.shape, detail="tensor is not scalar")
        return float(self.data.reshape(()))

    def __repr__(self) -> str:
        return f"Tensor(id={self.tensor_id}, shape={self.shape}, requires_grad={self.requires_grad})"


@dataclass(frozen=True)
class OpRecord:
    """One recorded op: kind, input ids, output id and saved activations."""

    kind: str
    inputs: Tuple[int, ...]
    output: int
    needs_grad: Tuple[bool, ...]
    saved: Dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class OpKind:
    """Forward and backward rules for one differentiable op."""

    name: str
    arity: int
    forward: Callable[..., Tuple[np.ndarray, Dict[str, Any]]]
    backward: Callable[..., Tuple[Optional[np.ndarray], ...]]


OPS: Dict[str, OpKind] = {}


def register_op(name: str, arity: int, forward: Callable, backward: Callable) -> None:
    """
    Register an op kind.

    Args:
        name: Op kind name used by GradTape.forward
        arity: Number of Tensor inputs
        forward: (arrays, **attrs) -> (output, saved)
        backward: (grad, arrays, output, saved) -> input gradients
    """
    if name in OPS:
        raise ValueError(f"Op kind '{name}' is already registered")
    OPS[name] = OpKind(name=name, arity=arity, forward=forward, backward=backward)


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back onto the input shape."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _broadcast_shape(op: str, *shapes: Tuple[int, ...]) -> Tuple[int, ...]:
    try:
        return np.broadcast_shapes(*shapes)
    except ValueError:
        raise ShapeError(op, *shapes, detail="operands do not broadcast")


def _swap_last(array: np.ndarray) -> np.ndarray:
    return np.swapaxes(array, -1, -2)


# --- op rules -------------------------------------------------------------

def _matmul_forward(arrays, **attrs):
    a, b = arrays
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeError("matmul", a.shape, b.shape)
    _broadcast_shape("matmul", a.shape[:-2], b.shape[:-2])
    return np.matmul(a, b), {}


def _matmul_backward(grad, arrays, out, saved):
    a, b = arrays
    grad_a = _unbroadcast(np.matmul(grad, _swap_last(b)), a.shape)
    grad_b = _unbroadcast(np.matmul(_swap_last(a), grad), b.shape)
    return grad_a, grad_b


def _transpose_forward(arrays, **attrs):
    (a,) = arrays
    if a.ndim < 2:
        raise ShapeError("transpose", a.shape, detail="needs at least two axes")
    return _swap_last(a), {}


def _transpose_backward(grad, arrays, out, saved):
    return (_swap_last(grad),)


def _add_forward(arrays, **attrs):
    a, b = arrays
    _broadcast_shape("add", a.shape, b.shape)
    return a + b, {}


def _add_backward(grad, arrays, out, saved):
    a, b = arrays
    return _unbroadcast(grad, a.shape), _unbroadcast(grad, b.shape)


def _multiply_forward(arrays, **attrs):
    a, b = arrays
    _broadcast_shape("multiply", a.shape, b.shape)
    return a * b, {}


def _multiply_backward(grad, arrays, out, saved):
    a, b = arrays
    return _unbroadcast(grad * b, a.shape), _unbroadcast(grad * a, b.shape)


def _scale_forward(arrays, factor: float = 1.0):
    (a,) = arrays
    return a * factor, {"factor": factor}


def _scale_backward(grad, arrays, out, saved):
    return (grad * saved["factor"],)


def _softmax_forward(arrays, **attrs):
    (a,) = arrays
    if a.ndim < 1:
        raise ShapeError("softmax_rows", a.shape, detail="needs at least one axis")
    shifted = a - np.max(a, axis=-1, keepdims=True)
    exps = np.exp(shifted)
    return exps / np.sum(exps, axis=-1, keepdims=True), {}


def _softmax_backward(grad, arrays, out, saved):
    inner = np.sum(grad * out, axis=-1, keepdims=True)
    return (out * (grad - inner),)


def _relu_forward(arrays, **attrs):
    (a,) = arrays
    return np.maximum(a, 0.0), {}


def _relu_backward(grad, arrays, out, saved):
    (a,) = arrays
    return (grad * (a > 0.0),)


def _sigmoid_forward(arrays, **attrs):
    (a,) = arrays
    return expit(a), {}


def _sigmoid_backward(grad, arrays, out, saved):
    return (grad * out * (1.0 - out),)


def _log_forward(arrays, **attrs):
    (a,) = arrays
    return np.log(np.maximum(a, LOG_FLOOR)), {}


def _log_backward(grad, arrays, out, saved):
    (a,) = arrays
    active = a > LOG_FLOOR
    safe = np.where(active, a, 1.0)
    return (np.where(active, grad / safe, 0.0),)


def _gather_forward(arrays, ids=None):
    (table,) = arrays
    ids = np.asarray(ids)
    if table.ndim != 2 or not np.issubdtype(ids.dtype, np.integer):
        raise ShapeError("embedding_gather", table.shape, ids.shape, detail="needs a 2-D table and integer ids")
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise ShapeError("embedding_gather", table.shape, ids.shape, detail="id outside table rows")
    return table[ids], {"ids": ids}


def _gather_backward(grad, arrays, out, saved):
    (table,) = arrays
    grad_table = np.zeros_like(table)
    np.add.at(grad_table, saved["ids"], grad)
    return (grad_table,)


def _row_select_forward(arrays, index=None, axis: int = -2):
    (a,) = arrays
    index = np.asarray(index)
    if a.ndim < 1 or not np.issubdtype(index.dtype, np.integer):
        raise ShapeError("row_select", a.shape, index.shape, detail="needs integer row indices")
    extent = a.shape[axis]
    if index.size and (index.min() < -extent or index.max() >= extent):
        raise ShapeError("row_select", a.shape, index.shape, detail="row index out of range")
    return np.take(a, index, axis=axis), {"index": index, "axis": axis}


def _row_select_backward(grad, arrays, out, saved):
    (a,) = arrays
    axis = saved["axis"] % a.ndim
    grad_a = np.zeros_like(a)
    moved = np.moveaxis(grad_a, axis, 0)
    np.add.at(moved, saved["index"], np.moveaxis(grad, axis, 0))
    return (grad_a,)


def _masked_fill_forward(arrays, keep=None, value: float = 0.0):
    (a,) = arrays
    keep = np.asarray(keep, dtype=bool)
    if _broadcast_shape("masked_fill", a.shape, keep.shape) != a.shape:
        raise ShapeError("masked_fill", a.shape, keep.shape, detail="keep mask must broadcast onto input")
    return np.where(keep, a, value), {"keep": keep}


def _masked_fill_backward(grad, arrays, out, saved):
    return (np.where(saved["keep"], grad, 0.0),)


def _reduce_sum_forward(arrays, axis=None, keepdims: bool = False):
    (a,) = arrays
    return np.sum(a, axis=axis, keepdims=keepdims), {"axis": axis, "keepdims": keepdims}


def _reduce_sum_backward(grad, arrays, out, saved):
    (a,) = arrays
    axis, keepdims = saved["axis"], saved["keepdims"]
    if axis is not None and not keepdims:
        grad = np.expand_dims(grad, axis)
    return (np.broadcast_to(grad, a.shape).copy(),)


def _layer_norm_forward(arrays, eps: float = LAYER_NORM_EPS):
    x, gain, bias = arrays
    width = x.shape[-1]
    if gain.shape != (width,) or bias.shape != (width,):
        raise ShapeError("layer_norm", x.shape, gain.shape, bias.shape)
    mean = np.mean(x, axis=-1, keepdims=True)
    centered = x - mean
    variance = np.mean(centered * centered, axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(variance + eps)
    normalized = centered * inv_std
    return normalized * gain + bias, {"normalized": normalized, "inv_std": inv_std}


def _layer_norm_backward(grad, arrays, out, saved):
    x, gain, bias = arrays
    normalized, inv_std = saved["normalized"], saved["inv_std"]
    width = x.shape[-1]
    grad_gain = _unbroadcast(grad * normalized, gain.shape)
    grad_bias = _unbroadcast(grad, bias.shape)
    grad_norm = grad * gain
    grad_x = (inv_std / width) * (
        width * grad_norm
        - np.sum(grad_norm, axis=-1, keepdims=True)
        - normalized * np.sum(grad_norm * normalized, axis=-1, keepdims=True)
    )
    return grad_x, grad_gain, grad_bias


register_op("matmul", 2, _matmul_forward, _matmul_backward)
register_op("transpose", 1, _transpose_forward, _transpose_backward)
register_op("add", 2, _add_forward, _add_backward)
register_op("multiply", 2, _multiply_forward, _multiply_backward)
register_op("scale", 1, _scale_forward, _scale_backward)
register_op("softmax_rows", 1, _softmax_forward, _softmax_backward)
register_op("relu", 1, _relu_forward, _relu_backward)
register_op("sigmoid", 1, _sigmoid_forward, _sigmoid_backward)
register_op("log", 1, _log_forward, _log_backward)
register_op("embedding_gather", 1, _gather_forward, _gather_backward)
register_op("row_select", 1, _row_select_forward, _row_select_backward)
register_op("masked_fill", 1, _masked_fill_forward, _masked_fill_backward)
register_op("reduce_sum", 1, _reduce_sum_forward, _reduce_sum_backward)
register_op("layer_norm", 3, _layer_norm_forward, _layer_norm_backward)


class GradTape:
    """
    Records ops on Tensors so that gradients can be computed in reverse.

    A tape created with record=False evaluates ops without recording them;
    it is used for inference and for estimator loss evaluations.
    A tape must not be shared between threads.
    """

    def __init__(self, record: bool = True):
        """
        Initialize an empty tape.

        Args:
            record: Whether ops on trainable tensors are recorded
        """
        self.record = record
        self.records: List[OpRecord] = []
        self.parameters: Dict[str, Tensor] = {}
        self._next_id = 0

    def _new_tensor(self, data: Any, requires_grad: bool) -> Tensor:
        tensor = Tensor(data, self._next_id, requires_grad)
        self._next_id += 1
        return tensor

    def watch(self, name: str, data: Any) -> Tensor:
        """
        Register a named parameter whose gradient backward() will report.

        Args:
            name: Parameter name
            data: Parameter values

        Returns:
            Leaf tensor for the parameter
        """
        if name in self.parameters:
            raise ValueError(f"Parameter '{name}' is already watched on this tape")
        tensor = self._new_tensor(data, requires_grad=self.record)
        self.parameters[name] = tensor
        return tensor

    def constant(self, data: Any) -> Tensor:
        """Wrap values that are not differentiated."""
        return self._new_tensor(data, requires_grad=False)

    def forward(self, kind: str, *inputs: Tensor, **attrs: Any) -> Tensor:
        """
        Evaluate one op kind and record it when any input is trainable.

        Args:
            kind: Registered op kind name
            *inputs: Input tensors
            **attrs: Non-differentiable op attributes (ids, masks, factors)

        Returns:
            Output tensor

        Raises:
            ShapeError: If the input shapes do not conform to the op kind
        """
        op = OPS.get(kind)
        if op is None:
            raise ValueError(f"Op kind '{kind}' not found in registry")
        if len(inputs) != op.arity:
            raise ShapeError(kind, *[t.shape for t in inputs], detail=f"expects {op.arity} inputs")
        arrays = tuple(t.data for t in inputs)
        output, saved = op.forward(arrays, **attrs)
        needs_grad = tuple(t.requires_grad for t in inputs)
        requires_grad = self.record and any(needs_grad)
        result = self._new_tensor(output, requires_grad)
        if requires_grad:
            saved = dict(saved)
            saved["inputs"] = arrays
            saved["output"] = result.data
            self.records.append(OpRecord(kind, tuple(t.tensor_id for t in inputs), result.tensor_id, needs_grad, saved))
        return result

    # Convenience wrappers, one per op kind.

    def matmul(self, a: Tensor, b: Tensor) -> Tensor:
        return self.forward("matmul", a, b)

    def transpose(self, a: Tensor) -> Tensor:
        return self.forward("transpose", a)

    def add(self, a: Tensor, b: Tensor) -> Tensor:
        return self.forward("add", a, b)

    def multiply(self, a: Tensor, b: Tensor) -> Tensor:
        return self.forward("multiply", a, b)

    def scale(self, a: Tensor, factor: float) -> Tensor:
        return self.forward("scale", a, factor=float(factor))

    def softmax_rows(self, a: Tensor) -> Tensor:
        return self.forward("softmax_rows", a)

    def relu(self, a: Tensor) -> Tensor:
        return self.forward("relu", a)

    def sigmoid(self, a: Tensor) -> Tensor:
        return self.forward("sigmoid", a)

    def log(self, a: Tensor) -> Tensor:
        return self.forward("log", a)

    def embedding_gather(self, table: Tensor, ids: Any) -> Tensor:
        return self.forward("embedding_gather", table, ids=ids)

    def row_select(self, a: Tensor, index: Any, axis: int = -2) -> Tensor:
        return self.forward("row_select", a, index=index, axis=axis)

    def masked_fill(self, a: Tensor, keep: Any, value: float) -> Tensor:
        return self.forward("masked_fill", a, keep=keep, value=float(value))

    def reduce_sum(self, a: Tensor, axis: Optional[int] = None, keepdims: bool = False) -> Tensor:
        return self.forward("reduce_sum", a, axis=axis, keepdims=keepdims)

    def layer_norm(self, x: Tensor, gain: Tensor, bias: Tensor, eps: float = LAYER_NORM_EPS) -> Tensor:
        return self.forward("layer_norm", x, gain, bias, eps=eps)

    def subtract(self, a: Tensor, b: Tensor) -> Tensor:
        return self.add(a, self.scale(b, -1.0))

    def squared_norm(self, a: Tensor) -> Tensor:
        return self.reduce_sum(self.multiply(a, a))


def backward(tape: GradTape, output: Tensor) -> Dict[str, np.ndarray]:
    """
    Replay the tape in reverse and return gradients of a scalar output.

    Args:
        tape: Tape that recorded the computation
        output: One-element tensor produced on the tape

    Returns:
        Gradient per watched parameter name; parameters not on the path
        receive zeros

    Raises:
        ShapeError: If the output is not a scalar
    """
    if output.data.size != 1:
        raise ShapeError("backward", output.shape, detail="output must be a one-element tensor")

    grads: Dict[int, np.ndarray] = {output.tensor_id: np.ones_like(output.data)}
    for record in reversed(tape.records):
        grad = grads.pop(record.output, None)
        if grad is None:
            continue
        op = OPS[record.kind]
        input_grads = op.backward(grad, record.saved["inputs"], record.saved["output"], record.saved)
        for tensor_id, needs, input_grad in zip(record.inputs, record.needs_grad, input_grads):
            if not needs or input_grad is None:
                continue
            if tensor_id in grads:
                grads[tensor_id] = grads[tensor_id] + input_grad
            else:
                grads[tensor_id] = input_grad

    return {
        name: grads.get(tensor.tensor_id, np.zeros_like(tensor.data))
        for name, tensor in tape.parameters.items()
    }


def finite_diff_gradient(f: Callable[[np.ndarray], float], x: Any, eps: float = 1e-5) -> np.ndarray:
    """
    Central finite-difference gradient of a scalar function.

    Args:
        f: Deterministic function of an array returning a scalar
        x: Point at which to differentiate
        eps: Step size, must be positive

    Returns:
        Array shaped like x with (f(x+eps*e_i) - f(x-eps*e_i)) / (2*eps)
    """
    if eps <= 0:
        raise ValueError(f"Finite-difference step must be positive, got {eps}")
    base = np.array(x, dtype=np.float64)
    gradient = np.zeros_like(base)
    flat = base.reshape(-1)
    flat_grad = gradient.reshape(-1)
    for index in range(flat.size):
        original = flat[index]
        flat[index] = original + eps
        upper = float(np.asarray(f(base)).reshape(()))
        flat[index] = original - eps
        lower = float(np.asarray(f(base)).reshape(()))
        flat[index] = original
        flat_grad[index] = (upper - lower) / (2.0 * eps)
    return gradient


def relative_errors(analytic: np.ndarray, numeric: np.ndarray, threshold: float = 1e-8) -> np.ndarray:
    """Coordinatewise relative error over coordinates with |grad| above threshold."""
    analytic = np.asarray(analytic, dtype=np.float64).reshape(-1)
    numeric = np.asarray(numeric, dtype=np.float64).reshape(-1)
    magnitude = np.maximum(np.abs(analytic), np.abs(numeric))
    measured = magnitude > threshold
    return np.abs(analytic - numeric)[measured] / magnitude[measured]


def assert_gradients_close(
    analytic: np.ndarray,
    numeric: np.ndarray,
    rtol: float = 1e-4,
    threshold: float = 1e-8,
    atol: float = 1e-8,
    label: str = "gradient",
) -> None:
    """
    Check an analytic gradient against a finite-difference one.

    A coordinate passes when |a - n| <= rtol * max(|a|, |n|) + atol; only
    coordinates with max(|a|, |n|) > threshold are measured. atol absorbs
    the rounding floor of central differences.

    Raises:
        AssertionError: Naming the worst coordinate
    """
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    if analytic.shape != numeric.shape:
        raise AssertionError(f"{label}: shape {analytic.shape} != {numeric.shape}")
    flat_a = analytic.reshape(-1)
    flat_n = numeric.reshape(-1)
    magnitude = np.maximum(np.abs(flat_a), np.abs(flat_n))
    excess = np.abs(flat_a - flat_n) - (rtol * magnitude + atol)
    excess[magnitude <= threshold] = -np.inf
    if flat_a.size and np.max(excess) > 0:
        worst = int(np.argmax(excess))
        raise AssertionError(
            f"{label}: coordinate {worst} analytic={flat_a[worst]!r} numeric={flat_n[worst]!r} "
            f"relative error={abs(flat_a[worst] - flat_n[worst]) / magnitude[worst]:.3e}"
        )
