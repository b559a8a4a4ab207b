"""
Self-attentive sequential recommendation backbone.

Left-to-right (causal) transformer over fixed-length item sequences:
item + position embeddings, stacked blocks of multi-head self-attention
whose attention maps may be multiplied by per-block masks, a point-wise
feed-forward network, inner-product scoring and the binary cross-entropy
objective. All functions run on a GradTape so the same code serves training,
gradient checks and inference.
"""

import functools
import logging
from dataclasses import asdict, dataclass, field, fields
from typing import Any, Dict, List, Optional, Sequence, Set, Tuple

import numpy as np

from .exceptions import ConfigError, DataError
from .tensor import GradTape, Tensor

logger = logging.getLogger(__name__)

CAUSAL_FILL = -1e9

ModelParams = Dict[str, np.ndarray]


@dataclass
class ModelConfig:
    """
    Backbone hyper-parameters.

    Attributes:
        num_items: Number of real items |I| (ids 1..|I|, 0 is padding)
        max_len: Sequence length n
        dim: Hidden dimension d
        num_blocks: Number of transformer blocks L
        num_heads: Number of attention heads H (must divide d)
        dropout_rate: Dropout on block outputs during training
        weight_decay: Coefficient alpha on the embedding tables
        attention_dropout: Also apply dropout to attention weights
    """

    num_items: int
    max_len: int = 25
    dim: int = 50
    num_blocks: int = 2
    num_heads: int = 2
    dropout_rate: float = 0.2
    weight_decay: float = 0.0
    attention_dropout: bool = False

    def validate(self, allow_empty_stack: bool = False) -> None:
        """
        Check the config invariants.

        Args:
            allow_empty_stack: Accept num_blocks == 0 (used by tests)

        Raises:
            ConfigError: Naming the first violated field
        """
        if self.num_items < 1:
            raise ConfigError(f"num_items must be >= 1, got {self.num_items}")
        if self.max_len < 1:
            raise ConfigError(f"max_len must be >= 1, got {self.max_len}")
        if self.dim < 1 or self.num_heads < 1 or self.dim % self.num_heads != 0:
            raise ConfigError(f"dim ({self.dim}) must be divisible by num_heads ({self.num_heads})")
        if self.num_blocks < (0 if allow_empty_stack else 1):
            raise ConfigError(f"num_blocks must be >= 1, got {self.num_blocks}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigError(f"dropout_rate must lie in [0, 1), got {self.dropout_rate}")
        if self.weight_decay < 0:
            raise ConfigError(f"weight_decay must be >= 0, got {self.weight_decay}")

    @property
    def head_dim(self) -> int:
        return self.dim // self.num_heads

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"Unknown model config fields: {sorted(unknown)}")
        return cls(**data)


@dataclass
class AttentionState:
    """
    Attention maps of one forward pass, one entry per block.

    full_attention[l] has shape (..., H, n, n); masks[l] is the (n, n) mask
    or None when the block ran unmasked; masked_attention[l] = A * Z.
    """

    full_attention: List[np.ndarray] = field(default_factory=list)
    masks: List[Optional[np.ndarray]] = field(default_factory=list)
    masked_attention: List[np.ndarray] = field(default_factory=list)


@dataclass
class ForwardResult:
    """Output representation F, attention state, and each block's input."""

    output: Tensor
    state: AttentionState
    block_inputs: List[Tensor]
    keep: np.ndarray
    nonpad: np.ndarray


@dataclass
class BCEResult:
    """BCE objective split into its data term and weight decay."""

    total: Tensor
    data_term: Tensor
    decay: float
    forward: ForwardResult


def block_key(block: int, name: str) -> str:
    return f"block{block}.{name}"


def init_params(config: ModelConfig, rng: np.random.Generator) -> ModelParams:
    """
    Draw initial backbone parameters.

    Args:
        config: Backbone config
        rng: Random generator

    Returns:
        Named parameter arrays; row 0 of the item table is zero
    """
    d = config.dim
    scale = 1.0 / np.sqrt(d)
    params: ModelParams = {}
    item_table = rng.normal(0.0, scale, size=(config.num_items + 1, d))
    item_table[0] = 0.0
    params["item_table"] = item_table
    params["pos_table"] = rng.normal(0.0, scale, size=(config.max_len, d))
    for block in range(config.num_blocks):
        for name in ("wq", "wk", "wv", "w1", "w2"):
            params[block_key(block, name)] = rng.normal(0.0, scale, size=(d, d))
        params[block_key(block, "b1")] = np.zeros(d)
        params[block_key(block, "b2")] = np.zeros(d)
        params[block_key(block, "ln1_gain")] = np.ones(d)
        params[block_key(block, "ln1_bias")] = np.zeros(d)
        params[block_key(block, "ln2_gain")] = np.ones(d)
        params[block_key(block, "ln2_bias")] = np.zeros(d)
    return params


def decayed_param_names() -> Tuple[str, ...]:
    """Parameters covered by weight decay: the embedding tables."""
    return ("item_table", "pos_table")


def bind_params(tape: GradTape, params: ModelParams) -> Dict[str, Tensor]:
    """Watch every parameter on the tape."""
    return {name: tape.watch(name, array) for name, array in params.items()}


def bind_constants(tape: GradTape, params: ModelParams) -> Dict[str, Tensor]:
    """Wrap parameters as constants for gradient-free evaluation."""
    return {name: tape.constant(array) for name, array in params.items()}


@functools.lru_cache(maxsize=32)
def head_selectors(dim: int, num_heads: int) -> Tuple[np.ndarray, ...]:
    """(d, d/H) column selectors that split a projection into heads."""
    head_dim = dim // num_heads
    selectors = []
    for head in range(num_heads):
        selector = np.zeros((dim, head_dim))
        selector[head * head_dim:(head + 1) * head_dim, :] = np.eye(head_dim)
        selector.flags.writeable = False
        selectors.append(selector)
    return tuple(selectors)


def attention_keep(ids: np.ndarray) -> np.ndarray:
    """
    Boolean (B, n, n) matrix of allowed query->key links.

    A query u may attend to key v iff v <= u and v is a real item; padding
    queries attend only to themselves.
    """
    n = ids.shape[-1]
    causal = np.tril(np.ones((n, n), dtype=bool))
    diagonal = np.eye(n, dtype=bool)
    real_keys = (ids != 0)[..., None, :]
    return causal & (real_keys | diagonal)


def _as_batch(ids: Any) -> np.ndarray:
    ids = np.asarray(ids, dtype=np.int64)
    if ids.ndim == 1:
        ids = ids[None, :]
    return ids


def dropout(tape: GradTape, x: Tensor, rate: float, training: bool, rng: Optional[np.random.Generator]) -> Tensor:
    """Inverted dropout; identity outside training."""
    if not training or rate <= 0.0:
        return x
    if rng is None:
        raise ValueError("Dropout during training needs a random generator")
    keep = rng.random(x.shape) >= rate
    return tape.multiply(x, tape.constant(keep / (1.0 - rate)))


def embed_sequence(tape: GradTape, ids: Any, bound: Dict[str, Tensor], config: ModelConfig) -> Tensor:
    """
    Order-aware input embedding E + P with padding rows left at zero.

    Args:
        tape: Tape to record on
        ids: (B, n) or (n,) item ids, 0 for left padding
        bound: Parameters bound on the tape
        config: Backbone config

    Returns:
        (B, n, d) embedding tensor

    Raises:
        DataError: If an id lies outside [0, |I|]
    """
    ids = _as_batch(ids)
    if ids.shape[-1] != config.max_len:
        raise DataError(f"Sequence length {ids.shape[-1]} does not match max_len {config.max_len}")
    if ids.size and (ids.min() < 0 or ids.max() > config.num_items):
        raise DataError(f"Item id out of range [0, {config.num_items}]: min={ids.min()} max={ids.max()}")
    gathered = tape.embedding_gather(bound["item_table"], ids)
    positioned = tape.add(gathered, bound["pos_table"])
    nonpad = (ids != 0)[..., None].astype(np.float64)
    return tape.multiply(positioned, tape.constant(nonpad))


def attention_layer(
    tape: GradTape,
    x: Tensor,
    block: int,
    bound: Dict[str, Tensor],
    config: ModelConfig,
    keep: np.ndarray,
    mask: Optional[np.ndarray] = None,
    training: bool = False,
    rng: Optional[np.random.Generator] = None,
) -> Tuple[Tensor, Tuple[np.ndarray, Optional[np.ndarray], np.ndarray]]:
    """
    Multi-head causal self-attention with an optional elementwise mask.

    Per head: A = softmax((Q K^T) / sqrt(d/H) with forbidden links filled by
    -1e9), M = A * Z, output = concat over heads of M V. One mask is shared
    by all heads of the block.

    Returns:
        Output tensor shaped like x, and (A, Z, M) with A and M stacked over
        heads on axis -3
    """
    queries = tape.matmul(x, bound[block_key(block, "wq")])
    keys = tape.matmul(x, bound[block_key(block, "wk")])
    values = tape.matmul(x, bound[block_key(block, "wv")])
    mask_tensor = tape.constant(mask) if mask is not None else None
    inv_scale = 1.0 / np.sqrt(config.head_dim)

    output = None
    full_heads, masked_heads = [], []
    for selector in head_selectors(config.dim, config.num_heads):
        select = tape.constant(selector)
        q = tape.matmul(queries, select)
        k = tape.matmul(keys, select)
        v = tape.matmul(values, select)
        scores = tape.scale(tape.matmul(q, tape.transpose(k)), inv_scale)
        attention = tape.softmax_rows(tape.masked_fill(scores, keep, CAUSAL_FILL))
        masked = tape.multiply(attention, mask_tensor) if mask_tensor is not None else attention
        full_heads.append(attention.data)
        masked_heads.append(masked.data)
        if config.attention_dropout:
            masked = dropout(tape, masked, config.dropout_rate, training, rng)
        head_out = tape.matmul(tape.matmul(masked, v), tape.constant(selector.T))
        output = head_out if output is None else tape.add(output, head_out)

    return output, (np.stack(full_heads, axis=-3), mask, np.stack(masked_heads, axis=-3))


def ffn(tape: GradTape, h: Tensor, block: int, bound: Dict[str, Tensor]) -> Tensor:
    """Point-wise feed-forward: ReLU(h W1 + b1) W2 + b2."""
    hidden = tape.relu(tape.add(tape.matmul(h, bound[block_key(block, "w1")]), bound[block_key(block, "b1")]))
    return tape.add(tape.matmul(hidden, bound[block_key(block, "w2")]), bound[block_key(block, "b2")])


def transformer_block(
    tape: GradTape,
    x: Tensor,
    block: int,
    bound: Dict[str, Tensor],
    config: ModelConfig,
    keep: np.ndarray,
    nonpad: np.ndarray,
    mask: Optional[np.ndarray] = None,
    training: bool = False,
    rng: Optional[np.random.Generator] = None,
) -> Tuple[Tensor, Tuple[np.ndarray, Optional[np.ndarray], np.ndarray]]:
    """
    One post-norm block: attention and FFN sub-layers, each wrapped in
    residual + dropout + layer norm; padding rows are zeroed on exit.
    """
    attended, attention_slice = attention_layer(tape, x, block, bound, config, keep, mask, training, rng)
    attended = dropout(tape, attended, config.dropout_rate, training, rng)
    x = tape.layer_norm(tape.add(x, attended), bound[block_key(block, "ln1_gain")], bound[block_key(block, "ln1_bias")])
    transformed = dropout(tape, ffn(tape, x, block, bound), config.dropout_rate, training, rng)
    x = tape.layer_norm(tape.add(x, transformed), bound[block_key(block, "ln2_gain")], bound[block_key(block, "ln2_bias")])
    return tape.multiply(x, tape.constant(nonpad)), attention_slice


def transformer_forward(
    tape: GradTape,
    x: Tensor,
    ids: Any,
    bound: Dict[str, Tensor],
    config: ModelConfig,
    masks: Optional[Sequence[Optional[np.ndarray]]] = None,
    training: bool = False,
    rng: Optional[np.random.Generator] = None,
) -> ForwardResult:
    """
    Run the stacked blocks over an embedded sequence batch.

    Args:
        tape: Tape to record on
        x: (B, n, d) embedded input
        ids: (B, n) item ids (padding and causal structure)
        bound: Parameters bound on the tape
        config: Backbone config
        masks: One (n, n) mask per block, or None for unmasked attention
        training: Enables dropout
        rng: Generator for dropout

    Returns:
        ForwardResult with F^(L), attention state and block inputs
    """
    ids = _as_batch(ids)
    if masks is not None and len(masks) != config.num_blocks:
        raise ConfigError(f"Expected {config.num_blocks} masks, got {len(masks)}")
    keep = attention_keep(ids)
    nonpad = (ids != 0)[..., None].astype(np.float64)
    state = AttentionState()
    block_inputs: List[Tensor] = []
    for block in range(config.num_blocks):
        block_inputs.append(x)
        mask = masks[block] if masks is not None else None
        x, (full, used_mask, masked) = transformer_block(tape, x, block, bound, config, keep, nonpad, mask, training, rng)
        state.full_attention.append(full)
        state.masks.append(used_mask)
        state.masked_attention.append(masked)
    return ForwardResult(output=x, state=state, block_inputs=block_inputs, keep=keep, nonpad=nonpad)


def score(f_t: np.ndarray, item_id: int, params: ModelParams) -> float:
    """Relevance r = <F_t, T_i> of one item at one position."""
    table = params["item_table"]
    if not 0 <= item_id < table.shape[0]:
        raise DataError(f"Item id {item_id} out of range [0, {table.shape[0] - 1}]")
    return float(np.dot(np.asarray(f_t, dtype=np.float64), table[item_id]))


def check_negatives(negatives: np.ndarray, histories: Sequence[Set[int]]) -> None:
    """Raise DataError when a sampled negative belongs to its user's history."""
    for row, (sampled, history) in enumerate(zip(np.asarray(negatives), histories)):
        overlap = {int(item) for item in sampled if item != 0} & set(history)
        if overlap:
            raise DataError(f"Negative samples {sorted(overlap)} of row {row} occur in the user's sequence")


def bce_loss(
    tape: GradTape,
    bound: Dict[str, Tensor],
    inputs: Any,
    targets: Any,
    negatives: Any,
    config: ModelConfig,
    masks: Optional[Sequence[Optional[np.ndarray]]] = None,
    training: bool = False,
    rng: Optional[np.random.Generator] = None,
    histories: Optional[Sequence[Set[int]]] = None,
) -> BCEResult:
    """
    Binary cross-entropy over shifted targets and sampled negatives.

    -sum_t [log sigmoid(r_pos) + log(1 - sigmoid(r_neg))] over non-padding
    targets, plus weight_decay * (||T||^2 + ||P||^2).

    Args:
        tape: Tape to record on
        bound: Parameters bound on the tape
        inputs: (B, n) input ids
        targets: (B, n) next-item ids, 0 where excluded
        negatives: (B, n) negative ids, one per position
        config: Backbone config
        masks: Optional per-block masks
        training: Enables dropout
        rng: Generator for dropout
        histories: When given, negatives are checked against these item sets

    Returns:
        BCEResult

    Raises:
        DataError: On out-of-range ids, or a negative inside the history
    """
    inputs = _as_batch(inputs)
    targets = _as_batch(targets)
    negatives = _as_batch(negatives)
    if histories is not None:
        check_negatives(negatives, histories)

    embedded = embed_sequence(tape, inputs, bound, config)
    forward = transformer_forward(tape, embedded, inputs, bound, config, masks, training, rng)
    features = forward.output

    positive = tape.embedding_gather(bound["item_table"], targets)
    negative = tape.embedding_gather(bound["item_table"], negatives)
    pos_logits = tape.reduce_sum(tape.multiply(features, positive), axis=-1)
    neg_logits = tape.reduce_sum(tape.multiply(features, negative), axis=-1)
    log_likelihood = tape.add(
        tape.log(tape.sigmoid(pos_logits)),
        tape.log(tape.sigmoid(tape.scale(neg_logits, -1.0))),
    )
    weight = tape.constant((targets != 0).astype(np.float64))
    data_term = tape.scale(tape.reduce_sum(tape.multiply(log_likelihood, weight)), -1.0)

    total = data_term
    decay = 0.0
    if config.weight_decay > 0:
        norms = None
        for name in decayed_param_names():
            term = tape.squared_norm(bound[name])
            norms = term if norms is None else tape.add(norms, term)
        decay_term = tape.scale(norms, config.weight_decay)
        decay = decay_term.item()
        total = tape.add(data_term, decay_term)
    return BCEResult(total=total, data_term=data_term, decay=decay, forward=forward)


def sequence_representations(
    params: ModelParams,
    ids: Any,
    config: ModelConfig,
    masks: Optional[Sequence[Optional[np.ndarray]]] = None,
) -> np.ndarray:
    """
    Final-position representation of each sequence, without recording.

    Args:
        params: Backbone parameters
        ids: (B, n) left-padded input ids
        config: Backbone config
        masks: Optional per-block masks (inference masks at evaluation)

    Returns:
        (B, d) array of F at position n-1
    """
    tape = GradTape(record=False)
    bound = bind_constants(tape, params)
    ids = _as_batch(ids)
    embedded = embed_sequence(tape, ids, bound, config)
    forward = transformer_forward(tape, embedded, ids, bound, config, masks, training=False)
    last = tape.row_select(forward.output, [config.max_len - 1])
    return np.array(last.data[..., 0, :])
