"""
JSON checkpoints of a training run.

A checkpoint holds the model and training configs, all parameter tensors
(backbone and mask logits), optimizer moments, and the training-loop state.
The file is one JSON document with ``config`` and ``tensors`` keys; each
tensor is stored as ``{"shape": [...], "data": [...]}`` with full float
precision, keys are sorted and the document carries a sha256 checksum, so
saving a loaded checkpoint reproduces the file byte for byte.
"""

import hashlib
import json
import logging
import os
import tempfile
from dataclasses import dataclass, field
from typing import Any, Dict, Optional

import numpy as np

from .exceptions import CheckpointError, ConfigError
from .model import ModelConfig, ModelParams
from .trainer import TrainConfig

logger = logging.getLogger(__name__)

FORMAT_VERSION = 2
TENSOR_REF = "tensor"


@dataclass
class Checkpoint:
    model_config: ModelConfig
    train_config: TrainConfig
    params: ModelParams
    mask_params: Dict[str, np.ndarray]
    epoch: int
    trainer_state: Dict[str, Any] = field(default_factory=dict)
    loop_state: Dict[str, Any] = field(default_factory=dict)
    data_info: Dict[str, Any] = field(default_factory=dict)

    def evaluation_params(self) -> ModelParams:
        """Best validation parameters when recorded, else the latest ones."""
        return self.loop_state.get("best_params") or self.params

    def evaluation_mask_params(self) -> Dict[str, np.ndarray]:
        best = self.loop_state.get("best_mask_params")
        return best if best is not None and self.loop_state.get("best_params") else self.mask_params


def _tensor_entry(array: np.ndarray) -> Dict[str, Any]:
    array = np.asarray(array, dtype=np.float64)
    return {"shape": list(array.shape), "data": array.reshape(-1).tolist()}


def _extract(value: Any, name: str, tensors: Dict[str, Any]) -> Any:
    """Move arrays nested in ``value`` into ``tensors``, leaving named references."""
    if isinstance(value, np.ndarray):
        tensors[name] = _tensor_entry(value)
        return {TENSOR_REF: name}
    if isinstance(value, dict):
        return {str(key): _extract(item, f"{name}/{key}", tensors) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_extract(item, f"{name}/{index}", tensors) for index, item in enumerate(value)]
    if isinstance(value, np.generic):
        return value.item()
    return value


def _decode_tensor(name: str, entry: Any) -> np.ndarray:
    if not isinstance(entry, dict) or "shape" not in entry or "data" not in entry:
        raise CheckpointError(f"Tensor '{name}' needs 'shape' and 'data'")
    shape = tuple(int(extent) for extent in entry["shape"])
    data = entry["data"]
    if int(np.prod(shape)) != len(data):
        raise CheckpointError(f"Tensor '{name}' has shape {shape} but {len(data)} values")
    array = np.array(data, dtype=np.float64).reshape(shape)
    if not np.all(np.isfinite(array)):
        raise CheckpointError(f"Tensor '{name}' contains non-finite values")
    return array


def _resolve(value: Any, tensors: Dict[str, np.ndarray]) -> Any:
    if isinstance(value, dict):
        if set(value) == {TENSOR_REF} and isinstance(value[TENSOR_REF], str):
            if value[TENSOR_REF] not in tensors:
                raise CheckpointError(f"Missing tensor '{value[TENSOR_REF]}'")
            return tensors[value[TENSOR_REF]]
        return {key: _resolve(item, tensors) for key, item in value.items()}
    if isinstance(value, list):
        return [_resolve(item, tensors) for item in value]
    return value


def _group(tensors: Dict[str, np.ndarray], prefix: str) -> Dict[str, np.ndarray]:
    marker = prefix + "/"
    return {name[len(marker):]: array for name, array in tensors.items() if name.startswith(marker)}


def _canonical(document: Dict[str, Any]) -> str:
    return json.dumps(document, sort_keys=True, separators=(",", ":"), allow_nan=False)


def document_checksum(document: Dict[str, Any]) -> str:
    """sha256 of the canonical document without its checksum key."""
    body = {key: value for key, value in document.items() if key != "checksum"}
    return hashlib.sha256(_canonical(body).encode("utf-8")).hexdigest()


def atomic_write_text(path: str, text: str) -> None:
    """Write to a temporary file in the target directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    handle, temporary = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(handle, "w") as out:
            out.write(text)
        os.replace(temporary, path)
    except BaseException:
        if os.path.exists(temporary):
            os.remove(temporary)
        raise


def save_checkpoint(path: str, checkpoint: Checkpoint) -> str:
    """
    Write a checkpoint atomically.

    The document has top-level ``config`` and ``tensors`` keys. Model
    parameters are named ``params/<name>`` and mask logits ``mask/<name>``;
    arrays inside the trainer and loop state become tensors under their own
    path and the state keeps a ``{"tensor": name}`` reference.

    Args:
        path: Output file
        checkpoint: Run state

    Returns:
        The path written
    """
    tensors: Dict[str, Any] = {}
    for name, array in checkpoint.params.items():
        tensors[f"params/{name}"] = _tensor_entry(array)
    for name, array in checkpoint.mask_params.items():
        tensors[f"mask/{name}"] = _tensor_entry(array)
    document = {
        "version": FORMAT_VERSION,
        "config": {
            "model": checkpoint.model_config.to_dict(),
            "train": checkpoint.train_config.to_dict(),
            "data": _extract(checkpoint.data_info, "data_info", tensors),
        },
        "epoch": int(checkpoint.epoch),
        "trainer_state": _extract(checkpoint.trainer_state, "trainer_state", tensors),
        "loop_state": _extract(checkpoint.loop_state, "loop_state", tensors),
        "tensors": tensors,
    }
    try:
        document["checksum"] = document_checksum(document)
        text = _canonical(document)
    except ValueError as e:
        raise CheckpointError(f"Cannot save non-finite values: {str(e)}")
    atomic_write_text(path, text)
    logger.info(f"Saved checkpoint for epoch {checkpoint.epoch} to {path}")
    return path


def load_checkpoint(path: str, expected_model: Optional[ModelConfig] = None) -> Checkpoint:
    """
    Read and verify a checkpoint.

    Args:
        path: Checkpoint file
        expected_model: When given, every model config field must match

    Returns:
        Checkpoint

    Raises:
        CheckpointError: On unreadable files, checksum mismatch, bad tensors
            or a config mismatch (naming the field)
    """
    try:
        with open(path) as handle:
            document = json.load(handle)
    except (OSError, ValueError) as e:
        raise CheckpointError(f"Cannot read checkpoint {path}: {str(e)}")
    if not isinstance(document, dict) or not {"config", "tensors", "checksum"} <= set(document):
        raise CheckpointError(f"Checkpoint {path} is missing its config, tensors or checksum")
    if document_checksum(document) != document["checksum"]:
        raise CheckpointError(f"Checkpoint checksum mismatch in {path}")
    if document.get("version") != FORMAT_VERSION:
        raise CheckpointError(f"Unsupported checkpoint version {document.get('version')}")
    if not isinstance(document["tensors"], dict):
        raise CheckpointError(f"Checkpoint {path} has malformed tensors")

    tensors = {name: _decode_tensor(name, entry) for name, entry in document["tensors"].items()}
    config = document["config"]
    try:
        model_config = ModelConfig.from_dict(config["model"])
        train_config = TrainConfig.from_dict(config["train"])
    except (ConfigError, KeyError, TypeError) as e:
        raise CheckpointError(f"Invalid config in checkpoint {path}: {str(e)}")

    if expected_model is not None:
        stored = model_config.to_dict()
        for name, value in expected_model.to_dict().items():
            if stored.get(name) != value:
                raise CheckpointError(f"Checkpoint config mismatch on field '{name}': checkpoint has {stored.get(name)}, expected {value}")

    params = _group(tensors, "params")
    table = params.get("item_table")
    if table is None or table.shape != (model_config.num_items + 1, model_config.dim):
        raise CheckpointError(f"Checkpoint item table does not match num_items={model_config.num_items}, dim={model_config.dim}")

    try:
        epoch = int(document["epoch"])
    except (KeyError, TypeError, ValueError):
        raise CheckpointError(f"Checkpoint {path} has no valid epoch")

    return Checkpoint(
        model_config=model_config,
        train_config=train_config,
        params=params,
        mask_params=_group(tensors, "mask"),
        epoch=epoch,
        trainer_state=_resolve(document.get("trainer_state", {}), tensors),
        loop_state=_resolve(document.get("loop_state", {}), tensors),
        data_info=_resolve(config.get("data", {}), tensors),
    )
