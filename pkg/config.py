"""
Configuration utilities for recdenoiser.

This module loads defaults for the model, training, data, evaluation and
run-directory settings from environment variables (and a .env file).
"""

import os
import logging
from typing import Dict, Any
from dotenv import load_dotenv

# Configure logging
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)


def _flag(name: str, default: str) -> bool:
    return os.getenv(name, default).lower() in ("true", "1", "t")


def get_config() -> Dict[str, Any]:
    """
    Load configuration settings from environment variables.

    Returns:
        Dictionary containing configuration settings
    """
    # Load environment variables from .env file
    load_dotenv()

    log_level = os.getenv("LOG_LEVEL", "INFO").upper()
    if log_level not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
        logger.warning(f"Unknown LOG_LEVEL '{log_level}', using INFO")
        log_level = "INFO"

    config = {
        "model": {
            "max_len": int(os.getenv("MAX_LEN", 25)),
            "dim": int(os.getenv("HIDDEN_DIM", 50)),
            "num_blocks": int(os.getenv("NUM_BLOCKS", 2)),
            "num_heads": int(os.getenv("NUM_HEADS", 2)),
            "dropout_rate": float(os.getenv("DROPOUT_RATE", 0.2)),
            "weight_decay": float(os.getenv("WEIGHT_DECAY", 0.0)),
            "attention_dropout": _flag("ATTENTION_DROPOUT", "False"),
        },
        "train": {
            "estimator": os.getenv("ESTIMATOR", "arm"),
            "beta": float(os.getenv("BETA", 1e-2)),
            "gamma": float(os.getenv("GAMMA", 1e-3)),
            "learning_rate": float(os.getenv("LEARNING_RATE", 1e-3)),
            "mask_learning_rate": float(os.getenv("MASK_LEARNING_RATE", 1e-2)),
            "batch_size": int(os.getenv("BATCH_SIZE", 128)),
            "max_epochs": int(os.getenv("MAX_EPOCHS", 200)),
            "eval_every": int(os.getenv("EVAL_EVERY", 5)),
            "patience": int(os.getenv("PATIENCE", 20)),
            "seed": int(os.getenv("SEED", 42)),
            "jacobian_probes": int(os.getenv("JACOBIAN_PROBES", 1)),
            "jvp_eps": float(os.getenv("JVP_EPS", 1e-3)),
            "mask_init": float(os.getenv("MASK_INIT", 2.0)),
        },
        "data": {
            "min_user_interactions": int(os.getenv("MIN_USER_INTERACTIONS", 3)),
            "min_item_interactions": int(os.getenv("MIN_ITEM_INTERACTIONS", 0)),
        },
        "eval": {
            "top_n": int(os.getenv("TOP_N", 10)),
            "num_negatives": int(os.getenv("NUM_NEGATIVES", 100)),
            "eval_seed": int(os.getenv("EVAL_SEED", 2022)),
        },
        "runs": {
            "root": os.getenv("RECDENOISER_RUN_ROOT", "experiments"),
        },
        "logging": {
            "level": log_level,
        },
    }

    return config
