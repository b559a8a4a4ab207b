"""
File-backed run store and run-directory helpers.

Each record is one JSON file named after its reference id. Writes go to a
temporary file first and are renamed into place, so a reader never sees a
partial record even when sweep cells run as separate processes.
"""

import hashlib
import json
import logging
import os
import re
import time
from typing import Any, Dict, Optional

from core.checkpoint import atomic_write_text
from .base import RunManifest, RunStore

logger = logging.getLogger(__name__)

MANIFEST_FILE = "manifest.json"
_SAFE_ID = re.compile(r"[^A-Za-z0-9_.=-]+")


class FileRunStore(RunStore):
    """
    Run store persisting records as JSON files in a directory.
    """

    def __init__(self, directory: str):
        super().__init__(directory)
        self.directory = directory
        os.makedirs(directory, exist_ok=True)

    def _path(self, reference_id: str) -> str:
        return os.path.join(self.directory, f"{_SAFE_ID.sub('_', reference_id)}.json")

    def add(self, data: Dict[str, Any], **kwargs) -> str:
        """
        Store a record.

        Args:
            data: JSON-serialisable record
            **kwargs: Additional parameters:
                - reference_id: Id to store under (defaults to a content hash)

        Returns:
            Reference id
        """
        text = json.dumps(data, sort_keys=True, indent=2)
        reference_id = kwargs.get("reference_id") or hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]
        atomic_write_text(self._path(reference_id), text)
        return reference_id

    def get(self, reference_id: str) -> Optional[Dict[str, Any]]:
        path = self._path(reference_id)
        if not os.path.exists(path):
            return None
        try:
            with open(path) as handle:
                return json.load(handle)
        except ValueError as e:
            logger.warning(f"Ignoring unreadable record {path}: {str(e)}")
            return None


def fingerprint_file(path: str) -> str:
    """sha256 of a file's bytes."""
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def create_run_directory(root: str, command: str) -> str:
    """Create ``<root>/<timestamp>-<command>/``, adding a suffix when taken."""
    stamp = time.strftime("%Y%m%d-%H%M%S")
    base = os.path.join(root, f"{stamp}-{command}")
    path = base
    suffix = 1
    while os.path.exists(path):
        path = f"{base}-{suffix}"
        suffix += 1
    os.makedirs(path)
    return path


def write_manifest(run_dir: str, manifest: RunManifest) -> str:
    """Write manifest.json atomically."""
    path = os.path.join(run_dir, MANIFEST_FILE)
    atomic_write_text(path, json.dumps(manifest.to_dict(), sort_keys=True, indent=2))
    return path


def read_manifest(run_dir: str) -> RunManifest:
    with open(os.path.join(run_dir, MANIFEST_FILE)) as handle:
        return RunManifest.from_dict(json.load(handle))
