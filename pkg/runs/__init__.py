"""
Run records for recdenoiser: manifests and the file-backed run store.
"""

from .base import RunManifest, RunStore
from .filesystem import FileRunStore, create_run_directory, fingerprint_file, read_manifest, write_manifest

__all__ = [
    'RunManifest', 'RunStore', 'FileRunStore',
    'create_run_directory', 'fingerprint_file', 'read_manifest', 'write_manifest',
]
