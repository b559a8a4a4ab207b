"""
Base run-store interface for recdenoiser.

A run store keeps JSON records (run manifests, sweep cells) under reference
ids. It is how sweeps remember finished cells and how every command leaves a
manifest behind.
"""

from abc import ABC, abstractmethod
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional


@dataclass
class RunManifest:
    """
    What a command did: resolved config, seed, dataset fingerprint, the
    artifacts it wrote and how long it took.
    """

    command: str
    config: Dict[str, Any]
    seed: int
    dataset_fingerprint: Optional[str] = None
    artifacts: Dict[str, str] = field(default_factory=dict)
    started_at: float = 0.0
    wall_clock_seconds: float = 0.0
    status: str = "running"
    tags: List[str] = field(default_factory=list)
    results: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RunManifest":
        return cls(**data)


class RunStore(ABC):
    """
    Abstract base class for run stores.
    """

    def __init__(self, store_id: str):
        """
        Initialize a store with a unique identifier.

        Args:
            store_id: Identifier of this store (for file stores, its directory)
        """
        self.store_id = store_id

    @abstractmethod
    def add(self, data: Dict[str, Any], **kwargs) -> str:
        """
        Store a record and return its reference id.

        Args:
            data: JSON-serialisable record
            **kwargs: Store-specific parameters (e.g. reference_id)

        Returns:
            Reference id of the stored record
        """
        pass

    @abstractmethod
    def get(self, reference_id: str) -> Optional[Dict[str, Any]]:
        """
        Retrieve a record by reference id.

        Returns:
            The record, or None if not found
        """
        pass

