"""
Variant registry for recdenoiser.

Maps variant names to AttentionVariant classes, discovers the classes
defined in this package, and builds variants for a backbone shape from
user options.
"""

import os
import importlib
import inspect
import logging
from typing import Any, Dict, Optional, Type

from core.exceptions import ConfigError
from .base import AttentionVariant

# Configure logging
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)


class VariantRegistry:
    """
    Registry for attention-variant classes.
    """

    def __init__(self):
        """Initialize an empty variant registry."""
        self.variants: Dict[str, Type[AttentionVariant]] = {}
        self.variant_modules = {}

    def register_variant(self, variant_cls: Type[AttentionVariant]) -> None:
        """
        Register a variant class under its name.

        Args:
            variant_cls: AttentionVariant subclass

        Raises:
            ValueError: If a variant with the same name is already registered
        """
        if variant_cls.name in self.variants:
            if self.variants[variant_cls.name] is variant_cls:
                return
            raise ValueError(f"Variant with name '{variant_cls.name}' is already registered")
        logger.debug(f"Registering variant: {variant_cls.name}")
        self.variants[variant_cls.name] = variant_cls

    def get_variant(self, name: str) -> Optional[Type[AttentionVariant]]:
        return self.variants.get(name)

    def create(self, name: str, num_blocks: int, max_len: int, **options: Any) -> AttentionVariant:
        """
        Build a variant, passing only the options its constructor accepts.

        Args:
            name: Registered variant name
            num_blocks: Number of transformer blocks
            max_len: Sequence length n
            **options: Candidate constructor options (e.g. from TrainConfig)

        Returns:
            Variant instance

        Raises:
            ConfigError: If the variant is not registered
        """
        variant_cls = self.get_variant(name)
        if variant_cls is None:
            raise ConfigError(f"Variant '{name}' not found in registry, expected one of {sorted(self.variants)}")
        accepted = inspect.signature(variant_cls.__init__).parameters
        kwargs = {key: value for key, value in options.items() if key in accepted}
        return variant_cls(num_blocks, max_len, **kwargs)

    def list_variants(self) -> Dict[str, Dict[str, Any]]:
        """Schema of every registered variant, keyed by name."""
        return {name: cls.get_schema() for name, cls in sorted(self.variants.items())}

    def discover_variants(self, variants_dir: Optional[str] = None) -> None:
        """
        Register every concrete AttentionVariant defined in the package.

        Args:
            variants_dir: Directory to scan (defaults to this package)
        """
        if variants_dir is None:
            variants_dir = os.path.dirname(os.path.abspath(__file__))

        for filename in sorted(os.listdir(variants_dir)):
            if filename.endswith('.py') and filename not in ['__init__.py', 'base.py', 'variant_registry.py']:
                module_path = f"variants.{filename[:-3]}"
                try:
                    module = self.variant_modules.get(module_path) or importlib.import_module(module_path)
                    self.variant_modules[module_path] = module
                    for _, obj in inspect.getmembers(module, inspect.isclass):
                        if issubclass(obj, AttentionVariant) and obj.name and not inspect.isabstract(obj):
                            self.register_variant(obj)
                except Exception as e:
                    logger.error(f"Error loading module {module_path}: {str(e)}")


# Create a singleton instance of the variant registry
registry = VariantRegistry()
registry.discover_variants()
