"""Numerical verification of CR and almost Hermitian geometry on truncated Taylor jets."""

__version__ = "0.1.0"

from .errors import CRForgeError  # noqa: E402
from .jet import Jet  # noqa: E402
from .models import Registry, default_registry, get_model  # noqa: E402

__all__ = ["CRForgeError", "Jet", "Registry", "__version__", "default_registry", "get_model"]
