"""Selection between the compiled filter engine and the pure-Python path.

The compiled extension is optional: when it is missing (or disabled via the
SDEMEM_BACKEND=pure environment variable) every filter falls back to the
general NumPy implementation, which also serves models without a compiled
kernel. Callers can force a path per call for benchmarking and
cross-validation.
"""

from __future__ import annotations

import os

from ..errors import ConfigError

try:
    from .. import _engine_cy as _compiled
except ImportError:
    _compiled = None

__all__ = ["have_compiled", "resolve_backend", "default_backend"]


def have_compiled():
    return _compiled is not None


def default_backend():
    if os.environ.get("SDEMEM_BACKEND", "").lower() == "pure":
        return None
    return _compiled


def resolve_backend(backend):
    """Map a backend request to the compiled engine module or None (pure).

    backend: None for the default selection, "pure", or "compiled".
    """
    if backend is None:
        return default_backend()
    if backend == "pure":
        return None
    if backend == "compiled":
        if _compiled is None:
            raise ConfigError("compiled engine requested but not available")
        return _compiled
    raise ConfigError(f"unknown backend {backend!r}")
