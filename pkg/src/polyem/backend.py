"""Import-time selection of the stepping core.

The compiled extension is used when present; POLYEM_BACKEND=python forces
the pure-python loops (e.g. for the benchmark), POLYEM_BACKEND=compiled
makes a missing extension a hard error.
"""

from __future__ import annotations

import os

try:
    from . import _kernels
except ImportError:  # pragma: no cover - depends on build
    _kernels = None

_requested = os.environ.get("POLYEM_BACKEND", "").lower()
if _requested == "python":
    _kernels = None
elif _requested == "compiled" and _kernels is None:
    raise ImportError("POLYEM_BACKEND=compiled but the polyem._kernels extension is not built")
elif _requested not in ("", "python", "compiled"):
    raise ValueError(f"POLYEM_BACKEND must be 'python' or 'compiled', got {_requested!r}")


def kernels():
    """The compiled kernel module, or None when running pure python."""
    return _kernels


def active_backend() -> str:
    return "compiled" if _kernels is not None else "python"
