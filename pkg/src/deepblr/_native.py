"""Kernel backend selection.

The hot loops live twice: a compiled Cython extension (``deepblr._core``)
and a pure-NumPy fallback (``deepblr._kernels_py``).  The compiled module
is preferred when it imported cleanly; setting the environment variable
DEEPBLR_PURE to a non-empty value other than "0" forces the fallback.

Kernels are resolved per attribute, so a compiled build that predates a
newly added kernel still works for everything else.
"""

from __future__ import annotations

import os

from . import _kernels_py

_core = None
if os.environ.get("DEEPBLR_PURE", "").strip() in ("", "0"):
    try:
        from . import _core  # type: ignore[no-redef]
    except ImportError:
        _core = None

BACKEND = "compiled" if _core is not None else "pure"


def backend_name() -> str:
    """Name of the active kernel backend: "compiled" or "pure"."""
    return BACKEND


def __getattr__(name):
    if _core is not None and hasattr(_core, name):
        return getattr(_core, name)
    return getattr(_kernels_py, name)
