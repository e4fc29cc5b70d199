"""Kernel backend selection.

The compiled extension is preferred when importable; the pure-Python twin is
the fallback. Set KINEX_BACKEND=python (or =compiled) to force a choice;
forcing `compiled` when the extension is missing raises at import.
"""

from __future__ import annotations

import os

from . import _pykernels

_forced = os.environ.get("KINEX_BACKEND", "").strip().lower()

if _forced == "python":
    _impl = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:
        if _forced == "compiled":
            raise
        _impl = _pykernels
        BACKEND = "python"

run_pairwise = _impl.run_pairwise


def backend_name() -> str:
    """Name of the active kernel backend: 'compiled' or 'python'."""
    return BACKEND
