"""Hot-kernel backend selection.

The compiled Cython extension is used when present; otherwise the pure-numpy
fallback. Set LSEVO_KERNELS=python or LSEVO_KERNELS=compiled to force one
(compiled raises if the extension is not built).
"""

from __future__ import annotations

import os

from . import _fallback

_choice = os.environ.get("LSEVO_KERNELS", "").strip().lower()

if _choice == "python":
    _impl = _fallback
elif _choice == "compiled":
    from . import _compiled as _impl
elif _choice == "":
    try:
        from . import _compiled as _impl
    except ImportError:
        _impl = _fallback
else:
    raise ImportError(f"LSEVO_KERNELS={_choice!r} not understood (use 'compiled' or 'python')")

BACKEND = _impl.BACKEND
sqdist_matrix = _impl.sqdist_matrix
greedy_select = _impl.greedy_select


def backend_name() -> str:
    """Active backend: 'compiled' or 'python'."""
    return BACKEND
