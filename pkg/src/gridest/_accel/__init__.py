"""Numeric kernel backend selection.

The compiled Cython core is preferred; the pure-numpy fallback is used when
the extension is missing or when the environment variable GRIDEST_PURE is set
to a non-empty value. Both expose the same functions with matching semantics.
"""

from __future__ import annotations

import os

from . import fallback

if os.environ.get("GRIDEST_PURE"):
    _impl = fallback
    COMPILED = False
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]

        COMPILED = True
    except ImportError:
        _impl = fallback
        COMPILED = False

injections_dense = _impl.injections_dense
polar_jacobian = _impl.polar_jacobian
edge_injections_fwd = _impl.edge_injections_fwd
edge_injections_vjp = _impl.edge_injections_vjp


def backend_name() -> str:
    return "compiled" if COMPILED else "pure-python"
