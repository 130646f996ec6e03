"""Kernel backend selection.

The compiled extension is preferred; the numpy fallback is used when the
extension was not built or when ``SCORELAB_PURE_PYTHON`` is set (useful
for benchmarking the two against each other).
"""

import os

if os.environ.get("SCORELAB_PURE_PYTHON"):
    from . import _core_py as _impl

    BACKEND = "python"
else:
    try:
        from . import _core as _impl  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:
        from . import _core_py as _impl

        BACKEND = "python"

mixture_score_kernel = _impl.mixture_score


def backend_name():
    """Name of the active kernel backend: "compiled" or "python"."""
    return BACKEND
