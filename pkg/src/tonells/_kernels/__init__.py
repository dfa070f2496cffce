"""Hot-loop kernels: compiled extension when available, pure Python otherwise.

Set ``TONELLS_PURE_PYTHON=1`` in the environment to force the fallback.
``BACKEND`` reports which implementation is active ("compiled"/"python").
"""

import os

if os.environ.get("TONELLS_PURE_PYTHON"):
    from . import fallback as _impl

    BACKEND = "python"
else:
    try:
        from . import _core as _impl

        BACKEND = "compiled"
    except ImportError:
        from . import fallback as _impl

        BACKEND = "python"

run_tracker_chunk = _impl.run_tracker_chunk
dpll_run = _impl.dpll_run

__all__ = ["BACKEND", "run_tracker_chunk", "dpll_run"]
