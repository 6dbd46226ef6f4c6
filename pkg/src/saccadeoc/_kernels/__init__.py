"""Kernel selection: compiled extension when available, numpy otherwise.

Set SACCADE_OC_PURE=1 to force the numpy path (used by the benchmark and by
the equivalence tests).
"""

import os

from . import _ref

USING_COMPILED = False
_impl = _ref

if not os.environ.get("SACCADE_OC_PURE"):
    try:
        from . import _core  # type: ignore[attr-defined]

        _impl = _core
        USING_COMPILED = True
    except ImportError:
        pass

backward_pass = _impl.backward_pass
mean_rollout = _impl.mean_rollout
ensemble = _impl.ensemble


def implementation_name() -> str:
    return "compiled" if USING_COMPILED else "numpy"
