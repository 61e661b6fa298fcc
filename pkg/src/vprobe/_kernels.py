"""Kernel backend selection.

The compiled extension is used when it is importable; setting
``VPROBE_PURE_PYTHON=1`` forces the pure-Python fallback.
"""

import os

if os.environ.get("VPROBE_PURE_PYTHON", "") not in ("", "0"):
    from ._pykernels import *  # noqa: F401,F403
    from ._pykernels import BACKEND
else:
    try:
        from ._ckernels import *  # noqa: F401,F403
        from ._ckernels import BACKEND
    except ImportError:
        from ._pykernels import *  # noqa: F401,F403
        from ._pykernels import BACKEND

__all__ = [
    "SLIDE",
    "EDGE",
    "CORNER_FLANK",
    "FLANK",
    "BACKEND",
    "branch_terms",
    "residual",
    "branch_depth",
    "solve_branch",
    "solve_sequence",
    "edge_angle",
]
