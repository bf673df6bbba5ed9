"""Subproblem-kernel backend selection.

The compiled extension is used when it imported successfully; the
pure-numpy twin is the fallback.  Set ``STPCA_PURE_PYTHON=1`` to force the
fallback (used by the benchmark and the backend-parity tests).
"""

import os

from . import _subproblem_py

try:
    from . import _subproblem_cy
except ImportError:  # extension not built
    _subproblem_cy = None

if _subproblem_cy is not None and not os.environ.get("STPCA_PURE_PYTHON"):
    _impl = _subproblem_cy
    BACKEND = "compiled"
else:
    _impl = _subproblem_py
    BACKEND = "python"

solve_subproblem = _impl.solve_subproblem
subproblem_objective = _subproblem_py.subproblem_objective

__all__ = ["solve_subproblem", "subproblem_objective", "BACKEND"]
