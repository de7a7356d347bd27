"""Hot-loop kernels with a compiled backend and a pure-Python fallback.

The compiled extension is used when it imported cleanly; setting
``CPI_PURE_PYTHON=1`` in the environment forces the fallback.
"""
from __future__ import annotations

import os

from . import _fallback

fallback = _fallback
compiled = None
if os.environ.get("CPI_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _core as compiled  # type: ignore[no-redef]
    except ImportError:  # extension not built
        compiled = None

backend = compiled if compiled is not None else fallback
BACKEND_NAME = "compiled" if compiled is not None else "python"

lasso_cd = backend.lasso_cd
build_tree = backend.build_tree
predict_forest = backend.predict_forest
signflip_subset_sums = backend.signflip_subset_sums

__all__ = [
    "BACKEND_NAME",
    "build_tree",
    "compiled",
    "fallback",
    "lasso_cd",
    "predict_forest",
    "signflip_subset_sums",
]
