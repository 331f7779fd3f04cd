"""Selects the compiled kernels when available, else the numpy fallback.

Set ``ARSELECT_BACKEND=python`` to force the fallback.
"""

import os

from . import _kernels_py

BACKEND = "python"
lagged_gram = _kernels_py.lagged_gram
nested_fit = _kernels_py.nested_fit

if os.environ.get("ARSELECT_BACKEND", "").lower() != "python":
    try:
        from . import _kernels
    except ImportError:  # extension not built
        pass
    else:
        BACKEND = "cython"
        lagged_gram = _kernels.lagged_gram
        nested_fit = _kernels.nested_fit
