"""Kernel backend selection.

The compiled extension ``_kernels`` is used when importable; otherwise the numpy
fallback ``_kernels_py`` is used. Setting ``POISSONCERT_PURE_PYTHON=1`` forces
the fallback.
"""

import os

if os.environ.get("POISSONCERT_PURE_PYTHON", "") not in ("", "0"):
    from . import _kernels_py as _impl
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl
        BACKEND = "cython"
    except ImportError:  # extension not built
        from . import _kernels_py as _impl
        BACKEND = "python"

pb_pmf = _impl.pb_pmf
poisson_logpmf = _impl.poisson_logpmf
divergence_core = _impl.divergence_core
stirlerr = _impl.stirlerr
bd0 = _impl.bd0

__all__ = ["BACKEND", "pb_pmf", "poisson_logpmf", "divergence_core", "stirlerr", "bd0"]
