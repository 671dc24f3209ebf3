"""Backend selection for the power-control kernels.

The compiled extension is used when it imports; otherwise the numpy fallback
takes over. Set ``SATTERRA_PURE_PYTHON=1`` to force the fallback.
"""
from __future__ import annotations

import os

from . import _kernels_py

_impl = _kernels_py
BACKEND = "python"
if os.environ.get("SATTERRA_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        pass
    else:
        _impl = _compiled
        BACKEND = "cython"


def compensated_matvec(cross, rho):
    return _impl.compensated_matvec(cross, rho)


def power_iteration(gain2, cross, noise, xi, pmax, rho0, mu, eps, max_iters):
    return _impl.power_iteration(gain2, cross, noise, xi, pmax, rho0, mu,
                                 float(eps), int(max_iters))
