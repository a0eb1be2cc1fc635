"""Backend selection for the hot kernels.

The compiled extension is used when it was built; otherwise the numpy
fallback is used.  Set ``HARDYLAB_BACKEND=python`` to force the fallback.
"""
import os

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("HARDYLAB_BACKEND", "").lower() != "python":
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels

reduced_T = _impl.reduced_T
scan_extremum = _impl.scan_extremum
first_below = _impl.first_below
staggered_energy = _impl.staggered_energy


def backends():
    """Map of backend name to module, for comparisons and benchmarks."""
    out = {"python": _pykernels}
    try:
        from . import _ckernels

        out["cython"] = _ckernels
    except ImportError:
        pass
    return out
