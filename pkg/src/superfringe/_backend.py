"""Pick the compiled kernels when available, else the numpy fallback.

Set ``SUPERFRINGE_PURE_PYTHON=1`` to force the fallback (used by the test
suite and the benchmark to exercise both paths).
"""
import os

from . import _pykernels

BACKEND = "python"
_force_pure = os.environ.get("SUPERFRINGE_PURE_PYTHON", "").strip() not in ("", "0")

if _force_pure:
    kernels = _pykernels
else:
    try:
        from . import _kernels as kernels  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        kernels = _pykernels

interval_mass = kernels.interval_mass
count_hits = kernels.count_hits
