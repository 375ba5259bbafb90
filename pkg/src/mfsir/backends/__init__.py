"""Backend selection: compiled Cython core with a pure-NumPy fallback.

Set ``MFSIR_PURE_PYTHON=1`` to force the fallback (used by the benchmark
suite to compare both implementations).
"""
import os

if os.environ.get("MFSIR_PURE_PYTHON"):
    from . import numpy_backend as impl
else:
    try:
        from . import _core as impl  # type: ignore[attr-defined]
    except ImportError:
        from . import numpy_backend as impl

BACKEND = impl.NAME

infection_load_1d = impl.infection_load_1d
infection_load_nd = impl.infection_load_nd
drift_sum_1d = impl.drift_sum_1d
drift_sum_nd = impl.drift_sum_nd
kernel_field_1d = impl.kernel_field_1d
drift_field_1d = impl.drift_field_1d
