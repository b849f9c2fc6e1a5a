"""Hot aggregation kernels with a compiled core and a NumPy fallback.

The scenario x time calculations reduce to three fused accumulate
operations plus a row-wise convolution.  A Cython extension implements
them with tight nogil loops; when it is not built (no compiler, or
LCENGINE_NO_EXT=1 at install time) the NumPy backend is selected at import
instead.  Both backends perform the identical per-cell operation sequence
and are compiled without FP contraction, so results are bit-identical.

Set LCENGINE_BACKEND=numpy or =cython to force a backend; see
benchmarks/bench_kernels.py for a side-by-side timing comparison.
"""

from __future__ import annotations

import os
from contextlib import contextmanager

import numpy as np

from ..errors import ShapeError
from . import numpy_backend

try:
    from . import _ckernels
except ImportError:
    _ckernels = None

_FORCED = os.environ.get("LCENGINE_BACKEND")
if _FORCED == "numpy":
    _impl = numpy_backend
elif _FORCED == "cython":
    if _ckernels is None:
        raise ImportError(
            "LCENGINE_BACKEND=cython but the compiled kernels are not built; "
            "reinstall without LCENGINE_NO_EXT"
        )
    _impl = _ckernels
elif _FORCED:
    raise ImportError(f"unknown LCENGINE_BACKEND {_FORCED!r}; use 'cython' or 'numpy'")
else:
    _impl = _ckernels if _ckernels is not None else numpy_backend

BACKEND = "cython" if _impl is _ckernels and _ckernels is not None else "numpy"


def backend_name() -> str:
    """Name of the backend currently dispatching the kernels."""
    return "cython" if _impl is _ckernels and _ckernels is not None else "numpy"


def have_compiled() -> bool:
    return _ckernels is not None


@contextmanager
def force_backend(name: str):
    """Temporarily switch backends (testing/benchmarking hook, not thread-safe)."""
    global _impl
    if name == "cython":
        if _ckernels is None:
            raise RuntimeError("compiled kernels are not available")
        replacement = _ckernels
    elif name == "numpy":
        replacement = numpy_backend
    else:
        raise ValueError(f"unknown backend {name!r}")
    previous = _impl
    _impl = replacement
    try:
        yield
    finally:
        _impl = previous


def _check_grid(name: str, a: np.ndarray, shape: tuple[int, int]) -> None:
    if a.dtype != np.float64 or a.ndim != 2 or not a.flags.c_contiguous:
        raise ShapeError(f"{name} must be a C-contiguous float64 2-D array")
    if a.shape != shape:
        raise ShapeError(f"{name} has shape {a.shape}, expected {shape}")


def add_const(acc: np.ndarray, c: float) -> None:
    """acc[i,j] += c, in place."""
    _check_grid("acc", acc, acc.shape)
    _impl.add_const(acc, float(c))


def add_scaled(acc: np.ndarray, c: float, x: np.ndarray) -> None:
    """acc[i,j] += c * x[i,j], in place."""
    _check_grid("acc", acc, acc.shape)
    _check_grid("x", x, acc.shape)
    _impl.add_scaled(acc, float(c), x)


def add_product(acc: np.ndarray, u: np.ndarray, x: np.ndarray) -> None:
    """acc[i,j] += u[i,j] * x[i,j], in place."""
    _check_grid("acc", acc, acc.shape)
    _check_grid("u", u, acc.shape)
    _check_grid("x", x, acc.shape)
    _impl.add_product(acc, u, x)


def convolve_rows_into(out: np.ndarray, em: np.ndarray, kern: np.ndarray) -> None:
    """Accumulate the convolution of each row of ``em`` with ``kern`` into ``out``.

    out[s, t + k] += em[s, t] * kern[k]; out must have em.shape[1] +
    len(kern) - 1 columns (or more) and is not zeroed first, so repeated
    calls accumulate.  Taps are applied in ascending k order in both
    backends.
    """
    if kern.dtype != np.float64 or kern.ndim != 1 or not kern.flags.c_contiguous:
        raise ShapeError("kern must be a C-contiguous float64 1-D array")
    if kern.shape[0] < 1:
        raise ShapeError("kern must have at least one tap")
    _check_grid("em", em, em.shape)
    _check_grid("out", out, (em.shape[0], em.shape[1] + kern.shape[0] - 1))
    _impl.convolve_rows_into(out, em, kern)
