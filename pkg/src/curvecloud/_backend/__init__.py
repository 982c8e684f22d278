"""Kernel backend selection.

Two interchangeable kernel sets exist: a compiled Cython extension
(``curvecloud._backend._kernels``) and a pure-numpy fallback
(``curvecloud._backend.numpy_backend``). The active one is chosen at import
time from the CURVECLOUD_BACKEND environment variable ("auto", "compiled",
or "numpy"; default "auto" = compiled when built) and can be switched at
runtime with :func:`use_backend`, which the benchmark harness uses to
compare the two.

The wrappers below present one array-in/array-out surface regardless of
backend. For the compiled path, work that is independent per curve or per
centroid is block-split across worker threads (see ``curvecloud._threads``);
blocks write disjoint output slices, so results do not depend on the
schedule or thread count.
"""

import os

import numpy as np

from .. import _threads
from . import numpy_backend

try:
    from . import _kernels
except ImportError:
    _kernels = None

_env = os.environ.get("CURVECLOUD_BACKEND", "auto").strip().lower() or "auto"
if _env not in ("auto", "compiled", "numpy"):
    raise ImportError(
        f"CURVECLOUD_BACKEND must be 'auto', 'compiled' or 'numpy', got {_env!r}"
    )
if _env == "compiled" and _kernels is None:
    raise ImportError(
        "CURVECLOUD_BACKEND=compiled but the compiled extension is not built"
    )

_active = "numpy" if (_env == "numpy" or _kernels is None) else "compiled"

# Block-split thresholds: below these sizes a single direct call is cheaper
# than scheduling pool work.
_MIN_CURVES = 64
_MIN_EDGES = 65536
_MIN_CENTROIDS = 1024


def active_backend() -> str:
    """Name of the kernel set in use: 'compiled' or 'numpy'."""
    return _active


def available_backends() -> tuple[str, ...]:
    return ("compiled", "numpy") if _kernels is not None else ("numpy",)


def use_backend(name: str) -> str:
    """Switch the active kernel set; returns the previous name."""
    global _active
    if name not in ("compiled", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "compiled" and _kernels is None:
        raise ValueError("compiled backend is not built")
    prev = _active
    _active = name
    return prev


def cumulative_lengths(pos: np.ndarray, offsets: np.ndarray) -> np.ndarray:
    if _active == "numpy":
        return numpy_backend.cumulative_lengths(pos, offsets)
    out = np.empty(pos.shape[0], np.float64)
    m = offsets.shape[0] - 1
    _threads.run_blocks(
        m, _MIN_CURVES, lambda lo, hi: _kernels.cumulative_lengths(pos, offsets, out, lo, hi)
    )
    return out


def split_flags(pos, beams, deltas, range_scaling, origin, ref_range) -> np.ndarray:
    if _active == "numpy":
        return numpy_backend.split_flags(pos, beams, deltas, range_scaling, origin, ref_range)
    n_edges = pos.shape[0] - 1
    out = np.zeros(max(n_edges, 0), np.uint8)
    ox, oy, oz = (float(v) for v in origin)
    _threads.run_blocks(
        n_edges,
        _MIN_EDGES,
        lambda lo, hi: _kernels.split_flags(
            pos, beams, deltas, bool(range_scaling), ox, oy, oz, float(ref_range), out, lo, hi
        ),
    )
    return out.view(bool)


def fps1d(cumlen, offsets, eps: float) -> np.ndarray:
    if _active == "numpy":
        return numpy_backend.fps1d(cumlen, offsets, eps)
    out = np.zeros(cumlen.shape[0], np.uint8)
    m = offsets.shape[0] - 1
    _threads.run_blocks(
        m, _MIN_CURVES, lambda lo, hi: _kernels.fps1d(cumlen, offsets, float(eps), out, lo, hi)
    )
    return out


def fps_euclidean(pts, count: int) -> np.ndarray:
    if _active == "numpy":
        return numpy_backend.fps_euclidean(pts, count)
    out = np.empty(count, np.int64)
    scratch = np.empty(pts.shape[0], np.float64)
    _kernels.fps_euclidean(pts, out, scratch, count)
    return out


def group_ranges(cumlen, offsets, centroids, curve_of, radius: float):
    if _active == "numpy":
        return numpy_backend.group_ranges(cumlen, offsets, centroids, curve_of, radius)
    m = centroids.shape[0]
    start = np.empty(m, np.int64)
    stop = np.empty(m, np.int64)
    _threads.run_blocks(
        m,
        _MIN_CENTROIDS,
        lambda lo, hi: _kernels.group_ranges(
            cumlen, offsets, centroids, curve_of, float(radius), start, stop, lo, hi
        ),
    )
    return start, stop


def gradient_abs(x, offsets) -> np.ndarray:
    if _active == "numpy":
        return numpy_backend.gradient_abs(x, offsets)
    out = np.empty_like(x)
    m = offsets.shape[0] - 1
    _threads.run_blocks(
        m, _MIN_CURVES, lambda lo, hi: _kernels.gradient_abs(x, offsets, out, lo, hi)
    )
    return out


def conv1d_symmetric(x, offsets, half, bias) -> np.ndarray:
    if _active == "numpy":
        return numpy_backend.conv1d_symmetric(x, offsets, half, bias)
    out = np.empty((x.shape[0], half.shape[2]), np.float64)
    m = offsets.shape[0] - 1
    _threads.run_blocks(
        m, _MIN_CURVES, lambda lo, hi: _kernels.conv1d_symmetric(x, offsets, half, bias, out, lo, hi)
    )
    return out
