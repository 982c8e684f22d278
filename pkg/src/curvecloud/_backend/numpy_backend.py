"""Pure-numpy implementations of the hot kernels.

Fallback used when the compiled extension is unavailable (or forced via
CURVECLOUD_BACKEND=numpy). Semantics, including tie handling and split
predicates, mirror ``curvecloud._backend._kernels`` exactly; keep the two
in lockstep when editing either.
"""

import numpy as np


def cumulative_lengths(pos: np.ndarray, offsets: np.ndarray) -> np.ndarray:
    """Per-curve cumulative arc length, reset to 0 at each curve start."""
    n = pos.shape[0]
    if n == 0:
        return np.zeros(0, np.float64)
    d = pos[1:] - pos[:-1]
    dist = np.sqrt(d[:, 0] * d[:, 0] + d[:, 1] * d[:, 1] + d[:, 2] * d[:, 2])
    edge = np.empty(n, np.float64)
    edge[0] = 0.0
    edge[1:] = dist
    edge[offsets[:-1]] = 0.0
    cum = np.cumsum(edge)
    base = np.repeat(cum[offsets[:-1]], np.diff(offsets))
    return cum - base


def split_flags(pos, beams, deltas, range_scaling, origin, ref_range):
    """Boolean flags: True where a new curve starts at sorted position i+1."""
    d = pos[1:] - pos[:-1]
    dist = np.sqrt(d[:, 0] * d[:, 0] + d[:, 1] * d[:, 1] + d[:, 2] * d[:, 2])
    de = deltas[beams[:-1] - 1]
    if range_scaling:
        r = pos[:-1] - origin
        r2 = r[:, 0] * r[:, 0] + r[:, 1] * r[:, 1] + r[:, 2] * r[:, 2]
        de = de * np.sqrt(np.sqrt(r2) / ref_range)
    return (beams[1:] != beams[:-1]) | (dist > de)


def fps1d(cumlen, offsets, eps):
    """Mask marking the first point of each occupied floor(cumlen/eps) interval."""
    n = cumlen.shape[0]
    mask = np.zeros(n, np.uint8)
    if n == 0:
        return mask
    iv = np.floor(cumlen / eps)
    np.not_equal(iv[1:], iv[:-1], out=mask[1:].view(bool))
    mask[offsets[:-1]] = 1
    return mask


def fps_euclidean(pts, count):
    """Greedy farthest point sampling seeded at index 0; argmax ties -> lowest index."""
    out = np.empty(count, np.int64)
    d = pts - pts[0]
    d2 = d[:, 0] * d[:, 0] + d[:, 1] * d[:, 1] + d[:, 2] * d[:, 2]
    out[0] = 0
    for i in range(1, count):
        best = int(np.argmax(d2))
        out[i] = best
        d = pts - pts[best]
        nd2 = d[:, 0] * d[:, 0] + d[:, 1] * d[:, 1] + d[:, 2] * d[:, 2]
        np.minimum(d2, nd2, out=d2)
    return out


def group_ranges(cumlen, offsets, centroids, curve_of, radius):
    """Contiguous [start, stop) run with |cumlen[k] - cumlen[centroid]| < radius."""
    m = centroids.shape[0]
    start = np.empty(m, np.int64)
    stop = np.empty(m, np.int64)
    for n in range(m):
        j = curve_of[n]
        s = offsets[j]
        e = offsets[j + 1]
        win = np.flatnonzero(np.abs(cumlen[s:e] - cumlen[centroids[n]]) < radius)
        start[n] = s + win[0]
        stop[n] = s + win[-1] + 1
    return start, stop


def _clamped_neighbors(offsets):
    counts = np.diff(offsets)
    starts = np.repeat(offsets[:-1], counts)
    ends = np.repeat(offsets[1:] - 1, counts)
    return starts, ends


def gradient_abs(x, offsets):
    """Absolute index-space gradient per channel along each curve."""
    n = x.shape[0]
    if n == 0:
        return np.zeros_like(x)
    starts, ends = _clamped_neighbors(offsets)
    idx = np.arange(n)
    prv = np.maximum(idx - 1, starts)
    nxt = np.minimum(idx + 1, ends)
    span = (nxt - prv).astype(np.float64)
    np.copyto(span, 1.0, where=span == 0.0)
    return np.abs((x[nxt] - x[prv]) / span[:, None])


def conv1d_symmetric(x, offsets, half, bias):
    """Per-curve symmetric 1D cross-correlation with replicate padding.

    The matmuls go through einsum, whose fixed-order reduction makes the
    result invariant to row position; combined with the commutative fold
    x[l] + x[r] this keeps curve reversal bitwise exact.
    """
    n = x.shape[0]
    c = half.shape[0] - 1
    out = np.broadcast_to(bias, (n, bias.shape[0])).copy()
    if n == 0:
        return out
    out += np.einsum("nc,co->no", x, half[c])
    if c > 0:
        starts, ends = _clamped_neighbors(offsets)
        idx = np.arange(n)
        for d in range(1, c + 1):
            l = np.maximum(idx - d, starts)
            r = np.minimum(idx + d, ends)
            out += np.einsum("nc,co->no", x[l] + x[r], half[c - d])
    return out
