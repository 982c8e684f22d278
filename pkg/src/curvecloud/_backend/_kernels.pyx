# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels for the hot loops.

Every function here has a pure-numpy twin in
``curvecloud._backend.numpy_backend`` with identical semantics (including
index tie-breaking). Functions take explicit [lo, hi) block bounds where
the work is independent per curve or per centroid, so callers may split a
call across threads; each block writes a disjoint output slice, which keeps
results bitwise identical for any schedule.
"""

from libc.math cimport fabs, floor, sqrt


def cumulative_lengths(const double[:, ::1] pos, const long long[::1] offsets,
                       double[::1] out, Py_ssize_t j0, Py_ssize_t j1):
    """Per-curve cumulative arc length, reset to 0 at each curve start."""
    cdef Py_ssize_t j, i, s, e
    cdef double dx, dy, dz, d2, acc
    with nogil:
        for j in range(j0, j1):
            s = offsets[j]
            e = offsets[j + 1]
            acc = 0.0
            out[s] = 0.0
            for i in range(s + 1, e):
                dx = pos[i, 0] - pos[i - 1, 0]
                dy = pos[i, 1] - pos[i - 1, 1]
                dz = pos[i, 2] - pos[i - 1, 2]
                d2 = dx * dx
                d2 = d2 + dy * dy
                d2 = d2 + dz * dz
                acc = acc + sqrt(d2)
                out[i] = acc


def split_flags(const double[:, ::1] pos, const long long[::1] beams,
                const double[::1] deltas, bint range_scaling,
                double ox, double oy, double oz, double ref_range,
                unsigned char[::1] out, Py_ssize_t i0, Py_ssize_t i1):
    """out[i] = 1 when a new curve must start at sorted position i + 1.

    ``pos``/``beams`` are already sorted by (beam, timestamp). An edge splits
    on a beam change or when its length exceeds the effective threshold of
    the earlier point's beam.
    """
    cdef Py_ssize_t i
    cdef double dx, dy, dz, d2, de, rx, ry, rz, r2
    with nogil:
        for i in range(i0, i1):
            if beams[i + 1] != beams[i]:
                out[i] = 1
                continue
            dx = pos[i + 1, 0] - pos[i, 0]
            dy = pos[i + 1, 1] - pos[i, 1]
            dz = pos[i + 1, 2] - pos[i, 2]
            d2 = dx * dx
            d2 = d2 + dy * dy
            d2 = d2 + dz * dz
            de = deltas[beams[i] - 1]
            if range_scaling:
                rx = pos[i, 0] - ox
                ry = pos[i, 1] - oy
                rz = pos[i, 2] - oz
                r2 = rx * rx
                r2 = r2 + ry * ry
                r2 = r2 + rz * rz
                de = de * sqrt(sqrt(r2) / ref_range)
            out[i] = 1 if sqrt(d2) > de else 0


def fps1d(const double[::1] cumlen, const long long[::1] offsets, double eps,
          unsigned char[::1] mask, Py_ssize_t j0, Py_ssize_t j1):
    """Mark the first point of each occupied floor(cumlen/eps) interval."""
    cdef Py_ssize_t j, i, s, e
    cdef double prev, cur
    with nogil:
        for j in range(j0, j1):
            s = offsets[j]
            e = offsets[j + 1]
            mask[s] = 1
            prev = floor(cumlen[s] / eps)
            for i in range(s + 1, e):
                cur = floor(cumlen[i] / eps)
                if cur != prev:
                    mask[i] = 1
                prev = cur


def fps_euclidean(const double[:, ::1] pts, long long[::1] out,
                  double[::1] d2, Py_ssize_t count):
    """Greedy farthest point sampling seeded at index 0.

    Ties in the farthest-distance scan keep the lowest index, matching
    np.argmax in the numpy twin. ``d2`` is an (N,) scratch array.
    """
    cdef Py_ssize_t n = pts.shape[0]
    cdef Py_ssize_t i, k, best
    cdef double cx, cy, cz, dx, dy, dz, v, bestv
    with nogil:
        cx = pts[0, 0]
        cy = pts[0, 1]
        cz = pts[0, 2]
        for k in range(n):
            dx = pts[k, 0] - cx
            dy = pts[k, 1] - cy
            dz = pts[k, 2] - cz
            v = dx * dx
            v = v + dy * dy
            v = v + dz * dz
            d2[k] = v
        out[0] = 0
        for i in range(1, count):
            best = 0
            bestv = d2[0]
            for k in range(1, n):
                if d2[k] > bestv:
                    bestv = d2[k]
                    best = k
            out[i] = best
            cx = pts[best, 0]
            cy = pts[best, 1]
            cz = pts[best, 2]
            for k in range(n):
                dx = pts[k, 0] - cx
                dy = pts[k, 1] - cy
                dz = pts[k, 2] - cz
                v = dx * dx
                v = v + dy * dy
                v = v + dz * dz
                if v < d2[k]:
                    d2[k] = v


def group_ranges(const double[::1] cumlen, const long long[::1] offsets,
                 const long long[::1] centroids, const long long[::1] curve_of,
                 double radius, long long[::1] start, long long[::1] stop,
                 Py_ssize_t c0, Py_ssize_t c1):
    """Contiguous run of points within geodesic ``radius`` of each centroid.

    The predicate is fabs(cumlen[k] - cumlen[centroid]) < radius; cumlen is
    nondecreasing per curve so the run is contiguous and can be grown
    outward from the centroid.
    """
    cdef Py_ssize_t n, i, j, s, e, lo, hi
    cdef double c
    with nogil:
        for n in range(c0, c1):
            i = centroids[n]
            j = curve_of[n]
            s = offsets[j]
            e = offsets[j + 1]
            c = cumlen[i]
            lo = i
            while lo > s and fabs(cumlen[lo - 1] - c) < radius:
                lo -= 1
            hi = i + 1
            while hi < e and fabs(cumlen[hi] - c) < radius:
                hi += 1
            start[n] = lo
            stop[n] = hi


def gradient_abs(const double[:, ::1] x, const long long[::1] offsets,
                 double[:, ::1] out, Py_ssize_t j0, Py_ssize_t j1):
    """Absolute index-space gradient per channel along each curve.

    Central difference (f[i+1] - f[i-1]) / 2 for interior points, one-sided
    at curve endpoints, 0 for single-point curves.
    """
    cdef Py_ssize_t j, i, s, e, d, prv, nxt
    cdef Py_ssize_t D = x.shape[1]
    cdef double span
    with nogil:
        for j in range(j0, j1):
            s = offsets[j]
            e = offsets[j + 1]
            for i in range(s, e):
                prv = i - 1 if i - 1 >= s else s
                nxt = i + 1 if i + 1 <= e - 1 else e - 1
                span = <double> (nxt - prv)
                if span == 0.0:
                    for d in range(D):
                        out[i, d] = 0.0
                else:
                    for d in range(D):
                        out[i, d] = fabs((x[nxt, d] - x[prv, d]) / span)


def conv1d_symmetric(const double[:, ::1] x, const long long[::1] offsets,
                     const double[:, :, ::1] half, const double[::1] bias,
                     double[:, ::1] out, Py_ssize_t j0, Py_ssize_t j1):
    """Per-curve symmetric 1D cross-correlation with replicate padding.

    ``half`` holds taps (half_index, in_channel, out_channel) with
    half_index H-1 = center tap and 0 = outermost tap. Mirrored taps at
    offset +/-d share half[H-1-d], so the per-point accumulation is
    bias -> center -> folded pairs in ascending d; the fold x[l] + x[r] is
    commutative, which makes curve reversal bitwise exact.
    """
    cdef Py_ssize_t j, i, s, e, d, ci, o, l, r
    cdef Py_ssize_t H = half.shape[0]
    cdef Py_ssize_t cin = half.shape[1]
    cdef Py_ssize_t cout = half.shape[2]
    cdef Py_ssize_t c = H - 1
    cdef double v
    with nogil:
        for j in range(j0, j1):
            s = offsets[j]
            e = offsets[j + 1]
            for i in range(s, e):
                for o in range(cout):
                    out[i, o] = bias[o]
                for ci in range(cin):
                    v = x[i, ci]
                    for o in range(cout):
                        out[i, o] += v * half[c, ci, o]
                for d in range(1, c + 1):
                    l = i - d
                    if l < s:
                        l = s
                    r = i + d
                    if r > e - 1:
                        r = e - 1
                    for ci in range(cin):
                        v = x[l, ci] + x[r, ci]
                        for o in range(cout):
                            out[i, o] += v * half[c - d, ci, o]
