"""Curve operations and their generic point-based counterparts.

The four specialized operations (interval farthest point sampling, geodesic
grouping, two-point curve interpolation, symmetric curve convolution with
gradient features) exploit the ordered polyline structure; the Euclidean
variants (fps_euclidean, group_ball3d) ignore it and serve as ablation
stand-ins and oracles.

Every public operation bumps a call counter (see :func:`counters`), which
the backbone tests use to prove which code paths an ablated configuration
exercises.
"""

from collections import Counter
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from . import _backend
from .errors import MismatchError, ValidationError
from .model import CurveCloud, GeodesicTable, _as_i64, _as_positions

_counters: Counter = Counter()


def reset_counters() -> None:
    _counters.clear()


def counters() -> dict[str, int]:
    """Number of calls per operation since the last reset."""
    return dict(_counters)


@dataclass(frozen=True)
class FeatureMap:
    """Per-point feature matrix (N rows, D channels) aligned to a CurveCloud."""

    values: np.ndarray

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, np.float64)
        if v.ndim != 2:
            raise ValidationError(f"feature values must be 2-D (N, D), got shape {v.shape}")
        if not np.isfinite(v).all():
            raise ValidationError("feature values contain non-finite entries")
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class SamplingConfig:
    """Target geodesic spacing (meters) for fps_1d."""

    epsilon: float

    def __post_init__(self):
        if not (np.isfinite(self.epsilon) and self.epsilon > 0):
            raise ValueError(f"epsilon must be finite and > 0, got {self.epsilon}")
        object.__setattr__(self, "epsilon", float(self.epsilon))


@dataclass(frozen=True)
class GroupingConfig:
    """Neighborhood radius (meters) and optional member cap for grouping."""

    radius: float
    max_neighbors: int | None = None

    def __post_init__(self):
        if not (np.isfinite(self.radius) and self.radius > 0):
            raise ValueError(f"radius must be finite and > 0, got {self.radius}")
        object.__setattr__(self, "radius", float(self.radius))
        if self.max_neighbors is not None:
            if not isinstance(self.max_neighbors, (int, np.integer)) or self.max_neighbors < 1:
                raise ValueError(f"max_neighbors must be >= 1, got {self.max_neighbors!r}")
            object.__setattr__(self, "max_neighbors", int(self.max_neighbors))


@dataclass(frozen=True)
class SymmetricKernel:
    """1D convolution kernel with mirrored taps W[s] = W[S-1-s].

    Only the independent half is stored: half_weights[h] is the tap at
    positions h and S-1-h (h = (S-1)//2 is the center), shape
    (in_channels, out_channels) each. Mirrored taps share storage, so the
    symmetry holds exactly by construction.
    """

    size: int
    half_weights: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        if not isinstance(self.size, (int, np.integer)) or self.size < 1 or self.size % 2 == 0:
            raise ValidationError(f"kernel size must be odd and >= 1, got {self.size!r}")
        object.__setattr__(self, "size", int(self.size))
        hw = np.ascontiguousarray(self.half_weights, np.float64)
        if hw.ndim != 3 or hw.shape[0] != (self.size + 1) // 2:
            raise ValidationError(
                f"half_weights must have shape ((size+1)//2, in, out); got {hw.shape} "
                f"for size {self.size}"
            )
        b = np.ascontiguousarray(self.bias, np.float64)
        if b.shape != (hw.shape[2],):
            raise ValidationError(
                f"bias must have shape ({hw.shape[2]},) to match out_channels, got {b.shape}"
            )
        if not (np.isfinite(hw).all() and np.isfinite(b).all()):
            raise ValidationError("kernel weights must be finite")
        object.__setattr__(self, "half_weights", hw)
        object.__setattr__(self, "bias", b)

    @property
    def in_channels(self) -> int:
        return self.half_weights.shape[1]

    @property
    def out_channels(self) -> int:
        return self.half_weights.shape[2]

    @classmethod
    def from_full(cls, weights: np.ndarray, bias: np.ndarray) -> "SymmetricKernel":
        """Build from a full (S, in, out) tap stack, which must be exactly mirrored."""
        w = np.asarray(weights, np.float64)
        if w.ndim != 3:
            raise ValidationError(f"full weights must be (S, in, out), got shape {w.shape}")
        s = w.shape[0]
        if s % 2 == 0:
            raise ValidationError(f"kernel size must be odd, got {s}")
        if not (w == w[::-1]).all():
            raise ValidationError("taps are not mirror-symmetric")
        return cls(size=s, half_weights=w[: (s + 1) // 2], bias=bias)

    def materialize(self) -> np.ndarray:
        """Full (S, in, out) tap stack with the mirror made explicit."""
        c = (self.size - 1) // 2
        full = np.empty((self.size, self.in_channels, self.out_channels))
        for s in range(self.size):
            full[s] = self.half_weights[min(s, self.size - 1 - s)]
        return full


@dataclass(frozen=True)
class Selection:
    """Global point indices chosen from a CurveCloud.

    When ``offsets`` is present the selection is curve-structured: curve j
    contributed indices[offsets[j]:offsets[j+1]], ascending, at least one
    per curve. fps_euclidean returns offsets=None and visitation order.
    """

    indices: np.ndarray
    offsets: np.ndarray | None = None

    def __post_init__(self):
        idx = _as_i64(self.indices, "indices")
        object.__setattr__(self, "indices", idx)
        if self.offsets is not None:
            off = _as_i64(self.offsets, "offsets")
            object.__setattr__(self, "offsets", off)
            if off.size < 1 or off[0] != 0 or off[-1] != idx.shape[0]:
                raise ValidationError("selection offsets must run from 0 to len(indices)")
            if (np.diff(off) < 1).any():
                raise ValidationError("every curve must contribute at least one selected index")
            if idx.size > 1 and (np.diff(idx) <= 0).any():
                raise ValidationError("curve-structured selections must be strictly increasing")

    @property
    def n(self) -> int:
        return self.indices.shape[0]


@dataclass(frozen=True)
class Neighborhoods:
    """Per-centroid member lists in flat form.

    Members of centroid c are indices[offsets[c]:offsets[c+1]], ascending.
    For geodesic grouping the members are one contiguous index range, also
    exposed as [start[c], stop[c]).
    """

    centroids: np.ndarray
    indices: np.ndarray
    offsets: np.ndarray
    start: np.ndarray | None = None
    stop: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.centroids.shape[0]

    def members(self, c: int) -> np.ndarray:
        return self.indices[self.offsets[c] : self.offsets[c + 1]]


def _flat_from_ranges(start: np.ndarray, stop: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    counts = stop - start
    offsets = np.zeros(start.shape[0] + 1, np.int64)
    np.cumsum(counts, out=offsets[1:])
    total = int(offsets[-1])
    flat = np.arange(total, dtype=np.int64)
    flat -= np.repeat(offsets[:-1], counts)
    flat += np.repeat(start, counts)
    return flat, offsets


def fps_1d(cc: CurveCloud, g: GeodesicTable, cfg: SamplingConfig) -> Selection:
    """Evenly spaced subsample along each curve via arc-length intervals.

    Each point falls in interval floor(cumlen / epsilon); the first point
    of every occupied interval is selected, so each curve keeps its first
    point and selected neighbors sit about epsilon apart. One linear pass,
    no pairwise distances.
    """
    _counters["fps_1d"] += 1
    mask = _backend.fps1d(g.cumlen, cc.offsets, cfg.epsilon)
    idx = np.flatnonzero(mask).astype(np.int64, copy=False)
    return Selection(idx, np.searchsorted(idx, cc.offsets).astype(np.int64, copy=False))


def fps_euclidean(points: np.ndarray, count: int) -> Selection:
    """Classic greedy farthest point sampling, seeded at index 0.

    O(N * count); kept as the ablation stand-in and benchmark baseline for
    fps_1d. Selection order is FPS visitation order.
    """
    _counters["fps_euclidean"] += 1
    pts = _as_positions(points, "points")
    if not isinstance(count, (int, np.integer)) or count < 1:
        raise ValueError(f"count must be an integer >= 1, got {count!r}")
    if count > pts.shape[0]:
        raise ValueError(f"count {count} exceeds point count {pts.shape[0]}")
    return Selection(_backend.fps_euclidean(pts, int(count)))


def _centroid_curves(cc: CurveCloud, centroids: Selection) -> np.ndarray:
    if centroids.offsets is not None and centroids.offsets.shape[0] - 1 == cc.n_curves:
        return np.repeat(
            np.arange(cc.n_curves, dtype=np.int64), np.diff(centroids.offsets)
        )
    return cc.curve_of(centroids.indices).astype(np.int64, copy=False)


def _cap_contiguous(cumlen, start, stop, centroids, k):
    """Shrink each [start, stop) run to its k geodesically closest members.

    Grows outward from the centroid, preferring the lower index on ties,
    so the capped run stays contiguous.
    """
    new_start = start.copy()
    new_stop = stop.copy()
    for n in range(start.shape[0]):
        s, e, i = start[n], stop[n], centroids[n]
        if e - s <= k:
            continue
        c = cumlen[i]
        lo, hi = i, i + 1
        for _ in range(k - 1):
            d_left = c - cumlen[lo - 1] if lo > s else np.inf
            d_right = cumlen[hi] - c if hi < e else np.inf
            if d_left <= d_right:
                lo -= 1
            else:
                hi += 1
        new_start[n], new_stop[n] = lo, hi
    return new_start, new_stop


def group_curve(
    cc: CurveCloud, g: GeodesicTable, centroids: Selection, cfg: GroupingConfig
) -> Neighborhoods:
    """Geodesic neighborhoods: points of the centroid's own curve with
    |cumlen - cumlen[centroid]| < radius (strict). Always contiguous."""
    _counters["group_curve"] += 1
    cidx = centroids.indices
    curve_of = _centroid_curves(cc, centroids)
    start, stop = _backend.group_ranges(g.cumlen, cc.offsets, cidx, curve_of, cfg.radius)
    if cfg.max_neighbors is not None:
        start, stop = _cap_contiguous(g.cumlen, start, stop, cidx, cfg.max_neighbors)
    flat, offsets = _flat_from_ranges(start, stop)
    return Neighborhoods(cidx, flat, offsets, start, stop)


def group_ball3d(
    points: np.ndarray,
    centroids,
    radius: float,
    max_neighbors: int | None = None,
) -> Neighborhoods:
    """Euclidean ball neighborhoods (curve structure ignored): all points
    with ||p - centroid|| < radius (strict); capping keeps the closest,
    ties toward the lower index. Members listed in ascending index order."""
    _counters["group_ball3d"] += 1
    pts = _as_positions(points, "points")
    cidx = centroids.indices if isinstance(centroids, Selection) else _as_i64(centroids, "centroids")
    if not (np.isfinite(radius) and radius > 0):
        raise ValueError(f"radius must be finite and > 0, got {radius}")
    r2 = float(radius) * float(radius)
    # kd-tree query with a hair of slack, then the exact strict predicate;
    # the slack guarantees boundary points are never missed to rounding.
    tree = cKDTree(pts)
    raw = tree.query_ball_point(pts[cidx], float(radius) * (1.0 + 1e-9))
    member_lists = []
    for n, lst in enumerate(raw):
        cand = np.sort(np.asarray(lst, np.int64))
        d = pts[cand] - pts[cidx[n]]
        d2 = d[:, 0] * d[:, 0] + d[:, 1] * d[:, 1] + d[:, 2] * d[:, 2]
        keep = d2 < r2
        cand, d2 = cand[keep], d2[keep]
        if max_neighbors is not None and cand.shape[0] > max_neighbors:
            closest = np.lexsort((cand, d2))[:max_neighbors]
            cand = np.sort(cand[closest])
        member_lists.append(cand)
    offsets = np.zeros(len(member_lists) + 1, np.int64)
    np.cumsum([m.shape[0] for m in member_lists], out=offsets[1:])
    flat = np.concatenate(member_lists) if member_lists else np.zeros(0, np.int64)
    return Neighborhoods(cidx, flat, offsets)


def interpolate_curve(
    cc_hi: CurveCloud, g_hi: GeodesicTable, selection: Selection, feats_lo: FeatureMap
) -> FeatureMap:
    """Spread low-res features back to every point of the high-res curves.

    Each high-res point strictly between two bracketing selected points
    takes the inverse-geodesic-distance weighted blend of their two
    features, computed as f1 + t * (f2 - f1) with t = d1 / (d1 + d2), which
    is the same weighting written so that constant features are reproduced
    bit-for-bit. Points at/before the first or at/after the last selected
    point of their curve copy the nearest selected feature.
    """
    _counters["interpolate_curve"] += 1
    if selection.offsets is None:
        raise ValidationError("interpolate_curve needs a curve-structured selection")
    if selection.offsets.shape[0] - 1 != cc_hi.n_curves:
        raise MismatchError(
            f"selection covers {selection.offsets.shape[0] - 1} curves, "
            f"cloud has {cc_hi.n_curves}"
        )
    if feats_lo.n != selection.n:
        raise MismatchError(
            f"feats_lo has {feats_lo.n} rows for {selection.n} selected points"
        )
    cumlen = g_hi.cumlen
    vals = feats_lo.values
    out = np.empty((cc_hi.n, vals.shape[1]))
    for j in range(cc_hi.n_curves):
        s, e = cc_hi.curve_slice(j)
        ls, le = int(selection.offsets[j]), int(selection.offsets[j + 1])
        scum = cumlen[selection.indices[ls:le]]
        gv = vals[ls:le]
        x = cumlen[s:e]
        k = scum.shape[0]
        pos = np.searchsorted(scum, x, side="left")
        low = pos == 0
        high = pos == k
        exact = ~high & (scum[np.minimum(pos, k - 1)] == x)
        mid = ~(low | high | exact)
        block = out[s:e]
        block[low] = gv[0]
        block[high] = gv[k - 1]
        block[exact] = gv[pos[exact]]
        if mid.any():
            p = pos[mid]
            s1 = scum[p - 1]
            s2 = scum[p]
            t = ((x[mid] - s1) / (s2 - s1))[:, None]
            g1 = gv[p - 1]
            block[mid] = g1 + t * (gv[p] - g1)
    return FeatureMap(out)


def gradient_features(cc: CurveCloud, feats: FeatureMap) -> FeatureMap:
    """Per-channel |gradient| along each curve (central difference inside,
    one-sided at endpoints, 0 on single-point curves)."""
    _counters["gradient_features"] += 1
    if feats.n != cc.n:
        raise MismatchError(f"features have {feats.n} rows for {cc.n} points")
    return FeatureMap(_backend.gradient_abs(feats.values, cc.offsets))


def conv_symmetric(cc: CurveCloud, feats: FeatureMap, kernel: SymmetricKernel) -> FeatureMap:
    """Symmetric 1D convolution over [features, |gradient|] along each curve.

    Input channels double: the kernel consumes the features concatenated
    with their gradient magnitudes. Replicate padding keeps output length
    equal to input length. The mirrored taps plus symmetric padding make
    the op equivariant to curve reversal, bitwise.
    """
    _counters["conv_symmetric"] += 1
    if feats.n != cc.n:
        raise MismatchError(f"features have {feats.n} rows for {cc.n} points")
    if kernel.in_channels != 2 * feats.d:
        raise MismatchError(
            f"kernel expects {kernel.in_channels} input channels; features with "
            f"gradients provide {2 * feats.d}"
        )
    grads = gradient_features(cc, feats)
    x = np.ascontiguousarray(np.concatenate([feats.values, grads.values], axis=1))
    y = _backend.conv1d_symmetric(x, cc.offsets, kernel.half_weights, kernel.bias)
    return FeatureMap(y)
