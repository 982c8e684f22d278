"""Core data types for laser point streams and curve clouds.

A curve cloud is a point cloud partitioned into polylines ("curves"), each
following one laser beam's sweep over a surface in acquisition order. The
flat layout (one (N, 3) position array plus an (M+1,) offset table) keeps
every per-curve operation a slice, never a copy.
"""

from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .errors import ValidationError


def _as_positions(a, name: str) -> np.ndarray:
    out = np.ascontiguousarray(a, np.float64)
    if out.ndim != 2 or out.shape[1] != 3:
        raise ValidationError(f"{name} must have shape (N, 3), got {out.shape}")
    return out


def _as_i64(a, name: str) -> np.ndarray:
    out = np.ascontiguousarray(a, np.int64)
    if out.ndim != 1:
        raise ValidationError(f"{name} must be one-dimensional, got shape {out.shape}")
    return out


@dataclass(frozen=True)
class PointCloud:
    """Raw sensor output: 3D positions, acquisition timestamps, beam IDs.

    positions: (N, 3) coordinates in meters, sensor frame.
    timestamps: (N,) acquisition times in microseconds; only their order
        within a beam matters.
    beam_ids: (N,) integers in [1, n_beams] naming the emitting laser.
    """

    positions: np.ndarray
    timestamps: np.ndarray
    beam_ids: np.ndarray
    n_beams: int

    def __post_init__(self):
        pos = _as_positions(self.positions, "positions")
        ts = np.ascontiguousarray(self.timestamps, np.float64)
        beams = _as_i64(self.beam_ids, "beam_ids")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "beam_ids", beams)
        n = pos.shape[0]
        if ts.shape != (n,) or beams.shape != (n,):
            raise ValidationError(
                f"length mismatch: {n} positions, {ts.shape[0]} timestamps, "
                f"{beams.shape[0]} beam_ids"
            )
        if not isinstance(self.n_beams, (int, np.integer)) or self.n_beams < 0:
            raise ValidationError(f"n_beams must be a non-negative integer, got {self.n_beams!r}")
        object.__setattr__(self, "n_beams", int(self.n_beams))
        if not np.isfinite(pos).all():
            raise ValidationError("positions contain non-finite values")
        if not np.isfinite(ts).all():
            raise ValidationError("timestamps contain non-finite values")
        if n > 0:
            lo, hi = int(beams.min()), int(beams.max())
            if lo < 1 or hi > self.n_beams:
                raise ValidationError(
                    f"beam_ids must lie in [1, {self.n_beams}], found range [{lo}, {hi}]"
                )

    @property
    def n(self) -> int:
        return self.positions.shape[0]


@dataclass(frozen=True)
class ConversionConfig:
    """Parameters of the point-stream -> curve-cloud split.

    delta: split threshold in meters; a scalar applies to every beam, a
        sequence gives one threshold per beam ID (index 0 = beam 1).
    range_scaling: when True the threshold of an edge is scaled by
        sqrt(range / reference_range), where range is the distance of the
        edge's earlier point from sensor_origin.
    """

    delta: float | np.ndarray = 0.08
    range_scaling: bool = False
    sensor_origin: np.ndarray = field(default_factory=lambda: np.zeros(3))
    reference_range: float = 1.0

    def __post_init__(self):
        d = np.atleast_1d(np.asarray(self.delta, np.float64))
        if d.ndim != 1 or d.size == 0:
            raise ValidationError(f"delta must be a scalar or 1-D sequence, got shape {d.shape}")
        if not np.isfinite(d).all() or (d <= 0).any():
            raise ValidationError("every delta must be finite and > 0")
        object.__setattr__(self, "delta", d)
        origin = np.ascontiguousarray(self.sensor_origin, np.float64)
        if origin.shape != (3,) or not np.isfinite(origin).all():
            raise ValidationError("sensor_origin must be a finite 3-vector")
        object.__setattr__(self, "sensor_origin", origin)
        if not (np.isfinite(self.reference_range) and self.reference_range > 0):
            raise ValidationError(f"reference_range must be > 0, got {self.reference_range}")
        object.__setattr__(self, "reference_range", float(self.reference_range))

    def per_beam_delta(self, n_beams: int) -> np.ndarray:
        """Threshold array of shape (n_beams,); broadcasts a scalar delta."""
        if self.delta.size == 1:
            return np.full(n_beams, self.delta[0])
        if self.delta.size != n_beams:
            raise ValidationError(
                f"delta has {self.delta.size} entries but the stream has {n_beams} beams"
            )
        return self.delta


# Shipped thresholds: outdoor spinning scanners, small object-scale scans,
# and a five-scanner vehicle rig (per-scanner values; the mapping of list
# position to physical scanner is arbitrary and only needs to be consistent).
CONVERSION_PRESETS: dict[str, ConversionConfig] = {
    "outdoor-spinning": ConversionConfig(delta=0.08),
    "object-scale": ConversionConfig(delta=0.01),
    "multi-head-rig": ConversionConfig(delta=[0.1, 0.17, 0.1, 0.12, 0.1]),
}


@dataclass(frozen=True)
class CurveCloud:
    """Points grouped into curves: curve j owns positions[offsets[j]:offsets[j+1]].

    positions are ordered along each curve (acquisition order). source_beam
    records which beam produced each curve.
    """

    positions: np.ndarray
    offsets: np.ndarray
    source_beam: np.ndarray

    def __post_init__(self):
        pos = _as_positions(self.positions, "positions")
        offsets = _as_i64(self.offsets, "offsets")
        beams = _as_i64(self.source_beam, "source_beam")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "offsets", offsets)
        object.__setattr__(self, "source_beam", beams)
        if offsets.shape[0] < 1 or offsets[0] != 0 or offsets[-1] != pos.shape[0]:
            raise ValidationError(
                f"offsets must start at 0 and end at N={pos.shape[0]}, got "
                f"[{offsets[0] if offsets.size else '?'} .. {offsets[-1] if offsets.size else '?'}]"
            )
        if offsets.shape[0] > 1 and (np.diff(offsets) <= 0).any():
            j = int(np.flatnonzero(np.diff(offsets) <= 0)[0])
            raise ValidationError(f"offsets not strictly increasing at index {j + 1}")
        if beams.shape[0] != offsets.shape[0] - 1:
            raise ValidationError(
                f"source_beam has {beams.shape[0]} entries for {offsets.shape[0] - 1} curves"
            )
        if not np.isfinite(pos).all():
            raise ValidationError("positions contain non-finite values")

    @property
    def n(self) -> int:
        """Total point count."""
        return self.positions.shape[0]

    @property
    def n_curves(self) -> int:
        return self.offsets.shape[0] - 1

    def curve_slice(self, j: int) -> tuple[int, int]:
        return int(self.offsets[j]), int(self.offsets[j + 1])

    def curve_points(self, j: int) -> np.ndarray:
        s, e = self.curve_slice(j)
        return self.positions[s:e]

    def curve_of(self, indices: np.ndarray) -> np.ndarray:
        """Curve index owning each global point index."""
        return np.searchsorted(self.offsets, np.asarray(indices), side="right") - 1


@dataclass(frozen=True)
class GeodesicTable:
    """Cumulative arc length per point, reset to 0 at each curve's first point."""

    cumlen: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "cumlen", np.ascontiguousarray(self.cumlen, np.float64))


def build_curve_cloud(pc: PointCloud, cfg: ConversionConfig) -> CurveCloud:
    """Split a point stream into curves.

    Points are grouped by beam and ordered by timestamp (ties keep input
    order); a curve ends where the distance between consecutive points
    exceeds the beam's effective threshold. With range scaling the
    threshold of an edge is delta * sqrt(range / reference_range) using the
    earlier point's distance from the sensor. Output curves are ordered by
    (beam, first timestamp) ascending.
    """
    n = pc.n
    if n == 0:
        return CurveCloud(
            positions=np.zeros((0, 3)), offsets=np.zeros(1, np.int64), source_beam=np.zeros(0, np.int64)
        )
    deltas = cfg.per_beam_delta(pc.n_beams)
    order = np.lexsort((pc.timestamps, pc.beam_ids))
    pos = np.ascontiguousarray(pc.positions[order])
    beams = np.ascontiguousarray(pc.beam_ids[order])
    flags = _backend.split_flags(
        pos, beams, deltas, cfg.range_scaling, cfg.sensor_origin, cfg.reference_range
    )
    starts = np.flatnonzero(flags) + 1
    offsets = np.empty(starts.shape[0] + 2, np.int64)
    offsets[0] = 0
    offsets[1:-1] = starts
    offsets[-1] = n
    return CurveCloud(positions=pos, offsets=offsets, source_beam=beams[offsets[:-1]])


def geodesic_lengths(cc: CurveCloud) -> GeodesicTable:
    """Cumulative Euclidean edge lengths along each curve."""
    return GeodesicTable(_backend.cumulative_lengths(cc.positions, cc.offsets))


def validate(cc: CurveCloud, cfg: ConversionConfig) -> list[str]:
    """Diagnostic check of every CurveCloud invariant; empty list iff valid.

    Never raises: intended for data that may have been tampered with or
    deserialized from an untrusted file.
    """
    violations: list[str] = []
    pos = np.asarray(cc.positions, np.float64)
    offsets = np.asarray(cc.offsets, np.int64)
    beams = np.asarray(cc.source_beam, np.int64)
    n = pos.shape[0]
    if offsets.size == 0 or offsets[0] != 0:
        violations.append("offsets[0] must be 0")
        return violations
    if offsets[-1] != n:
        violations.append(f"offsets[-1] is {offsets[-1]} but N is {n}")
        return violations
    steps = np.diff(offsets)
    for j in np.flatnonzero(steps <= 0):
        violations.append(f"offsets not strictly increasing at index {int(j) + 1} (empty curve)")
    if violations:
        return violations
    if beams.shape[0] != offsets.shape[0] - 1:
        violations.append(
            f"source_beam has {beams.shape[0]} entries for {offsets.shape[0] - 1} curves"
        )
        return violations
    if not np.isfinite(pos).all():
        violations.append("positions contain non-finite values")
        return violations
    if n < 2:
        return violations
    if beams.min() < 1:
        violations.append("source_beam contains ids < 1")
        return violations
    max_beam = int(beams.max())
    if cfg.delta.size == 1:
        deltas = np.full(max_beam, cfg.delta[0])
    elif cfg.delta.size >= max_beam:
        deltas = cfg.delta
    else:
        violations.append(
            f"curve beam id {max_beam} exceeds the {cfg.delta.size}-beam delta table"
        )
        return violations
    point_beams = np.repeat(beams, steps)
    flags = _backend.split_flags(
        np.ascontiguousarray(pos),
        np.ascontiguousarray(point_beams),
        np.ascontiguousarray(deltas, np.float64),
        cfg.range_scaling,
        cfg.sensor_origin,
        cfg.reference_range,
    )
    intra = np.ones(n - 1, bool)
    intra[offsets[1:-1] - 1] = False
    for i in np.flatnonzero(flags & intra):
        j = int(np.searchsorted(offsets, i, side="right") - 1)
        violations.append(
            f"curve {j} edge {int(i) - int(offsets[j])} exceeds its effective threshold"
        )
    return violations


def permute_curves(cc: CurveCloud, perm) -> tuple[CurveCloud, np.ndarray]:
    """Reorder curves by ``perm``; returns the new cloud and the point index map.

    index_map[k] is the old global index of new point k, so any per-point
    array ``a`` transports as ``a[index_map]``.
    """
    perm = _as_i64(perm, "perm")
    if sorted(perm.tolist()) != list(range(cc.n_curves)):
        raise ValidationError("perm must be a permutation of range(n_curves)")
    counts = np.diff(cc.offsets)[perm]
    offsets = np.zeros(cc.n_curves + 1, np.int64)
    np.cumsum(counts, out=offsets[1:])
    index_map = np.concatenate(
        [np.arange(*cc.curve_slice(int(j))) for j in perm]
    ) if cc.n_curves else np.zeros(0, np.int64)
    return (
        CurveCloud(cc.positions[index_map], offsets, cc.source_beam[perm]),
        index_map,
    )


def reverse_curves(cc: CurveCloud) -> tuple[CurveCloud, np.ndarray]:
    """Reverse point order within every curve; returns new cloud + index map."""
    index_map = np.concatenate(
        [np.arange(e - 1, s - 1, -1) for s, e in map(cc.curve_slice, range(cc.n_curves))]
    ) if cc.n_curves else np.zeros(0, np.int64)
    return CurveCloud(cc.positions[index_map], cc.offsets, cc.source_beam), index_map
