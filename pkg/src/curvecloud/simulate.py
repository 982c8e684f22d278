"""Synthetic laser-scan generation over analytic scenes.

A virtual sensor traces traversal lines across a square image plane
(parallel rows, alternating grid, random chords, or per-beam Lissajous
trajectories), casting one ray per pixel step and keeping the nearest
primitive hit. Each traversal carries one beam ID; sample ticks are
pre-assigned per traversal (one microsecond per pixel step, consumed on
hits and misses alike), so timestamps are monotone within a traversal,
distinct traversals own disjoint ascending time ranges, and the output
is independent of any execution schedule. Traversals repeat until the
point budget is met; the final traversal is truncated to land on it
exactly. Everything is deterministic under the config seed.

Scenes are unions of analytic primitives (spheres, axis-aligned boxes,
planes), so every returned point can be checked against an exact surface
equation instead of a mesh.
"""

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptyScanError, ValidationError
from .model import ConversionConfig, PointCloud, build_curve_cloud

_T_MIN = 1e-9  # smallest ray parameter accepted as a forward hit
_TICK_SECONDS = 1e-6  # one traversal sample per microsecond

PATTERNS = ("parallel", "grid", "random", "lissajous")


def _as_vec3(value, name: str) -> np.ndarray:
    v = np.asarray(value, dtype=np.float64)
    if v.shape != (3,):
        raise ValidationError(f"{name} must be a 3-vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValidationError(f"{name} must be finite")
    return v


@dataclass(frozen=True)
class Sphere:
    """Sphere surface |p - center| = radius."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", _as_vec3(self.center, "center"))
        if not (np.isfinite(self.radius) and self.radius > 0):
            raise ValidationError(f"sphere radius must be > 0, got {self.radius}")

    def intersect(self, origin: np.ndarray, dirs: np.ndarray) -> np.ndarray:
        oc = origin - self.center
        b = dirs @ oc  # dirs are unit vectors, so a == 1
        c = oc @ oc - self.radius * self.radius
        disc = b * b - c
        t = np.full(dirs.shape[0], np.inf)
        ok = disc >= 0.0
        root = np.sqrt(np.where(ok, disc, 0.0))
        near = -b - root
        far = -b + root
        cand = np.where(near > _T_MIN, near, far)
        good = ok & (cand > _T_MIN)
        t[good] = cand[good]
        return t

    def surface_residual(self, points: np.ndarray) -> np.ndarray:
        return np.abs(np.linalg.norm(points - self.center, axis=1) - self.radius)


@dataclass(frozen=True)
class Box:
    """Axis-aligned box surface between corners lo and hi."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lo", _as_vec3(self.lo, "lo"))
        object.__setattr__(self, "hi", _as_vec3(self.hi, "hi"))
        if not np.all(self.lo < self.hi):
            raise ValidationError("box needs lo < hi on every axis")

    def intersect(self, origin: np.ndarray, dirs: np.ndarray) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            inv = 1.0 / dirs
            t1 = (self.lo - origin) * inv
            t2 = (self.hi - origin) * inv
        lo = np.minimum(t1, t2)
        hi = np.maximum(t1, t2)
        # A zero direction component gives nan when the origin sits exactly on
        # a slab boundary; treat it as no constraint from that axis.
        near = np.nanmax(np.where(np.isnan(lo), -np.inf, lo), axis=1)
        far = np.nanmin(np.where(np.isnan(hi), np.inf, hi), axis=1)
        t = np.full(dirs.shape[0], np.inf)
        cand = np.where(near > _T_MIN, near, far)
        good = (near <= far) & (cand > _T_MIN)
        t[good] = cand[good]
        return t

    def surface_residual(self, points: np.ndarray) -> np.ndarray:
        center = 0.5 * (self.lo + self.hi)
        half = 0.5 * (self.hi - self.lo)
        q = np.abs(points - center) - half
        outside = np.linalg.norm(np.maximum(q, 0.0), axis=1)
        inside = np.minimum(np.max(q, axis=1), 0.0)
        return np.abs(outside + inside)


@dataclass(frozen=True)
class Plane:
    """Infinite plane {p : normal . p = offset}; stored with a unit normal."""

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        n = _as_vec3(self.normal, "normal")
        length = float(np.linalg.norm(n))
        if length < 1e-12:
            raise ValidationError("plane normal must be nonzero")
        object.__setattr__(self, "normal", n / length)
        object.__setattr__(self, "offset", float(self.offset) / length)

    def intersect(self, origin: np.ndarray, dirs: np.ndarray) -> np.ndarray:
        denom = dirs @ self.normal
        num = self.offset - origin @ self.normal
        t = np.full(dirs.shape[0], np.inf)
        good = np.abs(denom) > 1e-12
        cand = np.where(good, num / np.where(good, denom, 1.0), np.inf)
        good &= cand > _T_MIN
        t[good] = cand[good]
        return t

    def surface_residual(self, points: np.ndarray) -> np.ndarray:
        return np.abs(points @ self.normal - self.offset)


@dataclass(frozen=True)
class SensorPose:
    """Pinhole sensor: origin, orthonormal viewing basis, square field of view."""

    origin: np.ndarray
    forward: np.ndarray
    up: np.ndarray
    fov_degrees: float = 60.0

    def __post_init__(self):
        object.__setattr__(self, "origin", _as_vec3(self.origin, "origin"))
        fwd = _as_vec3(self.forward, "forward")
        norm = float(np.linalg.norm(fwd))
        if norm < 1e-12:
            raise ValidationError("forward must be nonzero")
        fwd = fwd / norm
        up_hint = _as_vec3(self.up, "up")
        right = np.cross(fwd, up_hint)
        norm = float(np.linalg.norm(right))
        if norm < 1e-12:
            raise ValidationError("up must not be parallel to forward")
        right = right / norm
        object.__setattr__(self, "forward", fwd)
        object.__setattr__(self, "up", np.cross(right, fwd))
        object.__setattr__(self, "_right", right)
        if not (0.0 < self.fov_degrees < 180.0):
            raise ValidationError(f"fov_degrees must lie in (0, 180), got {self.fov_degrees}")

    def rays(self, xy: np.ndarray, resolution: int) -> np.ndarray:
        """Unit ray directions for continuous pixel coordinates xy (S, 2)."""
        half = math.tan(math.radians(self.fov_degrees) / 2.0)
        u = (xy[:, 0] / resolution) * 2.0 - 1.0
        v = 1.0 - (xy[:, 1] / resolution) * 2.0
        dirs = (
            self.forward
            + (u * half)[:, None] * self._right
            + (v * half)[:, None] * self.up
        )
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        return dirs


@dataclass(frozen=True)
class Scene:
    """Union of analytic primitives seen from one sensor pose."""

    primitives: tuple
    sensor: SensorPose

    def __post_init__(self):
        prims = tuple(self.primitives)
        object.__setattr__(self, "primitives", prims)
        if not prims:
            raise ValidationError("scene needs at least one primitive")
        for p in prims:
            if not isinstance(p, (Sphere, Box, Plane)):
                raise ValidationError(f"unsupported primitive {type(p).__name__}")

    def intersect(self, dirs: np.ndarray) -> np.ndarray:
        """Nearest forward hit distance per ray; inf where every primitive misses."""
        t = np.full(dirs.shape[0], np.inf)
        for p in self.primitives:
            np.minimum(t, p.intersect(self.sensor.origin, dirs), out=t)
        return t

    def surface_residual(self, points: np.ndarray) -> np.ndarray:
        """Distance from each point to the closest primitive surface."""
        r = np.full(points.shape[0], np.inf)
        for p in self.primitives:
            np.minimum(r, p.surface_residual(points), out=r)
        return r


@dataclass(frozen=True)
class ScanConfig:
    """Traversal pattern and sampling parameters for one simulated scan."""

    pattern: str
    beams: int
    budget: int = 2048
    resolution: int = 2048
    stride: int = 4
    seed: int = 0
    lissajous_freqs: tuple[int, int] = (3, 2)
    max_traversals: int = 8192

    def __post_init__(self):
        if self.pattern not in PATTERNS:
            raise ValueError(f"pattern must be one of {PATTERNS}, got {self.pattern!r}")
        if self.beams < 1:
            raise ValueError(f"beams must be >= 1, got {self.beams}")
        if self.budget < 1:
            raise ValueError(f"budget must be >= 1, got {self.budget}")
        if self.resolution < 2:
            raise ValueError(f"resolution must be >= 2, got {self.resolution}")
        if self.stride < 1:
            raise ValueError(f"stride must be >= 1, got {self.stride}")
        if self.max_traversals < 1:
            raise ValueError(f"max_traversals must be >= 1, got {self.max_traversals}")
        a, b = self.lissajous_freqs
        if a < 1 or b < 1:
            raise ValueError(f"lissajous frequencies must be >= 1, got {self.lissajous_freqs}")
        object.__setattr__(self, "lissajous_freqs", (int(a), int(b)))


def _line_positions(resolution: int, stride: int) -> np.ndarray:
    return np.arange(0, resolution, stride, dtype=np.float64) + 0.5


def _chord_samples(i: float, j: float, theta: float, resolution: int, stride: int) -> np.ndarray:
    """Pixel coordinates marched along the full image chord through (i, j)."""
    d = np.array([math.cos(theta), math.sin(theta)])
    p = np.array([i, j])
    t_lo, t_hi = -np.inf, np.inf
    for a in range(2):
        if abs(d[a]) > 1e-12:
            c1 = (0.0 - p[a]) / d[a]
            c2 = (resolution - p[a]) / d[a]
            t_lo = max(t_lo, min(c1, c2))
            t_hi = min(t_hi, max(c1, c2))
    n = max(1, int((t_hi - t_lo) / stride) + 1)
    t = t_lo + np.arange(n, dtype=np.float64) * stride
    return p + t[:, None] * d


def _traversal(cfg: ScanConfig, k: int, rng: np.random.Generator,
               phases: np.ndarray | None) -> tuple[int, np.ndarray]:
    """Beam ID and image-plane sample coordinates of traversal k."""
    res, b_count = cfg.resolution, cfg.beams
    beam = (k % b_count) + 1
    if cfg.pattern == "parallel":
        along = _line_positions(res, cfg.stride)
        row = ((k % b_count) + 0.5) / b_count * res
        return beam, np.column_stack([along, np.full_like(along, row)])
    if cfg.pattern == "grid":
        along = _line_positions(res, cfg.stride)
        pos = (((k // 2) % b_count) + 0.5) / b_count * res
        if k % 2 == 0:
            return beam, np.column_stack([along, np.full_like(along, pos)])
        return beam, np.column_stack([np.full_like(along, pos), along])
    if cfg.pattern == "random":
        i = rng.uniform(0.0, res)
        j = rng.uniform(0.0, res)
        theta = rng.uniform(0.0, math.pi)
        return beam, _chord_samples(i, j, theta, res, cfg.stride)
    # lissajous: one full period of this beam's phase-shifted trajectory,
    # stepped so the fastest image-plane motion advances ~stride pixels.
    a, b = cfg.lissajous_freqs
    speed = (res - 1) / 2.0 * math.hypot(a, b)
    dtau = cfg.stride / speed
    n = int(math.ceil(2.0 * math.pi / dtau))
    tau = np.arange(n, dtype=np.float64) * dtau
    p1, p2 = phases[beam - 1]
    x = (np.sin(a * tau + p1) + 1.0) / 2.0 * (res - 1) + 0.5
    y = (np.sin(b * tau + p2) + 1.0) / 2.0 * (res - 1) + 0.5
    return beam, np.column_stack([x, y])


def simulate(scene: Scene, cfg: ScanConfig) -> PointCloud:
    """Scan the scene until the point budget is met; see the module docstring.

    Raises EmptyScanError if no ray hits within one full pattern cycle (at
    least 64 traversals), or if the budget is still unmet after
    cfg.max_traversals traversals.
    """
    rng = np.random.default_rng(cfg.seed)
    phases = None
    if cfg.pattern == "lissajous":
        phases = rng.uniform(0.0, 2.0 * math.pi, (cfg.beams, 2))
    cycle = {"parallel": cfg.beams, "grid": 2 * cfg.beams,
             "random": 64, "lissajous": cfg.beams}[cfg.pattern]
    empty_limit = max(64, cycle)

    positions: list[np.ndarray] = []
    times: list[np.ndarray] = []
    beams: list[np.ndarray] = []
    total = 0
    tick = 0
    for k in range(cfg.max_traversals):
        beam, xy = _traversal(cfg, k, rng, phases)
        dirs = scene.sensor.rays(xy, cfg.resolution)
        t = scene.intersect(dirs)
        hit = np.isfinite(t)
        if hit.any():
            idx = np.flatnonzero(hit)
            if total + idx.size > cfg.budget:
                idx = idx[: cfg.budget - total]
            positions.append(scene.sensor.origin + t[idx, None] * dirs[idx])
            times.append((tick + idx) * _TICK_SECONDS)
            beams.append(np.full(idx.size, beam, dtype=np.int64))
            total += idx.size
        tick += xy.shape[0]
        if total >= cfg.budget:
            return PointCloud(
                np.concatenate(positions),
                np.concatenate(times),
                np.concatenate(beams),
                cfg.beams,
            )
        if total == 0 and k + 1 >= empty_limit:
            raise EmptyScanError(
                f"no ray hit the scene in {k + 1} traversals"
            )
    raise EmptyScanError(
        f"only {total} of {cfg.budget} points found after "
        f"{cfg.max_traversals} traversals"
    )


def pattern_stats(pc: PointCloud, cfg: ScanConfig, delta: float | None = None) -> dict:
    """Structure statistics of a simulated scan after polyline conversion.

    delta defaults to 10x the median consecutive same-beam point spacing,
    which keeps on-surface runs together while splitting at depth jumps.
    """
    counts = np.bincount(pc.beam_ids, minlength=pc.n_beams + 1)[1:] if pc.n else np.zeros(
        pc.n_beams, dtype=np.int64
    )
    stats = {
        "n_points": int(pc.n),
        "n_curves": 0,
        "mean_points_per_curve": 0.0,
        "mean_geodesic_length": 0.0,
        "per_beam_counts": [int(c) for c in counts],
        "delta": 0.0,
    }
    if pc.n == 0:
        return stats
    if delta is None:
        order = np.lexsort((pc.timestamps, pc.beam_ids))
        same = pc.beam_ids[order][1:] == pc.beam_ids[order][:-1]
        gaps = np.linalg.norm(
            pc.positions[order][1:] - pc.positions[order][:-1], axis=1
        )[same]
        delta = 10.0 * float(np.median(gaps)) if gaps.size else 1.0
        if delta <= 0.0:
            delta = 1.0
    cc = build_curve_cloud(pc, ConversionConfig(delta=delta))
    cumlen = np.zeros(cc.n, dtype=np.float64)
    seg = np.linalg.norm(cc.positions[1:] - cc.positions[:-1], axis=1)
    seg[cc.offsets[1:-1] - 1] = 0.0
    np.cumsum(seg, out=cumlen[1:])
    ends = cumlen[cc.offsets[1:] - 1]
    starts = cumlen[cc.offsets[:-1]]
    stats["n_curves"] = int(cc.n_curves)
    stats["mean_points_per_curve"] = float(cc.n / cc.n_curves)
    stats["mean_geodesic_length"] = float(np.mean(ends - starts))
    stats["delta"] = float(delta)
    return stats


# ---------------------------------------------------------------------------
# Scene (de)serialization


def scene_to_dict(scene: Scene) -> dict:
    prims = []
    for p in scene.primitives:
        if isinstance(p, Sphere):
            prims.append({"type": "sphere", "center": p.center.tolist(), "radius": p.radius})
        elif isinstance(p, Box):
            prims.append({"type": "box", "lo": p.lo.tolist(), "hi": p.hi.tolist()})
        else:
            prims.append({"type": "plane", "normal": p.normal.tolist(), "offset": p.offset})
    s = scene.sensor
    return {
        "sensor": {
            "origin": s.origin.tolist(),
            "forward": s.forward.tolist(),
            "up": s.up.tolist(),
            "fov_degrees": s.fov_degrees,
        },
        "primitives": prims,
    }


def scene_from_dict(d: dict) -> Scene:
    try:
        prims = []
        for p in d["primitives"]:
            kind = p["type"]
            if kind == "sphere":
                prims.append(Sphere(p["center"], float(p["radius"])))
            elif kind == "box":
                prims.append(Box(p["lo"], p["hi"]))
            elif kind == "plane":
                prims.append(Plane(p["normal"], float(p["offset"])))
            else:
                raise ValidationError(f"unknown primitive type {kind!r}")
        s = d.get("sensor", {})
        sensor = SensorPose(
            s.get("origin", (0.0, 0.0, 0.0)),
            s.get("forward", (0.0, 0.0, 1.0)),
            s.get("up", (0.0, 1.0, 0.0)),
            float(s.get("fov_degrees", 60.0)),
        )
        return Scene(tuple(prims), sensor)
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed scene description: {exc}") from exc


def scene_from_json(text: str) -> Scene:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"scene is not valid JSON: {exc}") from exc
    return scene_from_dict(d)
