"""Timing harness for the hot operations, across input sizes and backends.

The benchmark scene is a deterministic multi-beam stream: every beam sweeps
a unit-speed helix with fixed on-curve spacing, jumping far enough every
``gap_every`` samples to split a new curve, with beams interleaved in time
like a real sensor stream. Small samples are amortized over inner loops so
sub-millisecond kernels still time reliably.
"""

import math
import time
from dataclasses import dataclass

import numpy as np

from . import _backend, ops
from .backbone import BackboneConfig, forward, init_backbone_params, toy_profile
from .model import ConversionConfig, PointCloud, build_curve_cloud, geodesic_lengths
from .ops import GroupingConfig, SamplingConfig

BENCH_SPACING = 0.015
BENCH_DELTA = 0.08
BENCH_EPSILON = 30.0
BENCH_RADIUS = 0.09


def make_benchmark_stream(
    n: int,
    beams: int = 64,
    seed: int = 0,
    spacing: float = BENCH_SPACING,
    gap_every: int = 2048,
) -> PointCloud:
    """Deterministic synthetic sensor stream with n points over helical beams."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    beams = min(beams, n)
    per, rem = divmod(n, beams)
    counts = np.full(beams, per, np.int64)
    counts[:rem] += 1
    beam_idx = np.repeat(np.arange(beams, dtype=np.int64), counts)
    starts = np.zeros(beams, np.int64)
    np.cumsum(counts[:-1], out=starts[1:])
    i = np.arange(n, dtype=np.int64) - np.repeat(starts, counts)

    s = spacing * i + 1.0 * (i // gap_every)
    r = 2.0 + 0.01 * (beam_idx + 1)
    a = 0.3 / r
    h = math.sqrt(1.0 - 0.09)
    phase = 2.0 * math.pi * beam_idx / beams
    pos = np.empty((n, 3), np.float64)
    pos[:, 0] = r * np.cos(a * s + phase)
    pos[:, 1] = r * np.sin(a * s + phase)
    pos[:, 2] = h * s
    pos += np.random.default_rng(seed).normal(0.0, 0.0005, (n, 3))

    t = (i * beams + beam_idx).astype(np.float64) * 1e-6
    order = np.argsort(t, kind="stable")
    return PointCloud(pos[order], t[order], beam_idx[order] + 1, beams)


def make_benchmark_curves(n: int, seed: int = 0):
    """Benchmark stream converted to curves, plus its geodesic table."""
    pc = make_benchmark_stream(n, seed=seed)
    cc = build_curve_cloud(pc, ConversionConfig(delta=BENCH_DELTA))
    return cc, geodesic_lengths(cc)


def _setup_fps1d(n):
    cc, g = make_benchmark_curves(n)
    cfg = SamplingConfig(BENCH_EPSILON)
    return lambda: ops.fps_1d(cc, g, cfg)


def _setup_fpseuclid(n):
    cc, g = make_benchmark_curves(n)
    count = ops.fps_1d(cc, g, SamplingConfig(BENCH_EPSILON)).indices.size
    pts = cc.positions
    return lambda: ops.fps_euclidean(pts, count)


def _setup_convert(n):
    pc = make_benchmark_stream(n)
    cfg = ConversionConfig(delta=BENCH_DELTA)
    return lambda: build_curve_cloud(pc, cfg)


def _setup_groupcurve(n):
    cc, g = make_benchmark_curves(n)
    sel = ops.fps_1d(cc, g, SamplingConfig(4 * BENCH_SPACING))
    cfg = GroupingConfig(BENCH_RADIUS, max_neighbors=32)
    return lambda: ops.group_curve(cc, g, sel, cfg)


def _setup_ball3d(n):
    cc, g = make_benchmark_curves(n)
    sel = ops.fps_1d(cc, g, SamplingConfig(4 * BENCH_SPACING))
    pts = cc.positions
    return lambda: ops.group_ball3d(pts, sel, BENCH_RADIUS, max_neighbors=32)


def _setup_forward(n):
    return forward_runner(toy_profile(), n)


OPS = {
    "fps1d": _setup_fps1d,
    "fpseuclid": _setup_fpseuclid,
    "convert": _setup_convert,
    "groupcurve": _setup_groupcurve,
    "ball3d": _setup_ball3d,
    "forward": _setup_forward,
}


def forward_runner(config: BackboneConfig, n: int, seed: int = 0):
    """A zero-argument callable running the configured backbone on the
    n-point benchmark scene; setup (conversion, params) happens here."""
    cc, g = make_benchmark_curves(n, seed=seed)
    params = init_backbone_params(config, seed=seed)
    return lambda: forward(cc, g, None, config, params)


@dataclass(frozen=True)
class BenchResult:
    op: str
    n: int
    backend: str
    samples: tuple[float, ...]  # seconds per run

    @property
    def median(self) -> float:
        return float(np.median(self.samples))

    def to_dict(self) -> dict:
        return {
            "op": self.op,
            "n": self.n,
            "backend": self.backend,
            "samples_ms": [1e3 * s for s in self.samples],
            "median_ms": 1e3 * self.median,
        }


def time_callable(run, repeat: int = 3, min_sample_seconds: float = 0.02) -> tuple[float, ...]:
    """Median-friendly timing: one warmup, then ``repeat`` samples, each
    amortized over enough inner loops to last ``min_sample_seconds``."""
    if repeat < 1:
        raise ValueError(f"repeat must be >= 1, got {repeat}")
    start = time.perf_counter()
    run()
    warm = time.perf_counter() - start
    loops = max(1, min(100000, int(math.ceil(min_sample_seconds / max(warm, 1e-9)))))
    samples = []
    for _ in range(repeat):
        start = time.perf_counter()
        for _ in range(loops):
            run()
        samples.append((time.perf_counter() - start) / loops)
    return tuple(samples)


def run_op(op: str, n: int, repeat: int = 3, backend: str | None = None) -> BenchResult:
    """Time one op at one size; optionally under a specific backend."""
    if op not in OPS:
        raise ValueError(f"unknown op {op!r}; expected one of {sorted(OPS)}")
    prev = _backend.use_backend(backend) if backend else None
    try:
        run = OPS[op](n)
        samples = time_callable(run, repeat=repeat)
        return BenchResult(op, n, _backend.active_backend(), samples)
    finally:
        if prev is not None:
            _backend.use_backend(prev)


def sweep(
    op_names, sizes, repeat: int = 3, backends=None
) -> list[BenchResult]:
    """Cross product of ops x sizes x backends, in deterministic order."""
    backends = list(backends) if backends else [_backend.active_backend()]
    results = []
    for backend in backends:
        for op in op_names:
            for n in sizes:
                results.append(run_op(op, int(n), repeat=repeat, backend=backend))
    return results


def loglog_slope(sizes, seconds) -> float:
    """Least-squares slope of log(time) against log(size)."""
    x = np.log(np.asarray(sizes, dtype=np.float64))
    y = np.log(np.asarray(seconds, dtype=np.float64))
    return float(np.polyfit(x, y, 1)[0])


def format_table(results: list[BenchResult]) -> str:
    header = f"{'op':<12}{'n':>10}{'backend':>10}{'median':>12}  samples (ms)"
    lines = [header, "-" * len(header)]
    for r in results:
        samples = ", ".join(f"{1e3 * s:.3f}" for s in r.samples)
        lines.append(
            f"{r.op:<12}{r.n:>10}{r.backend:>10}{1e3 * r.median:>10.3f} ms  {samples}"
        )
    return "\n".join(lines)
