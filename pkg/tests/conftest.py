"""Shared fixture builders for the test suite."""

import numpy as np
import pytest

from curvecloud import ConversionConfig, CurveCloud, PointCloud, build_curve_cloud
from curvecloud.model import geodesic_lengths
from curvecloud.ops import FeatureMap


def make_stream(rng, n_beams=4, curves_per_beam=5, lo=10, hi=60,
                spacing=(0.005, 0.02)):
    """A beam-tagged point stream made of smooth runs separated by jumps.

    Returns (PointCloud, delta) where delta exceeds every intra-run edge;
    run boundaries land at random far-apart positions, so nearly all of
    them split (tests must not assume an exact curve count).
    """
    parts, beams, times = [], [], []
    t = 0
    for b in range(1, n_beams + 1):
        for _ in range(curves_per_beam):
            n = int(rng.integers(lo, hi))
            start = rng.normal(0.0, 2.0, 3)
            d = rng.normal(0.0, 1.0, 3)
            d /= np.linalg.norm(d)
            steps = rng.uniform(*spacing, (n, 1)) * d
            steps += rng.normal(0.0, 0.1 * spacing[0], (n, 3))
            parts.append(start + np.cumsum(steps, axis=0))
            beams.append(np.full(n, b, dtype=np.int64))
            times.append(np.arange(t, t + n, dtype=np.float64))
            t += n
    pos = np.vstack(parts)
    order = rng.permutation(pos.shape[0])  # stream arrives in scrambled order
    pc = PointCloud(pos[order], np.concatenate(times)[order],
                    np.concatenate(beams)[order], n_beams)
    return pc, 4.0 * spacing[1]


def make_curves(rng, **kw) -> tuple[CurveCloud, object]:
    pc, delta = make_stream(rng, **kw)
    cc = build_curve_cloud(pc, ConversionConfig(delta=delta))
    return cc, geodesic_lengths(cc)


def make_single_curve(rng, n, spacing=(0.01, 0.05)) -> tuple[CurveCloud, object]:
    steps = rng.uniform(*spacing, (n, 1)) * rng.normal(0, 1, 3)
    pos = np.cumsum(steps + rng.normal(0, 0.001, (n, 3)), axis=0)
    cc = CurveCloud(pos, np.array([0, n], dtype=np.int64), np.array([1], dtype=np.int64))
    return cc, geodesic_lengths(cc)


def make_features(rng, n, d) -> FeatureMap:
    return FeatureMap(rng.normal(0.0, 1.0, (n, d)))


@pytest.fixture
def rng():
    return np.random.default_rng(20260814)


@pytest.fixture
def random_stream(rng):
    """(PointCloud, delta) with scrambled arrival order."""
    return make_stream(rng)


@pytest.fixture
def random_curves(rng):
    """(CurveCloud, GeodesicTable) built from a random stream."""
    return make_curves(rng)
