"""Curve operations: sampling, grouping, interpolation, gradients, convolution."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from curvecloud.errors import MismatchError, ValidationError
from curvecloud.model import (
    CurveCloud,
    geodesic_lengths,
    permute_curves,
    reverse_curves,
)
from curvecloud.ops import (
    FeatureMap,
    GroupingConfig,
    SamplingConfig,
    Selection,
    SymmetricKernel,
    conv_symmetric,
    counters,
    fps_1d,
    fps_euclidean,
    gradient_features,
    group_ball3d,
    group_curve,
    interpolate_curve,
    reset_counters,
)

import reference as R
from conftest import make_curves, make_features, make_single_curve


def colinear_curve(n=11, spacing=0.1):
    xs = np.arange(n) * spacing
    pos = np.c_[xs, np.zeros(n), np.zeros(n)]
    cc = CurveCloud(pos, np.array([0, n]), np.array([1]))
    return cc, geodesic_lengths(cc)


class TestFps1d:
    def test_eleven_point_fixture(self):
        # arc lengths 0 .. 1.0 in 0.1 steps; intervals of size 0.25 are
        # [0,0,0,1,1,2,2,2,3,3,4]; firsts are 0,3,5,8,10
        cc, g = colinear_curve()
        sel = fps_1d(cc, g, SamplingConfig(0.25))
        assert np.array_equal(sel.indices, [0, 3, 5, 8, 10])
        assert np.array_equal(sel.offsets, [0, 5])

    def test_single_point_curve(self):
        cc = CurveCloud(np.zeros((1, 3)), np.array([0, 1]), np.array([1]))
        sel = fps_1d(cc, geodesic_lengths(cc), SamplingConfig(0.5))
        assert np.array_equal(sel.indices, [0])

    def test_epsilon_beyond_length_keeps_first_point_only(self):
        cc, g = colinear_curve()
        sel = fps_1d(cc, g, SamplingConfig(100.0))
        assert np.array_equal(sel.indices, [0])

    def test_every_curve_contributes(self, rng):
        cc, g = make_curves(rng)
        sel = fps_1d(cc, g, SamplingConfig(0.05))
        assert sel.offsets.shape[0] == cc.n_curves + 1
        assert (np.diff(sel.offsets) >= 1).all()
        # the first point of every curve is always selected
        assert set(cc.offsets[:-1]).issubset(set(sel.indices.tolist()))

    def test_matches_interval_oracle(self, rng):
        cc, g = make_curves(rng)
        for eps in (0.013, 0.04, 0.11, 2.0):
            sel = fps_1d(cc, g, SamplingConfig(eps))
            assert np.array_equal(sel.indices, R.reference_fps1d(cc, g, eps))

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 2**31 - 1))
    def test_interval_oracle_property(self, seed):
        rng = np.random.default_rng(seed)
        cc, g = make_curves(rng, n_beams=2, curves_per_beam=2)
        eps = float(rng.uniform(0.01, 0.3))
        sel = fps_1d(cc, g, SamplingConfig(eps))
        assert np.array_equal(sel.indices, R.reference_fps1d(cc, g, eps))

    def test_spacing_bound_on_dense_curve(self, rng):
        # when every edge is <= eps/4, consecutive selected points sit
        # within eps +/- (longest edge); the final gap may only be shorter
        cc, g = make_single_curve(rng, 800, spacing=(0.004, 0.006))
        eps = 0.08
        e_max = float(np.diff(g.cumlen).max())
        assert e_max <= eps / 4
        sel = fps_1d(cc, g, SamplingConfig(eps))
        gaps = np.diff(g.cumlen[sel.indices])
        assert (gaps <= eps + e_max).all()
        assert (gaps[:-1] >= eps - e_max).all()

    def test_invalid_epsilon(self):
        with pytest.raises(ValueError):
            SamplingConfig(0.0)
        with pytest.raises(ValueError):
            SamplingConfig(-1.0)

    def test_permuting_curves_permutes_selection(self, rng):
        cc, g = make_curves(rng)
        sel = fps_1d(cc, g, SamplingConfig(0.03))
        perm = rng.permutation(cc.n_curves)
        cc2, imap = permute_curves(cc, perm)
        sel2 = fps_1d(cc2, geodesic_lengths(cc2), SamplingConfig(0.03))
        # the selected points are the same physical points
        assert np.array_equal(np.sort(imap[sel2.indices]), np.sort(sel.indices))
        # per-curve counts transport through the permutation
        assert np.array_equal(np.diff(sel2.offsets), np.diff(sel.offsets)[perm])


class TestFpsEuclidean:
    def test_three_point_fixture(self):
        # greedy from index 0 on x = (0, 1, 10): farthest is 10, so {0, 2}
        pts = np.array([[0.0, 0, 0], [1.0, 0, 0], [10.0, 0, 0]])
        sel = fps_euclidean(pts, 2)
        assert np.array_equal(sel.indices, [0, 2])
        assert sel.offsets is None

    def test_count_equals_n_visits_everything(self, rng):
        pts = rng.normal(size=(40, 3))
        sel = fps_euclidean(pts, 40)
        assert np.array_equal(np.sort(sel.indices), np.arange(40))
        assert sel.indices[0] == 0

    def test_matches_greedy_oracle(self, rng):
        pts = rng.normal(size=(300, 3))
        for count in (1, 2, 17, 300):
            sel = fps_euclidean(pts, count)
            assert np.array_equal(sel.indices, R.reference_fps_euclidean(pts, count))

    def test_bad_count_rejected(self, rng):
        pts = rng.normal(size=(5, 3))
        with pytest.raises(ValueError):
            fps_euclidean(pts, 0)
        with pytest.raises(ValueError):
            fps_euclidean(pts, 6)

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 2**31 - 1))
    def test_greedy_oracle_property(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 120))
        pts = rng.normal(size=(n, 3))
        count = int(rng.integers(1, n + 1))
        sel = fps_euclidean(pts, count)
        assert np.array_equal(sel.indices, R.reference_fps_euclidean(pts, count))


class TestGroupCurve:
    def test_radius_below_shortest_edge_keeps_centroid_only(self):
        cc, g = colinear_curve()
        sel = Selection(np.array([5]), np.array([0, 1]))
        nb = group_curve(cc, g, sel, GroupingConfig(0.05))
        assert np.array_equal(nb.members(0), [5])

    def test_interior_centroid_fixture(self):
        # |cumlen - 0.5| < 0.25 on the 0.1-spaced line selects 3..7
        cc, g = colinear_curve()
        sel = Selection(np.array([5]), np.array([0, 1]))
        nb = group_curve(cc, g, sel, GroupingConfig(0.25))
        assert np.array_equal(nb.members(0), [3, 4, 5, 6, 7])
        assert nb.start[0] == 3 and nb.stop[0] == 8

    def test_endpoint_centroid_one_sided(self):
        cc, g = colinear_curve()
        sel = Selection(np.array([0]), np.array([0, 1]))
        nb = group_curve(cc, g, sel, GroupingConfig(0.25))
        assert np.array_equal(nb.members(0), [0, 1, 2])

    def test_members_are_contiguous_ranges(self, rng):
        cc, g = make_curves(rng)
        sel = fps_1d(cc, g, SamplingConfig(0.04))
        nb = group_curve(cc, g, sel, GroupingConfig(0.06))
        for c in range(nb.n):
            m = nb.members(c)
            assert np.array_equal(m, np.arange(m[0], m[-1] + 1))
            assert nb.centroids[c] in m

    def test_matches_brute_filter(self, rng):
        cc, g = make_curves(rng)
        sel = fps_1d(cc, g, SamplingConfig(0.04))
        for r in (0.015, 0.06, 0.5):
            nb = group_curve(cc, g, sel, GroupingConfig(r))
            want = R.brute_group_curve(cc, g, sel.indices, r)
            for c in range(nb.n):
                assert np.array_equal(nb.members(c), want[c])

    def test_never_crosses_curve_boundary(self, rng):
        cc, g = make_curves(rng)
        sel = fps_1d(cc, g, SamplingConfig(0.04))
        nb = group_curve(cc, g, sel, GroupingConfig(1e6))
        curve_of_centroid = cc.curve_of(nb.centroids)
        for c in range(nb.n):
            s, e = cc.curve_slice(int(curve_of_centroid[c]))
            assert np.array_equal(nb.members(c), np.arange(s, e))

    def test_cap_keeps_closest_contiguous(self, rng):
        cc, g = make_curves(rng)
        sel = fps_1d(cc, g, SamplingConfig(0.04))
        full = group_curve(cc, g, sel, GroupingConfig(0.08))
        capped = group_curve(cc, g, sel, GroupingConfig(0.08, max_neighbors=5))
        for c in range(capped.n):
            m = capped.members(c)
            assert m.shape[0] <= 5
            assert np.array_equal(m, np.arange(m[0], m[-1] + 1))
            fm = full.members(c)
            d = np.abs(g.cumlen[fm] - g.cumlen[capped.centroids[c]])
            assert np.array_equal(m, R.ref_cap_members(d, fm, 5))

    def test_cap_tie_prefers_lower_index(self):
        # centroid 2 on the symmetric line: distances tie pairwise; the
        # lower-index (left) member wins each tie
        cc, g = colinear_curve(5)
        sel = Selection(np.array([2]), np.array([0, 1]))
        nb = group_curve(cc, g, sel, GroupingConfig(0.35, max_neighbors=2))
        assert np.array_equal(nb.members(0), [1, 2])


class TestGroupBall3d:
    def test_huge_radius_gathers_everything(self, rng):
        pts = rng.normal(size=(50, 3))
        nb = group_ball3d(pts, np.array([4, 7]), 1e9)
        assert np.array_equal(nb.members(0), np.arange(50))
        assert np.array_equal(nb.members(1), np.arange(50))

    def test_colinear_curve_matches_geodesic_grouping(self):
        # on a straight line Euclidean and arc-length distance coincide
        cc, g = colinear_curve()
        sel = Selection(np.array([5]), np.array([0, 1]))
        geo = group_curve(cc, g, sel, GroupingConfig(0.25))
        ball = group_ball3d(cc.positions, sel, 0.25)
        assert np.array_equal(geo.members(0), ball.members(0))

    def test_u_shape_ball_crosses_arms_geodesic_does_not(self):
        # a tight U: the two arms pass within 0.05 of each other, but the
        # geodesic path between them runs around the bend (~1 m)
        t = np.linspace(0.0, 1.0, 21)
        left = np.c_[np.zeros(21), t[::-1], np.zeros(21)]
        right = np.c_[np.full(21, 0.05), t, np.zeros(21)]
        pos = np.concatenate([left, right])
        cc = CurveCloud(pos, np.array([0, 42]), np.array([1]))
        g = geodesic_lengths(cc)
        centroid = 10  # on the left arm
        sel = Selection(np.array([centroid]), np.array([0, 1]))
        ball = group_ball3d(pos, sel, 0.12)
        geo = group_curve(cc, g, sel, GroupingConfig(0.12))
        ball_arms = set(ball.members(0) // 21)
        geo_arms = set(geo.members(0) // 21)
        assert ball_arms == {0, 1}
        assert geo_arms == {0}

    def test_matches_brute_filter(self, rng):
        pts = rng.normal(size=(200, 3))
        cents = rng.choice(200, 17, replace=False)
        for r in (0.3, 1.0, 2.5):
            nb = group_ball3d(pts, cents, r)
            want = R.brute_ball3d(pts, cents, r)
            for c in range(nb.n):
                assert np.array_equal(nb.members(c), want[c])

    def test_strict_boundary(self):
        pts = np.array([[0.0, 0, 0], [1.0, 0, 0], [0.5, 0, 0]])
        nb = group_ball3d(pts, np.array([0]), 1.0)
        # the point at exactly radius 1.0 is excluded
        assert np.array_equal(nb.members(0), [0, 2])

    def test_cap_keeps_closest(self, rng):
        pts = rng.normal(size=(120, 3)) * 0.3
        cents = np.array([3, 60])
        full = group_ball3d(pts, cents, 0.5)
        capped = group_ball3d(pts, cents, 0.5, max_neighbors=6)
        for c in range(2):
            fm = full.members(c)
            d2 = np.sum((pts[fm] - pts[cents[c]]) ** 2, axis=1)
            assert np.array_equal(capped.members(c), R.ref_cap_members(d2, fm, 6))

    def test_bad_radius_rejected(self, rng):
        pts = rng.normal(size=(5, 3))
        with pytest.raises(ValueError):
            group_ball3d(pts, np.array([0]), 0.0)
        with pytest.raises(ValueError):
            group_ball3d(pts, np.array([0]), np.inf)


class TestInterpolateCurve:
    def test_selected_points_copied_exactly(self, rng):
        cc, g = make_curves(rng)
        sel = fps_1d(cc, g, SamplingConfig(0.04))
        feats = make_features(rng, sel.n, 6)
        out = interpolate_curve(cc, g, sel, feats)
        assert np.array_equal(out.values[sel.indices], feats.values)

    def test_constant_features_reproduced_bitwise(self, rng):
        cc, g = make_curves(rng)
        sel = fps_1d(cc, g, SamplingConfig(0.04))
        feats = FeatureMap(np.full((sel.n, 3), 0.7))
        out = interpolate_curve(cc, g, sel, feats)
        assert (out.values == 0.7).all()

    def test_midpoint_blend(self):
        # point 1 sits exactly between selected points 0 and 2
        cc, g = colinear_curve(3)
        sel = Selection(np.array([0, 2]), np.array([0, 2]))
        feats = FeatureMap(np.array([[0.0], [1.0]]))
        out = interpolate_curve(cc, g, sel, feats)
        assert np.allclose(out.values[:, 0], [0.0, 0.5, 1.0], atol=1e-12)

    def test_quarter_gap_weights(self):
        # distances 0.1 and 0.3 to the brackets -> weights 0.75 and 0.25
        xs = np.array([0.0, 0.1, 0.4])
        pos = np.c_[xs, np.zeros(3), np.zeros(3)]
        cc = CurveCloud(pos, np.array([0, 3]), np.array([1]))
        g = geodesic_lengths(cc)
        sel = Selection(np.array([0, 2]), np.array([0, 2]))
        feats = FeatureMap(np.array([[1.0], [5.0]]))
        out = interpolate_curve(cc, g, sel, feats)
        assert abs(out.values[1, 0] - (0.75 * 1.0 + 0.25 * 5.0)) < 1e-12

    def test_outside_selected_span_copies_nearest(self):
        cc, g = colinear_curve(5)
        sel = Selection(np.array([1, 3]), np.array([0, 2]))
        feats = FeatureMap(np.array([[2.0], [8.0]]))
        out = interpolate_curve(cc, g, sel, feats)
        assert out.values[0, 0] == 2.0  # before the first selected point
        assert out.values[4, 0] == 8.0  # after the last selected point

    def test_matches_bracket_scan_oracle(self, rng):
        cc, g = make_curves(rng)
        sel = fps_1d(cc, g, SamplingConfig(0.05))
        feats = make_features(rng, sel.n, 4)
        out = interpolate_curve(cc, g, sel, feats)
        want = R.ref_interpolate(cc, g, sel, feats.values)
        assert np.allclose(out.values, want, rtol=1e-12, atol=1e-12)

    def test_structure_mismatch_rejected(self, rng):
        cc, g = make_curves(rng)
        sel = fps_1d(cc, g, SamplingConfig(0.05))
        with pytest.raises(MismatchError):
            interpolate_curve(cc, g, sel, make_features(rng, sel.n + 1, 4))
        with pytest.raises(ValidationError):
            interpolate_curve(cc, g, Selection(sel.indices), make_features(rng, sel.n, 4))


class TestGradientFeatures:
    def test_constant_is_zero(self, rng):
        cc, g = make_curves(rng)
        feats = FeatureMap(np.full((cc.n, 2), 3.3))
        out = gradient_features(cc, feats)
        assert (out.values == 0.0).all()

    def test_three_point_fixture(self):
        # f = (1, 2, 4): one-sided |2-1|, central |(4-1)/2|, one-sided |4-2|
        cc, _ = colinear_curve(3)
        out = gradient_features(cc, FeatureMap(np.array([[1.0], [2.0], [4.0]])))
        assert np.array_equal(out.values[:, 0], [1.0, 1.5, 2.0])

    def test_single_point_curve_is_zero(self):
        cc = CurveCloud(np.zeros((1, 3)), np.array([0, 1]), np.array([1]))
        out = gradient_features(cc, FeatureMap(np.array([[9.0]])))
        assert out.values[0, 0] == 0.0

    def test_reversal_leaves_magnitudes_in_place(self, rng):
        cc, _ = make_curves(rng)
        feats = make_features(rng, cc.n, 3)
        fwd = gradient_features(cc, feats)
        rev_cc, imap = reverse_curves(cc)
        rev = gradient_features(rev_cc, FeatureMap(feats.values[imap]))
        assert np.array_equal(rev.values, fwd.values[imap])

    def test_matches_loop_oracle(self, rng):
        cc, _ = make_curves(rng)
        feats = make_features(rng, cc.n, 3)
        out = gradient_features(cc, feats)
        assert np.allclose(out.values, R.ref_gradient(cc, feats.values), atol=1e-14)

    def test_row_count_mismatch_rejected(self, rng):
        cc, _ = make_curves(rng)
        with pytest.raises(MismatchError):
            gradient_features(cc, make_features(rng, cc.n + 1, 2))


def one_channel_kernel(taps, grad_taps=None):
    """Symmetric kernel on (feature, gradient) channels from center-out taps."""
    taps = np.asarray(taps, float)
    size = 2 * taps.size - 1
    half = np.zeros((taps.size, 2, 1))
    half[:, 0, 0] = taps[::-1]  # outermost tap first
    if grad_taps is not None:
        half[:, 1, 0] = np.asarray(grad_taps, float)[::-1]
    return SymmetricKernel(size=size, half_weights=half, bias=np.zeros(1))


class TestSymmetricKernel:
    def test_even_size_rejected(self):
        with pytest.raises(ValidationError):
            SymmetricKernel(size=4, half_weights=np.zeros((2, 1, 1)), bias=np.zeros(1))

    def test_from_full_requires_mirror(self):
        w = np.zeros((3, 1, 1))
        w[0, 0, 0] = 1.0
        with pytest.raises(ValidationError):
            SymmetricKernel.from_full(w, np.zeros(1))

    def test_materialize_is_mirrored(self, rng):
        k = SymmetricKernel(size=5, half_weights=rng.normal(size=(3, 2, 4)), bias=np.zeros(4))
        full = k.materialize()
        assert np.array_equal(full, full[::-1])
        assert np.array_equal(full[0], k.half_weights[0])
        assert np.array_equal(full[2], k.half_weights[2])

    def test_from_full_round_trip(self, rng):
        half = rng.normal(size=(2, 3, 2))
        k = SymmetricKernel(size=3, half_weights=half, bias=rng.normal(size=2))
        k2 = SymmetricKernel.from_full(k.materialize(), k.bias)
        assert np.array_equal(k2.half_weights, k.half_weights)


class TestConvSymmetric:
    def test_three_point_fixture(self):
        # features (1,2,3), taps (1,2,1) on the feature channel, replicate
        # padding: outputs (1+2+2, 1+4+3, 2+6+3) = (5, 8, 11)
        cc, _ = colinear_curve(3)
        feats = FeatureMap(np.array([[1.0], [2.0], [3.0]]))
        out = conv_symmetric(cc, feats, one_channel_kernel([2.0, 1.0]))
        assert np.array_equal(out.values[:, 0], [5.0, 8.0, 11.0])

    def test_constant_input_sums_taps(self, rng):
        cc, _ = make_curves(rng)
        feats = FeatureMap(np.full((cc.n, 1), 2.0))
        out = conv_symmetric(cc, feats, one_channel_kernel([0.5, 0.25]))
        # gradients are 0, so every output is 2 * (0.25 + 0.5 + 0.25)
        assert np.allclose(out.values, 2.0, atol=1e-14)
        assert np.allclose(out.values, out.values[0, 0], atol=0)

    def test_reversal_equivariant_bitwise(self, rng):
        cc, _ = make_curves(rng)
        feats = make_features(rng, cc.n, 2)
        kernel = SymmetricKernel(
            size=5, half_weights=rng.normal(size=(3, 4, 3)), bias=rng.normal(size=3)
        )
        fwd = conv_symmetric(cc, feats, kernel)
        rev_cc, imap = reverse_curves(cc)
        rev = conv_symmetric(rev_cc, FeatureMap(feats.values[imap]), kernel)
        assert np.array_equal(rev.values, fwd.values[imap])

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 2**31 - 1))
    def test_reversal_equivariance_property(self, seed):
        rng = np.random.default_rng(seed)
        cc, _ = make_curves(rng, n_beams=2, curves_per_beam=2, lo=3, hi=20)
        feats = make_features(rng, cc.n, 1)
        size = int(rng.choice([1, 3, 5, 7]))
        kernel = SymmetricKernel(
            size=size,
            half_weights=rng.normal(size=((size + 1) // 2, 2, 2)),
            bias=rng.normal(size=2),
        )
        fwd = conv_symmetric(cc, feats, kernel)
        rev_cc, imap = reverse_curves(cc)
        rev = conv_symmetric(rev_cc, FeatureMap(feats.values[imap]), kernel)
        assert np.array_equal(rev.values, fwd.values[imap])

    def test_matches_window_oracle(self, rng):
        cc, _ = make_curves(rng)
        feats = make_features(rng, cc.n, 3)
        kernel = SymmetricKernel(
            size=3, half_weights=rng.normal(size=(2, 6, 4)), bias=rng.normal(size=4)
        )
        out = conv_symmetric(cc, feats, kernel)
        want = R.ref_conv_symmetric(cc, feats, kernel)
        rel = np.abs(out.values - want) / (np.abs(want) + 1e-12)
        assert rel.max() < 1e-10

    def test_channel_mismatch_rejected(self, rng):
        cc, _ = make_curves(rng)
        feats = make_features(rng, cc.n, 3)  # provides 6 channels with gradients
        kernel = SymmetricKernel(
            size=3, half_weights=np.zeros((2, 4, 2)), bias=np.zeros(2)
        )
        with pytest.raises(MismatchError):
            conv_symmetric(cc, feats, kernel)

    def test_kernel_size_one(self, rng):
        cc, _ = make_curves(rng)
        feats = make_features(rng, cc.n, 1)
        kernel = one_channel_kernel([3.0])
        out = conv_symmetric(cc, feats, kernel)
        assert np.allclose(out.values, 3.0 * feats.values, atol=1e-14)


class TestPermutationInvariance:
    """Curve-level ops commute with curve reordering; Euclidean ops see sets."""

    def test_curve_ops_commute_with_permutation(self, rng):
        cc, g = make_curves(rng)
        feats = make_features(rng, cc.n, 2)
        kernel = SymmetricKernel(
            size=3, half_weights=rng.normal(size=(2, 4, 2)), bias=np.zeros(2)
        )
        perm = rng.permutation(cc.n_curves)
        cc2, imap = permute_curves(cc, perm)
        g2 = geodesic_lengths(cc2)
        feats2 = FeatureMap(feats.values[imap])

        grad1 = gradient_features(cc, feats)
        grad2 = gradient_features(cc2, feats2)
        assert np.array_equal(grad2.values, grad1.values[imap])

        conv1 = conv_symmetric(cc, feats, kernel)
        conv2 = conv_symmetric(cc2, feats2, kernel)
        assert np.array_equal(conv2.values, conv1.values[imap])

        sel1 = fps_1d(cc, g, SamplingConfig(0.03))
        sel2 = fps_1d(cc2, g2, SamplingConfig(0.03))
        assert np.array_equal(np.sort(imap[sel2.indices]), np.sort(sel1.indices))

    def test_ball3d_is_a_set_operation(self, rng):
        pts = rng.normal(size=(80, 3)) * 0.5
        perm = rng.permutation(80)
        inv = np.empty(80, np.int64)
        inv[perm] = np.arange(80)
        nb1 = group_ball3d(pts, np.array([10]), 0.6)
        nb2 = group_ball3d(pts[perm], np.array([inv[10]]), 0.6)
        assert np.array_equal(np.sort(perm[nb2.members(0)]), np.sort(nb1.members(0)))


class TestCounters:
    def test_ops_bump_their_counters(self, rng):
        cc, g = make_curves(rng)
        reset_counters()
        sel = fps_1d(cc, g, SamplingConfig(0.05))
        group_curve(cc, g, sel, GroupingConfig(0.08))
        fps_euclidean(cc.positions, 4)
        group_ball3d(cc.positions, np.array([0]), 0.1)
        gradient_features(cc, make_features(rng, cc.n, 1))
        got = counters()
        assert got["fps_1d"] == 1
        assert got["group_curve"] == 1
        assert got["fps_euclidean"] == 1
        assert got["group_ball3d"] == 1
        assert got["gradient_features"] == 1
        reset_counters()
        assert counters() == {}
