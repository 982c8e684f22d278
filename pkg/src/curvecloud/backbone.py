"""U-shaped encoder-decoder assembly for per-point segmentation.

Curve stages run at high resolution where the polyline structure makes
sampling, grouping, and convolution cheap; point stages take over at low
resolution to move information across curves. The decoder mirrors the
encoder with skip connections, and a head MLP emits per-point class
logits. Inference only.

Three ablation switches swap each specialized curve operation for its
generic point counterpart (interval FPS -> Euclidean FPS, geodesic
grouping -> 3D ball query, curve convolutions -> removed). With FPS and
grouping both ablated no per-curve structure remains meaningful, so curve
stages degrade to point stages entirely and the decoder interpolates with
3-NN inverse-distance weights instead of along curves; ablating all three
axes therefore yields a pure point pipeline.
"""

import json
from dataclasses import dataclass, replace

import numpy as np

from . import ops
from .errors import MismatchError, ValidationError
from .layers import (
    AttentivePoolParams,
    CurveConvBlockParams,
    CurveConvBlockSpec,
    CurveFPParams,
    CurveFPSpec,
    CurveSAParams,
    CurveSASpec,
    GraphConvParams,
    GraphConvSpec,
    MlpParams,
    PointFPParams,
    PointFPSpec,
    PointSAParams,
    PointSASpec,
    _pool_segments,
    apply_mlp,
    curve_conv_block,
    curve_fp,
    graph_conv,
    init_mlp,
    init_params,
    point_fp,
    point_sa,
)
from .model import CurveCloud, GeodesicTable, geodesic_lengths
from .ops import FeatureMap, GroupingConfig, SamplingConfig, Selection

ABLATION_SWITCHES = ("fps", "grouping", "conv")


@dataclass(frozen=True)
class EncoderStage:
    """One encoder stage: kind "curve" (epsilon/radius sampling along curves,
    optional conv block) or "point" (ratio/radius Euclidean sampling,
    optional k-NN graph conv)."""

    kind: str
    width: int
    epsilon: float | None = None
    radius: float | None = None
    conv: bool = True
    conv_widths: tuple[int, int, int] | None = None
    ratio: float | None = None
    k: int | None = None
    max_neighbors: int | None = None

    def __post_init__(self):
        if self.kind not in ("curve", "point"):
            raise ValidationError(f"stage kind must be 'curve' or 'point', got {self.kind!r}")
        if self.width < 1:
            raise ValidationError(f"stage width must be >= 1, got {self.width}")
        if self.radius is None or not (np.isfinite(self.radius) and self.radius > 0):
            raise ValidationError(f"stage radius must be finite and > 0, got {self.radius}")
        if self.kind == "curve":
            if self.epsilon is None or not (np.isfinite(self.epsilon) and self.epsilon > 0):
                raise ValidationError(f"curve stage epsilon must be > 0, got {self.epsilon}")
            if self.conv_widths is not None and len(self.conv_widths) != 3:
                raise ValidationError("conv_widths must have exactly three entries")
        else:
            if self.ratio is None or not (0 < self.ratio <= 1):
                raise ValidationError(f"point stage ratio must lie in (0, 1], got {self.ratio}")
            if self.k is not None and self.k < 1:
                raise ValidationError(f"point stage k must be >= 1, got {self.k}")


@dataclass(frozen=True)
class BackboneConfig:
    """Stage list, decoder widths (one per stage), head width, class count,
    and the three ablation switches."""

    stages: tuple[EncoderStage, ...]
    decoder_widths: tuple[int, ...]
    head_width: int
    classes: int
    input_channels: int = 3
    fps_ablated: bool = False
    grouping_ablated: bool = False
    conv_ablated: bool = False
    fps_ratio: float = 0.25

    def __post_init__(self):
        stages = tuple(self.stages)
        widths = tuple(int(w) for w in self.decoder_widths)
        object.__setattr__(self, "stages", stages)
        object.__setattr__(self, "decoder_widths", widths)
        if not stages:
            raise ValidationError("at least one encoder stage is required")
        if len(widths) != len(stages):
            raise ValidationError(
                f"{len(stages)} encoder stages need {len(stages)} decoder widths, "
                f"got {len(widths)}"
            )
        if any(w < 1 for w in widths):
            raise ValidationError("decoder widths must be >= 1")
        seen_point = False
        for i, st in enumerate(stages):
            if st.kind == "point":
                seen_point = True
            elif seen_point:
                raise ValidationError(
                    f"stage {i}: curve stages must precede point stages"
                )
        if self.head_width < 1 or self.classes < 1:
            raise ValidationError("head_width and classes must be >= 1")
        if self.input_channels < 1:
            raise ValidationError("input_channels must be >= 1")
        if not (0 < self.fps_ratio <= 1):
            raise ValidationError(f"fps_ratio must lie in (0, 1], got {self.fps_ratio}")

    @property
    def n_stages(self) -> int:
        return len(self.stages)


def ablate(config: BackboneConfig, switch: str) -> BackboneConfig:
    """Copy of the config with one curve op swapped for its point counterpart.

    switch: "fps" (interval FPS -> Euclidean FPS), "grouping" (geodesic ->
    3D ball query) or "conv" (curve conv blocks removed). Shapes of all
    remaining parameters are unchanged by "fps"/"grouping"; "conv" removes
    the conv blocks, so params must be re-initialized for the new config.
    """
    if switch == "fps":
        return replace(config, fps_ablated=True)
    if switch == "grouping":
        return replace(config, grouping_ablated=True)
    if switch == "conv":
        return replace(config, conv_ablated=True)
    raise ValueError(f"unknown ablation switch {switch!r}; expected one of {ABLATION_SWITCHES}")


def toy_profile(classes: int = 4, input_channels: int = 3) -> BackboneConfig:
    """Small profile for desk-scale scenes (centimeter point spacing)."""
    return BackboneConfig(
        stages=(
            EncoderStage(kind="curve", width=32, epsilon=0.06, radius=0.09),
            EncoderStage(kind="curve", width=64, epsilon=0.24, radius=0.36),
            EncoderStage(kind="point", width=128, ratio=0.25, radius=0.6, k=8),
        ),
        decoder_widths=(32, 64, 128),
        head_width=32,
        classes=classes,
        input_channels=input_channels,
    )


def wide_profile(classes: int = 16, input_channels: int = 3) -> BackboneConfig:
    """Larger profile in the spirit of outdoor-scale deployments.

    The published architecture figure does not state its per-block widths;
    these values are plausible guesses, shipped as configuration rather
    than constants so deployments can tune them.
    """
    return BackboneConfig(
        stages=(
            EncoderStage(kind="curve", width=64, epsilon=0.4, radius=0.6),
            EncoderStage(kind="curve", width=128, epsilon=1.6, radius=2.4),
            EncoderStage(kind="point", width=256, ratio=0.25, radius=4.0, k=16),
            EncoderStage(kind="point", width=512, ratio=0.25, radius=8.0, k=16),
        ),
        decoder_widths=(64, 128, 256, 512),
        head_width=64,
        classes=classes,
    )


PROFILES = {"toy": toy_profile, "wide": wide_profile}


@dataclass(frozen=True)
class CurveStageParams:
    conv: CurveConvBlockParams | None
    sa: CurveSAParams


@dataclass(frozen=True)
class PointStageParams:
    graph: GraphConvParams | None
    sa: PointSAParams


@dataclass(frozen=True)
class BackboneParams:
    """All weights of one backbone, tied to the config they were built for."""

    config: BackboneConfig
    encoder: tuple
    decoder: tuple
    head: MlpParams


def _curves_run_as_points(config: BackboneConfig) -> bool:
    """True when no curve structure is needed anywhere in the pipeline.

    With FPS and grouping both ablated, structure is only kept alive for
    curve conv blocks; once those are ablated (or absent from every curve
    stage) the curve stages degrade to plain point stages.
    """
    convs_present = any(
        st.kind == "curve" and st.conv for st in config.stages
    ) and not config.conv_ablated
    return config.fps_ablated and config.grouping_ablated and not convs_present


def init_backbone_params(config: BackboneConfig, seed: int) -> BackboneParams:
    """Deterministic initialization of every layer in the configured backbone."""
    master = np.random.default_rng(seed)

    def child() -> int:
        return int(master.integers(0, 2**63 - 1))

    chan = config.input_channels
    encoder = []
    skip_chans = []
    for st in config.stages:
        if st.kind == "curve":
            conv_params = None
            if st.conv and not config.conv_ablated:
                widths = st.conv_widths or (st.width,) * 3
                conv_params = init_params(CurveConvBlockSpec(chan, tuple(widths)), child())
                chan = widths[-1]
            sa = init_params(
                CurveSASpec(chan, st.width, st.epsilon, st.radius, st.max_neighbors), child()
            )
            encoder.append(CurveStageParams(conv_params, sa))
        else:
            gc = None
            if st.k is not None:
                gc = init_params(GraphConvSpec(chan, st.width, st.k), child())
                chan = st.width
            sa = init_params(
                PointSASpec(chan, st.width, st.radius, ratio=st.ratio,
                            max_neighbors=st.max_neighbors),
                child(),
            )
            encoder.append(PointStageParams(gc, sa))
        skip_chans.append(chan)
        chan = st.width
    decoder: list = [None] * config.n_stages
    for i in reversed(range(config.n_stages)):
        st = config.stages[i]
        w = config.decoder_widths[i]
        if st.kind == "curve":
            decoder[i] = init_params(CurveFPSpec(chan, skip_chans[i], w), child())
        else:
            decoder[i] = init_params(PointFPSpec(chan, skip_chans[i], w), child())
        chan = w
    head = init_mlp(
        [chan, config.head_width, config.classes],
        np.random.default_rng(child()),
        final_activation="identity",
    )
    return BackboneParams(config, tuple(encoder), tuple(decoder), head)


@dataclass(frozen=True)
class SegmentationOutput:
    """Per-point class logits; labels are the argmax (ties -> lowest index)."""

    logits: np.ndarray

    @property
    def labels(self) -> np.ndarray:
        return np.argmax(self.logits, axis=1).astype(np.int64)


def _canonical_order(points: np.ndarray) -> np.ndarray:
    """Coordinate-lexicographic point order (x, then y, then z).

    Point stages sort their inputs into this order before any Euclidean
    sampling or grouping, so the whole stage depends only on the point set
    and not on the curve ordering upstream: permuting input curves then
    permutes the logits exactly. The decoder undoes the sort.
    """
    return np.lexsort((points[:, 2], points[:, 1], points[:, 0]))


def _fps_union_first(cc: CurveCloud, count: int) -> Selection:
    """Euclidean FPS selection upgraded to curve structure.

    Used when the FPS axis is ablated but grouping still needs per-curve
    centroids: the greedy Euclidean picks are unioned with each curve's
    first point so every curve keeps at least one centroid.
    """
    base = ops.fps_euclidean(cc.positions, count)
    idx = np.union1d(base.indices, cc.offsets[:-1]).astype(np.int64)
    return Selection(idx, np.searchsorted(idx, cc.offsets).astype(np.int64))


def _encode_pool(positions, feats: FeatureMap, nb, radius, mlp, pool) -> FeatureMap:
    rel = positions[nb.indices] - np.repeat(positions[nb.centroids], np.diff(nb.offsets), axis=0)
    rel /= radius
    x = np.concatenate([rel, feats.values[nb.indices]], axis=1)
    return FeatureMap(_pool_segments(apply_mlp(x, mlp), nb.offsets, pool))


def _interp_3nn(points_hi, points_lo, feats_lo: FeatureMap) -> FeatureMap:
    """Inverse-distance 3-NN interpolation (the point_fp rule, no MLP)."""
    from .layers import _knn_brute

    k = min(3, points_lo.shape[0])
    nbr = _knn_brute(points_hi, points_lo, k, exclude_self=False)
    diff = points_hi[:, None, :] - points_lo[nbr]
    dist = np.sqrt(
        diff[:, :, 0] * diff[:, :, 0]
        + diff[:, :, 1] * diff[:, :, 1]
        + diff[:, :, 2] * diff[:, :, 2]
    )
    g = feats_lo.values[nbr]
    exact = dist[:, 0] < 1e-12
    safe = np.where(dist < 1e-300, 1e-300, dist)
    w = 1.0 / safe
    interp = (w[:, :, None] * g).sum(axis=1) / w.sum(axis=1)[:, None]
    interp[exact] = g[exact, 0]
    return FeatureMap(interp)


def forward(
    cc: CurveCloud,
    g: GeodesicTable,
    input_feats: FeatureMap | None,
    config: BackboneConfig,
    params: BackboneParams,
) -> SegmentationOutput:
    """Run the encoder-decoder and return one logit row per input point.

    input_feats defaults to the raw positions (3 channels). params must
    have been initialized for exactly this config.
    """
    if params.config != config:
        raise MismatchError("params were initialized for a different config")
    if cc.n == 0:
        raise ValidationError("cannot run the backbone on an empty curve cloud")
    if input_feats is None:
        input_feats = FeatureMap(cc.positions)
    if input_feats.n != cc.n:
        raise MismatchError(f"input features have {input_feats.n} rows for {cc.n} points")
    if input_feats.d != config.input_channels:
        raise MismatchError(
            f"config expects {config.input_channels} input channels, got {input_feats.d}"
        )

    curves_as_points = _curves_run_as_points(config)
    feats = input_feats
    cur_cc, cur_g = cc, g
    pts = None
    enc_state: list[tuple] = []

    for i, st in enumerate(config.stages):
        sp = params.encoder[i]
        if st.kind == "curve" and not curves_as_points:
            if sp.conv is not None:
                feats = curve_conv_block(cur_cc, feats, sp.conv)
            sa: CurveSAParams = sp.sa
            if config.fps_ablated:
                count = max(1, int(round(config.fps_ratio * cur_cc.n)))
                sel = _fps_union_first(cur_cc, count)
            else:
                sel = ops.fps_1d(cur_cc, cur_g, SamplingConfig(sa.epsilon))
            if config.grouping_ablated:
                nb = ops.group_ball3d(cur_cc.positions, sel, sa.radius, sa.max_neighbors)
            else:
                nb = ops.group_curve(
                    cur_cc, cur_g, sel, GroupingConfig(sa.radius, sa.max_neighbors)
                )
            pooled = _encode_pool(cur_cc.positions, feats, nb, sa.radius, sa.mlp, sa.pool)
            enc_state.append(("curve", cur_cc, cur_g, sel, feats))
            cur_cc = CurveCloud(cur_cc.positions[sel.indices], sel.offsets, cur_cc.source_beam)
            cur_g = geodesic_lengths(cur_cc)
            feats = pooled
        elif st.kind == "curve":
            # fps + grouping ablated and no conv blocks anywhere: the stage
            # runs as a plain point stage on bare positions.
            order = None
            if pts is None:
                order = _canonical_order(cur_cc.positions)
                pts = cur_cc.positions[order]
                feats = FeatureMap(feats.values[order])
            sa = sp.sa
            count = max(1, int(round(config.fps_ratio * pts.shape[0])))
            sel = ops.fps_euclidean(pts, count)
            nb = ops.group_ball3d(pts, sel, sa.radius, sa.max_neighbors)
            pooled = _encode_pool(pts, feats, nb, sa.radius, sa.mlp, sa.pool)
            enc_state.append(("point", pts, feats, order))
            pts = pts[sel.indices]
            feats = pooled
        else:
            order = None
            if pts is None:
                order = _canonical_order(cur_cc.positions)
                pts = cur_cc.positions[order]
                feats = FeatureMap(feats.values[order])
            sa = sp.sa
            if sp.graph is not None:
                feats = graph_conv(pts, feats, sp.graph)
            pts_lo, pooled = point_sa(pts, feats, sa)
            enc_state.append(("point", pts, feats, order))
            pts = pts_lo
            feats = pooled

    cur_positions = pts if pts is not None else cur_cc.positions
    for i in reversed(range(config.n_stages)):
        state = enc_state[i]
        dp = params.decoder[i]
        if state[0] == "point":
            _, pts_hi, skip, order = state
            if isinstance(dp, CurveFPParams):
                interp = _interp_3nn(pts_hi, cur_positions, feats)
                x = np.concatenate([interp.values, skip.values], axis=1)
                feats = FeatureMap(apply_mlp(x, dp.mlp))
            else:
                feats = point_fp(pts_hi, cur_positions, feats, skip, dp)
            cur_positions = pts_hi
            if order is not None:
                inv = np.empty_like(order)
                inv[order] = np.arange(order.size)
                feats = FeatureMap(feats.values[inv])
                cur_positions = pts_hi[inv]
        else:
            _, cc_hi, g_hi, sel, skip = state
            feats = curve_fp(cc_hi, g_hi, sel, feats, skip, dp)
            cur_positions = cc_hi.positions

    return SegmentationOutput(apply_mlp(feats.values, params.head))


# ---------------------------------------------------------------------------
# Config (de)serialization


def _stage_to_dict(st: EncoderStage) -> dict:
    d = {"kind": st.kind, "width": st.width, "conv": st.conv}
    for name in ("epsilon", "radius", "ratio", "k", "max_neighbors"):
        v = getattr(st, name)
        if v is not None:
            d[name] = v
    if st.conv_widths is not None:
        d["conv_widths"] = list(st.conv_widths)
    return d


def config_to_dict(config: BackboneConfig) -> dict:
    return {
        "stages": [_stage_to_dict(st) for st in config.stages],
        "decoder_widths": list(config.decoder_widths),
        "head_width": config.head_width,
        "classes": config.classes,
        "input_channels": config.input_channels,
        "fps_ablated": config.fps_ablated,
        "grouping_ablated": config.grouping_ablated,
        "conv_ablated": config.conv_ablated,
        "fps_ratio": config.fps_ratio,
    }


def config_from_dict(d: dict) -> BackboneConfig:
    try:
        stages = tuple(
            EncoderStage(
                kind=s["kind"],
                width=int(s["width"]),
                epsilon=s.get("epsilon"),
                radius=s.get("radius"),
                conv=bool(s.get("conv", True)),
                conv_widths=tuple(s["conv_widths"]) if s.get("conv_widths") else None,
                ratio=s.get("ratio"),
                k=s.get("k"),
                max_neighbors=s.get("max_neighbors"),
            )
            for s in d["stages"]
        )
        return BackboneConfig(
            stages=stages,
            decoder_widths=tuple(d["decoder_widths"]),
            head_width=int(d["head_width"]),
            classes=int(d["classes"]),
            input_channels=int(d.get("input_channels", 3)),
            fps_ablated=bool(d.get("fps_ablated", False)),
            grouping_ablated=bool(d.get("grouping_ablated", False)),
            conv_ablated=bool(d.get("conv_ablated", False)),
            fps_ratio=float(d.get("fps_ratio", 0.25)),
        )
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed backbone config: {exc}") from exc


def config_to_json(config: BackboneConfig) -> str:
    return json.dumps(config_to_dict(config), indent=2)


def config_from_json(text: str) -> BackboneConfig:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config is not valid JSON: {exc}") from exc
    return config_from_dict(d)
