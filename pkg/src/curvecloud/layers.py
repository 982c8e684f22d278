"""Inference-mode neural layers over curve clouds and point sets.

Six layers: curve set abstraction, curve feature propagation, the curve
convolution block, point set abstraction, graph convolution, and point
feature propagation, plus attentive pooling and deterministic parameter
initialization. Everything is pure-numpy inference; there is no training
code.

All matrix products go through einsum rather than BLAS: einsum reduces
each output element in a fixed order independent of row position, which
keeps layer outputs bitwise equivariant under curve permutation and curve
reversal. Neighborhood reductions use per-segment ufunc reduction in
ascending index order for the same reason.
"""

from dataclasses import dataclass

import numpy as np

from . import ops
from .errors import MismatchError, ValidationError
from .model import CurveCloud, GeodesicTable, _as_positions
from .ops import (
    FeatureMap,
    GroupingConfig,
    SamplingConfig,
    Selection,
    SymmetricKernel,
)

LEAKY_SLOPE = 0.01

_ACTIVATIONS = ("leaky_relu", "identity")


def _matmul(x: np.ndarray, weight: np.ndarray) -> np.ndarray:
    # weight is (out, in); einsum keeps the reduction order fixed per row.
    return np.einsum("nc,oc->no", x, weight)


def _leaky_relu(x: np.ndarray) -> np.ndarray:
    return np.where(x >= 0.0, x, LEAKY_SLOPE * x)


@dataclass(frozen=True)
class NormStats:
    """Inference-mode batch normalization statistics for one stage."""

    mean: np.ndarray
    var: np.ndarray
    scale: np.ndarray
    shift: np.ndarray

    def __post_init__(self):
        arrs = {}
        width = None
        for name in ("mean", "var", "scale", "shift"):
            a = np.ascontiguousarray(getattr(self, name), np.float64)
            if a.ndim != 1 or not np.isfinite(a).all():
                raise ValidationError(f"norm {name} must be a finite 1-D array")
            width = a.shape[0] if width is None else width
            if a.shape[0] != width:
                raise ValidationError("norm stats must share one channel width")
            arrs[name] = a
        if (arrs["var"] <= 0).any():
            raise ValidationError("norm variances must be > 0")
        for name, a in arrs.items():
            object.__setattr__(self, name, a)

    @property
    def width(self) -> int:
        return self.mean.shape[0]

    def apply(self, x: np.ndarray) -> np.ndarray:
        return (x - self.mean) / np.sqrt(self.var) * self.scale + self.shift


@dataclass(frozen=True)
class DenseLayer:
    """One affine stage of an MLP: weight (out, in), bias (out,)."""

    weight: np.ndarray
    bias: np.ndarray
    norm: NormStats | None = None
    activation: str = "leaky_relu"

    def __post_init__(self):
        w = np.ascontiguousarray(self.weight, np.float64)
        b = np.ascontiguousarray(self.bias, np.float64)
        if w.ndim != 2:
            raise ValidationError(f"weight must be 2-D (out, in), got {w.shape}")
        if b.shape != (w.shape[0],):
            raise ValidationError(f"bias shape {b.shape} does not match out dim {w.shape[0]}")
        if not (np.isfinite(w).all() and np.isfinite(b).all()):
            raise ValidationError("dense layer parameters must be finite")
        if self.norm is not None and self.norm.width != w.shape[0]:
            raise ValidationError(
                f"norm width {self.norm.width} does not match out dim {w.shape[0]}"
            )
        if self.activation not in _ACTIVATIONS:
            raise ValidationError(f"activation must be one of {_ACTIVATIONS}")
        object.__setattr__(self, "weight", w)
        object.__setattr__(self, "bias", b)

    @property
    def in_dim(self) -> int:
        return self.weight.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weight.shape[0]


@dataclass(frozen=True)
class MlpParams:
    """A chain of DenseLayers with consistent dimensions."""

    layers: tuple[DenseLayer, ...]

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise ValidationError("an MLP needs at least one layer")
        for a, b in zip(layers, layers[1:]):
            if a.out_dim != b.in_dim:
                raise ValidationError(
                    f"MLP dimension chain broken: {a.out_dim} feeds {b.in_dim}"
                )
        object.__setattr__(self, "layers", layers)

    @property
    def in_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.layers[-1].out_dim


def apply_mlp(x: np.ndarray, params: MlpParams) -> np.ndarray:
    """Run a feature matrix (N, in_dim) through the MLP."""
    if x.ndim != 2 or x.shape[1] != params.in_dim:
        raise MismatchError(
            f"MLP expects (N, {params.in_dim}) input, got {x.shape}"
        )
    for layer in params.layers:
        x = _matmul(x, layer.weight) + layer.bias
        if layer.norm is not None:
            x = layer.norm.apply(x)
        if layer.activation == "leaky_relu":
            x = _leaky_relu(x)
    return x


@dataclass(frozen=True)
class AttentivePoolParams:
    """Per-channel score MLP (D -> D) for softmax-weighted pooling."""

    score: MlpParams

    def __post_init__(self):
        if self.score.in_dim != self.score.out_dim:
            raise ValidationError(
                f"score MLP must be square, got {self.score.in_dim} -> {self.score.out_dim}"
            )


def attentive_pool(neighbor_feats: np.ndarray, params: AttentivePoolParams) -> np.ndarray:
    """Pool one neighborhood (K, D) to a single D-vector.

    Per-channel scores from the score MLP, softmax across the K neighbors
    per channel, then the weighted sum.
    """
    feats = np.ascontiguousarray(neighbor_feats, np.float64)
    if feats.ndim != 2 or feats.shape[0] == 0:
        raise ValidationError("attentive_pool needs a non-empty (K, D) neighborhood")
    scores = apply_mlp(feats, params.score)
    w = np.exp(scores - scores.max(axis=0))
    w = w / w.sum(axis=0)
    return (w * feats).sum(axis=0)


def _pool_segments(
    feats: np.ndarray, offsets: np.ndarray, params: AttentivePoolParams
) -> np.ndarray:
    """Batched attentive pooling over C variable-length segments.

    Same math as attentive_pool applied per segment; segments must be
    non-empty. Each segment's reduction only sees its own rows, so the
    result is invariant to how segments are ordered.
    """
    c = offsets.shape[0] - 1
    if c == 0:
        return np.zeros((0, feats.shape[1]))
    counts = np.diff(offsets)
    if (counts < 1).any():
        raise ValidationError("attentive pooling needs non-empty neighborhoods")
    scores = apply_mlp(feats, params.score)
    starts = offsets[:-1]
    segmax = np.maximum.reduceat(scores, starts, axis=0)
    w = np.exp(scores - np.repeat(segmax, counts, axis=0))
    denom = np.add.reduceat(w, starts, axis=0)
    return np.add.reduceat(w * feats, starts, axis=0) / denom


@dataclass(frozen=True)
class CurveSAParams:
    """Curve set abstraction: sample along curves, group geodesically, encode, pool."""

    epsilon: float
    radius: float
    mlp: MlpParams
    pool: AttentivePoolParams
    max_neighbors: int | None = None


def curve_sa(
    cc: CurveCloud, g: GeodesicTable, feats: FeatureMap, params: CurveSAParams
) -> tuple[CurveCloud, Selection, FeatureMap]:
    """Downsample each curve and encode geodesic neighborhoods.

    fps_1d picks centroids, group_curve gathers members along the curve,
    member positions are translated into the centroid frame and divided by
    the radius, concatenated with member features, run through the shared
    MLP and attentively pooled to one feature per centroid. The returned
    CurveCloud keeps the original curve structure restricted to the
    selected points.
    """
    if feats.n != cc.n:
        raise MismatchError(f"features have {feats.n} rows for {cc.n} points")
    if params.mlp.in_dim != 3 + feats.d:
        raise MismatchError(
            f"curve_sa MLP expects {params.mlp.in_dim} inputs, "
            f"neighborhood rows have {3 + feats.d}"
        )
    sel = ops.fps_1d(cc, g, SamplingConfig(params.epsilon))
    nb = ops.group_curve(cc, g, sel, GroupingConfig(params.radius, params.max_neighbors))
    rel = cc.positions[nb.indices] - np.repeat(cc.positions[nb.centroids], np.diff(nb.offsets), axis=0)
    rel /= params.radius
    x = np.concatenate([rel, feats.values[nb.indices]], axis=1)
    pooled = _pool_segments(apply_mlp(x, params.mlp), nb.offsets, params.pool)
    cc_lo = CurveCloud(cc.positions[sel.indices], sel.offsets, cc.source_beam)
    return cc_lo, sel, FeatureMap(pooled)


@dataclass(frozen=True)
class CurveFPParams:
    """Curve feature propagation: interpolate along curves, merge skip, MLP."""

    mlp: MlpParams


def curve_fp(
    cc_hi: CurveCloud,
    g_hi: GeodesicTable,
    selection_lo: Selection,
    feats_lo: FeatureMap,
    skip_feats_hi: FeatureMap,
    params: CurveFPParams,
) -> FeatureMap:
    """Upsample low-res curve features back to every high-res point."""
    if skip_feats_hi.n != cc_hi.n:
        raise MismatchError(
            f"skip features have {skip_feats_hi.n} rows for {cc_hi.n} points"
        )
    interp = ops.interpolate_curve(cc_hi, g_hi, selection_lo, feats_lo)
    if params.mlp.in_dim != interp.d + skip_feats_hi.d:
        raise MismatchError(
            f"curve_fp MLP expects {params.mlp.in_dim} inputs, got "
            f"{interp.d} interpolated + {skip_feats_hi.d} skip channels"
        )
    x = np.concatenate([interp.values, skip_feats_hi.values], axis=1)
    return FeatureMap(apply_mlp(x, params.mlp))


@dataclass(frozen=True)
class CurveConvBlockParams:
    """Three symmetric curve convolutions, each with norm + leaky ReLU."""

    kernels: tuple[SymmetricKernel, SymmetricKernel, SymmetricKernel]
    norms: tuple[NormStats, NormStats, NormStats]

    def __post_init__(self):
        kernels = tuple(self.kernels)
        norms = tuple(self.norms)
        if len(kernels) != 3 or len(norms) != 3:
            raise ValidationError("a curve conv block has exactly three stages")
        for i, (k, s) in enumerate(zip(kernels, norms)):
            if s.width != k.out_channels:
                raise ValidationError(f"stage {i} norm width != kernel out_channels")
            if i and k.in_channels != 2 * kernels[i - 1].out_channels:
                raise ValidationError(
                    f"stage {i} kernel expects {k.in_channels} inputs; previous stage "
                    f"provides {2 * kernels[i - 1].out_channels} (features + gradients)"
                )
        object.__setattr__(self, "kernels", kernels)
        object.__setattr__(self, "norms", norms)


def curve_conv_block(cc: CurveCloud, feats: FeatureMap, params: CurveConvBlockParams) -> FeatureMap:
    """(conv_symmetric -> batchnorm -> leaky ReLU) three times along each curve."""
    x = feats
    for kernel, norm in zip(params.kernels, params.norms):
        y = ops.conv_symmetric(cc, x, kernel)
        x = FeatureMap(_leaky_relu(norm.apply(y.values)))
    return x


@dataclass(frozen=True)
class PointSAParams:
    """Point set abstraction: Euclidean FPS + ball grouping + MLP + pooling.

    Exactly one of count (absolute centroid count) or ratio (fraction of N,
    used by backbone profiles where N varies) must be set.
    """

    radius: float
    mlp: MlpParams
    pool: AttentivePoolParams
    count: int | None = None
    ratio: float | None = None
    max_neighbors: int | None = None

    def __post_init__(self):
        if (self.count is None) == (self.ratio is None):
            raise ValidationError("set exactly one of count or ratio")
        if self.count is not None and self.count < 1:
            raise ValidationError(f"count must be >= 1, got {self.count}")
        if self.ratio is not None and not (0 < self.ratio <= 1):
            raise ValidationError(f"ratio must lie in (0, 1], got {self.ratio}")

    def resolve_count(self, n: int) -> int:
        if self.count is not None:
            return self.count
        return max(1, int(round(self.ratio * n)))


def point_sa(
    points: np.ndarray, feats: FeatureMap, params: PointSAParams
) -> tuple[np.ndarray, FeatureMap]:
    """Subsample with Euclidean FPS and encode Euclidean ball neighborhoods.

    Relative member positions are centered on the centroid and divided by
    the radius before the shared MLP and attentive pooling.
    """
    pts = _as_positions(points, "points")
    if feats.n != pts.shape[0]:
        raise MismatchError(f"features have {feats.n} rows for {pts.shape[0]} points")
    count = params.resolve_count(pts.shape[0])
    if count > pts.shape[0]:
        raise ValueError(f"target count {count} exceeds point count {pts.shape[0]}")
    if params.mlp.in_dim != 3 + feats.d:
        raise MismatchError(
            f"point_sa MLP expects {params.mlp.in_dim} inputs, "
            f"neighborhood rows have {3 + feats.d}"
        )
    sel = ops.fps_euclidean(pts, count)
    nb = ops.group_ball3d(pts, sel, params.radius, params.max_neighbors)
    rel = pts[nb.indices] - np.repeat(pts[nb.centroids], np.diff(nb.offsets), axis=0)
    rel /= params.radius
    x = np.concatenate([rel, feats.values[nb.indices]], axis=1)
    pooled = _pool_segments(apply_mlp(x, params.mlp), nb.offsets, params.pool)
    return pts[sel.indices], FeatureMap(pooled)


@dataclass(frozen=True)
class GraphConvParams:
    """kNN graph convolution over 3D point distances."""

    k: int
    mlp: MlpParams
    pool: AttentivePoolParams

    def __post_init__(self):
        if self.k < 1:
            raise ValidationError(f"k must be >= 1, got {self.k}")


def _knn_brute(query: np.ndarray, ref: np.ndarray, k: int, exclude_self: bool) -> np.ndarray:
    """Exact kNN by blocked brute force; ties broken toward the lower index.

    With exclude_self=True, query and ref must be the same array and entry
    i skips index i.
    """
    nq = query.shape[0]
    out = np.empty((nq, k), np.int64)
    block = max(1, min(nq, int(2**20) // max(ref.shape[0], 1)))
    for s in range(0, nq, block):
        e = min(s + block, nq)
        d = query[s:e, None, :] - ref[None, :, :]
        d2 = d[:, :, 0] * d[:, :, 0] + d[:, :, 1] * d[:, :, 1] + d[:, :, 2] * d[:, :, 2]
        if exclude_self:
            d2[np.arange(e - s), np.arange(s, e)] = np.inf
        # stable sort keeps equal distances in index order
        out[s:e] = np.argsort(d2, axis=1, kind="stable")[:, :k]
    return out


def graph_conv(points: np.ndarray, feats: FeatureMap, params: GraphConvParams) -> FeatureMap:
    """Edge-convolution over the 3D kNN graph (self excluded).

    Each directed edge i -> j contributes MLP(f_i concat (f_j - f_i));
    a vertex pools its k edge features attentively.
    """
    pts = _as_positions(points, "points")
    n = pts.shape[0]
    if feats.n != n:
        raise MismatchError(f"features have {feats.n} rows for {n} points")
    if params.k >= n:
        raise ValueError(f"k={params.k} needs at least k+1 points, got {n}")
    if params.mlp.in_dim != 2 * feats.d:
        raise MismatchError(
            f"graph_conv MLP expects {params.mlp.in_dim} inputs, edges have {2 * feats.d}"
        )
    nbr = _knn_brute(pts, pts, params.k, exclude_self=True)
    f = feats.values
    fj = f[nbr.ravel()]
    fi = np.repeat(f, params.k, axis=0)
    h = apply_mlp(np.concatenate([fi, fj - fi], axis=1), params.mlp)
    scores = apply_mlp(h, params.pool.score)
    w = h.shape[1]
    h = h.reshape(n, params.k, w)
    scores = scores.reshape(n, params.k, w)
    weights = np.exp(scores - scores.max(axis=1, keepdims=True))
    weights /= weights.sum(axis=1, keepdims=True)
    return FeatureMap((weights * h).sum(axis=1))


@dataclass(frozen=True)
class PointFPParams:
    """Point feature propagation: inverse-distance kNN interpolation + skip + MLP."""

    mlp: MlpParams
    k: int = 3

    def __post_init__(self):
        if self.k < 1:
            raise ValidationError(f"k must be >= 1, got {self.k}")


def point_fp(
    points_hi: np.ndarray,
    points_lo: np.ndarray,
    feats_lo: FeatureMap,
    skip_feats_hi: FeatureMap,
    params: PointFPParams,
) -> FeatureMap:
    """Interpolate low-res features onto high-res points and merge skips.

    Inverse-distance weights over the k nearest low-res points; a high-res
    point closer than 1e-12 to its nearest low-res point copies that
    feature exactly.
    """
    hi = _as_positions(points_hi, "points_hi")
    lo = _as_positions(points_lo, "points_lo")
    if lo.shape[0] == 0:
        raise ValidationError("point_fp needs a non-empty low-res set")
    if feats_lo.n != lo.shape[0]:
        raise MismatchError(f"feats_lo has {feats_lo.n} rows for {lo.shape[0]} points")
    if skip_feats_hi.n != hi.shape[0]:
        raise MismatchError(
            f"skip features have {skip_feats_hi.n} rows for {hi.shape[0]} points"
        )
    k = min(params.k, lo.shape[0])
    nbr = _knn_brute(hi, lo, k, exclude_self=False)
    diff = hi[:, None, :] - lo[nbr]
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
    if params.mlp.in_dim != interp.shape[1] + skip_feats_hi.d:
        raise MismatchError(
            f"point_fp MLP expects {params.mlp.in_dim} inputs, got "
            f"{interp.shape[1]} interpolated + {skip_feats_hi.d} skip channels"
        )
    x = np.concatenate([interp, skip_feats_hi.values], axis=1)
    return FeatureMap(apply_mlp(x, params.mlp))


# ---------------------------------------------------------------------------
# Parameter initialization


@dataclass(frozen=True)
class CurveSASpec:
    in_channels: int
    width: int
    epsilon: float
    radius: float
    max_neighbors: int | None = None


@dataclass(frozen=True)
class CurveFPSpec:
    lo_channels: int
    skip_channels: int
    width: int


@dataclass(frozen=True)
class CurveConvBlockSpec:
    in_channels: int
    widths: tuple[int, int, int]
    size: int = 3


@dataclass(frozen=True)
class PointSASpec:
    in_channels: int
    width: int
    radius: float
    count: int | None = None
    ratio: float | None = None
    max_neighbors: int | None = None


@dataclass(frozen=True)
class GraphConvSpec:
    in_channels: int
    width: int
    k: int


@dataclass(frozen=True)
class PointFPSpec:
    lo_channels: int
    skip_channels: int
    width: int
    k: int = 3


LayerSpec = (
    CurveSASpec
    | CurveFPSpec
    | CurveConvBlockSpec
    | PointSASpec
    | GraphConvSpec
    | PointFPSpec
)


def _uniform(rng: np.random.Generator, shape, in_dim: int) -> np.ndarray:
    bound = np.sqrt(1.0 / in_dim)
    return rng.uniform(-bound, bound, shape)


def init_mlp(dims, rng: np.random.Generator, final_activation: str = "leaky_relu") -> MlpParams:
    """MLP with the given dimension chain; every stage gets identity norm stats."""
    dims = list(dims)
    if len(dims) < 2:
        raise ValidationError("an MLP chain needs at least (in, out) dims")
    layers = []
    for i, (din, dout) in enumerate(zip(dims, dims[1:])):
        last = i == len(dims) - 2
        layers.append(
            DenseLayer(
                weight=_uniform(rng, (dout, din), din),
                bias=_uniform(rng, (dout,), din),
                norm=NormStats(np.zeros(dout), np.ones(dout), np.ones(dout), np.zeros(dout)),
                activation=final_activation if last else "leaky_relu",
            )
        )
    return MlpParams(tuple(layers))


def init_attentive_pool(dim: int, rng: np.random.Generator) -> AttentivePoolParams:
    layer = DenseLayer(
        weight=_uniform(rng, (dim, dim), dim),
        bias=_uniform(rng, (dim,), dim),
        norm=None,
        activation="identity",
    )
    return AttentivePoolParams(MlpParams((layer,)))


def init_symmetric_kernel(size: int, cin: int, cout: int, rng: np.random.Generator) -> SymmetricKernel:
    half = (size + 1) // 2
    return SymmetricKernel(
        size=size,
        half_weights=_uniform(rng, (half, cin, cout), cin * size),
        bias=_uniform(rng, (cout,), cin * size),
    )


def _identity_norm(width: int) -> NormStats:
    return NormStats(np.zeros(width), np.ones(width), np.ones(width), np.zeros(width))


LayerParams = (
    CurveSAParams
    | CurveFPParams
    | CurveConvBlockParams
    | PointSAParams
    | GraphConvParams
    | PointFPParams
)


def init_params(spec: LayerSpec, seed: int) -> LayerParams:
    """Deterministic parameter initialization for one layer.

    Weights are uniform in +/- sqrt(1/in_dim); normalization statistics
    start at identity. Same seed, same spec -> bitwise-identical params.
    """
    rng = np.random.default_rng(seed)
    if isinstance(spec, CurveSASpec):
        return CurveSAParams(
            epsilon=spec.epsilon,
            radius=spec.radius,
            mlp=init_mlp([3 + spec.in_channels, spec.width, spec.width], rng),
            pool=init_attentive_pool(spec.width, rng),
            max_neighbors=spec.max_neighbors,
        )
    if isinstance(spec, CurveFPSpec):
        return CurveFPParams(
            mlp=init_mlp([spec.lo_channels + spec.skip_channels, spec.width, spec.width], rng)
        )
    if isinstance(spec, CurveConvBlockSpec):
        kernels = []
        norms = []
        cin = spec.in_channels
        for w in spec.widths:
            kernels.append(init_symmetric_kernel(spec.size, 2 * cin, w, rng))
            norms.append(_identity_norm(w))
            cin = w
        return CurveConvBlockParams(tuple(kernels), tuple(norms))
    if isinstance(spec, PointSASpec):
        return PointSAParams(
            radius=spec.radius,
            mlp=init_mlp([3 + spec.in_channels, spec.width, spec.width], rng),
            pool=init_attentive_pool(spec.width, rng),
            count=spec.count,
            ratio=spec.ratio,
            max_neighbors=spec.max_neighbors,
        )
    if isinstance(spec, GraphConvSpec):
        return GraphConvParams(
            k=spec.k,
            mlp=init_mlp([2 * spec.in_channels, spec.width, spec.width], rng),
            pool=init_attentive_pool(spec.width, rng),
        )
    if isinstance(spec, PointFPSpec):
        return PointFPParams(
            mlp=init_mlp([spec.lo_channels + spec.skip_channels, spec.width, spec.width], rng),
            k=spec.k,
        )
    raise ValidationError(f"unknown layer spec type {type(spec).__name__}")
