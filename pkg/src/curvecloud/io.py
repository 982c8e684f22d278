"""File formats: scans (CSV/binary), curve clouds, feature maps, labels,
PLY exports, and backbone parameter directories.

All binary formats are little-endian with u32 headers and f32 payloads;
sizes are validated exactly, and any structural problem raises FormatError.
Parameter sets are stored as a directory holding a JSON manifest (layer
tree, shapes, hyperparameters) plus one feature-map blob per array.
"""

import json
from pathlib import Path

import numpy as np

from .backbone import (
    BackboneParams,
    CurveStageParams,
    PointStageParams,
    config_from_dict,
    config_to_dict,
)
from .errors import FormatError, ValidationError
from .layers import (
    AttentivePoolParams,
    CurveFPParams,
    CurveConvBlockParams,
    CurveSAParams,
    DenseLayer,
    GraphConvParams,
    MlpParams,
    NormStats,
    PointFPParams,
    PointSAParams,
)
from .model import CurveCloud, PointCloud
from .ops import FeatureMap, SymmetricKernel

_SCAN_RECORD = np.dtype(
    [("x", "<f4"), ("y", "<f4"), ("z", "<f4"), ("t", "<f8"), ("beam", "<u4")]
)

SCAN_CSV_HEADER = "x,y,z,t,beam"

# Fixed 16-color label palette for PLY export (RGB, 0-255).
PALETTE = np.array(
    [
        (230, 25, 75), (60, 180, 75), (255, 225, 25), (0, 130, 200),
        (245, 130, 48), (145, 30, 180), (70, 240, 240), (240, 50, 230),
        (210, 245, 60), (250, 190, 212), (0, 128, 128), (220, 190, 255),
        (170, 110, 40), (255, 250, 200), (128, 0, 0), (170, 255, 195),
    ],
    dtype=np.uint8,
)


def _read_bytes(path) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc


def _u32_header(buf: bytes, count: int, path) -> np.ndarray:
    if len(buf) < 4 * count:
        raise FormatError(f"{path}: truncated header ({len(buf)} bytes)")
    return np.frombuffer(buf, dtype="<u4", count=count)


# ---------------------------------------------------------------------------
# Scans


def save_scan_csv(pc: PointCloud, path) -> None:
    rows = np.column_stack(
        [pc.positions, pc.timestamps, pc.beam_ids.astype(np.float64)]
    )
    np.savetxt(
        path,
        rows,
        fmt=["%.9g", "%.9g", "%.9g", "%.17g", "%d"],
        delimiter=",",
        header=SCAN_CSV_HEADER,
        comments="",
    )


def load_scan_csv(path) -> PointCloud:
    """Load a scan CSV; the beam count is taken as the largest beam ID seen."""
    text = _read_bytes(path).decode("utf-8", errors="replace")
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0].strip() != SCAN_CSV_HEADER:
        raise FormatError(f"{path}: expected header {SCAN_CSV_HEADER!r}")
    try:
        data = np.loadtxt(lines[1:], delimiter=",", ndmin=2, dtype=np.float64)
    except ValueError as exc:
        raise FormatError(f"{path}: unparseable CSV: {exc}") from exc
    if data.size and data.shape[1] != 5:
        raise FormatError(f"{path}: expected 5 columns, got {data.shape[1]}")
    if data.size == 0:
        data = data.reshape(0, 5)
    beams = data[:, 4].astype(np.int64)
    n_beams = int(beams.max()) if beams.size else 1
    try:
        return PointCloud(data[:, :3], data[:, 3], beams, n_beams)
    except ValidationError as exc:
        raise FormatError(f"{path}: {exc}") from exc


def save_scan_bin(pc: PointCloud, path) -> None:
    rec = np.empty(pc.n, dtype=_SCAN_RECORD)
    rec["x"] = pc.positions[:, 0]
    rec["y"] = pc.positions[:, 1]
    rec["z"] = pc.positions[:, 2]
    rec["t"] = pc.timestamps
    rec["beam"] = pc.beam_ids
    header = np.array([pc.n, pc.n_beams], dtype="<u4")
    Path(path).write_bytes(header.tobytes() + rec.tobytes())


def load_scan_bin(path) -> PointCloud:
    buf = _read_bytes(path)
    n, b = (int(v) for v in _u32_header(buf, 2, path))
    expect = 8 + n * _SCAN_RECORD.itemsize
    if len(buf) != expect:
        raise FormatError(f"{path}: expected {expect} bytes for {n} records, got {len(buf)}")
    rec = np.frombuffer(buf, dtype=_SCAN_RECORD, count=n, offset=8)
    positions = np.column_stack([rec["x"], rec["y"], rec["z"]]).astype(np.float64)
    try:
        return PointCloud(positions, rec["t"].astype(np.float64),
                          rec["beam"].astype(np.int64), b)
    except ValidationError as exc:
        raise FormatError(f"{path}: {exc}") from exc


# ---------------------------------------------------------------------------
# Curve clouds


def save_curves_bin(cc: CurveCloud, path) -> None:
    parts = [
        np.array([cc.n, cc.n_curves], dtype="<u4").tobytes(),
        cc.positions.astype("<f4").tobytes(),
        cc.offsets.astype("<u4").tobytes(),
        cc.source_beam.astype("<u4").tobytes(),
    ]
    Path(path).write_bytes(b"".join(parts))


def load_curves_bin(path) -> CurveCloud:
    buf = _read_bytes(path)
    n, m = (int(v) for v in _u32_header(buf, 2, path))
    expect = 8 + n * 12 + (m + 1) * 4 + m * 4
    if len(buf) != expect:
        raise FormatError(
            f"{path}: expected {expect} bytes for {n} points / {m} curves, got {len(buf)}"
        )
    off = 8
    positions = np.frombuffer(buf, dtype="<f4", count=3 * n, offset=off)
    positions = positions.reshape(n, 3).astype(np.float64)
    off += n * 12
    offsets = np.frombuffer(buf, dtype="<u4", count=m + 1, offset=off).astype(np.int64)
    off += (m + 1) * 4
    beams = np.frombuffer(buf, dtype="<u4", count=m, offset=off).astype(np.int64)
    try:
        return CurveCloud(positions, offsets, beams)
    except ValidationError as exc:
        raise FormatError(f"{path}: {exc}") from exc


# ---------------------------------------------------------------------------
# Feature maps


def save_featmap(fm: FeatureMap, path) -> None:
    header = np.array([fm.n, fm.d], dtype="<u4")
    Path(path).write_bytes(header.tobytes() + fm.values.astype("<f4").tobytes())


def load_featmap(path) -> FeatureMap:
    buf = _read_bytes(path)
    n, d = (int(v) for v in _u32_header(buf, 2, path))
    expect = 8 + n * d * 4
    if len(buf) != expect:
        raise FormatError(f"{path}: expected {expect} bytes for {n}x{d}, got {len(buf)}")
    values = np.frombuffer(buf, dtype="<f4", count=n * d, offset=8)
    return FeatureMap(values.reshape(n, d).astype(np.float64))


# ---------------------------------------------------------------------------
# Labels and PLY export


def save_labels_csv(labels: np.ndarray, path) -> None:
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    rows = np.column_stack([np.arange(labels.size, dtype=np.int64), labels])
    np.savetxt(path, rows, fmt="%d", delimiter=",", header="index,label", comments="")


def load_labels_csv(path) -> np.ndarray:
    text = _read_bytes(path).decode("utf-8", errors="replace")
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0].strip() != "index,label":
        raise FormatError(f"{path}: expected header 'index,label'")
    try:
        data = np.loadtxt(lines[1:], delimiter=",", ndmin=2, dtype=np.int64)
    except ValueError as exc:
        raise FormatError(f"{path}: unparseable CSV: {exc}") from exc
    if data.size == 0:
        return np.zeros(0, np.int64)
    if data.shape[1] != 2:
        raise FormatError(f"{path}: expected 2 columns, got {data.shape[1]}")
    if not np.array_equal(data[:, 0], np.arange(data.shape[0])):
        raise FormatError(f"{path}: index column must be 0..N-1 in order")
    return data[:, 1].copy()


def save_ply(positions: np.ndarray, labels: np.ndarray, path) -> None:
    """ASCII PLY with one vertex per point, colored by label via the palette."""
    positions = np.asarray(positions, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if positions.ndim != 2 or positions.shape[1] != 3:
        raise ValidationError(f"positions must be (N, 3), got {positions.shape}")
    if labels.size != positions.shape[0]:
        raise ValidationError(
            f"{labels.size} labels for {positions.shape[0]} points"
        )
    colors = PALETTE[labels % len(PALETTE)]
    n = positions.shape[0]
    head = "\n".join(
        [
            "ply",
            "format ascii 1.0",
            f"element vertex {n}",
            "property float x",
            "property float y",
            "property float z",
            "property uchar red",
            "property uchar green",
            "property uchar blue",
            "end_header",
        ]
    )
    body = "\n".join(
        "%.9g %.9g %.9g %d %d %d" % (p[0], p[1], p[2], c[0], c[1], c[2])
        for p, c in zip(positions, colors)
    )
    Path(path).write_text(head + "\n" + body + ("\n" if n else ""))


# ---------------------------------------------------------------------------
# Backbone parameter directories

PARAMS_MANIFEST = "manifest.json"
_PARAMS_FORMAT_VERSION = 1


class _BlobWriter:
    def __init__(self, directory: Path):
        self.directory = directory
        self.counter = 0

    def add(self, arr: np.ndarray) -> dict:
        arr = np.asarray(arr, dtype=np.float64)
        shape = list(arr.shape)
        flat = arr.reshape(-1, shape[-1]) if arr.ndim > 1 else arr.reshape(1, -1)
        name = f"{self.counter:04d}.bin"
        self.counter += 1
        save_featmap(FeatureMap(flat), self.directory / name)
        return {"blob": name, "shape": shape}


class _BlobReader:
    def __init__(self, directory: Path):
        self.directory = directory

    def get(self, leaf: dict) -> np.ndarray:
        try:
            name, shape = leaf["blob"], tuple(int(s) for s in leaf["shape"])
        except (KeyError, TypeError) as exc:
            raise FormatError(f"malformed blob reference {leaf!r}") from exc
        fm = load_featmap(self.directory / name)
        if fm.values.size != int(np.prod(shape)):
            raise FormatError(
                f"blob {name} holds {fm.values.size} values, manifest says {shape}"
            )
        return fm.values.reshape(shape)


def _pack(obj, w: _BlobWriter):
    if obj is None:
        return None
    if isinstance(obj, NormStats):
        return {"kind": "norm", "mean": w.add(obj.mean), "var": w.add(obj.var),
                "scale": w.add(obj.scale), "shift": w.add(obj.shift)}
    if isinstance(obj, DenseLayer):
        return {"kind": "dense", "weight": w.add(obj.weight), "bias": w.add(obj.bias),
                "norm": _pack(obj.norm, w), "activation": obj.activation}
    if isinstance(obj, MlpParams):
        return {"kind": "mlp", "layers": [_pack(l, w) for l in obj.layers]}
    if isinstance(obj, AttentivePoolParams):
        return {"kind": "pool", "score": _pack(obj.score, w)}
    if isinstance(obj, SymmetricKernel):
        return {"kind": "kernel", "size": obj.size,
                "half_weights": w.add(obj.half_weights), "bias": w.add(obj.bias)}
    if isinstance(obj, CurveConvBlockParams):
        return {"kind": "conv_block", "kernels": [_pack(k, w) for k in obj.kernels],
                "norms": [_pack(s, w) for s in obj.norms]}
    if isinstance(obj, CurveSAParams):
        return {"kind": "curve_sa", "epsilon": obj.epsilon, "radius": obj.radius,
                "max_neighbors": obj.max_neighbors,
                "mlp": _pack(obj.mlp, w), "pool": _pack(obj.pool, w)}
    if isinstance(obj, PointSAParams):
        return {"kind": "point_sa", "radius": obj.radius, "count": obj.count,
                "ratio": obj.ratio, "max_neighbors": obj.max_neighbors,
                "mlp": _pack(obj.mlp, w), "pool": _pack(obj.pool, w)}
    if isinstance(obj, GraphConvParams):
        return {"kind": "graph_conv", "k": obj.k,
                "mlp": _pack(obj.mlp, w), "pool": _pack(obj.pool, w)}
    if isinstance(obj, CurveFPParams):
        return {"kind": "curve_fp", "mlp": _pack(obj.mlp, w)}
    if isinstance(obj, PointFPParams):
        return {"kind": "point_fp", "k": obj.k, "mlp": _pack(obj.mlp, w)}
    if isinstance(obj, CurveStageParams):
        return {"kind": "curve_stage", "conv": _pack(obj.conv, w),
                "sa": _pack(obj.sa, w)}
    if isinstance(obj, PointStageParams):
        return {"kind": "point_stage", "graph": _pack(obj.graph, w),
                "sa": _pack(obj.sa, w)}
    raise ValidationError(f"cannot serialize {type(obj).__name__}")


def _unpack(d, r: _BlobReader):
    if d is None:
        return None
    try:
        kind = d["kind"]
        if kind == "norm":
            return NormStats(r.get(d["mean"]), r.get(d["var"]),
                             r.get(d["scale"]), r.get(d["shift"]))
        if kind == "dense":
            return DenseLayer(r.get(d["weight"]), r.get(d["bias"]),
                              _unpack(d["norm"], r), d["activation"])
        if kind == "mlp":
            return MlpParams(tuple(_unpack(l, r) for l in d["layers"]))
        if kind == "pool":
            return AttentivePoolParams(_unpack(d["score"], r))
        if kind == "kernel":
            return SymmetricKernel(int(d["size"]), r.get(d["half_weights"]),
                                   r.get(d["bias"]))
        if kind == "conv_block":
            return CurveConvBlockParams(
                tuple(_unpack(k, r) for k in d["kernels"]),
                tuple(_unpack(s, r) for s in d["norms"]),
            )
        if kind == "curve_sa":
            return CurveSAParams(float(d["epsilon"]), float(d["radius"]),
                                 _unpack(d["mlp"], r), _unpack(d["pool"], r),
                                 d["max_neighbors"])
        if kind == "point_sa":
            return PointSAParams(float(d["radius"]), _unpack(d["mlp"], r),
                                 _unpack(d["pool"], r), d["count"],
                                 d["ratio"], d["max_neighbors"])
        if kind == "graph_conv":
            return GraphConvParams(int(d["k"]), _unpack(d["mlp"], r),
                                   _unpack(d["pool"], r))
        if kind == "curve_fp":
            return CurveFPParams(_unpack(d["mlp"], r))
        if kind == "point_fp":
            return PointFPParams(_unpack(d["mlp"], r), int(d["k"]))
        if kind == "curve_stage":
            return CurveStageParams(_unpack(d["conv"], r), _unpack(d["sa"], r))
        if kind == "point_stage":
            return PointStageParams(_unpack(d["graph"], r), _unpack(d["sa"], r))
        raise FormatError(f"unknown parameter kind {kind!r}")
    except (KeyError, TypeError) as exc:
        raise FormatError(f"malformed parameter manifest entry: {exc}") from exc


def save_backbone_params(params: BackboneParams, directory) -> None:
    """Write a manifest + blob directory; creates the directory if needed.

    Weights are stored in the f32 feature-map format, so loading rounds
    them to f32 precision.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    w = _BlobWriter(directory)
    manifest = {
        "format_version": _PARAMS_FORMAT_VERSION,
        "config": config_to_dict(params.config),
        "encoder": [_pack(s, w) for s in params.encoder],
        "decoder": [_pack(s, w) for s in params.decoder],
        "head": _pack(params.head, w),
    }
    (directory / PARAMS_MANIFEST).write_text(json.dumps(manifest, indent=2))


def load_backbone_params(directory) -> BackboneParams:
    directory = Path(directory)
    manifest_path = directory / PARAMS_MANIFEST
    if not manifest_path.is_file():
        raise FormatError(f"{directory}: missing {PARAMS_MANIFEST}")
    try:
        manifest = json.loads(manifest_path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"{manifest_path}: {exc}") from exc
    version = manifest.get("format_version")
    if version != _PARAMS_FORMAT_VERSION:
        raise FormatError(f"{manifest_path}: unsupported format version {version!r}")
    r = _BlobReader(directory)
    try:
        config = config_from_dict(manifest["config"])
        encoder = tuple(_unpack(s, r) for s in manifest["encoder"])
        decoder = tuple(_unpack(s, r) for s in manifest["decoder"])
        head = _unpack(manifest["head"], r)
    except KeyError as exc:
        raise FormatError(f"{manifest_path}: missing section {exc}") from exc
    except ValidationError as exc:
        raise FormatError(f"{manifest_path}: inconsistent parameters: {exc}") from exc
    return BackboneParams(config, encoder, decoder, head)
