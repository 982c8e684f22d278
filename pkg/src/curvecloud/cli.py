"""Command-line surface: simulate, convert, sample, group, run the
backbone, export results, and benchmark.

Exit codes: 0 success, 1 usage error, 2 data error (unreadable or
inconsistent inputs), 3 internal error. With --json, stdout carries a
single JSON report (schema shipped in curvecloud/schemas/); human-readable
lines are printed otherwise.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, bench, io, ops
from ._backend import active_backend, available_backends
from ._threads import set_num_threads
from .backbone import config_from_json, forward, init_backbone_params
from .errors import CurveCloudError, MismatchError
from .model import (
    ConversionConfig,
    build_curve_cloud,
    geodesic_lengths,
)
from .ops import FeatureMap, GroupingConfig, SamplingConfig
from .simulate import PATTERNS, ScanConfig, scene_from_json, simulate


class _Parser(argparse.ArgumentParser):
    """argparse with usage failures mapped to exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _parse_floats(text: str, flag: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ValueError(f"{flag} expects comma-separated numbers, got {text!r}") from exc


def _parse_sizes(text: str) -> list[int]:
    sizes = [int(v) for v in _parse_floats(text, "--sizes")]
    if not sizes or any(s < 1 for s in sizes):
        raise ValueError(f"--sizes needs positive entries, got {text!r}")
    return sizes


def _load_scan(path: str):
    if str(path).endswith(".csv"):
        return io.load_scan_csv(path)
    return io.load_scan_bin(path)


def _mean_geodesic(cc) -> float:
    if cc.n_curves == 0:
        return 0.0
    cumlen = geodesic_lengths(cc).cumlen
    return float(np.mean(cumlen[cc.offsets[1:] - 1] - cumlen[cc.offsets[:-1]]))


# ---------------------------------------------------------------------------
# Command handlers: each returns (report fields, human lines)


def _cmd_simulate(args):
    scene = scene_from_json(Path(args.scene).read_text())
    cfg = ScanConfig(
        pattern=args.pattern,
        beams=args.beams,
        budget=args.points,
        resolution=args.resolution,
        stride=args.stride,
        seed=args.seed,
    )
    pc = simulate(scene, cfg)
    if str(args.out).endswith(".csv"):
        io.save_scan_csv(pc, args.out)
    else:
        io.save_scan_bin(pc, args.out)
    counts = np.bincount(pc.beam_ids, minlength=pc.n_beams + 1)[1:]
    report = {
        "n_points": int(pc.n),
        "n_beams": int(pc.n_beams),
        "per_beam_counts": [int(c) for c in counts],
        "out": str(args.out),
    }
    lines = [
        f"points: {pc.n}",
        f"beams: {pc.n_beams}",
        f"wrote {args.out}",
    ]
    return report, lines


def _cmd_convert(args):
    pc = _load_scan(args.infile)
    delta = _parse_floats(args.delta, "--delta")
    if not delta or any(d <= 0 for d in delta):
        raise ValueError(f"--delta needs positive values, got {args.delta!r}")
    cfg = ConversionConfig(
        delta=delta[0] if len(delta) == 1 else delta,
        range_scaling=args.range_scaling,
        sensor_origin=tuple(_parse_floats(args.origin, "--origin")),
        reference_range=args.reference_range,
    )
    cc = build_curve_cloud(pc, cfg)
    io.save_curves_bin(cc, args.out)
    report = {
        "n_points": int(cc.n),
        "n_curves": int(cc.n_curves),
        "mean_points_per_curve": float(cc.n / cc.n_curves) if cc.n_curves else 0.0,
        "mean_geodesic_length": _mean_geodesic(cc),
        "out": str(args.out),
    }
    lines = [
        f"points: {cc.n}",
        f"curves: {cc.n_curves}",
        f"mean points per curve: {report['mean_points_per_curve']:.2f}",
        f"mean geodesic length: {report['mean_geodesic_length']:.4f}",
        f"wrote {args.out}",
    ]
    return report, lines


def _cmd_fps(args):
    cc = io.load_curves_bin(args.infile)
    g = geodesic_lengths(cc)
    sel = ops.fps_1d(cc, g, SamplingConfig(args.epsilon))
    rows = sel.indices.reshape(-1, 1)
    np.savetxt(args.out, rows, fmt="%d", header="index", comments="")
    report = {
        "n_points": int(cc.n),
        "n_curves": int(cc.n_curves),
        "n_selected": int(sel.indices.size),
        "fraction": float(sel.indices.size / cc.n) if cc.n else 0.0,
        "out": str(args.out),
    }
    lines = [
        f"selected {sel.indices.size} of {cc.n} points "
        f"({100.0 * report['fraction']:.2f}%)",
        f"wrote {args.out}",
    ]
    return report, lines


def _cmd_group(args):
    cc = io.load_curves_bin(args.infile)
    g = geodesic_lengths(cc)
    if args.epsilon is not None:
        sel = ops.fps_1d(cc, g, SamplingConfig(args.epsilon))
    else:
        sel = ops.Selection(np.arange(cc.n, dtype=np.int64), cc.offsets)
    nb = ops.group_curve(cc, g, sel, GroupingConfig(args.radius, args.max_neighbors))
    sizes = np.diff(nb.offsets)
    rows = np.column_stack([nb.centroids, nb.start, nb.stop, sizes])
    np.savetxt(args.out, rows, fmt="%d", delimiter=",",
               header="centroid,start,stop,count", comments="")
    report = {
        "n_points": int(cc.n),
        "n_centroids": int(nb.centroids.size),
        "mean_size": float(sizes.mean()) if sizes.size else 0.0,
        "min_size": int(sizes.min()) if sizes.size else 0,
        "max_size": int(sizes.max()) if sizes.size else 0,
        "out": str(args.out),
    }
    lines = [
        f"centroids: {report['n_centroids']}",
        f"neighborhood size: mean {report['mean_size']:.2f} "
        f"min {report['min_size']} max {report['max_size']}",
        f"wrote {args.out}",
    ]
    return report, lines


def _cmd_init_params(args):
    config = config_from_json(Path(args.config).read_text())
    params = init_backbone_params(config, args.seed)
    io.save_backbone_params(params, args.out)
    report = {
        "n_stages": config.n_stages,
        "classes": config.classes,
        "seed": args.seed,
        "out": str(args.out),
    }
    return report, [f"initialized {config.n_stages}-stage params in {args.out}"]


def _cmd_forward(args):
    cc = io.load_curves_bin(args.infile)
    params = io.load_backbone_params(args.params)
    config = params.config
    if args.config is not None:
        wanted = config_from_json(Path(args.config).read_text())
        if wanted != config:
            raise MismatchError("--config disagrees with the params manifest")
    feats = io.load_featmap(args.features) if args.features else None
    g = geodesic_lengths(cc)
    out = forward(cc, g, feats, config, params)
    labels = out.labels
    io.save_labels_csv(labels, args.out)
    if args.logits:
        io.save_featmap(FeatureMap(out.logits), args.logits)
    counts = np.bincount(labels, minlength=config.classes)
    report = {
        "n_points": int(cc.n),
        "classes": int(config.classes),
        "label_counts": [int(c) for c in counts],
        "out": str(args.out),
    }
    lines = [
        f"points: {cc.n}",
        f"label histogram: {report['label_counts']}",
        f"wrote {args.out}",
    ]
    return report, lines


def _cmd_export_ply(args):
    cc = io.load_curves_bin(args.infile)
    labels = io.load_labels_csv(args.labels)
    io.save_ply(cc.positions, labels, args.out)
    report = {"n_vertices": int(cc.n), "out": str(args.out)}
    return report, [f"wrote {cc.n} vertices to {args.out}"]


def _cmd_bench(args):
    sizes = _parse_sizes(args.sizes)
    if args.backend == "both":
        backends = available_backends()
    elif args.backend == "auto":
        backends = [active_backend()]
    else:
        backends = [args.backend]
    results = bench.sweep([args.op], sizes, repeat=args.repeat, backends=backends)
    report = {"results": [r.to_dict() for r in results]}
    return report, [bench.format_table(results)]


# ---------------------------------------------------------------------------
# Parser assembly


def _build_parser() -> _Parser:
    parser = _Parser(prog="curvecloud", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    def add(name, handler, help_text):
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(handler=handler)
        p.add_argument("--json", action="store_true",
                       help="emit a single JSON report on stdout")
        p.add_argument("--threads", type=int, default=None,
                       help="cap internal parallelism (default: CURVECLOUD_THREADS or cores)")
        return p

    p = add("simulate", _cmd_simulate, "generate a synthetic scan from a scene JSON")
    p.add_argument("--scene", required=True, help="scene description JSON file")
    p.add_argument("--pattern", choices=PATTERNS, default="parallel")
    p.add_argument("--points", type=int, default=2048, help="point budget")
    p.add_argument("--beams", type=int, default=8)
    p.add_argument("--resolution", type=int, default=2048)
    p.add_argument("--stride", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="scan output (.bin or .csv)")

    p = add("convert", _cmd_convert, "split a scan into polyline curves")
    p.add_argument("--in", dest="infile", required=True, help="scan file (.bin or .csv)")
    p.add_argument("--delta", required=True,
                   help="split threshold; one value or per-beam comma list")
    p.add_argument("--range-scaling", action="store_true",
                   help="scale the threshold with sqrt(range / reference range)")
    p.add_argument("--origin", default="0,0,0", help="sensor origin for range scaling")
    p.add_argument("--reference-range", type=float, default=1.0)
    p.add_argument("--out", required=True, help="curve cloud output (.bin)")

    p = add("fps", _cmd_fps, "sample points along curves at a geodesic interval")
    p.add_argument("--in", dest="infile", required=True, help="curve cloud (.bin)")
    p.add_argument("--epsilon", type=float, required=True, help="geodesic interval")
    p.add_argument("--out", required=True, help="selected index CSV")

    p = add("group", _cmd_group, "geodesic neighborhoods around sampled centroids")
    p.add_argument("--in", dest="infile", required=True, help="curve cloud (.bin)")
    p.add_argument("--radius", type=float, required=True, help="geodesic radius")
    p.add_argument("--epsilon", type=float, default=None,
                   help="centroid sampling interval (default: every point)")
    p.add_argument("--max-neighbors", type=int, default=None)
    p.add_argument("--out", required=True, help="neighborhood range CSV")

    p = add("init-params", _cmd_init_params, "initialize backbone parameters")
    p.add_argument("--config", required=True, help="backbone config JSON")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="parameter directory")

    p = add("forward", _cmd_forward, "run segmentation inference on a curve cloud")
    p.add_argument("--in", dest="infile", required=True, help="curve cloud (.bin)")
    p.add_argument("--params", required=True, help="parameter directory")
    p.add_argument("--config", default=None,
                   help="optional config JSON; must match the params manifest")
    p.add_argument("--features", default=None,
                   help="optional input feature map (.bin); default: positions")
    p.add_argument("--logits", default=None, help="optional logits output (.bin)")
    p.add_argument("--out", required=True, help="labels CSV")

    p = add("export-ply", _cmd_export_ply, "color points by label into ASCII PLY")
    p.add_argument("--in", dest="infile", required=True, help="curve cloud (.bin)")
    p.add_argument("--labels", required=True, help="labels CSV")
    p.add_argument("--out", required=True, help="PLY output")

    p = add("bench", _cmd_bench, "time one operation over a size sweep")
    p.add_argument("--op", choices=sorted(bench.OPS), required=True)
    p.add_argument("--sizes", default="1e4,1e5", help="comma list, e.g. 1e4,1e5,1e6")
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--backend", choices=["auto", "both", *available_backends()],
                   default="auto")

    return parser


def _emit(args, command: str, status: str, fields: dict, lines: list[str]) -> None:
    if getattr(args, "json", False):
        report = {"version": __version__, "command": command, "status": status}
        report.update(fields)
        print(json.dumps(report))
    else:
        for line in lines:
            print(line)


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.threads is not None:
        try:
            set_num_threads(args.threads)
        except ValueError as exc:
            print(f"curvecloud: error: {exc}", file=sys.stderr)
            return 1
    command = args.command
    try:
        fields, lines = args.handler(args)
    except CurveCloudError as exc:
        print(f"curvecloud {command}: {exc}", file=sys.stderr)
        _emit(args, command, "error", {"error": str(exc)}, [])
        return 2
    except ValueError as exc:
        print(f"curvecloud {command}: {exc}", file=sys.stderr)
        _emit(args, command, "error", {"error": str(exc)}, [])
        return 1
    except OSError as exc:
        print(f"curvecloud {command}: {exc}", file=sys.stderr)
        _emit(args, command, "error", {"error": str(exc)}, [])
        return 2
    except Exception as exc:  # pragma: no cover - defensive
        print(f"curvecloud {command}: internal error: {exc}", file=sys.stderr)
        _emit(args, command, "error", {"error": str(exc)}, [])
        return 3
    _emit(args, command, "ok", fields, lines)
    return 0


if __name__ == "__main__":
    sys.exit(main())
