"""Single entry point exposing every pipeline as a subcommand.

Exit codes: 0 full success, 1 per-item failures with completed
remainder, 2 usage/config errors.  Floats in JSON/CSV output are
serialized at 9 significant digits for byte-stable reports.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .core_io import (BOTTOM_60, FULL_FRAME, EvalRegion, read_depth_png16,
                      read_edge_png8, read_panoptic_png, read_pfm,
                      read_prob_png16, write_edge_png8, write_pfm_array)
from .edges import (CannyConfig, HysteresisConfig, PanopticMap,
                    canny_depth_edges, dee_postprocess, gt_from_panoptic)
from .lidar import (DensityCurve, Intrinsics, LidarConfig, density_curve,
                    simulate_lidar, thin_to_curve)
from .loss import EdbConfig, LossConfig, total_loss
from .metrics import EvalConfig, MatchConfig, default_sweep, evaluate_dataset


def _round_floats(obj):
    """Clamp every float to 9 significant digits (shortest round-trip)."""
    if isinstance(obj, float):
        if math.isfinite(obj):
            return float(f"{obj:.9g}")
        return obj
    if isinstance(obj, dict):
        return {k: _round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_floats(v) for v in obj]
    if isinstance(obj, (np.floating,)):
        return _round_floats(float(obj))
    if isinstance(obj, (np.integer,)):
        return int(obj)
    return obj


def _dump_json(obj, path: str | None):
    text = json.dumps(_round_floats(obj), indent=2, sort_keys=True) + "\n"
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _read_depth_auto(path: str):
    data = Path(path).read_bytes()
    if data[:8] == b"\x89PNG\r\n\x1a\n":
        return read_depth_png16(data)
    return read_pfm(data)


def _region_from_args(args) -> EvalRegion:
    if getattr(args, "region", None) == "bottom60":
        return BOTTOM_60
    return FULL_FRAME


def _merge_config(args, parser):
    """--config JSON supplies defaults; explicit flags win."""
    sub = parser.command_parsers[args.command]
    if getattr(args, "config", None):
        try:
            cfg = json.loads(Path(args.config).read_text())
        except Exception as e:
            parser.error(f"bad --config: {e}")
        for key, val in cfg.items():
            attr = key.replace("-", "_")
            if hasattr(args, attr):
                # only fill values the user left at the parser default
                if sub.get_default(attr) == getattr(args, attr):
                    setattr(args, attr, val)
    return args


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="depthedge",
                                description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    p.command_parsers = {}

    def add_parser(name, **kw):
        sp = sub.add_parser(name, **kw)
        p.command_parsers[name] = sp
        return sp

    sp = add_parser("version", help="print version")

    sp = add_parser("extract-edges", help="Canny edges from a depth map")
    sp.add_argument("--depth", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--th-low", type=float, default=4.0)
    sp.add_argument("--th-high", type=float, default=5.0)
    sp.add_argument("--sigma", type=float, default=0.0)
    sp.add_argument("--config")

    sp = add_parser("gt-from-panoptic",
                        help="edge GT from a 2-channel panoptic PNG")
    sp.add_argument("--panoptic", required=True)
    sp.add_argument("--exclusions", help="JSON list of [class_a, class_b]")
    sp.add_argument("--out", required=True)

    sp = add_parser("dee-postprocess",
                        help="thin a dense edge-probability map")
    sp.add_argument("--probs", required=True, help="16-bit probability PNG")
    sp.add_argument("--low", type=float, default=0.85)
    sp.add_argument("--high", type=float, default=0.9)
    sp.add_argument("--orientation-sigma", type=float, default=2.0)
    sp.add_argument("--out", required=True)

    sp = add_parser("loss", help="edge+depth loss and gradient export")
    sp.add_argument("--pred-depth", required=True, help="PFM")
    sp.add_argument("--gt-depth", required=True, help="PNG16 or PFM")
    sp.add_argument("--gt-edges", required=True, help="PNG8")
    sp.add_argument("--t-grad", type=float, default=4.0)
    sp.add_argument("--alpha", type=float, default=0.1)
    sp.add_argument("--scales", type=int, default=1)
    sp.add_argument("--orientation-sigma", type=float, default=2.0)
    sp.add_argument("--out", required=True, help="JSON report")
    sp.add_argument("--grad-out", help="gradient field as PFM")
    sp.add_argument("--config")

    sp = add_parser("eval", help="evaluate a dataset manifest")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--curve-out", help="PR curve CSV")
    sp.add_argument("--region", choices=["full", "bottom60"], default="full")
    sp.add_argument("--t-e", type=float, default=2.0)
    sp.add_argument("--auc-lo", type=float, default=0.0)
    sp.add_argument("--auc-hi", type=float, default=1.0)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--ord-pairs", type=int, default=50_000)
    sp.add_argument("--ord-tau", type=float, default=0.03)
    sp.add_argument("--threads", type=int, default=1)
    sp.add_argument("--config")

    sp = add_parser("pr-curve", help="PR sweep for one image")
    sp.add_argument("--pred-depth", required=True)
    sp.add_argument("--gt-edges", required=True)
    sp.add_argument("--region", choices=["full", "bottom60"], default="full")
    sp.add_argument("--t-e", type=float, default=2.0)
    sp.add_argument("--out", required=True, help="CSV: param,precision,recall")

    sp = add_parser("lidar-sim", help="simulate LIDAR sampling of GT depth")
    sp.add_argument("--depth", required=True)
    sp.add_argument("--out", required=True, help="sparse depth as PNG16")
    sp.add_argument("--beams", type=int, default=64)
    sp.add_argument("--horiz-step", type=float, default=0.09)
    sp.add_argument("--fov-min", type=float, default=-24.8)
    sp.add_argument("--fov-max", type=float, default=2.0)
    sp.add_argument("--fx", type=float, required=True)
    sp.add_argument("--fy", type=float, required=True)
    sp.add_argument("--cx", type=float, required=True)
    sp.add_argument("--cy", type=float, required=True)

    sp = add_parser("density", help="LIDAR density vs distance-to-edge")
    sp.add_argument("--lidar", required=True, help="sparse depth PNG16")
    sp.add_argument("--edges", required=True, help="PNG8")
    sp.add_argument("--max-d", type=int, default=20)
    sp.add_argument("--region", choices=["full", "bottom60"], default="full")
    sp.add_argument("--out", required=True, help="JSON curve")

    sp = add_parser("thin", help="thin LIDAR samples to a target curve")
    sp.add_argument("--lidar", required=True)
    sp.add_argument("--edges", required=True)
    sp.add_argument("--target", required=True, help="JSON density curve")
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--max-d", type=int, default=20)
    sp.add_argument("--out", required=True)

    sp = add_parser("annotate", help="run the annotation service")
    sp.add_argument("--dataset-root", required=True)
    sp.add_argument("--port", type=int, default=8707)
    sp.add_argument("--proposal-source",
                    choices=["panoptic", "edge_map_files"])
    sp.add_argument("--ui-dir", help="static UI asset directory")

    return p


def _sparse_to_png16(sparse) -> bytes:
    from .core_io import write_depth_png16
    return write_depth_png16(sparse.to_dense())


def _png16_to_sparse(path: str):
    from .metrics import _depthmap_to_sparse
    return _depthmap_to_sparse(read_depth_png16(Path(path).read_bytes()))


def _curve_to_json(curve: DensityCurve) -> list:
    return [{"d": d, "ratio": r, "count": c} for d, r, c in curve.bins]


def _curve_from_json(data: list) -> DensityCurve:
    return DensityCurve(bins=tuple((b["d"], b.get("ratio"), b.get("count", 0))
                                   for b in data))


def run(argv: list[str]) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 2 if e.code not in (0, None) else 0

    try:
        if args.command == "version":
            print(__version__)
            return 0

        if args.command == "extract-edges":
            _merge_config(args, parser)
            d = _read_depth_auto(args.depth)
            cfg = CannyConfig(th_low=args.th_low, th_high=args.th_high,
                              smoothing_sigma=args.sigma)
            Path(args.out).write_bytes(write_edge_png8(canny_depth_edges(d, cfg)))
            return 0

        if args.command == "gt-from-panoptic":
            seg, cls = read_panoptic_png(Path(args.panoptic).read_bytes())
            excl = frozenset()
            if args.exclusions:
                pairs = json.loads(Path(args.exclusions).read_text())
                excl = frozenset(frozenset(p) for p in pairs)
            em = gt_from_panoptic(PanopticMap(seg, cls, excl))
            Path(args.out).write_bytes(write_edge_png8(em))
            return 0

        if args.command == "dee-postprocess":
            probs = read_prob_png16(Path(args.probs).read_bytes())
            from .loss import orientation_from_edges
            of = orientation_from_edges(
                probs, EdbConfig(orientation_sigma=args.orientation_sigma))
            em = dee_postprocess(probs, of.theta,
                                 HysteresisConfig(args.low, args.high))
            Path(args.out).write_bytes(write_edge_png8(em))
            return 0

        if args.command == "loss":
            _merge_config(args, parser)
            pred = _read_depth_auto(args.pred_depth)
            gt_d = _read_depth_auto(args.gt_depth)
            gt_e = read_edge_png8(Path(args.gt_edges).read_bytes())
            from .loss import depth_pyramid
            pyr = depth_pyramid(pred, args.scales)
            out = total_loss(pyr, gt_d, gt_e,
                             LossConfig(alpha=args.alpha,
                                        num_scales=args.scales),
                             EdbConfig(t_grad=args.t_grad,
                                       orientation_sigma=args.orientation_sigma))
            _dump_json({"total": out.total, "depth_term": out.depth_term,
                        "edge_term": out.edge_term}, args.out)
            if args.grad_out:
                Path(args.grad_out).write_bytes(
                    write_pfm_array(out.grad_wrt_depth))
            return 0

        if args.command == "eval":
            _merge_config(args, parser)
            manifest_path = Path(args.manifest)
            if not manifest_path.exists():
                print(f"error: missing manifest: {manifest_path}",
                      file=sys.stderr)
                return 2
            manifest = json.loads(manifest_path.read_text())
            cfg = EvalConfig(match=MatchConfig(t_e=args.t_e),
                             region=_region_from_args(args),
                             sweep=tuple(default_sweep()),
                             auc_range=(args.auc_lo, args.auc_hi),
                             ord_num_pairs=args.ord_pairs,
                             ord_tau=args.ord_tau, seed=args.seed)
            report = evaluate_dataset(manifest, cfg, threads=args.threads)
            payload = {
                "are": report.are, "ord": report.ord_score,
                "delta_1": report.delta_1, "delta_2": report.delta_2,
                "delta_3": report.delta_3,
                "auc_partial": report.auc_partial,
                "auc_full": report.auc_full,
                "auc_range": list(report.auc_range),
                "per_image": [{k: v for k, v in r.items() if k != "pr_points"}
                              for r in report.per_image],
                "errors": report.errors,
                "empty_prediction_convention": "precision=1 (vacuous)",
            }
            _dump_json(payload, args.out)
            if args.curve_out:
                lines = ["param,precision,recall"]
                for prec, rec, param in report.curve.points:
                    lines.append(f"{param:.9g},{prec:.9g},{rec:.9g}")
                Path(args.curve_out).write_text("\n".join(lines) + "\n")
            return 1 if report.errors else 0

        if args.command == "pr-curve":
            from .metrics import pr_sweep
            pred = _read_depth_auto(args.pred_depth)
            gt_e = read_edge_png8(Path(args.gt_edges).read_bytes())
            curve = pr_sweep(pred, gt_e, default_sweep(),
                             MatchConfig(t_e=args.t_e),
                             region=_region_from_args(args))
            lines = ["param,precision,recall"]
            for prec, rec, param in curve.points:
                lines.append(f"{param:.9g},{prec:.9g},{rec:.9g}")
            Path(args.out).write_text("\n".join(lines) + "\n")
            return 0

        if args.command == "lidar-sim":
            d = _read_depth_auto(args.depth)
            cfg = LidarConfig(num_beams=args.beams,
                              horiz_step_deg=args.horiz_step,
                              vert_fov_deg=(args.fov_min, args.fov_max),
                              intrinsics=Intrinsics(args.fx, args.fy,
                                                    args.cx, args.cy))
            Path(args.out).write_bytes(_sparse_to_png16(simulate_lidar(d, cfg)))
            return 0

        if args.command == "density":
            lidar = _png16_to_sparse(args.lidar)
            edges = read_edge_png8(Path(args.edges).read_bytes())
            curve = density_curve(lidar, edges, max_d=args.max_d,
                                  region=_region_from_args(args))
            _dump_json(_curve_to_json(curve), args.out)
            return 0

        if args.command == "thin":
            lidar = _png16_to_sparse(args.lidar)
            edges = read_edge_png8(Path(args.edges).read_bytes())
            target = _curve_from_json(json.loads(Path(args.target).read_text()))
            thinned = thin_to_curve(lidar, edges, target, seed=args.seed,
                                    max_d=args.max_d)
            Path(args.out).write_bytes(_sparse_to_png16(thinned))
            return 0

        if args.command == "annotate":
            from .annotation import AnnotationSession, create_app
            import uvicorn
            session = AnnotationSession.init_session(args.dataset_root,
                                                     args.proposal_source)
            origin = f"http://localhost:{args.port}"
            app = create_app(session, ui_dir=args.ui_dir,
                             allowed_origins=(origin,))
            uvicorn.run(app, host="127.0.0.1", port=args.port)
            return 0
    except SystemExit as e:
        return 2 if e.code not in (0, None) else 0
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (ValueError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2

    return 2


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
