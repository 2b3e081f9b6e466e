"""Command line entry point: ``dirdet {iou,curve,nms,eval,gen}``.

Exit codes: 0 success, 1 validation or parse error, 2 I/O error.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import logging
import math
import sys
from pathlib import Path

from . import annotations as ann
from .evaluation import MATCH_THRESHOLD, evaluate, pair_images
from .geometry import DirectedBox, dir_corr, dir_iou, rotated_iou
from .postprocess import NMS_THRESHOLD, detection_to_record, detections_by_image, directed_nms
from .synthgen import InfeasibleSceneError, PerturbConfig, SceneConfig, generate_scene, perturb

log = logging.getLogger("dirdet")

EXIT_OK, EXIT_INVALID, EXIT_IO = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _unit(name):
    def parse(s):
        v = float(s)
        if not 0.0 <= v <= 1.0:
            raise argparse.ArgumentTypeError(f"{name} must lie in [0, 1], got {s}")
        return v

    return parse


def _box_tuple(s: str) -> tuple[float, ...]:
    parts = s.replace(" ", "").split(",")
    if len(parts) not in (4, 5):
        raise argparse.ArgumentTypeError(f"expected cx,cy,w,h[,theta], got {s!r}")
    try:
        return tuple(float(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"non-numeric field in box {s!r}") from None


def _make_box(vals: tuple[float, ...], degrees: bool) -> DirectedBox:
    theta = vals[4] if len(vals) == 5 else None
    if theta is not None and degrees:
        theta = math.radians(theta)
    return DirectedBox(*vals[:4], theta)


@contextlib.contextmanager
def _open_out(path):
    if path is None or str(path) == "-":
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fp:
            yield fp


def _read_lines(path):
    if str(path) == "-":
        return sys.stdin.readlines()
    with open(path) as fp:
        return fp.readlines()


def _specs(args):
    if args.classes is None:
        return ann.DEFAULT_CLASSES
    with open(args.classes) as fp:
        return ann.load_class_specs(fp)


def cmd_iou(args) -> int:
    a = _make_box(args.box_a, args.degrees)
    b = _make_box(args.box_b, args.degrees)
    iou = rotated_iou(a, b)
    corr = 1.0 if a.theta is None or b.theta is None else dir_corr(a.theta - b.theta)
    print(f"{iou:.6f} {corr:.6f} {dir_iou(a, b):.6f}")
    return EXIT_OK


def cmd_curve(args) -> int:
    if args.step <= 0 or (360 / args.step) != int(360 / args.step):
        raise UsageError(f"--step {args.step} must divide 360")
    n = int(round(360 / args.step))
    ref = DirectedBox(0.0, 0.0, args.w, args.h, 0.0)
    with _open_out(args.output) as fp:
        w = csv.writer(fp, lineterminator="\n")
        w.writerow(["delta_deg", "iou", "dir_corr", "dir_iou"])
        for k in range(n + 1):
            deg = k * args.step
            other = DirectedBox(0.0, 0.0, args.w, args.h, math.radians(deg))
            iou = rotated_iou(ref, other)
            corr = dir_corr(math.radians(deg))
            w.writerow([f"{deg:.6f}", f"{iou:.6f}", f"{corr:.6f}", f"{iou * corr:.6f}"])
    return EXIT_OK


def cmd_nms(args) -> int:
    specs = _specs(args)
    records = ann.parse_annotations(_read_lines(args.detections), specs, require_score=True)
    by_image = detections_by_image(records, specs)
    with _open_out(args.output) as fp:
        # images in first-appearance order
        for image, dets in by_image.items():
            kept = directed_nms(dets, args.dir_iou_thresh, args.score_thresh)
            ann.write_annotations(((image, detection_to_record(d)) for d in kept), fp)
    return EXIT_OK


def cmd_eval(args) -> int:
    specs = _specs(args)
    gts = ann.group_by_image(ann.parse_annotations(_read_lines(args.gt), specs), specs)
    det_records = ann.parse_annotations(_read_lines(args.det), specs, require_score=True)
    dets = detections_by_image(
        ((i, r) for i, r in det_records if r.score >= args.score_thresh), specs
    )
    report = evaluate(pair_images(gts, dets), args.dir_iou_thresh, specs, threads=args.threads)
    print(report.format_table())
    if args.output is not None:
        Path(args.output).write_text(report.to_json() + "\n")
    return EXIT_OK


def cmd_gen(args) -> int:
    specs = _specs(args)
    counts = {}
    for c in specs:
        counts[c] = args.count
    if args.bees is not None:
        counts[ann.BEE] = args.bees
    if args.abdomens is not None:
        counts[ann.ABDOMEN] = args.abdomens
    out = Path(args.output or ".")
    out.mkdir(parents=True, exist_ok=True)
    gt_lines, det_lines = [], []
    for k in range(args.images):
        image = f"synth_{k:04d}.png"
        seed = args.seed + k
        gts = generate_scene(
            SceneConfig(args.image_size, counts, args.min_sep, seed), specs
        )
        dets = perturb(
            gts,
            PerturbConfig(
                center_sigma=args.center_noise,
                angle_sigma=args.angle_noise,
                fp_rate=args.fp_rate,
                fn_rate=args.fn_rate,
                image_size=args.image_size,
                seed=seed,
            ),
            specs,
        )
        gt_lines += [ann.record_to_json(image, ann.ground_truth_to_record(g)) for g in gts]
        det_lines += [ann.record_to_json(image, detection_to_record(d)) for d in dets]
    (out / "gt.jsonl").write_text("".join(line + "\n" for line in gt_lines))
    (out / "det.jsonl").write_text("".join(line + "\n" for line in det_lines))
    log.info("wrote %d targets and %d detections to %s", len(gt_lines), len(det_lines), out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="dirdet", description="Directed-box IoU, NMS and mAP tools.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    common = _Parser(add_help=False)
    common.add_argument("--classes", default=None, help="JSON class-spec file")
    common.add_argument("--output", default=None, help="output path ('-' for stdout)")

    s = sub.add_parser("iou", parents=[common], help="IoU, DirCorr and DirIoU of two boxes")
    s.add_argument("--box-a", type=_box_tuple, required=True, metavar="CX,CY,W,H[,THETA]")
    s.add_argument("--box-b", type=_box_tuple, required=True, metavar="CX,CY,W,H[,THETA]")
    s.add_argument("--degrees", action="store_true", help="angles given in degrees")
    s.set_defaults(func=cmd_iou)

    s = sub.add_parser("curve", parents=[common], help="IoU/DirIoU versus heading difference (CSV)")
    s.add_argument("--w", type=float, default=40.0)
    s.add_argument("--h", type=float, default=70.0)
    s.add_argument("--step", type=float, default=1.0, help="step in degrees")
    s.set_defaults(func=cmd_curve)

    s = sub.add_parser("nms", parents=[common], help="directed NMS over a detections JSONL file")
    s.add_argument("detections", help="detections JSONL ('-' for stdin)")
    s.add_argument("--dir-iou-thresh", type=_unit("--dir-iou-thresh"), default=NMS_THRESHOLD)
    s.add_argument("--score-thresh", type=_unit("--score-thresh"), default=0.0)
    s.set_defaults(func=cmd_nms)

    s = sub.add_parser("eval", parents=[common], help="per-class precision/recall/AP and mAP")
    s.add_argument("gt", help="ground-truth JSONL")
    s.add_argument("det", help="detections JSONL")
    s.add_argument("--dir-iou-thresh", type=_unit("--dir-iou-thresh"), default=MATCH_THRESHOLD)
    s.add_argument("--score-thresh", type=_unit("--score-thresh"), default=0.0)
    s.add_argument("--threads", type=int, default=1)
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("gen", parents=[common], help="write a synthetic gt.jsonl and det.jsonl")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--images", type=int, default=1)
    s.add_argument("--count", type=int, default=20, help="objects per class")
    s.add_argument("--bees", type=int, default=None)
    s.add_argument("--abdomens", type=int, default=None)
    s.add_argument("--image-size", type=int, default=512)
    s.add_argument("--min-sep", type=float, default=40.0)
    s.add_argument("--center-noise", type=float, default=0.0)
    s.add_argument("--angle-noise", type=float, default=0.0)
    s.add_argument("--fp-rate", type=_unit("--fp-rate"), default=0.0)
    s.add_argument("--fn-rate", type=_unit("--fn-rate"), default=0.0)
    s.set_defaults(func=cmd_gen)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    if getattr(args, "threads", 1) < 1:
        print("dirdet: error: --threads must be >= 1", file=sys.stderr)
        return EXIT_INVALID
    try:
        return args.func(args)
    except OSError as exc:
        print(f"dirdet: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, UsageError, InfeasibleSceneError) as exc:
        print(f"dirdet: error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
