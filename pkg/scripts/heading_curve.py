"""Tabulate IoU, direction correction and DirIoU against heading difference.

Two same-center boxes, one rotated by delta. Writes CSV to stdout or --out.
"""

import argparse
import csv
import math
import sys

from dirdet.geometry import DirectedBox, dir_corr, dir_iou, rotated_iou


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--w", type=float, default=40.0)
    p.add_argument("--h", type=float, default=70.0)
    p.add_argument("--step", type=float, default=5.0, help="degrees")
    p.add_argument("--out", default=None)
    args = p.parse_args()

    ref = DirectedBox(0.0, 0.0, args.w, args.h, 0.0)
    fp = open(args.out, "w", newline="") if args.out else sys.stdout
    w = csv.writer(fp, lineterminator="\n")
    w.writerow(["delta_deg", "iou", "dir_corr", "dir_iou"])
    deg = 0.0
    crossing = None
    prev = None
    while deg <= 180.0 + 1e-9:
        other = DirectedBox(0.0, 0.0, args.w, args.h, math.radians(deg))
        d = dir_iou(ref, other)
        w.writerow([f"{deg:.1f}", f"{rotated_iou(ref, other):.6f}", f"{dir_corr(math.radians(deg)):.6f}", f"{d:.6f}"])
        if crossing is None and prev is not None and prev >= 0.3 > d:
            crossing = deg
        prev = d
        deg += args.step
    if fp is not sys.stdout:
        fp.close()
    if crossing is not None:
        print(f"DirIoU first drops below 0.3 at {crossing:g} deg", file=sys.stderr)


if __name__ == "__main__":
    main()
