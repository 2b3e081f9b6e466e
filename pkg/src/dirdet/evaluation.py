"""Detection scoring at a DirIoU threshold: matching, PR curves, AP and mAP.

Matching is greedy in score order; each detection takes the unmatched
same-class target with the highest DirIoU if that value reaches the
threshold. AP integrates the monotone precision envelope over every
distinct recall value (all-points interpolation). Classes with no
labels are left out of mAP.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .annotations import DEFAULT_CLASSES, ClassSpec, GroundTruth
from .geometry import dir_iou
from .postprocess import Detection, sort_key

MATCH_THRESHOLD = 0.3
METHOD = "greedy score-ordered matching, best unmatched DirIoU target; all-points AP"


@dataclass
class MatchResult:
    """Per-detection and per-target outcome, indexed like the inputs."""

    det_target: list[Optional[int]]
    det_iou: list[float]
    target_matched: list[bool]

    @property
    def tp(self) -> list[bool]:
        return [t is not None for t in self.det_target]


def match_image(
    dets: Sequence[Detection],
    gts: Sequence[GroundTruth],
    threshold: float = MATCH_THRESHOLD,
) -> MatchResult:
    order = sorted(range(len(dets)), key=lambda i: sort_key(dets[i]))
    det_target: list[Optional[int]] = [None] * len(dets)
    det_iou = [0.0] * len(dets)
    matched = [False] * len(gts)
    for i in order:
        det = dets[i]
        best, best_iou = None, -1.0
        for j, gt in enumerate(gts):
            if matched[j] or gt.cls != det.cls:
                continue
            v = dir_iou(det.box, gt.box)
            if v > best_iou:
                best, best_iou = j, v
        if best is None:
            continue
        det_iou[i] = best_iou
        if best_iou >= threshold:
            det_target[i] = best
            matched[best] = True
    return MatchResult(det_target, det_iou, matched)


def pr_curve(scores, tp, n_labels: int):
    """Precision and recall after each detection, highest score first.

    ``scores`` and ``tp`` must already be in ranking order.
    """
    tp = np.asarray(tp, dtype=bool)
    if len(scores) != len(tp):
        raise ValueError("scores and tp flags differ in length")
    ctp = np.cumsum(tp)
    cfp = np.cumsum(~tp)
    precision = ctp / np.maximum(ctp + cfp, 1)
    recall = ctp / n_labels if n_labels > 0 else np.zeros(len(tp))
    return precision, recall


def average_precision(precision, recall) -> float:
    """Area under the precision envelope, in percent."""
    precision = np.asarray(precision, dtype=float)
    recall = np.asarray(recall, dtype=float)
    if precision.size == 0:
        return 0.0
    env = np.maximum.accumulate(precision[::-1])[::-1]
    # integrate one flat envelope step at a time so a constant envelope
    # yields exactly p * r_max
    area, r_start = 0.0, 0.0
    for k in range(len(env)):
        if k + 1 == len(env) or env[k + 1] != env[k]:
            area += env[k] * (recall[k] - r_start)
            r_start = recall[k]
    return 100.0 * area


@dataclass
class ClassReport:
    cls: int
    name: str
    labels: int
    detections: int
    tp: int
    fp: int
    fn: int
    precision: float
    recall: float
    ap: Optional[float]


@dataclass
class EvalReport:
    threshold: float
    classes: list[ClassReport]
    mAP: Optional[float]
    method: str = METHOD
    # per image: detection index -> matched target index (None for FPs)
    matches: dict[str, MatchResult] = field(default_factory=dict, repr=False)

    def to_dict(self) -> dict:
        return {
            "threshold": self.threshold,
            "method": self.method,
            "classes": [asdict(c) for c in self.classes],
            "mAP": self.mAP,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def format_table(self) -> str:
        pct = round(self.threshold * 100)
        head = ["class", "Labels", "Precision", "Recall", f"AP{pct}"]
        rows = []
        for c in self.classes:
            ap = "-" if c.ap is None else f"{c.ap:.1f}"
            rows.append([c.name, str(c.labels), f"{c.precision:.1f}", f"{c.recall:.1f}", ap])
        widths = [max(len(r[k]) for r in [head] + rows) for k in range(len(head))]
        fmt = "  ".join("{:<%d}" % widths[0] if k == 0 else "{:>%d}" % widths[k] for k in range(len(head)))
        lines = [f"# DirIoU >= {self.threshold:g}; {self.method}", fmt.format(*head)]
        lines += [fmt.format(*r) for r in rows]
        m = "-" if self.mAP is None else f"{self.mAP:.3f}"
        lines.append(f"mAP@{pct} {m}")
        return "\n".join(lines)


def evaluate(
    images: Mapping[str, tuple[Sequence[GroundTruth], Sequence[Detection]]],
    threshold: float = MATCH_THRESHOLD,
    specs: Mapping[int, ClassSpec] = DEFAULT_CLASSES,
    threads: int = 1,
) -> EvalReport:
    """Score detections against targets over a set of images.

    ``images`` maps image id to ``(gts, dets)``. Precision and recall are
    reported at the point where every supplied detection is counted.
    """
    ids = sorted(images)
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(lambda k: match_image(images[k][1], images[k][0], threshold), ids))
    else:
        results = [match_image(images[k][1], images[k][0], threshold) for k in ids]

    classes = sorted(specs)
    reports = []
    for c in classes:
        labels = 0
        pooled = []  # (score, image id, det index, tp)
        for k, res in zip(ids, results):
            gts, dets = images[k]
            labels += sum(1 for g in gts if g.cls == c)
            for i, d in enumerate(dets):
                if d.cls == c:
                    pooled.append((-d.score, k, d.index, res.det_target[i] is not None))
        pooled.sort(key=lambda t: t[:3])
        tp = [t[3] for t in pooled]
        n_tp = sum(tp)
        n_det = len(tp)
        precision, recall = pr_curve([-t[0] for t in pooled], tp, labels)
        ap = average_precision(precision, recall) if labels > 0 else None
        reports.append(
            ClassReport(
                cls=c,
                name=specs[c].name,
                labels=labels,
                detections=n_det,
                tp=n_tp,
                fp=n_det - n_tp,
                fn=labels - n_tp,
                precision=100.0 * n_tp / n_det if n_det else 0.0,
                recall=100.0 * n_tp / labels if labels else 0.0,
                ap=ap,
            )
        )
    aps = [r.ap for r in reports if r.ap is not None]
    m = sum(aps) / len(aps) if aps else None
    return EvalReport(threshold, reports, m, matches=dict(zip(ids, results)))


def pair_images(
    gts: Mapping[str, Sequence[GroundTruth]], dets: Mapping[str, Sequence[Detection]]
) -> dict[str, tuple[list[GroundTruth], list[Detection]]]:
    """Join per-image targets and detections; a side missing an image counts as empty."""
    return {k: (list(gts.get(k, [])), list(dets.get(k, []))) for k in set(gts) | set(dets)}
