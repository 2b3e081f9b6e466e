"""Greedy per-class non-maximum suppression under DirIoU."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .annotations import DEFAULT_CLASSES, AnnotationRecord, ClassSpec, annotation_to_box
from .geometry import DirectedBox, dir_iou

NMS_THRESHOLD = 0.3


@dataclass(frozen=True)
class Detection:
    box: DirectedBox
    cls: int
    score: float
    index: int = 0

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score must lie in [0, 1], got {self.score}")


def sort_key(det: Detection):
    return (-det.score, det.index)


def directed_nms(
    dets: Sequence[Detection],
    dir_iou_threshold: float = NMS_THRESHOLD,
    score_threshold: float = 0.0,
) -> list[Detection]:
    """Keep detections greedily by score, dropping same-class overlaps.

    A detection is suppressed when its DirIoU with an already kept
    detection of the same class is >= ``dir_iou_threshold``. Equal scores
    are ordered by ``index``. The result is in keep order.
    """
    for name, v in (("dir_iou_threshold", dir_iou_threshold), ("score_threshold", score_threshold)):
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"{name} must lie in [0, 1], got {v}")
    cands = sorted((d for d in dets if d.score >= score_threshold), key=sort_key)

    kept: list[Detection] = []
    # per class: centers and radii of kept boxes for a vectorised distance reject
    centers: dict[int, list] = {}
    radii: dict[int, list] = {}
    kept_by_cls: dict[int, list[Detection]] = {}
    for det in cands:
        others = kept_by_cls.setdefault(det.cls, [])
        # at threshold 0 even disjoint boxes (DirIoU 0) suppress each other
        suppressed = bool(others) and dir_iou_threshold <= 0.0
        if others and not suppressed:
            c = np.asarray(centers[det.cls])
            dist = np.hypot(c[:, 0] - det.box.cx, c[:, 1] - det.box.cy)
            near = np.flatnonzero(dist < np.asarray(radii[det.cls]) + det.box.radius)
            for j in near:
                if dir_iou(others[j], det.box) >= dir_iou_threshold:
                    suppressed = True
                    break
        if suppressed:
            continue
        kept.append(det)
        others.append(det.box)
        centers.setdefault(det.cls, []).append((det.box.cx, det.box.cy))
        radii.setdefault(det.cls, []).append(det.box.radius)
    return kept


def record_to_detection(
    rec: AnnotationRecord, index: int, specs: Mapping[int, ClassSpec] = DEFAULT_CLASSES
) -> Detection:
    if rec.score is None:
        raise ValueError("detection record has no score")
    return Detection(annotation_to_box(rec, specs), rec.t, rec.score, index)


def detection_to_record(det: Detection) -> AnnotationRecord:
    return AnnotationRecord(det.box.cx, det.box.cy, det.cls, det.box.theta, det.score)


def detections_by_image(
    records: Iterable[tuple[str, AnnotationRecord]],
    specs: Mapping[int, ClassSpec] = DEFAULT_CLASSES,
) -> dict[str, list[Detection]]:
    """Group detection records per image; ``index`` is the line order within its image."""
    out: dict[str, list[Detection]] = {}
    for image, rec in records:
        group = out.setdefault(image, [])
        group.append(record_to_detection(rec, len(group), specs))
    return out
