"""Ground-truth records and the per-class uniform box model.

Records travel as JSON Lines, one object per line::

    {"image": "a.png", "x": 100, "y": 200, "t": 1, "theta": 0.0}
    {"image": "a.png", "x": 50, "y": 60, "t": 2}

Detection files use the same keys plus ``"score"``.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from typing import IO, Iterable, Mapping, Optional

from .geometry import DirectedBox, wrap_angle

log = logging.getLogger(__name__)

BEE = 1
ABDOMEN = 2


class AnnotationError(ValueError):
    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ParseError(AnnotationError):
    pass


class ValidationError(AnnotationError):
    pass


@dataclass(frozen=True)
class ClassSpec:
    id: int
    name: str
    w: float
    h: float
    directed: bool

    def __post_init__(self):
        if not (self.w > 0 and self.h > 0):
            raise ValueError(f"class {self.id}: box sides must be positive")


# bee: ellipse with semi-axes 20/35 px -> enclosing 40x70 box
# abdomen: circle with r = 20 px -> enclosing 40x40 box
DEFAULT_CLASSES: dict[int, ClassSpec] = {
    BEE: ClassSpec(BEE, "bee", 40.0, 70.0, True),
    ABDOMEN: ClassSpec(ABDOMEN, "abdomen", 40.0, 40.0, False),
}


def load_class_specs(fp: IO[str]) -> dict[int, ClassSpec]:
    """Read a JSON list of ``{id, name, w, h, directed}`` objects."""
    try:
        raw = json.load(fp)
    except json.JSONDecodeError as exc:
        raise ParseError(f"class spec is not valid JSON: {exc}") from None
    if not isinstance(raw, list) or not raw:
        raise ValidationError("class spec must be a non-empty JSON list")
    specs = {}
    for item in raw:
        try:
            spec = ClassSpec(
                int(item["id"]),
                str(item["name"]),
                float(item["w"]),
                float(item["h"]),
                bool(item["directed"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"bad class entry {item!r}: {exc}") from None
        if spec.id in specs:
            raise ValidationError(f"duplicate class id {spec.id}")
        specs[spec.id] = spec
    return specs


def dump_class_specs(specs: Mapping[int, ClassSpec], fp: IO[str]) -> None:
    json.dump(
        [
            {"id": s.id, "name": s.name, "w": s.w, "h": s.h, "directed": s.directed}
            for s in specs.values()
        ],
        fp,
        indent=2,
    )


@dataclass(frozen=True)
class AnnotationRecord:
    """One labelled object, or one detection when ``score`` is set."""

    x: float
    y: float
    t: int
    theta: Optional[float] = None
    score: Optional[float] = None


def _number(obj: dict, key: str, lineno: int) -> float:
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ValidationError(f"{key!r} must be a number, got {v!r}", lineno)
    v = float(v)
    if not math.isfinite(v):
        raise ValidationError(f"{key!r} must be finite", lineno)
    return v


def parse_record(
    line: str,
    lineno: int = 1,
    specs: Mapping[int, ClassSpec] = DEFAULT_CLASSES,
    lenient: bool = False,
    require_score: bool = False,
) -> tuple[str, AnnotationRecord]:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON ({exc.msg})", lineno) from None
    if not isinstance(obj, dict):
        raise ParseError("expected a JSON object", lineno)
    for key in ("image", "x", "y", "t"):
        if key not in obj:
            raise ValidationError(f"missing key {key!r}", lineno)
    image = obj["image"]
    if not isinstance(image, str):
        raise ValidationError(f"'image' must be a string, got {image!r}", lineno)
    t = obj["t"]
    if isinstance(t, bool) or not isinstance(t, int):
        raise ValidationError(f"'t' must be an integer, got {t!r}", lineno)
    if t not in specs:
        raise ValidationError(f"unknown class t={t}; known: {sorted(specs)}", lineno)
    x = _number(obj, "x", lineno)
    y = _number(obj, "y", lineno)

    theta = None
    if obj.get("theta") is not None:
        theta = wrap_angle(_number(obj, "theta", lineno))
    if specs[t].directed and theta is None:
        raise ValidationError(f"class t={t} is directed and needs 'theta'", lineno)
    if not specs[t].directed and theta is not None:
        if not lenient:
            raise ValidationError(f"class t={t} is direction-free but has 'theta'", lineno)
        log.warning("line %d: dropping theta of direction-free class t=%d", lineno, t)
        theta = None

    score = None
    if obj.get("score") is not None:
        score = _number(obj, "score", lineno)
        if not 0.0 <= score <= 1.0:
            raise ValidationError(f"score {score} outside [0, 1]", lineno)
    elif require_score:
        raise ValidationError("missing key 'score'", lineno)
    return image, AnnotationRecord(x, y, t, theta, score)


def parse_annotations(
    stream: Iterable[str],
    specs: Mapping[int, ClassSpec] = DEFAULT_CLASSES,
    lenient: bool = False,
    require_score: bool = False,
) -> list[tuple[str, AnnotationRecord]]:
    """Parse JSONL lines into ``(image, record)`` pairs; blank lines are skipped."""
    out = []
    for lineno, line in enumerate(stream, start=1):
        if not line.strip():
            continue
        out.append(parse_record(line, lineno, specs, lenient, require_score))
    return out


def record_to_json(image: str, rec: AnnotationRecord) -> str:
    obj = {"image": image, "x": rec.x, "y": rec.y, "t": rec.t}
    if rec.theta is not None:
        obj["theta"] = rec.theta
    if rec.score is not None:
        obj["score"] = rec.score
    return json.dumps(obj)


def write_annotations(records: Iterable[tuple[str, AnnotationRecord]], fp: IO[str]) -> None:
    for image, rec in records:
        fp.write(record_to_json(image, rec))
        fp.write("\n")


def annotation_to_box(rec: AnnotationRecord, specs: Mapping[int, ClassSpec] = DEFAULT_CLASSES) -> DirectedBox:
    """Place the class's fixed-size box at the annotated center."""
    try:
        spec = specs[rec.t]
    except KeyError:
        raise ValidationError(f"unknown class t={rec.t}") from None
    theta = rec.theta if spec.directed else None
    if spec.directed and theta is None:
        raise ValidationError(f"class t={rec.t} is directed and needs theta")
    return DirectedBox(rec.x, rec.y, spec.w, spec.h, theta)


@dataclass(frozen=True)
class GroundTruth:
    box: DirectedBox
    cls: int


def record_to_ground_truth(rec: AnnotationRecord, specs: Mapping[int, ClassSpec] = DEFAULT_CLASSES) -> GroundTruth:
    return GroundTruth(annotation_to_box(rec, specs), rec.t)


def ground_truth_to_record(gt: GroundTruth) -> AnnotationRecord:
    return AnnotationRecord(gt.box.cx, gt.box.cy, gt.cls, gt.box.theta)


def group_by_image(
    records: Iterable[tuple[str, AnnotationRecord]],
    specs: Mapping[int, ClassSpec] = DEFAULT_CLASSES,
) -> dict[str, list[GroundTruth]]:
    out: dict[str, list[GroundTruth]] = {}
    for image, rec in records:
        out.setdefault(image, []).append(record_to_ground_truth(rec, specs))
    return out
