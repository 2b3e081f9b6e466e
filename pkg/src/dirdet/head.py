"""Anchor-free single-head grid codec and its training losses.

Each cell of the 16x16 head emits one vector in channel order
``(x, y, theta, obj, abd_cls, bee_cls)``. Offsets are sigmoids relative
to the cell's top-left corner, the angle is ReLU followed by mod 2*pi,
objectness and classes are independent sigmoids.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .annotations import ABDOMEN, BEE, DEFAULT_CLASSES, ClassSpec, GroundTruth
from .geometry import TWO_PI, DirectedBox
from .postprocess import Detection

GRID_SIZE = 16
IMAGE_SIZE = 512
CHANNELS = ("x", "y", "theta", "obj", "abd_cls", "bee_cls")
CH_X, CH_Y, CH_THETA, CH_OBJ = 0, 1, 2, 3
CLASS_ORDER = (ABDOMEN, BEE)  # class ids of channels 4, 5, ...
BCE_EPS = 1e-7
LOGIT_SAT = 10.0  # sigmoid(10) > 0.9999


class CellCollisionWarning(UserWarning):
    pass


def sigmoid(x):
    # tanh form stays finite for any input
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(x, dtype=float)))


def logit(p):
    p = np.asarray(p, dtype=float)
    return np.log(p) - np.log1p(-p)


def wrap_angles(theta):
    """Vectorised ``wrap_angle``."""
    r = np.mod(theta, TWO_PI)
    return np.where(r >= TWO_PI, 0.0, r)


def _cell_size(image_size: int, grid: int) -> float:
    if image_size <= 0 or image_size % grid:
        raise ValueError(f"image size {image_size} is not a positive multiple of grid {grid}")
    return image_size / grid


@dataclass
class GridOutput:
    """Raw head output, shape (grid, grid, 4 + number of classes)."""

    raw: np.ndarray
    image_size: int = IMAGE_SIZE

    def __post_init__(self):
        self.raw = np.asarray(self.raw, dtype=float)
        if self.raw.ndim != 3 or self.raw.shape[0] != self.raw.shape[1] or self.raw.shape[2] < 5:
            raise ValueError(f"bad grid shape {self.raw.shape}")
        if not np.all(np.isfinite(self.raw)):
            raise ValueError("grid contains non-finite values")
        _cell_size(self.image_size, self.grid)

    @property
    def grid(self) -> int:
        return self.raw.shape[0]

    @property
    def cell_size(self) -> float:
        return self.image_size / self.grid


def activate(raw) -> np.ndarray:
    """Activate raw vectors along the last axis."""
    raw = np.asarray(raw, dtype=float)
    out = sigmoid(raw)
    out[..., CH_THETA] = wrap_angles(np.maximum(raw[..., CH_THETA], 0.0))
    return out


@dataclass
class TargetField:
    """Per-cell regression targets; absent cells carry zeros and cls 0."""

    present: np.ndarray  # (G, G) bool
    offsets: np.ndarray  # (G, G, 2) x then y
    theta: np.ndarray  # (G, G), nan where no direction
    cls: np.ndarray  # (G, G) int
    image_size: int = IMAGE_SIZE

    @property
    def grid(self) -> int:
        return self.present.shape[0]

    @property
    def directed(self) -> np.ndarray:
        return self.present & ~np.isnan(self.theta)

    @classmethod
    def empty(cls, grid: int = GRID_SIZE, image_size: int = IMAGE_SIZE) -> "TargetField":
        return cls(
            np.zeros((grid, grid), bool),
            np.zeros((grid, grid, 2)),
            np.full((grid, grid), np.nan),
            np.zeros((grid, grid), int),
            image_size,
        )


def assign_targets(
    gts: Sequence[GroundTruth], image_size: int = IMAGE_SIZE, grid: int = GRID_SIZE
) -> TargetField:
    """Assign every ground truth to the cell containing its center.

    When two centers share a cell the first one wins and a
    ``CellCollisionWarning`` names both.
    """
    cell = _cell_size(image_size, grid)
    tf = TargetField.empty(grid, image_size)
    owner: dict[tuple[int, int], GroundTruth] = {}
    for gt in gts:
        cx, cy = gt.box.cx, gt.box.cy
        if not (0.0 <= cx < image_size and 0.0 <= cy < image_size):
            raise ValueError(f"center ({cx}, {cy}) lies outside the {image_size}px image")
        gx, gy = cx / cell, cy / cell
        col, row = int(math.floor(gx)), int(math.floor(gy))
        if (row, col) in owner:
            warnings.warn(
                CellCollisionWarning(
                    f"cell ({row}, {col}) already holds {owner[row, col]}; dropping {gt}"
                ),
                stacklevel=2,
            )
            continue
        owner[row, col] = gt
        tf.present[row, col] = True
        tf.offsets[row, col] = (gx - col, gy - row)
        tf.theta[row, col] = np.nan if gt.box.theta is None else gt.box.theta
        tf.cls[row, col] = gt.cls
    return tf


def nudge_offsets(tf: TargetField, eps: float = 1e-6) -> TargetField:
    """Pull offsets off the cell border so ``encode`` can take their logit."""
    off = np.where(tf.present[..., None], np.clip(tf.offsets, eps, 1.0 - eps), tf.offsets)
    return TargetField(tf.present.copy(), off, tf.theta.copy(), tf.cls.copy(), tf.image_size)


def encode(tf: TargetField, class_order: Sequence[int] = CLASS_ORDER) -> GridOutput:
    """Raw grid whose activation reproduces ``tf`` exactly.

    Offsets must lie strictly inside (0, 1); see ``nudge_offsets``.
    """
    g = tf.grid
    raw = np.zeros((g, g, 4 + len(class_order)))
    raw[..., CH_OBJ] = -LOGIT_SAT
    raw[..., 4:] = -LOGIT_SAT
    p = tf.present
    off = tf.offsets[p]
    if np.any((off <= 0.0) | (off >= 1.0)):
        raise ValueError("offsets must lie strictly inside (0, 1) to be encoded")
    raw[p, CH_X] = logit(off[:, 0])
    raw[p, CH_Y] = logit(off[:, 1])
    d = tf.directed
    raw[d, CH_THETA] = tf.theta[d]
    raw[p, CH_OBJ] = LOGIT_SAT
    channel = {c: 4 + k for k, c in enumerate(class_order)}
    for (r, c), k in zip(np.argwhere(p), tf.cls[p]):
        if int(k) not in channel:
            raise ValueError(f"class {k} has no output channel")
        raw[r, c, channel[int(k)]] = LOGIT_SAT
    return GridOutput(raw, tf.image_size)


def decode(
    grid: GridOutput,
    conf_threshold: float = 0.0,
    specs: Mapping[int, ClassSpec] = DEFAULT_CLASSES,
    class_order: Sequence[int] = CLASS_ORDER,
) -> list[Detection]:
    """One detection per cell whose confidence reaches ``conf_threshold``.

    Confidence is objectness times the best class probability; the box
    size comes from the winning class.
    """
    if grid.raw.shape[2] != 4 + len(class_order):
        raise ValueError("grid channel count does not match class_order")
    act = activate(grid.raw)
    cell = grid.cell_size
    probs = act[..., 4:]
    best = np.argmax(probs, axis=-1)
    conf = act[..., CH_OBJ] * np.max(probs, axis=-1)
    dets = []
    g = grid.grid
    for row in range(g):
        for col in range(g):
            score = float(conf[row, col])
            if score < conf_threshold:
                continue
            spec = specs[class_order[best[row, col]]]
            cx = (col + act[row, col, CH_X]) * cell
            cy = (row + act[row, col, CH_Y]) * cell
            theta = float(act[row, col, CH_THETA]) if spec.directed else None
            box = DirectedBox(float(cx), float(cy), spec.w, spec.h, theta)
            dets.append(Detection(box, spec.id, score, row * g + col))
    return dets


# -- losses ---------------------------------------------------------------
# Every loss returns (value, gradient with respect to its prediction input).


def loss_xy(pred, target):
    """Mean over boxes of the squared offset error; pred and target are (N, 2)."""
    pred = np.asarray(pred, dtype=float).reshape(-1, 2)
    target = np.asarray(target, dtype=float).reshape(-1, 2)
    n = len(pred)
    if n == 0:
        return 0.0, np.zeros_like(pred)
    diff = pred - target
    return float(np.sum(diff * diff)) / n, 2.0 * diff / n


def loss_theta(pred, target):
    """Mean cosine distance between predicted and target headings."""
    pred = np.asarray(pred, dtype=float).ravel()
    target = np.asarray(target, dtype=float).ravel()
    n = len(pred)
    if n == 0:
        return 0.0, np.zeros_like(pred)
    delta = pred - target
    return float(np.sum(1.0 - np.cos(delta))) / n, np.sin(delta) / n


def bce(p, target, eps: float = BCE_EPS):
    """Mean binary cross-entropy with probabilities clamped to [eps, 1 - eps]."""
    p = np.asarray(p, dtype=float)
    target = np.asarray(target, dtype=float)
    n = p.size
    if n == 0:
        return 0.0, np.zeros_like(p)
    q = np.clip(p, eps, 1.0 - eps)
    loss = -(target * np.log(q) + (1.0 - target) * np.log1p(-q))
    grad = (q - target) / (q * (1.0 - q)) / n
    grad = np.where((p < eps) | (p > 1.0 - eps), 0.0, grad)
    return float(np.sum(loss)) / n, grad


def loss_obj_cls(obj_prob, cls_prob, tf: TargetField, class_order: Sequence[int] = CLASS_ORDER):
    """Objectness BCE over all cells and one-vs-all class BCE over assigned cells.

    Returns ``(l_obj, l_cls, grad_obj, grad_cls)``; the gradients have the
    shapes of ``obj_prob`` (G, G) and ``cls_prob`` (G, G, C).
    """
    obj_prob = np.asarray(obj_prob, dtype=float)
    cls_prob = np.asarray(cls_prob, dtype=float)
    l_obj, g_obj = bce(obj_prob, tf.present.astype(float))
    p = tf.present
    onehot = (tf.cls[p][:, None] == np.asarray(class_order)[None, :]).astype(float)
    l_cls, g_sel = bce(cls_prob[p], onehot)
    g_cls = np.zeros_like(cls_prob)
    g_cls[p] = g_sel
    return l_obj, l_cls, g_obj, g_cls


@dataclass(frozen=True)
class LossWeights:
    xy: float = 0.1
    theta: float = 0.1
    cls: float = 0.3
    obj: float = 1.0

    def __post_init__(self):
        for name in ("xy", "theta", "cls", "obj"):
            v = getattr(self, name)
            if not (v >= 0.0 and math.isfinite(v)):
                raise ValueError(f"loss weight {name} must be a finite non-negative number, got {v}")


@dataclass(frozen=True)
class LossComponents:
    xy: float = 0.0
    theta: float = 0.0
    cls: float = 0.0
    obj: float = 0.0


def total_loss(c: LossComponents, weights: LossWeights = LossWeights()) -> float:
    """Weighted sum of the four loss terms.

    The gradient with respect to each component is its weight, so the
    full chain down to the raw logits lives in ``grid_loss``.
    """
    return weights.xy * c.xy + weights.theta * c.theta + weights.cls * c.cls + weights.obj * c.obj


@dataclass
class GridLoss:
    total: float
    components: LossComponents
    grad: np.ndarray = field(repr=False)  # d total / d raw, same shape as the grid


def grid_loss(
    raw,
    tf: TargetField,
    weights: LossWeights = LossWeights(),
    class_order: Sequence[int] = CLASS_ORDER,
) -> GridLoss:
    """Total loss of a raw head output against assigned targets, with its gradient."""
    raw = np.asarray(raw, dtype=float)
    act = activate(raw)
    grad = np.zeros_like(raw)
    p, d = tf.present, tf.directed

    l_xy, g = loss_xy(act[p][:, :2], tf.offsets[p])
    s = act[p][:, :2]
    grad[p, :2] = weights.xy * g * s * (1.0 - s)

    l_th, g = loss_theta(act[d][:, CH_THETA], tf.theta[d])
    grad[d, CH_THETA] = weights.theta * g * (raw[d][:, CH_THETA] > 0.0)

    obj = act[..., CH_OBJ]
    cls = act[..., 4:]
    l_obj, l_cls, g_obj, g_cls = loss_obj_cls(obj, cls, tf, class_order)
    grad[..., CH_OBJ] = weights.obj * g_obj * obj * (1.0 - obj)
    grad[..., 4:] = weights.cls * g_cls * cls * (1.0 - cls)

    comps = LossComponents(l_xy, l_th, l_cls, l_obj)
    return GridLoss(total_loss(comps, weights), comps, grad)


# -- grid I/O -------------------------------------------------------------


def save_grid(grid: GridOutput, path) -> None:
    """Write ``.json`` as a tagged flat tensor, anything else as raw little-endian float64."""
    path = Path(path)
    if path.suffix == ".json":
        doc = {
            "image_size": grid.image_size,
            "shape": list(grid.raw.shape),
            "channels": list(CHANNELS),
            "data": grid.raw.ravel().tolist(),
        }
        path.write_text(json.dumps(doc))
    else:
        path.write_bytes(grid.raw.astype("<f8").tobytes())


def load_grid(path, image_size: int = IMAGE_SIZE, grid: int = GRID_SIZE, channels: int = len(CHANNELS)) -> GridOutput:
    path = Path(path)
    if path.suffix == ".json":
        doc = json.loads(path.read_text())
        data = np.asarray(doc["data"], dtype=float).reshape(doc["shape"])
        return GridOutput(data, int(doc.get("image_size", image_size)))
    data = np.frombuffer(path.read_bytes(), dtype="<f8")
    expected = grid * grid * channels
    if data.size != expected:
        raise ValueError(f"{path}: expected {expected} float64 values, found {data.size}")
    return GridOutput(data.reshape(grid, grid, channels).copy(), image_size)
