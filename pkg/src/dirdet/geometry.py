"""Rotated-rectangle geometry for directed boxes.

Angles follow the annotation convention: 0 points up the image (towards
decreasing y), and angles grow clockwise on screen, in [0, 2*pi).
Coordinates are image pixels, x to the right and y down.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

TWO_PI = 2.0 * math.pi
MERGE_TOL = 1e-9


def wrap_angle(theta: float) -> float:
    """Map any finite angle to its representative in [0, 2*pi)."""
    theta = float(theta)
    if not math.isfinite(theta):
        raise ValueError(f"angle must be finite, got {theta!r}")
    r = theta % TWO_PI
    # tiny negative inputs round up to exactly 2*pi
    if r >= TWO_PI:
        r = 0.0
    return r


@dataclass(frozen=True)
class DirectedBox:
    """Rectangle of width ``w`` across the heading and ``h`` along it.

    ``theta`` is None for direction-free objects; such boxes are laid out
    as if theta were 0.
    """

    cx: float
    cy: float
    w: float
    h: float
    theta: Optional[float] = None

    def __post_init__(self):
        for name in ("cx", "cy", "w", "h"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v!r}")
        if not (self.w > 0 and self.h > 0):
            raise ValueError(f"box sides must be positive, got w={self.w}, h={self.h}")
        if self.theta is not None:
            object.__setattr__(self, "theta", wrap_angle(self.theta))

    @property
    def directed(self) -> bool:
        return self.theta is not None

    @property
    def area(self) -> float:
        return self.w * self.h

    @property
    def radius(self) -> float:
        """Half diagonal; no point of the box lies further from the center."""
        return 0.5 * math.hypot(self.w, self.h)

    def heading(self) -> tuple[float, float]:
        """Unit vector pointing where the object faces."""
        t = self.theta or 0.0
        return math.sin(t), -math.cos(t)

    def translated(self, dx: float, dy: float) -> "DirectedBox":
        return DirectedBox(self.cx + dx, self.cy + dy, self.w, self.h, self.theta)


def box_corners(box: DirectedBox) -> np.ndarray:
    """Four corners as a (4, 2) array with positive shoelace orientation.

    Order: head-right, tail-right, tail-left, head-left, where "right" is
    the +perpendicular side ``(cos t, sin t)``.
    """
    dx, dy = box.heading()
    px, py = -dy, dx
    hh, hw = 0.5 * box.h, 0.5 * box.w
    ax, ay = hh * dx, hh * dy
    bx, by = hw * px, hw * py
    return np.array(
        [
            [box.cx + ax + bx, box.cy + ay + by],
            [box.cx - ax + bx, box.cy - ay + by],
            [box.cx - ax - bx, box.cy - ay - by],
            [box.cx + ax - bx, box.cy + ay - by],
        ]
    )


def signed_area(poly) -> float:
    poly = np.asarray(poly, dtype=float).reshape(-1, 2)
    if len(poly) < 3:
        return 0.0
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def polygon_area(poly) -> float:
    """Shoelace area, independent of winding."""
    return abs(signed_area(poly))


def _ccw(poly: np.ndarray) -> np.ndarray:
    return poly[::-1] if signed_area(poly) < 0 else poly


def _dedupe(points: list, tol: float = MERGE_TOL) -> list:
    out = []
    for p in points:
        if out and abs(p[0] - out[-1][0]) <= tol and abs(p[1] - out[-1][1]) <= tol:
            continue
        out.append(p)
    while len(out) > 1 and abs(out[0][0] - out[-1][0]) <= tol and abs(out[0][1] - out[-1][1]) <= tol:
        out.pop()
    return out


def _clip(subject: list, clip: list, tol: float) -> list:
    """Sutherland-Hodgman on tuples; both polygons counter-clockwise."""
    n = len(clip)
    for i in range(n):
        if not subject:
            break
        x1, y1 = clip[i]
        x2, y2 = clip[(i + 1) % n]
        ex, ey = x2 - x1, y2 - y1
        norm = math.hypot(ex, ey)
        if norm == 0.0:
            continue
        # signed distance to the clip edge, positive on the inner side
        dists = [(ex * (py - y1) - ey * (px - x1)) / norm for px, py in subject]
        if min(dists) >= -tol:
            continue
        out = []
        s, ds = subject[-1], dists[-1]
        for e, de in zip(subject, dists):
            e_in = de >= -tol
            if e_in != (ds >= -tol):
                t = ds / (ds - de)
                out.append((s[0] + t * (e[0] - s[0]), s[1] + t * (e[1] - s[1])))
            if e_in:
                out.append(e)
            s, ds = e, de
        subject = _dedupe(out, tol)
    return subject if len(subject) >= 3 else []


def _shoelace(pts: list) -> float:
    n = len(pts)
    acc = 0.0
    for i in range(n):
        x0, y0 = pts[i]
        x1, y1 = pts[(i + 1) % n]
        acc += x0 * y1 - x1 * y0
    return 0.5 * acc


def intersect_convex(a, b, tol: float = MERGE_TOL) -> np.ndarray:
    """Intersection of two convex polygons by Sutherland-Hodgman clipping.

    Returns a (k, 2) array, k == 0 or k >= 3, counter-clockwise in the
    mathematical sense (positive signed area).
    """
    a = np.asarray(a, dtype=float).reshape(-1, 2)
    b = np.asarray(b, dtype=float).reshape(-1, 2)
    if len(a) < 3 or len(b) < 3:
        return np.empty((0, 2))
    out = _clip([tuple(p) for p in _ccw(a)], [tuple(p) for p in _ccw(b)], tol)
    return np.array(out) if out else np.empty((0, 2))


def _corner_list(box: DirectedBox, ox: float, oy: float) -> list:
    dx, dy = box.heading()
    hh, hw = 0.5 * box.h, 0.5 * box.w
    ax, ay = hh * dx, hh * dy
    bx, by = -hw * dy, hw * dx
    cx, cy = box.cx - ox, box.cy - oy
    return [
        (cx + ax + bx, cy + ay + by),
        (cx - ax + bx, cy - ay + by),
        (cx - ax - bx, cy - ay - by),
        (cx + ax - bx, cy + ay - by),
    ]


def rotated_iou(a: DirectedBox, b: DirectedBox) -> float:
    """Skew IoU of two rectangles; symmetric in its arguments."""
    dx, dy = b.cx - a.cx, b.cy - a.cy
    if math.hypot(dx, dy) >= a.radius + b.radius:
        return 0.0
    # clip in a fixed order so swapping arguments gives bit-identical results
    first, second = (a, b) if _order_key(a) <= _order_key(b) else (b, a)
    # work relative to the midpoint to keep coordinates small
    mx, my = 0.5 * (a.cx + b.cx), 0.5 * (a.cy + b.cy)
    poly = _clip(_corner_list(first, mx, my), _corner_list(second, mx, my), MERGE_TOL)
    inter = abs(_shoelace(poly)) if poly else 0.0
    if inter <= 0.0:
        return 0.0
    union = a.area + b.area - inter
    return min(1.0, max(0.0, inter / union))


def _order_key(box: DirectedBox):
    return (box.cx, box.cy, box.w, box.h, -1.0 if box.theta is None else box.theta)


def dir_corr(delta_theta: float) -> float:
    """Direction correction (1 + cos d) / 2: 1 for equal headings, 0 for opposite."""
    return 0.5 * (1.0 + math.cos(delta_theta))


def dir_iou(a: DirectedBox, b: DirectedBox) -> float:
    """Skew IoU scaled by the direction correction.

    A direction-free box on either side leaves the IoU unscaled.
    """
    iou = rotated_iou(a, b)
    if iou == 0.0 or a.theta is None or b.theta is None:
        return iou
    return iou * dir_corr(abs(a.theta - b.theta))
