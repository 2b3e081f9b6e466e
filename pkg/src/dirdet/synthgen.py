"""Seeded synthetic scenes and a detector-noise model.

Lets the decode -> NMS -> evaluate chain run end to end without a
trained network.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .annotations import ABDOMEN, BEE, DEFAULT_CLASSES, ClassSpec, GroundTruth
from .geometry import TWO_PI, DirectedBox, wrap_angle
from .postprocess import Detection


class InfeasibleSceneError(RuntimeError):
    pass


@dataclass(frozen=True)
class SceneConfig:
    image_size: int = 512
    counts: Mapping[int, int] = field(default_factory=lambda: {BEE: 20, ABDOMEN: 5})
    # 40 px keeps any two same-class default boxes below DirIoU 0.3
    min_separation: float = 40.0
    seed: int = 0
    max_attempts: int = 10_000

    def __post_init__(self):
        if self.image_size <= 0:
            raise ValueError("image_size must be positive")
        if any(n < 0 for n in self.counts.values()):
            raise ValueError("object counts must be non-negative")
        if self.min_separation < 0:
            raise ValueError("min_separation must be non-negative")


@dataclass(frozen=True)
class PerturbConfig:
    center_sigma: float = 0.0
    angle_sigma: float = 0.0
    fp_rate: float = 0.0
    fn_rate: float = 0.0
    tp_score: tuple[float, float] = (0.5, 1.0)
    fp_score: tuple[float, float] = (0.0, 0.7)
    image_size: int = 512
    seed: int = 0

    def __post_init__(self):
        if self.center_sigma < 0 or self.angle_sigma < 0:
            raise ValueError("noise sigmas must be non-negative")
        for name in ("fp_rate", "fn_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        for name in ("tp_score", "fp_score"):
            lo, hi = getattr(self, name)
            if not 0.0 <= lo <= hi <= 1.0:
                raise ValueError(f"{name} must be an interval inside [0, 1]")


def generate_scene(cfg: SceneConfig, specs: Mapping[int, ClassSpec] = DEFAULT_CLASSES) -> list[GroundTruth]:
    """Place objects by rejection sampling so all centers keep ``min_separation``.

    Classes are placed in ascending id order. Directed classes get a
    uniform heading.
    """
    rng = np.random.default_rng(cfg.seed)
    placed: list[tuple[float, float]] = []
    out = []
    sep2 = cfg.min_separation ** 2
    for cls in sorted(cfg.counts):
        spec = specs[cls]
        for _ in range(cfg.counts[cls]):
            for _attempt in range(cfg.max_attempts):
                x, y = rng.uniform(0.0, cfg.image_size, size=2)
                if all((x - px) ** 2 + (y - py) ** 2 >= sep2 for px, py in placed):
                    break
            else:
                raise InfeasibleSceneError(
                    f"could not place object {len(out) + 1} with separation "
                    f"{cfg.min_separation} after {cfg.max_attempts} attempts"
                )
            placed.append((x, y))
            theta = float(rng.uniform(0.0, TWO_PI)) if spec.directed else None
            out.append(GroundTruth(DirectedBox(float(x), float(y), spec.w, spec.h, theta), cls))
    return out


def perturb(
    gts: Sequence[GroundTruth],
    cfg: PerturbConfig,
    specs: Mapping[int, ClassSpec] = DEFAULT_CLASSES,
) -> list[Detection]:
    """Turn targets into noisy detections.

    Each target is dropped with probability ``fn_rate``; survivors get
    Gaussian center and heading noise and a score from ``tp_score``. Each
    target also spawns, with probability ``fp_rate``, a same-class false
    positive placed uniformly with a score from ``fp_score``. Detections
    are indexed in emission order.
    """
    rng = np.random.default_rng(cfg.seed)
    dets = []
    fps = []
    for gt in gts:
        # fixed number of draws per target keeps streams aligned across configs
        keep_u, s_tp, fp_u, fx, fy, fth, s_fp = rng.random(7)
        dx, dy, dth = rng.standard_normal(3)
        spec = specs[gt.cls]
        if keep_u >= cfg.fn_rate:
            b = gt.box
            theta = wrap_angle(b.theta + cfg.angle_sigma * dth) if b.theta is not None else None
            box = DirectedBox(b.cx + cfg.center_sigma * dx, b.cy + cfg.center_sigma * dy, b.w, b.h, theta)
            dets.append((box, gt.cls, _lerp(cfg.tp_score, s_tp)))
        if fp_u < cfg.fp_rate:
            theta = fth * TWO_PI if spec.directed else None
            box = DirectedBox(fx * cfg.image_size, fy * cfg.image_size, spec.w, spec.h, theta)
            fps.append((box, gt.cls, _lerp(cfg.fp_score, s_fp)))
    return [Detection(b, c, s, i) for i, (b, c, s) in enumerate(dets + fps)]


def _lerp(interval, u: float) -> float:
    lo, hi = interval
    return lo + (hi - lo) * u

