"""Directed-object detection geometry, NMS and mAP evaluation."""

from .annotations import ABDOMEN, BEE, DEFAULT_CLASSES, AnnotationRecord, ClassSpec, GroundTruth
from .evaluation import EvalReport, average_precision, evaluate, match_image, pr_curve
from .geometry import DirectedBox, box_corners, dir_corr, dir_iou, intersect_convex, polygon_area, rotated_iou, wrap_angle
from .head import GridOutput, LossWeights, activate, assign_targets, decode, encode, grid_loss
from .postprocess import Detection, directed_nms
from .synthgen import PerturbConfig, SceneConfig, generate_scene, perturb

__version__ = "0.1.0"
