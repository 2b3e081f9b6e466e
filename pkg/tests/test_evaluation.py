import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dirdet.annotations import ABDOMEN, BEE, GroundTruth
from dirdet.evaluation import average_precision, evaluate, match_image, pair_images, pr_curve
from dirdet.geometry import DirectedBox
from dirdet.postprocess import Detection
from oracles import brute_evaluate, brute_match, fraction_ap
from scenes import eval_scene


def _gt(x, theta=0.0, cls=BEE):
    return GroundTruth(DirectedBox(x, 100, 40, 70 if cls == BEE else 40, theta if cls == BEE else None), cls)


def _det(x, score, theta=0.0, idx=0, cls=BEE):
    return Detection(DirectedBox(x, 100, 40, 70 if cls == BEE else 40, theta if cls == BEE else None), cls, score, idx)


def test_match_exact():
    res = match_image([_det(100, 0.9)], [_gt(100)])
    assert res.det_target == [0] and res.det_iou == [pytest.approx(1.0)]
    assert res.target_matched == [True]


def test_match_opposite_heading_fails():
    res = match_image([_det(100, 0.9, math.pi)], [_gt(100)])
    assert res.det_target == [None] and res.target_matched == [False]


def test_match_one_to_one():
    res = match_image([_det(102, 0.8, idx=1), _det(101, 0.9, idx=0)], [_gt(100)])
    assert res.det_target == [None, 0]


def test_match_prefers_best_unmatched_target():
    gts = [_gt(100), _gt(120)]
    res = match_image([_det(118, 0.9, idx=0), _det(104, 0.8, idx=1)], gts)
    assert res.det_target == [1, 0]


def test_match_ignores_other_class():
    res = match_image([_det(100, 0.9, cls=ABDOMEN)], [_gt(100)])
    assert res.det_target == [None]


def test_pr_curve_hand_example():
    p, r = pr_curve([0.9, 0.8, 0.7], [True, False, True], 2)
    assert list(zip(p, r)) == [(1.0, 0.5), (0.5, 0.5), (pytest.approx(2 / 3), 1.0)]


def test_ap_hand_example():
    p, r = pr_curve([0.9, 0.8, 0.7], [True, False, True], 2)
    assert fraction_ap([True, False, True], 2) == Fraction(5, 6)
    assert average_precision(p, r) == pytest.approx(500 / 6, abs=1e-12)


def test_ap_edge_cases():
    assert average_precision(*pr_curve([1.0], [True], 1)) == 100.0
    assert average_precision([], []) == 0.0
    assert average_precision(*pr_curve([0.5, 0.4], [False, False], 3)) == 0.0


@given(st.lists(st.booleans(), max_size=40), st.integers(0, 10))
def test_ap_matches_exact_fraction(flags, extra):
    n = sum(flags) + extra
    if n == 0:
        return
    p, r = pr_curve(np.linspace(1, 0, len(flags)), flags, n)
    assert average_precision(p, r) == pytest.approx(float(100 * fraction_ap(flags, n)), abs=1e-9)


@given(st.lists(st.booleans(), min_size=1, max_size=30), st.integers(1, 5))
def test_ap_monotone_edits(flags, extra):
    n = sum(flags) + extra
    base = float(fraction_ap(flags, n))
    assert float(fraction_ap(flags + [False], n)) <= base
    assert float(fraction_ap([True] + flags, n + 1)) >= base - 1e-12


def _scene_images(n_per_image=10):
    images = {}
    for k in range(3):
        gts = [_gt(60 * i + 30, 0.3 * i) for i in range(n_per_image)]
        gts += [_gt(60 * i + 30, cls=ABDOMEN) for i in range(3)]
        dets = [Detection(g.box, g.cls, 1.0, i) for i, g in enumerate(gts)]
        images[f"i{k}"] = (gts, dets)
    return images


def test_perfect_detector():
    rep = evaluate(_scene_images())
    assert rep.mAP == 100.0
    assert all(c.ap == 100.0 and c.precision == 100.0 and c.recall == 100.0 for c in rep.classes)


def test_absent_class_excluded():
    images = {"a": ([_gt(100)], [_det(100, 0.7)])}
    rep = evaluate(images)
    abd = next(c for c in rep.classes if c.cls == ABDOMEN)
    assert abd.ap is None and abd.labels == 0
    assert rep.mAP == 100.0


def test_empty_detections():
    rep = evaluate({"a": ([_gt(100), _gt(300, cls=ABDOMEN)], [])})
    assert all(c.recall == 0.0 and c.ap == 0.0 for c in rep.classes)
    assert rep.mAP == 0.0


def test_unpaired_images():
    gts = {"a": [_gt(100)]}
    dets = {"b": [_det(100, 0.9)]}
    rep = evaluate(pair_images(gts, dets))
    bee = next(c for c in rep.classes if c.cls == BEE)
    assert (bee.tp, bee.fp, bee.fn) == (0, 1, 1)


def test_counts_invariants():
    rng = np.random.default_rng(4)
    for _ in range(20):
        images = eval_scene(rng)
        rep = evaluate(images)
        for c in rep.classes:
            assert c.tp + c.fn == c.labels
            assert c.tp + c.fp == c.detections
        for k, res in rep.matches.items():
            gts, dets = images[k]
            matched = [t for t in res.det_target if t is not None]
            assert len(matched) == len(set(matched)) <= min(len(gts), len(dets))
            for i, t in enumerate(res.det_target):
                if t is not None:
                    assert res.det_iou[i] >= 0.3


def test_brute_force_equivalence_small():
    rng = np.random.default_rng(9)
    for _ in range(30):
        images = eval_scene(rng)
        rep = evaluate(images)
        ref = brute_evaluate(images, 0.3, (BEE, ABDOMEN))
        for c in rep.classes:
            tp, fp, fn, ap = ref[c.cls]
            assert (c.tp, c.fp, c.fn) == (tp, fp, fn)
            assert (c.ap is None) == (ap is None)
            if ap is not None:
                assert c.ap == pytest.approx(ap, abs=1e-9)


def test_score_transform_invariance():
    rng = np.random.default_rng(12)
    images = eval_scene(rng, n_images=4)
    warped = {
        k: (g, [Detection(d.box, d.cls, d.score ** 3 * 0.5, d.index) for d in ds]) for k, (g, ds) in images.items()
    }
    a, b = evaluate(images), evaluate(warped)
    assert [c.ap for c in a.classes] == [c.ap for c in b.classes]


def test_threads_are_deterministic():
    rng = np.random.default_rng(13)
    images = eval_scene(rng, n_images=8)
    assert evaluate(images).to_json() == evaluate(images, threads=4).to_json()


def test_report_formats():
    rep = evaluate(_scene_images())
    doc = json.loads(rep.to_json())
    assert doc["mAP"] == 100.0 and doc["threshold"] == 0.3
    table = rep.format_table()
    assert "Labels" in table and "AP30" in table and "mAP@30 100.000" in table
