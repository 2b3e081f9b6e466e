import csv
import json
import math

import pytest

from dirdet.cli import main


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_iou_identical(capsys):
    code, out, _ = run(capsys, "iou", "--box-a", "0,0,40,70,0", "--box-b", "0,0,40,70,0")
    assert code == 0 and out.strip() == "1.000000 1.000000 1.000000"


def test_iou_opposite(capsys):
    code, out, _ = run(capsys, "iou", "--box-a", "0,0,40,70,0", "--box-b", f"0,0,40,70,{math.pi}")
    assert out.strip() == "1.000000 0.000000 0.000000"


def test_iou_quarter_turn_degrees(capsys):
    code, out, _ = run(capsys, "iou", "--degrees", "--box-a", "0,0,40,70,0", "--box-b", "0,0,40,70,90")
    assert out.strip() == "0.400000 0.500000 0.200000"


@pytest.mark.parametrize("box", ["0,0,40", "a,b,c,d", "0,0,-1,5,0"])
def test_iou_malformed(capsys, box):
    code, out, err = run(capsys, "iou", "--box-a", box, "--box-b", "0,0,1,1")
    assert code == 1 and out == "" and err


def test_curve(capsys, tmp_path):
    path = tmp_path / "curve.csv"
    code, _, _ = run(capsys, "curve", "--step", "1", "--output", path)
    rows = list(csv.DictReader(path.open()))
    assert code == 0 and len(rows) == 361
    assert rows[0] == {"delta_deg": "0.000000", "iou": "1.000000", "dir_corr": "1.000000", "dir_iou": "1.000000"}
    assert (rows[180]["iou"], rows[180]["dir_iou"]) == ("1.000000", "0.000000")
    assert (rows[90]["iou"], rows[90]["dir_iou"]) == ("0.400000", "0.200000")


def test_curve_bad_step(capsys):
    code, _, err = run(capsys, "curve", "--step", "7")
    assert code == 1 and "divide" in err


def _write(path, rows):
    path.write_text("".join(json.dumps(r) + "\n" for r in rows))
    return path


def test_nms_empty(capsys, tmp_path):
    code, out, _ = run(capsys, "nms", _write(tmp_path / "d.jsonl", []))
    assert code == 0 and out == ""


def test_nms_duplicates(capsys, tmp_path):
    row = {"image": "a", "x": 100, "y": 100, "t": 1, "theta": 0.5, "score": 0.9}
    path = _write(tmp_path / "d.jsonl", [row, dict(row, score=0.8)])
    code, out, _ = run(capsys, "nms", path)
    assert [json.loads(line)["score"] for line in out.splitlines()] == [0.9]


def test_nms_opposite(capsys, tmp_path):
    row = {"image": "a", "x": 100, "y": 100, "t": 1, "theta": 0.0, "score": 0.9}
    path = _write(tmp_path / "d.jsonl", [row, dict(row, theta=math.pi, score=0.8)])
    code, out, _ = run(capsys, "nms", path)
    assert len(out.splitlines()) == 2


def test_nms_threshold_flags(capsys, tmp_path):
    row = {"image": "a", "x": 100, "y": 100, "t": 1, "theta": 0.0, "score": 0.9}
    path = _write(tmp_path / "d.jsonl", [row, dict(row, theta=math.pi / 2, score=0.8)])
    # DirIoU of the pair is 0.2
    assert len(run(capsys, "nms", path, "--dir-iou-thresh", "0.2")[1].splitlines()) == 1
    assert len(run(capsys, "nms", path, "--dir-iou-thresh", "0.3")[1].splitlines()) == 2
    assert len(run(capsys, "nms", path, "--score-thresh", "0.85")[1].splitlines()) == 1


def test_nms_missing_score(capsys, tmp_path):
    path = _write(tmp_path / "d.jsonl", [{"image": "a", "x": 1, "y": 1, "t": 2}])
    code, out, err = run(capsys, "nms", path)
    assert code == 1 and "line 1" in err


def test_missing_file_is_io_error(capsys, tmp_path):
    code, _, err = run(capsys, "nms", tmp_path / "nope.jsonl")
    assert code == 2 and "nope.jsonl" in err


def test_bad_threshold_flag(capsys, tmp_path):
    code, _, _ = run(capsys, "nms", "-", "--dir-iou-thresh", "1.5")
    assert code == 1


def test_eval_identity(capsys, tmp_path):
    gts = [{"image": "a", "x": 100, "y": 100, "t": 1, "theta": 1.0}, {"image": "a", "x": 300, "y": 300, "t": 2}]
    gt = _write(tmp_path / "gt.jsonl", gts)
    det = _write(tmp_path / "det.jsonl", [dict(g, score=1.0) for g in gts])
    out_json = tmp_path / "report.json"
    code, out, _ = run(capsys, "eval", gt, det, "--output", out_json)
    assert code == 0 and "mAP@30 100.000" in out
    doc = json.loads(out_json.read_text())
    assert doc["mAP"] == 100.0 and all(c["ap"] == 100.0 for c in doc["classes"])


def test_eval_empty_dets(capsys, tmp_path):
    gt = _write(tmp_path / "gt.jsonl", [{"image": "a", "x": 100, "y": 100, "t": 1, "theta": 1.0}])
    det = _write(tmp_path / "det.jsonl", [])
    out_json = tmp_path / "r.json"
    run(capsys, "eval", gt, det, "--output", out_json)
    doc = json.loads(out_json.read_text())
    assert all(c["recall"] == 0.0 for c in doc["classes"])


def test_gen_deterministic(capsys, tmp_path):
    args = ["gen", "--seed", "7", "--images", "2", "--angle-noise", "0.3", "--fp-rate", "0.2"]
    run(capsys, *args, "--output", tmp_path / "a")
    run(capsys, *args, "--output", tmp_path / "b")
    for name in ("gt.jsonl", "det.jsonl"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_gen_count_zero(capsys, tmp_path):
    code, _, _ = run(capsys, "gen", "--count", "0", "--output", tmp_path)
    assert code == 0
    assert (tmp_path / "gt.jsonl").read_text() == ""
    assert (tmp_path / "det.jsonl").read_text() == ""


def test_gen_fn_rate_one(capsys, tmp_path):
    run(capsys, "gen", "--fn-rate", "1", "--output", tmp_path)
    assert (tmp_path / "gt.jsonl").read_text() != ""
    assert (tmp_path / "det.jsonl").read_text() == ""


def test_gen_infeasible(capsys, tmp_path):
    code, _, err = run(capsys, "gen", "--count", "400", "--min-sep", "60", "--output", tmp_path)
    assert code == 1 and "separation" in err


def test_custom_classes(capsys, tmp_path):
    classes = tmp_path / "classes.json"
    classes.write_text(json.dumps([{"id": 1, "name": "ant", "w": 10, "h": 30, "directed": True}]))
    run(capsys, "gen", "--classes", classes, "--count", "5", "--output", tmp_path)
    code, out, _ = run(capsys, "eval", tmp_path / "gt.jsonl", tmp_path / "det.jsonl", "--classes", classes)
    assert code == 0 and "ant" in out and "mAP@30 100.000" in out
