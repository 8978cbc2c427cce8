import json
import subprocess
import sys

import numpy as np
import pytest

from sarstack import Window, read_pgm, train
from sarstack.classic import LeeParams, frost, lee
from sarstack.cli import main
from sarstack.image import RegionOfInterest
from sarstack.quality import assess
from sarstack.speckle import PhantomSpec, generate_phantom
from sarstack.stackfilter import iterate, read_filter

ROI = [[4, 4, 16, 16], {"x": 40, "y": 4, "w": 16, "h": 16}]


@pytest.fixture
def phantom(tmp_path):
    path = tmp_path / "ph.pgm"
    assert main(["simulate", "--size", "64", "--seed", "3", "--contrast", "10:2", "--out", str(path),
                 "--labels", str(tmp_path / "lab.pgm"), "--reference", str(tmp_path / "ref.pgm")]) == 0
    (tmp_path / "roi.json").write_text(json.dumps(ROI))
    return path


def error_of(capsys):
    return json.loads(capsys.readouterr().err.strip().splitlines()[-1])


def test_simulate_matches_library(phantom, tmp_path):
    ph = generate_phantom(PhantomSpec(64, 64, seed=3, contrast=(10, 2)))
    assert read_pgm(phantom) == ph.image
    assert np.array_equal(read_pgm(tmp_path / "lab.pgm").pixels, ph.labels)
    assert read_pgm(tmp_path / "ref.pgm") == ph.reference


def test_simulate_from_spec_document(tmp_path):
    doc = {"width": 20, "height": 10, "left": {"alpha": -3}, "right": {"alpha": -8},
           "contrast": "10:2", "seed": 9}
    (tmp_path / "spec.json").write_text(json.dumps(doc))
    assert main(["simulate", "--spec", str(tmp_path / "spec.json"), "--out", str(tmp_path / "a.pgm")]) == 0
    assert read_pgm(tmp_path / "a.pgm") == generate_phantom(PhantomSpec.from_dict(doc)).image


def test_train_apply_matches_library(phantom, tmp_path):
    filt, out = tmp_path / "f.stackf", tmp_path / "out.pgm"
    assert main(["train", "--in", str(phantom), "--roi", str(tmp_path / "roi.json"),
                 "--out", str(filt)]) == 0
    img = read_pgm(phantom)
    f = train(img, RegionOfInterest.from_json(ROI), "mean", Window(3, 3))
    assert read_filter(filt) == (f, 255)
    assert main(["apply", "--in", str(phantom), "--filter", str(filt), "--iters", "4",
                 "--out", str(out), "--dump-dir", str(tmp_path / "it"), "--dump-every", "2"]) == 0
    assert read_pgm(out) == iterate(img, f, 4)
    assert sorted(p.name for p in (tmp_path / "it").iterdir()) == ["iter_0002.pgm", "iter_0004.pgm"]
    assert read_pgm(tmp_path / "it" / "iter_0002.pgm") == iterate(img, f, 2)


def test_lee_frost_quality(phantom, tmp_path, capsys):
    img = read_pgm(phantom)
    assert main(["lee", "--in", str(phantom), "--out", str(tmp_path / "l.pgm"), "--window", "5x5",
                 "--looks", "2"]) == 0
    assert read_pgm(tmp_path / "l.pgm") == lee(img, LeeParams(Window(5, 5), 2))
    assert main(["frost", "--in", str(phantom), "--out", str(tmp_path / "f.pgm")]) == 0
    assert read_pgm(tmp_path / "f.pgm") == frost(img)
    capsys.readouterr()
    assert main(["quality", "--ref", str(tmp_path / "ref.pgm"), "--in", str(tmp_path / "l.pgm")]) == 0
    rep = assess(read_pgm(tmp_path / "ref.pgm"), read_pgm(tmp_path / "l.pgm"))
    assert capsys.readouterr().out.strip() == (
        f"Q={rep.q:.6f} beta={rep.beta:.6f} windows={rep.q_windows} skipped={rep.q_skipped}")


def test_gmlc_with_confusion(phantom, tmp_path, capsys):
    rois = [[[4, 4, 16, 16]], [[44, 4, 16, 16]]]
    (tmp_path / "cls.json").write_text(json.dumps(rois))
    (tmp_path / "eval.json").write_text(json.dumps([[4, 30, 56, 30]]))
    assert main(["gmlc", "--in", str(phantom), "--roi", str(tmp_path / "cls.json"),
                 "--out", str(tmp_path / "labels.pgm"), "--truth", str(tmp_path / "lab.pgm"),
                 "--eval-roi", str(tmp_path / "eval.json"), "--confusion", str(tmp_path / "cm.csv")]) == 0
    text = (tmp_path / "cm.csv").read_text()
    assert text.startswith("true\\assigned,0,1,total,percent_correct\n")
    assert text in capsys.readouterr().out
    assert set(np.unique(read_pgm(tmp_path / "labels.pgm").pixels)) <= {0, 1}


def test_mc_quality_outputs(tmp_path, capsys):
    cfg = {"contrasts": ["10:1"], "size": 32}
    (tmp_path / "cfg.json").write_text(json.dumps(cfg))
    out = tmp_path / "mc"
    assert main(["mc-quality", "--config", str(tmp_path / "cfg.json"), "--out-dir", str(out),
                 "--replications", "2", "--seed", "1", "--exemplars"]) == 0
    assert {p.name for p in out.iterdir()} == {"config.json", "quality_rows.csv",
                                                "quality_aggregate.csv", "exemplars"}
    saved = json.loads((out / "config.json").read_text())
    assert saved["replications"] == 2 and saved["seed"] == 1
    assert (out / "quality_aggregate.csv").read_text() in capsys.readouterr().out


def test_mc_classify_outputs(tmp_path, capsys):
    (tmp_path / "cfg.json").write_text(json.dumps({"size": 64, "iterations": [1, 2]}))
    assert main(["mc-classify", "--config", str(tmp_path / "cfg.json"),
                 "--out-dir", str(tmp_path / "o"), "--dump-maps"]) == 0
    out = capsys.readouterr().out
    assert "border offset after 2 stack iterations" in out
    assert (tmp_path / "o" / "classification.csv").exists()


def test_inspect_filter(tmp_path, capsys):
    (tmp_path / "maj.stackf").write_text("STACKF 1\nwindow 1 3\nlevels 255\ne8\n")
    assert main(["inspect-filter", "--filter", str(tmp_path / "maj.stackf")]) == 0
    out = capsys.readouterr().out.splitlines()
    assert "minimal terms 3" in out and "true patterns 4 of 8" in out
    assert sorted(line.strip() for line in out[-3:]) == ["011", "101", "110"]


def test_usage_error_exit_1(capsys):
    assert main(["frobnicate"]) == 1
    assert error_of(capsys)["error"] == "usage"
    assert main(["train", "--in", "x.pgm"]) == 1


def test_data_error_exit_2(tmp_path, capsys):
    assert main(["lee", "--in", str(tmp_path / "missing.pgm"), "--out", str(tmp_path / "o.pgm")]) == 2
    assert error_of(capsys)["exit"] == 2
    (tmp_path / "bad.pgm").write_bytes(b"P5\n4 4\n255\n\x00\x01")
    assert main(["frost", "--in", str(tmp_path / "bad.pgm"), "--out", str(tmp_path / "o.pgm")]) == 2
    err = error_of(capsys)
    assert err["error"] == "data" and "byte" in err["message"]


def test_bad_json_is_a_data_error(phantom, tmp_path, capsys):
    (tmp_path / "roi.json").write_text("{not json")
    assert main(["train", "--in", str(phantom), "--roi", str(tmp_path / "roi.json"),
                 "--out", str(tmp_path / "f")]) == 2


def test_non_monotone_filter_exit_3(phantom, tmp_path, capsys):
    (tmp_path / "bad.stackf").write_text("STACKF 1\nwindow 1 3\nlevels 255\ne9\n")
    assert main(["apply", "--in", str(phantom), "--filter", str(tmp_path / "bad.stackf"),
                 "--out", str(tmp_path / "o.pgm")]) == 3
    assert error_of(capsys)["error"] == "contract"


def test_console_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "sarstack.cli", "inspect-filter", "--filter",
                          str(tmp_path / "none")], capture_output=True, text=True)
    assert res.returncode == 2
