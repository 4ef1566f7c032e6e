import csv
import json
import os

import numpy as np
import pytest

from kneetex.cli import main
from kneetex.dataset import read_features_csv
from kneetex.imageio import read_image, write_pgm


def run(*args):
    return main([str(a) for a in args])


def data_rows(path):
    with open(path) as fh:
        return list(csv.reader(l for l in fh if not l.startswith("#")))


@pytest.fixture(scope="module")
def cohort(tmp_path_factory):
    root = tmp_path_factory.mktemp("cohort")
    assert run("synth", "--out", root / "c", "--n-case", 5, "--n-control", 5,
               "--effect", "H_F0=-0.1", "--effect", "E_T3=0.6", "--seed", 7,
               "--features", root / "fast.csv") == 0
    return root


@pytest.fixture(scope="module")
def features(cohort):
    out = cohort / "feat.csv"
    assert run("extract", cohort / "c", "--out", out) == 0
    return out


def test_synth_layout(cohort):
    c = cohort / "c"
    assert sorted(os.listdir(c)) == ["ground_truth.json", "images", "landmarks.json"]
    assert len(os.listdir(c / "images")) == 10
    truth = json.loads((c / "ground_truth.json").read_text())
    assert truth["informative_features"] == ["H_F0", "E_T3"]


def test_extract_matrix_shape(features):
    rows = data_rows(features)
    assert len(rows) == 11 and all(len(r) == 14 for r in rows)
    assert open(features).readline().startswith("# kneetex")


def test_fast_and_image_paths_agree(cohort, features):
    fast = read_features_csv(cohort / "fast.csv")
    full = read_features_csv(features)
    assert fast.subject_ids == full.subject_ids
    assert np.all(np.abs(fast.X[:, :6] - full.X[:, :6]) <= 0.1)


def test_extract_failure_is_isolated(cohort, tmp_path):
    lms = json.loads((cohort / "c" / "landmarks.json").read_text())
    for lm in lms:
        lm["image"] = str(cohort / "c" / lm["image"])
    # push one subject's plateau far outside its image
    lms[3]["medial_plateau"] = [5000.0, 5000.0]
    lms[3]["lateral_plateau"] = [5400.0, 5000.0]
    path = tmp_path / "landmarks.json"
    path.write_text(json.dumps(lms))
    out = tmp_path / "f.csv"
    assert run("extract", tmp_path, "--landmarks", path, "--out", out) == 0
    assert len(data_rows(out)) == 10
    fails = data_rows(str(out) + ".failures.csv")
    assert fails[0] == ["subject_id", "error"] and fails[1][0] == lms[3]["subject_id"]
    assert "outside" in fails[1][1]


def test_layout_24_rows(cohort, tmp_path):
    out = tmp_path / "layout.csv"
    svg = tmp_path / "layout.svg"
    assert run("layout", cohort / "c" / "landmarks.json", "--subject", "S0000", "--out", out,
               "--overlay", svg) == 0
    rows = data_rows(out)
    assert rows[0] == ["roi", "corner_index", "x", "y"] and len(rows) == 25
    assert svg.read_text().startswith("<svg")


def test_layout_golden_fixture(tmp_path):
    lm = {"subject_id": "G", "image": "g.pgm", "medial_plateau": [100, 200],
          "lateral_plateau": [300, 200], "medial_condyle_tip": [120, 180],
          "lateral_condyle_tip": [280, 180], "medial_condyle_extent": [0, 80],
          "lateral_condyle_extent": [80, 160], "pixel_spacing_mm": 0.075,
          "laterality": "L", "label": None}
    (tmp_path / "g.json").write_text(json.dumps(lm))
    out = tmp_path / "g.csv"
    assert run("layout", tmp_path / "g.json", "--out", out) == 0
    rows = {(r[0], int(r[1])): (float(r[2]), float(r[3])) for r in data_rows(out)[1:]}
    assert rows[("T0", 0)] == (130.0, 214.0) and rows[("T0", 2)] == (165.0, 246.0)
    assert rows[("T3", 0)] == (235.0, 214.0) and rows[("T3", 2)] == (270.0, 246.0)
    assert rows[("F0", 2)] == (177.5, 127.0)


def test_layout_right_knee_maps_back(tmp_path):
    lm = {"subject_id": "R", "image": "r.pgm", "medial_plateau": [299, 200],
          "lateral_plateau": [99, 200], "medial_condyle_tip": [279, 180],
          "lateral_condyle_tip": [119, 180], "medial_condyle_extent": [0, 80],
          "lateral_condyle_extent": [80, 160], "pixel_spacing_mm": 0.075,
          "laterality": "R", "label": None}
    write_pgm(tmp_path / "r.pgm", np.zeros((300, 400), dtype=np.uint16))
    (tmp_path / "r.json").write_text(json.dumps(lm))
    out = tmp_path / "r.csv"
    assert run("layout", tmp_path / "r.json", "--out", out) == 0
    rows = {(r[0], int(r[1])): (float(r[2]), float(r[3])) for r in data_rows(out)[1:]}
    # mirror image of the left-knee golden T0 box: x in [399-165, 399-130]
    xs = sorted(rows[("T0", k)][0] for k in range(4))
    assert xs == [234.0, 234.0, 269.0, 269.0]


def test_missing_key_exit_1(tmp_path, capsys):
    (tmp_path / "bad.json").write_text(json.dumps({"subject_id": "B1", "image": "x.pgm"}))
    assert run("layout", tmp_path / "bad.json", "--out", tmp_path / "o.csv") == 1
    err = capsys.readouterr().err
    assert "B1" in err and "medial_plateau" in err


def test_screen(features, tmp_path):
    out, grid = tmp_path / "s.csv", tmp_path / "g.txt"
    assert run("screen", features, "--out", out, "--grid", grid) == 0
    rows = data_rows(out)
    assert rows[0] == ["feature", "t", "df", "p", "normality_p", "normal_at_0.05"]
    assert [r[0] for r in rows[1:]][:2] == ["H_F0", "H_F1"] and len(rows) == 13
    assert "F0" in grid.read_text()


def test_search_resume_and_threads(features, tmp_path):
    common = ["--repeats", 2, "--seed", 3]
    full, a, b = tmp_path / "full.csv", tmp_path / "a.csv", tmp_path / "b.csv"
    assert run("search", features, "--out", full, "--threads", 1, *common) == 0
    assert run("search", features, "--out", a, "--mask-to", "3ff", "--threads", 4, *common) == 0
    assert run("search", features, "--out", b, "--mask-from", "400", *common) == 0
    rows = data_rows(full)
    assert rows[0] == ["mask_hex", "n", "features", "mean_auc", "std_auc"]
    assert len(rows) == 4096
    assert rows[1:] == data_rows(a)[1:] + data_rows(b)[1:]
    best = tmp_path / "best.csv"
    assert run("best-per-n", a, b, "--out", best) == 0
    brows = data_rows(best)
    assert brows[0] == ["n", "mask_hex", "features", "mean_auc"] and len(brows) == 13
    assert brows[-1][1] == "fff"
    assert run("best-per-n", a, "--out", best) == 1


def test_search_header_records_config(features, tmp_path):
    out = tmp_path / "s.csv"
    assert run("search", features, "--out", out, "--mask-to", "3", "--repeats", 2,
               "--seed", 99) == 0
    head = [l for l in open(out) if l.startswith("#")]
    assert "# seed: 99\n" in head and "# repeats: 2\n" in head
    assert not any("time" in l for l in head)


def test_roc_project_pairs(features, tmp_path):
    roc = tmp_path / "roc.csv"
    assert run("roc", features, "--mask", "H_F0+E_T3", "--repeats", 1, "--out", roc) == 0
    pts = [(float(a), float(b)) for a, b in data_rows(roc)[1:]]
    assert pts[0] == (0.0, 0.0) and pts[-1] == (1.0, 1.0)
    rep = tmp_path / "cv.csv"
    assert run("roc", features, "--mask", "801", "--repeats", 3, "--seed", 5, "--out", roc,
               "--cv-report", rep) == 0
    head, row = data_rows(rep)
    assert head == ["mask", "features", "mean_auc", "std_auc", "repeats", "folds", "C", "seed"]
    assert row[:2] == ["801", "H_F0+E_T3"] and row[4:] == ["3", "5", "1.0", "5"]

    proj, model = tmp_path / "p.csv", tmp_path / "m.json"
    assert run("project", features, "--mask", "801", "--out", proj, "--model-out", model) == 0
    assert data_rows(proj)[0] == ["subject_id", "label", "x", "y"]
    assert any(l.startswith("# hyperplane_x:") for l in open(proj))
    assert set(json.loads(model.read_text())) == {"features", "weights", "bias", "C",
                                                  "means", "stds"}

    pairs = tmp_path / "pairs"
    assert run("pairs", features, "--mask", "H_F0+H_T0+E_F0+E_T2+E_T3", "--out", pairs) == 0
    assert len(os.listdir(pairs)) == 10


def test_synth_png(tmp_path):
    assert run("synth", "--out", tmp_path / "p", "--n-case", 1, "--n-control", 1,
               "--format", "png", "--seed", 1) == 0
    img = read_image(tmp_path / "p" / "images" / "S0000.png")
    assert img.dtype == np.uint16 and img.max() <= 16383


def test_bench(tmp_path):
    out = tmp_path / "b.csv"
    assert run("bench", "--sizes", "64", "--bench-repeats", 1, "--out", out) == 0
    rows = data_rows(out)
    assert rows[0] == ["size", "descriptor", "seconds_per_patch"]
    assert {r[1] for r in rows[1:]} == {"entropy", "hurst"}


def test_exit_codes(tmp_path, features):
    assert run("screen", tmp_path / "missing.csv") == 1
    assert run("nonsense") == 1
    assert run("roc", features, "--mask", "H_Q9") == 1
    (tmp_path / "bad.csv").write_text("subject_id,label\n")
    assert run("screen", tmp_path / "bad.csv") == 1


def test_outputs_reproducible(features, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for out in (a, b):
        assert run("search", features, "--mask-to", "40", "--repeats", 2, "--out", out) == 0
    assert a.read_bytes() == b.read_bytes()


def test_internal_error_exit_2(monkeypatch, features):
    import kneetex.cli as cli

    def boom(*a, **k):
        raise RuntimeError("unexpected")
    monkeypatch.setattr(cli, "screen_features", boom)
    assert run("screen", features) == 2
