import csv
import json

import numpy as np
import pytest

from mlgcn.cli import main
from mlgcn.dataset import read_manifest

CFG = {"train": {"epochs": 2, "conv_filters": [4]}, "data": {"synthetic": {"n_graphs": 16}}}


@pytest.fixture
def cfg_path(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(CFG))
    return p


@pytest.fixture
def raw_dir(tmp_path):
    rng = np.random.default_rng(0)
    root = tmp_path / "raw"
    for cls in ("punch", "hug"):
        (root / cls).mkdir(parents=True)
        for i in range(2):
            rows = [[t] + list(np.round(rng.random(90), 4)) for t in range(10)]
            (root / cls / f"s{i}.txt").write_text("\n".join(",".join(map(str, r)) for r in rows) + "\n")
    return root


def _error(capsys):
    return json.loads(capsys.readouterr().err.strip().splitlines()[-1])


def test_ingest(tmp_path, raw_dir):
    out = tmp_path / "ing"
    assert main(["ingest", str(raw_dir), "--out", str(out), "--class-component", "0"]) == 0
    rows = read_manifest(out / "manifest.csv")
    assert len(rows) == 4
    assert {r["class"] for r in rows} == {"punch", "hug"}
    assert all(r["n_nodes"] == "30" for r in rows)
    assert (out / rows[0]["graph_file"]).exists()


def test_ingest_bad_row_cleans_up(tmp_path, raw_dir, capsys):
    with (raw_dir / "hug" / "s1.txt").open("a") as fh:
        fh.write("10,1,2\n")
    out = tmp_path / "ing"
    assert main(["ingest", str(raw_dir), "--out", str(out)]) == 2
    assert "s1.txt:11" in _error(capsys)["message"]
    assert not out.exists()


def test_train_eval(tmp_path, cfg_path):
    out = tmp_path / "run"
    assert main(["train", "--config", str(cfg_path), "--out", str(out), "--seed", "3"]) == 0
    assert {p.name for p in out.iterdir()} == {"config.json", "metrics.jsonl", "checkpoint.npz"}
    effective = json.loads((out / "config.json").read_text())
    assert effective["train"]["seed"] == 3 and effective["output"] == str(out)
    last = json.loads((out / "metrics.jsonl").read_text().splitlines()[-1])

    ev = tmp_path / "ev"
    assert main(["eval", str(out / "checkpoint.npz"), "--out", str(ev), "--split", "train"]) == 0
    report = json.loads((ev / "eval_report.json").read_text())
    assert report["accuracy"] == pytest.approx(last["train_acc"], abs=1e-9)
    with (ev / "confusion.csv").open() as fh:
        grid = list(csv.reader(fh))
    assert grid[0] == ["true\\pred", "0", "1"]
    assert sum(int(x) for row in grid[1:] for x in row[1:]) == report["graphs"]


def test_train_is_reproducible(tmp_path, cfg_path):
    for name in ("a", "b"):
        assert main(["train", "--config", str(cfg_path), "--out", str(tmp_path / name)]) == 0
    for f in ("metrics.jsonl", "checkpoint.npz"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_pooling_sweep(tmp_path, cfg_path):
    out = tmp_path / "sweep"
    assert main(["train", "--config", str(cfg_path), "--out", str(out), "--pooling", "sweep"]) == 0
    assert len(list(out.glob("*/metrics.jsonl"))) == 5
    assert len((out / "sweep_summary.csv").read_text().splitlines()) == 6


def test_missing_config(tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["train", "--config", str(tmp_path / "nope.json"), "--out", str(out)]) == 1
    record = _error(capsys)
    assert record["error"] == "UsageError"
    assert json.loads((out / "error.json").read_text()) == record


def test_eval_empty_dataset(tmp_path, cfg_path, capsys):
    out = tmp_path / "run"
    main(["train", "--config", str(cfg_path), "--out", str(out)])
    (tmp_path / "empty.csv").write_text("graph_file,class\n")
    code = main(["eval", str(out / "checkpoint.npz"), "--manifest", str(tmp_path / "empty.csv"),
                 "--out", str(tmp_path / "ev")])
    assert code == 2
    assert _error(capsys)["error"] == "DataError"


def test_gradcheck_command(tmp_path):
    assert main(["gradcheck", "--out", str(tmp_path)]) == 0
    rows = list(csv.DictReader((tmp_path / "gradcheck.csv").open()))
    assert {r["status"] for r in rows} == {"pass"}


def test_certify(tmp_path):
    (tmp_path / "p.graph").write_text("3 1 1\n1 0\n1 1\n1 2\n0 1\n1 2\n")
    menu = [{"family": "unnormalized"}, {"family": "random_walk"}]
    (tmp_path / "menu.json").write_text(json.dumps(menu))
    assert main(["certify", str(tmp_path / "p.graph"), "--menu", str(tmp_path / "menu.json"),
                 "--out", str(tmp_path)]) == 0
    rows = list(csv.DictReader((tmp_path / "cpd_report.csv").open()))
    assert [(r["family"], r["is_cpd"]) for r in rows] == [("unnormalized", "true"), ("random_walk", "false")]
    assert (tmp_path / "cpd_summary.csv").exists()


def test_certify_empty_menu(tmp_path, capsys):
    (tmp_path / "p.graph").write_text("2 1 1\n1 0\n1 1\n0 1\n")
    (tmp_path / "menu.json").write_text("[]")
    assert main(["certify", str(tmp_path / "p.graph"), "--menu", str(tmp_path / "menu.json")]) == 1
    assert "empty" in _error(capsys)["message"]


def test_bad_usage():
    assert main(["frobnicate"]) == 1
