import csv
import io
import json
import subprocess
import sys

import pytest

from sues.cli import dispatch
from sues.graphs import LabeledGraph, labeling_perms, load_catalog


def run(argv, capsys):
    code = dispatch(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_bounds_csv(capsys):
    code, out, _ = run(["sues", "bounds", "--lambda", "2", "--levels", "10"], capsys)
    assert code == 0
    lines = out.splitlines()
    consts = dict(line[2:].split("=", 1) for line in lines if line.startswith("# "))
    assert consts["golden_point"] == "5" and consts["c_max"] == "63/8"
    rows = list(csv.DictReader(io.StringIO("\n".join(x for x in lines if not x.startswith("#")))))
    s = {int(r["n"]): int(r["s"]) for r in rows}
    assert [s[n] for n in (1, 2, 4, 8, 16, 32, 256)] == [1, 6, 16, 46, 126, 286, 3426]
    assert all(float(r["slack"]) > 0 for r in rows)


def test_bounds_json(capsys, tmp_path):
    out = tmp_path / "b.json"
    code, _, _ = run(["sues", "bounds", "--levels", "6", "--out", str(out)], capsys)
    assert code == 0
    assert json.loads(out.read_text())["passed"]


def test_malformed_flag_leaves_no_output(capsys, tmp_path):
    out = tmp_path / "r.json"
    code, _, err = run(["hunt", "sweep", "--d", "three", "--out", str(out)], capsys)
    assert code == 2 and "usage" in err
    assert not out.exists()
    code, _, _ = run(["hunt", "sweep", "--offsets", "5", "--out", str(out)], capsys)
    assert code == 2 and not out.exists()
    assert list(tmp_path.iterdir()) == []


def test_config_file_and_override(capsys, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# bounds run\nlambda = 3\nlevels = 4\nformat = json\n")
    code, out, _ = run(["sues", "bounds", "--config", str(cfg)], capsys)
    assert code == 0
    d = json.loads(out)
    assert d["params"] == {"lambda": 3, "max_level": 4, "schedule": "divides"}
    code, out, _ = run(["sues", "bounds", "--config", str(cfg), "--levels", "2"], capsys)
    assert json.loads(out)["params"]["max_level"] == 2


def test_config_unknown_key(capsys, tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("lambda=2\nflavour=strawberry\n")
    code, _, err = run(["sues", "bounds", "--config", str(cfg)], capsys)
    assert code == 2 and "flavour" in err


def test_config_supplies_required_flags(capsys, tmp_path, params):
    from sues.construction import SuesIndexer

    cfg = tmp_path / "at.cfg"
    cfg.write_text("t = 0 15 100\n")
    code, out, _ = run(["sues", "at", "--config", str(cfg)], capsys)
    assert code == 0
    ix = SuesIndexer(params)
    assert out.splitlines() == [f"{t} {ix.symbol_at(t)}" for t in (0, 15, 100)]


def test_ues_search_and_verify(capsys, tmp_path):
    seq = tmp_path / "u.txt"
    code, _, _ = run(["ues", "search", "--d", "3", "--n", "4", "--max-len", "6", "--out", str(seq)], capsys)
    assert code == 0
    code, out, _ = run(["ues", "verify", "--seq-file", str(seq), "--n", "4"], capsys)
    assert code == 0
    d = json.loads(out)
    assert d["is_ues"] and d["walks_checked"] == 1296 * 12
    (tmp_path / "short.txt").write_text("seq d=3 len=3\n0 1 0\n")
    code, out, _ = run(["ues", "verify", "--seq-file", str(tmp_path / "short.txt")], capsys)
    assert code == 1 and json.loads(out)["counterexample"] is not None


def test_ues_search_none_is_nonzero(capsys):
    code, out, _ = run(["ues", "search", "--max-len", "3"], capsys)
    assert code == 1 and "status=none" in out


def test_sues_build_stream_at_agree(capsys):
    _, built, _ = run(["sues", "build", "--n", "16"], capsys)
    body = built.split("\n", 1)[1].split()
    _, streamed, _ = run(["sues", "stream", "--count", str(len(body))], capsys)
    assert streamed.split("\n", 1)[1].split() == body
    _, at, _ = run(["sues", "at", "--t", "3", "40", "125"], capsys)
    assert [line.split()[1] for line in at.splitlines()] == [body[3], body[40], body[125]]


def test_sues_verify_reports(capsys, tmp_path):
    out = tmp_path / "c.json"
    code, msg, _ = run(["sues", "verify", "--property", "containment", "--k", "4", "--n", "256", "--out", str(out)], capsys)
    assert code == 0 and "pass" in msg
    assert json.loads(out.read_text())["failure_count"] == 0
    code, msg, _ = run(["sues", "verify", "--property", "containment", "--k", "4", "--n", "64", "--fault-injection"], capsys)
    assert code == 0 and "expected fail" in msg
    code, _, err = run(["sues", "verify", "--property", "containment", "--k", "4", "--n", "8"], capsys)
    assert code == 2 and "need n" in err
    code, _, _ = run(["sues", "verify", "--property", "window-ues", "--windows", "3"], capsys)
    assert code == 0


def test_hunt_run(capsys, tmp_path):
    g = LabeledGraph.from_adjacency(load_catalog(3, 4)[0], labeling_perms(321, 3, 4))
    gf = tmp_path / "g.txt"
    gf.write_text(g.to_text())
    code, out, _ = run(["hunt", "run", "--graph-file", str(gf), "--treasure", "2", "--start", "0:1", "--activations", "0,25"], capsys)
    d = json.loads(out)
    assert code == 0 and d["met"] and d["meeting_time"] <= d["bound_used"] == 667
    code, _, _ = run(["hunt", "run", "--graph-file", str(gf), "--treasure", "2", "--start", "0:7"], capsys)
    assert code == 2


def test_hunt_sweep_deterministic(capsys, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    args = ["hunt", "sweep", "--d", "3", "--n", "4", "--lambda", "2", "--offsets", "0:20"]
    assert run([*args, "--workers", "1", "--out", str(a)], capsys)[0] == 0
    assert run([*args, "--workers", "4", "--out", str(b)], capsys)[0] == 0
    assert a.read_bytes() == b.read_bytes()


def test_console_script(tmp_path):
    r = subprocess.run(
        [sys.executable, "-m", "sues", "sues", "bounds", "--levels", "3"],
        capture_output=True, text=True, check=False,
    )
    assert r.returncode == 0 and "level,n,s,ratio,slack" in r.stdout
    r = subprocess.run([sys.executable, "-m", "sues", "hunt", "sweep", "--bogus"], capture_output=True, text=True)
    assert r.returncode == 2


@pytest.mark.parametrize("argv", [["sues"], ["sues", "verify"], ["nope"]])
def test_usage_errors(capsys, argv):
    assert run(argv, capsys)[0] == 2
