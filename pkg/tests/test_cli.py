import json
import subprocess
import sys


def run_cli(*args, cwd=None):
    return subprocess.run(
        [sys.executable, "-m", "fscil", *args],
        capture_output=True, text=True, cwd=cwd,
    )


def make_stores(tmp_path, extra=()):
    res = run_cli(
        "-q", "synth",
        "--num-classes", "8", "--dim", "8", "--train-per-class", "30",
        "--test-per-class", "10", "--clusters", "4", "--seed", "0",
        "--train-out", str(tmp_path / "train.fscf"),
        "--test-out", str(tmp_path / "test.fscf"),
        *extra,
    )
    assert res.returncode == 0, res.stderr
    return tmp_path / "train.fscf", tmp_path / "test.fscf"


def base_config(tmp_path, train, test, method="ncm"):
    cfg = {
        "train_store": str(train),
        "test_store": str(test),
        "protocol": {"mode": "big_start", "base_class_count": 4, "num_tasks": 3,
                     "shots": 5, "seed": 0},
        "method": {"name": method, "proj_dim": 64},
    }
    path = tmp_path / "run.json"
    path.write_text(json.dumps(cfg))
    return path


def test_synth_and_inspect(tmp_path):
    train, test = make_stores(tmp_path)
    assert train.exists() and test.exists()
    res = run_cli("-q", "inspect", str(train))
    assert res.returncode == 0
    assert "n=240" in res.stdout and "d=8" in res.stdout and "classes=8" in res.stdout


def test_run_writes_report(tmp_path):
    train, test = make_stores(tmp_path)
    cfg = base_config(tmp_path, train, test)
    out = tmp_path / "report.json"
    res = run_cli("-q", "run", "--config", str(cfg), "--out", str(out))
    assert res.returncode == 0, res.stderr
    doc = json.loads(out.read_text())
    assert doc["method"] == "ncm"
    assert len(doc["per_task"]) == 3


def test_run_is_byte_deterministic(tmp_path):
    train, test = make_stores(tmp_path)
    cfg = base_config(tmp_path, train, test, method="cranpac")
    out1, out2 = tmp_path / "r1.json", tmp_path / "r2.json"
    assert run_cli("-q", "run", "--config", str(cfg), "--out", str(out1)).returncode == 0
    assert run_cli("-q", "run", "--config", str(cfg), "--out", str(out2)).returncode == 0
    assert out1.read_bytes() == out2.read_bytes()


def test_method_override(tmp_path):
    train, test = make_stores(tmp_path)
    cfg = base_config(tmp_path, train, test, method="ncm")
    out = tmp_path / "teen.json"
    res = run_cli("-q", "run", "--config", str(cfg), "--method", "teen",
                  "--out", str(out))
    assert res.returncode == 0, res.stderr
    assert json.loads(out.read_text())["method"] == "teen"


def test_suite_prints_comparison(tmp_path):
    train, test = make_stores(tmp_path)
    cfg = base_config(tmp_path, train, test)
    out = tmp_path / "suite.json"
    res = run_cli("-q", "run", "--config", str(cfg), "--suite", "--out", str(out))
    assert res.returncode == 0, res.stderr
    header = res.stdout.strip().splitlines()[0]
    assert header.startswith("method,")
    assert (tmp_path / "suite-ncm.json").exists()
    assert (tmp_path / "suite-cranpac.json").exists()


def test_report_command_merges(tmp_path):
    train, test = make_stores(tmp_path)
    cfg = base_config(tmp_path, train, test)
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    run_cli("-q", "run", "--config", str(cfg), "--out", str(a))
    run_cli("-q", "run", "--config", str(cfg), "--method", "teen", "--out", str(b))
    res = run_cli("-q", "report", str(a), str(b))
    assert res.returncode == 0, res.stderr
    lines = res.stdout.strip().splitlines()
    assert len(lines) == 3
    assert lines[1].startswith("ncm,") and lines[2].startswith("teen,")


def test_errors_are_one_line_and_exit_1(tmp_path):
    res = run_cli("-q", "inspect", str(tmp_path / "missing.fscf"))
    assert res.returncode == 1
    assert res.stdout == ""
    line = res.stderr.strip().splitlines()[-1]
    assert line.startswith("error: ")

    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"train_store": "x", "unknown_key": 1}))
    res = run_cli("-q", "run", "--config", str(bad))
    assert res.returncode == 1
    assert "unknown_key" in res.stderr


def test_corrupt_store_is_reported_not_crashed(tmp_path):
    p = tmp_path / "junk.fscf"
    p.write_bytes(b"NOPE" + b"\x00" * 64)
    res = run_cli("-q", "inspect", str(p))
    assert res.returncode == 1
    assert "error: BadMagicError" in res.stderr
    assert "Traceback" not in res.stderr
