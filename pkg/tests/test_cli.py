import json
import shutil
import subprocess
import sys

import pytest

from conftest import make_dataset
from rashomon_audit.cli import main
from rashomon_audit.data import load_csv, write_csv


@pytest.fixture
def toy_csv(tmp_path):
    write_csv(make_dataset(100, 20, p=3, seed=1), tmp_path / "toy.csv")
    return tmp_path / "toy.csv"


def test_usage_errors_exit_one(capsys):
    assert main([]) == 1
    assert main(["balance"]) == 1
    assert main(["no-such-command"]) == 1
    assert "usage:" in capsys.readouterr().err


def test_bad_choice_exit_one(toy_csv):
    assert main(["balance", str(toy_csv), "--method", "adasyn", "--out", "x.csv"]) == 1


def test_version(capsys):
    with pytest.raises(SystemExit) as info:
        main(["--version"])
    assert info.value.code == 0
    assert "rashomon-audit" in capsys.readouterr().out


def test_missing_config_exit_two(capsys, tmp_path):
    missing = tmp_path / "missing.json"
    assert main(["experiment", str(missing)]) == 2
    assert "missing.json" in capsys.readouterr().err


def test_invalid_config_lists_fields(capsys, tmp_path):
    (tmp_path / "c.json").write_text(json.dumps({"datasets": [{"bundled": "abalone"}], "seed": 0,
                                                 "epsilon": -0.1, "ratios": [1, 1.1, 0.8]}))
    assert main(["experiment", str(tmp_path / "c.json")]) == 2
    err = capsys.readouterr().err
    assert "epsilon" in err and "ratios[2]" in err


def test_missing_csv_exit_two(capsys, tmp_path):
    assert main(["inspect", str(tmp_path / "nope.csv")]) == 2
    assert "nope.csv" in capsys.readouterr().err


def test_non_binary_target_exit_two(tmp_path):
    (tmp_path / "t.csv").write_text("a,class\n1,0\n2,1\n3,2\n")
    assert main(["inspect", str(tmp_path / "t.csv")]) == 2


def test_inspect_bundled(capsys):
    assert main(["inspect", "yeast_me2"]) == 0
    out = capsys.readouterr().out
    assert "n=1484 p=8 ratio 28.10" in out
    assert "manifest check: PASS" in out


def test_inspect_strict_mismatch(tmp_path, capsys):
    # a file named like a manifest entry but with different contents
    write_csv(make_dataset(100, 20, p=3), tmp_path / "abalone.csv")
    assert main(["inspect", str(tmp_path / "abalone.csv")]) == 0
    assert main(["inspect", str(tmp_path / "abalone.csv"), "--strict"]) == 2
    assert "MISMATCH" in capsys.readouterr().out


def test_balance_smote(toy_csv, tmp_path, capsys):
    out = tmp_path / "bal.csv"
    assert main(["balance", str(toy_csv), "--method", "smote", "--ratio", "1.0", "--seed", "0",
                 "--out", str(out)]) == 0
    d = load_csv(out, "class")
    assert d.n_samples == 200
    assert int(d.labels.sum()) == 100
    assert "200 rows" in capsys.readouterr().out


def test_balance_warns_when_already_balanced(tmp_path, capsys):
    write_csv(make_dataset(50, 45, p=2), tmp_path / "b.csv")
    assert main(["balance", str(tmp_path / "b.csv"), "--method", "random_undersample", "--ratio", "1.25",
                 "--out", str(tmp_path / "o.csv")]) == 0
    assert "warning" in capsys.readouterr().err
    assert load_csv(tmp_path / "o.csv", "class").n_samples == 95


def test_pool_then_metrics(toy_csv, tmp_path, capsys):
    pool = tmp_path / "pool.json"
    assert main(["pool", str(toy_csv), "--budget", "4", "--seed", "3", "--out", str(pool)]) == 0
    side = json.loads((tmp_path / "pool.sidecar.json").read_text())
    assert side["seed"] == 3 and len(side["losses"]) == 4
    capsys.readouterr()
    assert main(["metrics", str(pool)]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["reference_id"] == side["reference_id"]
    assert report["member_ids"] == side["member_ids"]
    assert 0 <= report["discrepancy"] <= report["ambiguity"] <= 1
    assert report["set_size"] == len(side["member_ids"])


def test_metrics_without_data_is_usage_error(tmp_path, toy_csv):
    pool = tmp_path / "pool.json"
    assert main(["pool", str(toy_csv), "--budget", "2", "--out", str(pool)]) == 0
    (tmp_path / "pool.sidecar.json").unlink()
    assert main(["metrics", str(pool)]) == 1


def test_experiment_and_plot(toy_csv, tmp_path, capsys):
    cfg = {"datasets": [{"path": "toy.csv"}], "seed": 1, "budget": 3, "repeats": 1,
           "methods": ["random_oversample", "near_miss"], "ratios": [1.0, 1.2],
           "importance_repeats": 1, "space": {"n_trees": [5, 8]}, "output_dir": "out"}
    (tmp_path / "c.json").write_text(json.dumps(cfg))
    assert main(["experiment", str(tmp_path / "c.json"), "--workers", "1"]) == 0
    assert "5 cells, 0 skipped" in capsys.readouterr().out
    results = tmp_path / "out" / "results.csv"
    assert results.exists() and (tmp_path / "out" / "zone.svg").exists()
    assert main(["plot", str(results), "--out-dir", str(tmp_path / "again"), "--stats"]) == 0
    assert (tmp_path / "again" / "stats.csv").read_bytes() == (tmp_path / "out" / "stats.csv").read_bytes()
    assert (tmp_path / "again" / "zone.svg").read_bytes() == (tmp_path / "out" / "zone.svg").read_bytes()


@pytest.mark.skipif(shutil.which("rashomon-audit") is None, reason="console script not installed")
def test_console_script():
    r = subprocess.run(["rashomon-audit", "inspect", "abalone_19"], capture_output=True, text=True)
    assert r.returncode == 0 and "ratio 129.53" in r.stdout


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "rashomon_audit.cli"], capture_output=True, text=True)
    assert r.returncode == 1
