import csv
import subprocess
import sys

import pytest

from levelset.cli import DEFAULTS, ConfigError, load_config, main

FAST_BPDN = """\
n = 64
m = 24
spike_frac = 0.05
norms = ["l1", "l0"]
eta_init = 0.1
eta_floor = 1e-3
inner_iters = 50
"""


def read_rows(path, drop=("seconds",)):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [{k: v for k, v in r.items() if k not in drop} for r in rows]


def test_defaults_cover_every_command():
    assert set(DEFAULTS) == {"bpdn", "convergence", "lowrank", "image"}
    assert DEFAULTS["bpdn"]["norms"] == ["l2", "l1", "linf", "l0"]


def test_unknown_key_is_rejected(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text("bogus = 1\n")
    with pytest.raises(ConfigError, match="bogus"):
        load_config(cfg, "bpdn")
    assert main(["bpdn", "--config", str(cfg), "--out-dir", str(tmp_path)]) == 1


def test_missing_and_malformed_config(tmp_path, capsys):
    assert main(["lowrank", "--config", str(tmp_path / "none.toml")]) == 1
    bad = tmp_path / "bad.toml"
    bad.write_text("n = = 3\n")
    assert main(["lowrank", "--config", str(bad)]) == 1
    assert "bad config" in capsys.readouterr().err


def test_bpdn_outputs_and_echo_roundtrip(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text(FAST_BPDN)
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["bpdn", "--config", str(cfg), "--seed", "2", "--out-dir", str(a)]) == 0
    assert (a / "trace_alg3-acc-l1.csv").exists() and (a / "trace_alg3-acc-l0.csv").exists()
    echo = (a / "config_echo.txt").read_text()
    assert "seed = 2" in echo and "outlier_magnitude = \"none\"" in echo
    # the echo is itself a valid config reproducing the run
    assert main(["bpdn", "--config", str(a / "config_echo.txt"), "--out-dir", str(b)]) == 0
    assert read_rows(a / "report.csv") == read_rows(b / "report.csv")


def test_failed_rows_give_exit_two(tmp_path, capsys):
    cfg = tmp_path / "c.toml"
    cfg.write_text(FAST_BPDN.replace('["l1", "l0"]', '["l2"]') + "sigma_policy = -1.0\n")
    assert main(["bpdn", "--config", str(cfg), "--out-dir", str(tmp_path)]) == 2
    assert "failed" in capsys.readouterr().err
    assert read_rows(tmp_path / "report.csv")[0]["status"].startswith("error")


def test_bad_values_give_exit_one(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text('norms = ["l7"]\n')
    assert main(["lowrank", "--config", str(cfg), "--out-dir", str(tmp_path)]) == 1
    cfg.write_text('sigma_policy = "loose"\n')
    assert main(["bpdn", "--config", str(cfg), "--out-dir", str(tmp_path)]) == 1


def test_convergence_outputs(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text("n = 64\nm = 24\niters = 5\ncg_budgets = [2]\n")
    assert main(["convergence", "--config", str(cfg), "--out-dir", str(tmp_path)]) == 0
    rows = read_rows(tmp_path / "report.csv")
    assert [r["method"] for r in rows] == ["alg1", "alg3", "alg2-cg2"]
    assert float(rows[1]["ratio_to_alg3"]) == 1.0
    assert (tmp_path / "decay.csv").exists()


def test_lowrank_and_image_run(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text('n = 12\nm = 12\ntrue_rank = 2\nk = 3\nmax_iters = 60\nnorms = ["l1"]\n')
    assert main(["lowrank", "--config", str(cfg), "--out-dir", str(tmp_path / "lr")]) == 0
    assert read_rows(tmp_path / "lr" / "report.csv")[0]["method"] == "alg4-l1"
    cfg.write_text('rows = 8\ncols = 8\nnorms = ["l2"]\n')
    assert main(["image", "--config", str(cfg), "--out-dir", str(tmp_path / "im")]) == 0


def test_module_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "levelset", "--help"], capture_output=True, text=True)
    assert out.returncode == 0
    for cmd in ("bpdn", "convergence", "lowrank"):
        assert cmd in out.stdout
