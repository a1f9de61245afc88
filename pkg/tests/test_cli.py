import json
import os
import subprocess
import sys

import pytest

from axbench import synthdata as sd
from axbench.harness import cli


def run_cli(*argv):
    return cli.main(list(argv))


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """Small dataset + oracles shared by the CLI tests."""
    root = tmp_path_factory.mktemp("cli")
    ds = root / "d.cfds"
    assert run_cli("generate", "--scm", "unconfounded", "--n", "400",
                   "--seed", "7", "--out", str(ds), "--csv", str(root / "d.csv")) == 0
    assert run_cli("train-oracle", "--dataset", str(ds), "--parent", "digit",
                   "--epochs", "4", "--out", str(root / "digit.json")) == 0
    assert run_cli("train-oracle", "--dataset", str(ds), "--parent", "hue",
                   "--out", str(root / "hue.json")) == 0
    return root


def test_generate_writes_magic(workspace):
    with open(workspace / "d.cfds", "rb") as f:
        assert f.read(6) == b"CFDS1\n"
    header = (workspace / "d.csv").read_text().splitlines()[0]
    assert header == "digit,hue"


def test_generate_matches_library(workspace):
    loaded = sd.load_cfds(workspace / "d.cfds")
    direct = sd.sample_dataset(sd.Unconfounded(), 400, seed=7)
    assert loaded.pixels.tobytes() == direct.pixels.tobytes()


def test_evaluate_deterministic_byte_identical(workspace):
    args = ["evaluate", "--model", "identity", "--dataset", str(workspace / "d.cfds"),
            "--oracle", f"digit={workspace / 'digit.json'}",
            "--oracle", f"hue={workspace / 'hue.json'}",
            "--m", "2", "--n-samples", "30", "--seeds", "0,1"]
    out1 = workspace / "r1.json"
    out2 = workspace / "r2.json"
    assert run_cli(*args, "--out", str(out1), "--csv", str(workspace / "r1.csv"),
                   "--markdown", str(workspace / "r1.md")) == 0
    assert run_cli(*args, "--out", str(out2)) == 0
    assert out1.read_bytes() == out2.read_bytes()


def test_markdown_contains_identity_zero(workspace):
    text = (workspace / "r1.md").read_text()
    assert "0.00" in text
    assert "| identity |" in text


def test_csv_row_count(workspace):
    lines = (workspace / "r1.csv").read_text().strip().splitlines()
    assert len(lines) == 1 + 30 * 2  # header + n_samples * seeds


def test_json_reaggregates_to_markdown_means(workspace):
    doc = json.loads((workspace / "r1.json").read_text())
    md = (workspace / "r1.md").read_text()
    for target, block in doc["metrics"]["effectiveness"].items():
        assert f"{block['mean']:.2f} ({block['std']:.2f})" in md


def test_report_subcommand_round_trip(workspace):
    out = workspace / "again.md"
    assert run_cli("report", "--in", str(workspace / "r1.json"),
                   "--markdown", str(out)) == 0
    assert out.read_text() == (workspace / "r1.md").read_text()


def test_intervene_subcommand(workspace):
    out = workspace / "iv.cfds"
    support = workspace / "iv.json"
    assert run_cli("intervene", "--dataset", str(workspace / "d.cfds"),
                   "--targets", "hue", "--bins", "5", "--seed", "3",
                   "--out", str(out), "--support-json", str(support)) == 0
    doc = json.loads(support.read_text())
    assert doc["hue"]["full_support"] is True
    assert len(sd.load_cfds(out)) == 400


def test_tiles_export(workspace):
    prefix = workspace / "tiles"
    assert run_cli("evaluate", "--model", "ground-truth",
                   "--dataset", str(workspace / "d.cfds"),
                   "--oracle", f"digit={workspace / 'digit.json'}",
                   "--m", "2", "--n-samples", "5", "--seeds", "0",
                   "--targets", "digit",
                   "--out", str(workspace / "gt.json"),
                   "--tiles", str(prefix)) == 0
    for label in ("composition", "effectiveness", "reversibility"):
        path = workspace / f"tiles_{label}.png"
        assert path.exists()
        assert path.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_usage_errors_exit_1(workspace, capsys):
    assert run_cli("evaluate", "--model", "identity") == 1           # missing args
    assert run_cli("frobnicate") == 1                                # bad subcommand
    assert run_cli("generate", "--scm", "nope", "--n", "1", "--out", "x") == 1
    assert run_cli("evaluate", "--model", "identity",
                   "--dataset", str(workspace / "d.cfds"),
                   "--oracle", "digit") == 1                         # bad PARENT=PATH
    err = capsys.readouterr().err
    assert "usage" in err.lower()


def test_runtime_errors_exit_2(workspace, capsys):
    assert run_cli("evaluate", "--model", "identity",
                   "--dataset", "/nonexistent.cfds",
                   "--oracle", f"digit={workspace / 'digit.json'}") == 2
    assert run_cli("generate", "--scm", "unconfounded", "--n", "10",
                   "--out", "/nonexistent-dir/x.cfds") == 2
    assert "error" in capsys.readouterr().err.lower()


def test_seed_env_default(tmp_path, monkeypatch):
    monkeypatch.setenv("AXBENCH_SEED", "99")
    a = tmp_path / "a.cfds"
    b = tmp_path / "b.cfds"
    assert run_cli("generate", "--scm", "unconfounded", "--n", "20", "--out", str(a)) == 0
    assert run_cli("generate", "--scm", "unconfounded", "--n", "20",
                   "--seed", "99", "--out", str(b)) == 0
    assert a.read_bytes() == b.read_bytes()


def test_shapes_generate(tmp_path):
    out = tmp_path / "shapes.cfds"
    assert run_cli("generate", "--scm", "shapes", "--n", "30", "--seed", "2",
                   "--out", str(out)) == 0
    ds = sd.load_cfds(out)
    assert ds.shape == (64, 64, 3)
    assert len(ds.space) == 4


def test_cli_subprocess_entry():
    proc = subprocess.run([sys.executable, "-m", "axbench", "--help"],
                          capture_output=True, text=True, timeout=60)
    assert proc.returncode == 0
    for sub in ("generate", "intervene", "train-oracle", "evaluate", "report",
                "serve-zoo"):
        assert sub in proc.stdout
