import subprocess
import sys

import pytest


def axbench(*args, timeout=600):
    proc = subprocess.run([sys.executable, "-m", "axbench", *map(str, args)],
                          capture_output=True, text=True, timeout=timeout)
    if proc.returncode != 0:
        raise RuntimeError(f"axbench {' '.join(map(str, args))} failed:\n"
                           f"{proc.stdout}\n{proc.stderr}")
    return proc.stdout


@pytest.fixture(scope="session")
def workspace(tmp_path_factory):
    """CFDS datasets and pseudo-oracles produced by the primary CLI."""
    root = tmp_path_factory.mktemp("adapter")
    axbench("generate", "--scm", "unconfounded", "--n", 6000, "--seed", 901,
            "--out", root / "train.cfds")
    axbench("generate", "--scm", "unconfounded", "--n", 2000, "--seed", 902,
            "--out", root / "test.cfds")
    axbench("generate", "--scm", "unconfounded", "--n", 12000, "--seed", 101,
            "--out", root / "otrain.cfds")
    axbench("train-oracle", "--dataset", root / "otrain.cfds",
            "--parent", "digit", "--out", root / "digit.json")
    axbench("train-oracle", "--dataset", root / "otrain.cfds",
            "--parent", "hue", "--out", root / "hue.json")
    return root
