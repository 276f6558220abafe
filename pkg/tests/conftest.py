import os
from pathlib import Path

import numpy as np
import pytest

ROOT = Path(__file__).resolve().parents[1]
SPAMBASE_CANDIDATES = [ROOT / "data" / "spambase.data", ROOT / "data" / "spambase.csv"]
# KEEL's redistribution of the same corpus (4597 of the 4601 records); used
# only when the UCI file is absent.
KEEL_STANDIN = ROOT / "data" / "spambase_keel.data"


def find_spambase():
    env = os.environ.get("QLATTACK_SPAMBASE")
    paths = ([Path(env)] if env else []) + SPAMBASE_CANDIDATES + [KEEL_STANDIN]
    for p in paths:
        if p.is_file():
            return p
    return None


def write_synthetic_spambase(path, n=400, seed=0):
    """Sparse, non-negative rows in spambase layout: 57 features then a label.

    Spam rows put weight on the first few word-frequency columns, so every
    model separates the classes easily.
    """
    rng = np.random.default_rng(seed)
    y = rng.integers(0, 2, n)
    X = rng.exponential(0.3, (n, 57)) * (rng.random((n, 57)) < 0.3)
    X[:, :6] += y[:, None] * rng.exponential(1.0, (n, 6))
    X[:, 55] = rng.integers(1, 200, n)
    X[:, 56] = rng.integers(1, 2000, n)
    with open(path, "w") as fh:
        for row, lab in zip(X, y):
            fh.write(",".join(f"{v:.3f}" for v in row[:55]) + ",")
            fh.write(f"{int(row[55])},{int(row[56])},{lab}\n")
    return path


@pytest.fixture(scope="session")
def synthetic_spambase(tmp_path_factory):
    return write_synthetic_spambase(tmp_path_factory.mktemp("data") / "synthetic.data")


ACCEPTANCE_RESULTS = {}


def record(criterion, ok, detail):
    ACCEPTANCE_RESULTS[criterion] = (bool(ok), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_RESULTS):
        ok, detail = ACCEPTANCE_RESULTS[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
