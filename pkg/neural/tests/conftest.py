"""Shared-dataset fixtures for the acceptance tests.

The shared synthetic dataset comes from the radar lane's CLI (the declared
interface between the packages).  Generation is deterministic per seed, so an
already-generated copy can be reused by pointing RADARBLOCK_SHARED_DS at a
directory containing ``ra/`` and ``sweep/`` produced with the same settings;
otherwise both are generated fresh (a few minutes).
"""

import csv
import os
import subprocess
import sys

import pytest

SEQUENCES = 80
SEED = 0
SPLIT_SEED = 0
OBS_WINDOW = 8
PRED_WINDOW = 10


def _run_radarblock(args):
    cmd = [sys.executable, "-m", "radarblock.cli", *args]
    result = subprocess.run(cmd, capture_output=True, text=True)
    assert result.returncode == 0, f"{' '.join(cmd)}\n{result.stderr}"
    return result.stdout


@pytest.fixture(scope="session")
def shared_dataset(tmp_path_factory):
    """Paths to the shared export and the tracking+k-NN sweep baseline."""
    cached = os.environ.get("RADARBLOCK_SHARED_DS")
    if cached and os.path.exists(os.path.join(cached, "ra", "ra_samples.csv")):
        root = cached
    else:
        root = str(tmp_path_factory.mktemp("shared_ds"))
        _run_radarblock(
            ["export-ra", "--sequences", str(SEQUENCES), "--seed", str(SEED),
             "--split-seed", str(SPLIT_SEED), "--obs-window", str(OBS_WINDOW),
             "--pred-window", str(PRED_WINDOW), "--outdir", os.path.join(root, "ra")]
        )
    sweep_csv = os.path.join(root, "sweep", "sweep.csv")
    if not os.path.exists(sweep_csv):
        _run_radarblock(
            ["sweep", "--sequences", str(SEQUENCES), "--seed", str(SEED),
             "--split-seed", str(SPLIT_SEED), "--obs-window", str(OBS_WINDOW),
             "--sweep", str(PRED_WINDOW), "--outdir", os.path.join(root, "sweep")]
        )
    return root


@pytest.fixture(scope="session")
def knn_baseline(shared_dataset):
    """The tracking+k-NN metrics row at the largest swept window."""
    with open(os.path.join(shared_dataset, "sweep", "sweep.csv"), newline="") as fh:
        rows = [r for r in csv.DictReader(fh) if int(r["pred_window"]) == PRED_WINDOW]
    assert len(rows) == 1
    return rows[0]
