import os
import subprocess
import sys

import pytest

PROBE = (
    "import condalign, numpy as np;"
    "from condalign.kernels import KernelSpec, gram;"
    "k = gram(np.eye(3), np.ones((2, 3)), KernelSpec());"
    "print(condalign.active_backend(), k.shape)"
)


def run_with_backend(value):
    env = dict(os.environ)
    if value is None:
        env.pop("CONDALIGN_BACKEND", None)
    else:
        env["CONDALIGN_BACKEND"] = value
    return subprocess.run(
        [sys.executable, "-c", PROBE], capture_output=True, text=True, env=env
    )


def test_numpy_backend_forced():
    proc = run_with_backend("numpy")
    assert proc.returncode == 0, proc.stderr
    assert proc.stdout.split()[0] == "numpy"


def test_default_backend_prefers_numba():
    pytest.importorskip("numba")
    proc = run_with_backend(None)
    assert proc.returncode == 0, proc.stderr
    assert proc.stdout.split()[0] == "numba"


def test_invalid_backend_rejected():
    proc = run_with_backend("cuda")
    assert proc.returncode != 0
    assert "CONDALIGN_BACKEND" in proc.stderr
