import os
import subprocess
import sys

import numpy as np
import pytest

from lecfdr import _fallback, kernels
from lecfdr.core import max_errors_table

ext = pytest.importorskip("lecfdr._kernels", reason="compiled extension not built")


def _case(rng):
    n = int(rng.integers(1, 120))
    n_a = int(rng.integers(1, n + 1))
    n_b = int(rng.integers(1, n + 1))
    ra = np.sort(rng.integers(0, n_a, n))
    ra[: min(n, n_a)] = np.arange(min(n, n_a))
    rb = rng.integers(0, n_b, n)
    ea = (rng.random(n) < rng.uniform(0, 0.5)).astype(np.int64)
    eb = (rng.random(n) < rng.uniform(0, 0.5)).astype(np.int64)
    alpha = float(rng.uniform(0.05, 0.6))
    return rng.permutation(ra), rb, ea, eb, ra.max() + 1, n_b, alpha, n


def test_route_search_backends_agree(rng):
    for _ in range(300):
        ra, rb, ea, eb, n_a, n_b, alpha, n = _case(rng)
        base_s = int(rng.integers(0, 5))
        base_z = int(rng.integers(0, base_s + 1))
        emax = max_errors_table(alpha, n + base_s)
        args = (ra, rb, ea, eb, int(n_a), int(n_b), emax, base_s, base_z)
        assert tuple(ext.route_search(*args)) == tuple(_fallback.route_search(*args))


def test_incomplete_beta_backends_agree(rng):
    for _ in range(500):
        a, b = np.exp(rng.uniform(-2, 6, 2))
        x = float(rng.random())
        assert ext.reg_incomplete_beta(a, b, x) == pytest.approx(_fallback.reg_incomplete_beta(a, b, x), abs=1e-14)


def test_backend_reported():
    assert kernels.BACKEND == "cython"


def test_pure_python_switch():
    env = dict(os.environ, LECFDR_PURE_PYTHON="1")
    r = subprocess.run([sys.executable, "-c", "import lecfdr; print(lecfdr.BACKEND)"],
                       capture_output=True, text=True, env=env)
    assert r.stdout.strip() == "python"
