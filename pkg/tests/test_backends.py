import os
import subprocess
import sys

import numpy as np
import pytest

from finslerkit import Euclidean, EvenPNorm, LinearPullback, Randers, Scaled, build_sphere_quadrature
from finslerkit import kernels
from finslerkit._backend import max_workers, numba_requested

NORMS = [
    Euclidean([[2.0, 0.4, 0.0], [0.4, 1.0, 0.1], [0.0, 0.1, 3.0]]),
    EvenPNorm(4, 3),
    EvenPNorm(8, 3),
    Randers([[1.5, 0.2, 0.0], [0.2, 1.0, 0.0], [0.0, 0.0, 2.0]], [0.2, 0.1, -0.3]),
    Scaled(LinearPullback(EvenPNorm(4, 3), [[1.0, 0.5, 0.0], [0.0, 1.0, 0.2], [0.3, 0.0, 1.0]]), 1.7),
]


@pytest.mark.parametrize("norm", NORMS, ids=lambda n: n.family)
def test_kernels_agree(norm, rng):
    canon = norm.canonical()
    X = rng.standard_normal((64, 3))
    np.testing.assert_allclose(kernels.values(canon, X, "numba"), kernels.values(canon, X, "numpy"),
                               rtol=1e-13)
    np.testing.assert_allclose(kernels.hessians(canon, X, "numba"), kernels.hessians(canon, X, "numpy"),
                               rtol=1e-11, atol=1e-13)
    quad = build_sphere_quadrature(3, 32)
    a = kernels.indicatrix_sums(canon, quad.nodes, quad.weights, "numba")
    b = kernels.indicatrix_sums(canon, quad.nodes, quad.weights, "numpy")
    np.testing.assert_allclose(a[0], b[0], rtol=1e-11, atol=1e-12 * np.abs(b[0]).max())
    np.testing.assert_allclose(a[1:], b[1:], rtol=1e-12)


def _backend_in_subprocess(value):
    env = dict(os.environ, FINSLERKIT_DISABLE_NUMBA=value)
    out = subprocess.run([sys.executable, "-c", "import finslerkit; print(finslerkit.BACKEND)"],
                         capture_output=True, text=True, env=env, check=True)
    return out.stdout.strip()


def test_env_flag_selects_numpy():
    assert _backend_in_subprocess("1") == "numpy"
    assert _backend_in_subprocess("") == "numba"


def test_numpy_backend_end_to_end():
    env = dict(os.environ, FINSLERKIT_DISABLE_NUMBA="1")
    code = ("import numpy as np, finslerkit as fk;"
            "print(repr(float(fk.averaged_form(fk.EvenPNorm(4, 2)).matrix[0, 0])))")
    a = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True, env=env, check=True)
    b = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True, check=True)
    assert float(a.stdout) == pytest.approx(float(b.stdout), rel=1e-13)


def test_flag_parsing(monkeypatch):
    for value, expected in [("1", False), ("true", False), ("YES", False), ("0", True), ("", True)]:
        monkeypatch.setenv("FINSLERKIT_DISABLE_NUMBA", value)
        assert numba_requested() is expected


def test_thread_cap(monkeypatch):
    monkeypatch.setenv("FINSLERKIT_THREADS", "4")
    assert max_workers() == 4
    monkeypatch.setenv("FINSLERKIT_THREADS", "junk")
    assert max_workers() == 1
    monkeypatch.setenv("FINSLERKIT_THREADS", "0")
    assert max_workers() == 1
