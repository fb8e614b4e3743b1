import os
import subprocess
import sys

import numpy as np
import pytest

from loewnerflow import kernels
from loewnerflow.kernels import backends

IMPLS = backends()


def _data(seed=0):
    rng = np.random.default_rng(seed)
    k = np.sort(rng.uniform(-10, 10, 33))
    b = rng.uniform(0.01, 1, 33)
    z = rng.uniform(-10, 10, 200) + 1j * rng.uniform(0.01, 3, 200)
    return k, b, z


@pytest.mark.skipif("cython" not in IMPLS, reason="extension not built")
def test_backends_agree():
    k, b, z = _data()
    py, cy = IMPLS["python"], IMPLS["cython"]
    for order in range(6):
        a = py.p_series(z, k, b, order)
        c = cy.p_series(z, k, b, order)
        assert np.max(np.abs(a - c) / (1 + np.abs(a))) < 1e-13
    coef = np.random.default_rng(1).normal(size=33) + 0.5j
    a = py.log_series(z, k, coef, 1j)
    c = cy.log_series(z, k, coef, 1j)
    assert np.max(np.abs(a - c)) < 1e-12
    assert abs(py.loewner_rhs(0.3 + 1j, 0.5, k, b) - cy.loewner_rhs(0.3 + 1j, 0.5, k, b)) < 1e-14


@pytest.mark.parametrize("name", sorted(IMPLS))
def test_p_series_matches_direct(name):
    k, b, z = _data(2)
    mod = IMPLS[name]
    direct = z + np.sum(4 * b[None, :] / (z[:, None] - k[None, :]), axis=1)
    np.testing.assert_allclose(mod.p_series(z, k, b, 0), direct, rtol=1e-13)
    d1 = 1 - np.sum(4 * b[None, :] / (z[:, None] - k[None, :]) ** 2, axis=1)
    np.testing.assert_allclose(mod.p_series(z, k, b, 1), d1, rtol=1e-12)


@pytest.mark.parametrize("name", sorted(IMPLS))
def test_loewner_rhs(name):
    k, b, _ = _data(3)
    w, s = 0.2 + 0.7j, 0.6
    expect = np.sum(2 * b / (w - k * s))
    assert abs(IMPLS[name].loewner_rhs(w, s, k, b) - expect) < 1e-13


def test_pure_python_switch():
    env = dict(os.environ, LOEWNERFLOW_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import loewnerflow.kernels as k; print(k.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_dispatch_accepts_lists():
    out = kernels.p_series([1j], [0.0], [1.0], 0)
    assert abs(out[0] + 3j) < 1e-15
