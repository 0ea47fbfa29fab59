import math
import os
import subprocess
import sys

import numpy as np
import pytest

from sparse_rp import kernels
from sparse_rp.kernels import _numpy

_numba = pytest.importorskip("sparse_rp.kernels._numba")


def _csc(rng, k, d, fill):
    dense = np.where(rng.random((k, d)) < fill, rng.standard_normal((k, d)), 0.0)
    indptr = np.r_[0, np.cumsum((dense != 0).sum(axis=0))].astype(np.int64)
    rows, cols = np.nonzero(dense.T)
    return dense, indptr, cols.astype(np.int64), dense.T[rows, cols]


def test_numba_backend_is_active():
    if os.environ.get("SPARSE_RP_PURE_NUMPY", "") not in ("", "0"):
        assert kernels.BACKEND == "numpy"
    else:
        assert kernels.BACKEND == "numba"


def test_csc_project_agrees(rng):
    dense, indptr, indices, data = _csc(rng, 7, 30, 0.2)
    X = rng.standard_normal((11, 30))
    a = _numpy.csc_project(indptr, indices, data, X, 7)
    b = _numba.csc_project(indptr, indices, data, X, 7)
    np.testing.assert_allclose(a, X @ dense.T, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(b, a, rtol=1e-12, atol=1e-13)


def test_floyd_abs_dot_bitwise(rng):
    m, s = 500, 4
    args = (rng.random((m, s)), np.sign(rng.random((m, s)) - 0.5), np.sign(rng.random((m, s)) - 0.5),
            rng.standard_normal((m, s)))
    a = _numpy.floyd_abs_dot(*args, 40, 25, 1.5, 0.5, np.sqrt(10.0))
    b = _numba.floyd_abs_dot(*args, 40, 25, 1.5, 0.5, np.sqrt(10.0))
    np.testing.assert_array_equal(a, b)


def test_floyd_positions_are_distinct_and_uniform(rng):
    # with mu=1, sigma=0 and all-positive signs each sample counts hits among the first n_features
    m, s, d = 40000, 3, 9
    u = rng.random((m, s))
    ones = np.ones((m, s))
    hits = _numpy.floyd_abs_dot(u, ones, ones, np.zeros((m, s)), d, 1, 1.0, 0.0, 1.0)
    assert set(np.unique(hits).tolist()) <= {0.0, 1.0}
    assert hits.mean() == pytest.approx(s / d, abs=4 * np.sqrt(s / d * (1 - s / d) / m))


@pytest.mark.parametrize("d,w", [(6, 1), (10, 3), (14, 7), (12, 12)])
def test_pair_histogram(d, w):
    a = _numpy.pair_histogram(d, w)
    b = _numba.pair_histogram(d, w)
    np.testing.assert_array_equal(a, b)
    assert int(a.sum()) == math.comb(d, w)


def test_dcd_and_pegasos_agree(rng):
    n = 40
    X = rng.standard_normal((n, 5))
    y = np.where(rng.random(n) < 0.5, 1.0, -1.0)
    Q = np.ascontiguousarray((X @ X.T + 1.0) * np.outer(y, y))
    upper = np.full(n, 1.0 / n)
    orders = np.array([rng.permutation(n) for _ in range(30)], dtype=np.int64)
    a = _numpy.dcd_svm(Q, upper, orders, 1e-6)
    b = _numba.dcd_svm(Q, upper, orders, 1e-6)
    np.testing.assert_array_equal(a[0], b[0])
    assert a[1] == b[1]
    Z = np.hstack([X, np.ones((n, 1))])
    p = _numpy.pegasos_svm(Z, y, 1.0, orders, 1e-6)
    q = _numba.pegasos_svm(Z, y, 1.0, orders, 1e-6)
    np.testing.assert_allclose(p[0], q[0], rtol=1e-10, atol=1e-12)
    assert p[1] == q[1]


def test_pure_numpy_flag_gives_same_results():
    code = (
        "from sparse_rp import kernels\n"
        "from sparse_rp.classify import ExperimentConfig, run_experiment\n"
        "from sparse_rp.synth import SyntheticSpec\n"
        "t = run_experiment(ExperimentConfig(k_values=(5, 20), votes=3, runs=2), SyntheticSpec(40, 20, 1, 2, 8))\n"
        "print(kernels.BACKEND, repr(t.per_run.tolist()))\n"
    )
    outs = {}
    for flag in ("1", "0"):
        env = {**os.environ, "SPARSE_RP_PURE_NUMPY": flag}
        res = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
        backend, values = res.stdout.split(" ", 1)
        outs[backend] = values
    assert set(outs) == {"numpy", "numba"}
    assert outs["numpy"] == outs["numba"]
