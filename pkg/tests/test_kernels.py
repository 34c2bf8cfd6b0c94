import os
import subprocess
import sys

import numpy as np
import pytest

from horizon_pu import _kernels
from tests.helpers import random_csr

needs_numba = pytest.mark.skipif(not _kernels.HAVE_NUMBA, reason="numba not installed")


@pytest.fixture
def batch():
    rng = np.random.default_rng(3)
    return random_csr(rng, 17, 23, density=0.3), rng


@pytest.mark.parametrize("dtype", [np.float32, np.float64])
def test_numpy_matmul_matches_dense(batch, dtype):
    X, rng = batch
    W = rng.normal(size=(X.dim, 5)).astype(dtype)
    out = np.empty((X.n_rows, 5), dtype=dtype)
    _kernels.numpy_csr_matmul(X.indptr, X.indices, X.data, W, out)
    np.testing.assert_allclose(out, X.to_dense() @ W, rtol=1e-5 if dtype == np.float32 else 1e-12)


@needs_numba
@pytest.mark.parametrize("dtype", [np.float32, np.float64])
def test_numba_and_numpy_agree(batch, dtype):
    X, rng = batch
    W = rng.normal(size=(X.dim, 6)).astype(dtype)
    G = rng.normal(size=(X.n_rows, 6)).astype(dtype)
    a = _kernels.numba_csr_matmul(X.indptr, X.indices, X.data, W, np.empty((X.n_rows, 6), dtype))
    b = _kernels.numpy_csr_matmul(X.indptr, X.indices, X.data, W, np.empty((X.n_rows, 6), dtype))
    np.testing.assert_allclose(a, b, rtol=1e-5, atol=1e-6)
    a = _kernels.numba_csr_t_matmul(X.indptr, X.indices, X.data, G, np.empty((X.dim, 6), dtype))
    b = _kernels.numpy_csr_t_matmul(X.indptr, X.indices, X.data, G, np.empty((X.dim, 6), dtype))
    np.testing.assert_allclose(a, b, rtol=1e-5, atol=1e-6)
    np.testing.assert_allclose(b, X.to_dense().T @ G, rtol=1e-5, atol=1e-6)


@needs_numba
def test_adam_paths_agree():
    rng = np.random.default_rng(0)
    p1 = rng.normal(size=(4, 3))
    p2 = p1.copy()
    m1, v1, m2, v2 = (np.zeros_like(p1) for _ in range(4))
    for step in range(1, 6):
        g = rng.normal(size=p1.shape)
        _kernels.numba_adam_update(p1, g, m1, v1, 1e-2, 0.9, 0.999, 1e-8, step)
        _kernels.numpy_adam_update(p2, g, m2, v2, 1e-2, 0.9, 0.999, 1e-8, step)
    np.testing.assert_allclose(p1, p2, rtol=1e-12, atol=1e-14)


def test_empty_rows_give_zero(batch):
    X, rng = batch
    empty = X.take([])
    out = _kernels.csr_matmul(empty.indptr, empty.indices, empty.data, rng.normal(size=(X.dim, 2)))
    assert out.shape == (0, 2)
    G = np.zeros((0, 2))
    assert not _kernels.csr_t_matmul(empty.indptr, empty.indices, empty.data, G, X.dim).any()


def test_repeatable(batch):
    X, rng = batch
    G = rng.normal(size=(X.n_rows, 4))
    a = _kernels.csr_t_matmul(X.indptr, X.indices, X.data, G, X.dim)
    b = _kernels.csr_t_matmul(X.indptr, X.indices, X.data, G, X.dim)
    assert np.array_equal(a, b)


@pytest.mark.parametrize("flag,expected", [("1", "numpy"), ("0", "numba" if _kernels.HAVE_NUMBA else "numpy")])
def test_env_flag_selects_backend(flag, expected):
    env = dict(os.environ, HORIZON_PU_DISABLE_NUMBA=flag)
    out = subprocess.run([sys.executable, "-c", "from horizon_pu import _kernels; print(_kernels.backend())"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == expected


@needs_numba
def test_adam_paths_agree_in_float32():
    rng = np.random.default_rng(1)
    p1 = rng.normal(size=(50, 7)).astype(np.float32)
    p2 = p1.copy()
    m1, v1, m2, v2 = (np.zeros_like(p1) for _ in range(4))
    for step in range(1, 20):
        g = rng.normal(size=p1.shape).astype(np.float32)
        _kernels.numba_adam_update(p1, g, m1, v1, 1e-3, 0.9, 0.999, 1e-8, step)
        _kernels.numpy_adam_update(p2, g, m2, v2, 1e-3, 0.9, 0.999, 1e-8, step)
    assert p1.dtype == m1.dtype == np.float32
    np.testing.assert_allclose(p1, p2, rtol=1e-6, atol=1e-7)
