"""Hot numeric kernels with a numba path and a pure-numpy fallback.

The numba path is used when numba imports cleanly and the environment
variable ``HORIZON_PU_DISABLE_NUMBA`` is unset or ``0``.  Both paths are
always importable as ``numba_*`` / ``numpy_*`` so they can be compared
directly (see ``benchmarks/bench_kernels.py``).

All kernels reduce in a fixed sequential order, so results are run-to-run
identical for identical inputs.
"""

import os
import warnings

import numpy as np

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None
    HAVE_NUMBA = False


def _env_disabled():
    return os.environ.get("HORIZON_PU_DISABLE_NUMBA", "0").strip().lower() not in ("", "0", "false", "no")


USE_NUMBA = HAVE_NUMBA and not _env_disabled()

if not HAVE_NUMBA and not _env_disabled():  # pragma: no cover
    warnings.warn("numba is not installed - using the numpy kernels", RuntimeWarning)


# ---------------------------------------------------------------------------
# numpy implementations
# ---------------------------------------------------------------------------


def numpy_csr_matmul(indptr, indices, data, W, out):
    """out[i] = sum_k data[k] * W[indices[k]] over the nonzeros of row i."""
    n = indptr.shape[0] - 1
    out[...] = 0
    if indices.shape[0] == 0:
        return out
    rows = np.repeat(np.arange(n), np.diff(indptr))
    contrib = W[indices] * data[:, None].astype(W.dtype, copy=False)
    np.add.at(out, rows, contrib)
    return out


def numpy_csr_t_matmul(indptr, indices, data, G, out):
    """out = X^T @ G for the CSR matrix X; ``out`` is overwritten."""
    n = indptr.shape[0] - 1
    out[...] = 0
    if indices.shape[0] == 0:
        return out
    rows = np.repeat(np.arange(n), np.diff(indptr))
    contrib = G[rows] * data[:, None].astype(G.dtype, copy=False)
    np.add.at(out, indices, contrib)
    return out


def numpy_adam_update(param, grad, m, v, lr, beta1, beta2, eps, step):
    m *= beta1
    m += (1.0 - beta1) * grad
    v *= beta2
    v += (1.0 - beta2) * grad * grad
    m_hat = m * (1.0 / (1.0 - beta1**step))
    v_hat = v * (1.0 / (1.0 - beta2**step))
    param -= (lr * m_hat / (np.sqrt(v_hat) + eps)).astype(param.dtype, copy=False)


# ---------------------------------------------------------------------------
# numba implementations
# ---------------------------------------------------------------------------

if HAVE_NUMBA:

    @numba.njit(cache=True, nogil=True)
    def _nb_csr_matmul(indptr, indices, data, W, out):
        n = indptr.shape[0] - 1
        h = W.shape[1]
        for i in range(n):
            for j in range(h):
                out[i, j] = 0
            for k in range(indptr[i], indptr[i + 1]):
                row = indices[k]
                val = data[k]
                for j in range(h):
                    out[i, j] += val * W[row, j]
        return out

    @numba.njit(cache=True, nogil=True)
    def _nb_csr_t_matmul(indptr, indices, data, G, out):
        n = indptr.shape[0] - 1
        h = G.shape[1]
        out[:, :] = 0
        for i in range(n):
            for k in range(indptr[i], indptr[i + 1]):
                row = indices[k]
                val = data[k]
                for j in range(h):
                    out[row, j] += val * G[i, j]
        return out

    @numba.njit(cache=True, nogil=True)
    def _nb_adam_update(param, grad, m, v, lr, beta1, one_m_b1, beta2, one_m_b2, inv_c1, inv_c2, eps):
        p = param.ravel()
        g = grad.ravel()
        mm = m.ravel()
        vv = v.ravel()
        for i in range(p.shape[0]):
            gi = g[i]
            mi = beta1 * mm[i] + one_m_b1 * gi
            vi = beta2 * vv[i] + one_m_b2 * gi * gi
            mm[i] = mi
            vv[i] = vi
            p[i] -= lr * (mi * inv_c1) / (np.sqrt(vi * inv_c2) + eps)


def numba_csr_matmul(indptr, indices, data, W, out):
    return _nb_csr_matmul(indptr, indices, data.astype(W.dtype, copy=False), W, out)


def numba_csr_t_matmul(indptr, indices, data, G, out):
    return _nb_csr_t_matmul(indptr, indices, data.astype(G.dtype, copy=False), G, out)


def numba_adam_update(param, grad, m, v, lr, beta1, beta2, eps, step):
    # ravel() on the numba side must be a view
    assert param.flags.c_contiguous and grad.flags.c_contiguous
    # scalars in the parameter dtype keep float32 updates in float32 (and SIMD-friendly)
    f = param.dtype.type
    _nb_adam_update(param, grad.astype(param.dtype, copy=False), m, v, f(lr), f(beta1), f(1.0 - beta1),
                    f(beta2), f(1.0 - beta2), f(1.0 / (1.0 - beta1**step)), f(1.0 / (1.0 - beta2**step)), f(eps))


def csr_matmul(indptr, indices, data, W, out=None):
    """Sparse rows times dense matrix: ``X @ W`` for a CSR ``X``."""
    if out is None:
        out = np.empty((indptr.shape[0] - 1, W.shape[1]), dtype=W.dtype)
    if USE_NUMBA:
        return numba_csr_matmul(indptr, indices, data, W, out)
    return numpy_csr_matmul(indptr, indices, data, W, out)


def csr_t_matmul(indptr, indices, data, G, n_cols, out=None):
    """Transposed sparse times dense: ``X.T @ G`` with ``X`` of width ``n_cols``."""
    if out is None:
        out = np.empty((n_cols, G.shape[1]), dtype=G.dtype)
    if USE_NUMBA:
        return numba_csr_t_matmul(indptr, indices, data, G, out)
    return numpy_csr_t_matmul(indptr, indices, data, G, out)


def adam_update(param, grad, m, v, lr, beta1, beta2, eps, step):
    """In-place Adam update of ``param`` and its moment buffers."""
    if USE_NUMBA:
        numba_adam_update(param, grad, m, v, lr, beta1, beta2, eps, step)
    else:
        numpy_adam_update(param, grad, m, v, lr, beta1, beta2, eps, step)


def backend():
    return "numba" if USE_NUMBA else "numpy"
