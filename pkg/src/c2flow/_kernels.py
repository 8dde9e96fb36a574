"""Numba kernels for the sparse-dense-sparse sandwich ``A M A^T``.

Every output entry is produced by one loop iteration with a fixed
summation order, so results do not depend on the thread count.
"""
import numba as nb

nb.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]
import numpy as np


@nb.njit(parallel=True, cache=True)
def csr_times_dense(indptr, indices, data, m, out):
    """``out = A @ m`` for CSR ``A``; ``out`` is overwritten."""
    nrows = indptr.size - 1
    ncols = m.shape[1]
    for i in nb.prange(nrows):
        row = out[i]
        row[:] = 0.0
        for k in range(indptr[i], indptr[i + 1]):
            c = data[k]
            src = m[indices[k]]
            for j in range(ncols):
                row[j] += c * src[j]


@nb.njit(parallel=True, cache=True)
def dense_times_csr_t_rank2(indptr, indices, data, t, fvec, xvec, out):
    """``out = t @ A.T + f f^T + x f^T + f x^T``.

    Only the upper triangle is evaluated; the lower one is mirrored, which
    is exact when ``t @ A.T`` is symmetric (``t = A M`` with symmetric M).
    """
    n = t.shape[0]
    for r in nb.prange(n):
        trow = t[r]
        fr = fvec[r]
        xr = xvec[r]
        for i in range(r, n):
            s = 0.0
            for k in range(indptr[i], indptr[i + 1]):
                s += data[k] * trow[indices[k]]
            out[r, i] = s + fr * (fvec[i] + xvec[i]) + xr * fvec[i]
    for r in nb.prange(n):
        for i in range(r):
            out[r, i] = out[i, r]


@nb.njit(parallel=True, cache=True)
def dense_times_csr_t_rank2_full(indptr, indices, data, t, fvec, xvec, out):
    """Same as :func:`dense_times_csr_t_rank2` but evaluates every entry."""
    n = t.shape[0]
    for r in nb.prange(n):
        trow = t[r]
        fr = fvec[r]
        xr = xvec[r]
        for i in range(n):
            s = 0.0
            for k in range(indptr[i], indptr[i + 1]):
                s += data[k] * trow[indices[k]]
            out[r, i] = s + fr * (fvec[i] + xvec[i]) + xr * fvec[i]


def warmup():
    """Trigger compilation on a tiny problem."""
    import scipy.sparse as sp

    a = sp.identity(2, format="csr")
    m = np.eye(2)
    t = np.empty((2, 2))
    csr_times_dense(a.indptr, a.indices, a.data, m, t)
    dense_times_csr_t_rank2(a.indptr, a.indices, a.data, t, np.zeros(2), np.zeros(2), m)
    dense_times_csr_t_rank2_full(a.indptr, a.indices, a.data, t, np.zeros(2), np.zeros(2), m)
