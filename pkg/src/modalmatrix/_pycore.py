"""Pure numpy implementation of the mean-shift kernels.

Mirrors the API of the compiled ``_core`` extension; ``_backend`` picks one
at import time. All arrays are float64 and C-contiguous; matrices are passed
flattened row-major.

Gaussian steps take per-point ``log_coef`` and ``inv_bw2`` so that the fixed,
sample-point and (whitened) separable estimators share one kernel: the
log-weight of point ``n`` is ``log_coef[n] - 0.5 * inv_bw2[n] * |x_n - y|^2``.
Status codes: 0 ok, 1 weights have no finite mass.
"""
import numpy as np

NAME = "python"


def sq_dists(flat, y):
    diff = flat - y
    return np.einsum("ij,ij->i", diff, diff)


def pairwise_sq(A, B, max_elems=1 << 22):
    """``out[i, j] = |A_i - B_j|^2`` computed in row blocks of bounded size."""
    out = np.empty((A.shape[0], B.shape[0]))
    rows = max(1, max_elems // max(1, B.shape[0] * A.shape[1]))
    for start in range(0, A.shape[0], rows):
        diff = A[start:start + rows, None, :] - B[None, :, :]
        out[start:start + rows] = np.einsum("ijk,ijk->ij", diff, diff)
    return out


def gauss_step(flat, y, log_coef, inv_bw2):
    logw = log_coef - 0.5 * inv_bw2 * sq_dists(flat, y)
    top = logw.max()
    if not np.isfinite(top):
        return y.copy(), 1
    w = np.exp(logw - top)
    total = w.sum()
    return (w @ flat) / total, 0


def _k_smallest(sq, k):
    n = sq.shape[0]
    if k >= n:
        return np.arange(n)
    cand = np.argpartition(sq, k - 1)[:k]
    kth = sq[cand].max()
    below = np.flatnonzero(sq < kth)
    at = np.flatnonzero(sq == kth)[: k - below.size]
    return np.sort(np.concatenate([below, at]))


def knn_step(flat, y, k):
    idx = _k_smallest(sq_dists(flat, y), k)
    # cumsum keeps the row order sequential, matching the compiled loop bit for bit
    return np.cumsum(flat[idx], axis=0)[-1] / k


def _converged(y_new, y, tol):
    d = y_new - y
    return np.sqrt(d @ d) < tol * (1.0 + np.sqrt(y @ y))


def gauss_ascend(flat, y0, log_coef, inv_bw2, tol, max_iter):
    y = np.array(y0, dtype=np.float64)
    for it in range(1, max_iter + 1):
        y_new, status = gauss_step(flat, y, log_coef, inv_bw2)
        if status:
            return y, it, False, status
        done = _converged(y_new, y, tol)
        y = y_new
        if done:
            return y, it, True, 0
    return y, max_iter, False, 0


def knn_ascend(flat, y0, k, tol, max_iter):
    y = np.array(y0, dtype=np.float64)
    for it in range(1, max_iter + 1):
        y_new = knn_step(flat, y, k)
        done = _converged(y_new, y, tol)
        y = y_new
        if done:
            return y, it, True, 0
    return y, max_iter, False, 0


def _many(ascend, starts, *args):
    m = starts.shape[0]
    modes = np.empty_like(starts)
    iters = np.empty(m, dtype=np.int64)
    conv = np.empty(m, dtype=bool)
    status = np.zeros(m, dtype=np.int64)
    for i in range(m):
        modes[i], iters[i], conv[i], status[i] = ascend(starts[i], *args)
    return modes, iters, conv, status


def gauss_ascend_many(flat, starts, log_coef, inv_bw2, tol, max_iter):
    return _many(lambda y0, *a: gauss_ascend(flat, y0, *a), starts, log_coef, inv_bw2, tol, max_iter)


def knn_ascend_many(flat, starts, k, tol, max_iter):
    return _many(lambda y0, *a: knn_ascend(flat, y0, *a), starts, k, tol, max_iter)
