# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled mean-shift kernels; same API and semantics as ``_pycore``.

Every routine releases the GIL so batches of ascents can run on a thread pool.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, sqrt, INFINITY, isfinite
from libc.stdlib cimport malloc, free, qsort

cnp.import_array()

NAME = "cython"


cdef int _cmp_long(const void* a, const void* b) noexcept nogil:
    cdef Py_ssize_t x = (<Py_ssize_t*>a)[0]
    cdef Py_ssize_t y = (<Py_ssize_t*>b)[0]
    return (x > y) - (x < y)


cdef inline bint _heap_less(double da, Py_ssize_t ia, double db, Py_ssize_t ib) noexcept nogil:
    # lexicographic (distance, index) order
    return da < db or (da == db and ia < ib)


cdef void _sift_down(double* hd, Py_ssize_t* hi, Py_ssize_t size, Py_ssize_t pos) noexcept nogil:
    # max-heap on (distance, index)
    cdef Py_ssize_t child, big
    cdef double td
    cdef Py_ssize_t ti
    while True:
        child = 2 * pos + 1
        if child >= size:
            return
        big = child
        if child + 1 < size and _heap_less(hd[child], hi[child], hd[child + 1], hi[child + 1]):
            big = child + 1
        if _heap_less(hd[pos], hi[pos], hd[big], hi[big]):
            td = hd[pos]; hd[pos] = hd[big]; hd[big] = td
            ti = hi[pos]; hi[pos] = hi[big]; hi[big] = ti
            pos = big
        else:
            return


cdef inline double _sq(const double[:, ::1] flat, Py_ssize_t n, const double* y) noexcept nogil:
    cdef Py_ssize_t j
    cdef double s = 0.0, t
    for j in range(flat.shape[1]):
        t = flat[n, j] - y[j]
        s += t * t
    return s


cdef int _gauss_step(const double[:, ::1] flat, const double* y, const double[::1] log_coef,
                     const double[::1] inv_bw2, double* logw, double* out) noexcept nogil:
    cdef Py_ssize_t N = flat.shape[0], d = flat.shape[1], n, j
    cdef double top = -INFINITY, w, total = 0.0
    for n in range(N):
        logw[n] = log_coef[n] - 0.5 * inv_bw2[n] * _sq(flat, n, y)
        if logw[n] > top:
            top = logw[n]
    if not isfinite(top):
        return 1
    for j in range(d):
        out[j] = 0.0
    for n in range(N):
        w = exp(logw[n] - top)
        total += w
        for j in range(d):
            out[j] += w * flat[n, j]
    for j in range(d):
        out[j] /= total
    return 0


cdef void _knn_step(const double[:, ::1] flat, const double* y, Py_ssize_t k,
                    double* hd, Py_ssize_t* hi, double* out) noexcept nogil:
    cdef Py_ssize_t N = flat.shape[0], d = flat.shape[1], n, j, size = 0, pos, parent
    cdef double s
    cdef double td
    cdef Py_ssize_t ti
    for n in range(N):
        s = _sq(flat, n, y)
        if size < k:
            hd[size] = s
            hi[size] = n
            pos = size
            size += 1
            while pos > 0:
                parent = (pos - 1) // 2
                if _heap_less(hd[parent], hi[parent], hd[pos], hi[pos]):
                    td = hd[pos]; hd[pos] = hd[parent]; hd[parent] = td
                    ti = hi[pos]; hi[pos] = hi[parent]; hi[parent] = ti
                    pos = parent
                else:
                    break
        elif _heap_less(s, n, hd[0], hi[0]):
            hd[0] = s
            hi[0] = n
            _sift_down(hd, hi, size, 0)
    qsort(hi, size, sizeof(Py_ssize_t), _cmp_long)
    for j in range(d):
        out[j] = 0.0
    for pos in range(size):
        n = hi[pos]
        for j in range(d):
            out[j] += flat[n, j]
    for j in range(d):
        out[j] /= k


cdef inline bint _converged(const double* y_new, const double* y, Py_ssize_t d, double tol) noexcept nogil:
    cdef Py_ssize_t j
    cdef double step = 0.0, norm = 0.0, t
    for j in range(d):
        t = y_new[j] - y[j]
        step += t * t
        norm += y[j] * y[j]
    return sqrt(step) < tol * (1.0 + sqrt(norm))


def sq_dists(const double[:, ::1] flat, const double[::1] y):
    cdef Py_ssize_t n
    out = np.empty(flat.shape[0])
    cdef double[::1] o = out
    with nogil:
        for n in range(flat.shape[0]):
            o[n] = _sq(flat, n, &y[0])
    return out


def pairwise_sq(const double[:, ::1] A, const double[:, ::1] B):
    cdef Py_ssize_t m = A.shape[0], n = B.shape[0], d = A.shape[1], i, j, l
    cdef double s, t
    out = np.empty((m, n))
    cdef double[:, ::1] o = out
    with nogil:
        for i in range(m):
            for j in range(n):
                s = 0.0
                for l in range(d):
                    t = A[i, l] - B[j, l]
                    s += t * t
                o[i, j] = s
    return out


def gauss_step(const double[:, ::1] flat, const double[::1] y, const double[::1] log_coef,
               const double[::1] inv_bw2):
    out = np.empty(flat.shape[1])
    cdef double[::1] o = out
    cdef double* logw = <double*>malloc(flat.shape[0] * sizeof(double))
    cdef int status
    if logw == NULL:
        raise MemoryError()
    with nogil:
        status = _gauss_step(flat, &y[0], log_coef, inv_bw2, logw, &o[0])
    free(logw)
    if status:
        return np.array(y, copy=True), status
    return out, 0


def knn_step(const double[:, ::1] flat, const double[::1] y, Py_ssize_t k):
    out = np.empty(flat.shape[1])
    cdef double[::1] o = out
    cdef double* hd = <double*>malloc(k * sizeof(double))
    cdef Py_ssize_t* hi = <Py_ssize_t*>malloc(k * sizeof(Py_ssize_t))
    if hd == NULL or hi == NULL:
        free(hd); free(hi)
        raise MemoryError()
    with nogil:
        _knn_step(flat, &y[0], k, hd, hi, &o[0])
    free(hd); free(hi)
    return out


def gauss_ascend_many(const double[:, ::1] flat, const double[:, ::1] starts,
                      const double[::1] log_coef, const double[::1] inv_bw2,
                      double tol, Py_ssize_t max_iter):
    cdef Py_ssize_t m = starts.shape[0], d = flat.shape[1], i, j, it
    modes_arr = np.empty((m, d))
    iters_arr = np.zeros(m, dtype=np.int64)
    conv_arr = np.zeros(m, dtype=bool)
    status_arr = np.zeros(m, dtype=np.int64)
    cdef double[:, ::1] modes = modes_arr
    cdef cnp.int64_t[::1] iters = iters_arr
    cdef cnp.uint8_t[::1] conv = conv_arr.view(np.uint8)
    cdef cnp.int64_t[::1] status = status_arr
    cdef double* logw = <double*>malloc(flat.shape[0] * sizeof(double))
    cdef double* y = <double*>malloc(d * sizeof(double))
    cdef double* y_new = <double*>malloc(d * sizeof(double))
    cdef double* tmp
    cdef int st
    if logw == NULL or y == NULL or y_new == NULL:
        free(logw); free(y); free(y_new)
        raise MemoryError()
    with nogil:
        for i in range(m):
            for j in range(d):
                y[j] = starts[i, j]
            iters[i] = max_iter
            for it in range(1, max_iter + 1):
                st = _gauss_step(flat, y, log_coef, inv_bw2, logw, y_new)
                if st:
                    status[i] = st
                    iters[i] = it
                    break
                if _converged(y_new, y, d, tol):
                    conv[i] = 1
                    iters[i] = it
                    tmp = y; y = y_new; y_new = tmp
                    break
                tmp = y; y = y_new; y_new = tmp
            for j in range(d):
                modes[i, j] = y[j]
    free(logw); free(y); free(y_new)
    return modes_arr, iters_arr, conv_arr, status_arr


def knn_ascend_many(const double[:, ::1] flat, const double[:, ::1] starts, Py_ssize_t k,
                    double tol, Py_ssize_t max_iter):
    cdef Py_ssize_t m = starts.shape[0], d = flat.shape[1], i, j, it
    modes_arr = np.empty((m, d))
    iters_arr = np.zeros(m, dtype=np.int64)
    conv_arr = np.zeros(m, dtype=bool)
    status_arr = np.zeros(m, dtype=np.int64)
    cdef double[:, ::1] modes = modes_arr
    cdef cnp.int64_t[::1] iters = iters_arr
    cdef cnp.uint8_t[::1] conv = conv_arr.view(np.uint8)
    cdef double* hd = <double*>malloc(k * sizeof(double))
    cdef Py_ssize_t* hi = <Py_ssize_t*>malloc(k * sizeof(Py_ssize_t))
    cdef double* y = <double*>malloc(d * sizeof(double))
    cdef double* y_new = <double*>malloc(d * sizeof(double))
    cdef double* tmp
    if hd == NULL or hi == NULL or y == NULL or y_new == NULL:
        free(hd); free(hi); free(y); free(y_new)
        raise MemoryError()
    with nogil:
        for i in range(m):
            for j in range(d):
                y[j] = starts[i, j]
            iters[i] = max_iter
            for it in range(1, max_iter + 1):
                _knn_step(flat, y, k, hd, hi, y_new)
                if _converged(y_new, y, d, tol):
                    conv[i] = 1
                    iters[i] = it
                    tmp = y; y = y_new; y_new = tmp
                    break
                tmp = y; y = y_new; y_new = tmp
            for j in range(d):
                modes[i, j] = y[j]
    free(hd); free(hi); free(y); free(y_new)
    return modes_arr, iters_arr, conv_arr, status_arr


def gauss_ascend(flat, y0, log_coef, inv_bw2, double tol, Py_ssize_t max_iter):
    modes, iters, conv, status = gauss_ascend_many(
        flat, np.ascontiguousarray(y0, dtype=np.float64).reshape(1, -1), log_coef, inv_bw2, tol, max_iter)
    return modes[0], int(iters[0]), bool(conv[0]), int(status[0])


def knn_ascend(flat, y0, Py_ssize_t k, double tol, Py_ssize_t max_iter):
    modes, iters, conv, status = knn_ascend_many(
        flat, np.ascontiguousarray(y0, dtype=np.float64).reshape(1, -1), k, tol, max_iter)
    return modes[0], int(iters[0]), bool(conv[0]), int(status[0])
