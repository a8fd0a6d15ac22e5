# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled double-sum kernels over (u, v) in [1, q-1]^2."""

import numpy as np
cimport numpy as cnp

cnp.import_array()

ctypedef cnp.int64_t i64


cdef inline i64 _weight(int kind, i64 u, i64 v, i64 q) nogil:
    if kind == 0:
        return 1
    elif kind == 1:
        return v
    elif kind == 2:
        return u * v
    return 2 * v - q


cdef void _accumulate(const i64[:] exps, i64 q, i64 A, i64 B, i64 C, int kind,
                      i64[:] out) noexcept nogil:
    cdef i64 u, v, au, bu, val, k
    A = ((A % q) + q) % q
    B = ((B % q) + q) % q
    C = ((C % q) + q) % q
    for u in range(1, q):
        au = (A * u % q) * u % q
        bu = B * u % q
        for v in range(1, q):
            val = (au + bu * v + (C * v % q) * v) % q
            k = exps[val]
            if k >= 0:
                out[k] += _weight(kind, u, v, q)


def form_histogram(const i64[:] exps, long q, long N, long A, long B, long C, int weight=2):
    """Sum of w(u, v) over 1 <= u, v < q, bucketed by the exponent of chi(A u^2 + B u v + C v^2)."""
    out = np.zeros(N, dtype=np.int64)
    cdef i64[:] view = out
    with nogil:
        _accumulate(exps, q, A, B, C, weight, view)
    return out


def f1_histograms(const i64[:] exps, long q, long N, const i64[:] a_keys, const i64[:] n_keys):
    """Histograms of q^2 G(a x^2 + a n x y - y^2, chi) for many (a, n) keys at once."""
    cdef Py_ssize_t k, nk = a_keys.shape[0]
    out = np.zeros((nk, N), dtype=np.int64)
    cdef i64[:, :] view = out
    cdef i64 a
    with nogil:
        for k in range(nk):
            a = a_keys[k] % q
            _accumulate(exps, q, a, a * (n_keys[k] % q), -1, 2, view[k])
    return out
