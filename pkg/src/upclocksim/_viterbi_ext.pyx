# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled Viterbi kernel for the K=7 (133, 171) code."""

import numpy as np
cimport numpy as cnp
from libc.math cimport INFINITY

cnp.import_array()


cdef inline int _parity(int x) nogil:
    cdef int p = 0
    while x:
        p ^= 1
        x &= x - 1
    return p


def viterbi_core(llr_a, llr_b):
    """Soft-input Viterbi, full traceback, trellis terminated in state 0.

    Same contract as the numpy fallback: positive LLR favours a 0 bit.
    """
    cdef double[::1] la = np.ascontiguousarray(llr_a, dtype=np.float64)
    cdef double[::1] lb = np.ascontiguousarray(llr_b, dtype=np.float64)
    cdef Py_ssize_t n = la.shape[0]
    if lb.shape[0] != n:
        raise ValueError("llr_a and llr_b must have equal length")
    out = np.zeros(n, dtype=np.uint8)
    if n == 0:
        return out

    cdef double sa0[64]
    cdef double sb0[64]
    cdef double sa1[64]
    cdef double sb1[64]
    cdef double metric[64]
    cdef double nxt[64]
    cdef int ns, p0, b, reg
    for ns in range(64):
        b = ns >> 5
        p0 = (ns & 31) << 1
        reg = (b << 6) | p0
        sa0[ns] = 1.0 - 2.0 * _parity(reg & 0o133)
        sb0[ns] = 1.0 - 2.0 * _parity(reg & 0o171)
        reg = (b << 6) | p0 | 1
        sa1[ns] = 1.0 - 2.0 * _parity(reg & 0o133)
        sb1[ns] = 1.0 - 2.0 * _parity(reg & 0o171)
        metric[ns] = -INFINITY
    metric[0] = 0.0

    dec_arr = np.empty((n, 64), dtype=np.uint8)
    cdef unsigned char[:, ::1] dec = dec_arr
    cdef unsigned char[::1] bits = out
    cdef Py_ssize_t t
    cdef double a, bb, m0, m1, best
    cdef int state
    with nogil:
        for t in range(n):
            a = la[t]
            bb = lb[t]
            best = -INFINITY
            for ns in range(64):
                p0 = (ns & 31) << 1
                m0 = metric[p0] + sa0[ns] * a + sb0[ns] * bb
                m1 = metric[p0 | 1] + sa1[ns] * a + sb1[ns] * bb
                if m1 > m0:
                    nxt[ns] = m1
                    dec[t, ns] = 1
                else:
                    nxt[ns] = m0
                    dec[t, ns] = 0
                if nxt[ns] > best:
                    best = nxt[ns]
            for ns in range(64):
                metric[ns] = nxt[ns] - best

        state = 0
        for t in range(n - 1, -1, -1):
            bits[t] = state >> 5
            state = ((state & 31) << 1) | dec[t, state]
    return out
