# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: coherent-state overlaps and metric/right-hand-side
assembly.  Semantics identical to ``_ref``; see that module for the math
and the tangent-frame conventions.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport cos, exp, sin

cnp.import_array()

BACKEND = "compiled"


cdef inline double complex _cexp(double complex z) noexcept nogil:
    cdef double m = exp(z.real)
    return m * cos(z.imag) + 1j * m * sin(z.imag)


def overlap_matrix(alpha):
    cdef cnp.ndarray[cnp.complex128_t, ndim=2] al = np.ascontiguousarray(
        alpha, dtype=np.complex128)
    cdef Py_ssize_t m_count = al.shape[0], nb = al.shape[1]
    cdef cnp.ndarray[cnp.complex128_t, ndim=2] s = np.empty(
        (m_count, m_count), dtype=np.complex128)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] half = np.empty(m_count)
    cdef Py_ssize_t m, n, k
    cdef double acc
    cdef double complex cross, val
    with nogil:
        for m in range(m_count):
            acc = 0.0
            for k in range(nb):
                acc += al[m, k].real * al[m, k].real + al[m, k].imag * al[m, k].imag
            half[m] = 0.5 * acc
        for m in range(m_count):
            s[m, m] = 1.0
            for n in range(m + 1, m_count):
                cross = 0.0
                for k in range(nb):
                    cross += al[m, k].conjugate() * al[n, k]
                val = _cexp(cross - half[m] - half[n])
                s[m, n] = val
                s[n, m] = val.conjugate()
    return s


def assemble_system(amps, alpha, smat, hsys, omega, coup_dag, coup):
    cdef cnp.ndarray[cnp.complex128_t, ndim=2] a = np.ascontiguousarray(
        amps, dtype=np.complex128)
    cdef cnp.ndarray[cnp.complex128_t, ndim=2] al = np.ascontiguousarray(
        alpha, dtype=np.complex128)
    cdef cnp.ndarray[cnp.complex128_t, ndim=2] s = np.ascontiguousarray(
        smat, dtype=np.complex128)
    cdef cnp.ndarray[cnp.complex128_t, ndim=2] hs = np.ascontiguousarray(
        hsys, dtype=np.complex128)
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] om = np.ascontiguousarray(
        omega, dtype=np.complex128)
    cdef cnp.ndarray[cnp.complex128_t, ndim=3] cd = np.ascontiguousarray(
        coup_dag, dtype=np.complex128)
    cdef cnp.ndarray[cnp.complex128_t, ndim=3] cb = np.ascontiguousarray(
        coup, dtype=np.complex128)

    cdef Py_ssize_t mm = a.shape[0], ns = a.shape[1], nb = al.shape[1]
    cdef Py_ssize_t na = mm * ns, p = mm * (ns + nb)

    cdef cnp.ndarray[cnp.complex128_t, ndim=2] t = np.zeros((p, p), dtype=np.complex128)
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] h = np.zeros(p, dtype=np.complex128)

    cdef cnp.ndarray[cnp.complex128_t, ndim=2] w = np.empty((mm, mm), dtype=np.complex128)
    cdef cnp.ndarray[cnp.complex128_t, ndim=2] b = np.empty((mm, mm), dtype=np.complex128)
    cdef cnp.ndarray[cnp.complex128_t, ndim=3] gd = np.zeros((mm, ns, ns), dtype=np.complex128)
    cdef cnp.ndarray[cnp.complex128_t, ndim=3] gk = np.zeros((mm, ns, ns), dtype=np.complex128)
    cdef cnp.ndarray[cnp.complex128_t, ndim=2] ph = np.empty((mm, mm), dtype=np.complex128)

    cdef Py_ssize_t m, n, i, j, k, si, sj, row, col
    cdef double complex acc, e_ij, smn, wsmn, betj, kapk, qj, amc

    with nogil:
        for m in range(mm):
            for n in range(mm):
                acc = 0.0
                for si in range(ns):
                    acc += a[m, si].conjugate() * a[n, si]
                w[m, n] = acc
                acc = 0.0
                for k in range(nb):
                    acc += al[m, k].conjugate() * om[k] * al[n, k]
                b[m, n] = acc
        for m in range(mm):
            for k in range(nb):
                for si in range(ns):
                    for sj in range(ns):
                        gd[m, si, sj] = gd[m, si, sj] + al[m, k].conjugate() * cd[k, si, sj]
                        gk[m, si, sj] = gk[m, si, sj] + al[m, k] * cb[k, si, sj]

        # ph[m,n] = sum_ij conj(A[m,i]) E[m,n,i,j] A[n,j]
        # h (amplitude rows) accumulated in the same sweep
        for m in range(mm):
            for n in range(mm):
                smn = s[m, n]
                acc = 0.0
                for si in range(ns):
                    for sj in range(ns):
                        e_ij = hs[si, sj] + gd[m, si, sj] + gk[n, si, sj]
                        if si == sj:
                            e_ij = e_ij + b[m, n]
                        acc += a[m, si].conjugate() * e_ij * a[n, sj]
                        h[m * ns + si] = h[m * ns + si] + smn * e_ij * a[n, sj]
                ph[m, n] = acc

        # metric blocks (holomorphic tangent frame: no normalization terms)
        for m in range(mm):
            for n in range(mm):
                smn = s[m, n]
                wsmn = w[m, n] * smn
                for si in range(ns):
                    t[m * ns + si, n * ns + si] = smn
                for si in range(ns):
                    row = m * ns + si
                    for k in range(nb):
                        kapk = al[m, k].conjugate()
                        t[row, na + n * nb + k] = smn * a[n, si] * kapk
                for j in range(nb):
                    row = na + m * nb + j
                    betj = al[n, j]
                    for si in range(ns):
                        amc = a[m, si].conjugate()
                        t[row, n * ns + si] = smn * amc * betj
                    for k in range(nb):
                        kapk = al[m, k].conjugate()
                        acc = wsmn * betj * kapk
                        if j == k:
                            acc += wsmn
                        t[row, na + n * nb + k] = acc

        # h (displacement rows)
        for m in range(mm):
            for j in range(nb):
                row = na + m * nb + j
                acc = 0.0
                for n in range(mm):
                    smn = s[m, n]
                    betj = al[n, j]
                    qj = 0.0
                    for si in range(ns):
                        amc = a[m, si].conjugate()
                        for sj in range(ns):
                            qj += amc * cd[j, si, sj] * a[n, sj]
                    acc += smn * (ph[m, n] * betj + w[m, n] * om[j] * al[n, j] + qj)
                h[row] = acc
    return t, h
