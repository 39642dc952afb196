# cython: language_level=3
"""Compiled atom-pair kernels."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sin, cos, fabs
from libcpp.vector cimport vector
from libc.stdint cimport int64_t

cnp.import_array()

DEF TAYLOR_CUT = 1e-4
# dense accumulation when the code range is at most this many slots per pair
DEF DENSE_RATIO = 8
DEF DENSE_MAX = 1 << 26


cdef inline double _sinc(double x) noexcept nogil:
    cdef double x2
    if fabs(x) < TAYLOR_CUT:
        x2 = x * x
        return 1.0 - x2 / 6.0 + x2 * x2 / 120.0
    return sin(x) / x


cdef inline void _pair(double hbar, int mode, double theta, double complex a, double complex b,
                       double* vr, double* vi) noexcept nogil:
    cdef double h, fr, fi, pr, pi
    if mode == 0:
        h = 0.5 * hbar * theta
        fr = cos(h)
        fi = sin(h)
    elif mode == 1:
        fr = theta * _sinc(0.5 * hbar * theta)
        fi = 0.0
    else:
        fr = _sinc(0.5 * hbar * theta)
        fi = 0.0
    pr = a.real * b.real - a.imag * b.imag
    pi = a.real * b.imag + a.imag * b.real
    vr[0] = pr * fr - pi * fi
    vi[0] = pr * fi + pi * fr


def combine(const int64_t[::1] codeF, const double[:, ::1] aF,
            const double[:, ::1] qF, const double complex[::1] cF,
            const int64_t[::1] codeG, const double[:, ::1] aG,
            const double[:, ::1] qG, const double complex[::1] cG,
            double hbar, int mode):
    """Sum c_F c_G f(theta) over all pairs, merged by ``codeF[i] + codeG[j]``.

    Codes go to a dense array when their range is small next to the number
    of pairs; otherwise pairs are sorted by code and merged. The result is sorted by code.
    """
    cdef Py_ssize_t nF = codeF.shape[0], nG = codeG.shape[0]
    cdef Py_ssize_t l = aF.shape[1] if nF > 0 else 0
    cdef Py_ssize_t i, j, d, slot, n, k
    cdef double theta, vr, vi
    cdef int64_t lo, span, loF, hiF, loG, hiG
    cdef vector[double] acc_re
    cdef vector[double] acc_im
    cdef vector[char] seen
    cdef int64_t[::1] cv
    cdef double complex[::1] vv

    if mode < 0 or mode > 2:
        raise ValueError(f"unknown kernel mode {mode}")
    if nF == 0 or nG == 0:
        return np.empty(0, np.int64), np.empty(0, complex)

    loF = hiF = codeF[0]
    for i in range(1, nF):
        loF = min(loF, codeF[i])
        hiF = max(hiF, codeF[i])
    loG = hiG = codeG[0]
    for j in range(1, nG):
        loG = min(loG, codeG[j])
        hiG = max(hiG, codeG[j])
    lo = loF + loG
    span = hiF + hiG - lo + 1

    if span <= DENSE_RATIO * nF * nG + 4096 and span <= DENSE_MAX:
        acc_re.resize(span, 0.0)
        acc_im.resize(span, 0.0)
        seen.resize(span, 0)
        with nogil:
            for i in range(nF):
                for j in range(nG):
                    theta = 0.0
                    for d in range(l):
                        theta = theta + (aF[i, d] * qG[j, d] - qF[i, d] * aG[j, d])
                    _pair(hbar, mode, theta, cF[i], cG[j], &vr, &vi)
                    slot = codeF[i] + codeG[j] - lo
                    acc_re[slot] += vr
                    acc_im[slot] += vi
                    seen[slot] = 1
        n = 0
        for slot in range(span):
            n += seen[slot]
        codes = np.empty(n, np.int64)
        vals = np.empty(n, complex)
        cv = codes
        vv = vals
        k = 0
        for slot in range(span):
            if seen[slot]:
                cv[k] = slot + lo
                vv[k].real = acc_re[slot]
                vv[k].imag = acc_im[slot]
                k += 1
        return codes, vals

    # sparse codes: evaluate every pair, sort by code, merge equal runs
    pk = np.empty(nF * nG, np.int64)
    pv = np.empty(nF * nG, complex)
    cv = pk
    vv = pv
    with nogil:
        k = 0
        for i in range(nF):
            for j in range(nG):
                theta = 0.0
                for d in range(l):
                    theta = theta + (aF[i, d] * qG[j, d] - qF[i, d] * aG[j, d])
                _pair(hbar, mode, theta, cF[i], cG[j], &vr, &vi)
                cv[k] = codeF[i] + codeG[j]
                vv[k].real = vr
                vv[k].imag = vi
                k += 1
    order = np.argsort(pk, kind="stable")
    pk = pk[order]
    pv = pv[order]
    cv = pk
    vv = pv
    with nogil:
        n = 0
        for k in range(nF * nG):
            if k > 0 and cv[k] == cv[n - 1]:
                vv[n - 1] = vv[n - 1] + vv[k]
            else:
                cv[n] = cv[k]
                vv[n] = vv[k]
                n += 1
    return pk[:n].copy(), pv[:n].copy()
