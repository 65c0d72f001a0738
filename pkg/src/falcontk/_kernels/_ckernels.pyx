# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled convolution kernels.

Same contract as ``_pykernels``: fixed reduction order per output element
(i, j, m for standard convolution), zero-padded taps executed as multiply
by zero, and a returned multiply-add count.
"""
import numpy as np


def conv2d(const double[:, :, ::1] I, const double[:, :, :, ::1] K,
           Py_ssize_t s, Py_ssize_t p, Py_ssize_t Ho, Py_ssize_t Wo):
    cdef Py_ssize_t H = I.shape[0], W = I.shape[1]
    cdef Py_ssize_t D = K.shape[0], M = K.shape[2], N = K.shape[3]
    out_arr = np.zeros((Ho, Wo, N))
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t ho, wo, i, j, m, n, h, w
    cdef double x
    cdef bint inside
    cdef long long macs = 0
    with nogil:
        for ho in range(Ho):
            for wo in range(Wo):
                for i in range(D):
                    h = ho * s + i - p
                    for j in range(D):
                        w = wo * s + j - p
                        inside = 0 <= h < H and 0 <= w < W
                        for m in range(M):
                            if inside:
                                x = I[h, w, m]
                            else:
                                x = 0.0
                            for n in range(N):
                                out[ho, wo, n] = out[ho, wo, n] + K[i, j, m, n] * x
                            macs += N
    return out_arr, macs


def depthwise(const double[:, :, ::1] I, const double[:, :, ::1] Dk,
              Py_ssize_t s, Py_ssize_t p, Py_ssize_t Ho, Py_ssize_t Wo):
    cdef Py_ssize_t H = I.shape[0], W = I.shape[1], C = I.shape[2]
    cdef Py_ssize_t D = Dk.shape[0]
    out_arr = np.zeros((Ho, Wo, C))
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t ho, wo, i, j, c, h, w
    cdef bint inside
    cdef long long macs = 0
    with nogil:
        for ho in range(Ho):
            for wo in range(Wo):
                for i in range(D):
                    h = ho * s + i - p
                    for j in range(D):
                        w = wo * s + j - p
                        inside = 0 <= h < H and 0 <= w < W
                        for c in range(C):
                            if inside:
                                out[ho, wo, c] = out[ho, wo, c] + Dk[i, j, c] * I[h, w, c]
                            else:
                                out[ho, wo, c] = out[ho, wo, c] + Dk[i, j, c] * 0.0
                        macs += C
    return out_arr, macs


def pointwise(const double[:, :, ::1] I, const double[:, ::1] P):
    cdef Py_ssize_t H = I.shape[0], W = I.shape[1], M = I.shape[2]
    cdef Py_ssize_t N = P.shape[1]
    out_arr = np.zeros((H, W, N))
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t h, w, m, n
    cdef double x
    cdef long long macs = 0
    with nogil:
        for h in range(H):
            for w in range(W):
                for m in range(M):
                    x = I[h, w, m]
                    for n in range(N):
                        out[h, w, n] = out[h, w, n] + P[m, n] * x
                    macs += N
    return out_arr, macs
