# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops of batched tomographic reconstruction.

Every function takes a leading batch axis (one row per Monte-Carlo resample)
and mirrors the numpy implementation in ``_pykernels`` exactly.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport log2, fmax

cnp.import_array()


def assemble_density(const double[:, ::1] expect, const double complex[:, :, ::1] basis):
    """rho[b] = (I + sum_s expect[b, s] * basis[s]) / d

    Pauli strings have one nonzero entry per row; when every basis matrix is
    like that, only those entries are visited.
    """
    cdef Py_ssize_t nb = expect.shape[0], ns = expect.shape[1], d = basis.shape[1]
    cdef Py_ssize_t b, s, i, j, k
    cdef double inv_d = 1.0 / d
    cdef double e
    out = np.zeros((nb, d, d), dtype=np.complex128)
    cdef double complex[:, :, ::1] o = out
    cdef Py_ssize_t[:, ::1] col = np.full((ns, d), -1, dtype=np.intp)
    cdef double complex[:, ::1] val = np.zeros((ns, d), dtype=np.complex128)
    cdef bint sparse = True
    for s in range(ns):
        for i in range(d):
            k = 0
            for j in range(d):
                if basis[s, i, j] != 0:
                    k += 1
                    col[s, i] = j
                    val[s, i] = basis[s, i, j]
            if k > 1:
                sparse = False
    for b in range(nb):
        for i in range(d):
            o[b, i, i] = inv_d
        for s in range(ns):
            e = expect[b, s] * inv_d
            if sparse:
                for i in range(d):
                    j = col[s, i]
                    if j >= 0:
                        o[b, i, j] = o[b, i, j] + e * val[s, i]
            else:
                for i in range(d):
                    for j in range(d):
                        o[b, i, j] = o[b, i, j] + e * basis[s, i, j]
    return out


def project_spectrum(const double[:, ::1] w):
    """Euclidean projection of each row onto the probability simplex."""
    cdef Py_ssize_t nb = w.shape[0], d = w.shape[1]
    cdef Py_ssize_t b, j, rho
    cdef double csum, theta, t
    out = np.empty((nb, d), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef double[::1] u = np.empty(d, dtype=np.float64)
    for b in range(nb):
        # insertion sort, descending; d <= 8
        for j in range(d):
            t = w[b, j]
            rho = j
            while rho > 0 and u[rho - 1] < t:
                u[rho] = u[rho - 1]
                rho -= 1
            u[rho] = t
        csum = 0.0
        theta = 0.0
        for j in range(d):
            csum += u[j]
            t = (csum - 1.0) / (j + 1)
            if u[j] - t > 0:
                theta = t
        for j in range(d):
            o[b, j] = fmax(w[b, j] - theta, 0.0)
    return out


def entropy_bits(const double[:, ::1] p):
    """Shannon entropy in bits of each row, 0 log 0 = 0."""
    cdef Py_ssize_t nb = p.shape[0], d = p.shape[1]
    cdef Py_ssize_t b, j
    cdef double acc, x
    out = np.empty(nb, dtype=np.float64)
    cdef double[::1] o = out
    for b in range(nb):
        acc = 0.0
        for j in range(d):
            x = p[b, j]
            if x > 0:
                acc -= x * log2(x)
        o[b] = fmax(acc, 0.0)
    return out


def pure_overlap(const double[:, ::1] w, const double complex[:, :, ::1] v, const double complex[::1] psi):
    """sum_k w[b, k] |<psi|v[b, :, k]>|^2 for eigen-decomposed states."""
    cdef Py_ssize_t nb = w.shape[0], d = w.shape[1]
    cdef Py_ssize_t b, k, i
    cdef double complex amp
    cdef double acc
    out = np.empty(nb, dtype=np.float64)
    cdef double[::1] o = out
    for b in range(nb):
        acc = 0.0
        for k in range(d):
            amp = 0.0
            for i in range(d):
                amp = amp + psi[i].conjugate() * v[b, i, k]
            acc += w[b, k] * (amp.real * amp.real + amp.imag * amp.imag)
        o[b] = acc
    return out
