# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels; see ``_pykernels`` for the reference semantics."""

from libc.math cimport log
from libc.stdlib cimport malloc, free
from libc.stdint cimport int64_t

import numpy as np

cdef double DENSITY_FLOOR = 1e-300
cdef double GRADIENT_FLOOR = 1e-10


cdef void _sort_desc(double* u, Py_ssize_t n) noexcept nogil:
    # insertion sort: simplex blocks are short
    cdef Py_ssize_t i, j
    cdef double v
    for i in range(1, n):
        v = u[i]
        j = i - 1
        while j >= 0 and u[j] < v:
            u[j + 1] = u[j]
            j -= 1
        u[j + 1] = v


def project_blocks(const double[::1] x, const int64_t[::1] offsets,
                   const int64_t[::1] sizes, double[::1] out):
    cdef Py_ssize_t nb = offsets.shape[0]
    cdef Py_ssize_t b, i, n, off, rho, maxn = 0
    cdef double css, lam, css_rho, v
    for b in range(nb):
        if sizes[b] > maxn:
            maxn = sizes[b]
    cdef double* u = <double*> malloc(maxn * sizeof(double))
    if u == NULL:
        raise MemoryError()
    try:
        with nogil:
            for b in range(nb):
                off = offsets[b]
                n = sizes[b]
                for i in range(n):
                    u[i] = x[off + i]
                _sort_desc(u, n)
                css = 0.0
                rho = 1
                css_rho = u[0]
                for i in range(n):
                    css = css + u[i]
                    if u[i] + (1.0 - css) / (i + 1) > 0:
                        rho = i + 1
                        css_rho = css
                lam = (1.0 - css_rho) / rho
                for i in range(n):
                    v = x[off + i] + lam
                    out[off + i] = v if v > 0 else 0.0
    finally:
        free(u)
    return np.asarray(out)


def component_densities(const int64_t[:, ::1] codes, const double[:, ::1] pi):
    cdef Py_ssize_t K = pi.shape[0], P = codes.shape[0], d = codes.shape[1]
    cdef Py_ssize_t k, i, j
    cdef double prod
    res = np.empty((K, P))
    cdef double[:, ::1] f = res
    with nogil:
        for k in range(K):
            for i in range(P):
                prod = 1.0
                for j in range(d):
                    prod = prod * pi[k, codes[i, j]]
                f[k, i] = prod
    return res


def loglik(const int64_t[:, ::1] codes, const double[::1] counts,
           const double[::1] eta, const double[:, ::1] pi):
    cdef Py_ssize_t K = pi.shape[0], P = codes.shape[0], d = codes.shape[1]
    cdef Py_ssize_t k, i, j
    cdef double prod, mix, total = 0.0
    with nogil:
        for i in range(P):
            mix = 0.0
            for k in range(K):
                prod = eta[k]
                for j in range(d):
                    prod = prod * pi[k, codes[i, j]]
                mix = mix + prod
            if mix < DENSITY_FLOOR:
                mix = DENSITY_FLOOR
            total = total + counts[i] * log(mix)
    return total


def loglik_grad(const int64_t[:, ::1] codes, const double[::1] counts,
                const double[::1] eta, const double[:, ::1] pi,
                double[::1] grad_eta, double[:, ::1] grad_pi):
    cdef Py_ssize_t K = pi.shape[0], C = pi.shape[1]
    cdef Py_ssize_t P = codes.shape[0], d = codes.shape[1]
    cdef Py_ssize_t k, i, j
    cdef double mix, w, scale, total = 0.0
    cdef double* f = <double*> malloc(K * sizeof(double))
    cdef double* pre = <double*> malloc(K * (d + 1) * sizeof(double))
    cdef double* suf = <double*> malloc(K * (d + 1) * sizeof(double))
    if f == NULL or pre == NULL or suf == NULL:
        free(f); free(pre); free(suf)
        raise MemoryError()
    try:
        with nogil:
            for k in range(K):
                grad_eta[k] = 0.0
                for j in range(C):
                    grad_pi[k, j] = 0.0
            for i in range(P):
                mix = 0.0
                for k in range(K):
                    # pre[j] = prod of factors < j, suf[j] = prod of factors >= j
                    pre[k * (d + 1)] = 1.0
                    suf[k * (d + 1) + d] = 1.0
                    for j in range(d):
                        pre[k * (d + 1) + j + 1] = pre[k * (d + 1) + j] * pi[k, codes[i, j]]
                    for j in range(d - 1, -1, -1):
                        suf[k * (d + 1) + j] = suf[k * (d + 1) + j + 1] * pi[k, codes[i, j]]
                    f[k] = pre[k * (d + 1) + d]
                    mix = mix + eta[k] * f[k]
                total = total + counts[i] * log(mix if mix > DENSITY_FLOOR else DENSITY_FLOOR)
                w = counts[i] / (mix if mix > GRADIENT_FLOOR else GRADIENT_FLOOR)
                for k in range(K):
                    grad_eta[k] = grad_eta[k] + w * f[k]
                    scale = w * eta[k]
                    for j in range(d):
                        grad_pi[k, codes[i, j]] = grad_pi[k, codes[i, j]] + scale * pre[k * (d + 1) + j] * suf[k * (d + 1) + j + 1]
    finally:
        free(f); free(pre); free(suf)
    return total
