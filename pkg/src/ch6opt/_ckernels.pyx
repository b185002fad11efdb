# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled fused pointwise kernels; see ``_pykernels`` for the reference."""

import numpy as np
cimport numpy as cnp

cnp.import_array()

NAME = "cython"


def poly_derivs(const double[::1] c, const double[::1] x, int nder):
    cdef Py_ssize_t n = x.shape[0], nc = c.shape[0], i, j, m
    cdef double[:, ::1] out = np.zeros((nder + 1, n))
    cdef double[::1] cm = np.zeros(nc)
    cdef double acc, fac, xi
    cdef Py_ssize_t ncm
    for m in range(nder + 1):
        ncm = nc - m
        if ncm <= 0:
            continue
        for i in range(m, nc):
            fac = 1.0
            for j in range(i - m + 1, i + 1):
                fac *= j
            cm[i - m] = c[i] * fac
        for j in range(n):
            xi = x[j]
            acc = cm[ncm - 1]
            for i in range(ncm - 2, -1, -1):
                acc = acc * xi + cm[i]
            out[m, j] = acc
    return np.asarray(out)


def state_terms(const double[::1] fc, double nu, const double[::1] phi, const double[::1] lap_phi):
    cdef Py_ssize_t n = phi.shape[0], nc = fc.shape[0], i, j
    cdef double[::1] fv = np.empty(n)
    cdef double[::1] b = np.empty(n)
    cdef double x, p, dp
    for j in range(n):
        x = phi[j]
        p = fc[nc - 1]
        dp = 0.0
        for i in range(nc - 2, -1, -1):
            dp = dp * x + p
            p = p * x + fc[i]
        fv[j] = p
        b[j] = (dp + nu) * (p - lap_phi[j])
    return np.asarray(fv), np.asarray(b)


def frozen_terms(const double[::1] fc, const double[::1] phi, const double[::1] lap_phi):
    cdef Py_ssize_t n = phi.shape[0], nc = fc.shape[0], i, j
    cdef double[::1] zeta = np.empty(n)
    cdef double[::1] xi = np.empty(n)
    cdef double x, p, dp, d2p
    for j in range(n):
        x = phi[j]
        p = fc[nc - 1]
        dp = 0.0
        d2p = 0.0
        for i in range(nc - 2, -1, -1):
            d2p = d2p * x + 2.0 * dp
            dp = dp * x + p
            p = p * x + fc[i]
        zeta[j] = dp
        xi[j] = d2p * (p - lap_phi[j])
    return np.asarray(zeta), np.asarray(xi)


def lin_terms(double nu, const double[::1] zeta, const double[::1] xi,
              const double[::1] psi, const double[::1] lap_psi):
    cdef Py_ssize_t n = psi.shape[0], j
    cdef double[::1] a = np.empty(n)
    cdef double[::1] b = np.empty(n)
    cdef double t
    for j in range(n):
        t = zeta[j] * psi[j]
        a[j] = t
        b[j] = xi[j] * psi[j] + (zeta[j] + nu) * (t - lap_psi[j])
    return np.asarray(a), np.asarray(b)


def adj_terms(double nu, const double[::1] zeta, const double[::1] xi,
              const double[::1] q, const double[::1] bilap_p):
    cdef Py_ssize_t n = q.shape[0], j
    cdef double[::1] a = np.empty(n)
    cdef double[::1] r = np.empty(n)
    cdef double[::1] b = np.empty(n)
    cdef double t, rr
    for j in range(n):
        t = (zeta[j] + nu) * q[j]
        rr = bilap_p[j] + t
        a[j] = t
        r[j] = rr
        b[j] = -zeta[j] * rr - xi[j] * q[j]
    return np.asarray(a), np.asarray(r), np.asarray(b)


def imex_update(const double[::1] x, const double[::1] expl, const double[::1] src,
                const double[::1] shift, const double[::1] inv_denom, double dt):
    cdef Py_ssize_t n = x.shape[0], j
    cdef double[::1] out = np.empty(n)
    for j in range(n):
        out[j] = (x[j] + dt * (src[j] + expl[j] + shift[j] * x[j])) * inv_denom[j]
    return np.asarray(out)
