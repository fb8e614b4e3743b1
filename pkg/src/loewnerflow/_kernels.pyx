# cython: language_level=3
"""Compiled series kernels.

All sums run over the materialized slit family in the given order with
componentwise Kahan compensation. Complex arithmetic is spelled out on
real and imaginary parts so the result does not depend on how the C
compiler lowers ``double complex``.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport atan2, log, sqrt, hypot

cnp.import_array()

cdef double _FACT[6]
_FACT[:] = [1.0, 1.0, 2.0, 6.0, 24.0, 120.0]


def p_series(const double complex[::1] z, const double[::1] k,
             const double[::1] b, int order):
    """P_H derivative of the given order at every point of ``z``."""
    cdef Py_ssize_t nz = z.shape[0], nk = k.shape[0], i, j, m
    cdef double zr, zi, dr, di, den, ir, ii, pr, pi, tr, ti, c
    cdef double sr, si, cr, ci, yr, yi, vr, vi
    cdef double sign = -1.0 if order % 2 else 1.0
    out = np.empty(nz, dtype=np.complex128)
    cdef double complex[::1] o = out
    with nogil:
        for i in range(nz):
            zr = z[i].real
            zi = z[i].imag
            sr = 0.0
            si = 0.0
            cr = 0.0
            ci = 0.0
            for j in range(nk):
                dr = zr - k[j]
                di = zi
                den = dr * dr + di * di
                ir = dr / den
                ii = -di / den
                pr = ir
                pi = ii
                for m in range(order):
                    tr = pr * ir - pi * ii
                    ti = pr * ii + pi * ir
                    pr = tr
                    pi = ti
                c = 4.0 * b[j] * sign * _FACT[order]
                # Kahan, componentwise
                yr = c * pr - cr
                vr = sr + yr
                cr = (vr - sr) - yr
                sr = vr
                yi = c * pi - ci
                vi = si + yi
                ci = (vi - si) - yi
                si = vi
            if order == 0:
                sr = sr + zr
                si = si + zi
            elif order == 1:
                sr = sr + 1.0
            o[i].real = sr
            o[i].imag = si
    return out


def log_series(const double complex[::1] z, const double[::1] lam,
               const double complex[::1] coef, double complex z0):
    """Sum of coef_n * Log((z - lam_n) / (z0 - lam_n)) at every point."""
    cdef Py_ssize_t nz = z.shape[0], nl = lam.shape[0], i, j
    cdef double zr, zi, ar, ai, br, bi, den, qr, qi, lr, li
    cdef double tr, ti, sr, si, cr, ci, yr, yi, vr, vi
    cdef double z0r = z0.real, z0i = z0.imag
    out = np.empty(nz, dtype=np.complex128)
    cdef double complex[::1] o = out
    with nogil:
        for i in range(nz):
            zr = z[i].real
            zi = z[i].imag
            sr = 0.0
            si = 0.0
            cr = 0.0
            ci = 0.0
            for j in range(nl):
                ar = zr - lam[j]
                ai = zi
                br = z0r - lam[j]
                bi = z0i
                den = br * br + bi * bi
                qr = (ar * br + ai * bi) / den
                qi = (ai * br - ar * bi) / den
                lr = log(hypot(qr, qi))
                li = atan2(qi, qr)
                tr = coef[j].real * lr - coef[j].imag * li
                ti = coef[j].real * li + coef[j].imag * lr
                yr = tr - cr
                vr = sr + yr
                cr = (vr - sr) - yr
                sr = vr
                yi = ti - ci
                vi = si + yi
                ci = (vi - si) - yi
                si = vi
            o[i].real = sr
            o[i].imag = si
    return out


def loewner_rhs(double complex w, double s, const double[::1] k,
                const double[::1] b):
    """Right side of dw/dt = sum 2 b_n / (w - k_n s)."""
    cdef Py_ssize_t j, nk = k.shape[0]
    cdef double wr = w.real, wi = w.imag, dr, den
    cdef double sr = 0.0, si = 0.0, cr = 0.0, ci = 0.0, yr, yi, vr, vi
    with nogil:
        for j in range(nk):
            dr = wr - k[j] * s
            den = dr * dr + wi * wi
            yr = 2.0 * b[j] * dr / den - cr
            vr = sr + yr
            cr = (vr - sr) - yr
            sr = vr
            yi = -2.0 * b[j] * wi / den - ci
            vi = si + yi
            ci = (vi - si) - yi
            si = vi
    return complex(sr, si)
