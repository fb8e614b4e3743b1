"""Pure NumPy versions of the series kernels.

Same contracts as the compiled module. For many points the Kahan loop runs
over the slit axis, vectorized over points; for a few points each sum is
exactly rounded with ``math.fsum``.
"""
import math

import numpy as np

_FACT = (1.0, 1.0, 2.0, 6.0, 24.0, 120.0)


def _kahan_columns(terms):
    if terms.shape[0] <= 8:
        # few points: exactly rounded sums in C beat a Python-level loop over slits
        return np.array([complex(math.fsum(row.real), math.fsum(row.imag)) for row in terms],
                        dtype=np.complex128)
    s = np.zeros(terms.shape[0], dtype=np.complex128)
    c = np.zeros_like(s)
    for j in range(terms.shape[1]):
        y = terms[:, j] - c
        v = s + y
        c = (v - s) - y
        s = v
    return s


def p_series(z, k, b, order):
    z = np.asarray(z, dtype=np.complex128)
    k = np.asarray(k, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    inv = 1.0 / (z[:, None] - k[None, :])
    sign = -1.0 if order % 2 else 1.0
    terms = (4.0 * sign * _FACT[order]) * b[None, :] * inv ** (order + 1)
    s = _kahan_columns(terms)
    if order == 0:
        s = s + z
    elif order == 1:
        s = s + 1.0
    return s


def log_series(z, lam, coef, z0):
    z = np.asarray(z, dtype=np.complex128)
    lam = np.asarray(lam, dtype=np.float64)
    coef = np.asarray(coef, dtype=np.complex128)
    q = (z[:, None] - lam[None, :]) / (z0 - lam[None, :])
    terms = coef[None, :] * np.log(q)
    return _kahan_columns(terms)


def loewner_rhs(w, s, k, b):
    d = w - np.asarray(k) * s
    terms = 2.0 * np.asarray(b) / d
    re = math.fsum(terms.real)
    im = math.fsum(terms.imag)
    return complex(re, im)
