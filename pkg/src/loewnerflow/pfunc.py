"""The auxiliary function P(z) = z + sum 4 b_n / (z - k_n) and its derivatives."""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .config import SlitFamily

MAX_ORDER = 5
POLE_RTOL = 1e-12


class PoleProximityError(ValueError):
    """Evaluation requested at (or within machine distance of) a driving point."""


@dataclass(frozen=True)
class PEvaluation:
    value: complex
    tail_bound: float
    order: int


def _check_poles(z: np.ndarray, k: np.ndarray) -> None:
    n = len(k)
    if n == 0:
        return
    if z.size <= 4:
        for zz in z.tolist():
            j = bisect.bisect_left(k, zz.real) if n > 1 else 0
            for kk in (k[max(j - 1, 0)], k[min(j, n - 1)]):
                if abs(zz - kk) < POLE_RTOL * max(1.0, abs(kk)):
                    raise PoleProximityError(f"z={zz} lies within machine distance of a pole")
        return
    idx = np.clip(np.searchsorted(k, z.real), 1, n - 1) if n > 1 else np.zeros(z.shape, dtype=int)
    for j in (idx - 1, idx):
        kk = k[j]
        bad = np.abs(z - kk) < POLE_RTOL * np.maximum(1.0, np.abs(kk))
        if np.any(bad):
            raise PoleProximityError(f"z={z[bad][0]} lies within machine distance of a pole")


def tail_bound(family: SlitFamily, z: complex, order: int, N: int | None = None) -> float:
    """Bound on the dropped tail of the order-th derivative series at z."""
    tw = family.tail_weight(N)
    if tw == 0.0:
        return 0.0
    dist = family.tail_distance(complex(z), N)
    if dist <= 0:
        return math.inf
    return 4.0 * tw * math.factorial(order) / dist ** (order + 1)


def eval_P_array(family: SlitFamily, z, order: int = 0, N: int | None = None) -> np.ndarray:
    """Vectorized values of the order-th derivative (no tail bound)."""
    if not 0 <= order <= MAX_ORDER:
        raise ValueError(f"derivative order must be in 0..{MAX_ORDER}")
    k, b = family.arrays(N)
    z = np.atleast_1d(np.asarray(z, dtype=np.complex128))
    _check_poles(z, k)
    return kernels.p_series(z, k, b, order)


def eval_P(family: SlitFamily, z: complex, order: int = 0, N: int | None = None) -> PEvaluation:
    """Evaluate the order-th derivative of P at a single point.

    Parameters
    ----------
    family : SlitFamily
    z : complex
        Evaluation point, off the driving points.
    order : int
        Derivative order, 0 to 5.
    N : int, optional
        Truncation for parametric families; defaults to ``family.N``.

    Returns
    -------
    PEvaluation
        Value of the truncated series and a bound on the dropped tail.
    """
    value = complex(eval_P_array(family, [z], order, N)[0])
    return PEvaluation(value, tail_bound(family, z, order, N), order)


def P_real(family: SlitFamily, x: float, order: int = 0, N: int | None = None) -> float:
    """Real value of the order-th derivative at a real point."""
    return complex(eval_P_array(family, [complex(x, 0.0)], order, N)[0]).real


def eval_FHG(family: SlitFamily, z: complex, kind: str, params, side: str = "direct",
             N: int | None = None) -> complex:
    """Quotients of P by quadratic factors and their partial-fraction forms.

    ``kind`` is ``"F"`` with ``params = w``, ``"H"`` with
    ``params = (lam1, lam2)`` or ``"G"`` with ``params = lam``.
    ``side="direct"`` returns the quotient itself, ``side="decomposed"``
    returns the expansion in simple fractions.
    """
    z = complex(z)
    if kind == "F":
        a1 = complex(params)
        a2 = a1.conjugate()
    elif kind == "H":
        a1, a2 = (complex(p) for p in params)
        if a1 == a2:
            raise ValueError("H needs distinct lambda_1 and lambda_2")
    elif kind == "G":
        a1 = a2 = complex(params)
    else:
        raise ValueError(f"unknown kind {kind!r}")
    if z == a1 or z == a2:
        raise ValueError("z must differ from the parameters")
    if kind == "F" and a1 == a2:
        raise ValueError("F needs a non-real w")

    P = lambda u, o=0: complex(eval_P_array(family, [u], o, N)[0])  # noqa: E731
    if side == "direct":
        return P(z) / ((z - a1) * (z - a2))
    if side != "decomposed":
        raise ValueError(f"unknown side {side!r}")

    k, b = family.arrays(N)
    _check_poles(np.array([a1, a2]), k)
    if kind == "F":
        weights = b / np.abs(a1 - k) ** 2
        tail_sum = complex(kernels.p_series(np.array([z]), k, weights, 0)[0]) - z
    else:
        terms = 4.0 * b / ((z - k) * (a1 - k) * (a2 - k))
        tail_sum = complex(math.fsum(terms.real), math.fsum(terms.imag))
    if kind == "G":
        return P(a1, 1) / (z - a1) + P(a1) / (z - a1) ** 2 + tail_sum
    return (P(a1) / (z - a1) - P(a2) / (z - a2)) / (a1 - a2) + tail_sum
