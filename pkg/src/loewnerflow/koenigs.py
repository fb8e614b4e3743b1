"""Koenigs maps h conjugating the flow to a linear action.

All four cases share one log-coordinate ``phi`` with ``phi' = c / P``:

* complex pair: ``c = P'(beta)`` and ``h = exp(phi)``;
* distinct real roots: ``c = -P'(rho1)`` and ``h = exp(phi)``;
* double or triple root: ``c = 1`` and ``h = phi``.

Fractional powers are ``exp(p * Log w)`` with the principal logarithm, and
every standard-root factor enters through ``Log((z - lam) / (z0 - lam))``.
Boundary points are evaluated as ``complex(x, +0.0)`` so that negative reals
carry argument pi.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .pfunc import eval_P_array
from .roots import PartialFraction, RootClassification, partial_fraction

MULTIPLICATIVE = ("ComplexPair", "DistinctReal")


class BranchHazard(ValueError):
    """Boundary evaluation at a logarithmic branch point."""


def _log(z):
    return np.log(np.asarray(z, dtype=np.complex128))


@dataclass
class KoenigsMap:
    """Case-specific Koenigs map with integration constant zero.

    Parameters
    ----------
    classification : RootClassification
    pf : PartialFraction, optional
        Computed from the classification when omitted.
    z0 : complex
        Base point of the logarithmic series; any point of the upper half-plane.
    """

    classification: RootClassification
    pf: PartialFraction | None = None
    z0: complex = 1j
    gauge: complex = field(init=False, default=0j)

    def __post_init__(self):
        if self.pf is None:
            self.pf = partial_fraction(self.classification)
        self.z0 = complex(self.z0)
        if not self.z0.imag > 0:
            raise ValueError("z0 must lie in the upper half-plane")
        pf = self.pf
        self.case = pf.case
        self.family = self.classification.family
        self.N = self.classification.N
        lam = pf.lam
        if self.case == "ComplexPair":
            self.c = complex(pf.dP_beta)
            self._coef = -np.exp(1j * pf.psi) * pf.a
        elif self.case == "DistinctReal":
            self.c = complex(-self.classification.case.dP1)
            self._coef = pf.a.astype(np.complex128)
        else:
            self.c = 1.0 + 0j
            self._coef = pf.A.astype(np.complex128)
        self._lam = np.ascontiguousarray(lam, dtype=np.float64)
        self.gauge = self._gauge()

    # ----- core evaluation ------------------------------------------------
    @property
    def multiplicative(self) -> bool:
        return self.case in MULTIPLICATIVE

    def phi(self, z):
        """Log-coordinate with ``phi' = c / P`` (raw gauge)."""
        z = np.atleast_1d(np.asarray(z, dtype=np.complex128))
        pf = self.pf
        out = kernels.log_series(z, self._lam, self._coef, self.z0)
        if self.case == "ComplexPair":
            b = pf.beta
            out = out + _log((z - b) / (self.z0 - b)) \
                + np.exp(2j * pf.psi) * _log((z - b.conjugate()) / (self.z0 - b.conjugate()))
        elif self.case == "DistinctReal":
            out = out + pf.b_exp * _log(z - pf.rho2) - _log(z - pf.rho1)
        else:
            u = z - pf.rho0
            out = out + pf.A0 * _log(u) - pf.B / u
            if self.case == "TripleRoot":
                out = out - pf.L / (2.0 * u * u)
        return out

    def _gauge(self) -> complex:
        pf = self.pf
        if self.case == "DistinctReal":
            # K = lim (z - rho1) h(z); rotate so that arg K = pi
            r = complex(pf.rho1, 0.0)
            logK = complex(kernels.log_series(np.array([r]), self._lam, self._coef, self.z0)[0]) \
                + pf.b_exp * complex(_log(r - pf.rho2))
            return 1j * (math.pi - logK.imag)
        if self.case in ("DoubleRoot", "TripleRoot"):
            # drop the Arg(z0 - lam) offsets so Im h is sum A Arg(x - lam) + A0 Arg(x - rho0)
            return 1j * math.fsum(float(A) * math.atan2(self.z0.imag, self.z0.real - lam)
                                  for A, lam in zip(self.pf.A, self._lam))
        return 0j

    def eval_h(self, z, normalized: bool = False):
        """Values of h at points of the closed upper half-plane."""
        with np.errstate(divide="ignore", invalid="ignore"):
            p = self.phi(z)
        if normalized:
            p = p + self.gauge
        return np.exp(p) if self.multiplicative else p

    def eval_h_prime(self, z, normalized: bool = False):
        """h' from the logarithmic-derivative identity ``h' P = c h`` (or ``h' P = 1``)."""
        z = np.atleast_1d(np.asarray(z, dtype=np.complex128))
        P = eval_P_array(self.family, z, 0, self.N)
        if not self.multiplicative:
            return 1.0 / P
        with np.errstate(divide="ignore", invalid="ignore"):
            out = self.c * self.eval_h(z, normalized) / P
        if self.case == "ComplexPair":
            # removable point: h(beta) = 0, h'(beta) = exp(phi - Log(z - beta)) / (z0 - beta)
            b = self.pf.beta
            at = np.abs(z - b) < 1e-9 * max(1.0, abs(b))
            if np.any(at):
                zb = z[at]
                with np.errstate(divide="ignore", invalid="ignore"):
                    rest = kernels.log_series(zb, self._lam, self._coef, self.z0) + np.exp(
                        2j * self.pf.psi) * _log((zb - b.conjugate()) / (self.z0 - b.conjugate()))
                g = np.exp(rest + (self.gauge if normalized else 0)) / (self.z0 - b)
                out[at] = g
        return out

    def h_tail_bound(self, z) -> float:
        """Estimate of the error in phi from dropped and unresolved standard roots."""
        pf = self.pf
        if pf.tail_estimate == 0.0:
            return 0.0
        scale = abs(self.c) if self.case == "ComplexPair" else (
            abs(self.classification.case.dP1) if self.case == "DistinctReal" else 1.0)
        R = self.family.outer_radius(self.N)
        far = pf.tail_estimate - pf.unresolved
        dz = abs(complex(z) - self.z0)
        return scale * (2.0 * far * dz / R + pf.unresolved * (40.0 + math.log1p(dz)))

    def with_z0(self, z0: complex) -> "KoenigsMap":
        return KoenigsMap(self.classification, self.pf, z0)

    # ----- boundary behaviour ---------------------------------------------
    def boundary_points(self) -> np.ndarray:
        """Real points where h is singular or branches."""
        pf = self.pf
        pts = list(self._lam)
        if self.case == "DistinctReal":
            pts += [pf.rho1, pf.rho2]
        elif self.case in ("DoubleRoot", "TripleRoot"):
            pts.append(pf.rho0)
        return np.sort(np.array(pts))

    def eval_boundary(self, x, normalized: bool = True, guard: float = 1e-12):
        x = np.atleast_1d(np.asarray(x, dtype=np.float64))
        bp = self.boundary_points()
        if len(bp):
            j = np.clip(np.searchsorted(bp, x), 1, max(len(bp) - 1, 1))
            near = np.minimum(np.abs(x - bp[j - 1]), np.abs(x - bp[np.minimum(j, len(bp) - 1)]))
            if np.any(near < guard * np.maximum(1.0, np.abs(x))):
                raise BranchHazard("boundary evaluation at a root of P")
        z = x.astype(np.complex128)  # imaginary part +0.0
        return self.eval_h(z, normalized)


def tip_points(kmap: KoenigsMap, normalized: bool = True, rel_flag: float = 1e-8):
    """Images h(k_n) of the driving points, with truncation flags.

    Returns a list of ``(index, k, h(k), flagged)``; ``flagged`` marks tips
    whose truncation error estimate is not small against ``|h(k)|``.
    """
    k, _ = kmap.family.arrays(kmap.N)
    vals = kmap.eval_boundary(k, normalized)
    out = []
    for i, (kk, v) in enumerate(zip(k, vals)):
        err = kmap.h_tail_bound(complex(kk, 0.0))
        size = abs(v) if not kmap.multiplicative else 1.0
        flagged = kmap.family.kind == "parametric" and err > rel_flag * max(size, 1.0)
        out.append((i, float(kk), complex(v), bool(flagged)))
    return out


def default_grid(kmap: KoenigsMap, n: int = 4096) -> np.ndarray:
    """Real grid clustered near the driving points and the roots, avoiding both."""
    k, _ = kmap.family.arrays(kmap.N)
    special = np.sort(np.concatenate([k, kmap.boundary_points()]))
    lo, hi = special[0], special[-1]
    span = max(hi - lo, 1.0)
    base = np.linspace(lo - 4 * span, hi + 4 * span, n // 2)
    # geometric clusters on both sides of every special point
    m = max(2, (n - len(base)) // (2 * len(special)))
    offs = span * np.geomspace(1e-7, 0.25, m)
    clus = (special[:, None] + np.concatenate([-offs, offs])[None, :]).ravel()
    grid = np.unique(np.concatenate([base, clus]))
    d = np.min(np.abs(grid[:, None] - special[None, :]), axis=1)
    return grid[d > 1e-9 * np.maximum(1.0, np.abs(grid))]


@dataclass
class ImageScan:
    x: np.ndarray
    h: np.ndarray
    segment: np.ndarray     # index of the gap between consecutive special points
    report: dict


def image_boundary_scan(kmap: KoenigsMap, grid=None) -> ImageScan:
    """Sample h on the real line and summarise the image geometry."""
    x = default_grid(kmap) if grid is None or len(grid) == 0 else np.asarray(grid, dtype=float)
    h = kmap.eval_boundary(x)
    k, _ = kmap.family.arrays(kmap.N)
    special = np.sort(np.concatenate([k, kmap.boundary_points()]))
    seg = np.searchsorted(special, x)
    pf = kmap.pf
    rep: dict = {"case": kmap.case}
    if kmap.case == "ComplexPair":
        rep["spiral_amplitude"] = float(np.sum(pf.a) * math.pi / math.cos(pf.psi))
        rep["abs_h_ends"] = (float(abs(h[0])), float(abs(h[-1])))
    elif kmap.case == "DistinctReal":
        tips = np.array([t[2] for t in tip_points(kmap)])
        rep["max_abs_tip"] = float(np.max(np.abs(tips)))
        rep["abs_h_ends"] = (float(abs(h[0])), float(abs(h[-1])))
        rep["sector_amplitude"] = float(kmap.classification.case.dP1 * math.pi)
    else:
        im = h.imag
        levels = []
        for s in np.unique(seg):
            v = im[seg == s]
            levels.append((int(s), float(np.median(v)), float(np.ptp(v))))
        rep["im_levels"] = levels
        rep["re_h_ends"] = (float(h[0].real), float(h[-1].real))
        left = [lv for s, lv, _ in levels if lv >= math.pi - 1e-9]
        right = [lv for s, lv, _ in levels if lv <= 1e-9]
        rep["strip"] = (max(right) if right else 0.0, min(left) if left else math.pi)
        rep["strip_width"] = rep["strip"][1] - rep["strip"][0]
        rep["Q"] = float(max(abs(t[2].imag) for t in tip_points(kmap)))
    return ImageScan(x, h, seg, rep)


def spirallike_check(kmap: KoenigsMap, sample) -> float:
    """Smallest ``Im(exp(-i psi) (z - beta)(z - conj beta) h'/h)`` over the sample."""
    if kmap.case != "ComplexPair":
        raise ValueError("spirallike check applies to the complex-pair case")
    z = np.atleast_1d(np.asarray(sample, dtype=np.complex128))
    b = kmap.pf.beta
    keep = np.abs(z - b) > 1e-12
    z = z[keep]
    ratio = kmap.c / eval_P_array(kmap.family, z, 0, kmap.N)  # h'/h
    vals = np.exp(-1j * kmap.pf.psi) * (z - b) * (z - b.conjugate()) * ratio
    return float(np.min(vals.imag))


def univalence_sample(kmap: KoenigsMap, n_pairs: int = 1000, box=(-4.0, 4.0, 0.05, 4.0),
                      seed: int = 0) -> float:
    """Smallest ``|h(z) - h(w)| / |z - w|`` over random pairs in a box of the upper half-plane.

    A collision shows up as a value at rounding level.
    """
    rng = np.random.default_rng(seed)
    x0, x1, y0, y1 = box
    z = rng.uniform(x0, x1, n_pairs) + 1j * rng.uniform(y0, y1, n_pairs)
    w = rng.uniform(x0, x1, n_pairs) + 1j * rng.uniform(y0, y1, n_pairs)
    if kmap.multiplicative:
        # compare in the log-coordinate, modulo 2 pi i, to avoid overflow of h
        d = kmap.phi(z) - kmap.phi(w)
        d = d.real + 1j * ((d.imag + math.pi) % (2 * math.pi) - math.pi)
    else:
        d = kmap.eval_h(z) - kmap.eval_h(w)
    return float(np.min(np.abs(d) / np.abs(z - w)))


def z0_constant(kmap: KoenigsMap, z0_new: complex, sample) -> tuple[complex, float]:
    """Constant relating the maps at two base points, and its spread over the sample.

    The constant is multiplicative for cases with ``h = exp(phi)`` and
    additive otherwise; the spread is relative to its size.
    """
    other = kmap.with_z0(z0_new)
    z = np.atleast_1d(np.asarray(sample, dtype=np.complex128))
    z = z[np.abs(kmap.eval_h(z)) > 0] if kmap.multiplicative else z
    if kmap.multiplicative:
        r = other.eval_h(z) / kmap.eval_h(z)
    else:
        r = other.eval_h(z) - kmap.eval_h(z)
    c = complex(np.mean(r))
    spread = float(np.max(np.abs(r - c)) / max(abs(c), 1.0))
    return c, spread
