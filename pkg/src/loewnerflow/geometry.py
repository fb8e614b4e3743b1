"""Approach-angle diagnostics for tip trajectories and image-geometry reports."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .flow import Trajectory
from .koenigs import KoenigsMap, image_boundary_scan, tip_points

DELTA = 0.05        # tangential band
ORTHO_TOL = 0.02    # orthogonal band around pi/2
FIT_K = 32


class InsufficientTail(ValueError):
    """The trajectory does not reach close enough to its limit point."""


@dataclass
class ApproachReport:
    n: int
    verdict: str
    angle: float | None
    width: float
    winding: float
    slope: float | None = None      # d arg / d log r on the tail (spirals)
    tail_samples: int = 0
    final_dist: float = math.nan


def _unwrap_arg(v):
    return np.unwrap(np.angle(v))


def approach_angle(traj: Trajectory, limit: complex | None = None, psi: float | None = None,
                   k_fit: int = FIT_K, near: float = 0.1) -> ApproachReport:
    """Fit the angle at which a trajectory meets its limit point.

    For a real limit the angle ``arg(gamma - limit)`` is fitted against the
    distance ``r = |gamma - limit|`` over the last ``k_fit`` samples and
    extrapolated to ``r = 0`` (quadratic and linear fits; their gap is the
    reported width). For an interior limit the winding of the argument and
    its slope against ``log r`` decide between a spiral and a radial approach.
    """
    lim = traj.limit if limit is None else complex(limit)
    g = np.asarray(traj.gamma[1:])
    if len(g) == 0:
        raise InsufficientTail("trajectory has no samples beyond t = 0")
    d = g - lim
    r = np.abs(d)
    tail = np.nonzero(r < near * max(1.0, abs(lim)))[0]
    if len(tail) < 20:
        raise InsufficientTail(f"only {len(tail)} samples within {near} of the limit")
    tail = tail[tail >= tail[0]]
    th = _unwrap_arg(d)
    winding = float(th[-1] - th[0])
    sel = tail[-k_fit:]
    rs, ts = r[sel], th[sel]
    if lim.imag > 0:
        slope = float(np.polyfit(np.log(rs), ts, 1)[0])
        if abs(winding) > 2 * math.pi:
            verdict = "spiral"
        elif (psi is not None and abs(psi) < 0.01) or abs(slope) < 0.01:
            verdict = "spiral-degenerate-radial"
        else:
            verdict = "spiral"
        ang = float(np.polyfit(rs, ts, 1)[1]) if verdict != "spiral" else None
        return ApproachReport(traj.n, verdict, ang, 0.0, winding, slope, len(tail), float(r[-1]))
    ts = np.mod(ts, 2 * math.pi)
    ts = np.where(ts > 1.5 * math.pi, ts - 2 * math.pi, ts)   # keep angles near 0 continuous
    p2 = np.polyfit(rs, ts, 2)
    p1 = np.polyfit(rs[-max(8, len(rs) // 2):], ts[-max(8, len(rs) // 2):], 1)
    ang = float(p2[-1])
    width = float(abs(p2[-1] - p1[-1]) + np.std(ts - np.polyval(p2, rs)))
    if abs(ang - math.pi / 2) <= ORTHO_TOL:
        verdict = "orthogonal"
    elif DELTA <= ang <= math.pi - DELTA:
        verdict = "non-tangential"
    else:
        # tangential only with a settled trend toward the axis
        trend = np.diff(np.minimum(np.abs(ts), np.abs(math.pi - ts)))
        verdict = "tangential" if np.mean(trend <= 1e-12) > 0.5 else "non-convergent"
    return ApproachReport(traj.n, verdict, ang, width, winding, None, len(tail), float(r[-1]))


EXPECTED = {
    "ComplexPair": {"spiral", "spiral-degenerate-radial"},
    "DistinctReal": {"non-tangential", "orthogonal"},
    "DoubleRoot": {"tangential"},
    "TripleRoot": {"orthogonal"},
}


def verdict_consistent(report: ApproachReport, case_name: str) -> bool:
    return report.verdict in EXPECTED.get(case_name, set())


# ----------------------------------------------------------------------------
# harmonic measure utilities

def harmonic_measure_halfplane(z: complex, a: float, b: float) -> float:
    """Harmonic measure of ``[a, b]`` seen from z in the upper half-plane."""
    if not a < b:
        raise ValueError("need a < b")
    z = complex(z)
    if not z.imag > 0:
        raise ValueError("z must lie in the upper half-plane")
    return math.atan2(((z - b) / (z - a)).imag, ((z - b) / (z - a)).real) / math.pi


def harmonic_measure_sector(z: complex, alpha: float, beta: float) -> float:
    """Harmonic measure of the edge ``arg = alpha`` in the sector ``alpha < arg < beta``."""
    z = complex(z)
    th = math.atan2(z.imag, z.real)
    if not alpha < th < beta:
        raise ValueError("z lies outside the sector")
    return (beta - th) / (beta - alpha)


# ----------------------------------------------------------------------------
# image geometry

def _spiral_angle(h, psi):
    return np.angle(h) - math.tan(psi) * np.log(np.abs(h))


def sector_report(kmap: KoenigsMap, classification=None) -> dict:
    """Slit-free regions of the image of h, from formulas and from sampled tips."""
    cl = kmap.classification if classification is None else classification
    pf = kmap.pf
    tips = tip_points(kmap)
    ks = np.array([t[1] for t in tips])
    hv = np.array([t[2] for t in tips])
    out: dict = {"case": kmap.case, "gauge": "normalized"}
    if kmap.case == "ComplexPair":
        psi = pf.psi
        formula = float(np.sum(pf.a) * math.pi / math.cos(psi))
        th = _spiral_angle(hv[np.argsort(ks)], psi)
        gaps = np.mod(np.diff(th), 2 * math.pi)
        spread = float(np.sum(gaps))
        out.update(amplitude_formula=formula, amplitude_sampled=spread,
                   complement_sampled=2 * math.pi - spread, psi=psi)
        if len(ks) == 1:
            out["amplitude_sampled"] = 0.0 if formula == 0 else math.nan
            out["complement_sampled"] = 2 * math.pi
    elif kmap.case == "DistinctReal":
        rho1 = cl.case.rho1
        args = np.angle(hv)
        left, right = args[ks < rho1], args[ks > rho1]
        th2 = float(np.max(left)) if len(left) else 0.0
        th1 = float(np.min(right)) if len(right) else math.pi
        out.update(theta1=th1, theta2=th2, amplitude_sampled=th1 - th2,
                   amplitude_formula=float(cl.case.dP1 * math.pi),
                   tips_in_upper_half_plane=bool(np.all(hv.imag > 0)))
    else:
        scan = image_boundary_scan(kmap)
        rep = scan.report
        im_tips = hv.imag
        above = im_tips[im_tips >= math.pi - 1e-9]
        below = im_tips[im_tips <= 1e-9]
        lo = float(np.max(below)) if len(below) else 0.0
        hi = float(np.min(above)) if len(above) else math.pi
        levels = [lv for _, lv, _ in rep["im_levels"]]
        # Q bounds |Im h| on the whole boundary image, tips included
        out.update(strip=(lo, hi), strip_width=hi - lo,
                   Q=float(max(np.max(np.abs(levels)), np.max(np.abs(im_tips)))),
                   Q_tips=float(np.max(np.abs(im_tips))),
                   strip_scan=rep["strip"], strip_width_scan=rep["strip_width"], levels=levels)
    return out
