"""Real and complex roots of P, the exclusive case verdict and 1/P partial fractions.

Every real interval is scanned with the structure P''' < 0: P'' decreases
strictly, so P has at most two critical points per interval and each root
sits on a monotone piece that can be bracketed and bisected. A complex
pair, when present, is counted with the argument principle on a rectangle
in the upper half-plane and then polished by Newton iteration.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy.optimize import brentq

from .config import Interval, SlitFamily, build_intervals
from .pfunc import POLE_RTOL, eval_P_array

AMBIGUOUS = 1e-8
DEFAULT_TOL = 1e-10
_EPS = np.finfo(float).eps


class ClassificationError(RuntimeError):
    """Root search failed or produced an inconsistent case count."""


class InconsistencyError(ClassificationError):
    """Computed data contradicts the classification it came from."""


# ----------------------------------------------------------------------------
# data types

@dataclass(frozen=True)
class StandardRoot:
    interval: Interval
    lam: float
    dP: float
    resolved: bool = True   # False when the root is closer to a pole than the float grid


@dataclass(frozen=True)
class ComplexPair:
    beta: complex
    psi: float
    dP_beta: complex
    name: str = "ComplexPair"


@dataclass(frozen=True)
class DistinctReal:
    rho1: float
    rho2: float
    interval: Interval
    dP1: float
    dP2: float
    note: str = ""
    name: str = "DistinctReal"


@dataclass(frozen=True)
class DoubleRoot:
    rho0: float
    interval: Interval
    d2: float
    d3: float
    name: str = "DoubleRoot"


@dataclass(frozen=True)
class TripleRoot:
    rho0: float
    interval: Interval
    m: int
    d3: float
    d4: float
    d5: float
    name: str = "TripleRoot"


Case = Union[ComplexPair, DistinctReal, DoubleRoot, TripleRoot]


@dataclass
class IntervalScan:
    """Roots of P found in one real interval."""

    interval: Interval
    roots: list          # (x, multiplicity, P'(x))
    kind: str            # "simple", "three", "double", "triple", "none", "two"
    margin: float        # distance of the verdict from a degenerate configuration
    critical: tuple = ()
    hugging: list = field(default_factory=list)   # (pole index, offset, x) below float resolution

    @property
    def count(self) -> int:
        return sum(m for _, m, _ in self.roots)


@dataclass
class RootClassification:
    family: SlitFamily
    N: int
    tol: float
    standard_roots: list
    case: Case | None
    margins: dict
    scans: list
    near_degenerate: bool = False
    candidates: tuple = ()
    lambdas: tuple = ()           # standard roots entering the partial fractions
    notes: list = field(default_factory=list)

    @property
    def case_name(self) -> str:
        return self.case.name if self.case is not None else "Unresolved"

    @property
    def limit_point(self) -> complex:
        c = self.case
        if isinstance(c, ComplexPair):
            return c.beta
        if isinstance(c, DistinctReal):
            return complex(c.rho1)
        return complex(c.rho0)


# ----------------------------------------------------------------------------
# real scan

def _real_fn(family, N, order):
    def f(x):
        return float(eval_P_array(family, [complex(x, 0.0)], order, N)[0].real)
    return f


def _probe(f, anchor, direction, length, sign, fallback=False):
    """Point anchor + direction*delta where f has the given sign, delta shrinking.

    With ``fallback`` the closest admissible point is returned when the sign
    change sits closer to the pole than evaluation allows.
    """
    delta = 1e-3 * length
    floor = 2 * POLE_RTOL * max(1.0, abs(anchor))
    x = anchor + direction * delta
    for _ in range(200):
        x = anchor + direction * delta
        if np.sign(f(x)) == sign:
            return x
        if delta < floor:
            break
        delta = max(0.5 * delta, 0.9 * floor)
    if fallback:
        return x
    raise ClassificationError(f"failed to bracket near driving point {anchor}")


def _zero(f, a, b, sa):
    """Zero of f between a (expected sign sa) and b (expected sign -sa).

    When an endpoint already has the wrong sign the zero lies beyond the
    resolvable region and that endpoint is returned.
    """
    if np.sign(f(a)) != sa:
        return a
    if np.sign(f(b)) != -sa:
        return b
    return _solve(f, a, b)


def _solve(f, a, b):
    lo, hi = min(a, b), max(a, b)
    xtol = 2 * _EPS * max(1.0, abs(lo), abs(hi))
    x = brentq(f, lo, hi, xtol=xtol, rtol=4 * _EPS, maxiter=400)
    return x


def _grow(f, anchor, direction, step, sign):
    """Walk away from anchor until f has the given sign (unbounded side)."""
    x = anchor + direction * step
    for _ in range(200):
        if np.sign(f(x)) == sign:
            return x
        step *= 2.0
        x = anchor + direction * step
    raise ClassificationError("failed to bracket on an unbounded interval")


def _root_entry(family, N, x, mult=1):
    return (x, mult, float(eval_P_array(family, [complex(x, 0.0)], 1, N)[0].real))


def _hugging_root(family, N, j):
    """Root of P pressed against the driving point k_j, in offset form.

    Solves ``u = -4 b_j / Q(k_j + u)`` where Q is P without the j-th term.
    Returns ``(k_j + u, u, P'(k_j + u))``.
    """
    k, b = family.arrays(N)
    mask = np.arange(len(k)) != j
    ko, bo = k[mask], b[mask]
    kj, bj = float(k[j]), float(b[j])
    u = 0.0
    for _ in range(50):
        x = kj + u
        Q = x + math.fsum(4 * bo / (x - ko))
        u_new = -4 * bj / Q
        if u_new == u:
            break
        u = u_new
    x = kj + u
    dQ = 1 - math.fsum(4 * bo / (x - ko) ** 2)
    return x, u, dQ - 4 * bj / (u * u)


def _try_probe(f, anchor, direction, length, sign):
    try:
        return _probe(f, anchor, direction, length, sign)
    except ClassificationError:
        return None


def scan_bounded(family, N, iv: Interval, tol: float) -> IntervalScan:
    P, dP, d2P = (_real_fn(family, N, o) for o in range(3))
    L, R, ln = iv.left, iv.right, iv.length
    # unique zero of P'' (P'' runs from +inf to -inf)
    c = _zero(d2P, _probe(d2P, L, +1, ln, 1, True), _probe(d2P, R, -1, ln, -1, True), 1)
    vc, dc = P(c), dP(c)
    triple_margin = max(abs(vc), abs(dc))
    if triple_margin <= tol:
        return IntervalScan(iv, [_root_entry(family, N, c, 3)], "triple", triple_margin, (c,))
    xl = _try_probe(P, L, +1, ln, 1)
    xr = _try_probe(P, R, -1, ln, -1)
    hugs = []

    def left_root(hi):
        if xl is None:  # root closer to k_left than the float grid resolves
            x, u, d = _hugging_root(family, N, iv.left_index)
            hugs.append((iv.left_index, u, x))
            return (x, 1, d)
        return _root_entry(family, N, _solve(P, xl, hi))

    def right_root(lo):
        if xr is None:
            x, u, d = _hugging_root(family, N, iv.right_index)
            hugs.append((iv.right_index, u, x))
            return (x, 1, d)
        return _root_entry(family, N, _solve(P, lo, xr))

    if dc <= 0:
        if xl is None and xr is None:
            raise ClassificationError(f"cannot bracket the root in {iv}")
        r = left_root(xr) if xl is None else right_root(xl)
        return IntervalScan(iv, [r], "simple", triple_margin, (c,), hugs)
    c1 = _zero(dP, _probe(dP, L, +1, ln, -1, True), c, -1)
    c2 = _zero(dP, c, _probe(dP, R, -1, ln, -1, True), 1)
    v1, v2 = P(c1), P(c2)  # local min, local max
    margin = min(abs(v1), abs(v2), triple_margin)
    if abs(v1) <= tol:
        roots = [_root_entry(family, N, c1, 2)]
        if v2 > 0:
            roots.append(right_root(c2))
        return IntervalScan(iv, roots, "double", abs(v1), (c1, c, c2), hugs)
    if abs(v2) <= tol:
        roots = [left_root(c1), _root_entry(family, N, c2, 2)]
        return IntervalScan(iv, roots, "double", abs(v2), (c1, c, c2), hugs)
    if v1 > 0:
        return IntervalScan(iv, [right_root(c2)], "simple", margin, (c1, c, c2), hugs)
    if v2 < 0:
        return IntervalScan(iv, [left_root(c1)], "simple", margin, (c1, c, c2), hugs)
    roots = [left_root(c1), _root_entry(family, N, _solve(P, c1, c2)), right_root(c2)]
    xs = [r[0] for r in roots]
    sep = min(xs[1] - xs[0], xs[2] - xs[1])
    return IntervalScan(iv, roots, "three", min(margin, sep), (c1, c, c2), hugs)


def scan_unbounded(family, N, iv: Interval, tol: float) -> IntervalScan:
    P, dP = _real_fn(family, N, 0), _real_fn(family, N, 1)
    S = 4.0 * float(np.sum(family.arrays(N)[1]))
    reach = 1.01 * math.sqrt(S) + 1e-12
    if math.isinf(iv.right):       # right side: P convex, minimum at c
        a, direction, sign_far = iv.left, +1, 1
    else:                          # left side: P concave, maximum at c
        a, direction, sign_far = iv.right, -1, -1
    near = _probe(dP, a, direction, reach, -1, True)
    far = a + direction * reach
    if dP(far) < 0:
        far = _grow(dP, a, direction, reach, 1)
    c = _zero(dP, near, far, -1)
    v = P(c)
    margin = abs(v)
    if margin <= tol:
        return IntervalScan(iv, [_root_entry(family, N, c, 2)], "double", margin, (c,))
    if np.sign(v) == sign_far:
        return IntervalScan(iv, [], "none", margin, (c,))
    xp = _try_probe(P, a, direction, reach, sign_far)
    xf = _grow(P, c, direction, max(reach, abs(c) + 1.0), sign_far)
    hugs = []
    if xp is None:
        j = len(family.arrays(N)[0]) - 1 if direction > 0 else 0
        r_near, u, _ = _hugging_root(family, N, j)
        hugs.append((j, u, r_near))
    else:
        r_near = _solve(P, xp, c)
    r_far = _solve(P, c, xf)
    roots = sorted([r_near, r_far])
    entries = []
    for r in roots:
        if hugs and r == hugs[0][2]:
            x, u, d = _hugging_root(family, N, hugs[0][0])
            entries.append((x, 1, d))
        else:
            entries.append(_root_entry(family, N, r))
    return IntervalScan(iv, entries, "two", min(margin, roots[1] - roots[0]), (c,), hugs)


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("LOEWNER_THREADS", "1")))
    except ValueError:
        return 1


def scan_intervals(family: SlitFamily, N: int | None = None, tol: float = DEFAULT_TOL):
    N = family.N if N is None else N
    structure = build_intervals(family, N)
    jobs = [(scan_bounded, iv) for iv in structure.bounded]
    jobs += [(scan_unbounded, iv) for iv in (structure.left_unbounded, structure.right_unbounded)
             if iv is not None]
    run = lambda job: job[0](family, N, job[1], tol)  # noqa: E731
    nw = _workers()
    if nw > 1 and len(jobs) > 8:
        with ThreadPoolExecutor(nw) as pool:
            return list(pool.map(run, jobs))
    return [run(j) for j in jobs]


def find_standard_roots(family: SlitFamily, intervals=None, N: int | None = None,
                        tol: float = DEFAULT_TOL, scans=None) -> list[StandardRoot]:
    """All simple real roots with P' < 0, in increasing order.

    ``intervals`` is accepted for symmetry with the interval builder; the
    scan always uses the structure at truncation ``N``.
    """
    scans = scan_intervals(family, N, tol) if scans is None else scans
    out = []
    for sc in scans:
        hug = {h[2] for h in sc.hugging}
        for x, mult, d in sc.roots:
            if mult == 1 and d < 0:
                resolved = x not in hug
                out.append(StandardRoot(sc.interval, x, d, resolved))
    out.sort(key=lambda r: r.lam)
    return out


# ----------------------------------------------------------------------------
# complex roots

def _edge_arg(family, N, a, b, n0=64, max_rounds=60):
    """Total change of arg P along the segment [a, b], adaptively refined."""
    s = np.linspace(0.0, 1.0, n0)
    vals = eval_P_array(family, a + (b - a) * s, 0, N)
    for _ in range(max_rounds):
        d = np.angle(vals[1:] / vals[:-1])
        bad = np.nonzero(np.abs(d) > math.pi / 4)[0]
        if len(bad) == 0:
            break
        if np.min(s[bad + 1] - s[bad]) < 1e-17:
            raise ClassificationError("argument tracking failed to resolve an edge")
        mids = 0.5 * (s[bad] + s[bad + 1])
        mv = eval_P_array(family, a + (b - a) * mids, 0, N)
        s = np.insert(s, bad + 1, mids)
        vals = np.insert(vals, bad + 1, mv)
    else:
        raise ClassificationError("argument tracking exceeded its refinement budget")
    return float(np.sum(np.angle(vals[1:] / vals[:-1]))), float(np.min(np.abs(vals)))


def winding_count(family, x0, x1, y0, y1, N=None) -> int:
    """Number of zeros of P inside the rectangle (no poles lie in the upper half-plane)."""
    corners = [complex(x0, y0), complex(x1, y0), complex(x1, y1), complex(x0, y1)]
    total, smallest = 0.0, math.inf
    for a, b in zip(corners, corners[1:] + corners[:1]):
        dt, m = _edge_arg(family, N, a, b)
        total += dt
        smallest = min(smallest, m)
    n = total / (2 * math.pi)
    if abs(n - round(n)) > 0.1:
        raise ClassificationError(f"non-integer winding {n}")
    return int(round(n)), smallest


def _newton_complex(family, N, z, box, iters=60):
    x0, x1, y0, y1 = box
    for _ in range(iters):
        p = complex(eval_P_array(family, [z], 0, N)[0])
        dp = complex(eval_P_array(family, [z], 1, N)[0])
        if dp == 0:
            return None
        step = p / dp
        lim = 0.25 * max(x1 - x0, y1 - y0)
        if abs(step) > lim:
            step *= lim / abs(step)
        z = z - step
        if not (x0 - 1e-9 <= z.real <= x1 + 1e-9 and 0 < z.imag <= 2 * y1):
            return None
        if abs(step) <= 4 * _EPS * max(1.0, abs(z)):
            return z
    p = complex(eval_P_array(family, [z], 0, N)[0])
    return z if abs(p) < 1e-10 * max(1.0, abs(z)) else None


def find_complex_root(family: SlitFamily, N: int | None = None, delta: float = 1e-10):
    """Locate a root of P in the upper half-plane, or return ``None``.

    Any such root satisfies ``sum 4 b_n / |beta - k_n|^2 = 1``, which puts
    ``Im beta <= sqrt(S)`` and ``Re beta`` between ``min k / 2`` and
    ``max k / 2``; the search rectangle covers that region.
    """
    N = family.N if N is None else N
    k, b = family.arrays(N)
    S = 4.0 * float(np.sum(b))
    d = family.gap(N)
    H = max(10 * d if math.isfinite(d) else 0.0, 4 * math.sqrt(S))
    pad = 0.05 * (1.0 + 0.5 * (k[-1] - k[0]))
    box = (0.5 * k[0] - pad, 0.5 * k[-1] + pad, delta, H)
    count, smallest = winding_count(family, *box, N=N)
    if count == 0:
        return None, count
    if count != 1:
        raise ClassificationError(f"argument principle counts {count} roots in the upper half-plane")
    # seeds on vertical lines above interval midpoints and the box centre
    xs = np.concatenate([0.5 * (k[:-1] + k[1:]), [0.5 * (box[0] + box[1]), k[0] / 2, k[-1] / 2]])
    xs = xs[(xs >= box[0]) & (xs <= box[1])]
    for y in (0.5 * H, 0.25 * H, 0.1 * H, 0.75 * H):
        for x in xs:
            z = _newton_complex(family, N, complex(x, y), box)
            if z is not None:
                return z, count
    z = _bisect_box(family, N, box)
    if z is None:
        raise ClassificationError("complex root counted but not located")
    return z, count


def _bisect_box(family, N, box, depth=0):
    x0, x1, y0, y1 = box
    z = _newton_complex(family, N, complex(0.5 * (x0 + x1), 0.5 * (y0 + y1)), box)
    if z is not None and x0 <= z.real <= x1 and y0 <= z.imag <= y1:
        return z
    if depth > 40:
        return None
    if x1 - x0 >= y1 - y0:
        xm = 0.5 * (x0 + x1)
        halves = [(x0, xm, y0, y1), (xm, x1, y0, y1)]
    else:
        ym = 0.5 * (y0 + y1)
        halves = [(x0, x1, y0, ym), (x0, x1, ym, y1)]
    for h in halves:
        n, _ = winding_count(family, *h, N=N)
        if n >= 1:
            return _bisect_box(family, N, h, depth + 1)
    return None


# ----------------------------------------------------------------------------
# classification

def _derivs(family, N, x, orders):
    z = np.array([complex(x, 0.0)])
    return [float(eval_P_array(family, z, o, N)[0].real) for o in orders]


def classify(family: SlitFamily, N: int | None = None, tol: float = DEFAULT_TOL) -> RootClassification:
    """Find every real root, then decide which of the four cases holds.

    Returns a classification whose ``near_degenerate`` flag is set when the
    deciding margin falls between ``tol`` and ``1e-8``; the candidate cases
    are listed and no coefficient data should be derived from it.
    """
    N = family.N if N is None else N
    scans = scan_intervals(family, N, tol)
    std = find_standard_roots(family, N=N, tol=tol, scans=scans)
    extra = [s for s in scans if s.kind in ("three", "double", "triple", "two")]
    margins: dict = {}
    notes: list = []
    candidates: tuple = ()
    near = False
    case: Case | None = None
    lambdas = [r.lam for r in std if r.resolved]

    # Lemma-style root counts per interval
    for sc in scans:
        allowed = (1, 3) if sc.interval.bounded else (0, 2)
        if sc.count not in allowed:
            raise ClassificationError(f"interval {sc.interval} holds {sc.count} roots")

    if len(extra) > 1:
        raise ClassificationError(
            f"{len(extra)} intervals carry extra roots; the cases are exclusive")

    if not extra:
        beta, _ = find_complex_root(family, N)
        if beta is None:
            # a complex pair below the search floor is indistinguishable from a double root
            close = min(scans, key=lambda s: s.margin)
            raise ClassificationError(
                f"no extra real root and no complex root; smallest margin {close.margin:.3e}")
        dpb = complex(eval_P_array(family, [beta], 1, N)[0])
        psi = math.atan2(dpb.imag, dpb.real)
        if not -math.pi / 2 < psi < math.pi / 2:
            raise InconsistencyError(f"psi={psi} outside (-pi/2, pi/2)")
        case = ComplexPair(beta, psi, dpb)
        margins["im_beta"] = beta.imag
        if beta.imag < AMBIGUOUS:
            near, candidates = True, ("ComplexPair", "DoubleRoot")
    else:
        sc = extra[0]
        iv = sc.interval
        if sc.kind == "triple":
            x = sc.roots[0][0]
            d3, d4, d5 = _derivs(family, N, x, (3, 4, 5))
            k, _ = family.arrays(N)
            case = TripleRoot(x, iv, iv.left_index if iv.left_index is not None else -1, d3, d4, d5)
            margins["triple"] = sc.margin
            margins["dP_rho0"] = abs(_derivs(family, N, x, (1,))[0])
            if sc.margin > tol:
                near = True
        elif sc.kind == "double":
            x = next(r[0] for r in sc.roots if r[1] == 2)
            d2, d3 = _derivs(family, N, x, (2, 3))
            case = DoubleRoot(x, iv, d2, d3)
            margins["double"] = sc.margin
            margins["dP_rho0"] = abs(_derivs(family, N, x, (1,))[0])
            # near a triple root the double-root verdict is fragile too
            if iv.bounded:
                c = sc.critical[1]
                tm = max(abs(_derivs(family, N, c, (0,))[0]), abs(_derivs(family, N, c, (1,))[0]))
                margins["triple"] = tm
                if tm < AMBIGUOUS:
                    near, candidates = True, ("DoubleRoot", "TripleRoot")
        else:
            rts = sc.roots
            if sc.kind == "three":
                r1, r2, r3 = rts
                rho1, rho2, lam = r2, r3, r1
                note = "bounded interval: rho1 middle root, rho2 right root, lambda left root"
            elif not math.isfinite(iv.left):
                rho1, rho2, lam = rts[0], rts[1], None
                note = "left unbounded interval: rho1 left root, rho2 right root"
            else:
                rho1, rho2, lam = rts[1], rts[0], None
                note = "right unbounded interval: rho1 right root, rho2 left root"
            case = DistinctReal(rho1[0], rho2[0], iv, rho1[2], rho2[2], note)
            margins["rho_gap"] = abs(rho1[0] - rho2[0])
            margins["extremum"] = sc.margin
            lambdas = [r.lam for r in std if r.resolved and r.lam != rho2[0]]
        if case.name != "DistinctReal" and sc.margin < AMBIGUOUS and sc.margin > tol:
            near = True
        if case.name == "DistinctReal" and sc.margin < AMBIGUOUS:
            near, candidates = True, ("DistinctReal", "DoubleRoot")
        if near and not candidates:
            candidates = (case.name, "DoubleRoot" if case.name == "TripleRoot" else "ComplexPair")
        if isinstance(case, TripleRoot):
            lambdas = [r.lam for r in std if r.resolved and r.lam != case.rho0]
    if near:
        notes.append("near-degenerate: verdict not certified")
    return RootClassification(family, N, tol, std, case, margins, scans, near, candidates,
                              tuple(lambdas), notes)


# ----------------------------------------------------------------------------
# partial fractions

@dataclass
class PartialFraction:
    """Coefficients of the expansion of 1/P in simple fractions.

    ``A`` holds ``1/P'(lambda_n)`` for the standard roots in ``lam``. The
    remaining fields depend on ``case``.
    """

    case: str
    lam: np.ndarray
    A: np.ndarray
    classification: RootClassification
    a: np.ndarray | None = None          # spiral/sector exponents
    beta: complex | None = None
    psi: float | None = None
    dP_beta: complex | None = None
    rho1: float | None = None
    rho2: float | None = None
    b_exp: float | None = None
    rho0: float | None = None
    B: float | None = None               # 1/(z-rho0)^2 coefficient
    A0: float | None = None              # residue at rho0
    L: float | None = None               # 1/(z-rho0)^3 coefficient (triple)
    tail_estimate: float = 0.0
    unresolved: float = 0.0

    def residue_terms(self) -> list:
        """Residues of 1/P at every root found; they sum to 1."""
        terms = list(self.A)
        if self.case == "ComplexPair":
            terms.append(2.0 * (1.0 / self.dP_beta).real)
        elif self.case == "DistinctReal":
            cl = self.classification.case
            terms += [1.0 / cl.dP1, 1.0 / cl.dP2]
        else:
            terms.append(self.A0)
        return terms

    def expansion(self, z):
        """Evaluate the simple-fraction expansion of 1/P at z."""
        z = np.asarray(z, dtype=np.complex128)
        out = np.zeros_like(z)
        for lam, A in zip(self.lam, self.A):
            out = out + A / (z - lam)
        if self.case == "ComplexPair":
            r = 1.0 / self.dP_beta
            out = out + r / (z - self.beta) + r.conjugate() / (z - self.beta.conjugate())
        elif self.case == "DistinctReal":
            cl = self.classification.case
            out = out + 1 / (cl.dP1 * (z - self.rho1)) + 1 / (cl.dP2 * (z - self.rho2))
        else:
            u = z - self.rho0
            out = out + self.A0 / u + self.B / u ** 2
            if self.case == "TripleRoot":
                out = out + self.L / u ** 3
        return out


def partial_fraction(classification: RootClassification, family: SlitFamily | None = None,
                     N: int | None = None) -> PartialFraction:
    cl = classification
    if cl.near_degenerate:
        raise ClassificationError("classification is near-degenerate; no coefficients derived")
    family = cl.family if family is None else family
    N = cl.N if N is None else N
    lam = np.array(sorted(cl.lambdas), dtype=np.float64)
    dpl = eval_P_array(family, lam.astype(np.complex128), 1, N).real if len(lam) else np.zeros(0)
    if np.any(dpl >= 0):
        raise InconsistencyError("a standard root has P' >= 0")
    A = 1.0 / dpl
    c = cl.case
    pf = PartialFraction(c.name, lam, A, cl)
    # rough bound on the residues of the dropped roots: each is about 4 b / k^2
    R = family.outer_radius(N)
    pf.tail_estimate = 8.0 * family.tail_weight(N) / R ** 2 if math.isfinite(R) else 0.0
    # roots pressed against a pole carry residues below the float grid
    pf.unresolved = math.fsum(1.0 / abs(r.dP) for r in cl.standard_roots if not r.resolved)
    pf.tail_estimate += pf.unresolved
    if isinstance(c, ComplexPair):
        pf.beta, pf.psi, pf.dP_beta = c.beta, c.psi, c.dP_beta
        pf.a = np.abs(c.dP_beta) / np.abs(dpl)
    elif isinstance(c, DistinctReal):
        if not (c.dP1 > 0 > c.dP2):
            raise InconsistencyError("distinct real roots with wrong derivative signs")
        pf.rho1, pf.rho2 = c.rho1, c.rho2
        pf.b_exp = c.dP1 / abs(c.dP2)
        pf.a = c.dP1 / np.abs(dpl)
    elif isinstance(c, DoubleRoot):
        if c.d2 == 0 or c.d3 == 0:
            raise InconsistencyError("vanishing P'' or P''' at a double root")
        pf.rho0 = c.rho0
        pf.B = 2.0 / c.d2
        pf.A0 = -2.0 * c.d3 / (3.0 * c.d2 ** 2)
    elif isinstance(c, TripleRoot):
        if c.d3 == 0:
            raise InconsistencyError("vanishing P''' at a triple root")
        a3, a4, a5 = c.d3 / 6.0, c.d4 / 24.0, c.d5 / 120.0
        pf.rho0 = c.rho0
        pf.L = 1.0 / a3
        pf.B = -a4 / a3 ** 2
        pf.A0 = (a4 * a4 - a3 * a5) / a3 ** 3
    return pf


def verify_residue_identity(pf: PartialFraction) -> float:
    """``|sum of residues - 1|`` for the computed roots."""
    terms = pf.residue_terms()
    return abs(math.fsum(terms) - 1.0)


def residue_bound(pf: PartialFraction) -> float:
    """Tail estimate plus a rounding allowance for the residue identity."""
    terms = np.abs(pf.residue_terms())
    rounding = 64 * _EPS * (1.0 + float(np.sum(terms)) + len(terms) * float(np.max(terms)))
    return pf.tail_estimate + rounding


# ----------------------------------------------------------------------------
# tuner for degenerate test instances

def tune_double(ks, bs, j: int, rho: float, iters: int = 60):
    """Adjust ``b_j`` so that P has a double root near ``rho``.

    Two-dimensional Newton on ``(P(rho), P'(rho)) = 0`` in ``(rho, b_j)``.
    Returns the tuned family and the root.
    """
    ks = np.asarray(ks, dtype=float)
    bs = np.array(bs, dtype=float)
    for _ in range(iters):
        u = rho - ks
        P = rho + np.sum(4 * bs / u)
        P1 = 1 - np.sum(4 * bs / u ** 2)
        P2 = np.sum(8 * bs / u ** 3)
        J = np.array([[P1, 4 / u[j]], [P2, -4 / u[j] ** 2]])
        step = np.linalg.solve(J, [P, P1])
        rho -= step[0]
        bs[j] -= step[1]
        if bs[j] <= 0:
            raise ValueError("tuning drove the weight non-positive")
        if np.max(np.abs(step)) < 1e-15 * max(1.0, abs(rho)):
            break
    return SlitFamily.finite(zip(ks, bs)), rho


def tune_triple(ks, bs, j: int, m: int, rho: float, iters: int = 60):
    """Adjust ``b_j`` and ``b_m`` so that P has a triple root near ``rho``."""
    ks = np.asarray(ks, dtype=float)
    bs = np.array(bs, dtype=float)
    for _ in range(iters):
        u = rho - ks
        P = rho + np.sum(4 * bs / u)
        P1 = 1 - np.sum(4 * bs / u ** 2)
        P2 = np.sum(8 * bs / u ** 3)
        P3 = -np.sum(24 * bs / u ** 4)
        J = np.array([[P1, 4 / u[j], 4 / u[m]],
                      [P2, -4 / u[j] ** 2, -4 / u[m] ** 2],
                      [P3, 8 / u[j] ** 3, 8 / u[m] ** 3]])
        step = np.linalg.solve(J, [P, P1, P2])
        rho -= step[0]
        bs[j] -= step[1]
        bs[m] -= step[2]
        if bs[j] <= 0 or bs[m] <= 0:
            raise ValueError("tuning drove a weight non-positive")
        if np.max(np.abs(step)) < 1e-15 * max(1.0, abs(rho)):
            break
    return SlitFamily.finite(zip(ks, bs)), rho
