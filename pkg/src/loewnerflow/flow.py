"""Loewner flow through the Koenigs conjugation, tip traces and an ODE oracle.

The flow is evaluated in the log-coordinate ``phi`` of the Koenigs map:

    phi(f(z, t)) = phi(z / sqrt(1 - t)) + (c / 2) log(1 - t)

which is the same statement for all four cases (modulo ``2 pi i`` when
``h = exp(phi)``). Inversion is Newton iteration ``w <- w - r P(w) / c``
continued along the image path. Tip traces run in ``tau = -log(1 - t)``
so the approach to the limit point can be followed far beyond what a
float ``t`` resolves.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from . import kernels
from .koenigs import KoenigsMap
from .pfunc import eval_P_array

TWO_PI = 2.0 * math.pi
T_CAP = 1.0 - 1e-6
_EPS = np.finfo(float).eps


class InversionError(RuntimeError):
    """Newton continuation for h^{-1} failed."""


class TraceError(RuntimeError):
    """Tip continuation failed; ``partial`` carries the samples obtained."""

    def __init__(self, msg, partial=None):
        super().__init__(msg)
        self.partial = partial


class OracleError(RuntimeError):
    """ODE integration stalled without an absorption certificate."""


def default_t_grid(t_max: float = T_CAP) -> np.ndarray:
    """``t_k = 1 - 2**(-k/8)`` up to ``t_max``, with ``t_max`` appended."""
    kmax = int(math.floor(-8 * math.log2(1.0 - t_max))) if t_max > 0 else 0
    t = 1.0 - 2.0 ** (-np.arange(kmax + 1) / 8.0)
    t = t[t < t_max]
    return np.append(t, t_max) if t_max > 0 else np.array([0.0])


@dataclass
class Trajectory:
    """Samples of one tip trajectory, ``gamma(t) = f(k_n sqrt(1-t), t)``."""

    n: int
    k: float
    t: np.ndarray
    tau: np.ndarray
    gamma: np.ndarray
    limit: complex
    grid_len: int = 0          # samples coming from the requested t grid
    report: object = None

    @property
    def dist(self) -> np.ndarray:
        return np.abs(self.gamma - self.limit)


class FlowEvaluator:
    """Evaluate ``f(z, t)`` by inverting the Koenigs map.

    Parameters
    ----------
    kmap : KoenigsMap
    newton_tol : float
        Residual target in the log-coordinate, relative to ``1 + |target|``.
    """

    def __init__(self, kmap: KoenigsMap, newton_tol: float = 1e-13):
        self.kmap = kmap
        self.cl = kmap.classification
        self.family = kmap.family
        self.N = kmap.N
        self.c = kmap.c
        self.tol = newton_tol
        self.limit = self.cl.limit_point
        k, b = self.family.arrays(self.N)
        self._k, self._b = k, b

    # ----- scaling action -------------------------------------------------
    def action(self, value, t: float):
        """Linear action on h-values at time t."""
        L = math.log1p(-t)
        if self.kmap.multiplicative:
            return value * np.exp(0.5 * self.c * L)
        return value + 0.5 * L

    def _target(self, z, tau):
        """Log-coordinate target ``phi(z e^{tau/2}) - (c/2) tau``."""
        return complex(self.kmap.phi(z * math.exp(0.5 * tau))[0]) - 0.5 * self.c * tau

    def _phi(self, w):
        return complex(self.kmap.phi(w)[0])

    def _resid(self, w, target):
        r = self._phi(w) - target
        if self.kmap.multiplicative:
            r = complex(r.real, (r.imag + math.pi) % TWO_PI - math.pi)
        return r

    def _P(self, w):
        return complex(eval_P_array(self.family, [w], 0, self.N)[0])

    # ----- inversion ------------------------------------------------------
    def newton(self, target: complex, seed: complex, maxit: int = 40):
        """Solve ``phi(w) = target`` for w in the upper half-plane, or return None.

        Acceptance allows for the residual that rounding of w itself causes,
        ``eps |w| |phi'(w)|``, which dominates close to the limit point.
        """
        w = complex(seed)
        if not w.imag > 0:
            return None
        scale = 1.0 + abs(target)
        try:
            r = self._resid(w, target)
        except (ValueError, FloatingPointError):
            return None
        for _ in range(maxit):
            P = self._P(w)
            floor = 64 * _EPS * ((1.0 + abs(w)) * abs(self.c / P) + scale)
            if abs(r) <= max(self.tol * scale, floor):
                return w
            step = r * P / self.c
            lam = 1.0
            while True:
                wn = w - lam * step
                rn = None
                if wn.imag > 0:
                    try:
                        rn = self._resid(wn, target)
                    except (ValueError, FloatingPointError):
                        rn = None
                    if rn is not None and math.isfinite(abs(rn)) and abs(rn) < abs(r) * (1 - 0.1 * lam):
                        break
                lam *= 0.5
                if lam < 1e-4:
                    return w if abs(r) <= max(1e-10 * scale, 4 * floor) else None
            w, r = wn, rn
        return w if abs(r) <= max(1e-10 * scale, floor) else None

    def invert_h(self, w_target: complex, seed: complex, path=None, max_stages: int = 4096):
        """Find z in the upper half-plane with ``h(z) = w_target``.

        ``path`` is an optional sequence of h-values leading from ``h(seed)``
        to ``w_target``; Newton is continued along it, halving stages on
        failure.
        """
        if self.kmap.multiplicative and w_target == 0:
            if self.kmap.case == "ComplexPair":
                return complex(self.kmap.pf.beta)   # h vanishes only at beta
            raise InversionError("h has no zero in the upper half-plane")
        to_phi = (lambda v: complex(np.log(v))) if self.kmap.multiplicative else complex
        if path is None:
            path = [w_target]
        z = complex(seed)
        stages = 0
        prev = to_phi(complex(self.kmap.eval_h(z)[0]))
        for wv in list(path):
            goal = to_phi(wv)
            if self.kmap.multiplicative:
                goal = complex(goal.real, prev.imag + ((goal.imag - prev.imag + math.pi) % TWO_PI - math.pi))
            s, ds = 0.0, 1.0
            while s < 1.0:
                s1 = min(1.0, s + ds)
                zn = self.newton(prev + (goal - prev) * (s1 - s) / (1.0 - s) if s < 1 else goal, z)
                stages += 1
                if stages > max_stages:
                    raise InversionError("continuation exceeded its stage budget")
                if zn is None:
                    ds *= 0.5
                    if ds < 1e-14:
                        raise InversionError(
                            "Newton step collapsed; the target may lie on a slit of the image")
                    continue
                prev = prev + (goal - prev) * (s1 - s) / (1.0 - s) if s < 1 else goal
                z, s = zn, s1
                ds = min(2 * ds, 1.0 - s) if s < 1 else ds
        res = abs(complex(self.kmap.eval_h(z)[0]) - w_target)
        if res > 1e-10 * (1 + abs(w_target)):
            raise InversionError(f"final residual {res:.3e}")
        return z

    def eval_f(self, z: complex, t: float, seed: complex | None = None) -> complex:
        """``f(z, t)``; continued in t from ``f(z, 0) = z`` unless a seed is given."""
        z = complex(z)
        if not z.imag > 0:
            raise ValueError("z must lie in the upper half-plane")
        if not 0.0 <= t < 1.0:
            raise ValueError("t must lie in [0, 1)")
        if t == 0.0:
            return z
        tau_end = -math.log1p(-t)
        if seed is not None:
            w = self.newton(self._target(z, tau_end), seed)
            if w is not None:
                return w
        tau, w, dtau = 0.0, z, tau_end / 4
        steps = 0
        while tau < tau_end:
            tn = min(tau_end, tau + dtau)
            wn = self.newton(self._target(z, tn), w)
            steps += 1
            if steps > 20000:
                raise InversionError("eval_f continuation exceeded its budget")
            if wn is None:
                dtau *= 0.5
                if dtau < 1e-14 * max(1.0, tau_end):
                    raise InversionError(f"continuation failed at tau={tau}")
                continue
            tau, w = tn, wn
            dtau *= 1.5
        return w

    # ----- tip traces -----------------------------------------------------
    def _tip_phi(self, n):
        k = self._k[n]
        return complex(self.kmap.phi(complex(k, 0.0))[0])

    def _start_tau(self, n):
        """Small tau where the local square-root seed is accurate."""
        k, b = self._k[n], self._b[n]
        others = np.delete(self._k, n)
        scale = [1.0]
        if len(others):
            scale.append(float(np.min(np.abs(others - k))))
        bp = self.kmap.boundary_points()
        if len(bp):
            scale.append(float(np.min(np.abs(bp - k))))
        lim = self.limit
        scale.append(abs(lim - k))
        eps = 1e-4 * min(scale)
        return (eps / 2.0) ** 2 / b

    def _trace_taus(self, n, taus):
        """Continue the tip of slit n through the increasing tau values."""
        k, b = self._k[n], self._b[n]
        tau0 = min(self._start_tau(n), taus[0] if len(taus) and taus[0] > 0 else np.inf)
        # h has a critical point at k_n: phi - phi(k_n) ~ c (w - k_n)^2 / (8 b_n)
        w = self.newton(self._tip_phi(n) - 0.5 * self.c * tau0, complex(k, 2.0 * math.sqrt(b * tau0)))
        if w is None:
            raise TraceError(f"trace of slit {n} failed to start", [])
        return self._trace_from(n, tau0, w, taus)

    @staticmethod
    def _predict(hist, tn, lim):
        if len(hist) < 2:
            return hist[-1][1]
        (t1, w1), (t2, w2) = hist[-2], hist[-1]
        if t2 == t1:
            return w2
        d1, d2 = w1 - lim, w2 - lim
        if d1 != 0 and d2 != 0:
            l1, l2 = np.log(d1), np.log(d2)
            # keep the branch continuous
            l2 = complex(l2.real, l1.imag + ((l2.imag - l1.imag + math.pi) % TWO_PI - math.pi))
            lp = l2 + (l2 - l1) * (tn - t2) / (t2 - t1)
            wp = lim + complex(np.exp(lp))
            if wp.imag > 0:
                return wp
        wp = w2 + (w2 - w1) * (tn - t2) / (t2 - t1)
        return wp if wp.imag > 0 else w2

    def trace_tip(self, n: int, t_grid=None, tail: bool = False, tail_stop: float = 1e-10,
                  tau_cap: float = 1e6, tail_per_decade: int = 48) -> Trajectory:
        """Trace ``gamma_n(t) = f(k_n sqrt(1-t), t)`` over ``t_grid``.

        With ``tail=True`` the trace continues in ``tau = -log(1-t)`` beyond
        the grid until the distance to the limit point falls below
        ``tail_stop * max(1, |limit|)`` or ``tau`` reaches ``tau_cap``.
        """
        t_grid = default_t_grid() if t_grid is None else np.asarray(t_grid, dtype=float)
        if len(t_grid) == 0 or t_grid[0] != 0.0 or np.any(np.diff(t_grid) <= 0):
            raise ValueError("t_grid must be increasing and start at 0")
        if t_grid[-1] >= 1.0:
            raise ValueError("t_grid must stay below 1")
        k = float(self._k[n])
        taus = -np.log1p(-t_grid[1:])
        gam = [complex(k, 0.0)]
        try:
            gam += self._trace_taus(n, taus)
        except TraceError as exc:
            m = len(exc.partial or [])
            exc.partial = Trajectory(n, k, t_grid[:m + 1], np.concatenate([[0.0], taus[:m]]),
                                     np.array(gam + list(exc.partial or [])), self.limit, m + 1)
            raise
        tau_all = np.concatenate([[0.0], taus])
        traj = Trajectory(n, k, t_grid.copy(), tau_all, np.array(gam), self.limit, len(t_grid))
        if tail:
            self.extend_tail(traj, tail_stop, tau_cap, tail_per_decade)
        return traj

    def extend_tail(self, traj: Trajectory, stop: float = 1e-10, tau_cap: float = 1e6,
                    per_decade: int = 48) -> Trajectory:
        """Append samples at logarithmically spaced tau beyond the last one."""
        lim = self.limit
        thresh = stop * max(1.0, abs(lim))
        tau = max(float(traj.tau[-1]), 1.0)
        ratio = 10.0 ** (1.0 / per_decade)
        new_tau, new_gam = [], []
        hist_tau, hist_w = float(traj.tau[-1]), complex(traj.gamma[-1])
        chunk = []
        while tau < tau_cap and (not new_gam or abs(new_gam[-1] - lim) > thresh):
            tau *= ratio
            chunk.append(tau)
            if len(chunk) == 8:
                new_gam += self._trace_from(traj.n, hist_tau, hist_w, chunk)
                new_tau += chunk
                hist_tau, hist_w = chunk[-1], new_gam[-1]
                chunk = []
        if chunk:
            new_gam += self._trace_from(traj.n, hist_tau, hist_w, chunk)
            new_tau += chunk
        traj.tau = np.concatenate([traj.tau, new_tau])
        traj.t = np.concatenate([traj.t, -np.expm1(-np.array(new_tau))])
        traj.gamma = np.concatenate([traj.gamma, new_gam])
        return traj

    def _trace_from(self, n, tau0, w0, taus, max_steps=200000):
        phik = self._tip_phi(n)
        half_c = 0.5 * self.c
        out = []
        hist = [(tau0, w0)]
        tau, w = tau0, w0
        dtau = max(taus[0] - tau0, tau0) if len(taus) else tau0
        steps = 0
        for goal in taus:
            while tau < goal:
                tn = min(goal, tau + dtau)
                lim_step = 0.5 if self.kmap.multiplicative else 0.25 * (1.0 + abs(phik - half_c * tau))
                if abs(half_c) * (tn - tau) > lim_step:
                    tn = tau + lim_step / abs(half_c)
                seed = self._predict(hist, tn, self.limit)
                wn = self.newton(phik - half_c * tn, seed)
                if wn is None and seed != w:
                    wn = self.newton(phik - half_c * tn, w)
                steps += 1
                if steps > max_steps:
                    raise TraceError(f"slit {n}: continuation budget exhausted at tau={tau}", out)
                if wn is None:
                    dtau = 0.5 * (tn - tau)
                    if dtau < 1e-15 * max(1.0, tau):
                        raise TraceError(f"slit {n}: step collapse at tau={tau}", out)
                    continue
                dtau = 2.0 * (tn - tau)
                tau, w = tn, wn
                hist.append((tau, w))
                if len(hist) > 3:
                    hist.pop(0)
            out.append(w)
        return out


# ----------------------------------------------------------------------------
# ODE oracle

@dataclass
class OracleResult:
    value: complex
    t: float
    absorbed: bool
    nearest_k: float | None = None
    nfev: int = 0


def _rhs_factory(k, b, direction=1.0):
    def rhs(t, y):
        w = complex(y[0], y[1])
        v = kernels.loewner_rhs(w, math.sqrt(max(1.0 - t, 0.0)), k, b)
        return [direction * v.real, direction * v.imag]
    return rhs


def ode_oracle(family, z: complex, t_end: float, tol: float = 1e-10, t_start: float = 0.0,
               N: int | None = None) -> OracleResult:
    """Integrate ``dw/dt = sum 2 b_n / (w - k_n sqrt(1-t))`` from ``w(t_start) = z``.

    Uses an embedded 8(5,3) Runge-Kutta pair. Integration stops at the
    absorption time when the solution comes within ``max(10 tol, 1e-7)``
    of the moving driving set.
    """
    z = complex(z)
    if t_end <= t_start:
        return OracleResult(z, t_start, False)
    k, b = family.arrays(N)
    k = np.ascontiguousarray(k)
    b = np.ascontiguousarray(b)
    thresh = max(10 * tol, 1e-7)

    def hit(t, y):
        s = math.sqrt(max(1.0 - t, 0.0))
        return float(np.min(np.abs(complex(y[0], y[1]) - k * s))) - thresh
    hit.terminal = True
    hit.direction = -1

    sol = solve_ivp(_rhs_factory(k, b), (t_start, t_end), [z.real, z.imag], method="DOP853",
                    rtol=tol, atol=tol * 1e-2, events=hit)
    w = complex(sol.y[0, -1], sol.y[1, -1])
    s = math.sqrt(max(1.0 - sol.t[-1], 0.0))
    nearest = float(k[np.argmin(np.abs(w - k * s))])
    if sol.status == 1:
        return OracleResult(w, float(sol.t_events[0][0]), True, nearest, sol.nfev)
    if sol.status != 0:
        raise OracleError(f"{sol.message} near driving point {nearest} at t={sol.t[-1]}")
    return OracleResult(w, float(sol.t[-1]), False, nearest, sol.nfev)


def f_oracle(family, z: complex, t: float, tol: float = 1e-11, N: int | None = None) -> complex:
    """``f(z, t)`` by integrating the same equation backward from ``(t, z)`` to 0.

    Going backward the imaginary part grows, so this direction is stable.
    """
    z = complex(z)
    if t == 0:
        return z
    k, b = family.arrays(N)
    sol = solve_ivp(_rhs_factory(np.ascontiguousarray(k), np.ascontiguousarray(b)),
                    (t, 0.0), [z.real, z.imag], method="DOP853", rtol=tol, atol=tol * 1e-2)
    if sol.status != 0:
        raise OracleError(sol.message)
    return complex(sol.y[0, -1], sol.y[1, -1])


# ----------------------------------------------------------------------------
# validation

@dataclass
class ValidationReport:
    roundtrip: list = field(default_factory=list)     # (z, t, error)
    pde: list = field(default_factory=list)           # (z, t, residual)
    hydro: list = field(default_factory=list)         # (y, t, |w - iy|, bound)
    tol: float = 1e-8
    tol_fd: float = 1e-5

    @property
    def worst_roundtrip(self) -> float:
        return max((e for *_, e in self.roundtrip), default=0.0)

    @property
    def worst_pde(self) -> float:
        return max((e for *_, e in self.pde), default=0.0)

    @property
    def hydro_ok(self) -> bool:
        return all(d < bound for _, _, d, bound in self.hydro)

    @property
    def passed(self) -> bool:
        return self.worst_roundtrip < self.tol and self.worst_pde < self.tol_fd and self.hydro_ok


def pde_residual(ev: FlowEvaluator, z: complex, t: float, h: float = 1e-4) -> float:
    """``|df/dt + f'(z,t) sum 2 b_n / (z - k_n sqrt(1-t))|`` by central differences."""
    w = ev.eval_f(z, t)
    hz = h * max(1.0, abs(z))
    fp = (ev.eval_f(z + hz, t, seed=w) - ev.eval_f(z - hz, t, seed=w)) / (2 * hz)
    ht = h * min(1.0, 1.0 - t) * 0.5
    if t - ht < 0:
        ft = (ev.eval_f(z, t + ht, seed=w) - w) / ht if t == 0 else \
            (ev.eval_f(z, t + ht, seed=w) - ev.eval_f(z, t, seed=w)) / ht
        if t == 0:
            # second-order one-sided difference at t = 0
            f2 = ev.eval_f(z, t + 2 * ht, seed=w)
            ft = (-3 * z + 4 * ev.eval_f(z, t + ht, seed=w) - f2) / (2 * ht)
    else:
        ft = (ev.eval_f(z, t + ht, seed=w) - ev.eval_f(z, t - ht, seed=w)) / (2 * ht)
    rhs = kernels.loewner_rhs(z, math.sqrt(1 - t), ev._k, ev._b)
    return abs(ft + fp * rhs)


def validate_flow(ev: FlowEvaluator, samples, tol: float = 1e-8, tol_fd: float = 1e-5,
                  hydro_y=(10.0, 100.0, 1000.0), hydro_t: float = 0.9) -> ValidationReport:
    """Round trip through the ODE, PDE residual and the hydrodynamic decay check."""
    rep = ValidationReport(tol=tol, tol_fd=tol_fd)
    for z, t in samples:
        w = ev.eval_f(z, t)
        back = ode_oracle(ev.family, w, t, tol=1e-12, N=ev.N)
        rep.roundtrip.append((z, t, abs(back.value - z) if not back.absorbed else math.inf))
        rep.pde.append((z, t, pde_residual(ev, z, t)))
    total_b = float(np.sum(ev._b)) + ev.family.tail_weight(ev.N)
    for y in hydro_y:
        r = ode_oracle(ev.family, complex(0.0, y), hydro_t, tol=1e-12, N=ev.N)
        d = abs(r.value - complex(0.0, y))
        rep.hydro.append((y, hydro_t, d, 4.0 * total_b / y * (1 + 1e-6)))
    return rep
