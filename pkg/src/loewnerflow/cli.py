"""Command-line interface: classify, trace, validate and export-image.

Exit codes: 0 success, 1 configuration error, 2 near-degenerate
classification, 3 validation failure, 4 trace failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys
import tempfile
from dataclasses import dataclass, field

import numpy as np

from .config import FamilyError, SlitFamily, load_family
from .flow import FlowEvaluator, TraceError, default_t_grid, validate_flow
from .geometry import EXPECTED, InsufficientTail, approach_angle, sector_report
from .koenigs import BranchHazard, KoenigsMap, default_grid, spirallike_check, tip_points, \
    univalence_sample, z0_constant
from .pfunc import eval_FHG
from .roots import DEFAULT_TOL, classify, partial_fraction, residue_bound, verify_residue_identity

EXIT_OK, EXIT_CONFIG, EXIT_DEGENERATE, EXIT_VALIDATION, EXIT_TRACE = 0, 1, 2, 3, 4


@dataclass
class RunManifest:
    """Everything that determines the outputs of one command."""

    config: str
    command: str
    n_trunc: int | None = None
    t_max: float = 1.0 - 1e-6
    grid_points: int | None = None
    tol: float = DEFAULT_TOL
    out: str | None = None
    slits: list | None = None
    seed: int = 0
    outputs: list = field(default_factory=list)


# ----------------------------------------------------------------------------
# output helpers

def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _jsonable(obj):
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: _jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def _atomic_write(path: str, text: str) -> None:
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_json(path: str, obj) -> None:
    _atomic_write(path, json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")


def _write_csv(path: str, header: str, rows) -> None:
    lines = [header] + [",".join(r) for r in rows]
    _atomic_write(path, "\n".join(lines) + "\n")


def _out_path(man: RunManifest, name: str) -> str:
    path = os.path.join(man.out or ".", name)
    man.outputs.append(path)
    return path


def _finish(man: RunManifest, code: int) -> int:
    if man.out:
        _write_json(os.path.join(man.out, "manifest.json"), man)
    return code


# ----------------------------------------------------------------------------
# shared pipeline

def _load(man: RunManifest) -> SlitFamily:
    try:
        with open(man.config) as fh:
            text = fh.read()
    except OSError as exc:
        raise FamilyError(f"cannot read config: {exc}") from exc
    fam = load_family(text)
    if man.n_trunc is not None:
        if fam.kind != "parametric":
            raise FamilyError("--n-trunc applies to parametric families only")
        fam = SlitFamily.parametric(fam.rule, fam.param_dict, man.n_trunc, fam.certificate)
    return fam


def _classification_doc(cl, pf=None) -> dict:
    doc = {"case": cl.case_name, "near_degenerate": cl.near_degenerate, "N": cl.N,
           "margins": cl.margins, "case_data": cl.case, "lambdas": list(cl.lambdas),
           "notes": cl.notes, "candidates": list(cl.candidates)}
    if pf is not None:
        doc["residue_residual"] = verify_residue_identity(pf)
        doc["residue_bound"] = residue_bound(pf)
        doc["coefficients"] = {"lam": pf.lam, "A": pf.A, "a": pf.a, "B": pf.B, "A0": pf.A0,
                               "L": pf.L, "b_exp": pf.b_exp, "tail_estimate": pf.tail_estimate}
    return doc


def _describe_case(cl) -> str:
    c = cl.case
    if c is None:
        return "Unresolved"
    if c.name == "ComplexPair":
        return f"ComplexPair beta={_fmt_c(c.beta)} psi={c.psi:.12g}"
    if c.name == "DistinctReal":
        return f"DistinctReal rho1={c.rho1:.15g} rho2={c.rho2:.15g} P'(rho1)={c.dP1:.12g}"
    if c.name == "DoubleRoot":
        return f"DoubleRoot rho0={c.rho0:.15g}"
    return f"TripleRoot rho0={c.rho0:.15g}"


def _fmt_c(z: complex) -> str:
    return f"{z.real:.15g}{z.imag:+.15g}i"


def _resolved(man: RunManifest):
    fam = _load(man)
    cl = classify(fam, tol=man.tol)
    if cl.near_degenerate:
        return fam, cl, None
    return fam, cl, partial_fraction(cl)


# ----------------------------------------------------------------------------
# commands

def cmd_classify(man: RunManifest) -> int:
    fam, cl, pf = _resolved(man)
    print(_describe_case(cl))
    print(f"  truncation N={cl.N}  slits={fam.size(cl.N)}")
    for r in cl.standard_roots[:16]:
        flag = "" if r.resolved else "  (pressed against a pole)"
        print(f"  lambda={r.lam:.15g}  P'={r.dP:.6e}{flag}")
    if len(cl.standard_roots) > 16:
        print(f"  ... {len(cl.standard_roots) - 16} more standard roots")
    for key, val in sorted(cl.margins.items()):
        print(f"  margin {key}={val:.3e}")
    if pf is not None:
        print(f"  residue residual {verify_residue_identity(pf):.1e}"
              f"  bound {residue_bound(pf):.1e}")
    if man.out:
        _write_json(_out_path(man, "classification.json"), _classification_doc(cl, pf))
    if cl.near_degenerate:
        print("near-degenerate: margins below the ambiguity threshold; candidates: "
              + ", ".join(cl.candidates))
        return _finish(man, EXIT_DEGENERATE)
    return _finish(man, EXIT_OK)


def _t_grid(man: RunManifest) -> np.ndarray:
    if man.grid_points is None:
        return default_t_grid(man.t_max)
    m = int(man.grid_points)
    if m < 2:
        raise FamilyError("--grid-points must be at least 2 for tracing")
    # geometric in 1 - t, which is uniform in log(1 - t)
    return np.concatenate([[0.0], 1.0 - (1.0 - man.t_max) ** (np.arange(1, m) / (m - 1))])


def _slit_indices(man: RunManifest, n_slits: int) -> list[int]:
    if not man.slits:
        return list(range(n_slits))
    out = []
    for s in man.slits:
        if not 1 <= s <= n_slits:
            raise FamilyError(f"slit index {s} outside 1..{n_slits}")
        out.append(s - 1)
    return out


def cmd_trace(man: RunManifest) -> int:
    fam, cl, pf = _resolved(man)
    if pf is None:
        print("near-degenerate classification; refusing to trace", file=sys.stderr)
        return _finish(man, EXIT_DEGENERATE)
    ev = FlowEvaluator(KoenigsMap(cl, pf))
    grid = _t_grid(man)
    psi = getattr(cl.case, "psi", None)
    code = EXIT_OK
    for n in _slit_indices(man, fam.size(cl.N)):
        path = _out_path(man, f"slit_{n + 1}.csv")
        try:
            traj = ev.trace_tip(n, grid)
        except TraceError as exc:
            traj = exc.partial
            print(f"slit {n + 1}: continuation failed: {exc}", file=sys.stderr)
            code = EXIT_TRACE
            ok = False
        else:
            ok = True
        m = traj.grid_len
        rows = [(_fmt(t), _fmt(g.real), _fmt(g.imag), _fmt(d))
                for t, g, d in zip(traj.t[:m], traj.gamma[:m], traj.dist[:m])]
        _write_csv(path, "t,re,im,dist_to_limit", rows)
        side = {"slit": n + 1, "k": traj.k, "case": cl.case_name, "limit": traj.limit,
                "complete": ok, "grid_samples": m, "final_dist_grid": float(traj.dist[m - 1])}
        if ok:
            ev.extend_tail(traj)
            side["tail_tau"] = float(traj.tau[-1])
            side["tail_final_dist"] = float(traj.dist[-1])
            try:
                rep = approach_angle(traj, psi=psi)
                side["approach"] = rep
                side["expected_verdicts"] = sorted(EXPECTED[cl.case_name])
            except InsufficientTail as exc:
                side["approach"] = None
                side["approach_error"] = str(exc)
        _write_json(_out_path(man, f"slit_{n + 1}.geometry.json"), side)
        verdict = side.get("approach").verdict if side.get("approach") else "n/a"
        print(f"slit {n + 1}: k={traj.k:.12g} samples={m} final dist={traj.dist[m - 1]:.3e}"
              f" verdict={verdict}")
    return _finish(man, code)


class _Checks:
    def __init__(self):
        self.rows = []

    def add(self, name, worst, threshold, passed=None):
        ok = (worst <= threshold) if passed is None else passed
        self.rows.append((name, bool(ok), float(worst), float(threshold)))

    @property
    def passed(self):
        return all(ok for _, ok, _, _ in self.rows)

    def table(self) -> str:
        w = max(len(r[0]) for r in self.rows)
        lines = [f"{'check':<{w}}  status  {'worst':>10}  {'threshold':>10}"]
        for name, ok, worst, thr in self.rows:
            lines.append(f"{name:<{w}}  {'PASS' if ok else 'FAIL':<6}  {worst:10.3e}  {thr:10.3e}")
        return "\n".join(lines)


def _decomposition_worst(fam, N, rng, lambdas) -> float:
    k, _ = fam.arrays(N)
    lo, hi = float(k[0]) - 2.0, float(k[-1]) + 2.0
    gap = fam.gap(N) if math.isfinite(fam.gap(N)) else 1.0

    def pole_dist(x):
        return float(np.min(np.abs(k - x)))

    # roots pressed against a pole make the decomposed side ill-conditioned
    lambdas = [x for x in lambdas if pole_dist(x) > 1e-3 * gap]
    while len(lambdas) < 2:
        x = rng.uniform(lo, hi)
        if pole_dist(x) > 0.1 * gap and all(x != y for y in lambdas):
            lambdas.append(x)
    worst = 0.0
    for _ in range(20):
        z = complex(rng.uniform(lo, hi), rng.uniform(0.1, 3.0))
        w = complex(rng.uniform(lo, hi), rng.uniform(0.1, 3.0))
        reals = lambdas[:2]
        for kind, params in (("F", w), ("H", tuple(reals)), ("G", reals[0])):
            d = eval_FHG(fam, z, kind, params, "direct", N)
            e = eval_FHG(fam, z, kind, params, "decomposed", N)
            worst = max(worst, abs(d - e) / max(1.0, abs(d)))
    return worst


def _upper_sample(rng, fam, N, n):
    k, _ = fam.arrays(N)
    lo, hi = float(k[0]) - 1.0, float(k[-1]) + 1.0
    return rng.uniform(lo, hi, n) + 1j * rng.uniform(0.2, 2.5, n)


def cmd_validate(man: RunManifest, fault: str | None = None) -> int:
    fam, cl, pf = _resolved(man)
    if pf is None:
        print("near-degenerate classification; validation needs a resolved case", file=sys.stderr)
        return _finish(man, EXIT_DEGENERATE)
    if fault == "residue":
        # test hook: corrupt one partial-fraction coefficient
        if len(pf.A):
            pf.A = pf.A.copy()
            pf.A[0] *= 1.001
        elif pf.A0 is not None:
            pf.A0 = pf.A0 * 1.001 + 1e-3
        else:
            pf.dP_beta = pf.dP_beta * 1.001
    rng = np.random.default_rng(man.seed)
    N = cl.N
    checks = _Checks()
    checks.add("decomposition F/H/G", _decomposition_worst(fam, N, rng, list(cl.lambdas)), 1e-10)
    thr = 1e-10 if fam.kind == "finite" else max(residue_bound(pf), 1e-10)
    checks.add("residue identity", verify_residue_identity(pf), thr)

    kmap = KoenigsMap(cl, pf)
    k, _ = fam.arrays(N)
    box = (float(k[0]) - 2.0, float(k[-1]) + 2.0, 0.05, 4.0)
    uni = univalence_sample(kmap, 1000, box, seed=man.seed)
    checks.add("univalence (min |dh|/|dz|)", uni, 0.0, passed=uni > 1e-8)
    if kmap.case == "ComplexPair":
        margin = spirallike_check(kmap, _upper_sample(rng, fam, N, 100))
        checks.add("spirallike margin", margin, 0.0, passed=margin > 0)

    sample = _upper_sample(rng, fam, N, 12)
    worst = 0.0
    for z0 in _upper_sample(rng, fam, N, 5):
        worst = max(worst, z0_constant(kmap, complex(z0), sample)[1])
    checks.add("z0 invariance", worst, 1e-9)

    ev = FlowEvaluator(kmap)
    pts = _upper_sample(rng, fam, N, 5)
    ts = rng.uniform(0.05, 0.9, 5)
    rep = validate_flow(ev, list(zip(pts, ts)))
    checks.add("flow round trip", rep.worst_roundtrip, rep.tol)
    checks.add("PDE residual", rep.worst_pde, rep.tol_fd)
    checks.add("hydrodynamic decay", max(d / b for _, _, d, b in rep.hydro), 1.0)

    # verdicts on the slits closest to the limit point
    lim = cl.limit_point
    order = np.argsort(np.abs(k - lim.real))[:4]
    verdicts, angles = [], []
    psi = getattr(cl.case, "psi", None)
    for n in sorted(int(i) for i in order):
        try:
            traj = ev.trace_tip(n, tail=True)
            r = approach_angle(traj, psi=psi)
            verdicts.append(r.verdict)
            angles.append(r.angle)
        except (TraceError, InsufficientTail):
            verdicts.append("failed")
    bad = sum(v not in EXPECTED[cl.case_name] for v in verdicts)
    if cl.case_name == "DoubleRoot" and not bad:
        sides = {round(a / math.pi) for a in angles}
        bad = int(len(sides) > 1)
    checks.add("approach verdicts", bad, 0.0)

    print(f"{_describe_case(cl)}  N={N}")
    print(checks.table())
    code = EXIT_OK if checks.passed else EXIT_VALIDATION
    if man.out:
        _write_json(_out_path(man, "validation.json"),
                    {"case": cl.case_name, "passed": checks.passed,
                     "checks": [{"name": a, "passed": b, "worst": c, "threshold": d}
                                for a, b, c, d in checks.rows], "verdicts": verdicts})
    return _finish(man, code)


# bit flags in the exported image scan
FLAG_TIP = 1          # x is a driving point; h(x) is a slit tip
FLAG_TRUNCATION = 2   # truncation error estimate not small against |h|
FLAG_BRANCH = 4       # arg h jumps across the principal branch since the previous row


def cmd_export_image(man: RunManifest) -> int:
    fam, cl, pf = _resolved(man)
    if pf is None:
        print("near-degenerate classification; refusing to export", file=sys.stderr)
        return _finish(man, EXIT_DEGENERATE)
    kmap = KoenigsMap(cl, pf)
    n = man.grid_points or 4096
    grid = default_grid(kmap, n)
    tips = tip_points(kmap)
    tip_x = np.array([t[1] for t in tips])
    x = np.unique(np.concatenate([grid, tip_x]))
    try:
        h = kmap.eval_boundary(x)
    except BranchHazard as exc:
        print(f"export failed: {exc}", file=sys.stderr)
        return _finish(man, EXIT_CONFIG)
    flags = np.zeros(len(x), dtype=int)
    flags[np.isin(x, tip_x)] |= FLAG_TIP
    trunc = {t[1] for t in tips if t[3]}
    flags[np.isin(x, list(trunc))] |= FLAG_TRUNCATION
    arg = np.angle(h)
    jump = np.concatenate([[False], np.abs(np.diff(arg)) > math.pi])
    flags[jump] |= FLAG_BRANCH
    rows = [(_fmt(a), _fmt(v.real), _fmt(v.imag), str(f)) for a, v, f in zip(x, h, flags)]
    path = _out_path(man, "image.csv")
    _write_csv(path, "x,re_h,im_h,branch_flags", rows)
    _write_json(_out_path(man, "image.json"), {"rows": len(rows), "geometry": sector_report(kmap)})
    print(f"{_describe_case(cl)}: wrote {len(rows)} rows to {path}")
    return _finish(man, EXIT_OK)


# ----------------------------------------------------------------------------
# argument parsing

def _slit_list(text: str) -> list[int]:
    try:
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad slit list {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="loewnerflow",
                                description="Explicit Loewner flows with square-root driving functions.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, metavar="PATH", help="slit-family JSON document")
    common.add_argument("--n-trunc", type=int, default=None, metavar="N",
                        help="truncation for parametric families")
    common.add_argument("--t-max", type=float, default=1.0 - 1e-6, help="last time of the t grid")
    common.add_argument("--grid-points", type=int, default=None,
                        help="t-grid size (trace) or real-grid size (export-image)")
    common.add_argument("--tol", type=float, default=DEFAULT_TOL, help="classification tolerance")
    common.add_argument("--out", default=None, metavar="DIR", help="output directory")
    common.add_argument("--slits", type=_slit_list, default=None, metavar="i,j,k",
                        help="1-based slit indices to trace")
    common.add_argument("--seed", type=int, default=0, help="seed for randomized checks")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("classify", parents=[common], help="classify the roots of P")
    sub.add_parser("trace", parents=[common], help="trace slit tips to their limit")
    v = sub.add_parser("validate", parents=[common], help="run the validation suite")
    v.add_argument("--inject-fault", choices=["residue"], default=None, help=argparse.SUPPRESS)
    sub.add_parser("export-image", parents=[common], help="sample h on the real line")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    man = RunManifest(config=args.config, command=args.command, n_trunc=args.n_trunc,
                      t_max=args.t_max, grid_points=args.grid_points, tol=args.tol, out=args.out,
                      slits=args.slits, seed=args.seed)
    if not 0.0 < man.t_max < 1.0:
        print("config error: --t-max must lie in (0, 1)", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.command == "classify":
            return cmd_classify(man)
        if args.command == "trace":
            return cmd_trace(man)
        if args.command == "validate":
            return cmd_validate(man, args.inject_fault)
        return cmd_export_image(man)
    except FamilyError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
