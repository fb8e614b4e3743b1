"""Compare the compiled and pure-Python series kernels.

Usage: python3 benchmarks/bench_kernels.py [--repeat R]
"""
import argparse
import timeit

import numpy as np

from loewnerflow.kernels import backends


def workloads(rng):
    k = np.sort(rng.uniform(-50, 50, 129))
    b = rng.uniform(0.01, 1.0, 129)
    z = rng.uniform(-50, 50, 4096) + 1j * rng.uniform(0.1, 5, 4096)
    z1 = z[:1].copy()
    coef = rng.normal(size=129) + 0j
    w = 0.3 + 0.7j
    return {
        "p_series 4096 pts, order 0": lambda m: m.p_series(z, k, b, 0),
        "p_series 4096 pts, order 3": lambda m: m.p_series(z, k, b, 3),
        "p_series 1 pt (Newton step)": lambda m: m.p_series(z1, k, b, 1),
        "log_series 4096 pts": lambda m: m.log_series(z, k, coef, 1j),
        "loewner_rhs (ODE step)": lambda m: m.loewner_rhs(w, 0.5, k, b),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    impls = backends()
    rng = np.random.default_rng(1)
    print(f"backends: {', '.join(sorted(impls))}")
    print(f"{'kernel':<30} " + " ".join(f"{n:>14}" for n in sorted(impls)) + "   speedup")
    for name, fn in workloads(rng).items():
        times = {}
        for bname, mod in sorted(impls.items()):
            t = timeit.Timer(lambda: fn(mod))
            n, _ = t.autorange()
            times[bname] = min(t.repeat(args.repeat, n)) / n
        cols = " ".join(f"{times[b] * 1e6:11.1f} us" for b in sorted(impls))
        sp = times["python"] / times["cython"] if "cython" in times else float("nan")
        print(f"{name:<30} {cols}   {sp:6.1f}x")
    # agreement check
    for name, fn in workloads(rng).items():
        if "cython" in impls:
            a, c = np.asarray(fn(impls["python"])), np.asarray(fn(impls["cython"]))
            rel = float(np.max(np.abs(a - c)) / max(1.0, float(np.max(np.abs(a)))))
            print(f"max relative difference, {name}: {rel:.1e}")


if __name__ == "__main__":
    main()
