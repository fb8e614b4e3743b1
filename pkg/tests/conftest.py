import math

import numpy as np
import pytest

from loewnerflow.config import SlitFamily, canonical_family

CASE_FAMILIES = {
    "ComplexPair": "complex_pair",
    "DistinctReal": "distinct_real",
    "DoubleRoot": "double_root",
    "TripleRoot": "triple_root",
}


def numerator_roots(ks, bs):
    """Roots of the numerator of P as a rational function, by companion eigenvalues.

    ``P(z) = (z D(z) + sum 4 b_n D(z)/(z - k_n)) / D(z)`` with ``D = prod (z - k_n)``.
    """
    ks = np.asarray(ks, dtype=float)
    num = np.polymul([1.0, 0.0], np.poly(ks))
    for j, b in enumerate(bs):
        num = np.polyadd(num, 4.0 * b * np.poly(np.delete(ks, j)))
    return np.roots(num)


def random_family(rng, n_min=3, n_max=8, spread=6.0, min_gap=0.05):
    """Random admissible finite family; small weights favour real extra roots."""
    while True:
        n = int(rng.integers(n_min, n_max + 1))
        ks = np.sort(rng.uniform(-spread, spread, n))
        if np.min(np.diff(ks)) < min_gap:
            continue
        scale = rng.choice([0.02, 0.3, 1.5])
        bs = rng.uniform(0.05, 1.0, n) * scale
        return SlitFamily.finite(zip(ks, bs))


@pytest.fixture(scope="session")
def families():
    names = ["complex_single", "complex_pair", "distinct_real", "double_root", "triple_root",
             "lattice"]
    return {n: canonical_family(n) for n in names}


@pytest.fixture(scope="session")
def case_maps():
    from loewnerflow.koenigs import KoenigsMap
    from loewnerflow.roots import classify
    return {case: KoenigsMap(classify(canonical_family(name)))
            for case, name in CASE_FAMILIES.items()}


SQRT8 = 2.0 * math.sqrt(2.0)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
