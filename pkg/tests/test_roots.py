import math

import numpy as np
import pytest

from conftest import SQRT8, numerator_roots, random_family
from loewnerflow.config import SlitFamily, build_intervals, canonical_family
from loewnerflow.roots import (AMBIGUOUS, ClassificationError, classify, find_standard_roots,
                               partial_fraction, residue_bound, tune_double, tune_triple,
                               verify_residue_identity)


def test_standard_roots_two_slits():
    fam = SlitFamily.finite([(-3, 1), (3, 1)])
    roots = find_standard_roots(fam)
    assert [r.lam for r in roots] == pytest.approx([-1.0, 1.0], abs=1e-12)
    assert [r.dP for r in roots] == pytest.approx([-0.25, -0.25], abs=1e-12)


def test_no_standard_roots_single():
    assert find_standard_roots(SlitFamily.finite([(0, 1)])) == []


def test_standard_root_complex_pair():
    roots = find_standard_roots(SlitFamily.finite([(-1, 1), (1, 1)]))
    assert len(roots) == 1
    assert roots[0].lam == pytest.approx(0, abs=1e-14)
    assert roots[0].dP == pytest.approx(-7, rel=1e-13)


def test_classify_single():
    cl = classify(SlitFamily.finite([(0, 1)]))
    assert cl.case_name == "ComplexPair"
    assert abs(cl.case.beta - 2j) < 1e-12
    assert abs(cl.case.psi) < 1e-12


def test_classify_double():
    cl = classify(SlitFamily.finite([(4, 1)]))
    assert cl.case_name == "DoubleRoot"
    assert cl.case.rho0 == pytest.approx(2.0, abs=1e-12)
    assert math.isinf(cl.case.interval.left)


def test_classify_triple():
    cl = classify(SlitFamily.finite([(-SQRT8, 1), (SQRT8, 1)]))
    assert cl.case_name == "TripleRoot"
    assert cl.case.rho0 == pytest.approx(0.0, abs=1e-12)
    assert cl.lambdas == ()


def test_classify_distinct_labels():
    cl = classify(SlitFamily.finite([(-3, 1), (3, 1)]))
    c = cl.case
    assert c.name == "DistinctReal"
    assert c.rho1 == pytest.approx(0.0, abs=1e-12)
    assert c.rho2 == pytest.approx(1.0, abs=1e-12)
    assert c.dP1 == pytest.approx(1 / 9, rel=1e-12)
    assert c.dP1 > 0 > c.dP2
    assert list(cl.lambdas) == pytest.approx([-1.0], abs=1e-12)


def test_partial_fraction_double():
    pf = partial_fraction(classify(SlitFamily.finite([(4, 1)])))
    assert pf.B == pytest.approx(-2.0, abs=1e-12)
    assert pf.A0 == pytest.approx(1.0, abs=1e-12)
    for z in (1j, 3 + 0.5j, -7 + 2j):
        assert abs(pf.expansion(z) - (z - 4) / (z - 2) ** 2) < 1e-13


def test_partial_fraction_triple_expansion():
    fam = canonical_family("triple_root")
    pf = partial_fraction(classify(fam))
    for z in (1j, 3 + 0.5j, -7 + 2j):
        # P = z^3 / (z^2 - 8), so 1/P = 1/z - 8/z^3
        assert abs(pf.expansion(z) - (1 / z - 8 / z ** 3)) < 1e-13
    assert pf.L == pytest.approx(-8.0, rel=1e-12)
    assert pf.B == pytest.approx(0.0, abs=1e-12)
    assert pf.A0 == pytest.approx(1.0, rel=1e-12)


@pytest.mark.parametrize("name", ["complex_single", "complex_pair", "distinct_real",
                                  "double_root", "triple_root"])
def test_expansion_matches_reciprocal(name):
    from loewnerflow.pfunc import eval_P
    fam = canonical_family(name)
    pf = partial_fraction(classify(fam))
    for z in (0.3 + 1j, -2 + 0.2j, 5 + 3j):
        assert abs(pf.expansion(z) - 1 / eval_P(fam, z).value) < 1e-12


def test_residue_identity_values():
    pf = partial_fraction(classify(SlitFamily.finite([(-1, 1), (1, 1)])))
    assert pf.a == pytest.approx([0.25], rel=1e-12)
    terms = pf.residue_terms()
    assert terms[0] == pytest.approx(-1 / 7, rel=1e-12)
    assert terms[1] == pytest.approx(8 / 7, rel=1e-12)
    assert verify_residue_identity(pf) < 1e-12
    pf = partial_fraction(classify(SlitFamily.finite([(-3, 1), (3, 1)])))
    assert sorted(pf.residue_terms()) == pytest.approx([-4, -4, 9], rel=1e-12)
    assert verify_residue_identity(partial_fraction(classify(SlitFamily.finite([(4, 1)])))) < 1e-12


def test_lattice_residual_below_bound():
    fam = canonical_family("lattice")
    for N in (64, 256):
        cl = classify(fam, N=N)
        pf = partial_fraction(cl)
        assert verify_residue_identity(pf) <= residue_bound(pf)
    assert cl.case_name == "DistinctReal"


def test_complex_pair_sum_rule():
    # sum a_n = 2 cos psi - |P'(beta)| follows from the residue identity
    for fam in (SlitFamily.finite([(0, 1), (1, 1)]), SlitFamily.finite([(-1, 0.2), (0.5, 1.5), (4, 0.1)])):
        pf = partial_fraction(classify(fam))
        assert abs(np.sum(pf.a) - (2 * math.cos(pf.psi) - abs(pf.dP_beta))) < 1e-12
        assert -math.pi / 2 < pf.psi < math.pi / 2


def _check_counts(cl):
    for sc in cl.scans:
        if sc.interval.bounded:
            assert sc.count in (1, 3)
        else:
            assert sc.count in (0, 2)


def test_random_families_against_polynomial_oracle():
    rng = np.random.default_rng(2024)
    seen = set()
    for _ in range(100):
        fam = random_family(rng)
        cl = classify(fam)
        k, b = fam.arrays()
        r = numerator_roots(k, b)
        if cl.near_degenerate:
            assert min(cl.margins.values()) < AMBIGUOUS
            continue
        seen.add(cl.case_name)
        _check_counts(cl)
        n_complex = int(np.sum(np.abs(r.imag) > 1e-7))
        assert (cl.case_name == "ComplexPair") == (n_complex == 2)
        if cl.case_name == "ComplexPair":
            beta = r[np.argmax(r.imag)]
            assert abs(beta - cl.case.beta) < 1e-7 * max(1, abs(beta))
        else:
            real = np.sort(r.real)
            ours = np.sort([cl.case.rho1, cl.case.rho2] if cl.case_name == "DistinctReal" else [])
            for x in ours:
                assert np.min(np.abs(real - x)) < 1e-7
        # the real roots found by the scans and the complex pair make n + 1
        total = sum(sc.count for sc in cl.scans) + (2 if cl.case_name == "ComplexPair" else 0)
        assert total == len(k) + 1
    assert {"ComplexPair", "DistinctReal"} <= seen


def test_near_degenerate_flag():
    cl = classify(SlitFamily.finite([(4, 1 - 5e-10)]))
    assert cl.near_degenerate
    assert set(cl.candidates) == {"DistinctReal", "DoubleRoot"}
    with pytest.raises(ClassificationError):
        partial_fraction(cl)


def test_tuned_double_root():
    fam, rho = tune_double([3, 5], [0.5, 0.5], 1, 1.0)
    cl = classify(fam)
    assert cl.case_name == "DoubleRoot"
    assert cl.case.rho0 == pytest.approx(rho, abs=1e-8)
    assert verify_residue_identity(partial_fraction(cl)) < 1e-10


def test_tuned_triple_root():
    fam, rho = tune_triple([-2, 3], [0.5, 1], 0, 1, 0.3)
    cl = classify(fam)
    assert cl.case_name == "TripleRoot"
    assert cl.case.rho0 == pytest.approx(rho, abs=1e-6)
    assert verify_residue_identity(partial_fraction(cl)) < 1e-10


def test_intervals_have_standard_root(families):
    fam = families["lattice"]
    cl = classify(fam)
    st_ = build_intervals(fam)
    held = {r.interval for r in cl.standard_roots}
    assert all(iv in held for iv in st_.bounded)
    assert all(r.dP < 0 for r in cl.standard_roots)


def test_threaded_scan_matches_serial(monkeypatch, families):
    serial = classify(families["lattice"])
    monkeypatch.setenv("LOEWNER_THREADS", "4")
    threaded = classify(families["lattice"])
    assert [r.lam for r in serial.standard_roots] == [r.lam for r in threaded.standard_roots]
    assert serial.case == threaded.case
