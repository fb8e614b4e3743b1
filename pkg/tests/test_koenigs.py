import cmath
import math

import numpy as np
import pytest

from loewnerflow.config import SlitFamily, canonical_family
from loewnerflow.koenigs import (BranchHazard, KoenigsMap, default_grid, image_boundary_scan,
                                 spirallike_check, tip_points, univalence_sample, z0_constant)
from loewnerflow.pfunc import eval_P
from loewnerflow.roots import classify


def kmap_of(pairs, **kw):
    return KoenigsMap(classify(SlitFamily.finite(pairs)), **kw)


def test_case1_closed_form():
    km = kmap_of([(0, 1)])
    for z in (0.3 + 1j, -2 + 0.5j, 4j):
        assert abs(km.eval_h(z)[0] - (z * z + 4) / 3) < 1e-13
        assert abs(km.eval_h_prime(z)[0] - 2 * z / 3) < 1e-13
    assert abs(km.eval_h_prime(2j)[0] - 4j / 3) < 1e-12


def test_case1_tip():
    km = kmap_of([(0, 1)])
    (_, k, h, flagged), = tip_points(km)
    assert k == 0 and not flagged
    assert abs(h - 4 / 3) < 1e-14


def test_case2_value_at_base_point():
    km = kmap_of([(-3, 1), (3, 1)])
    z0 = km.z0
    expect = (z0 - 1) ** (4 / 9) / z0
    assert abs(km.eval_h(z0)[0] - expect) < 1e-13


def test_case2_tip_symmetry():
    km = kmap_of([(-3, 1), (3, 1)])
    tips = tip_points(km)
    args = [cmath.phase(t[2]) for t in tips]
    assert args[0] + args[1] == pytest.approx(math.pi, abs=1e-12)
    assert all(t[2].imag > 0 for t in tips)


def test_case3a_closed_form():
    km = kmap_of([(4, 1)])
    for z in (0.3 + 1j, 5 + 0.5j):
        h = km.eval_h(z)[0]
        expect = cmath.log(z - 2) + 2 / (z - 2)
        assert abs(h - expect) < 1e-13
        assert abs(km.eval_h_prime(z)[0] - (z - 4) / (z - 2) ** 2) < 1e-13


def test_case3a_levels():
    km = kmap_of([(4, 1)])
    assert km.eval_boundary(3.0)[0].imag == pytest.approx(0.0, abs=1e-15)
    assert km.eval_boundary(0.0)[0].imag == pytest.approx(math.pi, abs=1e-15)
    assert km.eval_boundary(7.0)[0].imag == pytest.approx(0.0, abs=1e-15)
    rep = image_boundary_scan(km).report
    assert rep["strip_width"] == pytest.approx(math.pi, abs=1e-12)


def test_boundary_root_refused():
    km = kmap_of([(4, 1)])
    with pytest.raises(BranchHazard):
        km.eval_boundary(2.0)


@pytest.mark.parametrize("case", ["ComplexPair", "DistinctReal", "DoubleRoot", "TripleRoot"])
def test_derivative_by_finite_difference(case_maps, case):
    km = case_maps[case]
    z, h = 2j, 1e-5
    fd = (km.eval_h(z + h)[0] - km.eval_h(z - h)[0]) / (2 * h)
    an = km.eval_h_prime(z)[0]
    assert abs(fd - an) < 1e-7 * max(1, abs(an))


@pytest.mark.parametrize("case", ["ComplexPair", "DistinctReal", "DoubleRoot", "TripleRoot"])
def test_logarithmic_derivative_identity(case_maps, case):
    km = case_maps[case]
    for z in (0.4 + 0.8j, -3 + 2j):
        P = eval_P(km.family, z).value
        h, hp = km.eval_h(z)[0], km.eval_h_prime(z)[0]
        lhs = hp * P
        rhs = km.c * h if km.multiplicative else 1.0
        assert abs(lhs - rhs) < 1e-12 * max(1, abs(rhs))


@pytest.mark.parametrize("case", ["ComplexPair", "DistinctReal", "DoubleRoot", "TripleRoot"])
def test_base_point_changes_h_by_constant(case_maps, case):
    km = case_maps[case]
    rng = np.random.default_rng(5)
    sample = rng.uniform(-4, 4, 10) + 1j * rng.uniform(0.1, 3, 10)
    for z0 in (0.5 + 0.5j, -2 + 1j, 3j, 1 + 0.1j, -0.7 + 2j):
        _, spread = z0_constant(km, z0, sample)
        assert spread < 1e-9


def test_base_point_must_be_interior(case_maps):
    with pytest.raises(ValueError):
        KoenigsMap(case_maps["DoubleRoot"].classification, z0=1.0)


@pytest.mark.parametrize("case", ["DoubleRoot", "TripleRoot"])
def test_conjugate_symmetry_additive(case_maps, case):
    # real coefficients: in the normalized gauge h(conj z) = conj h(z)
    km = case_maps[case]
    z = np.array([0.5j, 1j, 3j, 1 + 2j, -2 + 0.3j])
    lhs = km.eval_h(z.conj(), normalized=True)
    rhs = np.conj(km.eval_h(z, normalized=True))
    assert np.max(np.abs(lhs - rhs)) < 1e-12


def test_spirallike_examples():
    km = kmap_of([(0, 1)])
    assert spirallike_check(km, [1j, 1 + 1j, -2 + 3j]) > 0
    km = kmap_of([(0, 1), (1, 1)])
    rng = np.random.default_rng(8)
    assert spirallike_check(km, rng.uniform(-4, 4, 100) + 1j * rng.uniform(0.01, 4, 100)) > 0
    with pytest.raises(ValueError):
        spirallike_check(kmap_of([(4, 1)]), [1j])


@pytest.mark.parametrize("case", ["ComplexPair", "DistinctReal", "DoubleRoot", "TripleRoot"])
def test_univalence_sampling(case_maps, case):
    assert univalence_sample(case_maps[case], 1000, seed=3) > 1e-8


def test_default_grid_avoids_special_points():
    km = kmap_of([(-3, 1), (3, 1)])
    g = default_grid(km)
    assert len(g) > 3000
    assert np.min(np.abs(g[:, None] - np.array([-3, -1, 0, 1, 3])[None, :])) > 0
    assert np.all(np.diff(g) > 0)


def test_lattice_tips_flag_far_slits(families):
    km = KoenigsMap(classify(families["lattice"]))
    tips = tip_points(km)
    assert len(tips) == 128
    assert not any(flag for _, k, _, flag in tips if abs(k) < 10)


def test_image_scan_reports(case_maps):
    rep = image_boundary_scan(case_maps["ComplexPair"]).report
    assert rep["spiral_amplitude"] == pytest.approx(math.pi / 4, rel=1e-12)
    rep = image_boundary_scan(case_maps["DistinctReal"]).report
    assert rep["sector_amplitude"] == pytest.approx(math.pi / 9, rel=1e-12)
