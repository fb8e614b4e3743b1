import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from loewnerflow.config import SlitFamily, canonical_family
from loewnerflow.pfunc import PoleProximityError, eval_FHG, eval_P, eval_P_array, tail_bound


def test_single_slit_value():
    fam = SlitFamily.finite([(0, 1)])
    assert abs(eval_P(fam, 1j).value - (-3j)) < 1e-15


def test_two_slit_derivative():
    fam = SlitFamily.finite([(-3, 1), (3, 1)])
    assert eval_P(fam, 0, 1).value == pytest.approx(1 / 9, abs=1e-15)


def test_third_derivative():
    fam = SlitFamily.finite([(4, 1)])
    assert eval_P(fam, 2, 3).value == pytest.approx(-1.5, abs=1e-15)


def test_order_range():
    fam = SlitFamily.finite([(4, 1)])
    with pytest.raises(ValueError):
        eval_P(fam, 1j, 6)


def test_pole_refused():
    fam = SlitFamily.finite([(4, 1)])
    with pytest.raises(PoleProximityError):
        eval_P(fam, 4.0)
    with pytest.raises(PoleProximityError):
        eval_P_array(fam, np.linspace(3, 5, 11))


def test_derivatives_match_finite_differences():
    fam = canonical_family("distinct_real")
    z = 0.7 + 0.4j
    h = 1e-5
    for order in range(5):
        fd = (eval_P(fam, z + h, order).value - eval_P(fam, z - h, order).value) / (2 * h)
        assert abs(fd - eval_P(fam, z, order + 1).value) < 1e-6 * max(1, abs(fd))


def test_third_derivative_negative_on_line():
    fam = canonical_family("lattice")
    x = np.linspace(-5.3, 5.3, 200)
    assert np.all(eval_P_array(fam, x + 0j, 3).real < 0)


def test_tail_bound_valid(families):
    fam = families["lattice"]
    for z in (0.5j, 3.3 + 1j, -10.5 + 0.1j):
        for order in range(4):
            a = eval_P(fam, z, order, N=64)
            b = eval_P(fam, z, order, N=80)
            assert abs(a.value - b.value) <= a.tail_bound
    assert tail_bound(families["distinct_real"], 1j, 2) == 0.0


def test_G_at_double_root():
    fam = SlitFamily.finite([(4, 1)])
    z = 1j
    direct = eval_FHG(fam, z, "G", 2.0, "direct")
    dec = eval_FHG(fam, z, "G", 2.0, "decomposed")
    assert abs(direct - 1 / (z - 4)) < 1e-14
    assert abs(dec - 1 / (z - 4)) < 1e-14


def test_H_tends_to_G():
    fam = canonical_family("distinct_real")
    z = 0.3 + 0.9j
    g = eval_FHG(fam, z, "G", 0.5, "decomposed")
    h = eval_FHG(fam, z, "H", (0.5 + 1e-6, 0.5), "decomposed")
    assert abs(g - h) < 1e-5


def test_F_imaginary_part_negative():
    fam = SlitFamily.finite([(-1, 1), (1, 1)])
    beta = 1j * math.sqrt(7)
    rng = np.random.default_rng(3)
    for _ in range(100):
        z = complex(rng.uniform(-5, 5), rng.uniform(0.01, 5))
        assert eval_FHG(fam, z, "F", beta, "direct").imag < 0


@pytest.mark.parametrize("kind,params", [("F", 0.4 + 1.3j), ("H", (-2.3, 0.5)), ("G", 0.5)])
def test_decompositions_agree(families, kind, params):
    rng = np.random.default_rng(11)
    for name in ("complex_single", "complex_pair", "distinct_real", "double_root", "triple_root",
                 "lattice"):
        fam = families[name]
        for _ in range(20):
            z = complex(rng.uniform(-6, 6), rng.uniform(0.05, 4))
            d = eval_FHG(fam, z, kind, params, "direct")
            e = eval_FHG(fam, z, kind, params, "decomposed")
            assert abs(d - e) < 1e-10 * max(1, abs(d))


def test_FHG_argument_errors():
    fam = canonical_family("distinct_real")
    with pytest.raises(ValueError):
        eval_FHG(fam, 1j, "Q", 0)
    with pytest.raises(ValueError):
        eval_FHG(fam, 1j, "H", (0.5, 0.5))
    with pytest.raises(ValueError):
        eval_FHG(fam, 1j, "F", 0.5)


@settings(max_examples=60, deadline=None)
@given(st.floats(-20, 20), st.floats(1e-3, 20))
def test_conjugate_symmetry(x, y):
    fam = canonical_family("complex_pair")
    z = complex(x, y)
    assert abs(eval_P(fam, z.conjugate()).value - eval_P(fam, z).value.conjugate()) < 1e-12 * (1 + abs(z))


def test_imaginary_part_in_upper_half_plane():
    # Im P(z) = y (1 - sum 4 b / |z - k|^2); on the curve where it vanishes P is real
    fam = canonical_family("complex_single")
    assert eval_P(fam, 2j).value == 0
