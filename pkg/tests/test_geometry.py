import math

import numpy as np
import pytest

from loewnerflow.config import SlitFamily, canonical_family
from loewnerflow.flow import FlowEvaluator
from loewnerflow.geometry import (InsufficientTail, approach_angle, harmonic_measure_halfplane,
                                  harmonic_measure_sector, sector_report, verdict_consistent)
from loewnerflow.koenigs import KoenigsMap, tip_points
from loewnerflow.roots import classify, tune_double, tune_triple


def setup(fam):
    km = KoenigsMap(classify(fam))
    return km, FlowEvaluator(km)


def reports(fam):
    km, ev = setup(fam)
    psi = getattr(km.classification.case, "psi", None)
    out = []
    for n in range(len(ev._k)):
        out.append(approach_angle(ev.trace_tip(n, tail=True), psi=psi))
    return km, out


def test_distinct_real_angles_match_tips():
    km, reps = reports(canonical_family("distinct_real"))
    for rep, tip in zip(reps, tip_points(km)):
        assert rep.verdict == "non-tangential"
        assert abs(rep.angle - (math.pi - np.angle(tip[2]))) < 0.02
        assert 0 < rep.angle < math.pi


def test_three_slit_distinct_real():
    km, reps = reports(SlitFamily.finite([(-4, 0.05), (-1, 0.03), (2, 0.1)]))
    assert km.case == "DistinctReal"
    for rep, tip in zip(reps, tip_points(km)):
        assert verdict_consistent(rep, km.case)
        assert abs(rep.angle - (math.pi - np.angle(tip[2]))) < 0.02


@pytest.mark.parametrize("fam", [canonical_family("triple_root"),
                                 tune_triple([-2, 3], [0.5, 1], 0, 1, 0.3)[0]])
def test_orthogonal(fam):
    km, reps = reports(fam)
    assert km.case == "TripleRoot"
    for rep in reps:
        assert rep.verdict == "orthogonal"
        assert abs(rep.angle - math.pi / 2) < 0.02


@pytest.mark.parametrize("fam", [canonical_family("double_root"),
                                 tune_double([3, 5], [0.5, 0.5], 1, 1.0)[0]])
def test_tangential_one_side(fam):
    km, reps = reports(fam)
    assert km.case == "DoubleRoot"
    sides = set()
    for rep in reps:
        assert rep.verdict == "tangential"
        sides.add(round(rep.angle / math.pi))
    assert len(sides) == 1


def test_radial_single():
    km, reps = reports(canonical_family("complex_single"))
    assert reps[0].verdict == "spiral-degenerate-radial"
    assert abs(reps[0].winding) < 1e-6


def test_spiral_asymmetric():
    km, reps = reports(SlitFamily.finite([(-1, 0.2), (0.5, 1.5), (4, 0.1)]))
    assert km.case == "ComplexPair" and abs(km.pf.psi) > 0.01
    assert all(r.verdict.startswith("spiral") for r in reps)
    assert all(verdict_consistent(r, km.case) for r in reps)


def test_insufficient_tail():
    km, ev = setup(canonical_family("distinct_real"))
    tr = ev.trace_tip(0, np.array([0.0, 0.1, 0.2]))
    with pytest.raises(InsufficientTail):
        approach_angle(tr)


def test_harmonic_measure_halfplane():
    assert harmonic_measure_halfplane(1j, -1, 1) == pytest.approx(0.5)
    expect = math.atan2(((10j - 1) / (10j + 1)).imag, ((10j - 1) / (10j + 1)).real) / math.pi
    assert harmonic_measure_halfplane(10j, -1, 1) == pytest.approx(expect)
    assert expect == pytest.approx(0.0635, abs=1e-4)
    vals = [harmonic_measure_halfplane(1j * y, -1, 1) for y in (1, 10, 100)]
    assert vals[0] > vals[1] > vals[2] > 0
    with pytest.raises(ValueError):
        harmonic_measure_halfplane(-1j, -1, 1)


def test_harmonic_measure_sector():
    assert harmonic_measure_sector(np.exp(1j * math.pi / 4), 0, math.pi / 2) == pytest.approx(0.5)
    z = np.exp(1j * math.pi / 3)
    w = harmonic_measure_sector(z, 0, math.pi / 2)
    assert w == pytest.approx(1 / 3)
    # the two edges together carry all the measure
    other = 1 - harmonic_measure_sector(z, 0, math.pi / 2)
    assert w + other == pytest.approx(1.0)
    with pytest.raises(ValueError):
        harmonic_measure_sector(-1 + 0.1j, 0, math.pi / 2)


def test_sector_distinct_real():
    rep = sector_report(KoenigsMap(classify(canonical_family("distinct_real"))))
    assert rep["amplitude_formula"] == pytest.approx(math.pi / 9, rel=1e-12)
    assert abs(rep["amplitude_sampled"] - math.pi / 9) < 1e-6
    assert rep["tips_in_upper_half_plane"]


def test_sector_complex_pair():
    rep = sector_report(KoenigsMap(classify(canonical_family("complex_pair"))))
    assert rep["amplitude_formula"] == pytest.approx(math.pi / 4, rel=1e-12)
    assert abs(rep["amplitude_sampled"] - math.pi / 4) < 1e-6


def test_sector_complex_asymmetric():
    km = KoenigsMap(classify(SlitFamily.finite([(-1, 0.2), (0.5, 1.5), (4, 0.1)])))
    rep = sector_report(km)
    assert abs(rep["amplitude_sampled"] - rep["amplitude_formula"]) < 1e-6


@pytest.mark.parametrize("name", ["double_root", "triple_root"])
def test_strip(name):
    rep = sector_report(KoenigsMap(classify(canonical_family(name))))
    assert rep["strip_width"] == pytest.approx(math.pi, abs=1e-9)
    assert rep["strip_width_scan"] == pytest.approx(math.pi, abs=1e-9)
    assert rep["Q"] == pytest.approx(math.pi, abs=1e-9)
