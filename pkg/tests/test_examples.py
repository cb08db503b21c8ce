import math

import numpy as np
import pytest
from scipy import integrate

from dyadgehring.examples import (SEG_A, SEG_U, SEG_V, HaircombSpec, gaussian_line_space,
                                  gaussian_mass, h_function, haircomb_center,
                                  haircomb_nondoubling_report, haircomb_rh_boundary, haircomb_space,
                                  haircomb_weight, power_log_weight, unit_interval_space)
from dyadgehring.lattice import cube_measures, parent_doubling_constant, verify_lattice
from dyadgehring.space import ball, doubling_ratios, estimate_kappa0


def test_unit_interval_builder():
    space, L = unit_interval_space(8)
    assert [len(g) for g in L.generations] == [1, 2, 4, 8]
    assert (L.k_min, L.k_max) == (0, 3)
    space, L = unit_interval_space(1024)
    assert math.fsum(space.mass) == 1.0
    mu = cube_measures(L, space)
    for ids in L.generations:
        assert math.fsum(mu[ids]) == 1.0
    rep = verify_lattice(L, space)
    assert rep.ok and (rep.r0, rep.R0, L.delta) == (0.5, 1.0, 0.5)
    assert parent_doubling_constant(L, space)[0] == 2.0
    with pytest.raises(ValueError):
        unit_interval_space(6)


def test_h_values():
    assert h_function(1.0) == 1.0
    assert h_function(math.exp(-1), 0.5) == pytest.approx(math.sqrt(math.e) / 2, rel=1e-14)
    assert h_function(math.exp(-1), 0.5) == pytest.approx(0.8244, abs=1e-4)
    with pytest.raises(ValueError):
        h_function(0.5, alpha=1.0)
    with pytest.raises(ValueError):
        h_function(0.0)


def test_h_integrable_and_quadrature_stable():
    # t = s^2 removes the singularity for the reference value
    ref, _ = integrate.quad(lambda s: 2 * s * h_function(s * s), 0, 1, limit=200)
    assert math.isfinite(ref)
    for step in (1e-4, 1e-5):
        mid = (np.arange(int(round(1 / step))) + 0.5) * step
        approx = math.fsum(h_function(mid) * step)
        assert approx == pytest.approx(ref, rel=1e-3 if step == 1e-5 else 5e-3)


def test_power_log_weight():
    t = np.array([0.25, 1.0])
    assert power_log_weight("power", t, beta=-0.5).tolist() == [2.0, 1.0]
    assert power_log_weight("power", t, beta=1.0).tolist() == [0.25, 1.0]
    assert power_log_weight("haircomb-h", t, alpha=0.5)[1] == 1.0
    with pytest.raises(ValueError):
        power_log_weight("power", t, beta=-1.0)
    with pytest.raises(ValueError):
        power_log_weight("power", np.array([0.0]), beta=-0.5)
    with pytest.raises(ValueError):
        power_log_weight("exp", t)


def test_gaussian_line_mass_and_doubling():
    assert gaussian_mass(3.0) == pytest.approx(0.9973, abs=1e-4)
    space = gaussian_line_space(3001, 3.0)
    assert math.fsum(space.mass) == pytest.approx(0.9973, abs=1e-4)
    assert gaussian_mass(6.0) > gaussian_mass(3.0)
    x = space.coords[:, 0]
    mid = int(np.argmin(np.abs(x)))
    assert doubling_ratios(space, [0.1, 0.2, 0.4], [mid]).max() <= 2.2
    tails = []
    for extent in (2.0, 4.0, 6.0):
        s = gaussian_line_space(2001, extent)
        tails.append(doubling_ratios(s, [0.5], [s.n - 1]).max())
    assert tails[0] < tails[1] < tails[2]


@pytest.fixture(scope="module")
def comb():
    spec = HaircombSpec(teeth=8, alpha=0.5, resolution=1e-3)
    space = haircomb_space(spec)
    return spec, space, haircomb_weight(space, spec)


def test_haircomb_lengths(comb):
    spec, space, _ = comb
    seg, tooth = space.tags["segment"], space.tags["tooth"]
    for j in range(1, spec.teeth + 1):
        on = tooth == j
        assert math.fsum(space.mass[on & (seg == SEG_U)]) == pytest.approx(math.sqrt(5) / 2, rel=1e-12)
        assert math.fsum(space.mass[on & (seg == SEG_V)]) == pytest.approx(0.5, rel=1e-12)
        assert math.fsum(space.mass[on & (seg == SEG_A)]) == pytest.approx(5.0, rel=1e-12)
    total = spec.teeth * (5.0 + math.sqrt(5) / 2 + 0.5)
    assert math.fsum(space.mass) == pytest.approx(total, abs=3 * spec.teeth * spec.resolution)


def test_haircomb_is_metric(comb):
    _, space, _ = comb
    assert estimate_kappa0(space, sample=20000) == pytest.approx(1.0, abs=1e-12)


def test_haircomb_ball_excludes_A(comb):
    spec, space, _ = comb
    seg, param = space.tags["segment"], space.tags["param"]
    for j in (1, 5):
        c = haircomb_center(space, j)
        members = ball(space, c, 0.5).members
        assert not np.any(seg[members] == SEG_A)
        u = param[members[seg[members] == SEG_U]]
        v = param[members[seg[members] == SEG_V]]
        assert u.size and v.size and u.min() > 0.5 and v.max() < 1.0
        # the V endpoint at distance exactly 1/2 is excluded by openness
        top = np.flatnonzero((space.tags["tooth"] == j) & (seg == SEG_V) & (param == 1.0))
        assert top.size == 1 and top[0] not in set(members.tolist())


def test_haircomb_weight_values(comb):
    spec, space, w = comb
    seg, tooth, param = space.tags["segment"], space.tags["tooth"], space.tags["param"]
    assert np.all(w.values[seg == SEG_A] == 1.0)
    assert np.all(w.values[(seg == SEG_V) & (tooth == 3)] == 0.125)
    for j in range(1, spec.teeth + 1):
        assert w.values[haircomb_center(space, j)] == spec.eps(j)
    assert np.all(w.values <= 1.0)
    u = param[seg == SEG_U]
    expect = np.minimum(1.0, np.asarray(spec.eps_seq)[tooth[seg == SEG_U] - 1]
                        * np.maximum(h_function(u), 1.0))
    assert np.array_equal(w.values[seg == SEG_U], expect)


def test_nondoubling_report(comb):
    spec, space, w = comb
    rows, summary = haircomb_nondoubling_report(space, w, spec)
    wb = [r["w_B"] for r in rows]
    assert all(a > b for a, b in zip(wb, wb[1:]))
    ratios = [a / b for a, b in zip(wb, wb[1:])]
    assert all(r == pytest.approx(2.0, rel=0.05) for r in ratios)
    assert summary["min_w_2B"] >= 2 - 4 * spec.resolution
    assert summary["ratio_growth"] >= 64 * (1 - 0.05)
    assert all(r["A_points_in_B"] == 0 for r in rows)
    with pytest.raises(ValueError):
        haircomb_nondoubling_report(space, w, HaircombSpec(teeth=1))


def test_nondoubling_report_resolution_stable(comb):
    spec, space, w = comb
    fine_spec = spec.halved()
    fine = haircomb_space(fine_spec)
    rows_f, _ = haircomb_nondoubling_report(fine, haircomb_weight(fine, fine_spec), fine_spec)
    rows_c, _ = haircomb_nondoubling_report(space, w, spec)
    for a, b in zip(rows_c, rows_f):
        assert abs(a["w_B"] - b["w_B"]) < spec.resolution
        assert abs(a["w_2B"] - b["w_2B"]) < spec.resolution


def test_haircomb_spec_validation():
    with pytest.raises(ValueError):
        HaircombSpec(teeth=0)
    with pytest.raises(ValueError):
        HaircombSpec(alpha=1.5)
    with pytest.raises(ValueError):
        HaircombSpec(teeth=2, eps_seq=(0.1, 0.5))
    with pytest.raises(ValueError):
        HaircombSpec(resolution=0.1)


def test_ball_rh_labels_stable_under_refinement():
    labels = []
    for h in (4e-3, 2e-3):
        spec = HaircombSpec(teeth=6, alpha=0.5, resolution=h)
        space = haircomb_space(spec)
        w = haircomb_weight(space, spec)
        out = haircomb_rh_boundary(space, w, spec, [1.5, 3.0])
        labels.append({p: (e["ball"].label, e["ball"].values) for p, e in out.items()})
    for p in labels[0]:
        assert labels[0][p][0] == labels[1][p][0]
        assert np.allclose(labels[0][p][1], labels[1][p][1], rtol=0.02)
