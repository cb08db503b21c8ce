import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dyadgehring.examples import (gaussian_line_space, interval_weight, two_value_weight,
                                  unit_interval_space)
from dyadgehring.family import BallFamily, CubeFamily, ball_family
from dyadgehring.growth import classify_growth
from dyadgehring.lattice import build_lattice
from dyadgehring.space import FiniteSpace
from dyadgehring.weights import (Weight, ainfty_fujii_wilson, ap_characteristic,
                                 c1_parent_condition, doubling_constants, maximal_function,
                                 maximal_function_all, mean, rh_characteristic,
                                 weak_rh_characteristic)


# independent oracles: plain loops over member sets -------------------------------

def oracle_mean(space, w, members):
    m = space.mass[members]
    return math.fsum(m * w[members]) / math.fsum(m)


def oracle_rh(space, w, sets, p):
    best = 0.0
    for s in sets:
        a = oracle_mean(space, w, s)
        if a == 0:
            continue
        best = max(best, oracle_mean(space, w**p, s) ** (1 / p) / a)
    return best


def oracle_ap(space, w, sets, p):
    dual = 1 - p / (p - 1)
    best = 0.0
    for s in sets:
        best = max(best, oracle_mean(space, w, s) * oracle_mean(space, w**dual, s) ** (p - 1))
    return best


def cube_sets(lattice):
    return [c.members for c in lattice.cubes]


def ball_sets(space, radii, sigma=1.0):
    d = space.distance_matrix()
    return [np.flatnonzero(d[c] < sigma * r) for c in range(space.n) for r in radii]


# tests ----------------------------------------------------------------------------

def test_mean_examples(interval4096):
    space, _ = interval4096
    allp = np.arange(space.n)
    assert mean(np.ones(space.n), allp, space) == 1.0
    assert mean(space.coords[:, 0], allp, space) == pytest.approx(0.5, abs=1e-12)
    assert mean(two_value_weight(space), allp, space) == pytest.approx(1.75, abs=1e-12)
    with pytest.raises(ValueError):
        mean(np.ones(space.n), [], space)


def test_weight_validation():
    with pytest.raises(ValueError):
        Weight(np.array([1.0, -1.0]))
    with pytest.raises(ValueError):
        Weight(np.zeros(3))
    with pytest.raises(ValueError):
        Weight(np.array([1.0, np.nan]))


def test_rh_constant_weight_is_one(interval1024):
    space, lattice = interval1024
    w = np.ones(space.n)
    for fam in (CubeFamily(lattice, space), ball_family(space, centers=np.arange(0, 1024, 37))):
        for p in (1.2, 2.0, 7.0):
            assert rh_characteristic(w, fam, p).value == pytest.approx(1.0, abs=1e-12)


def test_rh_linear_weight_closed_form(interval4096):
    space, lattice = interval4096
    rep = rh_characteristic(interval_weight(space, 1.0), lattice, 2.0, space)
    assert rep.value == pytest.approx(2 / math.sqrt(3), abs=1e-3)
    assert rep.witness["kind"] == "cube"
    # the sup sits on an interval touching 0
    assert lattice.cubes[rep.witness["cube"]].members.min() == 0


def test_rh_matches_oracle_on_cubes():
    space, lattice = unit_interval_space(256)
    for beta in (-0.5, 1.0, 2.5):
        w = interval_weight(space, beta).values
        for p in (1.5, 2.0, 3.0):
            got = rh_characteristic(w, lattice, p, space).value
            assert got == pytest.approx(oracle_rh(space, w, cube_sets(lattice), p), rel=1e-10)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10**6), p=st.floats(1.1, 6.0))
def test_rh_and_ap_match_oracle_on_balls(seed, p):
    rng = np.random.default_rng(seed)
    space = FiniteSpace(rng.random((25, 2)), rng.random(25) + 0.1)
    w = rng.random(25) ** 3 + 1e-3
    radii = np.array([0.05, 0.1, 0.3, 0.9])
    fam = BallFamily(space, np.arange(25), radii)
    sets = ball_sets(space, radii)
    assert rh_characteristic(w, fam, p).value == pytest.approx(oracle_rh(space, w, sets, p), rel=1e-10)
    assert ap_characteristic(w, fam, p).value == pytest.approx(oracle_ap(space, w, sets, p), rel=1e-10)


def test_log_space_path_agrees_with_oracle():
    space, lattice = unit_interval_space(128)
    x = space.coords[:, 0]
    w = np.exp(-40 * x)  # spans ~e^40 > 1e12
    w[::5] *= 1e-3
    assert w.max() / w.min() > 1e12
    for p in (1.5, 3.0):
        got = rh_characteristic(w, lattice, p, space).value
        assert got == pytest.approx(oracle_rh(space, w, cube_sets(lattice), p), rel=1e-9)
    got = ap_characteristic(w, lattice, 2.0, space).value
    assert got == pytest.approx(oracle_ap(space, w, cube_sets(lattice), 2.0), rel=1e-9)


def test_rh_inverse_sqrt_grows_with_depth():
    vals = [rh_characteristic(interval_weight(s, -0.5), L, 2.0, s).value
            for s, L in (unit_interval_space(2**d) for d in range(6, 13))]
    assert classify_growth(vals, power=2.0).diverging
    assert all(b > a for a, b in zip(vals, vals[1:]))


def test_witness_reproduces_value(interval1024):
    space, lattice = interval1024
    w = interval_weight(space, -0.5).values
    rep = rh_characteristic(w, lattice, 1.7, space)
    m = lattice.cubes[rep.witness["cube"]].members
    assert rep.value == pytest.approx(oracle_rh(space, w, [m], 1.7), rel=1e-12)
    fam = ball_family(space, centers=np.arange(0, 1024, 17))
    rep = rh_characteristic(w, fam, 1.7)
    c, r = rep.witness["center"], rep.witness["radius"]
    members = np.flatnonzero(space.distances_from(c) < r)
    assert rep.value == pytest.approx(oracle_rh(space, w, [members], 1.7), rel=1e-12)


def test_exponent_range():
    space, lattice = unit_interval_space(8)
    for bad in (1.0, 0.5, 64.5):
        with pytest.raises(ValueError):
            rh_characteristic(np.ones(8), lattice, bad, space)
    assert rh_characteristic(np.ones(8), lattice, 64.0, space).value == pytest.approx(1.0)


def test_ap_examples(interval4096):
    space, lattice = interval4096
    assert ap_characteristic(np.ones(space.n), lattice, 2.0, space).value == pytest.approx(1.0)
    rep = ap_characteristic(interval_weight(space, -0.5), lattice, 2.0, space)
    assert rep.value == pytest.approx(4 / 3, abs=1e-2)
    w = np.ones(space.n)
    w[10] = 0.0
    rep = ap_characteristic(w, lattice, 2.0, space)
    assert rep.value == math.inf and 10 in lattice.cubes[rep.witness["cube"]].members


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10**6), p=st.floats(1.1, 5.0), q=st.floats(1.1, 5.0),
       c=st.floats(1e-3, 1e3))
def test_monotone_and_scale_invariant(seed, p, q, c):
    rng = np.random.default_rng(seed)
    space, lattice = unit_interval_space(64)
    w = rng.random(64) + 0.05
    lo, hi = sorted((p, q))
    fam = CubeFamily(lattice, space)
    r_lo, r_hi = rh_characteristic(w, fam, lo).value, rh_characteristic(w, fam, hi).value
    assert 1.0 - 1e-12 <= r_lo <= r_hi * (1 + 1e-12)
    a_lo, a_hi = ap_characteristic(w, fam, lo).value, ap_characteristic(w, fam, hi).value
    assert a_hi <= a_lo * (1 + 1e-12) and a_hi >= 1 - 1e-12
    assert rh_characteristic(w * c, fam, lo).value == pytest.approx(r_lo, rel=1e-12)
    assert ap_characteristic(w * c, fam, lo).value == pytest.approx(a_lo, rel=1e-12)
    d1 = doubling_constants(w, space, lattice=lattice)[1].value
    assert doubling_constants(w * c, space, lattice=lattice)[1].value == pytest.approx(d1, rel=1e-12)


def test_rh_equals_one_only_for_constants(interval1024):
    space, lattice = interval1024
    assert rh_characteristic(two_value_weight(space), lattice, 2.0, space).value > 1.0
    bump = np.ones(space.n)
    bump[-1] = 1.5
    assert rh_characteristic(bump, lattice, 2.0, space).value > 1.0


def test_weak_rh(interval1024):
    space, _ = interval1024
    fam = ball_family(space, centers=np.arange(0, 1024, 31))
    assert weak_rh_characteristic(np.ones(space.n), fam, 2.0, 2.0).value == pytest.approx(1.0)
    w = interval_weight(space, -0.5)
    assert weak_rh_characteristic(w, fam, 1.8, 1.0).value == pytest.approx(
        rh_characteristic(w, fam, 1.8).value, rel=1e-12)
    rep = weak_rh_characteristic(w, fam, 1.8, 2.0, kappa0=1.0)
    assert rep.extras["dilates_covering_space"] > 0
    with pytest.raises(ValueError):
        weak_rh_characteristic(w, fam, 1.8, 1.0, kappa0=1.0)


def test_weak_rh_matches_oracle():
    rng = np.random.default_rng(2)
    space = FiniteSpace(rng.random(30), rng.random(30) + 0.1)
    w = rng.random(30) + 0.01
    radii = np.array([0.02, 0.1, 0.4])
    fam = BallFamily(space, np.arange(30), radii)
    small, big = ball_sets(space, radii), ball_sets(space, radii, 2.0)
    ref = max(oracle_mean(space, w**2.5, s) ** 0.4 / oracle_mean(space, w, b) for s, b in zip(small, big))
    assert weak_rh_characteristic(w, fam, 2.5, 2.0).value == pytest.approx(ref, rel=1e-10)


def _brute_maximal(space, w, radii, point, restriction):
    d = space.distance_matrix()
    f = np.zeros(space.n)
    f[restriction] = w[restriction]
    best = f[point]
    for c in range(space.n):
        for r in radii:
            m = np.flatnonzero(d[c] < r)
            if point in m:
                best = max(best, oracle_mean(space, f, m))
    return best


def test_maximal_function_examples():
    space = FiniteSpace(np.arange(20.0), np.ones(20))
    fam = ball_family(space)
    R = np.arange(5, 12)
    assert maximal_function(np.ones(20), fam, 8, R) == 1.0
    spike = np.full(20, 1e-9)
    spike[3] = 1.0
    assert maximal_function(spike, fam, 3, np.arange(20)) == 1.0
    out = maximal_function(np.ones(20), fam, 2, R)
    assert 0 < out < 1
    assert out == pytest.approx(_brute_maximal(space, np.ones(20), fam.radii, 2, R))
    wide = BallFamily(space, [0], [100.0])
    with pytest.raises(ValueError):
        maximal_function(np.ones(20), BallFamily(space, [0], [0.5]), 7, R, isolate=False)
    assert maximal_function(np.ones(20), wide, 7, R, isolate=False) == pytest.approx(7 / 20)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_maximal_engine_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    space = FiniteSpace(rng.random((20, 2)), rng.random(20) + 0.1)
    w = rng.random(20)
    radii = np.array([0.1, 0.25, 0.6])
    fam = BallFamily(space, np.arange(20), radii)
    R = rng.choice(20, 8, replace=False)
    allM = maximal_function_all(w, fam, R)
    for x in range(20):
        ref = _brute_maximal(space, w, radii, x, R)
        assert allM[x] == pytest.approx(ref, rel=1e-12)
        assert maximal_function(w, fam, x, R) == pytest.approx(ref, rel=1e-12)


def test_ainfty_examples():
    space, _ = unit_interval_space(256)
    fam = ball_family(space)
    assert ainfty_fujii_wilson(np.ones(256), fam).value == pytest.approx(1.0, abs=1e-12)
    vals = []
    for d in (7, 8, 9, 10):
        s, _ = unit_interval_space(2**d)
        f = ball_family(s, centers=np.unique(np.linspace(0, s.n - 1, 64).round().astype(int)))
        vals.append(ainfty_fujii_wilson(interval_weight(s, -0.5), f, max_tests=200).value)
    assert classify_growth(vals).flat
    assert all(v > 1 for v in vals)


def test_ainfty_matches_definition():
    rng = np.random.default_rng(11)
    space = FiniteSpace(rng.random(18), rng.random(18) + 0.2)
    w = rng.random(18) + 0.01
    radii = np.array([0.05, 0.2, 0.5])
    fam = BallFamily(space, np.arange(18), radii)
    best = 0.0
    for i, B in enumerate(ball_sets(space, radii)):
        M = [_brute_maximal(space, w, radii, x, B) for x in B]
        best = max(best, math.fsum(space.mass[B] * M) / math.fsum(space.mass[B] * w[B]))
    assert ainfty_fujii_wilson(w, fam).value == pytest.approx(best, rel=1e-10)


def test_doubling_examples(interval1024):
    space, lattice = interval1024
    _, dy = doubling_constants(np.ones(space.n), space, lattice=lattice)
    assert dy.value == 2.0
    db = []
    for extent in (3.0, 4.0, 5.0):
        g = gaussian_line_space(801, extent)
        L = build_lattice(g, 0.5, seed=0)
        ball, dyad = doubling_constants(np.ones(g.n), g, ball_family=ball_family(g, max_factor=2.0),
                                        lattice=L)
        assert math.isfinite(dyad.value)
        db.append(ball.value)
    assert db[0] < db[1] < db[2]


def test_c1_examples(interval1024):
    space, lattice = interval1024
    assert c1_parent_condition(np.ones(space.n), lattice, space).value == pytest.approx(1.0)
    w = interval_weight(space, 1.0).values
    rep = c1_parent_condition(w, lattice, space)
    assert rep.value >= 1.5
    ref = max(oracle_mean(space, w, c.members) / oracle_mean(space, w, lattice.cubes[c.parent].members)
              for c in lattice.cubes if c.parent is not None)
    assert rep.value == pytest.approx(ref, rel=1e-12)
    g = gaussian_line_space(512, 3.0)
    assert math.isfinite(c1_parent_condition(np.ones(g.n), build_lattice(g), g).value)
