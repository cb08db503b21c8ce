import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from dyadgehring.examples import (gaussian_line_space, haircomb_tooth_balls, interval_weight,
                                  two_value_weight, unit_interval_space)
from dyadgehring.family import CubeFamily, ball_family
from dyadgehring.gehring import (DegenerateConstantError, NoDecayError, certify,
                                 constructive_epsilon, corollary41_mode, doubling_weight_ball_mode,
                                 empirical_epsilon, generation_integral_check, lambda_threshold,
                                 series_A)
from dyadgehring.lattice import build_lattice
from dyadgehring.space import FiniteSpace
from dyadgehring.weights import Weight, rh_characteristic

RH_X = 2 / math.sqrt(3)


def direct_series(D, lam, eps, a, terms=20000):
    r = (D * lam) ** eps
    return math.fsum(r**n * a ** (n - 1) for n in range(1, terms + 1))


def test_threshold_examples():
    assert lambda_threshold(2, 2, RH_X) == pytest.approx(8.000008, rel=1e-12)
    assert lambda_threshold(2, 2, 1.0) == pytest.approx(6.000006, rel=1e-12)
    assert lambda_threshold(2, 60, 1.0) == pytest.approx(3.000003, rel=1e-12)
    assert lambda_threshold(2, 2, 1.0, margin=0.0) == pytest.approx(6.0, rel=1e-15)
    with pytest.raises(ValueError):
        lambda_threshold(2, 1.0, 1.0)
    with pytest.raises(ValueError):
        lambda_threshold(0.5, 2, 1.0)


def test_constructive_epsilon_first_example():
    cert = constructive_epsilon(2, RH_X, 0.5, 2, 8)
    assert 1 - cert.a == pytest.approx(0.5 / (64 * 4 / 3), rel=1e-12)
    assert cert.one_minus_a == pytest.approx(5.859375e-3, rel=1e-12)
    assert cert.epsilon == pytest.approx(0.5 * math.log(1 / cert.a) / math.log(16), rel=1e-12)
    assert cert.epsilon == pytest.approx(1.06e-3, abs=5e-6)
    assert cert.A == pytest.approx(direct_series(2, 8, cert.epsilon, cert.a), rel=1e-10)
    assert cert.char_bound == pytest.approx((cert.A * RH_X**2) ** (1 / (2 + cert.epsilon)), rel=1e-12)
    assert (2 * 8) ** cert.epsilon * cert.a < 1


def test_constructive_epsilon_constant_weight_example():
    cert = constructive_epsilon(2, 1.0, 0.0, 2, 6)
    assert cert.one_minus_a == pytest.approx(1 / 36, rel=1e-12)
    assert cert.epsilon == pytest.approx(0.5 * math.log(36 / 35) / math.log(12), rel=1e-12)
    assert cert.epsilon == pytest.approx(5.67e-3, abs=5e-6)
    assert math.isfinite(cert.A)
    assert cert.A == pytest.approx(direct_series(2, 6, cert.epsilon, cert.a), rel=1e-10)
    # the first-power variant of 1 - a coincides when rh_char = 1
    assert cert.a_rh1 == pytest.approx(cert.a, rel=1e-15)


def test_constructive_epsilon_errors():
    with pytest.raises(NoDecayError):
        constructive_epsilon(2, 1.0, 1.0, 2, 6)
    with pytest.raises(DegenerateConstantError):
        constructive_epsilon(2, 1.0, 1 - 1e-16, 2, 6)
    with pytest.raises(ValueError):
        constructive_epsilon(2, 1.0, 0.5, 2, 5.9)
    with pytest.raises(ValueError):
        constructive_epsilon(2, 0.9, 0.5, 2, 8)


@settings(max_examples=200, deadline=None)
@given(D=st.floats(1, 20), lam=st.floats(3, 200), eps=st.floats(1e-6, 0.5), a=st.floats(0.01, 0.999))
def test_closed_form_matches_series(D, lam, eps, a):
    r = (D * lam) ** eps
    assume(r * a <= 0.88)
    closed = r / (1 - r * a)
    assert series_A(D, lam, eps, a) == pytest.approx(closed, rel=1e-10)


@settings(max_examples=100, deadline=None)
@given(p=st.floats(1.5, 4), rh=st.floats(1, 3), c1=st.floats(0, 0.99), c2=st.floats(0, 0.99),
       D=st.floats(1, 8), bump=st.floats(0, 0.5))
def test_epsilon_monotone(p, rh, c1, c2, D, bump):
    lo, hi = sorted((c1, c2))
    lam = lambda_threshold(D, p, rh + bump)
    a, b = constructive_epsilon(p, rh, lo, D, lam), constructive_epsilon(p, rh, hi, D, lam)
    assert b.epsilon <= a.epsilon
    assert b.one_minus_a <= a.one_minus_a
    worse = constructive_epsilon(p, rh + bump, lo, D, lam)
    assert worse.epsilon <= a.epsilon
    # summability and the closed form
    assert (D * lam) ** a.epsilon * a.a < 1
    log_ra = a.epsilon * math.log(D * lam) + math.log1p(-a.one_minus_a)
    assert a.A == pytest.approx((D * lam) ** a.epsilon / -math.expm1(log_ra), rel=1e-9)


def test_epsilon_tends_to_zero_as_c_tends_to_one():
    eps = [constructive_epsilon(2, 1.0, c, 2, 6).epsilon for c in (0.9, 0.99, 0.999, 0.9999)]
    assert all(x > y for x, y in zip(eps, eps[1:]))
    assert eps[-1] < 1e-6


def _instances():
    out = []
    s, L = unit_interval_space(1024)
    out.append(("inv-sqrt", s, L, interval_weight(s, -0.5), 1.5))
    out.append(("power-0.3", s, L, interval_weight(s, -0.3), 2.0))
    out.append(("two-value", s, L, two_value_weight(s), 2.0))
    s2, L2 = unit_interval_space(256)
    out.append(("linear", s2, L2, interval_weight(s2, 1.0), 2.0))
    rng = np.random.default_rng(11)
    s3 = FiniteSpace(rng.random((300, 2)), rng.random(300) + 0.2)
    L3 = build_lattice(s3, seed=1)
    out.append(("lognormal-2d", s3, L3, Weight(np.exp(rng.normal(0, 0.5, 300))), 2.0))
    s4 = gaussian_line_space(501)
    L4 = build_lattice(s4, seed=2)
    out.append(("gaussian-const", s4, L4, Weight(np.ones(s4.n)), 2.0))
    return out


@pytest.mark.parametrize("case", [pytest.param(c[1:], id=c[0]) for c in _instances()])
def test_certificate_soundness(case):
    space, lattice, weight, p = case
    cert = certify(weight, lattice, space, p)
    assert cert.c < 1 and 0 < cert.a < 1 and cert.epsilon > 0
    assert cert.lam >= lambda_threshold(cert.D, p, cert.rh_char)
    measured = rh_characteristic(weight, CubeFamily(lattice, space), p + cert.epsilon).value
    assert measured <= cert.char_bound
    assert isinstance(cert.remark_ok, bool)
    root = lattice.roots()[0]
    check = generation_integral_check(weight, lattice, space, root, p, cert.a, cert.lam)
    assert check["ok"], check["rows"]


def test_generation_check_rows_on_singular_weight(interval1024):
    space, lattice = interval1024
    w = interval_weight(space, -0.5)
    cert = certify(w, lattice, space, 1.5)
    for Q in (0, 1, 3, 8):
        rep = generation_integral_check(w, lattice, space, Q, 1.5, cert.a, cert.lam)
        assert rep["ok"] and not rep["truncated"]
        for row in rep["rows"]:
            assert row["integral"] <= row["bound"]


def _depth_instances(weight_fn, depths):
    out = []
    for d in depths:
        s, L = unit_interval_space(2**d)
        out.append((s, L, weight_fn(s)))
    return out


def test_empirical_epsilon_constant_weight_reaches_top():
    inst = _depth_instances(lambda s: Weight(np.ones(s.n)), range(6, 9))
    rep = empirical_epsilon(inst, 2.0, [2.5, 3.0, 4.0], certificate=False)
    assert rep["status"] == "ok" and rep["empirical_q"] == 4.0


def test_empirical_epsilon_two_value_flat():
    inst = _depth_instances(two_value_weight, range(6, 10))
    rep = empirical_epsilon(inst, 1.5, np.arange(1.6, 3.05, 0.2))
    assert rep["empirical_q"] == pytest.approx(3.0)
    assert all(t["label"] == "flat" for t in rep["tables"].values())
    assert rep["empirical_epsilon"] >= rep["constructive_epsilon"]


def test_empirical_epsilon_refuses_diverging_base():
    inst = _depth_instances(lambda s: interval_weight(s, -0.5), range(6, 13))
    rep = empirical_epsilon(inst, 2.2, [2.5], certificate=False)
    assert rep["status"] == "refused"


def test_corollary41_gaussian_constant_weight():
    space = gaussian_line_space(501)
    L = build_lattice(space, seed=3)
    out = corollary41_mode(Weight(np.ones(space.n)), L, space, 2.0)
    assert out["C1"] == pytest.approx(1.0, abs=1e-12)
    assert out["status"] == "certified"
    assert out["certificate"].D == 1.0


def test_corollary41_versus_standard_mode():
    space, L = unit_interval_space(256)
    w = interval_weight(space, 1.0)
    cor = corollary41_mode(w, L, space, 2.0)
    std = certify(w, L, space, 2.0)
    assert cor["status"] == "certified"
    c1 = cor["C1"]
    assert 1 < c1 < 2 and std.D == 2.0
    assert cor["certificate"].D == pytest.approx(c1)
    assert cor["certificate"].epsilon != std.epsilon


def test_corollary41_zero_mass_cube_is_fine():
    space, L = unit_interval_space(64)
    x = space.coords[:, 0]
    w = Weight(np.where(x < 0.25, 0.0, 1.0))
    out = corollary41_mode(w, L, space, 2.0)
    assert math.isfinite(out["C1"])


def test_thm52_constant_weight():
    space, _ = unit_interval_space(128)
    fam = ball_family(space)
    out = doubling_weight_ball_mode(Weight(np.ones(space.n)), space, fam, 2.0)
    assert out["status"] == "bounded"
    row = out["rows"][0]
    assert row["weak"] == pytest.approx(1.0, abs=1e-12)
    assert row["measured"] == pytest.approx(1.0, abs=1e-12)
    assert row["implied"] >= row["measured"]


def test_thm52_singular_weight_dominates():
    space, _ = unit_interval_space(512)
    fam = ball_family(space)
    out = doubling_weight_ball_mode(interval_weight(space, -0.5), space, fam, 1.5, q_grid=[1.5, 1.6])
    assert out["status"] == "bounded" and out["ok"]
    for row in out["rows"]:
        assert row["measured"] <= row["implied"]


def test_thm52_refuses_haircomb(haircomb8):
    spec, space, w = haircomb8
    fam = haircomb_tooth_balls(space, spec, stride=40)
    out = doubling_weight_ball_mode(w, space, fam, 2.0)
    assert out["status"] == "refused"
    assert out["Db"] > 100
