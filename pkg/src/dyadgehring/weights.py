"""Weights and their class characteristics.

All characteristics are sups over a finite family of sets (see
:mod:`dyadgehring.family`).  Weights are normalised by their maximum before
any power is taken, so every ratio below is computed from the same
dimensionless values and is invariant under ``w -> c * w``.  When the positive
values span more than ``LOG_SPAN`` the integrals are accumulated in log space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .family import BallFamily, CubeFamily, group_sup
from .lattice import DyadicLattice
from .space import FiniteSpace

__all__ = [
    "Weight",
    "CharacteristicReport",
    "mean",
    "as_family",
    "rh_characteristic",
    "weak_rh_characteristic",
    "ap_characteristic",
    "maximal_function",
    "maximal_function_all",
    "ainfty_fujii_wilson",
    "doubling_constants",
    "c1_parent_condition",
    "adjacent_comparison",
    "check_exponent",
]

LOG_SPAN = 1e12
P_MAX = 64.0


@dataclass(frozen=True, eq=False)
class Weight:
    """Nonnegative per-point values; at least one must be positive."""

    values: np.ndarray
    name: str = ""

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel()
        if not np.all(np.isfinite(v)):
            raise ValueError("weight values must be finite")
        if np.any(v < 0):
            raise ValueError(f"negative weight value at point {int(np.argmax(v < 0))}")
        if not np.any(v > 0):
            raise ValueError("weight vanishes identically")
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.size

    def scaled(self, c) -> "Weight":
        return Weight(self.values * c, self.name)

    def integral(self, space: FiniteSpace, members=None) -> float:
        m = slice(None) if members is None else np.asarray(members, dtype=int)
        return math.fsum(space.mass[m] * self.values[m])


@dataclass
class CharacteristicReport:
    class_id: str
    exponent: float | None
    value: float
    witness: dict | None
    family_size: int
    extras: dict = field(default_factory=dict)

    def as_dict(self):
        return {"class_id": self.class_id, "exponent": self.exponent, "value": self.value,
                "witness": self.witness, "family_size": self.family_size, **self.extras}


def check_exponent(p, name="p"):
    p = float(p)
    if not 1.0 < p <= P_MAX:
        raise ValueError(f"{name} must lie in (1, {P_MAX:g}], got {p}")
    return p


def _values(weight):
    return weight.values if isinstance(weight, Weight) else Weight(weight).values


def mean(weight, members, space: FiniteSpace) -> float:
    """Mass-weighted average of ``weight`` over ``members``."""
    members = np.asarray(members, dtype=int)
    mu = math.fsum(space.mass[members])
    if mu <= 0:
        raise ValueError("mean over a set of zero measure")
    return math.fsum(space.mass[members] * _values(weight)[members]) / mu


def as_family(obj, space: FiniteSpace):
    if isinstance(obj, (BallFamily, CubeFamily)):
        return obj
    if isinstance(obj, DyadicLattice):
        return CubeFamily(obj, space)
    raise TypeError(f"cannot use {type(obj).__name__} as a set family")


def _class_prefix(family):
    return "ball" if isinstance(family, BallFamily) else "dyadic"


def _normalised(values):
    pos = values[values > 0]
    vmax = pos.max()
    use_log = vmax / pos.min() > LOG_SPAN
    return values / vmax, use_log


def _log_power_means(family, u, use_log, exponent, factor=None):
    """``log <S, u**exponent>`` for every member ``S`` (``u`` already normalised)."""
    kw = {} if factor is None else {"factor": factor}
    log_mu = np.log(family.measures(**kw))
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        if use_log:
            lv = np.where(u > 0, exponent * np.log(np.where(u > 0, u, 1.0)),
                          -np.inf if exponent > 0 else np.inf)
            li = family.log_integrals(lv, **kw)
        else:
            up = np.where(u > 0, u ** exponent, 0.0 if exponent > 0 else np.inf)
            li = np.log(family.integrals(up, **kw))
    return li - log_mu


def _finish(class_id, exponent, family, log_values, skipped=0, extras=None):
    """Sup of ``exp(log_values)`` with witness; NaNs (0/0 members) are skipped."""
    log_values = np.asarray(log_values, dtype=float)
    valid = ~np.isnan(log_values)
    extras = dict(extras or {})
    extras["skipped"] = int(skipped + np.count_nonzero(~valid))
    if not valid.any():
        return CharacteristicReport(class_id, exponent, math.nan, None, family.size, extras)
    lv = np.where(valid, log_values, -np.inf)
    i = int(np.argmax(lv))
    value = float(np.exp(lv[i])) if np.isfinite(lv[i]) else (math.inf if lv[i] > 0 else 0.0)
    groups = getattr(family, "groups", None)
    if groups is not None:
        labels, best, _ = group_sup(lv, groups)
        extras["groups"] = {_label(g): float(np.exp(b)) for g, b in zip(labels, best)}
    return CharacteristicReport(class_id, exponent, value, family.describe(i), family.size, extras)


def _label(g):
    return int(g) if isinstance(g, (np.integer, int)) else str(g)


def rh_characteristic(weight, family, p, space=None) -> CharacteristicReport:
    """``sup_S <S, w^p>^(1/p) / <S, w>`` over the family."""
    p = check_exponent(p)
    family = as_family(family, space or family.space)
    u, use_log = _normalised(_values(weight))
    num = _log_power_means(family, u, use_log, p) / p
    den = _log_power_means(family, u, use_log, 1.0)
    with np.errstate(invalid="ignore"):
        lv = num - den
    return _finish(f"RH_{_class_prefix(family)}", p, family, lv)


def weak_rh_characteristic(weight, ball_family: BallFamily, p, sigma,
                           kappa0=None) -> CharacteristicReport:
    """``sup_B <B, w^p>^(1/p) / <sigma B, w>`` with concentric dilates.

    When ``kappa0`` is given, ``sigma`` must exceed it.  Dilates that swallow
    the whole space are allowed; their number is recorded.
    """
    p = check_exponent(p)
    sigma = float(sigma)
    if sigma < 1:
        raise ValueError("sigma must be at least 1")
    if kappa0 is not None and not sigma > kappa0:
        raise ValueError(f"sigma = {sigma} must exceed kappa0 = {kappa0}")
    u, use_log = _normalised(_values(weight))
    num = _log_power_means(ball_family, u, use_log, p) / p
    den = _log_power_means(ball_family, u, use_log, 1.0, factor=sigma)
    whole = int(np.count_nonzero(ball_family.counts(sigma) >= ball_family.space.n))
    with np.errstate(invalid="ignore"):
        lv = num - den
    return _finish("RH_weak", p, ball_family, lv,
                   extras={"sigma": sigma, "dilates_covering_space": whole})


def ap_characteristic(weight, family, p, space=None) -> CharacteristicReport:
    """``sup_S <S, w> <S, w^(1 - p')>^(p - 1)`` with ``p' = p / (p - 1)``.

    A member where ``w`` vanishes somewhere gives the value ``inf``.
    """
    p = check_exponent(p)
    family = as_family(family, space or family.space)
    dual = 1.0 - p / (p - 1.0)
    u, use_log = _normalised(_values(weight))
    a = _log_power_means(family, u, use_log, 1.0)
    b = _log_power_means(family, u, use_log, dual)
    with np.errstate(invalid="ignore"):
        lv = a + (p - 1.0) * b
    return _finish(f"A_p_{_class_prefix(family)}", p, family, lv)


class _MaximalEngine:
    """Evaluates ``M(f)(x) = max over family balls B' containing x of <B', f>``.

    The ball around every point that contains nothing but the point itself is
    always included, so ``M(f) >= f`` and every point is covered.
    """

    def __init__(self, family: BallFamily):
        self.family = family
        idx = family._idx
        levels = family.position_levels()
        self.rows = np.concatenate([np.full(len(i), r) for r, i in enumerate(idx)])
        self.levels = np.concatenate(levels)
        points = np.concatenate(idx)
        self.order = np.argsort(points, kind="stable")
        sp = points[self.order]
        self.points, self.starts = np.unique(sp, return_index=True)
        self.K = family.radii.size

    def evaluate(self, f):
        fam = self.family
        with np.errstate(invalid="ignore", divide="ignore"):
            avg = (fam.integrals(f) / fam.measures()).reshape(fam.shape)
        sm = np.maximum.accumulate(avg[:, ::-1], axis=1)[:, ::-1]
        sm = np.concatenate([sm, np.full((sm.shape[0], 1), -np.inf)], axis=1)
        vals = sm[self.rows, self.levels][self.order]
        M = np.array(f, dtype=float, copy=True)
        if vals.size:
            best = np.maximum.reduceat(vals, self.starts)
            M[self.points] = np.maximum(M[self.points], best)
        return M


def maximal_function_all(weight, ball_family: BallFamily, restriction=None) -> np.ndarray:
    """``M(1_R w)`` at every point (``R`` = restriction member ids, or everything)."""
    f = np.array(_values(weight), dtype=float)
    if restriction is not None:
        mask = np.zeros(f.size, dtype=bool)
        mask[np.asarray(restriction, dtype=int)] = True
        f = np.where(mask, f, 0.0)
    return _MaximalEngine(ball_family).evaluate(f)


def maximal_function(weight, ball_family: BallFamily, point, restriction_ball,
                     isolate=True) -> float:
    """``sup <B', 1_R w>`` over family balls ``B'`` holding ``point``.

    ``restriction_ball`` is a member-id array (e.g. ``Ball.members``).  With
    ``isolate`` the single-point ball around ``point`` is part of the family;
    without it a point covered by no ball raises ``ValueError``.
    """
    space = ball_family.space
    f = np.zeros(space.n)
    members = np.asarray(getattr(restriction_ball, "members", restriction_ball), dtype=int)
    f[members] = _values(weight)[members]
    best = f[point] if isolate else -np.inf
    counts = ball_family.counts()
    for row, c in enumerate(ball_family.centers):
        idx = ball_family._idx[row]
        hit = np.flatnonzero(idx == point)
        if hit.size == 0:
            continue
        pos = int(hit[0])
        for k in range(ball_family.radii.size):
            cnt = counts[row, k]
            if cnt > pos:
                sel = idx[:cnt]
                val = math.fsum(space.mass[sel] * f[sel]) / math.fsum(space.mass[sel])
                best = max(best, val)
    if best == -np.inf:
        raise ValueError(f"no family ball contains point {point}")
    return float(best)


def ainfty_fujii_wilson(weight, ball_family: BallFamily, test_balls=None,
                        max_tests=None, seed=0) -> CharacteristicReport:
    """``sup_B (1 / w(B)) int_B M(1_B w)`` with ``M`` taken over the family.

    ``test_balls`` selects the balls ``B`` (family indices); ``max_tests``
    subsamples them deterministically.  Balls with ``w(B) = 0`` are skipped.
    """
    space = ball_family.space
    u, _ = _normalised(_values(weight))
    tests = np.arange(ball_family.size) if test_balls is None else np.asarray(test_balls, dtype=int)
    if max_tests is not None and tests.size > max_tests:
        tests = np.sort(np.random.default_rng(seed).choice(tests, max_tests, replace=False))
    engine = _MaximalEngine(ball_family)
    wB = ball_family.integrals(u)
    lv = np.full(ball_family.size, np.nan)
    skipped = 0
    for t in tests:
        if wB[t] <= 0:
            skipped += 1
            continue
        members = ball_family.members(t)
        f = np.zeros(space.n)
        f[members] = u[members]
        M = engine.evaluate(f)
        lv[t] = math.log(math.fsum(space.mass[members] * M[members]) / wB[t])
    untested = ball_family.size - tests.size - skipped
    rep = _finish("A_inf", None, ball_family, lv, skipped=-untested)
    rep.extras["tests"] = int(tests.size)
    return rep


def doubling_constants(weight, space: FiniteSpace, ball_family: BallFamily | None = None,
                       lattice: DyadicLattice | None = None, sigma=2.0):
    """``(Db_ball, Db_dyadic)`` reports; either may be ``None`` if not requested.

    ``Db_ball = sup w(sigma B) / w(B)`` over the family, ``Db_dyadic =
    sup w(parent) / w(Q)`` over non-root cubes.  Sets with zero w-mass are
    skipped and counted.
    """
    u, _ = _normalised(_values(weight))
    ball_rep = dyad_rep = None
    if ball_family is not None:
        small = ball_family.integrals(u)
        big = ball_family.integrals(u, factor=sigma)
        with np.errstate(divide="ignore", invalid="ignore"):
            lv = np.where(small > 0, np.log(big) - np.log(small), np.nan)
        ball_rep = _finish("Db_ball", float(sigma), ball_family, lv)
    if lattice is not None:
        fam = CubeFamily(lattice, space)
        wq = fam.integrals(u)
        par = np.array([-1 if c.parent is None else c.parent for c in lattice.cubes])
        with np.errstate(divide="ignore", invalid="ignore"):
            lv = np.where((par >= 0) & (wq > 0), np.log(wq[np.maximum(par, 0)]) - np.log(wq), np.nan)
        roots = int(np.count_nonzero(par < 0))
        dyad_rep = _finish("Db_dyadic", None, fam, lv, skipped=-roots)
        dyad_rep.extras["roots"] = roots
        if dyad_rep.witness is None:
            dyad_rep.value = 1.0
    return ball_rep, dyad_rep


def c1_parent_condition(weight, lattice: DyadicLattice, space: FiniteSpace) -> CharacteristicReport:
    """``C1 = max <Q, w> / <parent, w>`` over non-root cubes.

    Only the child-by-parent direction is bounded: a child with zero mean is
    harmless, a parent with zero mean forces a zero child and is skipped.
    """
    fam = CubeFamily(lattice, space)
    u, use_log = _normalised(_values(weight))
    lm = _log_power_means(fam, u, use_log, 1.0)
    par = np.array([-1 if c.parent is None else c.parent for c in lattice.cubes])
    has = par >= 0
    pm = lm[np.maximum(par, 0)]
    with np.errstate(invalid="ignore"):
        lv = np.where(has & np.isfinite(pm), lm - pm, np.nan)
    rep = _finish("C1_parent", None, fam, lv, skipped=-int(np.count_nonzero(~has)))
    if rep.witness is None:
        rep.value = 1.0
    return rep


def adjacent_comparison(weight, lattices, space: FiniteSpace, p, ball_family=None):
    """Dyadic RH_p on several lattices next to the ball value, if a family is given."""
    per = [rh_characteristic(weight, CubeFamily(L, space), p).value for L in lattices]
    out = {"p": float(p), "per_lattice": per, "min": min(per), "max": max(per)}
    if ball_family is not None:
        out["ball"] = rh_characteristic(weight, ball_family, p).value
    return out
