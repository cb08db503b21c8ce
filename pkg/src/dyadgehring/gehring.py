"""Self-improvement of dyadic reverse Hölder weights.

Given ``[w]_{RH^d_p}``, the parent constant ``D`` and a stopping threshold
``lam`` above ``max(3, (3 D [w]^p)^(1/(p-1)))``, the stopping time decays with
some measured constant ``c < 1``.  From these::

    1 - a   = (1 - c) / (lam^p [w]^p)
    eps     = ln(1/a) / (2 ln(D lam))            half of the summability cap
    A       = (D lam)^eps / (1 - (D lam)^eps a)   = sum_n (D lam)^(n eps) a^(n-1)
    bound   = (A [w]^p)^(1 / (p + eps))            bound on [w]_{RH^d_(p+eps)}

With the half-cap choice ``(D lam)^eps = a^(-1/2)``, so ``A`` has the closed
form ``a^(-1/2) / (1 - a^(1/2))`` and never suffers from cancellation.
The variant with ``[w]^1`` in place of ``[w]^p`` in ``1 - a`` is recorded too.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .family import BallFamily, CubeFamily
from .growth import DIVERGING_RATIO, FLAT_RATIO, classify_growth
from .lattice import DyadicLattice, parent_doubling_constant
from .space import FiniteSpace
from .stopping import (cube_means, generation_sets, lattice_decay_constant, stopping_tree)
from .weights import (_values, c1_parent_condition, doubling_constants, rh_characteristic,
                      weak_rh_characteristic)

__all__ = [
    "NoDecayError",
    "DegenerateConstantError",
    "GehringCertificate",
    "lambda_threshold",
    "constructive_epsilon",
    "series_A",
    "certify",
    "generation_integral_check",
    "empirical_epsilon",
    "corollary41_mode",
    "doubling_weight_ball_mode",
]


class NoDecayError(ValueError):
    """The stopping time does not decay (``c >= 1``)."""


class DegenerateConstantError(ArithmeticError):
    """``a`` rounds to 1, so no positive exponent gain can be certified."""


@dataclass
class GehringCertificate:
    p: float
    rh_char: float
    D: float
    lam: float
    c: float
    a: float
    epsilon: float
    A: float
    char_bound: float
    remark_ok: bool
    a_rh1: float
    epsilon_rh1: float
    provenance: dict = field(default_factory=dict)

    @property
    def one_minus_a(self) -> float:
        return (1.0 - self.c) / (self.lam**self.p * self.rh_char**self.p)

    def as_dict(self):
        return asdict(self)


def lambda_threshold(D: float, p: float, rh_char: float, margin: float = 1e-6) -> float:
    """``max(3, (3 D rh^p)^(1/(p-1))) * (1 + margin)``."""
    if not p > 1:
        raise ValueError("p must exceed 1")
    if D < 1 or rh_char < 1:
        raise ValueError("D and rh_char must be at least 1")
    log_core = (math.log(3 * D) + p * math.log(rh_char)) / (p - 1)
    return max(3.0, math.exp(log_core)) * (1 + margin)


def _eps_from(one_minus_a, D, lam):
    log_inv_a = -math.log1p(-one_minus_a)
    return 0.5 * log_inv_a / math.log(D * lam)


def series_A(D, lam, eps, a, terms=200) -> float:
    """Partial sum ``sum_{n=1}^{terms} (D lam)^(n eps) a^(n-1)``."""
    r = (D * lam) ** eps
    return r * math.fsum((r * a) ** k for k in range(terms))


def constructive_epsilon(p, rh_char, c, D, lam, provenance=None) -> GehringCertificate:
    p, rh_char, c, D, lam = map(float, (p, rh_char, c, D, lam))
    if not 0 <= c:
        raise ValueError("decay constant must be nonnegative")
    if c >= 1:
        raise NoDecayError(f"stopping time does not decay: c = {c}")
    if rh_char < 1:
        raise ValueError("rh_char must be at least 1")
    need = lambda_threshold(D, p, rh_char, margin=0.0)
    if lam < need * (1 - 1e-12):
        raise ValueError(f"lambda = {lam} is below the threshold {need}")
    one_minus_a = (1.0 - c) / (lam**p * rh_char**p)
    a = 1.0 - one_minus_a
    if not a < 1.0 or one_minus_a <= 0:
        raise DegenerateConstantError(f"1 - a = {one_minus_a} vanishes in floating point")
    eps = _eps_from(one_minus_a, D, lam)
    root_a = math.sqrt(a)
    A = (1.0 / root_a) / (one_minus_a / (1.0 + root_a))
    bound = math.exp((math.log(A) + p * math.log(rh_char)) / (p + eps))
    remark_ok = bool(bound <= 1.0 or eps < 1.0 / (bound - 1.0))
    alt = (1.0 - c) / (lam**p * rh_char)
    eps_alt = _eps_from(alt, D, lam) if 0 < alt < 1 else math.nan
    return GehringCertificate(p, rh_char, D, lam, c, a, eps, A, bound, remark_ok,
                              1.0 - alt, eps_alt, dict(provenance or {}))


def certify(weight, lattice: DyadicLattice, space: FiniteSpace, p: float, D: float | None = None,
            margin: float = 1e-6, lam: float | None = None) -> GehringCertificate:
    """Full pipeline on one instance: measure ``[w]``, ``D``, ``c`` and build the certificate."""
    rh = rh_characteristic(weight, CubeFamily(lattice, space), p)
    if not math.isfinite(rh.value):
        raise NoDecayError("the dyadic RH_p characteristic is infinite")
    D_used = parent_doubling_constant(lattice, space)[0] if D is None else float(D)
    lam = lambda_threshold(D_used, p, rh.value, margin) if lam is None else float(lam)
    cm = cube_means(lattice, space, weight)
    c, witness = lattice_decay_constant(lattice, None, lam, space, means=cm)
    prov = {"seed": lattice.seed, "k_min": lattice.k_min, "k_max": lattice.k_max,
            "delta": lattice.delta, "family_size": rh.family_size, "points": space.n,
            "decay_witness_cube": witness, "rh_witness": rh.witness}
    return constructive_epsilon(p, rh.value, c, D_used, lam, prov)


def generation_integral_check(weight, lattice: DyadicLattice, space: FiniteSpace, Q: int,
                              p: float, a: float, lam: float, max_generations: int = 32):
    """``int_{G_n} w^p <= a^(n-1) int_Q w^p`` for every generation of the tree at ``Q``.

    ``G_n = B_(n-1) minus B_n`` where ``B_n`` is the union of ``J_n``; the
    last present ``B_N`` counts as ``G_(N+1)`` when the tree is not truncated.
    """
    cm = cube_means(lattice, space, weight)
    tree = stopping_tree(lattice, None, Q, lam, max_generations, means=cm)
    masks = generation_sets(tree, lattice, space.n)
    if not tree.truncated:
        masks.append(np.zeros(space.n, dtype=bool))
    wp = space.mass * cm.values**p
    total = math.fsum(wp[masks[0]])
    rows = []
    ok = True
    for n in range(1, len(masks)):
        g = masks[n - 1] & ~masks[n]
        lhs = math.fsum(wp[g])
        rhs = a ** (n - 1) * total
        rows.append({"n": n, "integral": lhs, "bound": rhs, "ok": lhs <= rhs})
        ok &= lhs <= rhs
    return {"ok": bool(ok), "rows": rows, "truncated": tree.truncated, "generations": tree.depth}


def empirical_epsilon(instances, p: float, q_grid, flat_ratio=FLAT_RATIO,
                      diverging_ratio=DIVERGING_RATIO, certificate=True, index=None):
    """Largest ``q`` in the grid whose depth table (and every smaller ``q``'s) is flat.

    ``instances`` is a list of ``(space, lattice, weight)`` ordered by depth.
    """
    index = list(range(len(instances))) if index is None else list(index)

    def table(q):
        vals = [rh_characteristic(w, CubeFamily(L, s), q).value for s, L, w in instances]
        return classify_growth(vals, index, power=q, flat_ratio=flat_ratio,
                               diverging_ratio=diverging_ratio)

    base = table(p)
    report = {"p": float(p), "base": base.as_dict(), "tables": {}}
    if base.diverging:
        report.update(status="refused", reason="RH_p table diverges at p itself")
        return report
    best = float(p)
    contiguous = True
    for q in sorted(float(x) for x in q_grid):
        if q <= p:
            continue
        t = table(q)
        report["tables"][q] = t.as_dict()
        if contiguous and t.flat:
            best = q
        else:
            contiguous = False
    report.update(status="ok", empirical_q=best, empirical_epsilon=best - float(p))
    if certificate:
        s, L, w = instances[-1]
        try:
            cert = certify(w, L, s, p)
            report["certificate"] = cert.as_dict()
            report["constructive_epsilon"] = cert.epsilon
        except (NoDecayError, DegenerateConstantError) as exc:
            report["certificate_error"] = str(exc)
    return report


def corollary41_mode(weight, lattice: DyadicLattice, space: FiniteSpace, p: float,
                     growth_instances=None, margin: float = 1e-6):
    """Certificate with ``D`` replaced by ``C1 = max <Q> / <parent>``.

    No measure-doubling quantity is consulted.  Refuses when ``C1`` is
    infinite, or when a growth table of ``C1`` over ``growth_instances``
    (``(space, lattice, weight)`` triples) diverges.
    """
    c1 = c1_parent_condition(weight, lattice, space)
    out = {"mode": "corollary41", "C1": c1.value, "C1_witness": c1.witness}
    if not math.isfinite(c1.value):
        out.update(status="refused", reason="C1 is infinite")
        return out
    if growth_instances:
        vals = [c1_parent_condition(w, L, s).value for s, L, w in growth_instances]
        g = classify_growth(vals)
        out["C1_growth"] = g.as_dict()
        if g.diverging:
            out.update(status="refused", reason="C1 grows without bound")
            return out
    try:
        cert = certify(weight, lattice, space, p, D=max(1.0, c1.value), margin=margin)
    except (NoDecayError, DegenerateConstantError) as exc:
        out.update(status="refused", reason=str(exc))
        return out
    cert.provenance["D_role"] = "C1"
    out.update(status="certified", certificate=cert)
    return out


def doubling_weight_ball_mode(weight, space: FiniteSpace, ball_family: BallFamily, p: float,
                              sigma: float = 2.0, q_grid=None):
    """Weak RH at each ``q`` times the measured ball doubling constant of ``w``.

    For every ball, strong ratio = weak ratio x ``<sigma B> / <B>`` and
    ``<sigma B> / <B> <= w(sigma B) / w(B)``, so ``weak x Db`` bounds the
    strong characteristic on the family.  Refuses when the per-group ``Db``
    table diverges (or ``Db`` is infinite).
    """
    db, _ = doubling_constants(weight, space, ball_family=ball_family, sigma=sigma)
    out = {"mode": "doubling-weight", "sigma": float(sigma), "Db": db.value, "Db_witness": db.witness}
    groups = db.extras.get("groups")
    if groups:
        keys = sorted(groups)
        g = classify_growth([groups[k] for k in keys], keys)
        out["Db_growth"] = g.as_dict()
        if g.diverging:
            out.update(status="refused", reason="ball doubling constant diverges", witness=db.witness)
            return out
    if not math.isfinite(db.value):
        out.update(status="refused", reason="ball doubling constant is infinite", witness=db.witness)
        return out
    rows = []
    for q in ([float(p)] if q_grid is None else [float(x) for x in q_grid]):
        weak = weak_rh_characteristic(weight, ball_family, q, sigma).value
        strong = rh_characteristic(weight, ball_family, q).value
        implied = weak * db.value
        rows.append({"q": q, "weak": weak, "Db": db.value, "implied": implied,
                     "measured": strong, "dominates": strong <= implied})
    out.update(status="bounded", rows=rows, ok=all(r["dominates"] for r in rows))
    return out
