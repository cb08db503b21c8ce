"""Concrete spaces and weights.

* the unit interval with its standard dyadic intervals,
* the real line carrying the Gaussian probability measure (not doubling),
* the haircomb: a line ``A`` with slanted teeth ``W_j = U_j ∪ V_j`` attached
  at ``x = 10 j``, under the l-infinity metric and arc-length measure, and the
  weight ``f_h`` that is small on the teeth.

Haircomb geometry (tooth ``j``, shift ``(10 j, 0)``)::

    U_j = {(10 j + u, u / 2) : 0 < u <= 1}     arc length sqrt(5) / 2
    V_j = {(10 j + 1, v)     : 1/2 < v <= 1}   arc length 1 / 2
    A   = {(x, 0)}, kept on [10 j - 2, 10 j + 3]

Point tags: ``segment`` (0 = A, 1 = U, 2 = V), ``tooth`` and ``param`` (x
offset from ``10 j`` on A, ``u`` on U, ``v`` on V).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf

from .family import BallFamily, CubeFamily
from .growth import classify_growth
from .lattice import DyadicLattice, lattice_from_partitions
from .space import FiniteSpace, geometric_radius_grid
from .weights import Weight, ap_characteristic, ainfty_fujii_wilson, rh_characteristic

__all__ = [
    "unit_interval_space",
    "interval_weight",
    "power_log_weight",
    "h_function",
    "two_value_weight",
    "gaussian_line_space",
    "HaircombSpec",
    "haircomb_space",
    "haircomb_weight",
    "haircomb_center",
    "haircomb_nondoubling_report",
    "haircomb_tooth_balls",
    "haircomb_tooth_cubes",
    "haircomb_rh_boundary",
    "haircomb_class_tables",
    "SEG_A",
    "SEG_U",
    "SEG_V",
]

SEG_A, SEG_U, SEG_V = 0, 1, 2
U_LENGTH = math.sqrt(5.0) / 2.0
V_LENGTH = 0.5


# unit interval ----------------------------------------------------------------

def unit_interval_space(n: int):
    """``n`` cell midpoints of [0, 1] with mass ``1/n`` and the standard dyadic lattice.

    Level ``k`` holds the intervals ``[m 2^-k, (m + 1) 2^-k)``; the center of
    an interval is the grid point just right of its midpoint.  The recorded
    sandwich constants are ``r0 = 1/2`` and ``R0 = 1``.
    """
    if n < 1 or n & (n - 1):
        raise ValueError(f"n must be a power of two, got {n}")
    depth = n.bit_length() - 1
    space = FiniteSpace((np.arange(n) + 0.5) / n, np.full(n, 1.0 / n), "euclidean")
    pts = np.arange(n)
    partitions = []
    for k in range(depth + 1):
        length = n >> k
        first = (pts // length) * length
        center_of_point = first + length // 2
        partitions.append((center_of_point, np.unique(center_of_point)))
    lattice = lattice_from_partitions(space, 0.5, 0, partitions, seed=None, r0=0.5, R0=1.0)
    return space, lattice


def h_function(t, alpha=0.5):
    """``t^-alpha / log(e / t)`` on (0, 1]."""
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0) or np.any(t > 1):
        raise ValueError("h is defined on (0, 1]")
    return t ** (-alpha) / (1.0 - np.log(t))


def power_log_weight(kind: str, t, **params):
    """Pointwise ``t**beta`` (``kind='power'``) or ``h(t)`` (``kind='haircomb-h'``).

    ``t**beta`` is integrable on [0, 1] exactly when ``beta > -1``.
    """
    if kind == "power":
        beta = float(params.get("beta", -0.5))
        if not beta > -1:
            raise ValueError(f"beta must exceed -1, got {beta}")
        t = np.asarray(t, dtype=float)
        if beta < 0 and np.any(t <= 0):
            raise ValueError("negative powers need t > 0")
        return t**beta
    if kind == "haircomb-h":
        return h_function(t, float(params.get("alpha", 0.5)))
    raise ValueError(f"unknown weight kind {kind!r}")


def interval_weight(space: FiniteSpace, beta: float) -> Weight:
    """``x**beta`` on the first coordinate."""
    return Weight(power_log_weight("power", space.coords[:, 0], beta=beta), f"power:{beta:g}")


def two_value_weight(space: FiniteSpace, high=4.0, cut=0.25) -> Weight:
    """``high`` on ``[0, cut)`` and 1 elsewhere."""
    x = space.coords[:, 0]
    return Weight(np.where(x < cut, high, 1.0), f"two-value:{high:g}:{cut:g}")


# Gaussian line ------------------------------------------------------------------

def gaussian_line_space(n: int, extent: float = 3.0) -> FiniteSpace:
    """Cell midpoints of [-extent, extent] with mass = normal density x cell width."""
    if n < 2:
        raise ValueError("need at least two points")
    width = 2.0 * extent / n
    x = -extent + (np.arange(n) + 0.5) * width
    mass = np.exp(-0.5 * x * x) / math.sqrt(2 * math.pi) * width
    return FiniteSpace(x, mass, "euclidean", tags={"extent": np.full(n, extent)})


def gaussian_mass(extent: float) -> float:
    """Exact Gaussian measure of [-extent, extent]."""
    return float(erf(extent / math.sqrt(2.0)))


# haircomb ---------------------------------------------------------------------

@dataclass(frozen=True)
class HaircombSpec:
    teeth: int = 8
    alpha: float = 0.5
    eps_seq: tuple = ()
    resolution: float = 1e-3
    a_extent: tuple = (2.0, 3.0)
    extras: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.teeth < 1:
            raise ValueError("need at least one tooth")
        if not 0 < self.alpha < 1:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        eps = tuple(float(e) for e in self.eps_seq) or tuple(2.0**-j for j in range(1, self.teeth + 1))
        if len(eps) != self.teeth:
            raise ValueError("need one epsilon per tooth")
        if any(not 0 < e <= 1 for e in eps):
            raise ValueError("epsilons must lie in (0, 1]")
        if any(b > a for a, b in zip(eps, eps[1:])):
            raise ValueError("epsilons must be nonincreasing")
        if not 0 < self.resolution < 0.05:
            raise ValueError("resolution must be positive and below 1/20")
        object.__setattr__(self, "eps_seq", eps)

    def eps(self, j: int) -> float:
        return self.eps_seq[j - 1]

    def halved(self) -> "HaircombSpec":
        return HaircombSpec(self.teeth, self.alpha, self.eps_seq, self.resolution / 2, self.a_extent)


def haircomb_space(spec: HaircombSpec) -> FiniteSpace:
    """Arc-length discretisation of the truncated haircomb.

    A is sampled at cell midpoints with mass ``h``; U and V use the right end
    of each cell, so the corner ``(10 j + 1, 1/2)`` is the last point of U.
    """
    h = spec.resolution
    left, right = spec.a_extent
    na = int(round((left + right) / h))
    nu = int(round(U_LENGTH / h))
    nv = int(round(V_LENGTH / h))
    coords, mass, seg, tooth, param = [], [], [], [], []
    for j in range(1, spec.teeth + 1):
        base = 10.0 * j
        off = -left + (np.arange(na) + 0.5) * (left + right) / na
        coords.append(np.column_stack([base + off, np.zeros(na)]))
        mass.append(np.full(na, (left + right) / na))
        seg.append(np.full(na, SEG_A))
        param.append(off)
        u = np.arange(1, nu + 1) / nu
        coords.append(np.column_stack([base + u, u / 2]))
        mass.append(np.full(nu, U_LENGTH / nu))
        seg.append(np.full(nu, SEG_U))
        param.append(u)
        v = 0.5 + np.arange(1, nv + 1) / (2 * nv)
        coords.append(np.column_stack([np.full(nv, base + 1.0), v]))
        mass.append(np.full(nv, V_LENGTH / nv))
        seg.append(np.full(nv, SEG_V))
        param.append(v)
        tooth.append(np.full(na + nu + nv, j))
    tags = {"segment": np.concatenate(seg), "tooth": np.concatenate(tooth),
            "param": np.concatenate(param)}
    return FiniteSpace(np.concatenate(coords), np.concatenate(mass), "linf", tags=tags)


def haircomb_weight(space: FiniteSpace, spec: HaircombSpec) -> Weight:
    """``1`` on A, ``eps_j`` on V_j, ``min(1, eps_j max(h(u), 1))`` on U_j."""
    seg = space.tags.get("segment")
    if seg is None:
        raise ValueError("space carries no haircomb tags")
    tooth = space.tags["tooth"]
    param = space.tags["param"]
    if not np.all(np.isin(seg, (SEG_A, SEG_U, SEG_V))):
        raise ValueError("point not classifiable into A, U_j or V_j")
    eps = np.asarray(spec.eps_seq)[tooth - 1]
    f = np.ones(space.n)
    on_v = seg == SEG_V
    on_u = seg == SEG_U
    f[on_v] = eps[on_v]
    g = np.maximum(h_function(param[on_u], spec.alpha), 1.0)
    f[on_u] = np.minimum(1.0, eps[on_u] * g)
    return Weight(f, "haircomb")


def haircomb_center(space: FiniteSpace, j: int) -> int:
    """Point id of the corner ``(10 j + 1, 1/2)`` (center of ``B_j``)."""
    seg, tooth, param = space.tags["segment"], space.tags["tooth"], space.tags["param"]
    hit = np.flatnonzero((seg == SEG_U) & (tooth == j) & (param == 1.0))
    if hit.size != 1:
        raise ValueError(f"tooth {j} has no corner point")
    return int(hit[0])


def haircomb_nondoubling_report(space: FiniteSpace, weight: Weight, spec: HaircombSpec):
    """Per tooth: ``w(B_j)``, ``w(2 B_j)`` and their ratio for ``B_j = B(corner, 1/2)``."""
    if spec.teeth < 2:
        raise ValueError("need at least two teeth")
    rows = []
    for j in range(1, spec.teeth + 1):
        c = haircomb_center(space, j)
        d = space.distances_from(c)
        small = d < 0.5
        big = d < 1.0
        wb = math.fsum(space.mass[small] * weight.values[small])
        w2b = math.fsum(space.mass[big] * weight.values[big])
        a_in_small = int(np.count_nonzero(small & (space.tags["segment"] == SEG_A)))
        rows.append({"tooth": j, "eps": spec.eps(j), "w_B": wb, "w_2B": w2b,
                     "ratio": w2b / wb, "C": wb / spec.eps(j), "A_points_in_B": a_in_small})
    cs = np.array([r["C"] for r in rows])
    summary = {
        "C_fit": float(cs.mean()),
        "C_spread": float((cs.max() - cs.min()) / cs.min()),
        "min_w_2B": min(r["w_2B"] for r in rows),
        "ratio_growth": rows[-1]["ratio"] / rows[0]["ratio"],
    }
    return rows, summary


def _tooth_window(space, j, lo=-1.0, hi=2.0):
    x = space.coords[:, 0] - 10.0 * j
    return (space.tags["tooth"] == j) & (x >= lo) & (x <= hi)


def haircomb_tooth_balls(space: FiniteSpace, spec: HaircombSpec, stride=None,
                         r_max=2.0, max_factor=2.0, factor=math.sqrt(2.0)) -> BallFamily:
    """Ball family grouped by tooth.

    Centers: every ``stride``-th point of each tooth window
    ``[10 j - 1, 10 j + 2]`` plus the corner, the tooth top and the base
    point; radii ``2^(k/2)`` from the resolution up to ``r_max``.
    """
    h = spec.resolution
    stride = max(1, int(round(0.02 / h))) if stride is None else stride
    centers, groups = [], []
    for j in range(1, spec.teeth + 1):
        win = np.flatnonzero(_tooth_window(space, j))
        pick = set(win[::stride].tolist())
        pick.add(haircomb_center(space, j))
        seg, param = space.tags["segment"], space.tags["param"]
        tooth_pts = np.flatnonzero((space.tags["tooth"] == j) & (seg == SEG_V))
        pick.add(int(tooth_pts[np.argmax(param[tooth_pts])]))
        a_pts = np.flatnonzero((space.tags["tooth"] == j) & (seg == SEG_A))
        pick.add(int(a_pts[np.argmin(np.abs(param[a_pts]))]))
        for c in sorted(pick):
            centers.append(c)
            groups.append(j)
    radii = geometric_radius_grid(h, r_max, factor)
    radii = radii[(radii >= h * 0.999) & (radii <= r_max * (1 + 1e-12))]
    return BallFamily(space, centers, radii, max_factor=max_factor, groups=groups)


def haircomb_tooth_cubes(lattice: DyadicLattice, space: FiniteSpace) -> CubeFamily:
    """Cubes lying inside a single tooth window, grouped by tooth."""
    tooth = space.tags["tooth"]
    x = space.coords[:, 0] - 10.0 * tooth
    inside = (x >= -2.0) & (x <= 3.0)
    ids, groups = [], []
    for cube in lattice.cubes:
        t = tooth[cube.members]
        if t[0] == t[-1] and np.all(t == t[0]) and np.all(inside[cube.members]):
            ids.append(cube.id)
            groups.append(int(t[0]))
    return CubeFamily(lattice, space, ids).with_groups(groups)


def _per_tooth(report, teeth):
    groups = report.extras.get("groups", {})
    return [groups.get(j, math.nan) for j in range(1, teeth + 1)]


def haircomb_rh_boundary(space: FiniteSpace, weight: Weight, spec: HaircombSpec, p_grid,
                         balls: BallFamily | None = None, lattice: DyadicLattice | None = None):
    """Per-tooth RH_p tables over balls (and over lattice cubes when given)."""
    balls = haircomb_tooth_balls(space, spec) if balls is None else balls
    cubes = None if lattice is None else haircomb_tooth_cubes(lattice, space)
    teeth = list(range(1, spec.teeth + 1))
    out = {}
    for p in p_grid:
        entry = {}
        ball_vals = _per_tooth(rh_characteristic(weight, balls, p), spec.teeth)
        entry["ball"] = classify_growth(ball_vals, teeth, power=p)
        if cubes is not None:
            cube_vals = _per_tooth(rh_characteristic(weight, cubes, p), spec.teeth)
            entry["dyadic"] = classify_growth(cube_vals, teeth, power=p)
        out[float(p)] = entry
    return out


def haircomb_class_tables(space: FiniteSpace, weight: Weight, spec: HaircombSpec, p_rh=1.8,
                          p_ap=2.0, balls: BallFamily | None = None, ainf_tests=40):
    """Per-tooth RH_p, A_p and A_inf tables over the tooth balls."""
    balls = haircomb_tooth_balls(space, spec) if balls is None else balls
    teeth = list(range(1, spec.teeth + 1))
    rh = _per_tooth(rh_characteristic(weight, balls, p_rh), spec.teeth)
    ap = _per_tooth(ap_characteristic(weight, balls, p_ap), spec.teeth)
    K = balls.radii.size
    groups = np.asarray(balls.center_groups)
    ainf = []
    for j in teeth:
        sub = balls.select(np.flatnonzero(groups == j))
        tests = np.arange(sub.size)
        if ainf_tests is not None and tests.size > ainf_tests:
            tests = tests[np.linspace(0, tests.size - 1, ainf_tests).round().astype(int)]
        ainf.append(ainfty_fujii_wilson(weight, sub, test_balls=tests).value)
    return {
        "rh": classify_growth(rh, teeth, power=p_rh),
        "ap": classify_growth(ap, teeth, power=1.0),
        "ainf": classify_growth(ainf, teeth, power=1.0),
    }
