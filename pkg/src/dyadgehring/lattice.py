"""Dyadic cube systems over finite spaces.

A lattice is a sequence of generations ``D_k`` (``k_min <= k <= k_max``), each
a partition of the point set, such that every cube of generation ``k`` sits in
exactly one cube of generation ``k - 1`` and

    B(z, r0 * delta**k)  ⊆  Q  ⊆  B(z, R0 * delta**k)

for its center ``z``.  :func:`build_lattice` produces such a system from nested
greedy nets; the constants ``r0`` and ``R0`` are measured afterwards rather
than assumed, and :func:`verify_lattice` re-checks all three properties.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.spatial import cKDTree

from .space import FiniteSpace

__all__ = [
    "DyadicCube",
    "DyadicLattice",
    "LatticeReport",
    "NoParentError",
    "build_lattice",
    "lattice_from_partitions",
    "verify_lattice",
    "parent",
    "descendants",
    "cube_measures",
    "parent_doubling_constant",
    "appendix_parent_bound",
    "build_adjacent_lattices",
    "auto_levels",
]


class NoParentError(LookupError):
    """Raised when asking for the parent of a coarsest-generation cube."""


@dataclass(frozen=True, eq=False)
class DyadicCube:
    id: int
    level: int
    center: int
    members: np.ndarray
    parent: int | None
    children: tuple = ()

    @property
    def size(self) -> int:
        return int(self.members.size)


class DyadicLattice:
    """Immutable collection of cube generations with parent/child links.

    ``cubes`` is indexed by global cube id; ids are assigned generation by
    generation, so ``generations[i]`` is a contiguous id range.
    """

    def __init__(self, delta, k_min, generations, n_points, r0, R0, seed=None):
        self.delta = float(delta)
        self.k_min = int(k_min)
        self.n_points = int(n_points)
        self.r0 = float(r0)
        self.R0 = float(R0)
        self.seed = seed
        self.cubes: list[DyadicCube] = []
        self.generations: list[list[int]] = []
        offsets = [0]
        for gen in generations:
            ids = []
            for cube in gen:
                assert cube.id == len(self.cubes), "cube ids must be consecutive"
                self.cubes.append(cube)
                ids.append(cube.id)
            self.generations.append(ids)
            offsets.append(len(self.cubes))
        self.level_offsets = np.array(offsets, dtype=int)

    @property
    def k_max(self) -> int:
        return self.k_min + len(self.generations) - 1

    @property
    def levels(self) -> range:
        return range(self.k_min, self.k_max + 1)

    @property
    def depth(self) -> int:
        return len(self.generations) - 1

    def generation(self, k) -> list[DyadicCube]:
        return [self.cubes[i] for i in self.generations[k - self.k_min]]

    def scale(self, level) -> float:
        return self.delta**level

    def roots(self) -> list[int]:
        return list(self.generations[0])

    def labels(self) -> list[np.ndarray]:
        """Per generation, the global id of the cube holding each point.

        Points missing from a generation get label -1; duplicated points keep
        the last cube listed.
        """
        return self._labels

    @cached_property
    def _labels(self):
        out = []
        for ids in self.generations:
            lab = np.full(self.n_points, -1, dtype=int)
            for i in ids:
                lab[self.cubes[i].members] = i
            out.append(lab)
        return out

    def cube_of(self, point, level) -> int:
        return int(self.labels()[level - self.k_min][point])

    def find(self, level, members) -> int:
        """Global id of the cube at ``level`` whose member set equals ``members``."""
        members = np.sort(np.asarray(members, dtype=int))
        for i in self.generations[level - self.k_min]:
            m = self.cubes[i].members
            if m.size == members.size and np.array_equal(m, members):
                return i
        raise KeyError("no cube with these members at this level")


def auto_levels(space: FiniteSpace, delta: float):
    """Coarsest level with ``delta**k > diameter`` and finest with ``delta**k`` below
    the smallest nearest-neighbour distance."""
    diam = space.diameter_bound
    if space.n < 2 or diam <= 0:
        return 0, 0
    log_delta = math.log(delta)
    k_min = math.floor(math.log(diam) / log_delta)
    while delta**k_min <= diam:
        k_min -= 1
    while delta ** (k_min + 1) > diam:
        k_min += 1
    nn = float(np.min(space.nearest_neighbor_distances))
    k_max = math.ceil(math.log(nn) / log_delta)
    while delta**k_max >= nn:
        k_max += 1
    while k_max - 1 > k_min and delta ** (k_max - 1) < nn:
        k_max -= 1
    return k_min, max(k_max, k_min)


def _nearest_center_distance(space, centers, points_mask=None):
    """rho from every point to the closest of ``centers`` (inf if no centers)."""
    if len(centers) == 0:
        return np.full(space.n, np.inf)
    centers = np.asarray(centers, dtype=int)
    if space._tree is None:
        return space.matrix[centers].min(axis=0)
    tree = cKDTree(space.coords[centers])
    raw, pos = tree.query(space.coords, k=1, p=space._minkowski_p)
    return space.pair_distances(np.arange(space.n), centers[pos])


def _greedy_net(space, order, centers, radius, is_center):
    """Extend ``centers`` to a ``radius``-net by scanning points in ``order``."""
    covered = _nearest_center_distance(space, centers) < radius
    nn = space.nearest_neighbor_distances
    new = []
    for p in order[~covered[order]]:
        if covered[p]:
            continue
        new.append(int(p))
        is_center[p] = True
        covered[p] = True
        if nn[p] < radius:
            idx, _ = space.neighborhood(int(p), radius)
            covered[idx] = True
    return list(centers) + new


def _assign(space, centers, parent_of_point):
    """Nearest center sharing the point's parent cube; ties go to the lowest id.

    Returns, for every point, the position in ``centers`` it is assigned to.
    """
    centers = np.asarray(centers, dtype=int)
    n = space.n
    center_parent = parent_of_point[centers]
    choice = np.full(n, -1, dtype=int)
    todo = np.arange(n)
    if space._tree is not None and centers.size > 1:
        kq = min(8, centers.size)
        tree = cKDTree(space.coords[centers])
        raw, pos = tree.query(space.coords, k=kq, p=space._minkowski_p)
        pos = pos.reshape(n, kq)
        d = space.pair_distances(np.repeat(np.arange(n), kq), centers[pos].ravel()).reshape(n, kq)
        d = np.where(center_parent[pos] == parent_of_point[:, None], d, np.inf)
        # lexicographic (distance, center point id) over the candidates
        cid = centers[pos]
        best = d.min(axis=1)
        tied = np.where(d == best[:, None], cid, np.iinfo(np.int64).max)
        col = np.argmin(tied, axis=1)
        arg = np.where(np.isfinite(best), pos[np.arange(n), col], -1)
        kth = space._raw_to_rho(raw.reshape(n, kq)[:, -1])
        ok = (arg >= 0) & ((best < kth * (1 - 1e-12)) | (kq == centers.size))
        choice[ok] = arg[ok]
        todo = np.flatnonzero(~ok)
    elif centers.size == 1:
        choice[:] = 0
        todo = np.arange(0)
    if todo.size:
        for par in np.unique(parent_of_point[todo]):
            pts = todo[parent_of_point[todo] == par]
            cand = np.flatnonzero(center_parent == par)
            d = space.cross_distances(pts, centers[cand])
            # argmin over (distance, id): sort candidates by id first
            by_id = np.argsort(centers[cand], kind="stable")
            d = d[:, by_id]
            choice[pts] = cand[by_id][np.argmin(d, axis=1)]
    return choice


def build_lattice(space: FiniteSpace, delta: float = 0.5, k_min: int | None = None,
                  k_max: int | None = None, seed: int = 0, priority=None) -> DyadicLattice:
    """Nested greedy nets, restricted nearest-center assignment.

    The net at level ``k`` contains every center of level ``k - 1`` and is
    extended greedily (points scanned in a seeded random order, or in
    ``priority`` order) until every point lies within ``delta**k`` of a center.
    A point joins the closest level-``k`` center inside its level-``k - 1``
    cube, which makes nesting hold by construction.
    """
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    auto_lo, auto_hi = auto_levels(space, delta)
    k_min = auto_lo if k_min is None else int(k_min)
    k_max = auto_hi if k_max is None else int(k_max)
    if k_max < k_min:
        raise ValueError("k_max must be >= k_min")
    n = space.n
    if priority is None:
        order = np.random.default_rng(seed).permutation(n)
    else:
        order = np.asarray(priority, dtype=int)
        if np.unique(order).size != n or order.size != n:
            raise ValueError("priority must be a permutation of the points")

    is_center = np.zeros(n, dtype=bool)
    centers: list[int] = []
    parent_label = np.zeros(n, dtype=int)
    partitions = []
    for k in range(k_min, k_max + 1):
        centers = _greedy_net(space, order, centers, delta**k, is_center)
        if len(centers) == 1:
            choice = np.zeros(n, dtype=int)
        else:
            choice = _assign(space, centers, parent_label)
        assert np.all(choice >= 0), "restricted assignment left a point unassigned"
        carr = np.asarray(centers, dtype=int)
        partitions.append((carr[choice], carr))
        parent_label = carr[choice]  # cube label = its center point id
    return lattice_from_partitions(space, delta, k_min, partitions, seed=seed)


def lattice_from_partitions(space: FiniteSpace, delta, k_min, partitions, seed=None,
                            r0=None, R0=None) -> DyadicLattice:
    """Assemble a lattice from per-level ``(center_of_point, centers)`` pairs.

    ``center_of_point[x]`` is the center point id of the cube holding ``x``.
    Cubes are ordered by (parent id, center id).  Missing ``r0``/``R0`` are
    measured from the geometry.
    """
    generations = []
    next_id = 0
    prev_lookup = None
    for level_index, (center_of_point, _centers) in enumerate(partitions):
        center_of_point = np.asarray(center_of_point, dtype=int)
        order = np.argsort(center_of_point, kind="stable")
        uniq, starts = np.unique(center_of_point[order], return_index=True)
        groups = np.split(order, starts[1:])
        entries = []
        for c, mem in zip(uniq, groups):
            par = None if prev_lookup is None else int(prev_lookup[mem[0]])
            entries.append((-1 if par is None else par, int(c), mem))
        entries.sort(key=lambda e: (e[0], e[1]))
        gen = []
        lookup = np.empty(space.n, dtype=int)
        for par, c, mem in entries:
            gen.append([next_id, c, mem, None if par < 0 else par])
            lookup[mem] = next_id
            next_id += 1
        generations.append(gen)
        prev_lookup = lookup
    return _finish(space, delta, k_min, generations, seed, r0, R0)


def _finish(space, delta, k_min, raw_generations, seed, r0, R0):
    children = {}
    for gen in raw_generations:
        for cid, _c, _m, par in gen:
            if par is not None:
                children.setdefault(par, []).append(cid)
    gens = []
    for level_index, gen in enumerate(raw_generations):
        gens.append([
            DyadicCube(cid, k_min + level_index, int(c), np.asarray(m, dtype=int), par,
                       tuple(children.get(cid, ())))
            for cid, c, m, par in gen
        ])
    lat = DyadicLattice(delta, k_min, gens, space.n, 1.0, 1.0, seed)
    if r0 is None or R0 is None:
        best_r0, best_R0 = measure_sandwich(space, lat)[:2]
        r0 = best_r0 if r0 is None else r0
        R0 = best_R0 if R0 is None else R0
    lat.r0, lat.R0 = float(r0), float(R0)
    return lat


def _nearest_outsiders(space, centers, ids, lab):
    """For cube ``ids[t]`` with center ``centers[t]``: rho to the closest point
    whose label differs.  Uses growing k-nearest queries."""
    res = np.full(ids.size, np.inf)
    n = space.n
    if space._tree is None:
        for t, (c, i) in enumerate(zip(centers, ids)):
            out = lab != i
            if out.any():
                res[t] = space.matrix[c][out].min()
        return res
    todo = np.arange(ids.size)
    k = 16
    while todo.size:
        kk = min(k, n)
        _, nb = space._tree.query(space.coords[centers[todo]], k=kk, p=space._minkowski_p)
        nb = nb.reshape(todo.size, kk)
        outside = lab[nb] != ids[todo][:, None]
        found = outside.any(axis=1)
        if found.any():
            rows = np.flatnonzero(found)
            r, col = np.nonzero(outside[rows])
            d = space.pair_distances(centers[todo[rows[r]]], nb[rows[r], col])
            best = np.full(rows.size, np.inf)
            np.minimum.at(best, r, d)
            res[todo[rows]] = best
        if kk == n:
            break
        todo = todo[~found]
        k *= 4
    return res


def _sandwich_arrays(space: FiniteSpace, lattice: DyadicLattice):
    """Per cube: (distance to farthest member, distance to nearest outsider)."""
    far = np.zeros(len(lattice.cubes))
    near = np.full(len(lattice.cubes), np.inf)
    centers = np.array([c.center for c in lattice.cubes], dtype=int)
    pts = np.arange(space.n)
    for li, lab in enumerate(lattice.labels()):
        ok = lab >= 0
        d = space.pair_distances(pts[ok], centers[lab[ok]])
        np.maximum.at(far, lab[ok], d)
        ids = np.arange(lattice.level_offsets[li], lattice.level_offsets[li + 1])
        near[ids] = _nearest_outsiders(space, centers[ids], ids, lab)
    return far, near


def measure_sandwich(space: FiniteSpace, lattice: DyadicLattice):
    """Best sandwich constants ``(r0, R0)`` plus the per-cube arrays.

    ``r0`` is the largest value with ``B(z, r0 delta^k) ⊆ Q`` for all cubes and
    ``R0`` is the measured sup of ``max rho(z, x) / delta^k`` nudged up by a
    relative 1e-9, because ``Q ⊆ B(z, R0 delta^k)`` needs strict inequality.
    ``r0`` is capped at ``R0``; a space where every cube is a single point
    records ``r0 = R0 = 1``.
    """
    far, near = _sandwich_arrays(space, lattice)
    scales = np.array([lattice.delta**c.level for c in lattice.cubes])
    inner = near / scales
    outer = far / scales
    R0 = float(outer.max()) * (1 + 1e-9) if outer.size and outer.max() > 0 else 0.0
    r0 = float(inner.min()) if np.isfinite(inner).any() else np.inf
    # near / scale * scale can round above near; step down until exact
    while np.isfinite(r0) and np.any(r0 * scales > near):
        r0 = float(np.nextafter(r0, 0.0))
    if R0 == 0.0:
        R0 = 1.0 if not np.isfinite(r0) else min(1.0, r0)
    if not np.isfinite(r0):
        r0 = R0
    r0 = min(r0, R0)
    return r0, R0, far, near


@dataclass
class LatticeReport:
    partition_ok: bool
    nesting_ok: bool
    sandwich_ok: bool
    r0: float
    R0: float
    best_r0: float
    best_R0: float
    witness: dict | None = None
    problems: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.partition_ok and self.nesting_ok and self.sandwich_ok

    def as_dict(self):
        return {
            "ok": self.ok, "partition_ok": self.partition_ok, "nesting_ok": self.nesting_ok,
            "sandwich_ok": self.sandwich_ok, "r0": self.r0, "R0": self.R0,
            "best_r0": self.best_r0, "best_R0": self.best_R0,
            "witness": self.witness, "problems": list(self.problems),
        }


def verify_lattice(lattice: DyadicLattice, space: FiniteSpace) -> LatticeReport:
    """Check partition, nesting and the sandwich with the recorded ``r0, R0``.

    The partition check is exact: every generation must list every point once
    and the correctly rounded sum of its masses must equal that of the space.
    """
    problems = []
    witness = None
    n = space.n
    total = math.fsum(space.mass)
    partition_ok = lattice.n_points == n
    for level, ids in zip(lattice.levels, lattice.generations):
        allm = np.concatenate([lattice.cubes[i].members for i in ids]) if ids else np.zeros(0, int)
        counts = np.bincount(allm, minlength=n) if allm.size else np.zeros(n, int)
        bad = np.flatnonzero(counts != 1)
        empty = [i for i in ids if lattice.cubes[i].members.size == 0]
        if bad.size or empty or math.fsum(space.mass[allm]) != total:
            partition_ok = False
            if witness is None:
                if bad.size:
                    p = int(bad[0])
                    holders = [i for i in ids if p in set(lattice.cubes[i].members.tolist())]
                    witness = {"property": "partition", "level": level, "point": p, "cubes": holders}
                else:
                    witness = {"property": "partition", "level": level, "cubes": empty}
            problems.append(f"generation {level} is not a partition")

    nesting_ok = partition_ok
    labels = lattice.labels() if partition_ok else None
    par = np.array([-1 if c.parent is None else c.parent for c in lattice.cubes], dtype=int)
    if partition_ok:
        for li in range(1, len(lattice.generations)):
            lab, up = labels[li], labels[li - 1]
            bad = np.flatnonzero(par[lab] != up)
            if bad.size == 0:
                continue
            nesting_ok = False
            i = int(lab[bad[0]])
            cube = lattice.cubes[i]
            witness = witness or {"property": "nesting", "cube": i, "level": cube.level,
                                  "containing": np.unique(up[cube.members]).tolist(),
                                  "parent": cube.parent}
            problems.append(f"cube {i} is not nested in its recorded parent")
            break
        for cube in lattice.cubes:
            if cube.parent is not None and cube.id not in lattice.cubes[cube.parent].children:
                nesting_ok = False
                problems.append(f"cube {cube.id} missing from its parent's children")
                break

    best_r0, best_R0, far, near = measure_sandwich(space, lattice)
    scales = np.array([lattice.delta**c.level for c in lattice.cubes])
    if partition_ok:
        centers = np.array([c.center for c in lattice.cubes], dtype=int)
        own = np.concatenate([labels[li][centers[lattice.generations[li]]]
                              for li in range(len(lattice.generations))])
        center_in = own == np.arange(len(lattice.cubes))
    else:
        center_in = np.array([np.any(c.members == c.center) for c in lattice.cubes])
    good = center_in & (far < lattice.R0 * scales) & (near >= lattice.r0 * scales)
    sandwich_ok = bool(good.all())
    if not sandwich_ok:
        i = int(np.argmin(good))
        cube = lattice.cubes[i]
        witness = witness or {"property": "sandwich", "cube": i, "level": cube.level,
                              "center": cube.center, "center_in_cube": bool(center_in[i]),
                              "farthest": float(far[i]), "nearest_outside": float(near[i]),
                              "scale": float(scales[i])}
        problems.append(f"cube {i} violates the ball sandwich")
    return LatticeReport(partition_ok, nesting_ok, sandwich_ok, lattice.r0, lattice.R0,
                         best_r0, best_R0, witness, problems)


def parent(lattice: DyadicLattice, cube) -> DyadicCube:
    cube = lattice.cubes[int(getattr(cube, "id", cube))]
    if cube.parent is None:
        raise NoParentError(f"cube {cube.id} lies in the coarsest generation")
    return lattice.cubes[cube.parent]


def descendants(lattice: DyadicLattice, cube) -> list[DyadicCube]:
    """``cube`` and every cube below it, depth first."""
    start = lattice.cubes[int(getattr(cube, "id", cube))]
    out, stack = [], [start.id]
    while stack:
        c = lattice.cubes[stack.pop()]
        out.append(c)
        stack.extend(reversed(c.children))
    return out


def cube_measures(lattice: DyadicLattice, space: FiniteSpace, values=None) -> np.ndarray:
    """``mu(Q)`` (or ``int_Q values``) for every cube, indexed by cube id."""
    w = space.mass if values is None else space.mass * np.asarray(values, dtype=float)
    out = []
    for li, lab in enumerate(lattice.labels()):
        start, stop = lattice.level_offsets[li], lattice.level_offsets[li + 1]
        out.append(np.bincount(lab - start, weights=w, minlength=stop - start))
    return np.concatenate(out)


def parent_doubling_constant(lattice: DyadicLattice, space: FiniteSpace, values=None):
    """``D = max mu(parent) / mu(Q)`` over non-root cubes, with the witness id.

    Passing ``values`` gives the weighted analogue ``max w(parent) / w(Q)``
    (cubes with ``w(Q) = 0 < w(parent)`` give ``inf``).
    """
    mu = cube_measures(lattice, space, values)
    par = np.array([-1 if c.parent is None else c.parent for c in lattice.cubes])
    sel = np.flatnonzero(par >= 0)
    if sel.size == 0:
        return 1.0, None
    num, den = mu[par[sel]], mu[sel]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(den > 0, num / den, np.where(num > 0, np.inf, 1.0))
    k = int(np.argmax(ratio))
    return float(ratio[k]), int(sel[k])


def appendix_parent_bound(lattice: DyadicLattice, kappa0: float, kappa1: float) -> float:
    """Upper bound for the parent constant from the doubling constants.

    ``kappa1**log2(kappa0 (R0 delta^(k-1) + r0 delta^k) / (r0 delta^k))``
    times ``kappa1**ceil(log2(R0 / (r0 delta)))``; the ``k`` cancels.
    """
    q = lattice.R0 / (lattice.r0 * lattice.delta)
    first = kappa1 ** math.log2(kappa0 * (q + 1.0))
    second = kappa1 ** max(0, math.ceil(math.log2(q) - 1e-12))
    return first * second


def build_adjacent_lattices(space: FiniteSpace, count: int, seeds=None, delta: float = 0.5,
                            k_min=None, k_max=None) -> list[DyadicLattice]:
    """``count`` lattices that differ only in the net seed."""
    if count < 1:
        raise ValueError("count must be at least 1")
    seeds = list(range(count)) if seeds is None else list(seeds)
    if len(seeds) != count:
        raise ValueError("need one seed per lattice")
    return [build_lattice(space, delta, k_min, k_max, seed=s) for s in seeds]
