"""Finite families of sets (balls or dyadic cubes) with fast integration.

Every characteristic in :mod:`dyadgehring.weights` is a sup over a family of
sets of some ratio of integrals.  A family only has to answer "integral of
``f`` over member ``i``" for many ``f``, so both implementations below expose
the same small interface: ``size``, ``measures()``, ``integrals(values)``,
``log_integrals(log_values)``, ``members(i)``, ``describe(i)`` and ``groups``.
"""

from __future__ import annotations

import math

import numpy as np

from .space import FiniteSpace, geometric_radius_grid

__all__ = ["BallFamily", "CubeFamily", "ball_family", "group_sup"]


class BallFamily:
    """All balls ``B(c, r)`` for ``c`` in ``centers`` and ``r`` in ``radii``.

    Each center keeps its neighbours sorted by distance, so a ball is a prefix
    of that list and integrals are prefix sums.  Neighbour lists reach out to
    ``max_factor * max(radii)`` so dilated balls ``sigma * B`` with
    ``sigma <= max_factor`` are available without another search.
    """

    def __init__(self, space: FiniteSpace, centers, radii, max_factor=2.0, groups=None):
        self.space = space
        self.centers = np.asarray(centers, dtype=int)
        self.radii = np.sort(np.asarray(radii, dtype=float))
        if self.centers.size == 0 or self.radii.size == 0:
            raise ValueError("ball family needs at least one center and one radius")
        if np.any(self.radii <= 0):
            raise ValueError("radii must be positive")
        self.max_factor = float(max_factor)
        reach = self.radii[-1] * self.max_factor
        if reach >= space.diameter_bound:
            reach = np.inf
        self._idx = []
        self._dist = []
        for c in self.centers:
            idx, d = space.neighborhood(int(c), reach)
            self._idx.append(idx)
            self._dist.append(d)
        self.center_groups = None if groups is None else np.asarray(groups)
        self._count_cache = {}
        self._flat_cache = None

    def select(self, rows) -> "BallFamily":
        """Sub-family made of the given center rows, sharing neighbour lists."""
        rows = np.asarray(rows, dtype=int)
        sub = object.__new__(BallFamily)
        sub.space = self.space
        sub.centers = self.centers[rows]
        sub.radii = self.radii
        sub.max_factor = self.max_factor
        sub._idx = [self._idx[r] for r in rows]
        sub._dist = [self._dist[r] for r in rows]
        sub.center_groups = None if self.center_groups is None else self.center_groups[rows]
        sub._count_cache = {}
        sub._flat_cache = None
        return sub

    @property
    def shape(self):
        return self.centers.size, self.radii.size

    @property
    def size(self) -> int:
        return self.centers.size * self.radii.size

    @property
    def nnz(self) -> int:
        return sum(len(i) for i in self._idx)

    @property
    def groups(self):
        if self.center_groups is None:
            return None
        return np.repeat(self.center_groups, self.radii.size)

    def _check_factor(self, factor):
        if factor > self.max_factor * (1 + 1e-12):
            raise ValueError(f"dilation {factor} exceeds the family reach {self.max_factor}")

    def counts(self, factor=1.0) -> np.ndarray:
        """Member counts, shape (centers, radii)."""
        factor = float(factor)
        if factor not in self._count_cache:
            self._check_factor(factor)
            r = factor * self.radii
            self._count_cache[factor] = np.array(
                [np.searchsorted(d, r, side="left") for d in self._dist], dtype=int
            )
        return self._count_cache[factor]

    def _flat(self):
        if self._flat_cache is None:
            sizes = np.array([i.size for i in self._idx], dtype=int)
            offsets = np.concatenate([[0], np.cumsum(sizes)[:-1]])
            self._flat_cache = (np.concatenate(self._idx), offsets)
        return self._flat_cache

    def _shells(self, factor):
        """Flat start/stop positions of the shells between consecutive radii."""
        counts = self.counts(factor)
        _, offsets = self._flat()
        stop = offsets[:, None] + counts
        start = np.concatenate([offsets[:, None], stop[:, :-1]], axis=1)
        return start.ravel(), stop.ravel()

    def _prefix(self, values, factor, log=False):
        """Integral over every ball as shell sums accumulated along the radii.

        Summing shells keeps small balls exact to rounding instead of taking
        differences of one long running sum.
        """
        flat, _ = self._flat()
        start, stop = self._shells(factor)
        empty = start == stop
        x = np.log(self.space.mass[flat]) + values[flat] if log else self.space.mass[flat] * values[flat]
        x = np.append(x, -np.inf if log else 0.0)
        idx = np.empty(2 * start.size, dtype=int)
        idx[0::2], idx[1::2] = start, stop
        K = self.radii.size
        if log:
            top = np.maximum.reduceat(x, idx)[0::2]
            top = np.where(empty | ~np.isfinite(top), 0.0, top)
            lengths = stop - start
            shift = np.repeat(top, lengths)
            seg = np.arange(lengths.sum()) + np.repeat(start - (np.cumsum(lengths) - lengths), lengths)
            e = np.zeros(x.size)
            with np.errstate(invalid="ignore"):
                e[seg] = np.exp(x[seg] - shift)
            sums = np.add.reduceat(e, idx)[0::2]
            with np.errstate(divide="ignore"):
                shell = np.where(empty, -np.inf, np.log(np.where(empty, 1.0, sums)) + top)
            return np.logaddexp.accumulate(shell.reshape(-1, K), axis=1).ravel()
        shell = np.where(empty, 0.0, np.add.reduceat(x, idx)[0::2])
        return np.cumsum(shell.reshape(-1, K), axis=1).ravel()

    def measures(self, factor=1.0) -> np.ndarray:
        key = ("mu", float(factor))
        if key not in self._count_cache:
            self._count_cache[key] = self._prefix(np.ones(self.space.n), factor)
        return self._count_cache[key]

    def integrals(self, values, factor=1.0) -> np.ndarray:
        return self._prefix(np.asarray(values, dtype=float), factor)

    def log_integrals(self, log_values, factor=1.0) -> np.ndarray:
        return self._prefix(np.asarray(log_values, dtype=float), factor, log=True)

    def center_radius(self, i):
        c, k = divmod(int(i), self.radii.size)
        return int(self.centers[c]), float(self.radii[k])

    def members(self, i, factor=1.0) -> np.ndarray:
        c, k = divmod(int(i), self.radii.size)
        cnt = self.counts(factor)[c, k]
        return np.sort(self._idx[c][:cnt])

    def describe(self, i, factor=1.0):
        center, radius = self.center_radius(i)
        return {"kind": "ball", "index": int(i), "center": center, "radius": radius * factor}

    def position_levels(self):
        """For each stored neighbour, the first radius index whose ball holds it.

        Returns a list (per center) of int arrays; ``K`` means "in no ball".
        """
        counts = self.counts(1.0)
        out = []
        for row, idx in enumerate(self._idx):
            pos = np.arange(idx.size)
            out.append(np.searchsorted(counts[row], pos, side="right"))
        return out


def ball_family(space: FiniteSpace, centers=None, radii=None, factor=math.sqrt(2.0),
                r_max=None, max_factor=2.0, groups=None) -> BallFamily:
    """Balls at every (or the given) center on a geometric radius grid.

    The grid starts at the smallest nearest-neighbour distance, so every
    center also owns a point-isolating ball.
    """
    if radii is None:
        lo = float(space.nearest_neighbor_distances.min()) if space.n > 1 else 1.0
        hi = space.diameter_bound if r_max is None else r_max
        radii = geometric_radius_grid(lo, max(hi, lo), factor)
        if r_max is not None:
            radii = radii[radii <= r_max * (1 + 1e-12)]
    centers = np.arange(space.n) if centers is None else centers
    return BallFamily(space, centers, radii, max_factor=max_factor, groups=groups)


class CubeFamily:
    """All cubes of a dyadic lattice as a family of sets."""

    def __init__(self, lattice, space: FiniteSpace, cubes=None):
        self.lattice = lattice
        self.space = space
        self._labels = lattice.labels()
        self._level_offsets = lattice.level_offsets
        self.cube_ids = np.arange(len(lattice.cubes)) if cubes is None else np.asarray(cubes, dtype=int)
        self._groups = None

    @property
    def size(self) -> int:
        return self.cube_ids.size

    @property
    def groups(self):
        return self._groups

    def with_groups(self, groups):
        self._groups = None if groups is None else np.asarray(groups)
        return self

    def subfamily(self, cube_ids, groups=None):
        return CubeFamily(self.lattice, self.space, cube_ids).with_groups(groups)

    def _all_integrals(self, values):
        mass = self.space.mass
        out = []
        for level, lab in enumerate(self._labels):
            start, stop = self._level_offsets[level], self._level_offsets[level + 1]
            out.append(np.bincount(lab - start, weights=mass * values, minlength=stop - start))
        return np.concatenate(out)

    def measures(self) -> np.ndarray:
        return self._all_integrals(np.ones(self.space.n))[self.cube_ids]

    def integrals(self, values) -> np.ndarray:
        return self._all_integrals(np.asarray(values, dtype=float))[self.cube_ids]

    def log_integrals(self, log_values) -> np.ndarray:
        x = np.log(self.space.mass) + np.asarray(log_values, dtype=float)
        out = []
        for level, lab in enumerate(self._labels):
            start, stop = self._level_offsets[level], self._level_offsets[level + 1]
            g = lab - start
            top = np.full(stop - start, -np.inf)
            np.maximum.at(top, g, x)
            safe = np.where(np.isfinite(top), top, 0.0)
            with np.errstate(invalid="ignore"):
                e = np.nan_to_num(np.exp(x - safe[g]), nan=0.0, posinf=0.0)
            s = np.bincount(g, weights=e, minlength=stop - start)
            with np.errstate(divide="ignore", invalid="ignore"):
                out.append(np.where(top == np.inf, np.inf, np.log(s) + safe))
        return np.concatenate(out)[self.cube_ids]

    def members(self, i) -> np.ndarray:
        return self.lattice.cubes[int(self.cube_ids[i])].members

    def describe(self, i):
        cube = self.lattice.cubes[int(self.cube_ids[i])]
        return {"kind": "cube", "index": int(i), "cube": cube.id, "level": cube.level,
                "center": cube.center, "size": int(cube.members.size)}


def group_sup(values, groups):
    """Per-group maximum, returned as (sorted group labels, maxima, argmax indices)."""
    values = np.asarray(values, dtype=float)
    groups = np.asarray(groups)
    labels = np.unique(groups)
    best = np.empty(labels.size)
    arg = np.empty(labels.size, dtype=int)
    for t, g in enumerate(labels):
        idx = np.flatnonzero(groups == g)
        k = idx[np.argmax(values[idx])]
        best[t], arg[t] = values[k], k
    return labels, best, arg
