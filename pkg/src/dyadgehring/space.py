"""Finite quasi-metric measure spaces.

A continuous space is represented by a point cloud where each point carries
the quadrature weight (arc length, cell volume, ...) of the piece of space it
stands for.  Balls are open: ``B(x, r) = {y : rho(x, y) < r}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.spatial import cKDTree

__all__ = [
    "InvalidSpaceError",
    "FiniteSpace",
    "Ball",
    "DoublingProfile",
    "validate_space",
    "estimate_kappa0",
    "estimate_kappa1",
    "doubling_ratios",
    "ball",
    "measure",
    "geometric_radius_grid",
    "general_radii_bound",
    "distant_balls_bound",
]

METRIC_KINDS = ("euclidean", "linf", "explicit-matrix")


class InvalidSpaceError(ValueError):
    """Raised when a space violates the quasi-metric measure space axioms."""

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


def _parse_metric(kind):
    if kind in METRIC_KINDS:
        return kind, None
    if kind.startswith("snowflake:"):
        exponent = float(kind.split(":", 1)[1])
        if not exponent > 0:
            raise ValueError(f"snowflake exponent must be positive, got {exponent}")
        return "snowflake", exponent
    raise ValueError(f"unknown metric kind {kind!r}")


@dataclass(frozen=True, eq=False)
class FiniteSpace:
    """Point cloud with a quasi-metric and positive per-point masses.

    Parameters
    ----------
    coords : array, shape (n, d)
        Embedding coordinates.  May have ``d == 0`` for ``explicit-matrix``.
    mass : array, shape (n,)
        Quadrature weight of every point (units of the measure).
    metric : str
        ``euclidean``, ``linf``, ``snowflake:<e>`` (Euclidean distance to the
        power ``e``) or ``explicit-matrix``.
    matrix : array, shape (n, n), optional
        Distance matrix, required for ``explicit-matrix``.
    tags : dict of str -> array
        Free per-point metadata (segment labels, parameters) used by builders.
    """

    coords: np.ndarray
    mass: np.ndarray
    metric: str = "euclidean"
    matrix: np.ndarray | None = None
    tags: dict = field(default_factory=dict)

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=float)
        if coords.ndim == 1:
            coords = coords[:, None]
        mass = np.asarray(self.mass, dtype=float).ravel()
        if coords.shape[0] != mass.shape[0]:
            raise ValueError("coords and mass disagree on the number of points")
        kind, _ = _parse_metric(self.metric)
        matrix = self.matrix
        if kind == "explicit-matrix":
            if matrix is None:
                raise ValueError("explicit-matrix spaces need a distance matrix")
            matrix = np.asarray(matrix, dtype=float)
            if matrix.shape != (mass.size, mass.size):
                raise ValueError("distance matrix has the wrong shape")
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "mass", mass)
        object.__setattr__(self, "matrix", matrix)

    @property
    def n(self) -> int:
        return self.mass.size

    def __len__(self):
        return self.n

    @cached_property
    def _kind(self):
        return _parse_metric(self.metric)

    @cached_property
    def total_mass(self) -> float:
        return math.fsum(self.mass)

    @cached_property
    def _tree(self):
        kind, _ = self._kind
        if kind == "explicit-matrix":
            return None
        return cKDTree(self.coords)

    @property
    def _minkowski_p(self):
        return np.inf if self._kind[0] == "linf" else 2.0

    def _raw_to_rho(self, d):
        kind, e = self._kind
        return d**e if kind == "snowflake" else d

    def _rho_to_raw(self, r):
        kind, e = self._kind
        return r ** (1.0 / e) if kind == "snowflake" else r

    # distances ---------------------------------------------------------------

    def distances_from(self, i, idx=None) -> np.ndarray:
        """rho(i, j) for every j in ``idx`` (all points by default)."""
        kind, _ = self._kind
        if kind == "explicit-matrix":
            row = self.matrix[i]
            return row.copy() if idx is None else row[idx]
        other = self.coords if idx is None else self.coords[idx]
        diff = other - self.coords[i]
        if kind == "linf":
            d = np.abs(diff).max(axis=1) if diff.shape[1] else np.zeros(len(other))
        else:
            d = np.sqrt((diff * diff).sum(axis=1))
        return self._raw_to_rho(d)

    def cross_distances(self, rows, cols) -> np.ndarray:
        rows = np.asarray(rows, dtype=int)
        cols = np.asarray(cols, dtype=int)
        kind, _ = self._kind
        if kind == "explicit-matrix":
            return self.matrix[np.ix_(rows, cols)]
        diff = self.coords[rows][:, None, :] - self.coords[cols][None, :, :]
        if kind == "linf":
            d = np.abs(diff).max(axis=2) if diff.shape[2] else np.zeros((len(rows), len(cols)))
        else:
            d = np.sqrt((diff * diff).sum(axis=2))
        return self._raw_to_rho(d)

    def distance(self, i, j) -> float:
        return float(self.distances_from(i, np.array([j]))[0])

    def pair_distances(self, a, b) -> np.ndarray:
        """rho(a[t], b[t]) elementwise."""
        a = np.asarray(a, dtype=int)
        b = np.asarray(b, dtype=int)
        kind, _ = self._kind
        if kind == "explicit-matrix":
            return self.matrix[a, b]
        diff = self.coords[a] - self.coords[b]
        if kind == "linf":
            d = np.abs(diff).max(axis=1) if diff.shape[1] else np.zeros(a.size)
        else:
            d = np.sqrt((diff * diff).sum(axis=1))
        return self._raw_to_rho(d)

    def distance_matrix(self) -> np.ndarray:
        if self._kind[0] == "explicit-matrix":
            return self.matrix.copy()
        idx = np.arange(self.n)
        return self.cross_distances(idx, idx)

    def neighborhood(self, i, radius):
        """Points within distance ``< radius`` of ``i`` sorted by (distance, id).

        Returns ``(indices, distances)``.
        """
        tree = self._tree
        if tree is None or radius == np.inf:
            idx = np.arange(self.n)
        else:
            # pad the raw radius so rounding in the tree never drops a member
            raw = self._rho_to_raw(radius) * (1 + 1e-9) + 1e-300
            idx = np.asarray(tree.query_ball_point(self.coords[i], raw, p=self._minkowski_p), dtype=int)
        d = self.distances_from(i, idx)
        keep = d < radius
        idx, d = idx[keep], d[keep]
        order = np.lexsort((idx, d))
        return idx[order], d[order]

    def nearest_outside(self, center, members) -> float:
        """Distance from ``center`` to the closest point not in ``members``."""
        members = np.asarray(members, dtype=int)
        if members.size >= self.n:
            return np.inf
        tree = self._tree
        if tree is None:
            d = self.distances_from(center)
            mask = np.ones(self.n, dtype=bool)
            mask[members] = False
            return float(d[mask].min())
        k = min(members.size + 1, self.n)
        _, idx = tree.query(self.coords[center], k=k, p=self._minkowski_p)
        idx = np.atleast_1d(idx)
        out = idx[~np.isin(idx, members)]
        # the k nearest always contain at least one outsider; recompute exactly
        return float(self.distances_from(center, out).min())

    @cached_property
    def nearest_neighbor_distances(self) -> np.ndarray:
        if self.n < 2:
            return np.full(self.n, np.inf)
        tree = self._tree
        if tree is None:
            m = self.matrix + np.diag(np.full(self.n, np.inf))
            return m.min(axis=1)
        _, idx = tree.query(self.coords, k=2, p=self._minkowski_p)
        own = np.arange(self.n)
        other = np.where(idx[:, 0] == own, idx[:, 1], idx[:, 0])
        return self.pair_distances(own, other)

    @cached_property
    def diameter_bound(self) -> float:
        """An upper bound for the diameter (exact for explicit matrices)."""
        if self.n < 2:
            return 0.0
        kind, _ = self._kind
        if kind == "explicit-matrix":
            return float(self.matrix.max())
        span = self.coords.max(axis=0) - self.coords.min(axis=0)
        raw = float(span.max()) if kind == "linf" else float(np.sqrt((span * span).sum()))
        return self._raw_to_rho(raw)

    def subspace(self, idx) -> "FiniteSpace":
        idx = np.asarray(idx, dtype=int)
        matrix = None if self.matrix is None else self.matrix[np.ix_(idx, idx)]
        tags = {k: np.asarray(v)[idx] for k, v in self.tags.items()}
        return FiniteSpace(self.coords[idx], self.mass[idx], self.metric, matrix, tags)


@dataclass(frozen=True)
class Ball:
    center: int
    radius: float
    members: np.ndarray


@dataclass(frozen=True)
class DoublingProfile:
    kappa0: float
    kappa1: float
    geomM: int = 1

    def __post_init__(self):
        if self.kappa0 < 1 or self.kappa1 < 1 or self.geomM < 1:
            raise ValueError("doubling constants must all be >= 1")


def validate_space(space: FiniteSpace) -> list[str]:
    """Return a list of axiom violations (empty when the space is valid)."""
    problems = []
    mass = space.mass
    bad = np.flatnonzero(~np.isfinite(mass) | (mass <= 0))
    if bad.size:
        i = int(bad[0])
        problems.append(f"point {i} has non-positive or non-finite mass {float(mass[i])!r}")
    if space.metric == "explicit-matrix":
        m = space.matrix
        if not np.all(np.isfinite(m)):
            problems.append("distance matrix has non-finite entries")
        if np.any(np.diag(m) != 0):
            i = int(np.flatnonzero(np.diag(m) != 0)[0])
            problems.append(f"rho({i},{i}) != 0")
        asym = np.argwhere(m != m.T)
        if asym.size:
            i, j = asym[0]
            problems.append(f"rho({i},{j}) != rho({j},{i})")
        off = m + np.eye(space.n)
        zero = np.argwhere(off <= 0)
        if zero.size:
            i, j = zero[0]
            problems.append(f"rho({i},{j}) = {float(m[i, j])} for distinct points")
    elif space.n > 1:
        if not np.all(np.isfinite(space.coords)):
            problems.append("coordinates contain non-finite values")
        else:
            _, first, counts = np.unique(space.coords, axis=0, return_index=True, return_counts=True)
            if np.any(counts > 1):
                i = int(first[np.flatnonzero(counts > 1)[0]])
                problems.append(f"point {i} is duplicated (zero distance between distinct points)")
    return problems


def _check_nondegenerate(d, mask):
    if np.any((d <= 0) & mask):
        x, y = np.argwhere((d <= 0) & mask)[0]
        raise InvalidSpaceError(f"zero distance between distinct points {x} and {y}", witness=(int(x), int(y)))


def estimate_kappa0(space: FiniteSpace, sample: int | None = None, seed: int = 0) -> float:
    """Quasi-triangle constant: sup of rho(x,y) / (rho(x,z) + rho(z,y)).

    ``sample=None`` enumerates every triple (spaces of at most 512 points);
    otherwise ``sample`` random triples of distinct points are drawn.
    """
    n = space.n
    if n < 3:
        return 1.0
    if sample is None:
        if n > 512:
            raise ValueError("exhaustive kappa0 is limited to 512 points; pass sample=")
        dmat = space.distance_matrix()
        _check_nondegenerate(dmat, ~np.eye(n, dtype=bool))
        best = 0.0
        for z in range(n):
            denom = dmat[:, z][:, None] + dmat[z][None, :]
            with np.errstate(divide="ignore", invalid="ignore"):
                ratio = dmat / denom
            ratio[z, :] = 0.0
            ratio[:, z] = 0.0
            best = max(best, float(np.nanmax(ratio)))
        return max(best, 1.0)
    rng = np.random.default_rng(seed)
    x = rng.integers(0, n, sample)
    y = rng.integers(0, n, sample)
    z = rng.integers(0, n, sample)
    keep = (x != y) & (y != z) & (x != z)
    x, y, z = x[keep], y[keep], z[keep]
    dxy = space.pair_distances(x, y)
    dxz = space.pair_distances(x, z)
    dzy = space.pair_distances(z, y)
    _check_nondegenerate(np.concatenate([dxy, dxz, dzy]), np.ones(3 * x.size, dtype=bool))
    if x.size == 0:
        return 1.0
    return max(1.0, float(np.max(dxy / (dxz + dzy))))


def geometric_radius_grid(lo: float, hi: float, factor: float = 2.0) -> np.ndarray:
    """Radii ``factor**k`` (anchored at 1) covering ``[lo, hi]``.

    The first radius is the largest grid value ``<= lo`` and the last the
    smallest grid value ``>= hi``, so the grid brackets both scales.
    """
    if not (lo > 0 and hi >= lo and factor > 1):
        raise ValueError("need 0 < lo <= hi and factor > 1")
    lf = math.log(factor)
    k_lo = math.floor(math.log(lo) / lf + 1e-12)
    k_hi = math.ceil(math.log(hi) / lf - 1e-12)
    if factor == 2.0:
        return np.array([math.ldexp(1.0, k) for k in range(k_lo, k_hi + 1)])
    if abs(factor - math.sqrt(2.0)) < 1e-15:
        return np.array([2.0 ** (k / 2) for k in range(k_lo, k_hi + 1)])
    return np.array([factor**k for k in range(k_lo, k_hi + 1)])


def default_radius_grid(space: FiniteSpace, factor: float = 2.0) -> np.ndarray:
    nn = space.nearest_neighbor_distances
    lo = float(nn.min()) if space.n > 1 else 1.0
    hi = max(space.diameter_bound, lo)
    return geometric_radius_grid(lo, hi, factor)


def doubling_ratios(space: FiniteSpace, radius_grid=None, centers=None) -> np.ndarray:
    """Table of mu(B(x, 2r)) / mu(B(x, r)), shape (len(centers), len(radii))."""
    radii = default_radius_grid(space) if radius_grid is None else np.asarray(radius_grid, dtype=float)
    if radii.size == 0 or np.any(radii <= 0):
        raise ValueError("radius grid must be nonempty and positive")
    centers = np.arange(space.n) if centers is None else np.asarray(centers, dtype=int)
    out = np.empty((centers.size, radii.size))
    for row, c in enumerate(centers):
        d = space.distances_from(c)
        order = np.argsort(d, kind="stable")
        ds = d[order]
        cm = np.concatenate([[0.0], np.cumsum(space.mass[order])])
        small = cm[np.searchsorted(ds, radii, side="left")]
        big = cm[np.searchsorted(ds, 2 * radii, side="left")]
        # the center is always inside an open ball of positive radius
        out[row] = big / small
    return out


def estimate_kappa1(space: FiniteSpace, radius_grid=None, centers=None) -> float:
    """Measure-doubling constant: max of mu(B(x, 2r)) / mu(B(x, r)) over the sample."""
    if space.n <= 1:
        return 1.0
    return float(doubling_ratios(space, radius_grid, centers).max())


def ball(space: FiniteSpace, center: int, radius: float) -> Ball:
    if not radius > 0:
        raise ValueError("radius must be positive")
    idx, _ = space.neighborhood(center, radius)
    return Ball(int(center), float(radius), np.sort(idx))


def measure(space: FiniteSpace, members) -> float:
    members = np.asarray(members, dtype=int).ravel()
    if members.size == 0:
        return 0.0
    if members.min() < 0 or members.max() >= space.n:
        raise IndexError("unknown point id in member set")
    return math.fsum(space.mass[members])


def general_radii_bound(kappa1: float, R: float, r: float) -> float:
    """kappa1 ** ceil(log2(R / r)): mu(B(x, R)) <= bound * mu(B(x, r)).

    The exponent is the number of halvings needed to bring ``R`` below ``r``,
    so ``R = 3r`` costs two doublings, the same as ``R = 4r``.
    """
    if not (R > r > 0):
        raise ValueError("need R > r > 0")
    if kappa1 < 1:
        raise ValueError("kappa1 must be >= 1")
    return float(kappa1) ** math.ceil(math.log2(R / r) - 1e-12)


def distant_balls_bound(kappa0: float, kappa1: float, R: float, r: float) -> float:
    """kappa1 ** log2(kappa0 (R + r) / r) for centers at distance R."""
    if not r > 0 or R < 0:
        raise ValueError("need r > 0 and R >= 0")
    if kappa0 < 1 or kappa1 < 1:
        raise ValueError("kappa0 and kappa1 must be >= 1")
    return kappa1 ** math.log2(kappa0 * (R + r) / r)
