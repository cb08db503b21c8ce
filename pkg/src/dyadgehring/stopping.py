"""Stopping times over a dyadic lattice.

A cube ``Q'`` below ``Q`` has property ``P`` (relative to ``Q`` and ``lam``) when
its mean escapes the band ``[<Q>/lam, lam <Q>]``::

    <Q'> >= lam <Q>     (high)      or      <Q'> <= <Q> / lam     (low)

Ties trigger.  ``J(Q)`` collects the maximal such cubes; iterating ``J`` on
its own output gives the generations ``J_1, J_2, ...``.  A cube with zero
mean has an empty ``J`` (for it every subcube would trigger, the cube itself
included, which the admissibility requirement rules out).
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .lattice import DyadicLattice, cube_measures
from .space import FiniteSpace
from .weights import Weight, _values

__all__ = [
    "StoppingNode",
    "StoppingTree",
    "Decomposition",
    "CubeMeans",
    "cube_means",
    "stopping_children",
    "stopping_tree",
    "decay_constant",
    "lattice_decay_constant",
    "verify_lemma_bounds",
    "check_tree_structure",
    "good_bad_decomposition",
    "generation_sets",
]

HIGH, LOW, ROOT = "high", "low", "root"


@dataclass(frozen=True)
class CubeMeans:
    """Per-cube ``mu(Q)``, ``w(Q)`` and ``<Q>`` for one weight."""

    mu: np.ndarray
    wq: np.ndarray
    means: np.ndarray
    values: np.ndarray


def cube_means(lattice: DyadicLattice, space: FiniteSpace, weight) -> CubeMeans:
    values = _values(weight)
    mu = cube_measures(lattice, space)
    wq = cube_measures(lattice, space, values)
    if np.any(mu <= 0):
        raise AssertionError("lattice holds a cube of zero measure")
    return CubeMeans(mu, wq, wq / mu, values)


def _means(lattice, space, weight, means):
    return cube_means(lattice, space, weight) if means is None else means


@dataclass(frozen=True)
class StoppingNode:
    id: int
    cube: int
    kind: str
    generation: int
    parent_node: int | None
    mean: float


@dataclass
class StoppingTree:
    root: int
    lam: float
    nodes: list
    generations: list
    truncated: bool

    @property
    def depth(self) -> int:
        return len(self.generations) - 1

    def generation_nodes(self, n) -> list[StoppingNode]:
        return [self.nodes[i] for i in self.generations[n]]

    def children_of(self, node_id) -> list[StoppingNode]:
        node = self.nodes[node_id]
        if node.generation + 1 >= len(self.generations):
            return []
        return [self.nodes[i] for i in self.generations[node.generation + 1]
                if self.nodes[i].parent_node == node_id]

    def is_empty(self) -> bool:
        return len(self.generations) < 2 or not self.generations[1]


def _kind(mean, ref, lam):
    if mean >= lam * ref:
        return HIGH
    if mean <= ref / lam:
        return LOW
    return None


def stopping_children(lattice: DyadicLattice, weight, Q: int, lam: float,
                      space: FiniteSpace | None = None, means: CubeMeans | None = None):
    """Maximal subcubes of ``Q`` with property ``P``, breadth first.

    Returns ``[(cube_id, kind), ...]`` in discovery order.
    """
    if not lam > 1:
        raise ValueError(f"lambda must exceed 1, got {lam}")
    m = _means(lattice, space, weight, means).means
    ref = m[Q]
    if ref <= 0:
        return []
    out = []
    queue = deque(lattice.cubes[Q].children)
    cubes = lattice.cubes
    while queue:
        c = queue.popleft()
        kind = _kind(m[c], ref, lam)
        if kind is not None:
            out.append((c, kind))
        else:
            queue.extend(cubes[c].children)
    return out


def stopping_tree(lattice: DyadicLattice, weight, Q: int, lam: float, max_generations: int = 32,
                  space: FiniteSpace | None = None, means: CubeMeans | None = None) -> StoppingTree:
    """Generations ``J_0 = {Q}, J_1, ..., J_N`` with ``N <= max_generations``."""
    if max_generations < 1:
        raise ValueError("max_generations must be at least 1")
    cm = _means(lattice, space, weight, means)
    nodes = [StoppingNode(0, int(Q), ROOT, 0, None, float(cm.means[Q]))]
    generations = [[0]]
    truncated = False
    for n in range(1, max_generations + 1):
        current = []
        for nid in generations[-1]:
            for c, kind in stopping_children(lattice, None, nodes[nid].cube, lam, means=cm):
                node = StoppingNode(len(nodes), int(c), kind, n, nid, float(cm.means[c]))
                nodes.append(node)
                current.append(node.id)
        if not current:
            break
        generations.append(current)
    else:
        truncated = any(stopping_children(lattice, None, nodes[i].cube, lam, means=cm)
                        for i in generations[-1])
    return StoppingTree(int(Q), float(lam), nodes, generations, truncated)


def decay_constant(tree: StoppingTree, lattice: DyadicLattice, space: FiniteSpace,
                   means: CubeMeans | None = None):
    """``max over nodes of sum mu(J_1 children) / mu(node)`` and per-generation masses."""
    mu = cube_measures(lattice, space) if means is None else means.mu
    stopped = {}
    for node in tree.nodes:
        if node.parent_node is not None:
            stopped[node.parent_node] = stopped.get(node.parent_node, 0.0) + mu[node.cube]
    c = 0.0
    witness = None
    for node in tree.nodes:
        ratio = stopped.get(node.id, 0.0) / mu[node.cube]
        if ratio > c:
            c, witness = ratio, node.id
    masses = [math.fsum(mu[tree.nodes[i].cube] for i in gen) for gen in tree.generations]
    return {"c": c, "witness_node": witness, "generation_masses": masses}


def lattice_decay_constant(lattice: DyadicLattice, weight, lam: float, space: FiniteSpace,
                           means: CubeMeans | None = None, cubes=None):
    """``max over cubes Q of sum_{Q' in J(Q)} mu(Q') / mu(Q)`` with the witness cube."""
    cm = _means(lattice, space, weight, means)
    ids = range(len(lattice.cubes)) if cubes is None else cubes
    best, witness = 0.0, None
    for q in ids:
        js = stopping_children(lattice, None, q, lam, means=cm)
        if not js:
            continue
        ratio = math.fsum(cm.mu[c] for c, _ in js) / cm.mu[q]
        if ratio > best:
            best, witness = ratio, int(q)
    return best, witness


def _leaf_points(lattice, tree, node):
    """Points of ``node``'s cube outside every J_1 child of the node."""
    members = lattice.cubes[node.cube].members
    kids = tree.children_of(node.id)
    if not kids:
        return members
    covered = np.concatenate([lattice.cubes[k.cube].members for k in kids])
    return np.setdiff1d(members, covered, assume_unique=True)


def verify_lemma_bounds(tree: StoppingTree, lattice: DyadicLattice, weight, D: float,
                        space: FiniteSpace | None = None, means: CubeMeans | None = None):
    """Zero-tolerance check of the three stopping-time estimates.

    (i)   every node: ``<Q'> <= D lam <J-parent>``;
    (ii)  every generation-n node: ``<Q'> <= (D lam)^n <root>``;
    (iii) every node ``Q`` and every point ``x`` of ``Q`` outside ``J(Q)``:
          ``<Q> / lam <= w(x) <= lam <Q>``.
    """
    cm = _means(lattice, space, weight, means)
    lam = tree.lam
    root_mean = tree.nodes[0].mean
    failures = []
    for node in tree.nodes[1:]:
        pm = tree.nodes[node.parent_node].mean
        if not node.mean <= D * lam * pm:
            failures.append({"check": "parent", "node": node.id, "mean": node.mean,
                             "bound": D * lam * pm})
        bound = (D * lam) ** node.generation * root_mean
        if not node.mean <= bound:
            failures.append({"check": "generation", "node": node.id, "mean": node.mean,
                             "bound": bound})
    checked = 0
    for node in tree.nodes:
        if node.mean <= 0:
            continue
        pts = _leaf_points(lattice, tree, node)
        w = cm.values[pts]
        lo, hi = node.mean / lam, lam * node.mean
        bad = np.flatnonzero((w < lo) | (w > hi))
        checked += pts.size
        if bad.size:
            failures.append({"check": "pointwise", "node": node.id, "point": int(pts[bad[0]]),
                             "value": float(w[bad[0]]), "band": [lo, hi]})
    return {"ok": not failures, "failures": failures, "nodes": len(tree.nodes),
            "points_checked": checked, "D": float(D), "lambda": lam}


def check_tree_structure(tree: StoppingTree, lattice: DyadicLattice, means: CubeMeans):
    """Admissibility, maximality, disjointness and kind consistency."""
    problems = []
    m = means.means
    par = [c.parent for c in lattice.cubes]
    for gen in tree.generations[1:]:
        seen = set()
        for nid in gen:
            node = tree.nodes[nid]
            parent = tree.nodes[node.parent_node]
            ref = m[parent.cube]
            if node.cube == parent.cube:
                problems.append(("admissibility", nid))
            if _kind(m[node.cube], ref, tree.lam) != node.kind:
                problems.append(("kind", nid))
            a = par[node.cube]
            while a is not None and a != parent.cube:
                if _kind(m[a], ref, tree.lam) is not None:
                    problems.append(("maximality", nid))
                a = par[a]
            if a is None:
                problems.append(("containment", nid))
            mem = set(lattice.cubes[node.cube].members.tolist())
            if seen & mem:
                problems.append(("disjointness", nid))
            seen |= mem
    return problems


def generation_sets(tree: StoppingTree, lattice: DyadicLattice, n_points: int):
    """Boolean masks ``B_n`` (union of ``J_n`` cubes), ``n = 0..N``."""
    out = []
    for gen in tree.generations:
        mask = np.zeros(n_points, dtype=bool)
        for nid in gen:
            mask[lattice.cubes[tree.nodes[nid].cube].members] = True
        out.append(mask)
    return out


@dataclass
class Decomposition:
    Q: int
    lam: float
    B_high: list
    B_low: list
    G: np.ndarray
    measures: dict
    integrals: dict
    ledger: dict = field(default_factory=dict)

    def as_dict(self):
        return {"Q": self.Q, "lambda": self.lam, "B_high": list(self.B_high),
                "B_low": list(self.B_low), "G_size": int(self.G.size),
                "measures": self.measures, "integrals": self.integrals, "ledger": self.ledger}


def good_bad_decomposition(lattice: DyadicLattice, weight, Q: int, lam: float,
                           space: FiniteSpace, means: CubeMeans | None = None) -> Decomposition:
    """``Q = B^lam ⊔ B^(1/lam) ⊔ G`` from ``J(Q)``, with the one-third checks.

    When ``mu(G) <= mu(Q) / (3 lam)`` the report verifies
    ``int_G w <= int_Q w / 3`` and, for ``lam > 3``, ``int_{B^(1/lam)} w < int_Q w / 3``.
    """
    cm = _means(lattice, space, weight, means)
    js = stopping_children(lattice, None, Q, lam, means=cm)
    high = [c for c, k in js if k == HIGH]
    low = [c for c, k in js if k == LOW]
    members = lattice.cubes[Q].members

    def pts(ids):
        if not ids:
            return np.zeros(0, dtype=int)
        return np.concatenate([lattice.cubes[c].members for c in ids])

    ph, pl = pts(high), pts(low)
    G = np.setdiff1d(members, np.concatenate([ph, pl]), assume_unique=True)
    mass, vals = space.mass, cm.values

    def mu(p):
        return math.fsum(mass[p])

    def wi(p):
        return math.fsum(mass[p] * vals[p])

    measures = {"Q": mu(members), "B_high": mu(ph), "B_low": mu(pl), "G": mu(G)}
    integrals = {"Q": wi(members), "B_high": wi(ph), "B_low": wi(pl), "G": wi(G)}
    disjoint = ph.size + pl.size + G.size == members.size and \
        np.unique(np.concatenate([ph, pl, G])).size == members.size
    ledger = {
        "partition_ok": bool(disjoint),
        "measure_additive": math.isclose(measures["B_high"] + measures["B_low"] + measures["G"],
                                         measures["Q"], rel_tol=1e-12),
        "integral_additive": math.isclose(integrals["B_high"] + integrals["B_low"] + integrals["G"],
                                          integrals["Q"], rel_tol=1e-12, abs_tol=1e-300),
        "applies": measures["G"] <= measures["Q"] / (3 * lam),
    }
    if ledger["applies"]:
        ledger["G_third_ok"] = integrals["G"] <= integrals["Q"] / 3
        if lam > 3:
            ledger["low_third_ok"] = integrals["B_low"] < integrals["Q"] / 3
    return Decomposition(int(Q), float(lam), high, low, G, measures, integrals, ledger)
