"""Greedy repair of an almost packing using a reserve of fresh host vertices.

The core clique is K_m on vertices 0..m-1; the reserve W is m..M-1. Each
exceptional vertex is moved into W at the lowest index that avoids four
forbidden sets: the tree's own reserve images (X), reserve vertices whose
edge to an embedded neighbour's image is taken (Y), reserve vertices already
carrying many used reserve-reserve edges (Z), and reserve vertices whose edge
to the parent's reserve image is taken (U).
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import CorrectionFailure, InputError
from .limping import PartialEmbedding, census_collisions
from .trees import LevelForest, RootedTree
from .validate import UNPLACED, Certificate, validate_almost_packing, validate_packing


@dataclass
class AlmostPacking:
    maps: list[list[int]]  # UNPLACED on exception vertices
    R: list[frozenset[int]]
    m: int
    causes: dict[str, int] = field(default_factory=dict)  # how many exceptions each rule produced

    def certify(self, trees: Sequence[RootedTree], ell: float | None = None) -> Certificate:
        return validate_almost_packing(self.maps, self.R, trees, self.m, ell)


@dataclass
class CorrectionState:
    reserve: range
    assigned: list[dict[int, int]]  # per tree: exception vertex -> reserve vertex
    used_pairs: set[tuple[int, int]]  # every pair touching W used so far
    reserve_degree: np.ndarray  # used reserve-reserve edges at each reserve vertex
    z_threshold: float
    steps: list[dict] = field(default_factory=list)
    min_candidates: int | None = None

    def z_members(self) -> set[int]:
        w0 = self.reserve.start
        return {w0 + k for k in np.flatnonzero(self.reserve_degree >= self.z_threshold)}


@dataclass
class CorrectionResult:
    maps: list[list[int]]
    host_order: int
    certificate: Certificate
    state: CorrectionState
    order: list[int]
    bounds: dict

    def report(self) -> dict:
        return {
            "host_order": self.host_order,
            "reserve_size": len(self.state.reserve),
            "reserve_used": len({w for a in self.state.assigned for w in a.values()}),
            "steps": len(self.state.steps),
            "min_candidates": self.state.min_candidates,
            **self.bounds,
        }


def _bfs_exceptions(t: RootedTree, rset: frozenset[int]) -> tuple[list[int], list[int]]:
    """Exception vertices in BFS order from the lowest vertex outside R, with BFS parents."""
    outside = [v for v in range(t.order) if v not in rset]
    start = outside[0] if outside else 0
    adj = t.adjacency()
    par = [-1] * t.order
    seen = [False] * t.order
    seen[start] = True
    order = [start]
    q = deque([start])
    while q:
        u = q.popleft()
        for w in adj[u]:
            if not seen[w]:
                seen[w] = True
                par[w] = u
                order.append(w)
                q.append(w)
    return [v for v in order if v in rset], par


def correction_bounds(epsilon: float, m: int, delta: int, ell: float, trees: int) -> dict:
    """The counting behind the greedy, with the general |Z| term 4k*ell/(eps m)."""
    z = 4 * trees * ell / (epsilon * m) if epsilon > 0 else math.inf
    return {
        "ell_lemma_bound": epsilon**2 * m / (64 * delta**2),
        "margin_general": epsilon * m - ell - delta**2 * ell - z - epsilon * m / 2,
        "margin_lemma": epsilon * m - ell - delta**2 * ell - epsilon * m / 8 - epsilon * m / 2,
    }


def correct(
    ap: AlmostPacking,
    trees: Sequence[RootedTree],
    epsilon: float | None = None,
    *,
    host_order: int | None = None,
    order: Sequence[int] | str = "given",
) -> CorrectionResult:
    """Turn an almost packing into a packing of K_M (M = host_order, default floor((1+eps)m)).

    ``order`` fixes the tree sequence: "given", "R_desc" (largest exception
    set first), or an explicit permutation.
    """
    m = ap.m
    if epsilon is None and host_order is None:
        raise InputError("give epsilon or host_order")
    M = host_order if host_order is not None else int(math.floor((1 + epsilon) * m + 1e-9))
    if M < m:
        raise InputError("host order must be at least the core order")
    eps = epsilon if epsilon is not None else (M - m) / m
    if len(ap.maps) != len(trees) or len(ap.R) != len(trees):
        raise InputError("almost packing and tree family differ in length")
    W = range(m, M)
    k = len(trees)
    if order == "given":
        seq = list(range(k))
    elif order == "R_desc":
        seq = sorted(range(k), key=lambda i: (-len(ap.R[i]), i))
    else:
        seq = list(order)
        if sorted(seq) != list(range(k)):
            raise InputError("order must be a permutation of the trees")

    state = CorrectionState(W, [dict() for _ in trees], set(), np.zeros(len(W), dtype=np.int64),
                            eps * m / 2)
    # reserve-side adjacency of used pairs, for Y and U lookups
    used_at: dict[int, set[int]] = {}

    def mark(a: int, b: int) -> None:
        pair = (min(a, b), max(a, b))
        state.used_pairs.add(pair)
        used_at.setdefault(a, set()).add(b)
        used_at.setdefault(b, set()).add(a)
        if a >= m and b >= m:
            state.reserve_degree[a - m] += 1
            state.reserve_degree[b - m] += 1

    maps = [list(mp) for mp in ap.maps]
    for i in seq:
        t, rset, h = trees[i], ap.R[i], maps[i]
        if not rset:
            continue
        xs, par = _bfs_exceptions(t, rset)
        adj = t.adjacency()
        own: set[int] = set()
        for step, x in enumerate(xs):
            X = own
            A = [y for y in adj[x] if y not in rset]
            Y = set()
            for y in A:
                Y |= {w for w in used_at.get(h[y], ()) if w >= m}
            Z = state.z_members()
            U = set()
            p = par[x]
            if p >= 0 and p in rset:
                hp = state.assigned[i][p]
                U = {w for w in used_at.get(hp, ()) if w >= m}
            banned = X | Y | Z | U
            cands = len(W) - len(banned & set(W))
            state.min_candidates = cands if state.min_candidates is None else min(
                state.min_candidates, cands)
            state.steps.append({"tree": i, "step": step, "X": len(X), "Y": len(Y), "Z": len(Z),
                                "U": len(U), "candidates": cands})
            w = next((w for w in W if w not in banned), None)
            if w is None:
                raise CorrectionFailure({
                    "tree": i, "step": step, "X": len(X), "Y": len(Y), "Z": len(Z), "U": len(U),
                    "reserve": len(W), "epsilon": eps,
                    "ell_achieved": max((len(r) for r in ap.R), default=0),
                })
            h[x] = w
            own.add(w)
            state.assigned[i][x] = w
            for y in adj[x]:
                if y not in rset or y in state.assigned[i]:
                    mark(w, h[y])
    cert = validate_packing(maps, trees, M)
    ell = max((len(r) for r in ap.R), default=0)
    bounds = correction_bounds(eps, m, max((t.max_degree for t in trees), default=1), ell, k)
    return CorrectionResult(maps, M, cert, state, seq, bounds)


# -- assembling the almost packing from nibble rounds -------------------------------------

RoundRecord = dict[int, tuple[LevelForest, PartialEmbedding]]  # tree index -> level forest, embedding


def build_almost_packing(
    trees: Sequence[RootedTree],
    m: int,
    rounds: Sequence[RoundRecord],
    fixed: dict[int, Sequence[int]] | None = None,
) -> tuple[AlmostPacking, Certificate]:
    """R_i = roots, skipped, vertex- and edge-colliding vertices over all rounds.

    ``fixed`` holds trees embedded outright (no exceptions), such as the
    exceptional small tree.
    """
    fixed = fixed or {}
    R: list[set[int]] = [set() for _ in trees]
    image: list[dict[int, int]] = [dict() for _ in trees]
    causes = {"roots": 0, "skipped": 0, "vertex_collisions": 0, "edge_collisions": 0}
    for rec in rounds:
        idx = sorted(rec)
        census = census_collisions([rec[i][1] for i in idx], [rec[i][0] for i in idx])
        for f, i in enumerate(idx):
            forest, emb = rec[i]
            lab = forest.labels
            bad = forest.roots | census.skipped[f] | census.vc[f] | census.ec[f]
            causes["roots"] += len(forest.roots)
            causes["skipped"] += len(census.skipped[f])
            causes["vertex_collisions"] += len(census.vc[f])
            causes["edge_collisions"] += len(census.ec[f] - census.vc[f])
            R[i].update(lab[x] for x in bad)
            for x, a in enumerate(emb.assignment):
                if a >= 0:
                    image[i][lab[x]] = a
    maps = []
    for i, t in enumerate(trees):
        if i in fixed:
            maps.append([int(a) for a in fixed[i]])
            R[i] = set()
            continue
        missing = [x for x in range(t.order) if x not in R[i] and x not in image[i]]
        R[i].update(missing)  # vertices no round reached are deferred as well
        maps.append([UNPLACED if x in R[i] else image[i][x] for x in range(t.order)])
    ap = AlmostPacking(maps, [frozenset(r) for r in R], m, causes)
    return ap, ap.certify(trees)


# -- synthetic fixtures ---------------------------------------------------------------

def random_almost_packing(
    trees: Sequence[RootedTree], m: int, ell: int, rng: np.random.Generator, attempts: int = 200
) -> AlmostPacking:
    """Place T_i - R_i at random into K_m, respecting clauses (a)-(c) for ``ell``.

    Exception sets are random vertex sets of size <= ell; rejection sampling
    keeps maps injective, host pairs unused and the neighbour load <= ell.
    """
    used: set[tuple[int, int]] = set()
    load = np.zeros(m, dtype=np.int64)
    maps, Rs = [], []
    for t in trees:
        size = int(rng.integers(0, min(ell, t.order - 1) + 1)) if ell > 0 else 0
        rset = frozenset(int(v) for v in rng.choice(t.order, size=size, replace=False)) if size else frozenset()
        adj = t.adjacency()
        near = {x for x in range(t.order) if x not in rset and any(y in rset for y in adj[x])}
        h = [UNPLACED] * t.order
        taken: set[int] = set()
        for x in t.bfs_order():
            if x in rset:
                continue
            for _ in range(attempts):
                w = int(rng.integers(m))
                if w in taken or (x in near and load[w] >= ell):
                    continue
                if any(h[y] >= 0 and (min(w, h[y]), max(w, h[y])) in used for y in adj[x]):
                    continue
                break
            else:
                raise InputError("could not place a synthetic tree; host too crowded")
            h[x] = w
            taken.add(w)
            for y in adj[x]:
                if h[y] >= 0 and y != x:
                    used.add((min(w, h[y]), max(w, h[y])))
            if x in near:
                load[w] += 1
        maps.append(h)
        Rs.append(rset)
    return AlmostPacking(maps, Rs, m)
