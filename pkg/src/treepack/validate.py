"""Independent certification of packings.

Everything here is re-derived from raw vertex maps and parent arrays; no
builder-side bookkeeping is trusted.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import CapabilityError, InputError
from .trees import RootedTree

UNPLACED = -1


@dataclass
class Certificate:
    valid: bool
    checks: list[tuple[str, bool]] = field(default_factory=list)
    witness: dict | None = None
    stats: dict = field(default_factory=dict)

    @property
    def verdict(self) -> str:
        return "valid" if self.valid else "invalid"

    def to_json(self) -> dict:
        return {
            "verdict": self.verdict,
            "checks": {name: ok for name, ok in self.checks},
            "witness": self.witness,
            **({"stats": self.stats} if self.stats else {}),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


def _edges(t) -> list[tuple[int, int]]:
    parent = t.parent if isinstance(t, RootedTree) else t
    return [(p, v) for v, p in enumerate(parent) if p >= 0]


def _check_shape(maps, trees, host_order: int, allow_unplaced: bool) -> None:
    if len(maps) != len(trees):
        raise InputError(f"{len(maps)} maps for {len(trees)} trees")
    for i, (mp, t) in enumerate(zip(maps, trees)):
        order = len(t.parent if isinstance(t, RootedTree) else t)
        if len(mp) != order:
            raise InputError(f"map {i} has length {len(mp)}, tree has order {order}")
        for x, a in enumerate(mp):
            if a == UNPLACED and allow_unplaced:
                continue
            if not 0 <= a < host_order:
                raise InputError(f"map {i} sends vertex {x} to {a}, outside [0, {host_order})")


def _packing_checks(maps, trees) -> tuple[list[tuple[str, bool]], dict | None]:
    """Injectivity then cross-tree edge disjointness; placed vertices only."""
    for i, mp in enumerate(maps):
        seen: dict[int, int] = {}
        for x, a in enumerate(mp):
            if a == UNPLACED:
                continue
            if a in seen:
                return [("injective", False)], {
                    "clause": "injective", "tree": i, "vertices": [seen[a], x], "host_vertex": int(a)}
            seen[a] = x
    rows = []
    for i, (mp, t) in enumerate(zip(maps, trees)):
        for p, v in _edges(t):
            a, b = mp[p], mp[v]
            if a == UNPLACED or b == UNPLACED:
                continue
            rows.append((min(a, b), max(a, b), i, p, v))
    rows.sort()
    for k in range(1, len(rows)):
        if rows[k][:2] == rows[k - 1][:2]:
            a, b, i, p, v = rows[k - 1]
            _, _, j, q, w = rows[k]
            return [("injective", True), ("edge_disjoint", False)], {
                "clause": "edge_disjoint",
                "pair": [int(a), int(b)],
                "trees": [i, j],
                "tree_edges": [[p, v], [q, w]],
            }
    return [("injective", True), ("edge_disjoint", True)], None


def validate_packing(maps: Sequence[Sequence[int]], trees: Sequence, host_order: int) -> Certificate:
    """Each map injective into [host_order]; no host pair carries two tree edges.

    Edge preservation is automatic in a complete host once the map is injective.
    """
    maps = [list(map(int, mp)) for mp in maps]
    _check_shape(maps, trees, host_order, allow_unplaced=False)
    checks, witness = _packing_checks(maps, trees)
    edges = sum(len(_edges(t)) for t in trees)
    return Certificate(witness is None, checks, witness, {"trees": len(trees), "edges": edges})


def almost_packing_counts(maps, R, trees, host_order: int) -> np.ndarray:
    """Per host vertex: placed vertices that have a neighbour in their tree's exception set."""
    counts = np.zeros(host_order, dtype=np.int64)
    for mp, rset, t in zip(maps, R, trees):
        hit = set()
        for p, v in _edges(t):
            if p in rset and v not in rset:
                hit.add(v)
            if v in rset and p not in rset:
                hit.add(p)
        for x in hit:
            counts[mp[x]] += 1
    return counts


def validate_almost_packing(
    maps: Sequence[Sequence[int]],
    R: Sequence[Sequence[int]],
    trees: Sequence,
    host_order: int,
    ell: float | None = None,
) -> Certificate:
    """Clauses (a) packing of T_i - R_i, (b) |R_i| <= ell, (c) neighbour-of-R load <= ell.

    The achieved (tight) ell is reported in ``stats['ell']``; clauses (b)
    and (c) are only judged when ``ell`` is given.
    """
    maps = [list(map(int, mp)) for mp in maps]
    R = [frozenset(r) for r in R]
    _check_shape(maps, trees, host_order, allow_unplaced=True)
    if len(R) != len(maps):
        raise InputError("need one exception set per tree")
    for i, (mp, rset) in enumerate(zip(maps, R)):
        for x, a in enumerate(mp):
            if (x in rset) != (a == UNPLACED):
                raise InputError(
                    f"tree {i} vertex {x}: exception vertices must be unplaced and others placed")
    checks, witness = _packing_checks(maps, trees)
    max_r = max((len(r) for r in R), default=0)
    counts = almost_packing_counts(maps, R, trees, host_order)
    max_c = int(counts.max()) if counts.size else 0
    stats = {"max_R": max_r, "max_neighbour_load": max_c, "ell": max(max_r, max_c)}
    ok = witness is None
    if ell is not None:
        b = max_r <= ell
        c = max_c <= ell
        checks += [("exception_size", b), ("neighbour_load", c)]
        if ok and not b:
            i = max(range(len(R)), key=lambda k: len(R[k]))
            witness = {"clause": "exception_size", "tree": i, "size": len(R[i]), "ell": ell}
        elif ok and not c:
            v = int(np.argmax(counts))
            witness = {"clause": "neighbour_load", "host_vertex": v, "count": max_c, "ell": ell}
        ok = ok and b and c
    return Certificate(ok, checks, witness, stats)


# -- exhaustive oracle ----------------------------------------------------------------

def exhaustive_pack_oracle(
    trees: Sequence[RootedTree],
    host_order: int,
    node_budget: int = 2_000_000,
    max_host_order: int = 8,
) -> tuple[bool, list[list[int]] | None]:
    """Decide by backtracking whether ``trees`` pack into K_host_order.

    The first tree's root is pinned to host vertex 0 (the clique is
    vertex-transitive). Raises CapabilityError once ``node_budget``
    search nodes have been expanded.
    """
    if host_order > max_host_order:
        raise InputError(f"the exhaustive oracle is limited to host order <= {max_host_order}")
    if any(t.order > host_order for t in trees):
        return False, None
    total = sum(t.order - 1 for t in trees)
    if total > host_order * (host_order - 1) // 2:
        return False, None
    if not trees:
        return True, []

    orders = []
    for t in trees:
        bfs = t.bfs_order()
        orders.append([(x, t.parent[x]) for x in bfs])
    used = [[False] * host_order for _ in range(host_order)]
    maps = [[-1] * t.order for t in trees]
    taken = [[False] * host_order for _ in trees]
    nodes = 0

    def place(ti: int, k: int) -> bool:
        nonlocal nodes
        if ti == len(trees):
            return True
        seq = orders[ti]
        if k == len(seq):
            return place(ti + 1, 0)
        nodes += 1
        if nodes > node_budget:
            raise CapabilityError(f"exhaustive search exceeded {node_budget} nodes")
        x, p = seq[k]
        mp, tk = maps[ti], taken[ti]
        if p < 0:
            cands = [0] if ti == 0 else range(host_order)
        else:
            hp = mp[p]
            cands = [w for w in range(host_order) if w != hp and not used[hp][w]]
        for w in cands:
            if tk[w]:
                continue
            mp[x] = w
            tk[w] = True
            if p >= 0:
                used[hp][w] = used[w][hp] = True
            if place(ti, k + 1):
                return True
            if p >= 0:
                used[hp][w] = used[w][hp] = False
            tk[w] = False
            mp[x] = -1
        return False

    if place(0, 0):
        return True, [list(mp) for mp in maps]
    return False, None
