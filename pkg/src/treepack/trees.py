"""Rooted trees, family normalisation, level partitions and generators."""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import InputError


@dataclass(frozen=True)
class RootedTree:
    """A tree on vertices ``0..order-1``; ``parent[root] == -1``."""

    parent: tuple[int, ...]
    root: int = 0

    def __post_init__(self):
        k = len(self.parent)
        if k < 1:
            raise InputError("a tree needs at least one vertex")
        if not 0 <= self.root < k or self.parent[self.root] != -1:
            raise InputError("root must be in range and have parent -1")
        for v, p in enumerate(self.parent):
            if v != self.root and not 0 <= p < k:
                raise InputError(f"vertex {v} has invalid parent {p}")
        # every vertex must reach the root without revisiting
        depth = [-1] * k
        depth[self.root] = 0
        for v in range(k):
            path = []
            u = v
            while depth[u] < 0:
                path.append(u)
                u = self.parent[u]
                if len(path) > k:
                    raise InputError("parent links contain a cycle")
            for w in reversed(path):
                depth[w] = depth[self.parent[w]] + 1

    @classmethod
    def from_edges(cls, order: int, edges: Iterable[Sequence[int]], root: int = 0) -> "RootedTree":
        adj: list[list[int]] = [[] for _ in range(order)]
        count = 0
        for u, v in edges:
            adj[u].append(v)
            adj[v].append(u)
            count += 1
        if count != order - 1:
            raise InputError(f"a tree on {order} vertices needs {order - 1} edges, got {count}")
        parent = [-2] * order
        parent[root] = -1
        queue = deque([root])
        while queue:
            u = queue.popleft()
            for w in sorted(adj[u]):
                if parent[w] == -2:
                    parent[w] = u
                    queue.append(w)
        if -2 in parent:
            raise InputError("edges do not form a connected tree")
        return cls(tuple(parent), root)

    @classmethod
    def path(cls, order: int) -> "RootedTree":
        return cls(tuple([-1] + list(range(order - 1))), 0)

    @classmethod
    def star(cls, order: int) -> "RootedTree":
        return cls(tuple([-1] + [0] * (order - 1)), 0)

    @property
    def order(self) -> int:
        return len(self.parent)

    @property
    def edges(self) -> list[tuple[int, int]]:
        """(parent, child) pairs in child-index order."""
        return [(p, v) for v, p in enumerate(self.parent) if p >= 0]

    def degrees(self) -> list[int]:
        deg = [0] * self.order
        for p, v in self.edges:
            deg[p] += 1
            deg[v] += 1
        return deg

    @property
    def max_degree(self) -> int:
        return max(self.degrees())

    def children(self) -> list[list[int]]:
        ch: list[list[int]] = [[] for _ in range(self.order)]
        for v, p in enumerate(self.parent):
            if p >= 0:
                ch[p].append(v)
        return ch

    def adjacency(self) -> list[list[int]]:
        adj: list[list[int]] = [[] for _ in range(self.order)]
        for p, v in self.edges:
            adj[p].append(v)
            adj[v].append(p)
        for row in adj:
            row.sort()
        return adj

    def bfs_order(self, start: int | None = None) -> list[int]:
        start = self.root if start is None else start
        adj = self.adjacency()
        seen = [False] * self.order
        seen[start] = True
        out = [start]
        queue = deque([start])
        while queue:
            u = queue.popleft()
            for w in adj[u]:
                if not seen[w]:
                    seen[w] = True
                    out.append(w)
                    queue.append(w)
        return out

    def lowest_leaf(self) -> int:
        deg = self.degrees()
        return min(v for v in range(self.order) if deg[v] <= 1)

    def to_json(self) -> dict:
        others = [v for v in range(self.order) if v != self.root]
        return {"order": self.order, "parent": [self.parent[v] for v in others], "root": self.root}

    @classmethod
    def from_json(cls, obj: dict) -> "RootedTree":
        k, root = int(obj["order"]), int(obj.get("root", 0))
        plist = list(obj["parent"])
        if len(plist) != k - 1:
            raise InputError(f"tree of order {k} needs {k - 1} parent entries")
        parent = [-1] * k
        others = [v for v in range(k) if v != root]
        for v, p in zip(others, plist):
            parent[v] = int(p)
        return cls(tuple(parent), root)


Origin = tuple[int, tuple[int, ...]]  # (index in the input family, vertex map into this tree)


@dataclass
class TreeFamily:
    trees: list[RootedTree]
    n: int
    delta: int
    exceptional: int | None = None
    # origins[j] lists the input trees folded into trees[j] and where their vertices went
    origins: list[tuple[Origin, ...]] | None = None

    def __post_init__(self):
        if self.origins is None:
            self.origins = [((j, tuple(range(t.order))),) for j, t in enumerate(self.trees)]

    @property
    def total_edges(self) -> int:
        return sum(t.order - 1 for t in self.trees)

    def check_hypotheses(self) -> None:
        """Orders <= n, degrees <= delta, total edges <= C(n, 2)."""
        for j, t in enumerate(self.trees):
            if t.order > self.n:
                raise InputError(f"tree {j} has order {t.order} > n={self.n}")
            if t.order > 1 and t.max_degree > self.delta:
                raise InputError(f"tree {j} has max degree {t.max_degree} > delta={self.delta}")
        if self.total_edges > math.comb(self.n, 2):
            raise InputError(
                f"total edge count {self.total_edges} exceeds C({self.n},2)={math.comb(self.n, 2)}"
            )

    def is_normalized(self) -> bool:
        small = [j for j, t in enumerate(self.trees) if 2 * t.order <= self.n]
        return len(small) <= 1


# -- normalisation ------------------------------------------------------------------

def merge_pair(f1: RootedTree, f2: RootedTree) -> tuple[RootedTree, tuple[int, ...], tuple[int, ...]]:
    """Identify the lowest-indexed leaf of each tree.

    Returns the merged tree (rooted at f1's root, f1 keeps its indices, the
    rest of f2 is appended) and the vertex maps of f1 and f2 into it.
    """
    a, b = f1.lowest_leaf(), f2.lowest_leaf()
    map1 = tuple(range(f1.order))
    map2 = [0] * f2.order
    nxt = f1.order
    for v in range(f2.order):
        if v == b:
            map2[v] = a
        else:
            map2[v] = nxt
            nxt += 1
    edges = [(map1[p], map1[v]) for p, v in f1.edges] + [(map2[p], map2[v]) for p, v in f2.edges]
    merged = RootedTree.from_edges(nxt, edges, root=f1.root)
    return merged, map1, tuple(map2)


def merge_small_trees(fam: TreeFamily) -> TreeFamily:
    """Merge trees of order <= n/2 pairwise until at most one remains."""
    if not fam.trees:
        return TreeFamily([], fam.n, fam.delta, None, [])
    fam.check_hypotheses()
    trees = list(fam.trees)
    origins = list(fam.origins)
    while True:
        small = [j for j, t in enumerate(trees) if 2 * t.order <= fam.n]
        if len(small) <= 1:
            break
        i, j = small[0], small[1]
        merged, m1, m2 = merge_pair(trees[i], trees[j])
        if merged.order > 1 and merged.max_degree > fam.delta:
            raise InputError(
                f"leaf identification raises the degree above delta={fam.delta}; "
                "merging needs delta >= 2"
            )
        new_origin = tuple((src, tuple(m1[x] for x in vm)) for src, vm in origins[i]) + tuple(
            (src, tuple(m2[x] for x in vm)) for src, vm in origins[j]
        )
        trees[i], origins[i] = merged, new_origin
        del trees[j], origins[j]
    small = [j for j, t in enumerate(trees) if 2 * t.order <= fam.n]
    return TreeFamily(trees, fam.n, fam.delta, small[0] if small else None, origins)


# -- grouping and padding --------------------------------------------------------------

@dataclass(frozen=True)
class PaddedTree:
    source: int  # index in the normalised family
    tree: RootedTree
    original_order: int  # vertices >= original_order are padding

    @property
    def padding(self) -> int:
        return self.tree.order - self.original_order


@dataclass
class GroupedFamily:
    groups: dict[int, list[PaddedTree]]
    endpoints: list[int]  # endpoints[i] is the common padded order of group i (index 0 = n//2)
    exceptional_tree: RootedTree | None
    exceptional_index: int | None
    added_path_edges: int
    n: int
    epsilon: float
    c: int

    @property
    def group_sizes(self) -> dict[int, int]:
        return {i: len(g) for i, g in self.groups.items()}

    @property
    def padding_budget(self) -> float:
        return self.epsilon * self.n**2 / 50

    @property
    def within_padding_budget(self) -> bool:
        return self.added_path_edges <= self.padding_budget

    def members(self) -> list[tuple[int, int, PaddedTree]]:
        """(group, position, tree) triples in group order."""
        return [(i, s, pt) for i in sorted(self.groups) for s, pt in enumerate(self.groups[i])]


def pad_with_path(t: RootedTree, extra: int) -> RootedTree:
    if extra <= 0:
        return t
    leaf = t.lowest_leaf()
    parent = list(t.parent)
    prev = leaf
    for k in range(extra):
        parent.append(prev)
        prev = t.order + k
    return RootedTree(tuple(parent), t.root)


def group_endpoints(n: int, c: int) -> list[int]:
    """[floor(n/2), ceil(n/2 + i*n/(2c)) for i = 1..c]."""
    return [n // 2] + [-(-n * (c + i) // (2 * c)) for i in range(1, c + 1)]


def default_group_count(epsilon: float, cap: int | None = None) -> int:
    c = math.ceil(50 / epsilon - 1e-12)
    return min(c, cap) if cap else c


def group_and_pad(fam: TreeFamily, epsilon: float, c: int | None = None) -> GroupedFamily:
    if not epsilon > 0:
        raise InputError("epsilon must be positive")
    c = default_group_count(epsilon) if c is None else int(c)
    if c < 1:
        raise InputError("need at least one group")
    ends = group_endpoints(fam.n, c)
    groups: dict[int, list[PaddedTree]] = {i: [] for i in range(1, c + 1)}
    added = 0
    exc_tree = fam.trees[fam.exceptional] if fam.exceptional is not None else None
    for j, t in enumerate(fam.trees):
        if j == fam.exceptional:
            continue
        if 2 * t.order <= fam.n:
            raise InputError(f"tree {j} of order {t.order} <= n/2 is not the exceptional tree")
        i = next(k for k in range(1, c + 1) if t.order <= ends[k])
        extra = ends[i] - t.order
        groups[i].append(PaddedTree(j, pad_with_path(t, extra), t.order))
        added += extra
    return GroupedFamily(groups, ends, exc_tree, fam.exceptional, added, fam.n, epsilon, c)


# -- level partitions -------------------------------------------------------------------

@dataclass(frozen=True)
class LevelPartition:
    levels: tuple[tuple[int, ...], ...]
    level_roots: tuple[tuple[int, ...], ...]
    rho: float
    r: int
    cut_components: tuple[tuple[int, ...], ...]

    def level_of(self, order: int) -> list[int]:
        out = [-1] * order
        for j, lvl in enumerate(self.levels):
            for v in lvl:
                out[v] = j
        return out


def cut_components(t: RootedTree, cap: float) -> list[list[int]]:
    """Repeatedly descend along heaviest children and cut the first subtree of size <= cap."""
    ch = t.children()
    alive = [True] * t.order
    size = [1] * t.order
    for v in reversed(t.bfs_order()):
        p = t.parent[v]
        if p >= 0:
            size[p] += size[v]
    comps: list[list[int]] = []
    while True:
        if size[t.root] <= cap:
            comps.append(sorted(v for v in range(t.order) if alive[v]))
            return comps
        z = t.root
        while True:
            kids = [y for y in ch[z] if alive[y]]
            y = max(kids, key=lambda u: (size[u], -u))
            if size[y] <= cap:
                break
            z = y
        comp = []
        stack = [y]
        while stack:
            u = stack.pop()
            alive[u] = False
            comp.append(u)
            stack.extend(w for w in ch[u] if alive[w])
        s = size[y]
        u = z
        while u >= 0:
            size[u] -= s
            u = t.parent[u]
        comps.append(sorted(comp))


def balanced_level_partition(
    t: RootedTree, r: int, rho: float, *, delta: int | None = None, strict: bool = True
) -> LevelPartition:
    """Cut ``t`` into ``r`` levels whose parents lie in earlier levels.

    With ``strict`` the cutting-lemma hypotheses v(T) >= 4*delta*r/rho and
    0 < rho < 1/(4r) are enforced; otherwise the same algorithm runs with the
    given practical ``rho`` and the caller inspects the result.
    """
    if r < 1:
        raise InputError("r must be >= 1")
    if not rho > 0:
        raise InputError("rho must be positive")
    v = t.order
    delta = t.max_degree if delta is None else delta
    if strict:
        if not rho < 1 / (4 * r):
            raise InputError(f"rho={rho} violates rho < 1/(4r) = {1 / (4 * r)}")
        if v < 4 * delta * r / rho:
            raise InputError(f"v(T)={v} violates v(T) >= 4*delta*r/rho = {4 * delta * r / rho}")
    cap = rho / (2 * r) * v
    comps = cut_components(t, cap)
    target = v / r
    levels: list[list[int]] = [[] for _ in range(r)]
    cum = 0
    i = 0
    for comp in reversed(comps):  # the root's component is cut last
        levels[i].extend(comp)
        cum += len(comp)
        while i < r - 1 and cum >= (i + 1) * target - cap / 2:
            i += 1
    levels_t = tuple(tuple(sorted(lvl)) for lvl in levels)
    level_of = [0] * v
    for j, lvl in enumerate(levels_t):
        for u in lvl:
            level_of[u] = j
    roots = tuple(
        tuple(u for u in lvl if t.parent[u] < 0 or level_of[t.parent[u]] != j)
        for j, lvl in enumerate(levels_t)
    )
    return LevelPartition(levels_t, roots, rho, r, tuple(tuple(c) for c in comps))


def check_level_partition(t: RootedTree, part: LevelPartition, delta: int | None = None) -> list[str]:
    """Return the violated conditions (empty list when the partition is valid)."""
    problems = []
    v = t.order
    seen = sorted(u for lvl in part.levels for u in lvl)
    if seen != list(range(v)):
        problems.append("levels do not partition V(T)")
    lo = (1 - part.rho / 2) * v / part.r
    hi = (1 + part.rho / 2) * v / part.r
    for j, lvl in enumerate(part.levels):
        if not lo <= len(lvl) <= hi:
            problems.append(f"(a) level {j + 1} has size {len(lvl)} outside [{lo:.3f}, {hi:.3f}]")
    level_of = part.level_of(v)
    for u in range(v):
        p = t.parent[u]
        if p >= 0 and level_of[p] > level_of[u]:
            problems.append(f"(b) parent of {u} lies in a later level")
            break
    delta = t.max_degree if delta is None else delta
    bound = 8 * delta / part.rho
    for j, roots in enumerate(part.level_roots):
        if len(roots) > bound:
            problems.append(f"level {j + 1} has {len(roots)} components > 8*delta/rho = {bound}")
    return problems


@dataclass(frozen=True)
class LevelForest:
    """A forest on local vertices ``0..order-1`` with roots and a primary/secondary split.

    ``labels[i]`` is the tree vertex that local vertex ``i`` stands for.
    """

    labels: tuple[int, ...]
    adjacency: tuple[tuple[int, ...], ...]
    roots: frozenset[int]
    primary: frozenset[int]
    secondary: frozenset[int]

    @property
    def order(self) -> int:
        return len(self.labels)

    @property
    def edges(self) -> list[tuple[int, int]]:
        return [(u, w) for u, row in enumerate(self.adjacency) for w in row if u < w]

    @property
    def max_degree(self) -> int:
        return max((len(row) for row in self.adjacency), default=0)

    @classmethod
    def from_edges(
        cls,
        order: int,
        edges: Iterable[Sequence[int]],
        roots: Iterable[int] = (),
        primary: Iterable[int] | None = None,
        labels: Sequence[int] | None = None,
    ) -> "LevelForest":
        adj: list[list[int]] = [[] for _ in range(order)]
        for u, w in edges:
            adj[u].append(w)
            adj[w].append(u)
        adjacency = tuple(tuple(sorted(row)) for row in adj)
        roots = frozenset(roots)
        if primary is None:
            prim, sec = bipartition_primary_secondary(adjacency, roots)
        else:
            prim = frozenset(primary)
            sec = frozenset(range(order)) - prim - roots
            if prim & roots:
                raise InputError("roots cannot be primary")
        labels = tuple(range(order)) if labels is None else tuple(labels)
        return cls(labels, adjacency, roots, prim, sec)


def bipartition_primary_secondary(
    adjacency: Sequence[Sequence[int]], roots: Iterable[int]
) -> tuple[frozenset[int], frozenset[int]]:
    """Primary = odd distance from the roots, secondary = even distance (roots excluded)."""
    roots = set(roots)
    dist = [-1] * len(adjacency)
    queue = deque()
    for x in sorted(roots):
        dist[x] = 0
        queue.append(x)
    while queue:
        u = queue.popleft()
        for w in adjacency[u]:
            if dist[w] < 0:
                dist[w] = dist[u] + 1
                queue.append(w)
    if any(d < 0 for d in dist):
        raise InputError("every component of the level forest needs a root")
    prim = frozenset(v for v, d in enumerate(dist) if d % 2 == 1)
    sec = frozenset(v for v, d in enumerate(dist) if d > 0 and d % 2 == 0)
    return prim, sec


def level_forest(t: RootedTree, vertices: Sequence[int], roots: Iterable[int]) -> LevelForest:
    labels = tuple(sorted(vertices))
    local = {u: i for i, u in enumerate(labels)}
    edges = [
        (local[p], local[v]) for p, v in t.edges if p in local and v in local
    ]
    return LevelForest.from_edges(len(labels), edges, [local[x] for x in roots], labels=labels)


def level_forests(t: RootedTree, part: LevelPartition) -> list[LevelForest]:
    return [level_forest(t, lvl, roots) for lvl, roots in zip(part.levels, part.level_roots)]


# -- generators ---------------------------------------------------------------------

def random_bounded_tree(order: int, delta: int, rng: np.random.Generator) -> RootedTree:
    """Uniform attachment restricted to vertices of degree < delta."""
    if order > 2 and delta < 2:
        raise InputError("trees with more than two vertices need delta >= 2")
    parent = [-1]
    deg = [0]
    open_ = [0]  # vertices with degree < delta
    for v in range(1, order):
        k = int(rng.integers(len(open_)))
        p = open_[k]
        parent.append(p)
        deg[p] += 1
        deg.append(1)
        if deg[p] >= delta:
            open_[k] = open_[-1]
            open_.pop()
        if delta > 1:
            open_.append(v)
    return RootedTree(tuple(parent), 0)


def regular_tree(delta: int, depth: int) -> RootedTree:
    """Full tree in which every internal vertex has degree ``delta`` and leaves sit at ``depth``."""
    if delta < 2 or depth < 1:
        raise InputError("regular tree needs delta >= 2 and depth >= 1")
    parent = [-1]
    frontier = [0]
    for level in range(depth):
        nxt = []
        for u in frontier:
            for _ in range(delta if level == 0 else delta - 1):
                parent.append(u)
                nxt.append(len(parent) - 1)
        frontier = nxt
    return RootedTree(tuple(parent), 0)


def caterpillar(order: int, delta: int, rng: np.random.Generator) -> RootedTree:
    if order > 2 and delta < 2:
        raise InputError("caterpillars with more than two vertices need delta >= 2")
    parent = [-1]
    spine = [0]
    legs = {0: 0}
    while len(parent) < order:
        s = spine[-1]
        room = delta - (1 if s == 0 else 2) - legs[s]
        if room > 0 and rng.random() < 0.5 and len(spine) > 1:
            parent.append(s)
            legs[s] += 1
        else:
            parent.append(s)
            spine.append(len(parent) - 1)
            legs[spine[-1]] = 0
    return RootedTree(tuple(parent), 0)


def _parse_value(text: str):
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    return text


def parse_generator_spec(text: str) -> dict:
    """``"kind:key=value,..."`` -> {"kind": kind, key: value, ...}."""
    kind, _, rest = text.partition(":")
    desc: dict = {"kind": kind.strip()}
    for item in filter(None, (s.strip() for s in rest.split(","))):
        key, eq, val = item.partition("=")
        if not eq:
            raise InputError(f"generator option {item!r} is not key=value")
        desc[key.strip()] = _parse_value(val.strip())
    return desc


def _budget(desc: dict, n: int) -> int:
    b = desc.get("budget", "full")
    return math.comb(n, 2) if b == "full" else int(b)


def generate_family(desc: dict | str, seed: int = 0) -> TreeFamily:
    """Deterministic fixture families; see :func:`parse_generator_spec` for the string form."""
    if isinstance(desc, str):
        desc = parse_generator_spec(desc)
    kind = desc["kind"]
    rng = np.random.default_rng(seed)
    if kind == "ringel":
        n = int(desc["n"])
        shape = desc.get("shape", "path")
        delta = int(desc.get("delta", 2 if shape == "path" else 3))
        if shape == "path":
            tree = RootedTree.path(n + 1)
        elif shape == "random":
            tree = random_bounded_tree(n + 1, delta, rng)
        else:
            raise InputError(f"unknown ringel shape {shape!r}")
        return TreeFamily([tree] * (2 * n + 1), 2 * n + 1, max(delta, tree.max_degree))
    if kind == "regular":
        tree = regular_tree(int(desc["delta"]), int(desc["depth"]))
        count = int(desc.get("count", 1))
        n = int(desc.get("n", tree.order))
        if tree.order > n:
            raise InputError(f"regular tree of order {tree.order} exceeds n={n}")
        return TreeFamily([tree] * count, n, int(desc["delta"]))

    n = int(desc["n"])
    delta = int(desc.get("delta", 2 if kind == "paths" else 3))
    budget = _budget(desc, n)
    count = desc.get("count")
    count = None if count is None else int(count)
    lo = int(desc.get("min_order", n // 2 + 1))
    hi = int(desc.get("max_order", n))
    if not 1 <= lo <= hi <= n:
        raise InputError(f"order range [{lo}, {hi}] must lie within [1, n={n}]")
    trees: list[RootedTree] = []
    used = 0
    while count is None or len(trees) < count:
        if kind == "paths":
            order = int(desc.get("order", n))
            if not 1 <= order <= n:
                raise InputError(f"path order {order} must lie within [1, n]")
        else:
            order = int(rng.integers(lo, hi + 1))
        if used + order - 1 > budget:
            break
        if kind == "paths":
            t = RootedTree.path(order)
        elif kind == "random":
            t = random_bounded_tree(order, delta, rng)
        elif kind == "caterpillars":
            t = caterpillar(order, delta, rng)
        else:
            raise InputError(f"unknown generator kind {kind!r}")
        trees.append(t)
        used += order - 1
        if order == 1 and count is None:
            break
    return TreeFamily(trees, n, delta)


# -- counterexample families -------------------------------------------------------------

def modified_regular_tree(delta: int, depth: int) -> RootedTree:
    """Move the last leaf of the full regular tree onto the first leaf."""
    base = regular_tree(delta, depth)
    deg = base.degrees()
    leaves = [v for v in range(base.order) if deg[v] == 1 and v != base.root]
    first, last = leaves[0], leaves[-1]
    parent = list(base.parent)
    parent[last] = first
    return RootedTree(tuple(parent), base.root)


def generate_counterexample_family(kind: str, **params) -> TreeFamily:
    if kind == "modified_regular":
        delta, depth = int(params["delta"]), int(params["depth"])
        if delta < 3 or delta % 2 == 0:
            raise InputError("modified regular family needs an odd delta >= 3")
        if depth < 2:
            raise InputError("modified regular family needs depth >= 2")
        base = regular_tree(delta, depth)
        n = base.order
        if n % 2:
            raise InputError(f"regular tree order {n} must be even")
        trees = [modified_regular_tree(delta, depth)] + [base] * (n // 2 - 1)
        return TreeFamily(trees, n, delta)
    if kind == "star_family":
        n, eps = int(params["n"]), float(params["epsilon"])
        if not 0 < eps < 1e-3:
            raise InputError("star family needs epsilon in (0, 1e-3)")
        size = star_edges(n, eps)
        count = math.comb(n, 2) // size
        return TreeFamily([RootedTree.star(size + 1)] * count, n, size)
    raise InputError(f"unknown counterexample kind {kind!r}")


def star_edges(n: int, eps: float) -> int:
    """Edges per star: (1/2 + 2 sqrt(eps)) n, rounded down."""
    return int(math.floor((0.5 + 2 * math.sqrt(eps)) * n + 1e-9))


def star_family_counting(n: int, eps: float) -> dict:
    """Evaluate the edge-capacity inequality that rules out packing the star family."""
    s = star_edges(n, eps)
    copies = math.comb(n, 2) // s
    free = 3 * math.sqrt(eps) * n  # lower bound on hosts that carry no centre
    host = (1 + eps) * n
    lhs = math.comb(n, 2) - n
    rhs = host * (host - 1) / 2 - free * (free - 1) / 2
    return {
        "star_edges": s,
        "copies": copies,
        "family_edges": copies * s,
        "lhs_min_family_edges": lhs,
        "rhs_capacity_outside_W": rhs,
        "deficit": lhs - rhs,
        "inequality_holds": lhs > rhs,
    }


def regular_load_system(delta: int, depth: int) -> dict:
    """Per-host-vertex leaf/internal counts forced in a perfect packing of the regular family."""
    t = regular_tree(delta, depth)
    n = t.order
    # c1 + c2 = n/2 ; c1 + delta*c2 = n - 1
    c2 = Fraction(n - 1 - Fraction(n, 2), delta - 1)
    c1 = Fraction(n, 2) - c2
    # hosting the degree-2 vertex: 1 + c1' + c2' = n/2 ; 2 + c1' + delta*c2' = n - 1
    c2m = Fraction(n - 3 - (Fraction(n, 2) - 1), delta - 1)
    c1m = Fraction(n, 2) - 1 - c2m
    return {
        "n": n,
        "c1": c1,
        "c2": c2,
        "modified_c1": c1m,
        "modified_c2": c2m,
        "original_integral": c1.denominator == 1 and c2.denominator == 1,
        "modified_integral": c1m.denominator == 1 and c2m.denominator == 1,
    }


# -- family files ---------------------------------------------------------------------

def write_family(fam: TreeFamily, dest) -> None:
    lines = [json.dumps({"n": fam.n, "delta": fam.delta})]
    lines += [json.dumps(t.to_json()) for t in fam.trees]
    text = "\n".join(lines) + "\n"
    if hasattr(dest, "write"):
        dest.write(text)
    else:
        Path(dest).write_text(text)


def read_family(src) -> TreeFamily:
    text = src.read() if hasattr(src, "read") else Path(src).read_text()
    rows = [ln for ln in text.splitlines() if ln.strip()]
    if not rows:
        raise InputError("empty family file")
    try:
        header = json.loads(rows[0])
        n, delta = int(header["n"]), int(header["delta"])
        trees = [RootedTree.from_json(json.loads(ln)) for ln in rows[1:]]
    except (KeyError, ValueError, TypeError) as exc:
        raise InputError(f"malformed family file: {exc}") from None
    return TreeFamily(trees, n, delta)
