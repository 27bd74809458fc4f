"""Dense host graphs, codegree kernels and quasirandomness diagnostics.

The host is stored as a symmetric boolean matrix. All queries are pure; the
only mutating operation is :meth:`HostGraph.remove_edges`, which callers must
serialise (readers may share a graph freely between rounds).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence, TextIO

import numpy as np

from .errors import CapabilityError, DoubleUseError, InputError

EXACT_DEFECT_MAX_ORDER = 20
DEFAULT_BAD_BUDGET = 10**7


@dataclass(frozen=True)
class Exact:
    """Exhaustive evaluation."""

    name = "exact"


@dataclass(frozen=True)
class Sampled:
    """Monte Carlo evaluation with ``count`` samples drawn from ``seed``.

    For the defect, ``enumerate_all`` replaces the random subsets with every
    subset of the vertex set (the sampled code path, fed a complete "sample").
    """

    count: int
    seed: int = 0
    enumerate_all: bool = False
    name = "sampled"


def parse_mode(mode) -> Exact | Sampled:
    if mode is None or mode == "exact":
        return Exact()
    if isinstance(mode, (Exact, Sampled)):
        return mode
    raise InputError(f"unknown evaluation mode {mode!r}")


class HostGraph:
    """Simple undirected graph on vertices ``0..m-1`` backed by a bit matrix."""

    __slots__ = ("_adj", "_edge_count")

    def __init__(self, adjacency: np.ndarray, *, check: bool = True):
        adj = np.array(adjacency, dtype=bool, copy=True)
        if check:
            if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
                raise InputError("adjacency must be a square matrix")
            if adj.diagonal().any():
                raise InputError("self-loops are not allowed")
            if not np.array_equal(adj, adj.T):
                raise InputError("adjacency must be symmetric")
        self._adj = adj
        self._edge_count = int(np.count_nonzero(adj)) // 2

    # -- constructors -------------------------------------------------------
    @classmethod
    def complete(cls, m: int) -> "HostGraph":
        adj = ~np.eye(m, dtype=bool)
        return cls(adj, check=False)

    @classmethod
    def empty(cls, m: int) -> "HostGraph":
        return cls(np.zeros((m, m), dtype=bool), check=False)

    @classmethod
    def from_edges(cls, m: int, edges: Iterable[Sequence[int]]) -> "HostGraph":
        adj = np.zeros((m, m), dtype=bool)
        for u, v in edges:
            u, v = int(u), int(v)
            if not (0 <= u < m and 0 <= v < m):
                raise InputError(f"edge ({u}, {v}) out of range for m={m}")
            if u == v:
                raise InputError(f"self-loop at {u}")
            adj[u, v] = adj[v, u] = True
        return cls(adj, check=False)

    # -- basic queries ------------------------------------------------------
    @property
    def m(self) -> int:
        return self._adj.shape[0]

    @property
    def adjacency(self) -> np.ndarray:
        view = self._adj.view()
        view.flags.writeable = False
        return view

    @property
    def edge_count(self) -> int:
        return self._edge_count

    @property
    def density(self) -> float:
        pairs = self.m * (self.m - 1) // 2
        return self._edge_count / pairs if pairs else 0.0

    def has_edge(self, u: int, v: int) -> bool:
        return bool(self._adj[u, v])

    def degrees(self) -> np.ndarray:
        return self._adj.sum(axis=1)

    def neighbours(self, v: int) -> np.ndarray:
        return np.flatnonzero(self._adj[v])

    def edges(self) -> list[tuple[int, int]]:
        us, vs = np.nonzero(np.triu(self._adj, 1))
        return list(zip(us.tolist(), vs.tolist()))

    def copy(self) -> "HostGraph":
        return HostGraph(self._adj, check=False)

    def induced(self, vertices: Sequence[int]) -> "HostGraph":
        idx = np.asarray(vertices, dtype=np.intp)
        return HostGraph(self._adj[np.ix_(idx, idx)], check=False)

    def edges_within(self, subset: Iterable[int]) -> int:
        """e(B): number of edges with both ends in ``subset``."""
        idx = np.unique(np.asarray(list(subset), dtype=np.intp))
        return int(np.count_nonzero(self._adj[np.ix_(idx, idx)])) // 2

    def edges_between(self, a: Iterable[int], b: Iterable[int]) -> int:
        """e(A, B) counting ordered pairs; edges inside A ∩ B count twice."""
        ia = np.unique(np.asarray(list(a), dtype=np.intp))
        ib = np.unique(np.asarray(list(b), dtype=np.intp))
        return int(np.count_nonzero(self._adj[np.ix_(ia, ib)]))

    # -- mutation -----------------------------------------------------------
    def remove_edges(self, edges: Iterable[Sequence[int]]) -> "HostGraph":
        """Delete each listed pair once; any absent pair aborts the whole call."""
        pairs = {(min(int(u), int(v)), max(int(u), int(v))) for u, v in edges}
        for u, v in sorted(pairs):
            if not (0 <= u < self.m and 0 <= v < self.m) or not self._adj[u, v]:
                raise DoubleUseError((u, v))
        if pairs:
            us, vs = np.array(sorted(pairs)).T
            self._adj[us, vs] = False
            self._adj[vs, us] = False
            self._edge_count -= len(pairs)
        return self

    def __eq__(self, other) -> bool:
        return isinstance(other, HostGraph) and np.array_equal(self._adj, other._adj)

    def __repr__(self) -> str:
        return f"HostGraph(m={self.m}, edges={self.edge_count})"


# -- edge-list files -----------------------------------------------------------

def write_edge_list(g: HostGraph, dest: str | Path | TextIO) -> None:
    lines = [f"m={g.m}"] + [f"{u} {v}" for u, v in g.edges()]
    text = "\n".join(lines) + "\n"
    if hasattr(dest, "write"):
        dest.write(text)
    else:
        Path(dest).write_text(text)


def read_edge_list(src: str | Path | TextIO) -> HostGraph:
    text = src.read() if hasattr(src, "read") else Path(src).read_text()
    lines = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    if not lines or not lines[0].startswith("m="):
        raise InputError("edge list must start with a header line 'm=<count>'")
    try:
        m = int(lines[0][2:])
        edges = [tuple(int(t) for t in ln.split()) for ln in lines[1:]]
    except ValueError as exc:
        raise InputError(f"malformed edge list: {exc}") from None
    for k, e in enumerate(edges, start=2):
        if len(e) != 2:
            raise InputError(f"line {k}: expected 'u v'")
    return HostGraph.from_edges(m, edges)


# -- codegrees -----------------------------------------------------------------

def _check_vertices(g: HostGraph, vs: Sequence[int]) -> list[int]:
    vs = [int(v) for v in vs]
    if not vs:
        raise InputError("vertex list must be non-empty")
    for v in vs:
        if not 0 <= v < g.m:
            raise InputError(f"vertex {v} out of range for m={g.m}")
    if len(set(vs)) != len(vs):
        raise InputError(f"duplicate vertices in {vs}")
    return vs


def _common_mask(adj: np.ndarray, vs: Sequence[int]) -> np.ndarray:
    return np.logical_and.reduce(adj[list(vs)], axis=0)


def codegree(g: HostGraph, vs: Sequence[int]) -> int:
    vs = _check_vertices(g, vs)
    return int(np.count_nonzero(_common_mask(g.adjacency, vs)))


def common_neighbourhood(g: HostGraph, vs: Sequence[int]) -> list[int]:
    """N(v1..vk) in ascending vertex order."""
    vs = _check_vertices(g, vs)
    return np.flatnonzero(_common_mask(g.adjacency, vs)).tolist()


def badness_band(d: float, p: int, m: int, gamma: float) -> tuple[float, float]:
    """Closed interval of codegrees that are *not* gamma-bad for p-sets."""
    centre = d**p * m
    return (1.0 - gamma) * centre, (1.0 + gamma) * centre


def is_gamma_bad(g: HostGraph, d: float, gamma: float, vs: Sequence[int]) -> bool:
    vs = _check_vertices(g, vs)
    if not 0.0 < d <= 1.0:
        raise InputError(f"density must lie in (0, 1], got {d}")
    lo, hi = badness_band(d, len(vs), g.m, gamma)
    c = int(np.count_nonzero(_common_mask(g.adjacency, vs)))
    return c < lo or c > hi


# -- quasirandomness defect -----------------------------------------------------

@dataclass
class DefectReport:
    density_used: float
    max_abs_defect: float
    mode: str
    subsets_tested: int
    worst_subset: list[int]

    def to_json(self) -> dict:
        return {
            "density_used": self.density_used,
            "max_abs_defect": self.max_abs_defect,
            "mode": self.mode,
            "subsets_tested": self.subsets_tested,
            "worst_subset": self.worst_subset,
        }


def _defect_values(e: np.ndarray, sizes: np.ndarray, d: float, m: int) -> np.ndarray:
    # shared by both evaluation routes so that equal inputs give equal bits
    pairs = sizes * (sizes - 1) // 2
    return np.abs(e - d * pairs) / float(m * m)


def _mask_to_subset(mask: int, m: int) -> list[int]:
    return [v for v in range(m) if (mask >> v) & 1]


def _exact_defect(g: HostGraph) -> DefectReport:
    m = g.m
    if m > EXACT_DEFECT_MAX_ORDER:
        raise CapabilityError(
            f"exact defect needs m <= {EXACT_DEFECT_MAX_ORDER} (2^m subsets), got m={m}"
        )
    adj = g.adjacency
    nbr_bits = np.array(
        [sum(1 << int(u) for u in np.flatnonzero(adj[v]) if u < v) for v in range(m)],
        dtype=np.int64,
    )
    total = 1 << m
    e = np.zeros(total, dtype=np.int64)
    for v in range(m):
        lower = np.arange(1 << v, dtype=np.int64)
        e[(1 << v) + lower] = e[lower] + np.bitwise_count(lower & nbr_bits[v])
    sizes = np.bitwise_count(np.arange(total, dtype=np.int64)).astype(np.int64)
    vals = _defect_values(e, sizes, g.density, m)
    best = int(np.argmax(vals))
    return DefectReport(g.density, float(vals[best]), "exact", total, _mask_to_subset(best, m))


def _subset_edge_counts(adj: np.ndarray, masks: np.ndarray) -> np.ndarray:
    a = adj.astype(np.float64)
    s = masks.astype(np.float64)
    twice = np.einsum("ij,ij->i", s @ a, s)
    return np.rint(twice / 2).astype(np.int64)


def _sampled_defect(g: HostGraph, mode: Sampled) -> DefectReport:
    m = g.m
    adj = g.adjacency
    if mode.enumerate_all:
        if m > EXACT_DEFECT_MAX_ORDER:
            raise CapabilityError(f"full enumeration needs m <= {EXACT_DEFECT_MAX_ORDER}")
        codes = np.arange(1 << m, dtype=np.int64)
        masks_all = ((codes[:, None] >> np.arange(m)) & 1).astype(bool)
        chunks = [masks_all]
    else:
        if mode.count < 1:
            raise InputError("sampled defect needs at least one subset")
        rng = np.random.default_rng(mode.seed)
        masks_all = rng.random((mode.count, m)) < 0.5
        chunks = np.array_split(masks_all, max(1, mode.count // 4096 + 1))
    best_val, best_mask, tested = -1.0, None, 0
    for chunk in chunks:
        if len(chunk) == 0:
            continue
        e = _subset_edge_counts(adj, chunk)
        sizes = chunk.sum(axis=1).astype(np.int64)
        vals = _defect_values(e, sizes, g.density, m)
        k = int(np.argmax(vals))
        if vals[k] > best_val:
            best_val, best_mask = float(vals[k]), chunk[k]
        tested += len(chunk)
    witness = np.flatnonzero(best_mask).tolist()
    return DefectReport(g.density, best_val, "sampled", tested, witness)


def quasirandom_defect(g: HostGraph, mode=None) -> DefectReport:
    """Largest |e(B) - d*C(|B|,2)| / m^2 over the tested subsets B.

    Exact mode enumerates all 2^m subsets; sampled mode includes each vertex
    independently with probability 1/2 and therefore only certifies a lower
    bound on the true defect.
    """
    mode = parse_mode(mode)
    if g.m == 0:
        return DefectReport(0.0, 0.0, mode.name, 0, [])
    if isinstance(mode, Exact):
        return _exact_defect(g)
    return _sampled_defect(g, mode)


# -- bad tuples ----------------------------------------------------------------

@dataclass
class BadProfile:
    gamma: float
    delta_cap: int
    density: float
    per_vertex: np.ndarray  # shape (m, delta_cap); column p-1 holds bad_{gamma,p}
    exact: tuple[bool, ...]  # per p: exact count vs sample estimate
    sample_sizes: tuple[int | None, ...]
    bad_vertex_set: frozenset[int] = field(default_factory=frozenset)

    def to_json(self) -> dict:
        return {
            "gamma": self.gamma,
            "delta_cap": self.delta_cap,
            "density": self.density,
            "exact": list(self.exact),
            "sample_sizes": list(self.sample_sizes),
            "per_vertex": self.per_vertex.tolist(),
            "bad_vertex_set": sorted(self.bad_vertex_set),
        }


def _iter_subsets(m: int, k: int, chunk: int = 4096):
    it = itertools.combinations(range(m), k)
    while True:
        block = list(itertools.islice(it, chunk))
        if not block:
            return
        yield np.array(block, dtype=np.intp)


def _exact_bad_counts(adj: np.ndarray, p: int, d: float, gamma: float) -> np.ndarray:
    m = adj.shape[0]
    lo, hi = badness_band(d, p, m, gamma)
    if p == 1:
        deg = adj.sum(axis=1)
        return ((deg < lo) | (deg > hi)).astype(np.float64)
    counts = np.zeros(m, dtype=np.int64)
    a32 = adj.astype(np.float32)
    for subsets in _iter_subsets(m, p - 1):
        common = np.logical_and.reduce(adj[subsets], axis=1)  # (chunk, m)
        codeg = common.astype(np.float32) @ a32  # codeg(S ∪ {v}) for v not in S
        bad = (codeg < lo) | (codeg > hi)
        rows = np.repeat(np.arange(len(subsets)), p - 1)
        bad[rows, subsets.ravel()] = False
        counts += bad.sum(axis=0)
    return counts.astype(np.float64)


def _sampled_bad_estimates(
    adj: np.ndarray, p: int, d: float, gamma: float, samples: int, rng: np.random.Generator
) -> np.ndarray:
    m = adj.shape[0]
    k = p - 1
    lo, hi = badness_band(d, p, m, gamma)
    draws = rng.integers(0, m - 1, size=(m, samples, k))
    # redraw tuples with repeated entries until all are k-sets
    while k > 1:
        srt = np.sort(draws, axis=2)
        dup = (np.diff(srt, axis=2) == 0).any(axis=2)
        if not dup.any():
            break
        draws[dup] = rng.integers(0, m - 1, size=(int(dup.sum()), k))
    # shift indices >= v by one so that v itself is never drawn
    vs = np.arange(m)[:, None, None]
    draws = draws + (draws >= vs)
    est = np.empty(m, dtype=np.float64)
    total = math.comb(m - 1, k)
    for v in range(m):
        common = np.logical_and.reduce(adj[draws[v]], axis=1) & adj[v]
        codeg = common.sum(axis=1)
        frac = np.count_nonzero((codeg < lo) | (codeg > hi)) / samples
        est[v] = frac * total
    return est


def bad_profile(
    g: HostGraph,
    gamma: float,
    delta_cap: int,
    mode=None,
    *,
    budget: int = DEFAULT_BAD_BUDGET,
    density: float | None = None,
) -> BadProfile:
    """Compute bad_{gamma,p}(v) for p = 1..delta_cap and the set BAD_{gamma,delta}.

    ``density`` defaults to the graph's own density. In sampled mode a p whose
    population C(m-1, p-1) does not exceed the sample size is counted exactly.
    """
    mode = parse_mode(mode)
    if delta_cap < 1:
        raise InputError("delta_cap must be >= 1")
    m = g.m
    d = g.density if density is None else density
    adj = g.adjacency
    per_vertex = np.zeros((m, delta_cap), dtype=np.float64)
    exact_flags: list[bool] = []
    sizes: list[int | None] = []
    rng = np.random.default_rng(mode.seed) if isinstance(mode, Sampled) else None
    bad = np.zeros(m, dtype=bool)
    for p in range(1, delta_cap + 1):
        k = p - 1
        population = math.comb(m - 1, k) if m >= 1 else 0
        use_exact = p == 1 or isinstance(mode, Exact) or population <= mode.count
        if m <= p - 1 or m == 0:
            exact_flags.append(True)
            sizes.append(None)
            continue
        if use_exact:
            if math.comb(m, k) > budget:
                raise CapabilityError(
                    f"exact bad-tuple count for p={p} needs C({m},{k})="
                    f"{math.comb(m, k)} tuples, budget is {budget}"
                )
            col = _exact_bad_counts(adj, p, d, gamma)
            exact_flags.append(True)
            sizes.append(None)
        else:
            col = _sampled_bad_estimates(adj, p, d, gamma, mode.count, rng)
            exact_flags.append(False)
            sizes.append(mode.count)
        per_vertex[:, p - 1] = col
        bad |= col > gamma * math.comb(m, k)
    return BadProfile(
        gamma=gamma,
        delta_cap=delta_cap,
        density=d,
        per_vertex=per_vertex,
        exact=tuple(exact_flags),
        sample_sizes=tuple(sizes),
        bad_vertex_set=frozenset(np.flatnonzero(bad).tolist()),
    )


def extract_superquasirandom(
    g: HostGraph, gamma: float, delta_cap: int, mode=None, *, budget: int = DEFAULT_BAD_BUDGET
) -> tuple[np.ndarray, HostGraph]:
    """Drop BAD_{gamma,delta}(g) once and return (kept vertices, induced graph).

    The kept array maps vertex ``i`` of the returned graph to vertex
    ``kept[i]`` of ``g``.
    """
    profile = bad_profile(g, gamma, delta_cap, mode, budget=budget)
    if not profile.bad_vertex_set:
        return np.arange(g.m), g.copy()
    keep = np.ones(g.m, dtype=bool)
    keep[list(profile.bad_vertex_set)] = False
    kept = np.flatnonzero(keep)
    return kept, g.induced(kept)
