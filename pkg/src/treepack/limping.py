"""Limping homomorphisms: primaries uniform, secondaries uniform in a common neighbourhood.

All sampling goes through :func:`sample_batch`, which draws many independent
copies at once; the single-sample API is the ``trials=1`` case so the two
routes consume random numbers identically.
"""

from __future__ import annotations

import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from statistics import NormalDist

import numpy as np

from .errors import InputError, TreepackError
from .graph import HostGraph, badness_band
from .trees import LevelForest

SKIPPED = -1
UNMAPPED = -2  # roots are never embedded by the sampler


@dataclass(frozen=True)
class LimpingConfig:
    alpha: float
    density: float
    host: HostGraph
    forest: LevelForest
    seed: int | np.random.SeedSequence = 0

    def __post_init__(self):
        if not 0 < self.alpha < 0.25:
            raise InputError(f"alpha={self.alpha} must lie in (0, 1/4)")
        if not 0 < self.density <= 1:
            raise InputError(f"density={self.density} must lie in (0, 1]")

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.seed)


@dataclass(frozen=True)
class PartialEmbedding:
    """Host image of every forest vertex, or SKIPPED / UNMAPPED."""

    assignment: tuple[int, ...]

    @property
    def skipped(self) -> frozenset[int]:
        return frozenset(v for v, a in enumerate(self.assignment) if a == SKIPPED)

    @property
    def image_vertices(self) -> frozenset[int]:
        return frozenset(a for a in self.assignment if a >= 0)

    def image_edges(self, forest: LevelForest) -> list[tuple[int, int]]:
        """Host pairs of the fully assigned forest edges, with repetition."""
        h = self.assignment
        out = []
        for x, y in forest.edges:
            if h[x] >= 0 and h[y] >= 0:
                out.append((min(h[x], h[y]), max(h[x], h[y])))
        return out


def _band_table(density: float, m: int, alpha: float, pmax: int) -> tuple[np.ndarray, np.ndarray]:
    lo = np.zeros(pmax + 1)
    hi = np.zeros(pmax + 1)
    for p in range(1, pmax + 1):
        lo[p], hi[p] = badness_band(density, p, m, alpha)
    return lo, hi


def _distinct_counts(images: np.ndarray) -> np.ndarray:
    s = np.sort(images, axis=1)
    return 1 + np.count_nonzero(s[:, 1:] != s[:, :-1], axis=1)


def sample_batch(
    adj: np.ndarray,
    forest: LevelForest,
    alpha: float,
    density: float,
    rng: np.random.Generator,
    trials: int,
    primary_images: np.ndarray | None = None,
) -> np.ndarray:
    """Draw ``trials`` independent limping homomorphisms; returns an int array (trials, order).

    Primaries are drawn first (one row per trial, columns in ascending vertex
    order), then one uniform ``tau`` per trial for each secondary vertex in
    ascending order. ``primary_images`` pins the primary layer (shape
    (trials, |P|)) for conditional tests.
    """
    m = adj.shape[0]
    order = forest.order
    out = np.full((trials, order), UNMAPPED, dtype=np.int64)
    prim = sorted(forest.primary)
    if primary_images is None:
        primary_images = rng.integers(0, m, size=(trials, len(prim)))
    primary_images = np.asarray(primary_images, dtype=np.int64).reshape(trials, len(prim))
    if prim:
        out[:, prim] = primary_images
    pmax = max((len(forest.adjacency[y]) for y in forest.secondary), default=0)
    lo, hi = _band_table(density, m, alpha, max(pmax, 1))
    rows = np.arange(trials)
    for y in sorted(forest.secondary):
        nbrs = [u for u in forest.adjacency[y] if u in forest.primary]
        if not nbrs:
            raise TreepackError(f"secondary vertex {y} has no embedded neighbour")
        tau = rng.random(trials)
        imgs = out[:, nbrs]
        common = adj[imgs[:, 0]].copy()
        for k in range(1, len(nbrs)):
            common &= adj[imgs[:, k]]
        codeg = np.count_nonzero(common, axis=1)
        p = _distinct_counts(imgs) if len(nbrs) > 1 else np.ones(trials, dtype=np.int64)
        bad = (codeg < lo[p]) | (codeg > hi[p])
        idx = np.minimum(np.floor(tau * codeg).astype(np.int64), np.maximum(codeg - 1, 0))
        ok = ~bad & (codeg > 0)
        pos = np.cumsum(common, axis=1)
        pick = np.argmax(pos > idx[:, None], axis=1)
        col = np.full(trials, SKIPPED, dtype=np.int64)
        col[ok] = pick[ok]
        out[rows, y] = col
    return out


def sample_limping(cfg: LimpingConfig) -> PartialEmbedding:
    row = sample_batch(
        cfg.host.adjacency, cfg.forest, cfg.alpha, cfg.density, cfg.rng(), 1
    )[0]
    return PartialEmbedding(tuple(int(a) for a in row))


def homomorphism_violations(adj: np.ndarray, forest: LevelForest, batch: np.ndarray) -> int:
    """Number of (trial, edge) pairs whose both ends are assigned but not adjacent in the host."""
    bad = 0
    for x, y in forest.edges:
        hx, hy = batch[:, x], batch[:, y]
        both = (hx >= 0) & (hy >= 0)
        bad += int(np.count_nonzero(both & ~adj[np.maximum(hx, 0), np.maximum(hy, 0)]))
    return bad


# -- census --------------------------------------------------------------------------

@dataclass
class CollisionCensus:
    vc: list[frozenset[int]]
    ec: list[frozenset[int]]
    skipped: list[frozenset[int]]
    fn: dict[int, frozenset[tuple[int, int]]]  # host vertex -> {(forest, vertex)}
    yn: dict[int, frozenset[tuple[int, int]]]
    xn: dict[int, frozenset[tuple[int, int]]]
    pair_uses: dict[tuple[int, int], int]  # host pair -> number of forests using it

    @property
    def multiply_used_pairs(self) -> dict[tuple[int, int], int]:
        return {p: k for p, k in self.pair_uses.items() if k > 1}

    def faulty(self, f: int) -> frozenset[int]:
        return self.vc[f] | self.ec[f]

    @staticmethod
    def _max(d: dict) -> int:
        return max((len(s) for s in d.values()), default=0)

    def summary(self) -> dict:
        return {
            "vc": [len(s) for s in self.vc],
            "ec": [len(s) for s in self.ec],
            "y": [len(s) for s in self.skipped],
            "max_fn": self._max(self.fn),
            "max_yn": self._max(self.yn),
            "max_xn": self._max(self.xn),
            "distinct_pairs": len(self.pair_uses),
            "multiply_used_pairs": len(self.multiply_used_pairs),
        }


def census_collisions(embs: list[PartialEmbedding], forests: list[LevelForest]) -> CollisionCensus:
    if len(embs) != len(forests):
        raise InputError("need exactly one embedding per forest")
    vc = []
    for emb in embs:
        seen: dict[int, list[int]] = defaultdict(list)
        for x, a in enumerate(emb.assignment):
            if a >= 0:
                seen[a].append(x)
        vc.append(frozenset(x for xs in seen.values() if len(xs) > 1 for x in xs))

    users: dict[tuple[int, int], set[int]] = defaultdict(set)
    per_forest_edges = []
    for f, (emb, forest) in enumerate(zip(embs, forests)):
        h = emb.assignment
        rows = []
        for x, y in forest.edges:
            if h[x] >= 0 and h[y] >= 0:
                pair = (min(h[x], h[y]), max(h[x], h[y]))
                users[pair].add(f)
                rows.append((x, y, pair))
        per_forest_edges.append(rows)
    ec = []
    for f, rows in enumerate(per_forest_edges):
        hit = set()
        for x, y, pair in rows:
            if len(users[pair]) > 1:
                hit.update((x, y))
        ec.append(frozenset(hit))

    fn: dict[int, set] = defaultdict(set)
    yn: dict[int, set] = defaultdict(set)
    xn: dict[int, set] = defaultdict(set)
    skipped = [emb.skipped for emb in embs]
    for f, (emb, forest) in enumerate(zip(embs, forests)):
        h = emb.assignment
        bad = vc[f] | ec[f]
        for x, a in enumerate(h):
            if a < 0:
                continue
            nbrs = forest.adjacency[x]
            if any(y in bad for y in nbrs):
                fn[a].add((f, x))
            if any(y in skipped[f] for y in nbrs):
                yn[a].add((f, x))
            if any(y in forest.roots for y in nbrs):
                xn[a].add((f, x))
    freeze = lambda d: {v: frozenset(s) for v, s in d.items()}
    pair_uses = {p: len(s) for p, s in users.items()}
    return CollisionCensus(vc, ec, skipped, freeze(fn), freeze(yn), freeze(xn), pair_uses)


def vc_counts(batch: np.ndarray) -> np.ndarray:
    """|VC| for every row of a batch of assignments."""
    s = np.sort(batch, axis=1)
    eq = (s[:, 1:] == s[:, :-1]) & (s[:, 1:] >= 0)
    left = np.zeros_like(s, dtype=bool)
    left[:, 1:] = eq
    left[:, :-1] |= eq
    return np.count_nonzero(left, axis=1)


# -- Monte Carlo checks --------------------------------------------------------------

@dataclass
class ClaimResult:
    name: str
    estimate: float
    bound: float | tuple[float, float]
    stderr: float
    passed: bool
    detail: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        bound = list(self.bound) if isinstance(self.bound, tuple) else self.bound
        return {
            "estimate": self.estimate,
            "bound": bound,
            "stderr": self.stderr,
            "pass": self.passed,
            **self.detail,
        }


@dataclass
class DistributionReport:
    trials: int
    alpha: float
    density: float
    host_order: int
    forest_order: int
    delta: int
    claims: list[ClaimResult]

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.claims)

    def claim(self, name: str) -> ClaimResult:
        return next(c for c in self.claims if c.name == name)

    def to_json(self) -> dict:
        return {
            "trials": self.trials,
            "alpha": self.alpha,
            "density": self.density,
            "host_order": self.host_order,
            "forest_order": self.forest_order,
            "delta": self.delta,
            "claims": {c.name: c.to_json() for c in self.claims},
            "all_pass": self.all_passed,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)


def _family_wise_z(sigmas: float, cells: int) -> float:
    nd = NormalDist()
    level = 2 * (1 - nd.cdf(sigmas))
    return nd.inv_cdf(1 - level / (2 * cells))


def _binom_se(p: float, n: int) -> float:
    return math.sqrt(max(p * (1 - p), 0.0) / n)


def estimate_lemma_bounds(cfg: LimpingConfig, trials: int, sigmas: float = 3.0) -> DistributionReport:
    """Monte Carlo estimates of the limping-homomorphism claims for one fixture.

    Claims checked: primary uniformity, skip probability <= alpha, the
    two-sided edge-placement band, the pairwise placement bound and the
    expected number of colliding vertices.
    """
    if trials < 1000:
        raise InputError("at least 1000 trials are needed for meaningful estimates")
    forest = cfg.forest
    if forest.order > 100 or cfg.host.m > 500:
        raise InputError("fixture too large (forest order <= 100, host order <= 500)")
    adj = cfg.host.adjacency
    m, d, a = cfg.host.m, cfg.density, cfg.alpha
    delta = max(forest.max_degree, 1)
    batch = sample_batch(adj, forest, a, d, cfg.rng(), trials)
    claims: list[ClaimResult] = []

    # primary vertices land uniformly; the max over all cells is held to the
    # family-wise level of a single `sigmas` test
    p0 = 1 / m
    se0 = _binom_se(p0, trials)
    worst = 0.0
    for x in sorted(forest.primary):
        freq = np.bincount(batch[:, x], minlength=m) / trials
        worst = max(worst, float(np.max(np.abs(freq - p0))))
    z = _family_wise_z(sigmas, m * max(len(forest.primary), 1))
    claims.append(
        ClaimResult("primary_uniform", p0 + worst, p0, se0, worst <= z * se0,
                    {"max_abs_deviation": worst, "threshold_sigmas": z})
    )

    # skip probability
    skip = max((float(np.mean(batch[:, y] == SKIPPED)) for y in forest.secondary), default=0.0)
    se = _binom_se(skip, trials)
    claims.append(ClaimResult("skip_probability", skip, a, se, skip <= a + sigmas * se))

    # edge placement band for every ordered host edge (u, v), capped to a fixed pair on large hosts
    slack = a * (2 / d) ** delta
    lo = (1 - slack) ** (delta + 2) / (d * m * m) if slack < 1 else 0.0
    hi = (1 + slack) ** (delta + 2) / (d * m * m)
    se_e = _binom_se(1 / (d * m * m), trials)
    est_lo, est_hi = math.inf, -math.inf
    edges = [(x, y) if x in forest.primary else (y, x) for x, y in forest.edges
             if (x in forest.primary) != (y in forest.primary)
             and not ({x, y} & forest.roots)]
    for x, y in edges:
        joint = batch[:, x] * m + batch[:, y]
        counts = np.bincount(joint[batch[:, y] >= 0], minlength=m * m).reshape(m, m) / trials
        if m <= 32:
            vals = counts[adj]
        else:
            u = 0
            v = int(np.flatnonzero(adj[0])[0])
            vals = counts[u, v : v + 1]
        est_lo = min(est_lo, float(vals.min()))
        est_hi = max(est_hi, float(vals.max()))
    if edges:
        ok = est_lo >= lo - sigmas * se_e and est_hi <= hi + sigmas * se_e
        claims.append(ClaimResult("edge_probability", est_hi, (lo, hi), se_e, ok,
                                  {"min_estimate": est_lo, "max_estimate": est_hi}))

    # pairwise placement bound
    bound = (2 / d) ** (4 * delta * delta) / (m * m)
    best = 0.0
    order = forest.order
    for x in range(order):
        for y in range(x + 1, order):
            hx, hy = batch[:, x], batch[:, y]
            keep = (hx >= 0) & (hy >= 0)
            if not keep.any():
                continue
            c = np.bincount(hx[keep] * m + hy[keep], minlength=m * m)
            best = max(best, float(c.max()) / trials)
    se_p = _binom_se(best, trials)
    claims.append(ClaimResult("pair_placement", best, bound, se_p, best <= bound + sigmas * se_p))

    # expected vertex collisions
    vc = vc_counts(batch)
    mean = float(vc.mean())
    se_v = float(vc.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    vbound = 2 * order**2 / (d**delta * m)
    claims.append(ClaimResult("vertex_collisions_mean", mean, vbound, se_v,
                              mean <= vbound + sigmas * se_v))
    return DistributionReport(trials, a, d, m, order, delta, claims)


def lemma_suite(seed: int = 0, trials: int = 100_000) -> list[tuple[str, DistributionReport]]:
    """The standard desk-scale fixtures: a single edge into K_10 and a 10-vertex path into K_100."""
    edge = LevelForest.from_edges(2, [(0, 1)], primary=[0])
    path = LevelForest.from_edges(10, [(k, k + 1) for k in range(9)], primary=range(0, 10, 2))
    ss = np.random.SeedSequence(seed)
    s1, s2 = ss.spawn(2)
    return [
        ("edge_K10", estimate_lemma_bounds(
            LimpingConfig(0.2, 1.0, HostGraph.complete(10), edge, s1), trials)),
        ("path10_K100", estimate_lemma_bounds(
            LimpingConfig(0.05, 1.0, HostGraph.complete(100), path, s2), max(trials // 10, 1000))),
    ]
