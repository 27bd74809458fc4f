"""One nibble round: extract, sample, census, commit.

Forests are sampled independently against a frozen host snapshot; the
commit phase then removes every used host pair once and grows the
forbidden sets.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Hashable, Sequence

import numpy as np

from .errors import InputError, RoundFailure
from .graph import DefectReport, HostGraph, Sampled, bad_profile, quasirandom_defect
from .limping import SKIPPED, UNMAPPED, PartialEmbedding, census_collisions, sample_batch
from .trees import LevelForest

Key = tuple[int, int]  # (group i, position s)


# -- load and homogeneity --------------------------------------------------------------

@dataclass(frozen=True)
class LoadStats:
    mu: float
    sigma: float
    max_size_gap: int

    def homogeneous(self, alpha: float, ell: float) -> bool:
        return self.sigma <= alpha * ell**4 and self.max_size_gap <= alpha * ell


def _load_matrix(m: int, family: Sequence[Sequence[int]]) -> np.ndarray:
    """load(v, w) for all ordered pairs, via per-vertex counts and co-membership."""
    c = np.zeros(m, dtype=np.int64)
    both = np.zeros((m, m), dtype=np.int64)
    for w in family:
        idx = np.fromiter(w, dtype=np.int64)
        if idx.size and (idx.min() < 0 or idx.max() >= m):
            raise InputError(f"set contains a vertex outside [0, {m})")
        idx = np.unique(idx)
        c[idx] += 1
        both[np.ix_(idx, idx)] += 1
    return c[:, None] + c[None, :] - both


def load_stats(m: int, family: Sequence[Sequence[int]]) -> LoadStats:
    if m < 2:
        raise InputError("load statistics need m >= 2")
    load = _load_matrix(m, family)
    iu = np.triu_indices(m, 1)
    vals = load[iu]
    pairs = math.comb(m, 2)
    s1 = int(vals.sum())
    s2 = int(np.dot(vals, vals))
    mu = s1 / pairs
    sigma = (pairs * s2 - s1 * s1) / pairs  # exact numerator, one rounding
    sizes = [len(set(w)) for w in family]
    gap = max(sizes) - min(sizes) if sizes else 0
    return LoadStats(mu, sigma, gap)


def load_stats_bruteforce(m: int, family: Sequence[Sequence[int]]) -> LoadStats:
    """Direct double loop over pairs and sets; the reference for :func:`load_stats`."""
    sets = [set(w) for w in family]
    for w in sets:
        if any(not 0 <= v < m for v in w):
            raise InputError(f"set contains a vertex outside [0, {m})")
    loads = []
    for v in range(m):
        for u in range(v + 1, m):
            loads.append(sum(1 for w in sets if v in w or u in w))
    total = sum(loads)
    mu = total / len(loads)
    sigma = math.fsum((x - mu) ** 2 for x in loads)
    sizes = [len(w) for w in sets]
    return LoadStats(mu, sigma, max(sizes) - min(sizes) if sizes else 0)


@dataclass(frozen=True)
class Typicality:
    mask: np.ndarray  # (m, m) bool, True where the pair is typical
    atypical: int
    markov_bound: float  # sqrt(alpha) n^2, valid when sigma <= alpha n^4
    stated_bound: float  # alpha^(1/4) n^2


def classify_typical(family: Sequence[Sequence[int]], alpha: float, m: int, n: int) -> Typicality:
    load = _load_matrix(m, family)
    stats = load_stats(m, family)
    mask = (load - stats.mu) ** 2 <= math.sqrt(alpha) * n * n
    np.fill_diagonal(mask, True)
    atypical = int(np.count_nonzero(~mask[np.triu_indices(m, 1)]))
    return Typicality(mask, atypical, math.sqrt(alpha) * n * n, alpha**0.25 * n * n)


def important_groups(group_sizes: dict[int, int], alpha: float, n: int, r: int) -> list[int]:
    return sorted(i for i, k in group_sizes.items() if k > math.sqrt(alpha) * n * r / 2)


# -- forbidden sets -------------------------------------------------------------------

@dataclass
class ForbiddenFamily:
    sets: dict[Key, frozenset[int]]
    n: int

    @classmethod
    def empty(cls, keys, n: int) -> "ForbiddenFamily":
        return cls({k: frozenset() for k in keys}, n)

    def groups(self) -> dict[int, list[frozenset[int]]]:
        out: dict[int, list[frozenset[int]]] = {}
        for (i, s) in sorted(self.sets):
            out.setdefault(i, []).append(self.sets[(i, s)])
        return out


# -- conformance ---------------------------------------------------------------------

@dataclass(frozen=True)
class RoundParams:
    alpha: float = 0.05  # badness tolerance of the sampler
    beta: float = 0.05
    epsilon: float = 0.5
    r: int = 10
    gamma: float = 0.05  # extraction tolerance
    delta: int = 3
    n: int = 0
    seed: int = 0
    round_index: int = 0
    bad_samples: int = 512
    defect_samples: int = 10_000
    threads: int = 1


def conformance_bounds(p: RoundParams, d: float) -> dict[str, float]:
    n, r, e, b, D = p.n, p.r, p.epsilon, p.beta, p.delta
    return {
        "C1": b * n / r,
        "C2": 20 * n / (e * r * r * d**D),
        "C3": 300 * D * n / (e * e * r * r * d**D),
        "C4": 1e4 * D**3 * n / (e**3 * r * r * d ** (2 * D)),
        "C5": b * n / r,
        "C6": b * n / r,
        "C7": b,
        "C8_sigma": b * n**4,
        "C8_gap": b * n,
    }


def evaluate_conformance(counts: dict, p: RoundParams, d: float) -> dict[str, bool]:
    """C1..C8 from stored counts; pure, so a ledger can be re-checked after the fact."""
    bd = conformance_bounds(p, d)
    return {
        "C1": max(counts["y"], default=0) <= bd["C1"],
        "C2": max(counts["vc"], default=0) <= bd["C2"],
        "C3": max(counts["ec"], default=0) <= bd["C3"],
        "C4": counts["max_fn"] <= bd["C4"],
        "C5": counts["max_yn"] <= bd["C5"],
        "C6": counts["max_xn"] <= bd["C6"],
        "C7": counts["residual_defect"] <= bd["C7"],
        "C8": all(s <= bd["C8_sigma"] for s in counts["sigma"].values())
        and all(g <= bd["C8_gap"] for g in counts["gap"].values()),
    }


@dataclass
class RoundLedger:
    round_index: int
    keys: list[Key]
    counts: dict
    density: float
    params: RoundParams
    defect: DefectReport | None
    conformance: dict[str, bool]
    hypotheses: dict[str, bool]
    notes: list[str] = field(default_factory=list)

    def recheck(self) -> dict[str, bool]:
        return evaluate_conformance(self.counts, self.params, self.density)

    def to_json(self) -> dict:
        return {
            "round": self.round_index,
            "forests": [list(k) for k in self.keys],
            "density": self.density,
            "counts": {k: v if not isinstance(v, dict) else {str(a): b for a, b in v.items()}
                       for k, v in self.counts.items()},
            "bounds": conformance_bounds(self.params, self.density),
            "conformance": self.conformance,
            "hypotheses": self.hypotheses,
            "defect": self.defect.to_json() if self.defect else None,
            "notes": self.notes,
        }

    def trajectory_row(self) -> dict:
        c = self.counts
        return {
            "round": self.round_index,
            "defect": c["residual_defect"],
            "sum_ec": sum(c["ec"]),
            "sum_vc": sum(c["vc"]),
            "sum_y": sum(c["y"]),
            "max_sigma": max(c["sigma"].values(), default=0.0),
        }


def write_trajectory(ledgers: Sequence[RoundLedger], path) -> None:
    cols = ["round", "defect", "sum_ec", "sum_vc", "sum_y", "max_sigma"]
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols)
        w.writeheader()
        for led in ledgers:
            w.writerow(led.trajectory_row())


# -- the round -------------------------------------------------------------------------

@dataclass
class RoundResult:
    embeddings: dict[Key, PartialEmbedding]  # assignments in host indices
    host: HostGraph
    forbidden: ForbiddenFamily
    ledger: RoundLedger


def forest_seed(master: int, round_index: int, key: Key) -> np.random.SeedSequence:
    return np.random.SeedSequence(master, spawn_key=(round_index, key[0], key[1]))


def _embed_one(host: HostGraph, key: Key, forest: LevelForest, banned: frozenset[int],
               p: RoundParams) -> tuple[PartialEmbedding, dict]:
    avail = np.array([v for v in range(host.m) if v not in banned], dtype=np.int64)
    if forest.order > avail.size:
        raise InputError(
            f"forest {key} has {forest.order} vertices but only {avail.size} host vertices are allowed"
        )
    sub = host.induced(avail)
    ss = forest_seed(p.seed, p.round_index, key)
    bad_seed, sample_seed = ss.spawn(2)
    prof = bad_profile(
        sub, p.gamma, max(forest.max_degree, 1),
        Sampled(p.bad_samples, int(bad_seed.generate_state(1)[0])),
    )
    keep = np.ones(sub.m, dtype=bool)
    keep[list(prof.bad_vertex_set)] = False
    kept = avail[keep]
    info = {"available": int(avail.size), "extracted": int(kept.size),
            "bad": len(prof.bad_vertex_set)}
    if kept.size < forest.order:
        raise RoundFailure(
            f"extraction for forest {key} left {kept.size} vertices < v(F)={forest.order}",
            {"forest": list(key), **info},
        )
    g = sub.induced(np.flatnonzero(keep))
    d = g.density
    if d <= 0:
        raise RoundFailure(f"extracted host for forest {key} has no edges", {"forest": list(key), **info})
    row = sample_batch(g.adjacency, forest, p.alpha, d, np.random.default_rng(sample_seed), 1)[0]
    mapped = tuple(int(kept[a]) if a >= 0 else int(a) for a in row)
    info["density"] = d
    return PartialEmbedding(mapped), info


def run_round(
    host: HostGraph,
    forests: dict[Key, LevelForest],
    forbidden: ForbiddenFamily,
    params: RoundParams,
    *,
    group_orders: dict[int, float] | None = None,
    check_defect: bool = True,
) -> RoundResult:
    """Embed one level of every tree against ``host`` and commit the result.

    ``group_orders`` (target level order n_i per group) only feeds the
    hypothesis flags in the ledger.
    """
    keys = sorted(forests)
    d0 = host.density
    n = params.n
    for k in keys:
        if k not in forbidden.sets:
            raise InputError(f"forest {k} has no forbidden set")

    def job(k):
        return _embed_one(host, k, forests[k], forbidden.sets[k], params)

    if params.threads > 1 and len(keys) > 1:
        with ThreadPoolExecutor(params.threads) as pool:
            results = list(pool.map(job, keys))
    else:
        results = [job(k) for k in keys]
    embs = {k: e for k, (e, _) in zip(keys, results)}
    infos = {k: i for k, (_, i) in zip(keys, results)}

    # commit: census, single removal of each used pair, forbidden growth
    census = census_collisions([embs[k] for k in keys], [forests[k] for k in keys])
    new_host = host.copy()
    new_host.remove_edges(list(census.pair_uses))
    new_sets = dict(forbidden.sets)
    for k in keys:
        new_sets[k] = forbidden.sets[k] | embs[k].image_vertices
    new_forb = ForbiddenFamily(new_sets, forbidden.n)

    sigma, gap = {}, {}
    for i, sets in new_forb.groups().items():
        st = load_stats(host.m, [sorted(s) for s in sets])
        sigma[i], gap[i] = st.sigma, st.max_size_gap
    defect = None
    if check_defect and new_host.m > 1:
        defect = quasirandom_defect(
            new_host, Sampled(params.defect_samples, params.seed + 7919 * params.round_index)
        )
    summary = census.summary()
    counts = {
        **summary,
        "pair_uses_total": int(sum(census.pair_uses.values())),
        "sigma": sigma,
        "gap": gap,
        "residual_defect": defect.max_abs_defect if defect else 0.0,
        "extracted": [infos[k]["extracted"] for k in keys],
        "bad_removed": [infos[k]["bad"] for k in keys],
    }
    ksum = len(keys)
    hyp = {
        "forest_count_in_[n/2,2n]": n / 2 <= ksum <= 2 * n,
        "roots_at_most_alpha_n_over_r": all(
            len(forests[k].roots) <= params.alpha * n / params.r for k in keys),
        "forbidden_sets_below_n": all(len(s) < n for s in forbidden.sets.values()),
    }
    if group_orders:
        hyp["forest_orders_(1±alpha)n_i"] = all(
            abs(forests[k].order - group_orders[k[0]]) <= params.alpha * group_orders[k[0]]
            for k in keys)
    notes = []
    if not hyp["forest_count_in_[n/2,2n]"]:
        notes.append(f"{ksum} forests, outside [n/2, 2n]; run continues without dummy trees")
    ledger = RoundLedger(params.round_index, keys, counts, d0, params, defect, {}, hyp, notes)
    ledger.conformance = ledger.recheck()
    return RoundResult(embs, new_host, new_forb, ledger)


def check_round_invariants(before: HostGraph, result: RoundResult, forests: dict[Key, LevelForest],
                           forbidden: ForbiddenFamily) -> list[str]:
    """Structural checks that must hold after every round."""
    problems = []
    used = set()
    for k, emb in result.embeddings.items():
        used.update(emb.image_edges(forests[k]))
        if emb.image_vertices & forbidden.sets[k]:
            problems.append(f"forest {k} uses a forbidden vertex")
        f = forests[k]
        sk = emb.skipped
        if not sk <= f.secondary:
            problems.append(f"forest {k} skipped a non-secondary vertex")
        xy = sk | f.roots
        if any(w in xy for u in xy for w in f.adjacency[u]):
            problems.append(f"forest {k}: roots and skipped vertices are not independent")
        if any(emb.assignment[x] != UNMAPPED for x in f.roots):
            problems.append(f"forest {k}: a root was embedded")
    for u, v in used:
        if result.host.has_edge(u, v):
            problems.append(f"used pair {(u, v)} still present")
            break
    if before.edge_count - result.host.edge_count != len(used):
        problems.append("edge loss differs from the number of distinct used pairs")
    return problems


def dump_ledgers(ledgers: Sequence[RoundLedger]) -> str:
    return json.dumps([led.to_json() for led in ledgers], indent=2, sort_keys=True)
