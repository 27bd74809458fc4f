"""End-to-end construction: normalise, group, cut, nibble, correct, certify."""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .correction import build_almost_packing, correct
from .errors import (
    CorrectionFailure,
    DoubleUseError,
    EmbeddingFailure,
    InputError,
    RoundFailure,
    TreepackError,
)
from .graph import HostGraph, Sampled, quasirandom_defect
from .nibble import ForbiddenFamily, RoundParams, check_round_invariants, run_round
from .trees import (
    RootedTree,
    TreeFamily,
    balanced_level_partition,
    default_group_count,
    group_and_pad,
    level_forests,
    merge_small_trees,
)
from .validate import validate_packing


@dataclass
class PipelineConfig:
    n: int
    epsilon: float
    delta: int
    r: int = 8
    c: int | None = None  # default ceil(50/eps) capped at c_cap
    c_cap: int = 8
    gamma: float = 0.2  # extraction tolerance
    alpha: float = 0.2  # sampler skip tolerance
    beta: float = 0.05
    rho: float = 2.5  # practical cutting parameter; see balanced_level_partition
    seed: int = 0
    retries: int = 3
    core_epsilon: float | None = None  # core order floor((1+core_epsilon) n), default eps/4
    correction_order: str = "R_desc"
    bad_samples: int = 512
    defect_samples: int = 2000
    threads: int = 1
    paper_faithful: bool = False
    check_invariants: bool = True

    def validate(self) -> None:
        if not self.epsilon > 0:
            raise InputError("epsilon must be positive")
        if self.delta < 1:
            raise InputError("delta must be >= 1")
        if self.r < 1:
            raise InputError("r must be >= 1")
        if self.n < 1:
            raise InputError("n must be >= 1")
        if not 0 < self.alpha < 1 or not 0 < self.gamma:
            raise InputError("alpha must lie in (0, 1) and gamma must be positive")
        if not self.rho > 0:
            raise InputError("rho must be positive")
        if self.retries < 0:
            raise InputError("retries must be >= 0")
        if self.core_epsilon is not None and not 0 <= self.core_epsilon <= self.epsilon:
            raise InputError("core_epsilon must lie in [0, epsilon]")

    @property
    def host_order(self) -> int:
        return int(math.floor((1 + self.epsilon) * self.n + 1e-9))

    @property
    def core_order(self) -> int:
        ce = self.epsilon / 4 if self.core_epsilon is None else self.core_epsilon
        return max(self.n, min(self.host_order, int(math.floor((1 + ce) * self.n + 1e-9))))

    @property
    def groups(self) -> int:
        return self.c if self.c is not None else default_group_count(self.epsilon, self.c_cap)


# -- paper-faithful constants ---------------------------------------------------------

def paper_constants(epsilon: float, delta: int) -> dict:
    """Constants of the almost-packing construction, in log10 where they overflow.

    The nibble lemma's alpha is existential, so only the upper bound
    alpha_1 <= beta_r = eps'^2/100 is known; that already forces the
    reported lower bound on n_0 = max{8 delta r / (rho alpha_1), ...}.
    Here eps' = eps^2 / (256 delta^2) is the parameter handed to the
    almost-packing step.
    """
    e = epsilon**2 / (256 * delta**2)
    log_r = math.log10(1000 * delta**2) - 10 * delta * math.log10(e)
    beta_r = e * e / 100
    log_inv_alpha = -math.log10(beta_r)  # 1/alpha_1 >= 100/eps'^2
    log_inv_rho = max(math.log10(4) + log_r, log_inv_alpha)
    log_n0 = math.log10(8 * delta) + log_r + log_inv_rho + log_inv_alpha
    return {
        "epsilon_almost_packing": e,
        "c": 50 / e,
        "log10_r": log_r,
        "beta_r": beta_r,
        "log10_n0_lower_bound": log_n0,
    }


# -- capacity pre-flight --------------------------------------------------------------

def capacity_check(fam: TreeFamily, host_order: int) -> dict:
    """Edge counting that rules out a packing before any sampling.

    Two vertices of degree > (M-1)/2 can never share a host vertex, so the
    edges at such "big" vertices must fit into the pairs touching B host
    vertices, C(M,2) - C(M-B,2).
    """
    M = host_order
    half = (M - 1) / 2
    big = 0
    big_edges = 0
    for t in fam.trees:
        deg = t.degrees()
        bigs = {v for v in range(t.order) if deg[v] > half}
        big += len(bigs)
        big_edges += sum(1 for p, v in t.edges if p in bigs or v in bigs)
    total = fam.total_edges
    cap_total = math.comb(M, 2)
    cap_big = cap_total - math.comb(M - big, 2) if big <= M else -1
    ok = total <= cap_total and big <= M and big_edges <= cap_big
    return {
        "host_order": M,
        "family_edges": total,
        "host_edges": cap_total,
        "big_vertices": big,
        "big_vertex_edges": big_edges,
        "big_vertex_capacity": cap_big,
        "deficit": max(total - cap_total, big_edges - cap_big if big <= M else big_edges),
        "feasible": ok,
    }


# -- the exceptional tree -------------------------------------------------------------

def embed_exceptional(host: HostGraph, t0: RootedTree) -> tuple[list[int], HostGraph]:
    """BFS greedy: each vertex goes to the lowest free host vertex joined to its parent's image."""
    if t0.order > host.m:
        raise EmbeddingFailure(f"tree of order {t0.order} does not fit into {host.m} vertices")
    adj = host.adjacency
    deg = adj.sum(axis=1)
    ch = t0.children()
    h = [-1] * t0.order
    free = np.ones(host.m, dtype=bool)
    root_ok = np.flatnonzero(deg >= len(ch[t0.root]))
    if root_ok.size == 0:
        raise EmbeddingFailure("no host vertex has enough neighbours for the root")
    h[t0.root] = int(root_ok[0])
    free[h[t0.root]] = False
    used = []
    for x in t0.bfs_order()[1:]:
        hp = h[t0.parent[x]]
        cand = np.flatnonzero(free & adj[hp])
        if cand.size == 0:
            raise EmbeddingFailure(f"no free neighbour of host vertex {hp} for tree vertex {x}")
        w = int(cand[0])
        h[x] = w
        free[w] = False
        used.append((hp, w))
    out = host.copy()
    out.remove_edges(used)
    return h, out


# -- results -------------------------------------------------------------------------

@dataclass
class PackingResult:
    maps: list[list[int]]  # per input tree
    host_order: int
    certificate: dict
    metrics: dict
    wall_clock: float = 0.0

    @property
    def success(self) -> bool:
        return self.certificate.get("verdict") == "valid"

    def to_json(self) -> dict:
        return {
            "trees": [{"id": i, "map": mp} for i, mp in enumerate(self.maps)],
            "host_order": self.host_order,
            "certificate": self.certificate,
            "metrics": self.metrics,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))


@dataclass
class FailureReport:
    stage: str
    message: str
    retryable: bool
    attempts: list[dict] = field(default_factory=list)
    details: dict = field(default_factory=dict)
    wall_clock: float = 0.0

    @property
    def success(self) -> bool:
        return False

    def to_json(self) -> dict:
        return {
            "status": "failure",
            "stage": self.stage,
            "message": self.message,
            "retryable": self.retryable,
            "attempts": self.attempts,
            "details": self.details,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))


def attempt_seed(seed: int, attempt: int) -> int:
    if attempt == 0:
        return seed
    return int(np.random.SeedSequence([seed, attempt]).generate_state(1, np.uint64)[0] >> 1)


# -- driver ----------------------------------------------------------------------------

@dataclass
class _Prepared:
    fam: TreeFamily  # normalised
    trees: list[RootedTree]  # working list: exceptional tree first (if any), then padded trees
    keys: list[tuple[int, int] | None]  # (group, position) of each working tree
    original_order: list[int]  # order before padding, per working tree
    source: list[int]  # index in the normalised family
    partitions: dict[int, object]
    group_orders: dict[int, float]
    grouped: object


def _prepare(fam: TreeFamily, cfg: PipelineConfig) -> _Prepared:
    norm = merge_small_trees(fam)
    grouped = group_and_pad(norm, cfg.epsilon, cfg.groups)
    trees, keys, orig, src = [], [], [], []
    if grouped.exceptional_tree is not None:
        trees.append(grouped.exceptional_tree)
        keys.append(None)
        orig.append(grouped.exceptional_tree.order)
        src.append(grouped.exceptional_index)
    for i, s, pt in grouped.members():
        trees.append(pt.tree)
        keys.append((i, s))
        orig.append(pt.original_order)
        src.append(pt.source)
    parts = {}
    for w, (t, k) in enumerate(zip(trees, keys)):
        if k is not None:
            parts[w] = balanced_level_partition(t, cfg.r, cfg.rho, delta=cfg.delta, strict=False)
    group_orders = {i: grouped.endpoints[i] / cfg.r for i in grouped.groups}
    return _Prepared(norm, trees, keys, orig, src, parts, group_orders, grouped)


def _attempt(prep: _Prepared, cfg: PipelineConfig, seed: int) -> tuple[list[list[int]], dict]:
    m, M = cfg.core_order, cfg.host_order
    host = HostGraph.complete(m)
    fixed = {}
    metrics: dict = {"rounds": []}
    if prep.keys and prep.keys[0] is None:
        h0, host = embed_exceptional(host, prep.trees[0])
        fixed[0] = h0
        if host.m > 1:
            d = quasirandom_defect(host, Sampled(cfg.defect_samples, seed))
            metrics["after_exceptional_defect"] = d.max_abs_defect
    nibble_trees = [w for w, k in enumerate(prep.keys) if k is not None]
    key_of = {w: prep.keys[w] for w in nibble_trees}
    tree_of = {k: w for w, k in key_of.items()}
    forests_by_tree = {w: level_forests(prep.trees[w], prep.partitions[w]) for w in nibble_trees}
    forbidden = ForbiddenFamily.empty(sorted(tree_of), cfg.n)
    rounds = []
    for j in range(cfg.r):
        forests = {key_of[w]: forests_by_tree[w][j] for w in nibble_trees
                   if forests_by_tree[w][j].order > 0}
        if not forests:
            continue
        params = RoundParams(
            alpha=cfg.alpha, beta=cfg.beta, epsilon=cfg.epsilon, r=cfg.r, gamma=cfg.gamma,
            delta=cfg.delta, n=cfg.n, seed=seed, round_index=j, bad_samples=cfg.bad_samples,
            defect_samples=cfg.defect_samples, threads=cfg.threads,
        )
        res = run_round(host, forests, forbidden, params, group_orders=prep.group_orders)
        if cfg.check_invariants:
            problems = check_round_invariants(host, res, forests, forbidden)
            if problems:
                raise TreepackError(f"round {j} broke an invariant: {problems[0]}")
        rounds.append({tree_of[k]: (forests[k], res.embeddings[k]) for k in forests})
        metrics["rounds"].append(res.ledger.to_json())
        host, forbidden = res.host, res.forbidden
    ap, ap_cert = build_almost_packing(prep.trees, m, rounds, fixed)
    if not ap_cert.valid:
        raise TreepackError(f"almost packing failed certification: {ap_cert.witness}")
    metrics["almost_packing"] = ap_cert.to_json()
    metrics["exception_sizes"] = [len(r) for r in ap.R]
    metrics["exception_causes"] = ap.causes
    cres = correct(ap, prep.trees, host_order=M, order=cfg.correction_order)
    if not cres.certificate.valid:
        raise TreepackError(f"corrected packing failed certification: {cres.certificate.witness}")
    metrics["correction"] = cres.report()
    # project: padded vertices are a suffix; merged trees carry their source maps
    maps: list[list[int] | None] = [None] * len(prep.fam.trees)
    for w, mp in enumerate(cres.maps):
        maps[prep.source[w]] = mp[: prep.original_order[w]]
    out: list[list[int]] = []
    n_inputs = sum(len(o) for o in prep.fam.origins)
    per_input: list[list[int] | None] = [None] * n_inputs
    for j, origin in enumerate(prep.fam.origins):
        for src, vm in origin:
            per_input[src] = [int(maps[j][x]) for x in vm]
    out = [mp for mp in per_input]
    return out, metrics


def pack_family(fam: TreeFamily, cfg: PipelineConfig) -> PackingResult | FailureReport:
    """Run the full construction, retrying round/correction failures with derived seeds."""
    cfg.validate()
    start = time.perf_counter()
    if fam.n != cfg.n:
        raise InputError(f"family n={fam.n} differs from configured n={cfg.n}")
    if fam.delta > cfg.delta:
        raise InputError(f"family delta={fam.delta} exceeds configured delta={cfg.delta}")
    fam.check_hypotheses()
    if cfg.paper_faithful:
        const = paper_constants(cfg.epsilon, cfg.delta)
        if math.log10(max(cfg.n, 1)) < const["log10_n0_lower_bound"]:
            raise InputError(
                f"paper-faithful constants need n >= n_0 >= 10^{const['log10_n0_lower_bound']:.1f}"
                f" (r = 10^{const['log10_r']:.1f}); n={cfg.n}"
            )
    M = cfg.host_order
    if not fam.trees:
        cert = validate_packing([], [], M).to_json()
        return PackingResult([], M, cert, {"note": "empty family"}, time.perf_counter() - start)
    cap = capacity_check(fam, M)
    if not cap["feasible"]:
        return FailureReport("capacity", "family cannot fit into the host by edge counting",
                             False, details=cap, wall_clock=time.perf_counter() - start)
    prep = _prepare(fam, cfg)
    base = {
        "host_order": M,
        "core_order": cfg.core_order,
        "groups": cfg.groups,
        "group_sizes": {str(i): k for i, k in prep.grouped.group_sizes.items()},
        "padding_edges": prep.grouped.added_path_edges,
        "padding_within_budget": prep.grouped.within_padding_budget,
        "level_roots": [
            [len(x) for x in prep.partitions[w].level_roots] for w in sorted(prep.partitions)
        ],
        "capacity": cap,
    }
    attempts = []
    for a in range(cfg.retries + 1):
        s = attempt_seed(cfg.seed, a)
        try:
            maps, metrics = _attempt(prep, cfg, s)
        except (RoundFailure, CorrectionFailure, EmbeddingFailure, DoubleUseError) as exc:
            rep = getattr(exc, "report", {})
            attempts.append({"attempt": a, "seed": s, "stage": type(exc).__name__,
                             "message": str(exc), "report": rep})
            continue
        cert = validate_packing(maps, fam.trees, M)
        metrics = {**base, **metrics, "attempts": attempts, "seed_used": s}
        if not cert.valid:  # never expected: the builders certify as they go
            raise TreepackError(f"final packing failed certification: {cert.witness}")
        return PackingResult(maps, M, cert.to_json(), metrics, time.perf_counter() - start)
    last = attempts[-1]
    return FailureReport(last["stage"], last["message"], True, attempts, base,
                         time.perf_counter() - start)
