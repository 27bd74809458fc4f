import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from treepack.errors import InputError, RoundFailure
from treepack.graph import HostGraph
from treepack.nibble import (
    ForbiddenFamily,
    RoundParams,
    check_round_invariants,
    classify_typical,
    conformance_bounds,
    evaluate_conformance,
    forest_seed,
    important_groups,
    load_stats,
    load_stats_bruteforce,
    run_round,
    write_trajectory,
)
from treepack.trees import LevelForest, RootedTree, balanced_level_partition, level_forests

EDGE = LevelForest.from_edges(2, [(0, 1)], primary=[0])


# -- load statistics -----------------------------------------------------------------

def test_load_stats_worked_example():
    st_ = load_stats(3, [[0]])
    # loads (0,1)=1, (0,2)=1, (1,2)=0
    assert st_.mu == pytest.approx(2 / 3)
    assert st_.sigma == pytest.approx((1 / 3) ** 2 * 2 + (2 / 3) ** 2)
    assert st_.sigma == pytest.approx(2 / 3)
    assert st_.max_size_gap == 0


def test_load_stats_trivial_cases():
    assert load_stats(5, []) == load_stats_bruteforce(5, [])
    assert (load_stats(5, []).mu, load_stats(5, []).sigma) == (0.0, 0.0)
    full = load_stats(6, [range(6)] * 4)
    assert full.mu == 4 and full.sigma == 0


def test_load_stats_rejects_out_of_range():
    with pytest.raises(InputError):
        load_stats(4, [[0, 4]])


@given(st.integers(0, 2**31))
def test_load_stats_matches_bruteforce(seed):
    rng = np.random.default_rng(seed)
    m = int(rng.integers(2, 30))
    fam = [rng.choice(m, size=int(rng.integers(0, m + 1)), replace=False).tolist()
           for _ in range(int(rng.integers(0, 8)))]
    fast, slow = load_stats(m, fam), load_stats_bruteforce(m, fam)
    assert fast.mu == slow.mu
    assert fast.sigma == pytest.approx(slow.sigma, rel=1e-12, abs=1e-12)
    assert fast.max_size_gap == slow.max_size_gap


# -- typicality --------------------------------------------------------------------

def test_empty_family_all_typical():
    t = classify_typical([], 0.01, 10, 10)
    assert t.atypical == 0 and t.mask.all()


def test_worked_example_typical():
    t = classify_typical([[0]], 1.0, 3, 3)
    assert t.atypical == 0


@given(st.integers(0, 2**31))
def test_small_sigma_bounds_atypical_pairs(seed):
    rng = np.random.default_rng(seed)
    m = n = int(rng.integers(4, 25))
    fam = [rng.choice(m, size=int(rng.integers(0, m)), replace=False).tolist()
           for _ in range(int(rng.integers(1, 6)))]
    sigma = load_stats(m, fam).sigma
    alpha = max(sigma / n**4, 1e-9) * float(rng.uniform(1, 4))
    t = classify_typical(fam, alpha, m, n)
    assert sigma <= alpha * n**4
    assert t.atypical <= t.markov_bound + 1e-9


def test_important_groups_threshold():
    # threshold sqrt(0.01) * 20 * 2 / 2 = 2, strict
    assert important_groups({1: 2, 2: 3, 3: 10}, 0.01, 20, 2) == [2, 3]


# -- conformance ------------------------------------------------------------------

def test_conformance_is_pure():
    p = RoundParams(n=100, r=4, epsilon=0.5, beta=0.1, delta=2)
    counts = {"y": [0, 1], "vc": [2], "ec": [0], "max_fn": 0, "max_yn": 0, "max_xn": 1,
              "residual_defect": 0.2, "sigma": {1: 0.0}, "gap": {1: 3}}
    res = evaluate_conformance(counts, p, 1.0)
    assert res == evaluate_conformance(dict(counts), p, 1.0)
    assert res["C1"] and not res["C7"]
    assert conformance_bounds(p, 1.0)["C2"] == pytest.approx(20 * 100 / (0.5 * 16))


def test_c8_arithmetic_fixture():
    # groups of two sets after the round: {0,2} and {1,3} inside m = 6, n = 4
    st_ = load_stats(6, [[0, 2], [1, 3]])
    loads = []
    for v in range(6):
        for w in range(v + 1, 6):
            loads.append(sum(1 for s in ({0, 2}, {1, 3}) if v in s or w in s))
    mu = sum(loads) / 15
    assert st_.mu == pytest.approx(mu)
    assert st_.sigma == pytest.approx(sum((x - mu) ** 2 for x in loads))
    beta = 0.05
    assert (st_.sigma <= beta * 4**4) == (sum((x - mu) ** 2 for x in loads) <= 12.8)


# -- rounds ------------------------------------------------------------------------

def test_single_edge_round():
    forb = ForbiddenFamily.empty([(1, 0)], 100)
    res = run_round(HostGraph.complete(100), {(1, 0): EDGE}, forb,
                    RoundParams(n=100, r=1, seed=3, defect_samples=200))
    emb = res.embeddings[(1, 0)]
    assert emb.skipped == frozenset()
    assert res.forbidden.sets[(1, 0)] == emb.image_vertices and len(emb.image_vertices) == 2
    for c in ("C1", "C2", "C3", "C4", "C5", "C6"):
        assert res.ledger.conformance[c]
    assert res.host.edge_count == math.comb(100, 2) - 1


def test_double_use_is_removed_once():
    keys = [(1, 0), (2, 0)]
    forb = ForbiddenFamily.empty(keys, 4)
    # in K_4 a lone edge is kept only when the codegree 3 sits in the band 4(1 +- alpha)
    params = dict(alpha=0.3, gamma=0.5, n=4, r=1, bad_samples=64, defect_samples=64)
    for seed in range(200):
        res = run_round(HostGraph.complete(4), {k: EDGE for k in keys}, forb,
                        RoundParams(seed=seed, **params))
        pairs = [tuple(sorted(res.embeddings[k].assignment)) for k in keys]
        if pairs[0] == pairs[1]:
            break
    else:
        pytest.fail("no seed put both edges on one host pair")
    c = res.ledger.counts
    assert sum(c["ec"]) == 4
    assert c["multiply_used_pairs"] == 1 and c["pair_uses_total"] == 2
    assert res.host.edge_count == 5
    assert check_round_invariants(HostGraph.complete(4), res, {k: EDGE for k in keys}, forb) == []


def test_forbidden_vertices_are_avoided():
    keys = [(1, s) for s in range(3)]
    forb = ForbiddenFamily({k: frozenset(range(10 * s, 10 * s + 30)) for s, k in enumerate(keys)}, 60)
    t = RootedTree.path(40)
    part = balanced_level_partition(t, 2, 1.0, strict=False)
    f = level_forests(t, part)[1]
    host = HostGraph.complete(90)
    res = run_round(host, {k: f for k in keys}, forb, RoundParams(n=60, r=2, seed=1, gamma=0.2,
                                                               alpha=0.2, defect_samples=100))
    assert check_round_invariants(host, res, {k: f for k in keys}, forb) == []
    for k in keys:
        assert not res.embeddings[k].image_vertices & forb.sets[k]


def test_extraction_starvation_is_a_round_failure():
    forb = ForbiddenFamily({(1, 0): frozenset(range(8))}, 10)
    big = LevelForest.from_edges(5, [(0, 1), (1, 2), (2, 3), (3, 4)], roots=[0])
    with pytest.raises(InputError):
        run_round(HostGraph.complete(10), {(1, 0): big}, forb, RoundParams(n=10, r=1))
    sparse = HostGraph.complete(12)
    sparse.remove_edges([(0, v) for v in range(1, 12)])  # vertex 0 isolated
    forb = ForbiddenFamily({(1, 0): frozenset(range(1, 7))}, 10)
    f = LevelForest.from_edges(6, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5)], roots=[0])
    with pytest.raises(RoundFailure):
        run_round(sparse, {(1, 0): f}, forb, RoundParams(n=10, r=1, gamma=0.1))


def test_round_is_deterministic_and_thread_independent():
    keys = [(1, s) for s in range(6)]
    t = RootedTree.path(30)
    f = level_forests(t, balanced_level_partition(t, 2, 1.0, strict=False))[0]
    forb = ForbiddenFamily.empty(keys, 40)
    p1 = RoundParams(n=40, r=2, seed=21, gamma=0.2, alpha=0.2, defect_samples=100)
    p4 = RoundParams(n=40, r=2, seed=21, gamma=0.2, alpha=0.2, defect_samples=100, threads=4)
    a = run_round(HostGraph.complete(60), {k: f for k in keys}, forb, p1)
    b = run_round(HostGraph.complete(60), {k: f for k in keys}, forb, p4)
    assert a.embeddings == b.embeddings and a.host == b.host


def test_forest_seed_streams_are_distinct():
    s = {tuple(forest_seed(5, j, (i, k)).generate_state(2)) for j in range(3) for i in range(3)
         for k in range(3)}
    assert len(s) == 27


def test_trajectory_csv(tmp_path):
    forb = ForbiddenFamily.empty([(1, 0)], 20)
    res = run_round(HostGraph.complete(20), {(1, 0): EDGE}, forb,
                    RoundParams(n=20, r=1, seed=0, defect_samples=50))
    write_trajectory([res.ledger], tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "round,defect,sum_ec,sum_vc,sum_y,max_sigma" and len(lines) == 2
