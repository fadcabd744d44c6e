import itertools
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from doicg.doi import (
    DoiConfig,
    RebateLadder,
    SwapPair,
    SwapSet,
    Variant,
    build_ladder,
    compute_rebate,
    compute_swap_penalties,
    format_ladders,
    format_swap_set,
    ladders_from_columns,
    penalty_matrix,
    round_rebate,
    select_swap_subset,
    update_due,
    zero_ladder,
)
from doicg.instance import Instance
from doicg.master import Column


def toy(costs, demands=None, caps=None):
    costs = np.asarray(costs, float)
    m, n = costs.shape
    demands = [1] * n if demands is None else demands
    caps = [sum(demands)] * m if caps is None else caps
    return Instance([1.0] * m, caps, demands, costs)


def small_instances(seed, count):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        n, m = int(rng.integers(3, 7)), int(rng.integers(1, 4))
        d = rng.integers(1, 5, size=n)
        yield Instance(
            rng.integers(0, 6, size=m).astype(float),
            np.full(m, int(d.sum())),
            d,
            np.round(rng.random((m, n)) * 10, 2),
        )


def test_rho_example():
    inst = toy([[1, 4], [2, 3]])
    pairs = {(p.source, p.target): p.penalty for p in compute_swap_penalties(inst)}
    assert pairs[(0, 1)] == 3.0
    assert pairs[(1, 0)] == max(1 - 4, 2 - 3)


def test_rho_identical_columns_and_single_customer():
    inst = toy([[2, 2], [5, 5]])
    assert all(p.penalty == 0 for p in compute_swap_penalties(inst))
    assert compute_swap_penalties(toy([[1.0]])) == []


def test_pairs_respect_demand_order():
    inst = toy([[1, 2, 3]], demands=[3, 1, 3])
    pairs = {(p.source, p.target) for p in compute_swap_penalties(inst)}
    assert pairs == {(0, 1), (0, 2), (2, 0), (2, 1)}


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000))
def test_triangle_inequality(seed):
    rng = np.random.default_rng(seed)
    m, n = int(rng.integers(1, 5)), int(rng.integers(3, 8))
    P = penalty_matrix(toy(rng.random((m, n)) * 10))
    for u, v, w in itertools.permutations(range(n), 3):
        assert P[u, w] <= P[u, v] + P[v, w] + 1e-12


def test_subset_selection():
    pairs = [SwapPair(0, 1, 5.0), SwapPair(0, 2, 1.0), SwapPair(1, 0, 3.0), SwapPair(2, 0, 2.0)]
    half = select_swap_subset(pairs, 0.5)
    assert sorted(p.penalty for p in half.pairs) == [1.0, 2.0]
    assert len(select_swap_subset(pairs, 1.0)) == 4
    for _ in range(10):
        shuffled = pairs[:]
        random.Random(_).shuffle(shuffled)
        assert select_swap_subset(shuffled, 0.5).pairs == half.pairs
    assert len(select_swap_subset(pairs, 0.25)) == 1
    with pytest.raises(ValueError):
        select_swap_subset(pairs, 0.0)


def test_subset_ties_by_index():
    pairs = [SwapPair(2, 1, 1.0), SwapPair(0, 1, 1.0), SwapPair(1, 2, 1.0)]
    kept = select_swap_subset(pairs, 0.5).pairs
    assert [(p.source, p.target) for p in kept] == [(0, 1), (1, 2)]


def test_swap_set_indexes():
    s = SwapSet.from_pairs([SwapPair(0, 1, 1.0), SwapPair(2, 1, 0.5), SwapPair(0, 2, 0.1)])
    assert [s.pairs[k].source for k in s.incoming[1]] == [0, 2]
    assert all(s.pairs[k].source == 0 for k in s.outgoing[0])
    with pytest.raises(ValueError):
        SwapSet.from_pairs([SwapPair(0, 0, 1.0)])
    with pytest.raises(ValueError):
        SwapSet.from_pairs([SwapPair(0, 1, 1.0), SwapPair(0, 1, 2.0)])


def test_swap_cost_bound_by_enumeration():
    for inst in small_instances(1, 20):
        P = penalty_matrix(inst)
        n = inst.n_customers
        for i in range(inst.n_facilities):
            for r in range(1, n + 1):
                for S in itertools.combinations(range(n), r):
                    col = Column.make(inst, i, S)
                    for u in S:
                        for v in set(range(n)) - set(S):
                            if inst.demands[v] <= inst.demands[u]:
                                assert col.swapped(inst, u, v).cost - col.cost <= P[u, v] + 1e-12


def test_rebate_validity_by_enumeration():
    for inst in small_instances(2, 20):
        n = inst.n_customers
        observed = [inst.costs[i, u] for i in range(inst.n_facilities) for u in range(n)]
        ladders = {u: build_ladder(observed, 3, u) for u in range(n)}
        for i in range(inst.n_facilities):
            for S in itertools.combinations(range(n), 3):
                col = Column.make(inst, i, S)
                for r in range(1, 4):
                    for drop in itertools.combinations(S, r):
                        rest = col.removed(inst, drop)
                        saving = col.cost - (rest.cost if rest else inst.fixed_costs[i])
                        exact = sum(compute_rebate(inst, col, u) for u in drop)
                        rounded = sum(round_rebate(ladders[u], compute_rebate(inst, col, u)) for u in drop)
                        assert rounded <= exact + 1e-12
                        assert exact == pytest.approx(saving, abs=1e-9)


def test_compute_rebate():
    inst = toy([[2.5, 1.0]])
    col = Column.make(inst, 0, [0])
    assert compute_rebate(inst, col, 0) == 2.5
    with pytest.raises(ValueError):
        compute_rebate(inst, col, 1)


def lower_quantile(xs, q):
    xs = sorted(xs)
    k = int(np.ceil(q * len(xs) - 1e-12))
    return xs[max(k, 1) - 1]


def test_ladder_examples():
    lad = build_ladder(range(1, 101), 20)
    assert lad.values[0] == 0 and lad.values[-1] == 100 and len(lad) <= 22
    assert build_ladder([7.0]).values == (0.0, 7.0)
    assert build_ladder([0.0, 0.0]).values == (0.0,)


def test_ladder_matches_reference_quantiles():
    rng = np.random.default_rng(4)
    xs = rng.random(1000).tolist()
    lad = build_ladder(xs, 20)
    expected = sorted({0.0, max(xs)} | {lower_quantile(xs, k / 20) for k in range(1, 21)})
    assert list(lad.values) == expected


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0, 100), min_size=1, max_size=60), st.integers(1, 25))
def test_ladder_invariants(obs, M):
    lad = build_ladder(obs, M)
    assert lad.values[0] == 0.0
    assert max(obs) in lad.values
    assert len(lad) <= M + 2
    assert list(lad.values) == sorted(set(lad.values))


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0, 50), min_size=1, max_size=30), st.floats(0, 60), st.floats(0, 60))
def test_round_rebate_properties(obs, a, b):
    lad = build_ladder(obs, 5)
    lo, hi = sorted((a, b))
    assert round_rebate(lad, lo) <= round_rebate(lad, hi)
    r = round_rebate(lad, hi)
    assert r <= hi and r in lad.values
    assert round_rebate(lad, r) == r


def test_round_rebate_examples():
    lad = RebateLadder(0, (0.0, 5.0, 10.0))
    assert round_rebate(lad, 7.3) == 5.0
    assert round_rebate(lad, 10.0) == 10.0
    assert round_rebate(lad, 4.99) == 0.0
    with pytest.raises(ValueError):
        round_rebate(lad, -1.0)
    with pytest.raises(ValueError):
        RebateLadder(0, (1.0, 2.0))


def test_ladders_from_pool():
    inst = toy([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]])
    cols = [Column.make(inst, 0, [0, 1]), Column.make(inst, 1, [0])]
    lads = ladders_from_columns(inst, cols, 20)
    assert lads[0].values == (0.0, 1.0, 4.0)
    assert lads[1].values == (0.0, 2.0)
    assert lads[2] == zero_ladder(2)


def test_update_schedule():
    assert update_due(25) and not update_due(26)
    assert update_due(1500) and update_due(1000) and not update_due(750)
    due = [k for k in range(1, 2001) if update_due(k)]
    assert due == [1, 5, 25, 100, 200, 500, 1000, 1500, 2000]
    with pytest.raises(ValueError):
        update_due(0)


def test_config_checks():
    assert DoiConfig("sf").variant is Variant.SF
    assert Variant.SF.uses_swaps and Variant.SF.uses_rebates
    assert not Variant.NONE.uses_swaps and Variant.F.label == "F-DOI"
    with pytest.raises(ValueError):
        DoiConfig(swap_fraction=1.5)
    with pytest.raises(ValueError):
        DoiConfig(n_quantiles=0)


def test_dumps():
    s = select_swap_subset(compute_swap_penalties(toy([[1, 4], [2, 3]])), 1.0)
    assert format_swap_set(s).splitlines()[1] == "0\t1\t3.0"
    assert format_ladders({0: zero_ladder(0)}) == "customer\tlevels\n0\t0.0\n"
