import itertools

import numpy as np
import pytest

from doicg.instance import Instance
from doicg.master import Column
from doicg.pricing import (
    Pricer,
    PricingDuals,
    best_pattern,
    knapsack_dp,
    price_all,
    price_facility,
    reduced_cost,
)


def brute_knapsack(w, p, cap):
    """Best profit, and the lexicographically smallest optimal set of positive-profit items."""
    idx = [j for j in range(len(w)) if p[j] > 0]
    best, arg = 0.0, ()
    for r in range(1, len(idx) + 1):
        for S in itertools.combinations(idx, r):
            if sum(w[j] for j in S) <= cap:
                val = sum(p[j] for j in S)
                if val > best + 1e-12 or (abs(val - best) <= 1e-12 and S < arg):
                    best, arg = val, S
    return arg, best


def test_knapsack_examples():
    assert knapsack_dp([2, 3], [3.0, 4.0], 0) == ((), 0.0)
    assert knapsack_dp([2, 3], [3.0, 4.0], 4) == ((1,), 4.0)
    assert knapsack_dp([2, 3], [3.0, 4.0], 5) == ((0, 1), 7.0)
    assert knapsack_dp([1, 1], [-1.0, 0.0], 5) == ((), 0.0)
    with pytest.raises(ValueError):
        knapsack_dp([0], [1.0], 3)


def test_knapsack_matches_enumeration():
    rng = np.random.default_rng(0)
    for case in range(1000):
        n = int(rng.integers(0, 16))
        w = rng.integers(1, 9, size=n).tolist()
        if case % 2:
            # integer profits create many ties
            p = rng.integers(-3, 6, size=n).astype(float).tolist()
        else:
            p = rng.normal(1.0, 2.0, size=n).tolist()
        cap = int(rng.integers(0, 4 * max(n, 1)))
        got, val = knapsack_dp(w, p, cap)
        ref, best = brute_knapsack(w, p, cap)
        assert val == pytest.approx(best, abs=1e-9)
        assert sum(w[j] for j in got) <= cap
        assert sum(p[j] for j in got) == pytest.approx(val, abs=1e-9)
        if case % 2:
            assert got == ref


def one_facility():
    return Instance([0.0], [3], [2, 2], [[1.0, 1.0]])


def test_price_facility_example():
    inst = one_facility()
    duals = PricingDuals(np.array([5.0, 5.0]), np.array([0.0]))
    pc = price_facility(inst, 0, duals)
    assert pc.column.customers == (0,)
    assert pc.reduced_cost == pytest.approx(-4.0)


def test_zero_duals_price_nothing():
    inst = Instance([2.0, 0.0], [5, 5], [1, 2, 3], np.ones((2, 3)))
    duals = PricingDuals(np.zeros(3), np.zeros(2))
    assert price_all(inst, duals) == []
    col, rc = best_pattern(inst, 0, duals)
    assert col is None and rc == 2.0


def test_reduced_cost_recomputed():
    rng = np.random.default_rng(3)
    inst = Instance(rng.random(4) * 3, [10] * 4, rng.integers(1, 4, size=9), rng.random((4, 9)) * 4)
    duals = PricingDuals(rng.random(9) * 3, -rng.random(4))
    for pc in price_all(inst, duals, limit=4):
        col = pc.column
        assert col.load(inst) <= inst.capacities[col.facility]
        manual = inst.fixed_costs[col.facility] + inst.costs[col.facility, list(col.customers)].sum()
        manual -= duals.alpha[list(col.customers)].sum() + duals.beta[col.facility]
        assert pc.reduced_cost == pytest.approx(manual, abs=1e-12)
        assert pc.reduced_cost < 0
        assert reduced_cost(col, duals) == pc.reduced_cost


def test_termination_completeness_by_enumeration():
    rng = np.random.default_rng(9)
    for _ in range(30):
        n, m = int(rng.integers(3, 7)), int(rng.integers(1, 4))
        inst = Instance(rng.random(m) * 3, rng.integers(3, 9, size=m), rng.integers(1, 4, size=n), rng.random((m, n)) * 4)
        duals = PricingDuals(rng.random(n) * 2, -rng.random(m) * 0.5)
        found = price_all(inst, duals, limit=m)
        brute = []
        for i in range(m):
            for r in range(1, n + 1):
                for S in itertools.combinations(range(n), r):
                    if inst.demands[list(S)].sum() <= inst.capacities[i]:
                        brute.append(reduced_cost(Column.make(inst, i, S), duals))
        if not found:
            assert min(brute) >= -1e-7
        else:
            assert min(pc.reduced_cost for pc in found) == pytest.approx(min(brute), abs=1e-9)


def improving(m):
    inst = Instance(np.zeros(m), [5] * m, [1, 1], np.zeros((m, 2)))
    return inst, PricingDuals(np.ones(2), np.zeros(m))


def test_limit_and_rotation():
    inst, duals = improving(30)
    pricer = Pricer(inst, limit=20)
    first = pricer.price_all(duals)
    assert [pc.column.facility for pc in first] == list(range(20))
    second = pricer.price_all(duals)
    assert [pc.column.facility for pc in second] == list(range(20, 30)) + list(range(10))
    one = Pricer(inst, limit=1).price_all(duals)
    assert len(one) == 1 and one[0].column.facility == 0
    with pytest.raises(ValueError):
        Pricer(inst, limit=0)


def test_termination_visits_every_facility():
    inst = Instance(np.ones(4), [5] * 4, [1, 1], np.ones((4, 2)))
    pricer = Pricer(inst)
    pricer.cursor = 2
    assert pricer.price_all(PricingDuals(np.zeros(2), np.zeros(4))) == []
    assert sorted(pricer.last_visited) == [0, 1, 2, 3]
    assert pricer.last_visited[0] == 2
    assert np.all(pricer.last_min_reduced_costs == 1.0)
