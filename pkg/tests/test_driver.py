import csv
import io

import numpy as np
import pytest

from doicg.doi import DoiConfig, RebateLadder, SwapPair, SwapSet, Variant
from doicg.driver import (
    TRACE_HEADER,
    CoverSolution,
    RepairError,
    RunParams,
    extract_gap_trace,
    gap,
    lagrangian_lower_bound,
    repair,
    run,
    trace_csv,
)
from doicg.instance import Instance
from doicg.master import Column, RmpModel, RmpSolution
from helpers import enumeration_optimum, tiny_instance as tiny


def test_single_column_instance():
    inst = Instance([5.0], [3], [2], [[1.25]])
    for v in Variant:
        res = run(inst, DoiConfig(v))
        assert res.converged
        assert res.z == pytest.approx(6.25)
        assert res.iterations <= 2


@pytest.mark.parametrize("seed", range(12))
def test_oracle_all_variants(seed):
    inst = tiny(seed)
    z = enumeration_optimum(inst)
    if z is None:
        pytest.skip("no feasible fractional assignment")
    for v in Variant:
        res = run(inst, DoiConfig(v))
        assert res.converged
        assert res.z == pytest.approx(z, rel=1e-6)
        cert = res.certificate
        assert cert["zero_doi_objective"] == pytest.approx(res.z, rel=1e-6)
        assert cert["dual_sum"] == pytest.approx(res.z, rel=1e-6)
        assert cert["min_reduced_cost"] >= -1e-7


def test_lower_bound():
    assert lagrangian_lower_bound(100.0, [-3.0, 2.0, -1.0]) == 96.0
    assert lagrangian_lower_bound(7.5, [0.0, 1.0]) == 7.5


def test_gap():
    assert gap(5.0, 5.0) == 0.0
    assert gap(110.0, 100.0) == pytest.approx(0.0909090909)
    assert gap(0.0, 0.0) == 0.0


def test_trace_monotonicity_and_closure():
    inst = tiny(30)
    for v in Variant:
        res = run(inst, DoiConfig(v))
        best = [row.best_lb for row in res.trace]
        assert all(b >= a for a, b in zip(best, best[1:]))
        for a, b in zip(res.trace, res.trace[1:]):
            if not b.ladder_rebuilt:
                assert b.ub <= a.ub + 1e-9
        series = extract_gap_trace(res)
        assert series[-1][2] <= 1e-6
        assert [s[1] for s in series] == list(range(1, res.iterations + 1))


def test_trace_csv_format():
    res = run(tiny(3), DoiConfig("sf"))
    text = trace_csv(res)
    rows = list(csv.reader(io.StringIO(text)))
    assert tuple(rows[0]) == TRACE_HEADER
    assert len(rows) == res.iterations + 1
    assert "\r" not in text
    first = rows[1]
    assert first[1].count(".") == 1 and len(first[1].split(".")[1]) == 3
    assert float(first[2]) == res.trace[0].ub


def test_iteration_cap():
    res = run(tiny(4), DoiConfig("none"), RunParams(max_iterations=1))
    assert not res.converged
    assert res.iterations == 1 and len(res.trace) == 1
    assert res.status == "iteration limit"
    assert res.certificate == {}


def test_deterministic_runs():
    inst = tiny(8)
    a, b = run(inst, DoiConfig("sf")), run(inst, DoiConfig("sf"))
    assert (a.z, a.iterations, a.pool_size) == (b.z, b.iterations, b.pool_size)


def solution_for(model, theta, omega=None, xi=None):
    n, m = model.instance.n_customers, model.instance.n_facilities
    zeros = np.zeros
    return RmpSolution(
        "optimal",
        0.0,
        np.asarray(theta, float),
        np.asarray(omega if omega is not None else zeros(len(model.swap_set)), float),
        np.asarray(xi if xi is not None else zeros(len(model.bound_keys)), float),
        zeros(n),
        zeros(n),
        zeros(m),
        zeros(len(model.bound_keys)),
    )


def test_repair_identity():
    inst = Instance([1.0], [4], [1, 1], [[2.0, 3.0]])
    model = RmpModel(inst)
    col = Column.make(inst, 0, [0, 1])
    model.add_columns([col])
    out = repair(inst, solution_for(model, [1.0]), model)
    assert out.columns == [(col, 1.0)]
    assert out.objective == col.cost


def test_repair_swap_transfer():
    inst = Instance([1.0], [4], [1, 1], [[2.0, 3.5]])
    rho = 3.5 - 2.0
    model = RmpModel(inst, DoiConfig("s"), SwapSet.from_pairs([SwapPair(0, 1, rho)]))
    model.add_columns([Column.make(inst, 0, [0])])
    sol = solution_for(model, [1.0], omega=[1.0])
    out = repair(inst, sol, model)
    assert [(c.key, w) for c, w in out.columns] == [((0, (1,)), 1.0)]
    stabilised = 1.0 + 2.0 + rho
    assert out.objective == pytest.approx(stabilised)


def test_repair_rebate_removal():
    inst = Instance([1.0], [4], [1, 1], [[2.0, 3.0]])
    ladders = {0: RebateLadder(0, (0.0, 1.5)), 1: RebateLadder(1, (0.0,))}
    model = RmpModel(inst, DoiConfig("f"), ladders=ladders)
    col = Column.make(inst, 0, [0, 1])
    model.add_columns([col])
    xi = [1.0 if key == (0, 1.5) else 0.0 for key in model.bound_keys]
    out = repair(inst, solution_for(model, [1.0], xi=xi), model)
    assert [(c.key, w) for c, w in out.columns] == [((0, (1,)), 1.0)]
    assert out.objective == pytest.approx(4.0)
    assert out.objective <= col.cost - 1.5


def test_repair_rejects_artificials():
    inst = Instance([1.0], [4], [1, 1], [[2.0, 3.0]])
    model = RmpModel(inst)
    sol = model.solve()
    with pytest.raises(RepairError):
        repair(inst, sol, model)


def test_repair_on_converged_and_mid_run():
    for seed in range(40, 52):
        inst = tiny(seed)
        for v in ("s", "f", "sf"):
            checked = []

            def grab(it, model, sol):
                if not np.any(sol.artificial > 1e-9):
                    out = repair(inst, sol, model)
                    checked.append(not out.problems(inst) and out.objective <= sol.objective + 1e-9)

            res = run(inst, DoiConfig(v), RunParams(harvest_repair=False), callback=grab)
            out = repair(inst, res.solution, res.model)
            assert not out.problems(inst)
            assert out.objective <= res.z + 1e-9 * max(1.0, abs(res.z))
            assert checked and all(checked)


def test_cover_solution_checks():
    inst = Instance([1.0, 1.0], [4, 4], [1, 1], [[2.0, 3.0], [1.0, 1.0]])
    a = Column.make(inst, 0, [0])
    b = Column.make(inst, 0, [1])
    sol = CoverSolution([(a, 1.0), (b, 0.5)], 0.0)
    probs = sol.problems(inst)
    assert any("under-covered" in p for p in probs)
    assert any("beyond 1" in p for p in probs)
