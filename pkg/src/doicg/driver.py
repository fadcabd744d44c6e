"""Column generation loop, bounds, termination certificate and primal repair."""

from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .doi import (
    DoiConfig,
    Variant,
    compute_swap_penalties,
    ladders_from_columns,
    select_swap_subset,
    swap_penalty,
    update_due,
    zero_ladder,
)
from .instance import Instance
from .master import Column, RmpModel, RmpSolution
from .pricing import EPS_PRICE, Pricer, PricingDuals
from .simplex import SimplexSolver

TRACE_HEADER = ("iteration", "time_s", "ub", "lb", "best_lb", "cols_added", "doi_activity")


@dataclass
class RunParams:
    max_iterations: int = 50_000
    price_limit: int = 20
    eps_price: float = EPS_PRICE
    # feed the repaired primal's patterns back into the pool once converged
    harvest_repair: bool = True


@dataclass
class TraceRow:
    iteration: int
    time_s: float
    ub: float
    lb: float
    best_lb: float
    best_ub: float
    cols_added: int
    doi_activity: float
    ladder_rebuilt: bool = False


@dataclass
class CgResult:
    instance_name: str
    variant: Variant
    z: float
    iterations: int
    wall_time: float
    trace: list[TraceRow]
    pool_size: int
    converged: bool
    certificate: dict = field(default_factory=dict)
    status: str = ""
    model: RmpModel | None = field(default=None, repr=False, compare=False)
    solution: RmpSolution | None = field(default=None, repr=False, compare=False)

    def summary(self) -> dict:
        last = self.trace[-1] if self.trace else None
        return {
            "instance": self.instance_name,
            "variant": self.variant.value,
            "z": self.z,
            "iterations": self.iterations,
            "time_s": round(self.wall_time, 3),
            "pool_size": self.pool_size,
            "converged": self.converged,
            "status": self.status,
            "final_gap": gap(last.ub, last.best_lb) if last else None,
            "certificate": self.certificate,
        }


@dataclass
class CoverSolution:
    columns: list[tuple[Column, float]]
    objective: float

    def coverage(self, instance: Instance) -> np.ndarray:
        cov = np.zeros(instance.n_customers)
        for col, w in self.columns:
            cov[list(col.customers)] += w
        return cov

    def facility_usage(self, instance: Instance) -> np.ndarray:
        use = np.zeros(instance.n_facilities)
        for col, w in self.columns:
            use[col.facility] += w
        return use

    def problems(self, instance: Instance, tol: float = 1e-9) -> list[str]:
        out = []
        cov = self.coverage(instance)
        if np.any(cov < 1 - tol):
            out.append(f"under-covered customers {np.flatnonzero(cov < 1 - tol).tolist()}")
        use = self.facility_usage(instance)
        if np.any(use > 1 + tol):
            out.append(f"facilities used beyond 1: {np.flatnonzero(use > 1 + tol).tolist()}")
        if any(w < 0 for _, w in self.columns):
            out.append("negative weight")
        return out


class RepairError(RuntimeError):
    pass


def gap(ub: float, lb: float, eps: float = 1e-12) -> float:
    return (ub - lb) / max(abs(ub), eps)


def lagrangian_lower_bound(rmp_objective: float, min_reduced_costs) -> float:
    """RMP objective plus each facility's most negative reduced cost."""
    return float(rmp_objective) + math.fsum(min(0.0, float(c)) for c in min_reduced_costs)


def make_model(instance: Instance, config: DoiConfig, solver: SimplexSolver | None = None) -> RmpModel:
    swaps = None
    ladders = None
    if config.variant.uses_swaps:
        swaps = select_swap_subset(compute_swap_penalties(instance), config.swap_fraction)
    if config.variant.uses_rebates:
        ladders = {u: zero_ladder(u) for u in range(instance.n_customers)}
    return RmpModel(instance, config, swaps, ladders, solver)


def run(
    instance: Instance,
    config: DoiConfig | None = None,
    params: RunParams | None = None,
    callback: Callable[[int, RmpModel, RmpSolution], None] | None = None,
) -> CgResult:
    config = config or DoiConfig()
    params = params or RunParams()
    t0 = time.perf_counter()
    model = make_model(instance, config)
    pricer = Pricer(instance, params.price_limit, params.eps_price)
    trace: list[TraceRow] = []
    best_lb, best_ub = -math.inf, math.inf
    converged = False
    status = "iteration limit"
    sol = None
    it = 0
    for it in range(1, params.max_iterations + 1):
        rebuilt = False
        if config.variant.uses_rebates and update_due(it, config.update_iterations, config.update_every):
            model.rebuild_ladders(ladders_from_columns(instance, model.pool, config.n_quantiles))
            rebuilt = True
        sol = model.solve()
        priced = pricer.price_all(PricingDuals.of(sol))
        lb = lagrangian_lower_bound(sol.objective, pricer.last_min_reduced_costs)
        best_lb = max(best_lb, lb)
        best_ub = min(best_ub, sol.objective)
        added = model.add_columns(p.column for p in priced)
        trace.append(
            TraceRow(
                it, time.perf_counter() - t0, sol.objective, lb, best_lb, best_ub, added, sol.doi_activity, rebuilt
            )
        )
        if callback is not None:
            callback(it, model, sol)
        if not priced:
            converged = True
            status = "optimal"
            break
        if added == 0:
            status = "stalled: priced columns already in pool"
            break

    certificate: dict = {}
    if converged:
        if params.harvest_repair and config.variant is not Variant.NONE:
            cover = repair(instance, sol, model)
            if model.add_columns(c for c, _ in cover.columns):
                sol = model.solve()
        certificate = {
            "min_reduced_cost": float(np.min(pricer.last_min_reduced_costs)),
            "dual_sum": sol.dual_objective,
            "zero_doi_objective": model.objective_without_doi(sol),
            "doi_activity": sol.doi_activity,
        }
    wall = time.perf_counter() - t0
    return CgResult(
        instance_name=instance.name,
        variant=config.variant,
        z=sol.objective if sol is not None else math.nan,
        iterations=it,
        wall_time=wall,
        trace=trace,
        pool_size=len(model.pool),
        converged=converged,
        certificate=certificate,
        status=status,
        model=model,
        solution=sol,
    )


# ---------------------------------------------------------------------------
# repair


def repair(instance: Instance, solution: RmpSolution, model: RmpModel, tol: float = 1e-12) -> CoverSolution:
    """Turn a stabilised primal into a pure covering solution of no greater cost.

    Rebate weight is removed first (drop the customer from a pattern that
    carries it), then chained swaps ``(a, u), (u, c)`` are merged into
    ``(a, c)`` or cancelled, and finally each remaining swap moves weight
    from a pattern containing its source onto the swapped pattern.
    """
    if np.any(solution.artificial > 1e-9):
        raise RepairError("artificial columns carry weight; the pool cannot cover every customer")

    cols: dict[tuple, Column] = {}
    theta: dict[tuple, float] = {}

    def put(col: Column | None, w: float) -> None:
        if col is None:
            return
        cols.setdefault(col.key, col)
        theta[col.key] = theta.get(col.key, 0.0) + w

    # the pool may have grown since the solve; only its prefix has weights
    for col, w in zip(model.pool, solution.theta):
        if w > tol:
            put(col, float(w))

    def live(pred) -> list[tuple]:
        return [key for key in sorted(theta) if theta[key] > tol and pred(cols[key])]

    # rebates
    for k, (u, sigma) in enumerate(model.bound_keys):
        w = float(solution.xi[k])
        while w > tol:
            cands = live(lambda c: u in c.customer_set and model.rebate_level(c, u) == sigma)
            if not cands:
                break
            key = cands[0]
            delta = min(w, theta[key])
            theta[key] -= delta
            put(cols[key].removed(instance, [u]), delta)
            w -= delta
        if w > 1e-9:
            raise RepairError(f"rebate for customer {u} at level {sigma} exceeds the supporting patterns")

    # swaps
    omega: dict[tuple[int, int], float] = {}
    rho: dict[tuple[int, int], float] = {}
    for k, p in enumerate(model.swap_set.pairs):
        rho[(p.source, p.target)] = p.penalty
        if solution.omega[k] > tol:
            omega[(p.source, p.target)] = float(solution.omega[k])

    for u in range(instance.n_customers):
        while True:
            ins = sorted(a for (a, b), w in omega.items() if b == u and w > tol)
            outs = sorted(c for (b, c), w in omega.items() if b == u and w > tol)
            if not ins or not outs:
                break
            a, c = ins[0], outs[0]
            delta = min(omega[(a, u)], omega[(u, c)])
            omega[(a, u)] -= delta
            omega[(u, c)] -= delta
            if a != c:
                rho.setdefault((a, c), swap_penalty(instance, a, c))
                omega[(a, c)] = omega.get((a, c), 0.0) + delta

    for (u, v) in sorted(omega):
        while omega[(u, v)] > tol:
            w = omega[(u, v)]
            cands = live(lambda c: u in c.customer_set and v not in c.customer_set)
            if cands:
                key = cands[0]
                delta = min(w, theta[key])
                theta[key] -= delta
                put(cols[key].swapped(instance, u, v), delta)
            else:
                # every pattern holding u also holds v: dropping u keeps v covered
                cands = live(lambda c: u in c.customer_set)
                if not cands:
                    raise RepairError(f"no pattern covers swap source {u}")
                key = cands[0]
                delta = min(w, theta[key])
                theta[key] -= delta
                put(cols[key].removed(instance, [u]), delta)
            omega[(u, v)] -= delta

    kept = [(cols[key], theta[key]) for key in sorted(theta) if theta[key] > tol]
    objective = math.fsum(col.cost * w for col, w in kept)
    return CoverSolution(kept, objective)


# ---------------------------------------------------------------------------
# traces


def extract_gap_trace(result: CgResult) -> list[tuple[float, int, float]]:
    if not result.trace:
        raise ValueError("empty trace")
    return [(row.time_s, row.iteration, gap(row.ub, row.best_lb)) for row in result.trace]


def trace_csv(result: CgResult) -> str:
    """One row per iteration; times to the millisecond, other reals via ``repr``."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TRACE_HEADER)
    for row in result.trace:
        writer.writerow(
            [
                row.iteration,
                f"{row.time_s:.3f}",
                repr(float(row.ub)),
                repr(float(row.lb)),
                repr(float(row.best_lb)),
                row.cols_added,
                repr(float(row.doi_activity)),
            ]
        )
    return buf.getvalue()
