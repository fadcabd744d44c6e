"""Restricted master problem for the set-covering SSCFLP, with optional DOIs.

Rows, in order:

* ``cover:u``    sum_l a_ul theta_l + sum_{s: s+=u} omega_s - sum_{s: s-=u} omega_s
                 - sum_sigma xi_{u,sigma} >= 1          (dual alpha_u >= 0)
* ``convex:i``   sum_{l in Omega_i} theta_l <= 1       (dual beta_i <= 0)
* ``bound:u:s``  xi_{u,s} - sum_l [round(sigma_ul) = s] theta_l <= 0
                                                        (dual gamma_{u,s} <= 0)

With these signs a pattern ``l = (i, S)`` has LP reduced cost
``c_l - sum_{u in S} alpha_u - beta_i + sum_{u in S} gamma_{u, round(sigma_ul)}``.
Pricing drops the gamma term.  One artificial column per customer (cost
``2 * (max_i f_i + sum_u max_i c_iu)``) keeps every restricted master feasible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np

from .doi import DoiConfig, RebateLadder, SwapSet, Variant, round_rebate
from .instance import Instance
from .simplex import GE, LE, Basis, LpProblem, SimplexSolver


def column_cost(instance: Instance, facility: int, customers: Iterable[int]) -> float:
    row = instance.costs[facility]
    return float(instance.fixed_costs[facility]) + math.fsum(float(row[u]) for u in customers)


@dataclass(frozen=True)
class Column:
    """Assignment pattern: facility plus the customers it serves."""

    facility: int
    customers: tuple[int, ...]
    cost: float

    @classmethod
    def make(cls, instance: Instance, facility: int, customers: Iterable[int]) -> Column:
        members = tuple(sorted(set(int(u) for u in customers)))
        return cls(int(facility), members, column_cost(instance, facility, members))

    @property
    def key(self) -> tuple[int, tuple[int, ...]]:
        return self.facility, self.customers

    @property
    def customer_set(self) -> frozenset[int]:
        return frozenset(self.customers)

    def load(self, instance: Instance) -> int:
        return int(sum(int(instance.demands[u]) for u in self.customers))

    def swapped(self, instance: Instance, out: int, into: int) -> Column:
        return Column.make(instance, self.facility, [u for u in self.customers if u != out] + [into])

    def removed(self, instance: Instance, drop: Iterable[int]) -> Column | None:
        drop = set(drop)
        rest = [u for u in self.customers if u not in drop]
        return Column.make(instance, self.facility, rest) if rest else None


def column_problems(instance: Instance, col: Column) -> list[str]:
    out = []
    if not col.customers:
        out.append("empty customer set")
    if not 0 <= col.facility < instance.n_facilities:
        out.append(f"unknown facility {col.facility}")
        return out
    if any(not 0 <= u < instance.n_customers for u in col.customers):
        out.append("unknown customer")
        return out
    load = col.load(instance)
    cap = int(instance.capacities[col.facility])
    if load > cap:
        out.append(f"load {load} exceeds capacity {cap} of facility {col.facility}")
    if col.cost != column_cost(instance, col.facility, col.customers):
        out.append("stored cost differs from instance cost")
    return out


class ColumnPool:
    """Insertion-ordered set of distinct columns."""

    def __init__(self):
        self._cols: list[Column] = []
        self._pos: dict[tuple, int] = {}

    def add(self, col: Column) -> bool:
        if col.key in self._pos:
            return False
        self._pos[col.key] = len(self._cols)
        self._cols.append(col)
        return True

    def index(self, col: Column) -> int:
        return self._pos[col.key]

    def __contains__(self, col: Column) -> bool:
        return col.key in self._pos

    def __len__(self) -> int:
        return len(self._cols)

    def __iter__(self) -> Iterator[Column]:
        return iter(self._cols)

    def __getitem__(self, k: int) -> Column:
        return self._cols[k]

    def export_text(self) -> str:
        lines = ["# facility cost customers"]
        for col in self._cols:
            lines.append(f"{col.facility} {col.cost!r} " + " ".join(map(str, col.customers)))
        return "\n".join(lines) + "\n"


@dataclass
class RmpSolution:
    status: str
    objective: float
    theta: np.ndarray
    omega: np.ndarray
    xi: np.ndarray
    artificial: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray
    pivots: int = 0
    warm: bool = False

    @property
    def doi_activity(self) -> float:
        return float(self.omega.sum() + self.xi.sum())

    @property
    def dual_objective(self) -> float:
        return float(self.alpha.sum() + self.beta.sum())


class RmpModel:
    """Restricted master in one of the four variants; single owner, mutable."""

    def __init__(
        self,
        instance: Instance,
        config: DoiConfig | None = None,
        swap_set: SwapSet | None = None,
        ladders: dict[int, RebateLadder] | None = None,
        solver: SimplexSolver | None = None,
    ):
        config = config or DoiConfig()
        variant = config.variant
        if variant.uses_swaps != (swap_set is not None):
            raise ValueError(f"variant {variant.value!r} {'requires' if variant.uses_swaps else 'takes no'} swap set")
        if variant.uses_rebates != (ladders is not None):
            raise ValueError(f"variant {variant.value!r} {'requires' if variant.uses_rebates else 'takes no'} ladders")
        if ladders is not None:
            missing = [u for u in range(instance.n_customers) if u not in ladders]
            if missing:
                raise ValueError(f"ladders missing for customers {missing[:5]}")
        self.instance = instance
        self.config = config
        self.swap_set = swap_set if swap_set is not None else SwapSet.empty()
        self.ladders = dict(ladders) if ladders is not None else None
        self.solver = solver or SimplexSolver()
        self.pool = ColumnPool()
        self.artificial_cost = 2.0 * (
            float(instance.fixed_costs.max()) + float(instance.costs.max(axis=0).sum())
        )
        self._basis: Basis | None = None
        self._assemble()

    @classmethod
    def build(cls, instance, config=None, swap_set=None, ladders=None, solver=None) -> RmpModel:
        return cls(instance, config, swap_set, ladders, solver)

    @property
    def variant(self) -> Variant:
        return self.config.variant

    # -- assembly ------------------------------------------------------------

    def _assemble(self) -> None:
        inst = self.instance
        n, m = inst.n_customers, inst.n_facilities
        lp = LpProblem()
        for u in range(n):
            lp.add_row(GE, 1.0, tag=f"cover:{u}")
        for i in range(m):
            lp.add_row(LE, 1.0, tag=f"convex:{i}")
        self.bound_keys: list[tuple[int, float]] = []
        self.bound_row: dict[tuple[int, float], int] = {}
        if self.ladders is not None:
            for u in range(n):
                for sigma in self.ladders[u].values:
                    self.bound_row[(u, sigma)] = lp.add_row(LE, 0.0, tag=f"bound:{u}:{sigma!r}")
                    self.bound_keys.append((u, sigma))

        self.art_vars = [lp.add_variable(self.artificial_cost, {u: 1.0}, tag=f"art:{u}") for u in range(n)]
        self.omega_vars = []
        for p in self.swap_set.pairs:
            j = lp.add_variable(p.penalty, {p.target: 1.0, p.source: -1.0}, tag=f"omega:{p.source}:{p.target}")
            self.omega_vars.append(j)
        self.xi_vars = []
        for u, sigma in self.bound_keys:
            j = lp.add_variable(-sigma, {u: -1.0, self.bound_row[(u, sigma)]: 1.0}, tag=f"xi:{u}:{sigma!r}")
            self.xi_vars.append(j)
        self.lp = lp
        self.theta_vars = []
        for k, col in enumerate(self.pool):
            self.theta_vars.append(lp.add_variable(col.cost, self._theta_entries(col), tag=f"theta:{k}"))

    def rebate_level(self, col: Column, u: int) -> float:
        return round_rebate(self.ladders[u], float(self.instance.costs[col.facility, u]))

    def _theta_entries(self, col: Column) -> dict[int, float]:
        entries = {u: 1.0 for u in col.customers}
        entries[self.instance.n_customers + col.facility] = 1.0
        if self.ladders is not None:
            for u in col.customers:
                entries[self.bound_row[(u, self.rebate_level(col, u))]] = -1.0
        return entries

    # -- mutation ------------------------------------------------------------

    def add_columns(self, columns: Iterable[Column]) -> int:
        added = 0
        for col in columns:
            problems = column_problems(self.instance, col)
            if problems:
                raise ValueError(f"rejected column {col.key}: " + "; ".join(problems))
            if not self.pool.add(col):
                continue
            k = len(self.pool) - 1
            self.theta_vars.append(self.lp.add_variable(col.cost, self._theta_entries(col), tag=f"theta:{k}"))
            added += 1
        return added

    def rebuild_ladders(self, ladders: dict[int, RebateLadder]) -> None:
        if not self.variant.uses_rebates:
            raise ValueError(f"variant {self.variant.value!r} has no rebate ladders")
        missing = [u for u in range(self.instance.n_customers) if u not in ladders]
        if missing:
            raise ValueError(f"ladders missing for customers {missing[:5]}")
        self.ladders = dict(ladders)
        self._assemble()

    # -- solving -------------------------------------------------------------

    def _extract(self, sol) -> RmpSolution:
        if not sol.optimal:
            raise RuntimeError(f"restricted master not optimal: {sol.status}")
        x, y = sol.x, sol.duals
        n, m = self.instance.n_customers, self.instance.n_facilities
        idx = lambda vs: np.asarray(vs, dtype=np.int64)  # noqa: E731
        return RmpSolution(
            status=sol.status,
            objective=sol.objective,
            theta=x[idx(self.theta_vars)],
            omega=x[idx(self.omega_vars)],
            xi=x[idx(self.xi_vars)],
            artificial=x[idx(self.art_vars)],
            alpha=y[:n].copy(),
            beta=y[n : n + m].copy(),
            gamma=y[n + m :].copy(),
            pivots=sol.pivots,
            warm=bool(sol.info.get("warm")),
        )

    def solve(self) -> RmpSolution:
        sol = self.solver.resolve(self.lp, self._basis)
        out = self._extract(sol)
        self._basis = sol.basis
        self.last_solution = out
        return out

    def objective_without_doi(self, solution: RmpSolution | None = None) -> float:
        """Objective of the same pool with every omega and xi fixed at zero.

        With ``xi = 0`` each bound row reads ``-sum theta <= 0`` and is implied
        by ``theta >= 0``, so the plain covering master over the pool is solved.
        """
        if not self.omega_vars and not self.xi_vars:
            return (solution or self.last_solution).objective
        plain = RmpModel(self.instance, DoiConfig(Variant.NONE), solver=self.solver)
        plain.add_columns(self.pool)
        return plain.solve().objective

    def theta_reduced_costs(self, solution: RmpSolution) -> np.ndarray:
        """Full LP reduced costs of the pool columns, gamma included."""
        out = np.empty(len(self.pool))
        n = self.instance.n_customers
        for k, col in enumerate(self.pool):
            rc = col.cost - solution.alpha[list(col.customers)].sum() - solution.beta[col.facility]
            if self.ladders is not None:
                for u in col.customers:
                    rc += solution.gamma[self.bound_row[(u, self.rebate_level(col, u))] - n - self.instance.n_facilities]
            out[k] = rc
        return out


def build(instance, config=None, swap_set=None, ladders=None, solver=None) -> RmpModel:
    return RmpModel(instance, config, swap_set, ladders, solver)
