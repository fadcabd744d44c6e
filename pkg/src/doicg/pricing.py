"""Knapsack pricing for SSCFLP patterns.

For facility ``i`` the best pattern maximises ``sum_u (alpha_u - c_iu) x_u``
subject to ``sum_u d_u x_u <= K_i``; its reduced cost is
``f_i - beta_i - value``.  Duals of the rebate bound rows are never used.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .instance import Instance
from .master import Column

EPS_PRICE = 1e-7


def knapsack_dp(weights: Sequence[int], profits: Sequence[float], capacity: int) -> tuple[tuple[int, ...], float]:
    """Exact 0-1 knapsack by dynamic programming over integer capacity.

    Only positive-profit items are considered.  Among optimal sets the one
    whose sorted index tuple is lexicographically smallest is returned.
    """
    capacity = int(capacity)
    if capacity < 0:
        raise ValueError("capacity must be nonnegative")
    w_all = np.asarray(weights, dtype=np.int64)
    p_all = np.asarray(profits, dtype=float)
    if w_all.shape != p_all.shape:
        raise ValueError("weights and profits differ in length")
    if np.any(w_all <= 0):
        raise ValueError("weights must be positive integers")
    items = np.flatnonzero((p_all > 0) & (w_all <= capacity))
    if capacity == 0 or items.size == 0:
        return (), 0.0

    n = items.size
    w = w_all[items]
    p = p_all[items]
    # best[j, c]: optimum over items j.. with capacity c; built backwards so the
    # forward reconstruction can prefer earlier items on ties
    best = np.zeros((n + 1, capacity + 1))
    take = np.zeros((n, capacity + 1), dtype=bool)
    for j in range(n - 1, -1, -1):
        nxt = best[j + 1]
        wj = int(w[j])
        cand = np.full(capacity + 1, -np.inf)
        cand[wj:] = nxt[: capacity + 1 - wj] + p[j]
        t = cand >= nxt
        take[j] = t
        best[j] = np.where(t, cand, nxt)

    chosen = []
    c = capacity
    for j in range(n):
        if take[j, c]:
            chosen.append(int(items[j]))
            c -= int(w[j])
    return tuple(chosen), float(best[0, capacity])


@dataclass(frozen=True)
class PricingDuals:
    alpha: np.ndarray
    beta: np.ndarray

    @classmethod
    def of(cls, solution) -> PricingDuals:
        return cls(np.asarray(solution.alpha, float), np.asarray(solution.beta, float))


@dataclass(frozen=True)
class PricedColumn:
    column: Column
    reduced_cost: float


def reduced_cost(column: Column, duals: PricingDuals) -> float:
    return column.cost - float(duals.alpha[list(column.customers)].sum()) - float(duals.beta[column.facility])


def best_pattern(instance: Instance, i: int, duals: PricingDuals) -> tuple[Column | None, float]:
    """Most negative pattern of facility ``i`` and its reduced cost.

    An empty knapsack yields ``(None, f_i - beta_i)``, a lower bound on every
    nonempty pattern of that facility when no item has positive profit.
    """
    profits = duals.alpha - instance.costs[i]
    chosen, value = knapsack_dp(instance.demands, profits, int(instance.capacities[i]))
    if not chosen:
        return None, float(instance.fixed_costs[i]) - float(duals.beta[i])
    col = Column.make(instance, i, chosen)
    return col, reduced_cost(col, duals)


def price_facility(instance: Instance, i: int, duals: PricingDuals, eps: float = EPS_PRICE) -> PricedColumn | None:
    col, rc = best_pattern(instance, i, duals)
    if col is None or rc >= -eps:
        return None
    return PricedColumn(col, rc)


class Pricer:
    """Round-robin pricing over facilities; owns the rotation cursor of one run.

    Every call evaluates all facilities (their minima feed the Lagrangian
    bound) but harvests columns in rotation order and stops at ``limit``,
    exactly as an early-stopping scan would.
    """

    def __init__(self, instance: Instance, limit: int = 20, eps: float = EPS_PRICE):
        if limit < 1:
            raise ValueError("limit must be at least 1")
        self.instance = instance
        self.limit = limit
        self.eps = eps
        self.cursor = 0
        self.last_min_reduced_costs: np.ndarray | None = None
        self.last_visited: list[int] = []

    def price_all(self, duals: PricingDuals, limit: int | None = None) -> list[PricedColumn]:
        limit = self.limit if limit is None else limit
        if limit < 1:
            raise ValueError("limit must be at least 1")
        m = self.instance.n_facilities
        mins = np.empty(m)
        found: dict[int, PricedColumn] = {}
        for i in range(m):
            col, rc = best_pattern(self.instance, i, duals)
            mins[i] = rc
            if col is not None and rc < -self.eps:
                found[i] = PricedColumn(col, rc)
        self.last_min_reduced_costs = mins

        out: list[PricedColumn] = []
        visited: list[int] = []
        start = self.cursor
        for step in range(m):
            i = (start + step) % m
            visited.append(i)
            if i in found:
                out.append(found[i])
                if len(out) >= limit:
                    break
        self.last_visited = visited
        self.cursor = (visited[-1] + 1) % m if len(out) >= limit else start
        return out


def price_all(instance: Instance, duals: PricingDuals, limit: int = 20, eps: float = EPS_PRICE) -> list[PricedColumn]:
    """Stateless single pass starting at facility 0."""
    return Pricer(instance, limit, eps).price_all(duals)
