"""Swap penalties, rebate ladders and configuration for the stabilised masters.

Swap pair ``(u, v)`` lets the master under-cover ``u`` and over-cover ``v``
at penalty ``rho = max_i (c[i, v] - c[i, u])``; it is defined for every
ordered pair with ``d_u >= d_v``, so replacing ``u`` by ``v`` in a pattern
never breaks capacity.  Rebates are ``sigma_ul = c[i, u]`` for pattern
``l = (i, S)`` and are rounded down onto a per-customer ladder.

Ladder quantiles use the lower empirical definition: at level ``q`` over
sorted observations ``x_1 <= ... <= x_n`` the quantile is ``x_ceil(q n)``.
"""

from __future__ import annotations

import bisect
import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .instance import Instance

DEFAULT_SCHEDULE = (1, 5, 25, 100, 200, 500)


class Variant(str, enum.Enum):
    NONE = "none"
    S = "s"
    F = "f"
    SF = "sf"

    @property
    def uses_swaps(self) -> bool:
        return self in (Variant.S, Variant.SF)

    @property
    def uses_rebates(self) -> bool:
        return self in (Variant.F, Variant.SF)

    @property
    def label(self) -> str:
        return {"none": "standard", "s": "S-DOI", "f": "F-DOI", "sf": "SF-DOI"}[self.value]


@dataclass(frozen=True)
class DoiConfig:
    variant: Variant = Variant.NONE
    n_quantiles: int = 20
    swap_fraction: float = 0.25
    update_iterations: tuple[int, ...] = DEFAULT_SCHEDULE
    update_every: int = 500

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        if not 0 < self.swap_fraction <= 1:
            raise ValueError("swap_fraction must lie in (0, 1]")
        if self.n_quantiles < 1:
            raise ValueError("n_quantiles must be at least 1")
        if self.update_every < 1:
            raise ValueError("update_every must be positive")


@dataclass(frozen=True)
class SwapPair:
    source: int  # u, loses coverage
    target: int  # v, gains coverage
    penalty: float


@dataclass(frozen=True)
class SwapSet:
    pairs: tuple[SwapPair, ...]
    incoming: dict = field(compare=False, repr=False)  # v -> pair positions with target v
    outgoing: dict = field(compare=False, repr=False)  # u -> pair positions with source u

    @classmethod
    def from_pairs(cls, pairs: Iterable[SwapPair]) -> SwapSet:
        pairs = tuple(sorted(pairs, key=lambda p: (p.source, p.target)))
        seen = set()
        incoming: dict[int, list[int]] = {}
        outgoing: dict[int, list[int]] = {}
        for k, p in enumerate(pairs):
            if p.source == p.target:
                raise ValueError("swap pair must join two distinct customers")
            if (p.source, p.target) in seen:
                raise ValueError(f"duplicate swap pair {(p.source, p.target)}")
            seen.add((p.source, p.target))
            incoming.setdefault(p.target, []).append(k)
            outgoing.setdefault(p.source, []).append(k)
        return cls(pairs, incoming, outgoing)

    @classmethod
    def empty(cls) -> SwapSet:
        return cls((), {}, {})

    def __len__(self):
        return len(self.pairs)


def penalty_matrix(instance: Instance) -> np.ndarray:
    """``P[u, v] = max_i (c[i, v] - c[i, u])`` for all ordered pairs."""
    c = instance.costs
    return (c[:, None, :] - c[:, :, None]).max(axis=0)


def swap_penalty(instance: Instance, u: int, v: int) -> float:
    return float(np.max(instance.costs[:, v] - instance.costs[:, u]))


def compute_swap_penalties(instance: Instance) -> list[SwapPair]:
    """All ordered pairs ``u != v`` with ``d_u >= d_v``, ordered by ``(u, v)``."""
    P = penalty_matrix(instance)
    d = instance.demands
    ok = d[:, None] >= d[None, :]
    np.fill_diagonal(ok, False)
    us, vs = np.nonzero(ok)
    return [SwapPair(int(u), int(v), float(P[u, v])) for u, v in zip(us, vs)]


def select_swap_subset(pairs: Sequence[SwapPair], fraction: float) -> SwapSet:
    """Keep the ``ceil(fraction * len(pairs))`` pairs of smallest penalty."""
    if not 0 < fraction <= 1:
        raise ValueError("fraction must lie in (0, 1]")
    keep = min(len(pairs), math.ceil(fraction * len(pairs) - 1e-9))
    ranked = sorted(pairs, key=lambda p: (p.penalty, p.source, p.target))
    return SwapSet.from_pairs(ranked[:keep])


def compute_rebate(instance: Instance, column, u: int) -> float:
    if u not in column.customer_set:
        raise ValueError(f"customer {u} is not covered by {column}")
    return float(instance.costs[column.facility, u])


@dataclass(frozen=True)
class RebateLadder:
    customer: int
    values: tuple[float, ...]

    def __post_init__(self):
        vals = self.values
        if not vals or vals[0] != 0.0:
            raise ValueError("a ladder must start at 0")
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise ValueError("ladder values must be strictly increasing")

    def __len__(self):
        return len(self.values)

    def round(self, sigma: float) -> float:
        return round_rebate(self, sigma)


def build_ladder(observed: Iterable[float], n_quantiles: int = 20, customer: int = -1) -> RebateLadder:
    xs = sorted(float(x) for x in observed)
    if not xs:
        raise ValueError("cannot build a ladder from no observations")
    if xs[0] < 0:
        raise ValueError("rebates must be nonnegative")
    n = len(xs)
    picks = {0.0, xs[-1]}
    for k in range(1, n_quantiles + 1):
        rank = -(-k * n // n_quantiles)  # ceil(k n / M), 1-based
        picks.add(xs[rank - 1])
    return RebateLadder(customer, tuple(sorted(picks)))


def zero_ladder(customer: int) -> RebateLadder:
    return RebateLadder(customer, (0.0,))


def round_rebate(ladder: RebateLadder, sigma: float) -> float:
    """Largest ladder value not above ``sigma``."""
    if sigma < 0:
        raise ValueError("rebates must be nonnegative")
    vals = ladder.values
    return vals[bisect.bisect_right(vals, sigma) - 1]


def ladders_from_columns(instance: Instance, columns: Iterable, n_quantiles: int = 20) -> dict[int, RebateLadder]:
    """One ladder per customer from the rebates of the given columns."""
    seen: dict[int, list[float]] = {u: [] for u in range(instance.n_customers)}
    for col in columns:
        row = instance.costs[col.facility]
        for u in col.customers:
            seen[u].append(float(row[u]))
    return {
        u: build_ladder(vals, n_quantiles, customer=u) if vals else zero_ladder(u)
        for u, vals in seen.items()
    }


def update_due(iteration: int, schedule: Sequence[int] = DEFAULT_SCHEDULE, every: int = 500) -> bool:
    if iteration < 1:
        raise ValueError("iterations are numbered from 1")
    if iteration in schedule:
        return True
    last = max(schedule) if schedule else 0
    return iteration > last and iteration % every == 0


def format_swap_set(swaps: SwapSet) -> str:
    lines = ["source\ttarget\tpenalty"]
    lines += [f"{p.source}\t{p.target}\t{p.penalty!r}" for p in swaps.pairs]
    return "\n".join(lines) + "\n"


def format_ladders(ladders: dict[int, RebateLadder]) -> str:
    lines = ["customer\tlevels"]
    for u in sorted(ladders):
        lines.append(f"{u}\t" + " ".join(repr(v) for v in ladders[u].values))
    return "\n".join(lines) + "\n"
