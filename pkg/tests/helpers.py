"""Shared fixtures-in-code: tiny random instances and an enumeration oracle."""

import itertools

import numpy as np
from scipy.optimize import linprog

from doicg.instance import Instance
from doicg.master import Column


def tiny_instance(seed: int) -> Instance:
    """|N| in 4..8, |I| in 2..3, capacities at most 12, integer demands at most 4."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(4, 9))
    m = int(rng.integers(2, 4))
    d = rng.integers(1, 5, size=n)
    K = rng.integers(max(4, int(d.max())), 13, size=m)
    while K.sum() < d.sum():
        K = np.minimum(K + 1, 12)
    return Instance(rng.integers(0, 10, size=m).astype(float), K, d, rng.random((m, n)) * 10, name=f"tiny{seed}")


def all_columns(inst: Instance) -> list[Column]:
    out = []
    for i in range(inst.n_facilities):
        for r in range(1, inst.n_customers + 1):
            for S in itertools.combinations(range(inst.n_customers), r):
                if inst.demands[list(S)].sum() <= inst.capacities[i]:
                    out.append(Column.make(inst, i, S))
    return out


def enumeration_optimum(inst: Instance) -> float | None:
    """Master LP over every feasible pattern, solved by HiGHS."""
    cols = all_columns(inst)
    n, m = inst.n_customers, inst.n_facilities
    A = np.zeros((n + m, len(cols)))
    for k, col in enumerate(cols):
        A[list(col.customers), k] = -1
        A[n + col.facility, k] = 1
    res = linprog([c.cost for c in cols], A_ub=A, b_ub=np.r_[-np.ones(n), np.ones(m)], method="highs")
    return float(res.fun) if res.status == 0 else None
