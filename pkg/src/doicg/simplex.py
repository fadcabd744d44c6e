"""Dense revised primal simplex with dual values and basis warm starts.

Problems are ``min c'x`` over ``x >= 0`` (optional finite upper bounds) with
rows of sense ``<=``, ``>=`` or ``=``.  Row duals follow the usual convention
for a minimisation: ``>=`` rows have nonnegative duals, ``<=`` rows
nonpositive ones, so ``c_j - sum_r a_rj y_r >= 0`` at optimality.

The basis inverse is kept explicitly, updated by rank-one pivots and
refactorised every ``refactor_every`` pivots.  Entering variables follow
Dantzig's rule scaled by devex reference weights; after ``3 * (rows + cols)``
consecutive degenerate pivots the solver switches to Bland's rule until the
objective moves again.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np
import scipy.sparse as sp
from scipy.linalg import blas

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

LE, GE, EQ = "<=", ">=", "="
_SENSES = (LE, GE, EQ)
# devex reference weights restart from one once any exceeds this
_DEVEX_RESET = 1e6


class SimplexError(RuntimeError):
    """Numerical breakdown (singular basis, pivot limit)."""


@dataclass(frozen=True)
class Tolerances:
    feas: float = 1e-9
    opt: float = 1e-9
    pivot: float = 1e-7
    obj: float = 1e-7


class LpProblem:
    """Minimisation LP assembled row by row and column by column.

    Every row and variable carries a unique string tag; warm-start bases
    refer to tags, so a basis survives appending columns.
    """

    def __init__(self):
        self.costs: list[float] = []
        self.uppers: list[float | None] = []
        self.var_tags: list[str] = []
        self.senses: list[str] = []
        self.rhs: list[float] = []
        self.row_tags: list[str] = []
        self._ri: list[int] = []
        self._ci: list[int] = []
        self._vals: list[float] = []
        self._var_index: dict[str, int] = {}
        self._row_index: dict[str, int] = {}

    @property
    def n_rows(self) -> int:
        return len(self.rhs)

    @property
    def n_vars(self) -> int:
        return len(self.costs)

    @property
    def nnz(self) -> int:
        return len(self._vals)

    def row_of(self, tag: str) -> int:
        return self._row_index[tag]

    def var_of(self, tag: str) -> int:
        return self._var_index[tag]

    def has_var(self, tag: str) -> bool:
        return tag in self._var_index

    def _entries(self, entries) -> Iterable[tuple[int, float]]:
        if entries is None:
            return ()
        if isinstance(entries, Mapping):
            return entries.items()
        return entries

    def add_row(self, sense: str, rhs: float, tag: str | None = None, entries=None) -> int:
        if sense not in _SENSES:
            raise ValueError(f"unknown row sense {sense!r}")
        rhs = float(rhs)
        if not math.isfinite(rhs):
            raise ValueError("row right-hand side must be finite")
        r = len(self.rhs)
        tag = f"r{r}" if tag is None else tag
        if tag in self._row_index:
            raise ValueError(f"duplicate row tag {tag!r}")
        self.senses.append(sense)
        self.rhs.append(rhs)
        self.row_tags.append(tag)
        self._row_index[tag] = r
        for j, v in self._entries(entries):
            if not 0 <= j < self.n_vars:
                raise ValueError(f"row {tag!r} references unknown variable {j}")
            self._push(r, j, v)
        return r

    def add_variable(self, cost: float, entries=None, upper: float | None = None, tag: str | None = None) -> int:
        cost = float(cost)
        if not math.isfinite(cost):
            raise ValueError("objective coefficient must be finite")
        j = len(self.costs)
        tag = f"x{j}" if tag is None else tag
        if tag in self._var_index:
            raise ValueError(f"duplicate variable tag {tag!r}")
        if upper is not None and (math.isnan(upper) or upper < 0):
            raise ValueError("upper bound must be nonnegative")
        self.costs.append(cost)
        self.uppers.append(None if upper is None or math.isinf(upper) else float(upper))
        self.var_tags.append(tag)
        self._var_index[tag] = j
        for r, v in self._entries(entries):
            if not 0 <= r < self.n_rows:
                raise ValueError(f"variable {tag!r} references unknown row {r}")
            self._push(r, j, v)
        return j

    def _push(self, r: int, j: int, v: float) -> None:
        v = float(v)
        if not math.isfinite(v):
            raise ValueError("coefficients must be finite")
        if v != 0.0:
            self._ri.append(r)
            self._ci.append(j)
            self._vals.append(v)

    def set_upper(self, j: int, upper: float | None) -> None:
        self.uppers[j] = None if upper is None else float(upper)

    def matrix(self) -> sp.csc_matrix:
        return sp.csc_matrix(
            (np.asarray(self._vals, float), (np.asarray(self._ri, np.int64), np.asarray(self._ci, np.int64))),
            shape=(self.n_rows, self.n_vars),
        )

    def copy(self) -> LpProblem:
        other = LpProblem()
        for name in ("costs", "uppers", "var_tags", "senses", "rhs", "row_tags", "_ri", "_ci", "_vals"):
            setattr(other, name, list(getattr(self, name)))
        other._var_index = dict(self._var_index)
        other._row_index = dict(self._row_index)
        return other

    def to_lp_format(self) -> str:
        """CPLEX LP text, for cross-checking with external solvers."""

        def name(t: str) -> str:
            return "".join(ch if ch.isalnum() or ch in "_." else "_" for ch in t)

        def terms(pairs) -> str:
            out = []
            for coef, var in pairs:
                sign = "-" if coef < 0 else "+"
                out.append(f"{sign} {abs(coef)!r} {var}")
            if not out:
                return "0"
            text = " ".join(out)
            return text[2:] if text.startswith("+ ") else text

        lines = ["\\ generated by doicg", "Minimize"]
        lines.append(" obj: " + terms((c, name(t)) for c, t in zip(self.costs, self.var_tags) if c != 0))
        lines.append("Subject To")
        rows: list[list[tuple[float, str]]] = [[] for _ in range(self.n_rows)]
        for r, j, v in zip(self._ri, self._ci, self._vals):
            rows[r].append((v, name(self.var_tags[j])))
        for r in range(self.n_rows):
            lines.append(f" {name(self.row_tags[r])}: {terms(rows[r])} {self.senses[r]} {self.rhs[r]!r}")
        bounds = [f" {name(t)} <= {u!r}" for t, u in zip(self.var_tags, self.uppers) if u is not None]
        if bounds:
            lines.append("Bounds")
            lines += bounds
        lines.append("End")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class Basis:
    """Basic variable keys per basis position, plus the row tags they were built for."""

    row_tags: tuple[str, ...]
    keys: tuple[tuple[str, str], ...]
    # inverse of the basis matrix when it was saved; reused if it still fits
    inverse: np.ndarray | None = field(default=None, compare=False, hash=False, repr=False)


@dataclass
class LpSolution:
    status: str
    x: np.ndarray | None = None
    duals: np.ndarray | None = None
    objective: float = math.nan
    basis: Basis | None = None
    pivots: int = 0
    info: dict = field(default_factory=dict)

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


class _StandardForm:
    """``A x = b`` with slack, surplus and (optionally) artificial columns."""

    def __init__(self, problem: LpProblem):
        self.problem = problem
        n0, m0 = problem.n_vars, problem.n_rows
        keep = [j for j in range(n0) if problem.uppers[j] != 0.0]
        self.struct = np.asarray(keep, dtype=np.int64)
        colmap = np.full(n0, -1, dtype=np.int64)
        colmap[self.struct] = np.arange(len(keep))

        ri = np.asarray(problem._ri, np.int64)
        ci = np.asarray(problem._ci, np.int64)
        vals = np.asarray(problem._vals, float)
        mask = colmap[ci] >= 0 if len(ci) else np.zeros(0, bool)
        ri, ci, vals = ri[mask], colmap[ci[mask]], vals[mask]

        senses = list(problem.senses)
        rhs = list(problem.rhs)
        row_keys = list(problem.row_tags)
        # finite upper bounds become explicit rows
        ub_r, ub_c = [], []
        for k, j in enumerate(keep):
            u = problem.uppers[j]
            if u is not None:
                ub_r.append(len(rhs))
                ub_c.append(k)
                senses.append(LE)
                rhs.append(u)
                row_keys.append("ub:" + problem.var_tags[j])
        self.m0 = m0
        self.m = len(rhs)
        self.row_keys = row_keys
        ns = len(keep)
        keys = [("x", problem.var_tags[j]) for j in keep]
        costs = [problem.costs[j] for j in keep]

        s_r, s_c, s_v = [], [], []
        self.slack_of = np.full(self.m, -1, dtype=np.int64)
        self.slack_sign = np.zeros(self.m)
        col = ns
        for r, sense in enumerate(senses):
            if sense == EQ:
                continue
            sign = 1.0 if sense == LE else -1.0
            self.slack_of[r] = col
            self.slack_sign[r] = sign
            s_r.append(r)
            s_c.append(col)
            s_v.append(sign)
            keys.append(("s", row_keys[r]))
            costs.append(0.0)
            col += 1

        all_r = np.concatenate([ri, np.asarray(ub_r, np.int64), np.asarray(s_r, np.int64)])
        all_c = np.concatenate([ci, np.asarray(ub_c, np.int64), np.asarray(s_c, np.int64)])
        all_v = np.concatenate([vals, np.ones(len(ub_r)), np.asarray(s_v, float)])
        self.n_before_art = col
        self.A = sp.csc_matrix((all_v, (all_r, all_c)), shape=(self.m, col))
        self.A.sum_duplicates()
        self.b = np.asarray(rhs, float)
        self.c = np.asarray(costs, float)
        self.keys = keys
        self.n_struct = ns
        self.artificial = np.zeros(col, dtype=bool)
        self._AT = None

    @property
    def n(self) -> int:
        return self.A.shape[1]

    @property
    def AT(self) -> sp.csr_matrix:
        if self._AT is None:
            self._AT = self.A.T.tocsr()
        return self._AT

    def key_index(self) -> dict[tuple[str, str], int]:
        return {k: j for j, k in enumerate(self.keys)}

    def add_artificials(self, rows: list[int], signs: list[float]) -> list[int]:
        if not rows:
            return []
        start = self.n
        extra = sp.csc_matrix(
            (np.asarray(signs, float), (np.asarray(rows, np.int64), np.arange(len(rows)))),
            shape=(self.m, len(rows)),
        )
        self.A = sp.hstack([self.A, extra], format="csc")
        self._AT = None
        self.c = np.concatenate([self.c, np.zeros(len(rows))])
        self.artificial = np.concatenate([self.artificial, np.ones(len(rows), dtype=bool)])
        for r in rows:
            self.keys.append(("a", self.row_keys[r]))
        return list(range(start, start + len(rows)))

    def column(self, j: int) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = self.A.indptr[j], self.A.indptr[j + 1]
        return self.A.indices[lo:hi], self.A.data[lo:hi]


class SimplexSolver:
    """Primal simplex; one instance per run, not shared across threads."""

    def __init__(self, tol: Tolerances | None = None, refactor_every: int = 100, max_pivots: int = 2_000_000):
        self.tol = tol or Tolerances()
        self.refactor_every = refactor_every
        self.max_pivots = max_pivots

    # -- public ------------------------------------------------------------

    def solve(self, problem: LpProblem) -> LpSolution:
        sf = _StandardForm(problem)
        return self._cold(sf, info={"warm": False})

    def resolve(self, problem: LpProblem, basis: Basis | None) -> LpSolution:
        """Start from ``basis`` when it still fits ``problem``; otherwise solve cold."""
        if basis is None:
            return self.solve(problem)
        sf = _StandardForm(problem)
        start = self._warm_basis(sf, basis)
        if start is None:
            return self._cold(sf, info={"warm": False, "fallback": "incompatible basis"})
        idx, Binv, xB = start
        run = _Run(self, sf, idx, Binv, xB)
        allowed = ~sf.artificial
        status = run.iterate(sf.c, allowed)
        return self._finish(sf, run, status, info={"warm": True})

    # -- internals ---------------------------------------------------------

    def _warm_basis(self, sf: _StandardForm, basis: Basis):
        index = sf.key_index()
        keys = list(basis.keys)
        if tuple(sf.row_keys) != basis.row_tags:
            old_rows = set(basis.row_tags)
            keys = [k for k in keys if k in index or k[0] == "a"]
            keys += [("s", t) for t in sf.row_keys if t not in old_rows]
            keys = [k for k in keys if k[0] != "a" or k[1] in sf.row_keys]
        if len(keys) != sf.m or len(set(keys)) != len(keys):
            return None
        art_rows = [sf.row_keys.index(k[1]) for k in keys if k[0] == "a" and k not in index]
        if art_rows:
            sf.add_artificials(art_rows, [1.0] * len(art_rows))
            index = sf.key_index()
        try:
            idx = np.asarray([index[k] for k in keys], dtype=np.int64)
        except KeyError:
            return None
        if sf.m == 0:
            return idx, np.zeros((0, 0)), np.zeros(0)
        Bs = sf.A[:, idx]
        Binv = None
        if basis.inverse is not None and basis.inverse.shape == (sf.m, sf.m) and keys == list(basis.keys):
            probe = np.linspace(1.0, 2.0, sf.m)
            if np.abs(basis.inverse @ (Bs @ probe) - probe).max() <= 1e-9:
                Binv = basis.inverse
        if Binv is None:
            B = Bs.toarray()
            try:
                Binv = np.linalg.inv(B)
            except np.linalg.LinAlgError:
                return None
            if not np.all(np.isfinite(Binv)):
                return None
        else:
            B = Bs
        xB = Binv @ sf.b
        if np.abs(B @ xB - sf.b).max(initial=0.0) > 1e-8 * (1.0 + np.abs(sf.b).max()):
            return None
        scale = 1.0 + np.abs(sf.b).max()
        if xB.min(initial=0.0) < -self.tol.feas * scale:
            return None
        art = sf.artificial[idx]
        if np.any(np.abs(xB[art]) > self.tol.feas * scale):
            return None
        return idx, Binv, np.maximum(xB, 0.0)

    def _cold(self, sf: _StandardForm, info: dict) -> LpSolution:
        m = sf.m
        b = sf.b
        basis = np.full(m, -1, dtype=np.int64)
        for r in range(m):
            j = sf.slack_of[r]
            if j >= 0 and sf.slack_sign[r] * b[r] >= 0:
                basis[r] = j
        # crash remaining rows with singleton structural columns of the right sign
        open_rows = set(np.flatnonzero(basis < 0).tolist())
        if open_rows:
            A = sf.A[:, : sf.n_struct]
            counts = np.diff(A.indptr)
            best: dict[int, tuple[float, int, float]] = {}
            for j in np.flatnonzero(counts == 1):
                r = int(A.indices[A.indptr[j]])
                if r not in open_rows:
                    continue
                a = A.data[A.indptr[j]]
                if b[r] * a < 0 or (b[r] != 0 and a == 0):
                    continue
                score = sf.c[j] / abs(a)
                if r not in best or score < best[r][0]:
                    best[r] = (score, int(j), a)
            for r, (_, j, _) in best.items():
                basis[r] = j
        art_rows = np.flatnonzero(basis < 0).tolist()
        signs = [1.0 if b[r] >= 0 else -1.0 for r in art_rows]
        arts = sf.add_artificials(art_rows, signs)
        for r, j in zip(art_rows, arts):
            basis[r] = j

        diag = np.array([sf.A[r, j] for r, j in enumerate(basis)]) if m else np.zeros(0)
        Binv = np.diag(1.0 / diag) if m else np.zeros((0, 0))
        xB = np.maximum(b / diag, 0.0) if m else np.zeros(0)
        run = _Run(self, sf, basis, Binv, xB)
        info = dict(info)

        if arts:
            c1 = sf.artificial.astype(float)
            status = run.iterate(c1, np.ones(sf.n, dtype=bool))
            if status != OPTIMAL:
                raise SimplexError("phase 1 did not reach optimality")
            infeas = float(c1[run.basis] @ run.xB)
            info["phase1_pivots"] = run.pivots
            if infeas > self.tol.feas * (1.0 + np.abs(b).max()):
                return LpSolution(INFEASIBLE, pivots=run.pivots, info=info | {"infeasibility": infeas})
            run.drive_out_artificials()
        status = run.iterate(sf.c, ~sf.artificial)
        return self._finish(sf, run, status, info)

    def _finish(self, sf: _StandardForm, run: _Run, status: str, info: dict) -> LpSolution:
        if status == UNBOUNDED:
            return LpSolution(UNBOUNDED, pivots=run.pivots, info=info)
        if run._since_refactor:
            run.refactor()
        xfull = np.zeros(sf.n)
        xfull[run.basis] = np.where(np.abs(run.xB) <= self.tol.feas, 0.0, run.xB)
        if xfull.min(initial=0.0) < -self.tol.feas * (1.0 + np.abs(sf.b).max()):
            raise SimplexError("refactorised basis is primal infeasible")
        xfull = np.maximum(xfull, 0.0)
        y = sf.c[run.basis] @ run.Binv if sf.m else np.zeros(0)
        problem = sf.problem
        x = np.zeros(problem.n_vars)
        x[sf.struct] = xfull[: sf.n_struct]
        objective = float(np.dot(np.asarray(problem.costs, float), x)) if problem.n_vars else 0.0
        basis = Basis(tuple(sf.row_keys), tuple(sf.keys[j] for j in run.basis), run.Binv)
        return LpSolution(OPTIMAL, x=x, duals=y[: sf.m0], objective=objective, basis=basis, pivots=run.pivots, info=info)


class _Run:
    """Mutable simplex state over one standard form."""

    def __init__(self, solver: SimplexSolver, sf: _StandardForm, basis, Binv, xB):
        self.solver = solver
        self.tol = solver.tol
        self.sf = sf
        self.basis = np.asarray(basis, dtype=np.int64)
        # column-major so the rank-one update runs in place through BLAS
        self.Binv = np.array(Binv, dtype=float, order="F")
        self.xB = np.asarray(xB, dtype=float)
        self.pivots = 0
        self._since_refactor = 0
        self.refactored = False

    def refactor(self) -> None:
        sf = self.sf
        if sf.m == 0:
            return
        B = sf.A[:, self.basis].toarray()
        try:
            Binv = np.linalg.inv(B)
        except np.linalg.LinAlgError as exc:
            raise SimplexError("singular basis at refactorisation") from exc
        if not np.all(np.isfinite(Binv)):
            raise SimplexError("singular basis at refactorisation")
        self.Binv = np.asfortranarray(Binv)
        xB = self.Binv @ sf.b
        xB[np.abs(xB) <= self.tol.feas * 1e-3] = 0.0
        self.xB = xB
        self._since_refactor = 0
        self.refactored = True

    def _pivot(self, q: int, r: int, d: np.ndarray, step: float) -> None:
        self.xB -= step * d
        self.xB[r] = step
        np.maximum(self.xB, 0.0, out=self.xB)
        self.basis[r] = q
        prow = self.Binv[r] / d[r]
        self.Binv = blas.dger(-1.0, d, prow, a=self.Binv, overwrite_a=True)
        self.Binv[r] = prow
        self.pivots += 1
        self._since_refactor += 1
        if self.pivots > self.solver.max_pivots:
            raise SimplexError("pivot limit exceeded")
        if self._since_refactor >= self.solver.refactor_every:
            self.refactor()

    def _entering_column(self, q: int) -> np.ndarray:
        rows, vals = self.sf.column(q)
        return self.Binv[:, rows] @ vals

    def _reduced_costs(self, c: np.ndarray, blocked: np.ndarray) -> np.ndarray:
        y = c[self.basis] @ self.Binv
        dj = c - self.sf.AT @ y
        dj[blocked] = 0.0
        return dj

    def iterate(self, c: np.ndarray, allowed: np.ndarray) -> str:
        """Primal simplex from the current feasible basis.

        Entering columns are chosen by devex-weighted Dantzig pricing; reduced
        costs are updated from the pivot row and recomputed at every
        refactorisation.
        """
        sf = self.sf
        tol = self.tol
        m, n = sf.m, sf.n
        if m == 0:
            return UNBOUNDED if np.any((c < -tol.opt) & allowed) else OPTIMAL
        AT = sf.AT
        bland_after = 3 * (m + n)
        degenerate = 0
        bland = False
        blocked = ~allowed
        blocked[self.basis] = True
        dj = self._reduced_costs(c, blocked)
        weights = np.ones(n)
        fresh = True
        while True:
            neg = dj < -tol.opt
            if not neg.any():
                if fresh:
                    return OPTIMAL
                dj = self._reduced_costs(c, blocked)
                fresh = True
                continue
            if bland:
                q = int(np.flatnonzero(neg)[0])
            else:
                q = int(np.argmax(np.where(neg, dj * dj / weights, -1.0)))
            d = self._entering_column(q)
            absd = np.abs(d)
            # zero-level basic artificials block movement in either direction
            stuck = sf.artificial[self.basis] & (absd > tol.pivot) & ~allowed[self.basis]
            pos = np.flatnonzero((d > tol.pivot) | stuck)
            if pos.size == 0:
                return UNBOUNDED
            dpos = np.where(stuck[pos], 1.0, d[pos])
            ratios = np.where(stuck[pos], 0.0, self.xB[pos] / dpos)
            if bland:
                tmin = ratios.min()
                ties = pos[ratios <= tmin + 1e-12 * (1.0 + tmin)]
                r = int(ties[np.argmin(self.basis[ties])])
            else:
                # two-pass ratio test: among rows within a feasibility-tolerance
                # step of the minimum, pivot on the largest entry
                bound = np.where(stuck[pos], 0.0, (self.xB[pos] + tol.feas) / dpos).min()
                ties = pos[ratios <= bound]
                r = int(ties[np.argmax(absd[ties])])
            step = 0.0 if stuck[r] else self.xB[r] / d[r]
            if step <= tol.feas:
                degenerate += 1
                if degenerate > bland_after:
                    bland = True
            else:
                degenerate = 0
                bland = False

            leaving = int(self.basis[r])
            alpha = AT @ self.Binv[r]
            ratio = alpha / d[r]
            dj -= dj[q] * ratio
            np.maximum(weights, ratio * ratio * weights[q], out=weights)
            weights[leaving] = max(weights[q] / (d[r] * d[r]), 1.0)
            if weights[leaving] > _DEVEX_RESET or weights.max() > _DEVEX_RESET:
                weights.fill(1.0)
            blocked[q] = True
            blocked[leaving] = not allowed[leaving]
            dj[blocked] = 0.0

            self.refactored = False
            self._pivot(q, r, d, step)
            if self.refactored:
                dj = self._reduced_costs(c, blocked)
                fresh = True
            else:
                fresh = False

    def drive_out_artificials(self) -> None:
        """Pivot zero-level artificials out of the basis where a structural column allows it."""
        sf = self.sf
        usable = ~sf.artificial
        for r in range(sf.m):
            if not sf.artificial[self.basis[r]]:
                continue
            row = sf.AT @ self.Binv[r]
            row[~usable] = 0.0
            row[self.basis] = 0.0
            q = int(np.argmax(np.abs(row)))
            if abs(row[q]) <= 1e-7:
                continue
            d = self._entering_column(q)
            self.xB[r] = 0.0
            self._pivot(q, r, d, 0.0)


_default = SimplexSolver()


def solve(problem: LpProblem, tol: Tolerances | None = None) -> LpSolution:
    return (SimplexSolver(tol) if tol else _default).solve(problem)


def resolve(problem: LpProblem, basis: Basis | None, tol: Tolerances | None = None) -> LpSolution:
    return (SimplexSolver(tol) if tol else _default).resolve(problem, basis)
