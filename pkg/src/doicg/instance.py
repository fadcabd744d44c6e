"""SSCFLP instances: data model, file dialects, seeded generators.

File layout (all dialects, whitespace separated, ``#`` starts a comment line)::

    |I| |N|
    <|I| facility lines>
    <|N| demands>
    <|I| x |N| assignment costs, row-major by facility>

Facility lines are ``capacity fixed_cost`` for the ``holmberg`` and ``yang``
dialects and ``fixed_cost capacity`` for ``canonical``.  The ``yang`` dialect
requires integer costs.  Canonical files may carry a ``# name: <label>``
directive.

Generated instances draw from a Philox-4x64 counter-based stream
(``numpy.random.Philox(seed).random_raw``).  Raw 64-bit words are turned
into reals with ``(w >> 11) * 2**-53`` (half-open ``[0, 1)``) or
``((w >> 11) + 0.5) * 2**-53`` (open ``(0, 1)``).  The draw order is:
facility coordinates (x, y per facility), customer coordinates, then demands
for the structured family; the cost matrix row-major, then demands for the
unstructured family.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

DIALECTS = ("holmberg", "yang", "canonical")
COST_MODES = ("euclidean-plane", "uniform-random")

_TWO_POW_M53 = 2.0**-53


class InstanceFormatError(ValueError):
    """Malformed or invalid instance text."""


class InfeasibleParamsError(ValueError):
    """Generator parameters that cannot produce a feasible instance."""


@dataclass(frozen=True, eq=False)
class Instance:
    """Single-source capacitated facility location data.

    ``costs[i, u]`` is the cost of assigning customer ``u`` to facility ``i``.
    Construction does not validate; use :func:`validate`.
    """

    fixed_costs: np.ndarray
    capacities: np.ndarray
    demands: np.ndarray
    costs: np.ndarray
    name: str = "instance"

    def __post_init__(self):
        conv = {
            "fixed_costs": np.asarray(self.fixed_costs, dtype=float),
            "capacities": np.asarray(self.capacities, dtype=np.int64),
            "demands": np.asarray(self.demands, dtype=np.int64),
            "costs": np.asarray(self.costs, dtype=float),
        }
        for key, arr in conv.items():
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, key, arr)

    @property
    def n_facilities(self) -> int:
        return int(self.fixed_costs.shape[0])

    @property
    def n_customers(self) -> int:
        return int(self.demands.shape[0])

    def __eq__(self, other):
        if not isinstance(other, Instance):
            return NotImplemented
        return (
            self.name == other.name
            and np.array_equal(self.fixed_costs, other.fixed_costs)
            and np.array_equal(self.capacities, other.capacities)
            and np.array_equal(self.demands, other.demands)
            and self.costs.shape == other.costs.shape
            and np.array_equal(self.costs, other.costs)
        )

    def __hash__(self):
        return hash((self.name, self.n_facilities, self.n_customers))

    def __repr__(self):
        return f"Instance({self.name!r}, |I|={self.n_facilities}, |N|={self.n_customers})"


def validate(instance: Instance) -> list[str]:
    """Return every violated invariant; an empty list means the instance is valid."""
    problems = []
    n_fac = instance.capacities.shape[0]
    if instance.fixed_costs.ndim != 1 or instance.fixed_costs.shape[0] != n_fac:
        problems.append("dimension mismatch: fixed costs and capacities differ in length")
    if n_fac == 0:
        problems.append("no facilities")
    if instance.n_customers == 0:
        problems.append("no customers")
    if instance.costs.ndim != 2 or instance.costs.shape != (n_fac, instance.n_customers):
        problems.append(
            f"dimension mismatch: cost matrix is {instance.costs.shape}, "
            f"expected ({n_fac}, {instance.n_customers})"
        )
    if np.any(instance.demands < 1):
        problems.append("demand below 1")
    if np.any(instance.capacities < 1):
        problems.append("capacity below 1")
    if not np.all(np.isfinite(instance.fixed_costs)) or np.any(instance.fixed_costs < 0):
        problems.append("negative or non-finite fixed cost")
    if instance.costs.size and (not np.all(np.isfinite(instance.costs)) or np.any(instance.costs < 0)):
        problems.append("negative or non-finite assignment cost")
    if int(instance.capacities.sum()) < int(instance.demands.sum()):
        problems.append("aggregate capacity shortfall")
    return problems


def is_valid(instance: Instance) -> bool:
    return not validate(instance)


# ---------------------------------------------------------------------------
# parsing


@dataclass(frozen=True)
class _Token:
    text: str
    line: int
    index: int  # 1-based position among all tokens


def _tokenize(text: str) -> tuple[list[_Token], str | None]:
    tokens = []
    name = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if stripped.startswith("#"):
            body = stripped[1:].strip()
            if body.lower().startswith("name:"):
                name = body[5:].strip()
            continue
        for word in stripped.split():
            tokens.append(_Token(word, lineno, len(tokens) + 1))
    return tokens, name


def _where(tok: _Token) -> str:
    return f"line {tok.line}, token {tok.index}"


def _as_int(tok: _Token, what: str) -> int:
    try:
        return int(tok.text)
    except ValueError:
        pass
    try:
        value = float(tok.text)
    except ValueError:
        raise InstanceFormatError(f"{what}: expected an integer, got {tok.text!r} ({_where(tok)})") from None
    if not math.isfinite(value) or value != int(value):
        raise InstanceFormatError(f"{what}: expected an integer, got {tok.text!r} ({_where(tok)})")
    return int(value)


def _as_float(tok: _Token, what: str) -> float:
    try:
        value = float(tok.text)
    except ValueError:
        raise InstanceFormatError(f"{what}: expected a number, got {tok.text!r} ({_where(tok)})") from None
    if not math.isfinite(value):
        raise InstanceFormatError(f"{what}: non-finite value {tok.text!r} ({_where(tok)})")
    return value


def parse_instance(text: str, dialect: str = "canonical", name: str | None = None) -> Instance:
    """Parse instance text in one of :data:`DIALECTS`.

    Raises :class:`InstanceFormatError` with the offending line/token position.
    """
    if dialect not in DIALECTS:
        raise ValueError(f"unknown dialect {dialect!r}; expected one of {DIALECTS}")
    tokens, embedded_name = _tokenize(text)
    if len(tokens) < 2:
        raise InstanceFormatError(f"missing header: expected 2 tokens, got {len(tokens)}")
    n_fac = _as_int(tokens[0], "facility count")
    n_cust = _as_int(tokens[1], "customer count")
    if n_fac < 1 or n_cust < 1:
        raise InstanceFormatError(
            f"header must give positive counts, got |I|={n_fac} |N|={n_cust} ({_where(tokens[0])})"
        )
    expected = 2 + 2 * n_fac + n_cust + n_fac * n_cust
    if len(tokens) != expected:
        last = tokens[-1]
        raise InstanceFormatError(
            f"malformed token count: expected {expected} tokens for |I|={n_fac} |N|={n_cust}, "
            f"got {len(tokens)} (last token at line {last.line})"
        )

    pos = 2
    fixed, caps = [], []
    for _ in range(n_fac):
        a, b = tokens[pos], tokens[pos + 1]
        pos += 2
        cap_tok, fix_tok = (b, a) if dialect == "canonical" else (a, b)
        cap = _as_int(cap_tok, "capacity")
        if cap < 0:
            raise InstanceFormatError(f"negative capacity {cap} ({_where(cap_tok)})")
        if cap == 0:
            raise InstanceFormatError(f"zero capacity ({_where(cap_tok)})")
        f = _as_float(fix_tok, "fixed cost")
        if f < 0:
            raise InstanceFormatError(f"negative fixed cost {fix_tok.text} ({_where(fix_tok)})")
        caps.append(cap)
        fixed.append(f)

    demands = []
    for _ in range(n_cust):
        tok = tokens[pos]
        pos += 1
        d = _as_int(tok, "demand")
        if d < 0:
            raise InstanceFormatError(f"negative demand {d} ({_where(tok)})")
        if d == 0:
            raise InstanceFormatError(f"zero demand ({_where(tok)})")
        demands.append(d)

    costs = np.empty((n_fac, n_cust))
    for i in range(n_fac):
        for u in range(n_cust):
            tok = tokens[pos]
            pos += 1
            c = _as_int(tok, "cost") if dialect == "yang" else _as_float(tok, "cost")
            if c < 0:
                raise InstanceFormatError(f"negative cost {tok.text} ({_where(tok)})")
            costs[i, u] = c

    label = name or embedded_name or "instance"
    inst = Instance(fixed, caps, demands, costs, name=label)
    problems = validate(inst)
    if problems:
        raise InstanceFormatError("invalid instance: " + "; ".join(problems))
    return inst


def read_instance(path: str | Path, dialect: str = "canonical") -> Instance:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    inst = parse_instance(text, dialect)
    if dialect != "canonical" or inst.name == "instance":
        inst = Instance(inst.fixed_costs, inst.capacities, inst.demands, inst.costs, name=path.stem)
    return inst


def _num(x: float) -> str:
    # repr gives the shortest string that round-trips to the same double
    return repr(float(x))


def write_canonical(instance: Instance) -> str:
    problems = validate(instance)
    if problems:
        raise ValueError("cannot write invalid instance: " + "; ".join(problems))
    label = " ".join(instance.name.split())
    lines = [
        "# sscflp canonical v1",
        f"# name: {label}",
        "# |I| |N|",
        f"{instance.n_facilities} {instance.n_customers}",
        "# facilities: fixed_cost capacity",
    ]
    lines += [f"{_num(f)} {int(k)}" for f, k in zip(instance.fixed_costs, instance.capacities)]
    lines.append("# demands")
    lines.append(" ".join(str(int(d)) for d in instance.demands))
    lines.append("# assignment costs, one row per facility")
    lines += [" ".join(_num(c) for c in row) for row in instance.costs]
    return "\n".join(lines) + "\n"


def write_instance(instance: Instance, path: str | Path) -> None:
    Path(path).write_text(write_canonical(instance), encoding="utf-8", newline="\n")


def scale_capacities(instance: Instance, factor: int) -> Instance:
    """Copy of ``instance`` with every capacity multiplied by ``factor``."""
    if int(factor) != factor or factor < 1:
        raise ValueError(f"capacity factor must be a positive integer, got {factor}")
    factor = int(factor)
    name = instance.name if factor == 1 else f"{instance.name}-L{factor}"
    return Instance(
        instance.fixed_costs,
        instance.capacities * factor,
        instance.demands,
        instance.costs,
        name=name,
    )


# ---------------------------------------------------------------------------
# generators


@dataclass(frozen=True)
class GeneratorParams:
    n_customers: int
    n_facilities: int
    fixed_cost: float = 5.0
    capacity: int = 150
    demand_choices: tuple[int, ...] = (1, 2, 3, 4, 5)
    cost_mode: str = "euclidean-plane"
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "demand_choices", tuple(sorted(int(d) for d in self.demand_choices)))
        if self.n_customers < 1 or self.n_facilities < 1:
            raise ValueError("customer and facility counts must be positive")
        if not self.demand_choices:
            raise ValueError("demand_choices must be non-empty")
        if self.demand_choices[0] < 1:
            raise ValueError("demands must be positive")
        if self.demand_choices[-1] > self.capacity:
            raise ValueError("largest demand exceeds facility capacity")
        if self.cost_mode not in COST_MODES:
            raise ValueError(f"unknown cost mode {self.cost_mode!r}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    def with_seed(self, seed: int) -> GeneratorParams:
        return GeneratorParams(**{**asdict(self), "seed": seed})

    def to_dict(self) -> dict:
        d = asdict(self)
        d["demand_choices"] = list(self.demand_choices)
        return d


class _Stream:
    """Sequential reals from the Philox raw stream."""

    def __init__(self, seed: int):
        self._bits = np.random.Philox(seed)

    def _words(self, n: int) -> np.ndarray:
        return np.asarray(self._bits.random_raw(n), dtype=np.uint64) >> np.uint64(11)

    def uniform(self, n: int) -> np.ndarray:
        return self._words(n).astype(float) * _TWO_POW_M53

    def uniform_open(self, n: int) -> np.ndarray:
        return (self._words(n).astype(float) + 0.5) * _TWO_POW_M53

    def choice(self, options: Sequence[int], n: int) -> np.ndarray:
        idx = np.floor(self.uniform(n) * len(options)).astype(np.int64)
        return np.asarray(options, dtype=np.int64)[idx]


def euclidean_costs(facility_xy: np.ndarray, customer_xy: np.ndarray) -> np.ndarray:
    diff = np.asarray(facility_xy, float)[:, None, :] - np.asarray(customer_xy, float)[None, :, :]
    return np.sqrt((diff**2).sum(axis=2))


def _finish(params: GeneratorParams, costs: np.ndarray, demands: np.ndarray, tag: str) -> Instance:
    if params.capacity * params.n_facilities < int(demands.sum()):
        raise InfeasibleParamsError(
            f"aggregate capacity {params.capacity * params.n_facilities} below drawn demand {int(demands.sum())}"
        )
    name = f"{tag}-n{params.n_customers}-i{params.n_facilities}-s{params.seed}"
    return Instance(
        np.full(params.n_facilities, float(params.fixed_cost)),
        np.full(params.n_facilities, int(params.capacity)),
        demands,
        costs,
        name=name,
    )


def generate_structured(params: GeneratorParams) -> Instance:
    """Locations uniform on the unit square, costs are the Euclidean distances."""
    if params.cost_mode != "euclidean-plane":
        raise ValueError("generate_structured requires cost_mode='euclidean-plane'")
    rng = _Stream(params.seed)
    fac = rng.uniform(2 * params.n_facilities).reshape(params.n_facilities, 2)
    cust = rng.uniform(2 * params.n_customers).reshape(params.n_customers, 2)
    demands = rng.choice(params.demand_choices, params.n_customers)
    return _finish(params, euclidean_costs(fac, cust), demands, "structured")


def generate_unstructured(params: GeneratorParams) -> Instance:
    """Costs i.i.d. uniform on the open interval (0, 1)."""
    if params.cost_mode != "uniform-random":
        raise ValueError("generate_unstructured requires cost_mode='uniform-random'")
    rng = _Stream(params.seed)
    costs = rng.uniform_open(params.n_facilities * params.n_customers).reshape(
        params.n_facilities, params.n_customers
    )
    demands = rng.choice(params.demand_choices, params.n_customers)
    return _finish(params, costs, demands, "unstructured")


def generate(params: GeneratorParams) -> Instance:
    if params.cost_mode == "euclidean-plane":
        return generate_structured(params)
    return generate_unstructured(params)


@dataclass
class Manifest:
    family: str
    params: dict
    seeds: list[int] = field(default_factory=list)
    files: list[str] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> Manifest:
        return cls(**json.loads(text))


def generate_family(params: GeneratorParams, count: int, out_dir: str | Path) -> Manifest:
    """Write ``count`` instances with seeds ``params.seed + k`` plus ``manifest.json``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    family = "structured" if params.cost_mode == "euclidean-plane" else "unstructured"
    manifest = Manifest(family=family, params=params.to_dict())
    for k in range(count):
        p = params.with_seed(params.seed + k)
        inst = generate(p)
        fname = f"{inst.name}.txt"
        write_instance(inst, out / fname)
        manifest.seeds.append(p.seed)
        manifest.files.append(fname)
    (out / "manifest.json").write_text(manifest.to_json(), encoding="utf-8", newline="\n")
    return manifest


def total_demand(instance: Instance, customers: Iterable[int]) -> int:
    return int(sum(int(instance.demands[u]) for u in customers))
