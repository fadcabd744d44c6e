"""Command line: ``doicg solve | generate | bench``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .bench import run_bench
from .doi import DoiConfig, Variant
from .driver import RunParams, run, trace_csv
from .instance import (
    DIALECTS,
    GeneratorParams,
    InfeasibleParamsError,
    InstanceFormatError,
    generate_family,
    read_instance,
    scale_capacities,
)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NOT_CONVERGED = 3

VARIANTS = [v.value for v in Variant]


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dialect", choices=DIALECTS, default="canonical")
    p.add_argument("--M", type=int, default=20, help="rebate quantiles per customer")
    p.add_argument("--swap-fraction", type=float, default=0.25)
    p.add_argument("--price-limit", type=int, default=20, help="columns harvested per pricing pass")
    p.add_argument("--max-iter", type=int, default=50_000)
    p.add_argument("--out", type=Path, default=None, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="doicg", description="Column generation with dual-optimal inequalities")
    sub = parser.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="solve the LP relaxation of one instance")
    solve.add_argument("instance", type=Path)
    solve.add_argument("--variant", choices=VARIANTS, default="none")
    solve.add_argument("--L", type=int, default=1, help="capacity scaling factor")
    _add_run_flags(solve)

    gen = sub.add_parser("generate", help="write a seeded family of instances")
    gen.add_argument("family", choices=("structured", "unstructured"))
    gen.add_argument("--n-customers", type=int, default=250)
    gen.add_argument("--n-facilities", type=int, default=50)
    gen.add_argument("--fixed-cost", type=float, default=5.0)
    gen.add_argument("--capacity", type=int, default=150)
    gen.add_argument("--demands", type=_int_list, default=(1, 2, 3, 4, 5))
    gen.add_argument("--count", type=int, default=1)
    gen.add_argument("--seed", type=int, default=0, help="base seed; instance k uses seed + k")
    gen.add_argument("--out", type=Path, required=True)

    bench = sub.add_parser("bench", help="run variants over a set of instances")
    bench.add_argument("instances", nargs="+", type=Path, help="instance files or directories of them")
    bench.add_argument("--variant", choices=VARIANTS, action="append", help="repeatable; default all four")
    bench.add_argument("--L", type=_int_list, default=(1,), help="comma-separated capacity factors")
    bench.add_argument("--workers", type=int, default=1)
    _add_run_flags(bench)
    return parser


def _config(args, variant: str) -> DoiConfig:
    return DoiConfig(variant, n_quantiles=args.M, swap_fraction=args.swap_fraction)


def _params(args) -> RunParams:
    return RunParams(max_iterations=args.max_iter, price_limit=args.price_limit)


def _fail(message: str) -> int:
    print(f"doicg: error: {message}", file=sys.stderr)
    return EXIT_INPUT


def cmd_solve(args) -> int:
    try:
        inst = scale_capacities(read_instance(args.instance, args.dialect), args.L)
        config = _config(args, args.variant)
        params = _params(args)
    except (OSError, InstanceFormatError, ValueError) as exc:
        return _fail(str(exc))
    result = run(inst, config, params)
    out = args.out or Path(".")
    out.mkdir(parents=True, exist_ok=True)
    summary = result.summary() | {"L": args.L, "dialect": args.dialect}
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    (out / f"trace_{inst.name}_{config.variant.value}.csv").write_text(trace_csv(result), encoding="utf-8")
    print(f"z={result.z!r} iterations={result.iterations} time={result.wall_time:.3f}s status={result.status}")
    return EXIT_OK if result.converged else EXIT_NOT_CONVERGED


def cmd_generate(args) -> int:
    mode = "euclidean-plane" if args.family == "structured" else "uniform-random"
    try:
        params = GeneratorParams(
            args.n_customers, args.n_facilities, args.fixed_cost, args.capacity, args.demands, mode, args.seed
        )
        if args.count < 0:
            raise ValueError("count must be nonnegative")
        manifest = generate_family(params, args.count, args.out)
    except (OSError, InfeasibleParamsError, ValueError) as exc:
        return _fail(str(exc))
    print(f"wrote {len(manifest.files)} instances to {args.out}")
    return EXIT_OK


def _collect(paths: list[Path]) -> list[Path]:
    files = []
    for p in paths:
        if p.is_dir():
            files += sorted(f for f in p.iterdir() if f.is_file() and f.suffix in (".txt", ".dat"))
        else:
            files.append(p)
    return files


def cmd_bench(args) -> int:
    try:
        instances = [read_instance(p, args.dialect) for p in _collect(args.instances)]
        if not instances:
            raise ValueError("no instance files found")
        variants = args.variant or VARIANTS
        config = _config(args, "none")
        params = _params(args)
    except (OSError, InstanceFormatError, ValueError) as exc:
        return _fail(str(exc))
    outcome = run_bench(instances, variants, args.L, config, params, args.out or Path("bench-out"), args.workers)
    print(outcome.table.render(), end="")
    for line in outcome.z_mismatches:
        print(f"z mismatch: {line}", file=sys.stderr)
    bad = [r for r in outcome.records if not r.converged]
    for r in bad:
        print(f"not converged: {r.instance}/{r.variant.value}", file=sys.stderr)
    return EXIT_NOT_CONVERGED if bad or outcome.z_mismatches else EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    handler = {"solve": cmd_solve, "generate": cmd_generate, "bench": cmd_bench}[args.command]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())
