"""Command-line interface.

Three subcommands: ``generate`` (sample proposals and keep the feasible
filtered trajectories), ``filter`` (run the safety filter over an external
proposal file), ``bench`` (emit the benchmark CSV tables).  Progress text
goes to stderr; machine-readable artifacts go to files only.

Exit codes: 0 when at least one feasible solution was produced (or the
benchmark completed), 2 for invalid inputs (problem, proposal schema, grid
spec), 3 when the run produced zero feasible solutions.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .basis import write_trajectories_csv
from .errors import SwarmFilterError
from .metrics import (
    BenchmarkGrid,
    benchmark,
    build_batch_report,
    feasible_results,
    save_report_json,
)
from .problem import load_problem
from .proposals import (
    WarmStart,
    load_proposals,
    load_warmstart,
    sample_proposals,
    save_warmstarts,
)
from .solver import SafetyFilter, SolverConfig, write_residuals_csv

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NO_FEASIBLE = 3

DEFAULTS = {
    "count": 50,
    "seed": 0,
    "spread": 0.25,
    "rho": 1.0,
    "max_iters": 200,
    "tol": 1e-3,
    "degree": 10,
    "threads": 1,
}


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("problem", help="problem JSON file")
    parser.add_argument(
        "--rho", type=float, default=None,
        help=f"penalty weight (default {DEFAULTS['rho']})",
    )
    parser.add_argument(
        "--max-iters", type=int, default=None,
        help=f"iteration cap per solve (default {DEFAULTS['max_iters']})",
    )
    parser.add_argument(
        "--tol", type=float, default=None,
        help=f"inf-norm residual tolerance (default {DEFAULTS['tol']})",
    )
    parser.add_argument(
        "--degree", type=int, default=None,
        help=f"polynomial degree (default {DEFAULTS['degree']})",
    )
    parser.add_argument(
        "--threads", type=int, default=None,
        help=f"parallel solves (default {DEFAULTS['threads']})",
    )
    parser.add_argument(
        "--out-dir", default=".", help="output directory (default: current)"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="swarmfilter",
        description="Generate or filter feasible multi-robot trajectories.",
    )
    parser.add_argument(
        "--version", action="version", version=f"swarmfilter {__version__}"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser(
        "generate", help="sample proposals, filter them, keep the feasible ones"
    )
    _add_common(gen)
    gen.add_argument(
        "--count", type=int, default=None,
        help=f"number of proposals to sample (default {DEFAULTS['count']})",
    )
    gen.add_argument(
        "--seed", type=int, default=None,
        help=f"sampler seed (default {DEFAULTS['seed']})",
    )
    gen.add_argument(
        "--spread", type=float, default=None,
        help=f"sampler noise scale (default {DEFAULTS['spread']})",
    )

    filt = sub.add_parser("filter", help="filter an external proposal file")
    _add_common(filt)
    filt.add_argument("--proposals", required=True, help="proposal JSON file")
    filt.add_argument(
        "--warmstart", default=None, help="warm-start JSON file (optional)"
    )

    bench_p = sub.add_parser("bench", help="run benchmark sweeps, emit CSV tables")
    _add_common(bench_p)
    bench_p.add_argument(
        "--seed", type=int, default=None,
        help=f"sampler seed (default {DEFAULTS['seed']})",
    )
    bench_p.add_argument(
        "--spread", type=float, default=None,
        help=f"sampler noise scale (default {DEFAULTS['spread']})",
    )
    bench_p.add_argument(
        "--grid", action="append", default=None, metavar="KEY=SPEC",
        help="sweep axis: batch=1,10,50 or iters=50:400:50 or "
        "strategies=zero,projected,warmstart (repeatable)",
    )
    return parser


def _effective(args, problem_doc: dict, key: str):
    """Config precedence: command-line flag > problem-file field > default."""
    flag = getattr(args, key.replace("-", "_"), None)
    if flag is not None:
        return flag
    solver_doc = problem_doc.get("solver", {}) if isinstance(problem_doc, dict) else {}
    if key in solver_doc:
        return type(DEFAULTS[key])(solver_doc[key])
    return DEFAULTS[key]


def _load_problem_doc(path: str):
    with open(path) as fh:
        return json.load(fh)


def _parse_range(spec: str) -> list[int]:
    if ":" in spec:
        parts = spec.split(":")
        if len(parts) != 3:
            raise ValueError(f"range must be start:stop:step, got {spec!r}")
        start, stop, step = (int(p) for p in parts)
        if step <= 0 or stop < start:
            raise ValueError(f"bad range {spec!r}")
        return list(range(start, stop + 1, step))
    return [int(p) for p in spec.split(",") if p]


def parse_grid(specs) -> BenchmarkGrid:
    """Parse --grid KEY=SPEC entries into a BenchmarkGrid."""
    kwargs = {}
    for raw in specs or []:
        if "=" not in raw:
            raise ValueError(f"grid spec needs KEY=SPEC, got {raw!r}")
        key, _, value = raw.partition("=")
        key = key.strip()
        if key == "batch":
            kwargs["batch_sizes"] = tuple(_parse_range(value))
        elif key == "iters":
            kwargs["iteration_counts"] = tuple(_parse_range(value))
        elif key == "strategies":
            kwargs["strategies"] = tuple(s for s in value.split(",") if s)
        elif key == "timing-batch":
            kwargs["timing_batch"] = int(value)
        elif key == "trace-iters":
            kwargs["trace_iters"] = int(value)
        else:
            raise ValueError(f"unknown grid key {key!r}")
    return BenchmarkGrid(**kwargs)


class _Setup:
    """Resolved configuration shared by all subcommands."""

    def __init__(self, args, doc, problem):
        self.doc = doc
        self.problem = problem
        self.config = SolverConfig(
            rho=_effective(args, doc, "rho"),
            max_iters=_effective(args, doc, "max_iters"),
            tol_residual=_effective(args, doc, "tol"),
        )
        self.degree = _effective(args, doc, "degree")
        self.threads = _effective(args, doc, "threads")
        self.seed = (
            _effective(args, doc, "seed") if hasattr(args, "seed") else DEFAULTS["seed"]
        )
        self.spread = (
            _effective(args, doc, "spread")
            if hasattr(args, "spread")
            else DEFAULTS["spread"]
        )
        self.metadata = {
            "tool": f"swarmfilter {__version__}",
            "seed": self.seed,
            "rho": self.config.rho,
            "max_iters": self.config.max_iters,
            "tol_residual": self.config.tol_residual,
            "tol_eq": self.config.tol_eq,
            "degree": self.degree,
            "H": problem.horizon_samples - 1,
            "n": problem.n,
            "duration": problem.duration,
        }
        self.out_dir = Path(args.out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)


def _setup(args) -> _Setup | None:
    """Load and validate the problem; resolve config. None on bad input."""
    try:
        doc = _load_problem_doc(args.problem)
        problem = load_problem(doc)
    except (OSError, json.JSONDecodeError, SwarmFilterError) as exc:
        _log(f"error: invalid problem file: {exc}")
        return None
    return _Setup(args, doc, problem)


def _write_batch_outputs(sf, batch, problem, meta, out_dir) -> int:
    """Shared tail of generate/filter: report, residuals, trajectories, solutions."""
    report = build_batch_report(batch, problem)
    save_report_json(report, out_dir / "report.json", metadata=meta)
    write_residuals_csv(out_dir / "residuals.csv", batch.results, metadata=meta)

    feasible = feasible_results(batch.results, problem)
    trajs = [traj for _, traj in feasible]
    labels = [idx for idx, _ in feasible]
    write_trajectories_csv(
        out_dir / "trajectories.csv", trajs, metadata=meta, labels=labels
    )
    starts = [
        WarmStart(xi0=batch.results[idx].coeffs, lambda0=batch.results[idx].multipliers)
        for idx in labels
    ]
    save_warmstarts(starts, out_dir / "solutions.json", problem=problem)

    frac = report.feasible_fraction
    _log(
        f"{len(feasible)}/{len(batch.results)} feasible "
        f"(fraction {frac if frac is not None else 'undefined'}), "
        f"wall time {batch.wall_time:.2f}s"
    )
    if not feasible:
        _log("no feasible solutions produced")
        return EXIT_NO_FEASIBLE
    return EXIT_OK


def cmd_generate(args) -> int:
    setup = _setup(args)
    if setup is None:
        return EXIT_INVALID
    count = _effective(args, setup.doc, "count")
    if count < 0:
        _log(f"error: --count must be >= 0, got {count}")
        return EXIT_INVALID

    sf = SafetyFilter(setup.problem, degree=setup.degree, config=setup.config)
    _log(f"sampling {count} proposals (seed {setup.seed}, spread {setup.spread})")
    batch_proposals = sample_proposals(
        setup.problem, sf.basis, count, seed=setup.seed, spread=setup.spread
    )
    _log(
        f"filtering with rho={setup.config.rho}, "
        f"max_iters={setup.config.max_iters}, threads={setup.threads}"
    )
    batch = sf.batch_solve(batch_proposals.proposals, threads=setup.threads)
    return _write_batch_outputs(
        sf, batch, setup.problem, setup.metadata, setup.out_dir
    )


def cmd_filter(args) -> int:
    setup = _setup(args)
    if setup is None:
        return EXIT_INVALID
    problem = setup.problem
    try:
        batch_proposals = load_proposals(args.proposals, problem)
    except SwarmFilterError as exc:
        _log(f"error: invalid proposals file: {exc}")
        return EXIT_INVALID
    if batch_proposals.projected_on_load:
        _log("note: proposals were re-projected onto the endpoint conditions")

    inits = None
    if args.warmstart is not None:
        try:
            starts = load_warmstart(args.warmstart, problem)
        except SwarmFilterError as exc:
            _log(f"error: invalid warm-start file: {exc}")
            return EXIT_INVALID
        if len(starts) != len(batch_proposals):
            _log(
                f"error: {len(starts)} warm starts for "
                f"{len(batch_proposals)} proposals"
            )
            return EXIT_INVALID
        inits = starts

    degree_file = (
        batch_proposals.dim // (3 * problem.n) - 1
        if len(batch_proposals)
        else setup.degree
    )
    sf = SafetyFilter(problem, degree=degree_file, config=setup.config)
    _log(
        f"filtering {len(batch_proposals)} proposals with rho={setup.config.rho}, "
        f"max_iters={setup.config.max_iters}, threads={setup.threads}"
    )
    batch = sf.batch_solve(
        batch_proposals.proposals, inits=inits, threads=setup.threads
    )

    results_doc = {
        "metadata": setup.metadata,
        "results": [r.to_jsonable(n=problem.n) for r in batch.results],
    }
    with open(setup.out_dir / "results.json", "w") as fh:
        json.dump(results_doc, fh)
        fh.write("\n")
    return _write_batch_outputs(sf, batch, problem, setup.metadata, setup.out_dir)


def cmd_bench(args) -> int:
    setup = _setup(args)
    if setup is None:
        return EXIT_INVALID
    try:
        grid = parse_grid(args.grid)
        grid = BenchmarkGrid(
            batch_sizes=grid.batch_sizes,
            iteration_counts=grid.iteration_counts,
            strategies=grid.strategies,
            timing_batch=grid.timing_batch,
            trace_iters=grid.trace_iters,
            seed=setup.seed,
            spread=setup.spread,
        )
    except ValueError as exc:
        _log(f"error: invalid grid spec: {exc}")
        return EXIT_INVALID
    _log(
        f"benchmark: batches {grid.batch_sizes}, iterations "
        f"{grid.iteration_counts}, strategies {grid.strategies}"
    )
    paths = benchmark(
        setup.problem, grid, setup.out_dir, config=setup.config,
        degree=setup.degree, threads=setup.threads, metadata=setup.metadata,
    )
    for name in ("fig5a", "fig5b", "fig6", "fig7"):
        _log(f"wrote {paths[name]}")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {"generate": cmd_generate, "filter": cmd_filter, "bench": cmd_bench}
    try:
        return handlers[args.command](args)
    except SwarmFilterError as exc:
        _log(f"error: {exc}")
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
