"""Evaluation metrics and benchmark sweeps.

Diversity definition (fixed and recorded in every output header): flatten
each trajectory's sampled positions (all robots, all axes) into one vector,
subtract the batch mean vector, then average cosine similarity over all
unordered pairs.  Lower means more diverse; identical trajectories are
degenerate after centering and reported as NaN.
"""
from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .assembly import (
    PairwiseOperator,
    SphericalVars,
    build_spherical_rhs,
    check_original_constraints,
)
from .basis import Trajectory, build_basis, coeffs_to_trajectory
from .errors import TooFewSamples
from .problem import SwarmProblem
from .proposals import WarmStart, sample_proposals
from .solver import BatchResult, SafetyFilter, SolveResult, SolverConfig

DIVERSITY_DEFINITION = "centered-position-cosine-mean-over-pairs"


def primal_residual(coeffs, svars: SphericalVars, operator: PairwiseOperator, problem: SwarmProblem):
    """Residual of the reformulated constraints: F xi - e(svars).

    Returns (vector, inf_norm, l2_norm).
    """
    r = operator.apply(coeffs) - build_spherical_rhs(svars, problem)
    inf = float(np.abs(r).max()) if r.size else 0.0
    return r, inf, float(np.linalg.norm(r))


def _trajectory_of(result: SolveResult, problem: SwarmProblem, basis_cache: dict) -> Trajectory | None:
    if result.coeffs is None:
        return None
    degree = result.coeffs.size // (3 * problem.n) - 1
    basis = basis_cache.get(degree)
    if basis is None:
        basis = build_basis(
            problem.duration, degree=degree, samples=problem.horizon_samples
        )
        basis_cache[degree] = basis
    return coeffs_to_trajectory(result.coeffs, basis, problem.n)


def feasible_results(results, problem: SwarmProblem, tol: float = 1e-3):
    """Indices and trajectories of results that converged and check out feasible."""
    basis_cache: dict = {}
    feasible = []
    for idx, res in enumerate(results):
        if not res.converged:
            continue
        traj = _trajectory_of(res, problem, basis_cache)
        if traj is None:
            continue
        if check_original_constraints(traj, problem, tol=tol).ok:
            feasible.append((idx, traj))
    return feasible


def feasible_fraction(results, problem: SwarmProblem, tol: float = 1e-3) -> float | None:
    """Fraction of results that converged and satisfy the original constraints.

    None (undefined) for an empty result sequence, never 0/0.
    """
    results = list(results)
    if not results:
        return None
    return len(feasible_results(results, problem, tol=tol)) / len(results)


def mean_pairwise_cosine(vectors) -> float:
    """Mean cosine similarity over all unordered pairs of flat vectors.

    A zero vector makes the metric undefined; NaN is returned in that case.
    """
    V = np.asarray(vectors, dtype=float)
    if V.ndim != 2:
        V = V.reshape(len(V), -1)
    if V.shape[0] < 2:
        raise TooFewSamples("need at least two vectors for pairwise cosine")
    norms = np.linalg.norm(V, axis=1)
    if np.any(norms == 0.0):
        return float("nan")
    U = V / norms[:, None]
    G = U @ U.T
    idx = np.triu_indices(V.shape[0], k=1)
    return float(G[idx].mean())


def diversity_cosine(trajectories, center: bool = True) -> float:
    """Diversity of a set of trajectories; see module docstring for the definition.

    ``center=False`` skips mean subtraction (raw cosine of position vectors).
    """
    trajectories = list(trajectories)
    if len(trajectories) < 2:
        raise TooFewSamples(
            f"need at least two trajectories, got {len(trajectories)}"
        )
    V = np.stack([t.positions.ravel() for t in trajectories])
    if center:
        V = V - V.mean(axis=0)
    return mean_pairwise_cosine(V)


def _nan_to_none(x):
    if x is None:
        return None
    x = float(x)
    return None if np.isnan(x) else x


@dataclass
class BatchReport:
    """Aggregated view of one filtered batch."""

    batch_size: int
    feasible_fraction: float | None
    mean_pairwise_cosine: float | None  # NaN when degenerate, None when < 2 feasible
    feasible_count: int
    converged_count: int
    failed_count: int
    residual_final: list[float]
    displacement: list[float]
    total_time: float
    per_proposal_time: list[float]
    tol: float
    feasible_indices: list[int] = field(default_factory=list)

    def to_jsonable(self) -> dict:
        return {
            "batch_size": self.batch_size,
            "feasible_fraction": _nan_to_none(self.feasible_fraction),
            "mean_pairwise_cosine": _nan_to_none(self.mean_pairwise_cosine),
            "diversity_definition": DIVERSITY_DEFINITION,
            "feasible_count": self.feasible_count,
            "converged_count": self.converged_count,
            "failed_count": self.failed_count,
            "residual_final": [_nan_to_none(r) for r in self.residual_final],
            "displacement": [_nan_to_none(d) for d in self.displacement],
            "total_time": self.total_time,
            "per_proposal_time": self.per_proposal_time,
            "tol": self.tol,
            "feasible_indices": self.feasible_indices,
        }


def build_batch_report(batch: BatchResult, problem: SwarmProblem, tol: float = 1e-3) -> BatchReport:
    results = batch.results
    feasible = feasible_results(results, problem, tol=tol)
    if len(feasible) >= 2:
        diversity = diversity_cosine([traj for _, traj in feasible])
    else:
        diversity = None
    return BatchReport(
        batch_size=len(results),
        feasible_fraction=(len(feasible) / len(results)) if results else None,
        mean_pairwise_cosine=diversity,
        feasible_count=len(feasible),
        converged_count=batch.n_converged,
        failed_count=batch.n_failed,
        residual_final=[r.final_residual_inf for r in results],
        displacement=[r.displacement for r in results],
        total_time=batch.wall_time,
        per_proposal_time=[r.solve_time for r in results],
        tol=tol,
        feasible_indices=[idx for idx, _ in feasible],
    )


# ---------------------------------------------------------------------------
# benchmark sweeps


@dataclass(frozen=True)
class BenchmarkGrid:
    """Sweep axes for the benchmark tables."""

    batch_sizes: tuple[int, ...] = (1, 10, 50)
    iteration_counts: tuple[int, ...] = (50, 100, 200, 400)
    strategies: tuple[str, ...] = ("zero", "projected", "warmstart")
    timing_batch: int = 10  # batch size for the iteration-count sweep
    trace_iters: int = 200  # iterations recorded per init strategy
    seed: int = 0
    spread: float = 0.25

    def __post_init__(self):
        known = {"zero", "projected", "warmstart"}
        bad = [s for s in self.strategies if s not in known]
        if bad:
            raise ValueError(f"unknown init strategies {bad}; choose from {sorted(known)}")
        if any(b < 1 for b in self.batch_sizes) or not self.batch_sizes:
            raise ValueError(f"batch sizes must be >= 1, got {self.batch_sizes}")
        if any(i < 1 for i in self.iteration_counts) or not self.iteration_counts:
            raise ValueError(
                f"iteration counts must be >= 1, got {self.iteration_counts}"
            )


def write_csv(path, metadata, header, rows) -> None:
    """CSV with '# key=value' metadata comment lines above the header."""
    with open(path, "w", newline="") as fh:
        for key, value in (metadata or {}).items():
            fh.write(f"# {key}={value}\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


_GNUPLOT = {
    "fig5a": (
        "feasible fraction vs batch size",
        "set xlabel 'batch size'\nset ylabel 'feasible fraction'\nset yrange [0:1.05]\n"
        "plot 'fig5a.csv' using 2:3 with linespoints title 'feasible fraction'\n",
    ),
    "fig5b": (
        "mean pairwise cosine of feasible solutions",
        "set xlabel 'row'\nset ylabel 'mean pairwise cosine'\n"
        "plot 'fig5b.csv' using 0:2 with linespoints title 'cosine'\n",
    ),
    "fig6": (
        "wall-clock time scaling",
        "set xlabel 'iterations'\nset ylabel 'seconds'\n"
        "plot 'fig6.csv' using 2:3 with linespoints title 'batch time'\n",
    ),
    "fig7": (
        "residual vs iteration per init strategy",
        "set xlabel 'iteration'\nset ylabel 'inf-norm residual'\nset logscale y\n"
        "plot for [s in strategies] 'fig7.csv' "
        "using (strcol(1) eq s ? $2 : 1/0):3 with lines title s\n",
    ),
}


def _write_gnuplot(out_dir, name, strategies=None):
    title, body = _GNUPLOT[name]
    lines = [
        "#!/usr/bin/env gnuplot",
        "set datafile separator ','",
        "set datafile commentschars '#'",
        "set key autotitle columnhead",
        f"set title '{title}'",
        "set terminal pngcairo size 800,600",
        f"set output '{name}.png'",
    ]
    if name == "fig7" and strategies is not None:
        lines.append(f"strategies = '{' '.join(strategies)}'")
    lines.append(body)
    path = out_dir / f"{name}.gp"
    path.write_text("\n".join(lines))
    return path


def benchmark(
    problem: SwarmProblem,
    grid: BenchmarkGrid,
    out_dir,
    config: SolverConfig | None = None,
    degree: int = 10,
    threads: int = 1,
    metadata: dict | None = None,
    tol_check: float = 1e-3,
) -> dict:
    """Run the three sweeps and emit fig5a/fig5b/fig6/fig7 CSVs + plot scripts.

    Feasibility and diversity rows (fig5a, fig5b) are deterministic in the
    grid seed; timing rows (fig6) obviously are not.  Returns a dict of
    output paths.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cfg = config if config is not None else SolverConfig()
    sf = SafetyFilter(problem, degree=degree, config=cfg)
    meta = dict(metadata or {})
    meta.setdefault("seed", grid.seed)
    meta.setdefault("diversity_definition", DIVERSITY_DEFINITION)

    paths = {}

    # --- feasibility and diversity vs batch size (fig5a, fig5b)
    rows_5a = []
    rows_5b = []
    for batch_size in grid.batch_sizes:
        props = sample_proposals(
            problem, sf.basis, batch_size, seed=grid.seed, spread=grid.spread
        )
        batch = sf.batch_solve(props.proposals, threads=threads)
        report = build_batch_report(batch, problem, tol=tol_check)
        rows_5a.append(
            [problem.n, batch_size, _format(report.feasible_fraction)]
        )
        rows_5b.append([problem.n, _format(report.mean_pairwise_cosine)])
    paths["fig5a"] = out_dir / "fig5a.csv"
    write_csv(paths["fig5a"], meta, ["n", "batch", "feasible_fraction"], rows_5a)
    paths["fig5b"] = out_dir / "fig5b.csv"
    write_csv(paths["fig5b"], meta, ["n", "mean_pairwise_cosine"], rows_5b)
    _write_gnuplot(out_dir, "fig5a")
    _write_gnuplot(out_dir, "fig5b")

    # --- wall-clock scaling (fig6): batch-size rows, then iteration rows at
    # a fixed batch; early stopping disabled so work is proportional to iters
    rows_6 = []
    for batch_size in grid.batch_sizes:
        props = sample_proposals(
            problem, sf.basis, batch_size, seed=grid.seed, spread=grid.spread
        )
        cfg_fixed = SolverConfig(
            rho=cfg.rho,
            max_iters=cfg.max_iters,
            tol_residual=cfg.tol_residual,
            tol_eq=cfg.tol_eq,
            early_stop=False,
        )
        t0 = time.perf_counter()
        sf.batch_solve(props.proposals, threads=threads, config=cfg_fixed)
        elapsed = time.perf_counter() - t0
        rows_6.append(
            [batch_size, cfg.max_iters, _format(elapsed), _format(elapsed / batch_size)]
        )
    props = sample_proposals(
        problem, sf.basis, grid.timing_batch, seed=grid.seed, spread=grid.spread
    )
    for iters in grid.iteration_counts:
        cfg_iters = SolverConfig(
            rho=cfg.rho,
            max_iters=iters,
            tol_residual=cfg.tol_residual,
            tol_eq=cfg.tol_eq,
            early_stop=False,
        )
        t0 = time.perf_counter()
        sf.batch_solve(props.proposals, threads=threads, config=cfg_iters)
        elapsed = time.perf_counter() - t0
        rows_6.append(
            [grid.timing_batch, iters, _format(elapsed), _format(elapsed / grid.timing_batch)]
        )
    paths["fig6"] = out_dir / "fig6.csv"
    write_csv(
        paths["fig6"],
        meta,
        ["batch", "iters", "seconds", "seconds_per_proposal"],
        rows_6,
    )
    _write_gnuplot(out_dir, "fig6")

    # --- residual trace per init strategy (fig7) on one sampled proposal
    props = sample_proposals(problem, sf.basis, 1, seed=grid.seed, spread=grid.spread)
    proposal = props.proposals[0]
    cfg_trace = SolverConfig(
        rho=cfg.rho,
        max_iters=grid.trace_iters,
        tol_residual=cfg.tol_residual,
        tol_eq=cfg.tol_eq,
        early_stop=False,
    )
    inits = {}
    if "zero" in grid.strategies:
        dim = proposal.size
        inits["zero"] = (np.zeros(dim), np.zeros(dim))
    if "projected" in grid.strategies:
        inits["projected"] = None  # solver default
    if "warmstart" in grid.strategies:
        prior = sf.solve(proposal, config=cfg_trace)
        inits["warmstart"] = WarmStart(xi0=prior.coeffs, lambda0=prior.multipliers)
    rows_7 = []
    for strategy in grid.strategies:
        res = sf.solve(proposal, init=inits[strategy], config=cfg_trace)
        for k in range(res.iterations):
            rows_7.append([strategy, k + 1, _format(float(res.residual_inf[k]))])
    paths["fig7"] = out_dir / "fig7.csv"
    write_csv(paths["fig7"], meta, ["strategy", "iter", "res_inf"], rows_7)
    _write_gnuplot(out_dir, "fig7", strategies=grid.strategies)

    for name in list(paths):
        paths[f"{name}_plot"] = out_dir / f"{name}.gp"
    return paths


def _format(x) -> str:
    if x is None:
        return "nan"
    return repr(float(x))


def save_report_json(report: BatchReport, path, metadata: dict | None = None) -> None:
    doc = {"metadata": dict(metadata or {}), "report": report.to_jsonable()}
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
