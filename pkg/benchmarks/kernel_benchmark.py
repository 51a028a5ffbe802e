"""Compare the compiled spherical-projection kernel with the numpy fallback.

Times the raw kernel on batched inputs of several sizes, then a full
filter solve on the bundled 4-robot crossing scenario, once per backend.

    python3 benchmarks/kernel_benchmark.py [--sizes 1000,10000,100000]
        [--repeats 20] [--scenario scenarios/crossing4.json]
"""
import argparse
import time
from pathlib import Path

import numpy as np

from swarmfilter import SafetyFilter, load_problem, sample_proposals
from swarmfilter.kernels import available_backends, use_backend
from swarmfilter.kernels import spherical_project

ROOT = Path(__file__).resolve().parent.parent


def time_kernel(size: int, repeats: int, rng) -> float:
    """Best-of-N wall time for one kernel call on `size` random states."""
    dx, dy, dz = rng.standard_normal((3, size))
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        spherical_project(dx, dy, dz, 1.2, 0.8, 1.0, np.inf)
        best = min(best, time.perf_counter() - t0)
    return best


def time_solve(problem, count: int, seed: int) -> tuple[float, int]:
    sf = SafetyFilter(problem, degree=10)
    props = sample_proposals(problem, sf.basis, count, seed=seed)
    t0 = time.perf_counter()
    batch = sf.batch_solve(props.proposals)
    return time.perf_counter() - t0, batch.n_converged


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", default="100,300,1000,10000",
                        help="comma-separated kernel batch sizes")
    parser.add_argument("--repeats", type=int, default=20,
                        help="timing repeats per measurement (best is kept)")
    parser.add_argument("--count", type=int, default=20,
                        help="proposals for the full-solve comparison")
    parser.add_argument("--scenario", default=str(ROOT / "scenarios/crossing4.json"))
    args = parser.parse_args()

    sizes = [int(s) for s in args.sizes.split(",") if s]
    backends = available_backends()
    print(f"backends: {', '.join(backends)}")
    if "compiled" not in backends:
        print("note: compiled extension not importable, timing the fallback only")

    rng = np.random.default_rng(0)
    kernel_rows = {}
    for name in backends:
        use_backend(name)
        kernel_rows[name] = [time_kernel(s, args.repeats, rng) for s in sizes]

    print(f"\nraw kernel, best of {args.repeats} (seconds)")
    print(f"{'size':>10}  " + "  ".join(f"{n:>12}" for n in backends))
    for i, size in enumerate(sizes):
        cells = "  ".join(f"{kernel_rows[n][i]:12.6f}" for n in backends)
        print(f"{size:>10}  {cells}")
    if len(backends) == 2:
        ref, comp = kernel_rows["reference"], kernel_rows["compiled"]
        speedups = ", ".join(
            f"{size}: {r / c:.1f}x" for size, r, c in zip(sizes, ref, comp)
        )
        print(f"compiled speedup over reference: {speedups}")

    problem = load_problem(args.scenario)
    print(f"\nfull solve, {args.count} proposals, n={problem.n}, "
          f"H={problem.horizon_samples - 1}")
    for name in backends:
        use_backend(name)
        elapsed, converged = time_solve(problem, args.count, seed=0)
        print(f"{name:>12}: {elapsed:8.3f}s total, "
              f"{elapsed / args.count * 1e3:7.1f} ms/proposal, "
              f"{converged}/{args.count} converged")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
