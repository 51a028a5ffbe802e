"""Alternating-minimization safety filter.

Each outer iteration, starting from coefficients xi^k and multipliers lam^k:

1. spherical step: per sampled pair difference and per centered position,
   closed-form update of (azimuth, polar, radial) with the radial factor
   clamped to [1, inf) for pairs and [0, 1] for workspace containment;
2. target rebuild: e^{k+1} from the new spherical variables;
3. multiplier step: lam^{k+1} = lam^k - rho F^T (F xi^k - e^{k+1});
4. coefficient step: equality-constrained quadratic solve via the cached
   saddle factorization with right-hand side rho F^T e^{k+1} + lam^{k+1}
   + proposal;
5. record the primal residual F xi^{k+1} - e^{k+1} (inf and l2 norms).

Runs for max_iters iterations, stopping early once the inf norm drops to
tol_residual unless early stopping is disabled (timing sweeps need a fixed
iteration count).
"""
from __future__ import annotations

import csv
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import kernels
from .assembly import (
    EqualitySystem,
    PairwiseOperator,
    SphericalVars,
    build_equality,
    build_pairwise_operator,
)
from .basis import build_basis
from .errors import DimensionMismatch, SwarmFilterError
from .problem import SwarmProblem, validate_problem
from .projection import project_to_boundary


@dataclass(frozen=True)
class SolverConfig:
    """Tuning knobs shared by every solve in a batch."""

    rho: float = 1.0
    max_iters: int = 200
    tol_residual: float = 1e-3
    tol_eq: float = 1e-8
    early_stop: bool = True

    def __post_init__(self):
        if not self.rho > 0:
            raise ValueError(f"rho must be positive, got {self.rho}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")
        if not self.tol_residual > 0:
            raise ValueError(f"tol_residual must be positive, got {self.tol_residual}")
        if not self.tol_eq > 0:
            raise ValueError(f"tol_eq must be positive, got {self.tol_eq}")


@dataclass
class SolveResult:
    """Outcome of filtering one proposal.

    ``residual_inf`` and ``residual_l2`` hold one entry per iteration run.
    ``converged`` means the final inf-norm residual is at or below the
    tolerance in effect.  ``displacement`` is the l2 distance between the
    returned coefficients and the proposal.  A failed solve carries the
    message in ``error`` and None coefficients.
    """

    coeffs: np.ndarray | None
    multipliers: np.ndarray | None
    residual_inf: np.ndarray
    residual_l2: np.ndarray
    iterations: int
    converged: bool
    displacement: float
    solve_time: float
    svars: SphericalVars | None = None  # spherical variables of the last iteration
    error: str | None = None

    @property
    def final_residual_inf(self) -> float:
        return float(self.residual_inf[-1]) if self.iterations else np.inf

    def to_jsonable(self, n: int | None = None) -> dict:
        """JSON-friendly dict; coefficients nested per robot per axis when
        ``n`` is given, flat otherwise."""
        if self.coeffs is None:
            coeffs = None
        elif n is None:
            coeffs = self.coeffs.tolist()
        else:
            coeffs = self.coeffs.reshape(3, n, -1).transpose(1, 0, 2).tolist()
        return {
            "converged": self.converged,
            "iterations": self.iterations,
            "displacement": self.displacement,
            "solve_time": self.solve_time,
            "residual_inf": np.asarray(self.residual_inf).tolist(),
            "residual_l2": np.asarray(self.residual_l2).tolist(),
            "coefficients": coeffs,
            "multipliers": None if self.multipliers is None else self.multipliers.tolist(),
            "error": self.error,
        }


def _failed_result(message: str, elapsed: float) -> SolveResult:
    return SolveResult(
        coeffs=None,
        multipliers=None,
        residual_inf=np.empty(0),
        residual_l2=np.empty(0),
        iterations=0,
        converged=False,
        displacement=np.nan,
        solve_time=elapsed,
        error=message,
    )


@dataclass
class BatchResult:
    """Results for a batch of proposals plus the batch wall-clock time."""

    results: list[SolveResult]
    wall_time: float
    threads: int = 1

    @property
    def n_converged(self) -> int:
        return sum(1 for r in self.results if r.converged)

    @property
    def n_failed(self) -> int:
        return sum(1 for r in self.results if r.error is not None)


def _spherical_blocks(diffs, rel, problem):
    """Kernel calls for both constraint families.

    diffs: (3, n_pairs, samples) pair differences; rel: (3, n, samples)
    positions relative to the workspace center.  Returns (svars, pair
    targets (3, n_pairs, samples), centered workspace targets (3, n,
    samples) without the center offset).
    """
    p_az, p_pol, p_rad, ptx, pty, ptz = kernels.spherical_project(
        diffs[0].ravel(), diffs[1].ravel(), diffs[2].ravel(),
        problem.shape.lateral, problem.shape.vertical, 1.0, np.inf,
    )
    w_az, w_pol, w_rad, wtx, wty, wtz = kernels.spherical_project(
        rel[0].ravel(), rel[1].ravel(), rel[2].ravel(),
        problem.workspace.lateral, problem.workspace.vertical, 0.0, 1.0,
    )
    pair_shape = diffs.shape[1:]
    ws_shape = rel.shape[1:]
    svars = SphericalVars(
        pair_azimuth=p_az.reshape(pair_shape),
        pair_polar=p_pol.reshape(pair_shape),
        pair_radial=p_rad.reshape(pair_shape),
        ws_azimuth=w_az.reshape(ws_shape),
        ws_polar=w_pol.reshape(ws_shape),
        ws_radial=w_rad.reshape(ws_shape),
    )
    pair_targets = np.stack(
        [ptx.reshape(pair_shape), pty.reshape(pair_shape), ptz.reshape(pair_shape)]
    )
    ws_targets = np.stack(
        [wtx.reshape(ws_shape), wty.reshape(ws_shape), wtz.reshape(ws_shape)]
    )
    return svars, pair_targets, ws_targets


def spherical_step(coeffs, operator: PairwiseOperator, problem: SwarmProblem) -> SphericalVars:
    """Closed-form block update of all spherical variables for given coefficients."""
    pos = operator.positions(operator.axes(coeffs))
    diffs = operator.pair_diffs(pos)
    rel = pos - problem.workspace.center[:, None, None]
    svars, _, _ = _spherical_blocks(diffs, rel, problem)
    return svars


def multiplier_update(multipliers, coeffs, rhs, operator: PairwiseOperator, rho: float) -> np.ndarray:
    """lam - rho F^T (F xi - e) for flat arguments.

    The multiplier enters the objective as -<lam, xi> and the coefficient
    step's right-hand side as +lam, which makes this the ascent direction on
    the relaxed equality constraints: substituting lam = -F^T mu turns it
    into the textbook update mu <- mu + rho (F xi - e).
    """
    lam = np.asarray(multipliers, dtype=float).ravel()
    if lam.size != operator.coeff_dim:
        raise DimensionMismatch(
            f"multiplier vector has length {lam.size}, expected {operator.coeff_dim}"
        )
    return lam - rho * operator.apply_transpose(operator.apply(coeffs) - rhs)


def coefficient_step(
    proposal,
    rhs,
    multipliers,
    equality: EqualitySystem,
    operator: PairwiseOperator,
    rho: float,
    tol_eq: float = 1e-8,
) -> np.ndarray:
    """Equality-constrained quadratic solve for new coefficients.

    Minimizes 0.5 ||xi - proposal||^2 + 0.5 rho ||F xi - rhs||^2 - <multipliers, xi>
    subject to the endpoint conditions.
    """
    xi_bar = np.asarray(proposal, dtype=float).ravel()
    lam = np.asarray(multipliers, dtype=float).ravel()
    eta = rho * operator.apply_transpose(rhs) + lam + xi_bar
    fact = operator.kkt_factorization(equality, rho)
    C = fact.solve(eta.reshape(3, -1), equality.rhs_axes, tol_eq)
    return C.ravel()


class SafetyFilter:
    """Shared, reusable state for filtering proposals against one problem.

    Holds the basis, the endpoint system, the stacked operator and the
    saddle factorization; all of it is immutable across solves, so one
    instance can serve a whole batch (including threaded batches).
    """

    def __init__(
        self,
        problem: SwarmProblem,
        degree: int = 10,
        config: SolverConfig | None = None,
        validate: bool = True,
    ):
        if validate:
            validate_problem(problem)
        self.problem = problem
        self.config = config if config is not None else SolverConfig()
        self.basis = build_basis(
            problem.duration, degree=degree, samples=problem.horizon_samples
        )
        self.equality = build_equality(problem, self.basis)
        self.operator = build_pairwise_operator(problem, self.basis)
        # warm the factorization cache so threaded batches never race to build it
        self.operator.kkt_factorization(self.equality, self.config.rho)

    @property
    def coeff_dim(self) -> int:
        return self.operator.coeff_dim

    def _check_vector(self, vec, what) -> np.ndarray:
        arr = np.asarray(vec, dtype=float).ravel()
        if arr.size != self.coeff_dim:
            raise DimensionMismatch(
                f"{what} has length {arr.size}, expected {self.coeff_dim} "
                f"(n={self.problem.n}, degree={self.basis.degree})"
            )
        return arr

    def initial_state(self, proposal, init=None):
        """Starting (coefficients, multipliers) for a proposal.

        Default: project the proposal onto the endpoint conditions and start
        multipliers at zero.  ``init`` may be an (coeffs, multipliers) pair
        or a previous SolveResult (warm start).
        """
        xi_bar = self._check_vector(proposal, "proposal")
        if init is None:
            return project_to_boundary(xi_bar, self.equality), np.zeros(self.coeff_dim)
        if isinstance(init, SolveResult):
            if init.coeffs is None:
                raise SwarmFilterError("cannot warm start from a failed result")
            init = (init.coeffs, init.multipliers)
        elif hasattr(init, "xi0"):  # proposals.WarmStart, without the import cycle
            init = (init.xi0, init.lambda0)
        coeffs0, mult0 = init
        return (
            self._check_vector(coeffs0, "initial coefficients").copy(),
            self._check_vector(mult0, "initial multipliers").copy(),
        )

    def solve(self, proposal, init=None, config: SolverConfig | None = None) -> SolveResult:
        cfg = config if config is not None else self.config
        start = time.perf_counter()
        xi_bar = self._check_vector(proposal, "proposal")
        coeffs0, mult0 = self.initial_state(xi_bar, init)

        op = self.operator
        eq = self.equality
        problem = self.problem
        fact = op.kkt_factorization(eq, cfg.rho)
        center = problem.workspace.center[:, None, None]
        W_T = self.basis.value.T

        n = problem.n
        per_axis = n * (self.basis.degree + 1)
        xi_bar_axes = xi_bar.reshape(3, n, -1)
        C = coeffs0.reshape(3, n, -1)
        mult = mult0.reshape(3, n, -1)

        pos = C @ W_T
        diffs = op.pair_diffs(pos)
        rel = pos - center

        inf_hist = np.empty(cfg.max_iters)
        l2_hist = np.empty(cfg.max_iters)
        iterations = 0
        svars = None

        for k in range(cfg.max_iters):
            svars, pair_t, ws_t = _spherical_blocks(diffs, rel, problem)

            # multiplier step uses the pre-update coefficients; descent sign
            # pairs with the +mult term in eta (see multiplier_update)
            mult = mult - cfg.rho * op.apply_transpose_blocks(
                diffs - pair_t, rel - ws_t
            )

            eta = (
                cfg.rho * op.apply_transpose_blocks(pair_t, ws_t + center)
                + mult
                + xi_bar_axes
            )
            C = fact.solve(eta.reshape(3, per_axis), eq.rhs_axes, cfg.tol_eq)

            pos = C @ W_T
            diffs = op.pair_diffs(pos)
            rel = pos - center
            r_pair = diffs - pair_t
            r_ws = rel - ws_t

            sq = float(np.vdot(r_pair, r_pair) + np.vdot(r_ws, r_ws))
            inf = max(
                float(np.abs(r_pair).max()) if r_pair.size else 0.0,
                float(np.abs(r_ws).max()),
            )
            inf_hist[k] = inf
            l2_hist[k] = np.sqrt(sq)
            iterations = k + 1
            if cfg.early_stop and inf <= cfg.tol_residual:
                break

        coeffs = C.reshape(-1).copy()
        elapsed = time.perf_counter() - start
        return SolveResult(
            coeffs=coeffs,
            multipliers=mult.reshape(-1).copy(),
            residual_inf=inf_hist[:iterations].copy(),
            residual_l2=l2_hist[:iterations].copy(),
            iterations=iterations,
            converged=bool(inf_hist[iterations - 1] <= cfg.tol_residual),
            displacement=float(np.linalg.norm(coeffs - xi_bar)),
            solve_time=elapsed,
            svars=svars,
        )

    def _solve_guarded(self, proposal, init, config) -> SolveResult:
        start = time.perf_counter()
        try:
            return self.solve(proposal, init=init, config=config)
        except (SwarmFilterError, np.linalg.LinAlgError, ValueError) as exc:
            return _failed_result(f"{type(exc).__name__}: {exc}", time.perf_counter() - start)

    def batch_solve(
        self,
        proposals,
        inits=None,
        threads: int = 1,
        config: SolverConfig | None = None,
    ) -> BatchResult:
        """Filter every proposal; one failure never aborts the batch.

        Results keep the order of the proposals regardless of thread count,
        and each solve is deterministic, so outputs do not depend on
        ``threads``.
        """
        proposals = list(proposals)
        if inits is None:
            inits = [None] * len(proposals)
        else:
            inits = list(inits)
            if len(inits) != len(proposals):
                raise DimensionMismatch(
                    f"got {len(inits)} warm starts for {len(proposals)} proposals"
                )
        start = time.perf_counter()
        if threads <= 1 or len(proposals) <= 1:
            results = [
                self._solve_guarded(p, i, config) for p, i in zip(proposals, inits)
            ]
        else:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                results = list(
                    pool.map(
                        lambda pi: self._solve_guarded(pi[0], pi[1], config),
                        zip(proposals, inits),
                    )
                )
        return BatchResult(
            results=results,
            wall_time=time.perf_counter() - start,
            threads=max(1, threads),
        )


def write_residuals_csv(path, results, metadata=None) -> None:
    """Residual histories of a batch: columns proposal_id, iter, res_inf, res_l2.

    Metadata key/value pairs become '# key=value' comment lines.  Iterations
    are 1-based to match iteration counts elsewhere.
    """
    with open(path, "w", newline="") as fh:
        for key, value in (metadata or {}).items():
            fh.write(f"# {key}={value}\n")
        writer = csv.writer(fh)
        writer.writerow(["proposal_id", "iter", "res_inf", "res_l2"])
        for pid, res in enumerate(results):
            for k in range(res.iterations):
                writer.writerow(
                    [pid, k + 1, repr(float(res.residual_inf[k])), repr(float(res.residual_l2[k]))]
                )


def _infer_degree(proposal, problem: SwarmProblem) -> int:
    size = np.asarray(proposal).ravel().size
    per_axis = size // (3 * problem.n)
    if per_axis * 3 * problem.n != size or per_axis < 1:
        raise DimensionMismatch(
            f"proposal length {size} does not factor as 3 * {problem.n} * (degree + 1)"
        )
    return per_axis - 1


def solve(proposal, problem: SwarmProblem, init=None, config: SolverConfig | None = None) -> SolveResult:
    """One-off convenience wrapper; the degree is inferred from the proposal."""
    sf = SafetyFilter(problem, degree=_infer_degree(proposal, problem), config=config)
    return sf.solve(proposal, init=init)


def batch_solve(
    proposals,
    problem: SwarmProblem,
    inits=None,
    threads: int = 1,
    config: SolverConfig | None = None,
) -> BatchResult:
    """Batch convenience wrapper sharing one SafetyFilter across proposals."""
    proposals = list(proposals)
    if not proposals:
        return BatchResult(results=[], wall_time=0.0, threads=max(1, threads))
    sf = SafetyFilter(
        problem, degree=_infer_degree(proposals[0], problem), config=config
    )
    return sf.batch_solve(proposals, inits=inits, threads=threads, config=config)
