"""Proposal batches: a built-in stochastic sampler plus file ingestion.

The sampler stands in for an external generative model: it perturbs the
straight start-to-goal coefficient fit with smooth, zero-mean noise and
projects each sample onto the endpoint conditions.  File formats are plain
JSON so external pipelines can produce compatible batches and warm-starts:

    proposals:   {"dim", "count", "data": [[...], ...],
                  "generated_for": {"n", "m", "H"}, "provenance", "seed"}
    warm starts: {"dim", "count", "xi": [[...], ...], "lambda": [[...], ...],
                  "generated_for": {"n", "m", "H"}}

``data`` rows are flat axis-major coefficient vectors (length dim).
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .assembly import build_equality
from .basis import BasisMatrices, build_basis
from .errors import DimensionMismatch, SchemaMismatch
from .problem import SwarmProblem

# Variance ratio between consecutive coefficient indices; keeps noise on
# high-index coefficients from dominating so samples stay smooth.
VARIANCE_DECAY = 0.7

# A loaded proposal whose endpoint residual exceeds this (relative to the
# right-hand side) gets re-projected and the batch flagged.
BOUNDARY_RTOL = 1e-8


@dataclass(frozen=True)
class ProposalBatch:
    """A batch of flat coefficient vectors, shape (count, dim)."""

    proposals: np.ndarray
    provenance: str  # "sampled" or "loaded"
    seed: int | None = None
    projected_on_load: bool = False

    def __len__(self) -> int:
        return self.proposals.shape[0]

    def __iter__(self):
        return iter(self.proposals)

    @property
    def dim(self) -> int:
        return self.proposals.shape[1]


@dataclass(frozen=True)
class WarmStart:
    """Initial coefficients and multipliers for one solve."""

    xi0: np.ndarray
    lambda0: np.ndarray


def straight_line_coeffs(problem: SwarmProblem, basis: BasisMatrices) -> np.ndarray:
    """Coefficients of the straight start-to-goal line for every robot.

    Evenly spaced control points reproduce linear motion exactly for any
    degree; endpoint velocity and acceleration pins are handled later by
    projection.
    """
    m1 = basis.degree + 1
    C = np.empty((3, problem.n, m1))
    frac = np.linspace(0.0, 1.0, m1)
    for i, rb in enumerate(problem.boundary):
        seg = rb.start.position[:, None] + (
            rb.goal.position - rb.start.position
        )[:, None] * frac
        C[:, i, :] = seg
    return C.ravel()


def sample_proposals(
    problem: SwarmProblem,
    basis: BasisMatrices,
    count: int,
    seed: int,
    spread: float = 0.25,
) -> ProposalBatch:
    """Draw ``count`` boundary-projected proposals around the straight-line fit.

    Noise is zero-mean Gaussian per coefficient with standard deviation
    ``spread * extent * VARIANCE_DECAY**(k/2)`` for coefficient index k,
    where extent is the workspace semiaxis of that axis.  Deterministic in
    ``seed``; ``spread=0`` returns ``count`` copies of the projected
    straight-line fit.
    """
    if count < 0:
        raise ValueError(f"count must be >= 0, got {count}")
    if spread < 0:
        raise ValueError(f"spread must be >= 0, got {spread}")
    dim = 3 * problem.n * (basis.degree + 1)
    if count == 0:
        return ProposalBatch(
            proposals=np.empty((0, dim)), provenance="sampled", seed=seed
        )

    from .projection import project_to_boundary

    equality = build_equality(problem, basis)
    base = straight_line_coeffs(problem, basis)

    rng = np.random.default_rng(seed)
    m1 = basis.degree + 1
    extent = np.array(
        [problem.workspace.lateral, problem.workspace.lateral, problem.workspace.vertical]
    )
    scale = (
        spread
        * extent[:, None, None]
        * VARIANCE_DECAY ** (np.arange(m1) / 2.0)[None, None, :]
    )  # shape (3, 1, m+1), broadcast over robots
    noise = rng.standard_normal((count, 3, problem.n, m1))
    noise *= scale[None]

    batch = np.empty((count, dim))
    for s in range(count):
        batch[s] = project_to_boundary(base + noise[s].ravel(), equality)
    return ProposalBatch(proposals=batch, provenance="sampled", seed=seed)


def _generated_for(problem: SwarmProblem, degree: int) -> dict:
    return {"n": problem.n, "m": degree, "H": problem.horizon_samples - 1}


def save_proposals(batch: ProposalBatch, path, problem: SwarmProblem | None = None) -> None:
    """Write a batch as JSON; float round-trip is exact (repr serialization)."""
    doc = {
        "dim": int(batch.dim),
        "count": len(batch),
        "data": batch.proposals.tolist(),
        "provenance": batch.provenance,
        "seed": batch.seed,
    }
    if problem is not None and batch.dim % (3 * problem.n) == 0:
        doc["generated_for"] = _generated_for(
            problem, batch.dim // (3 * problem.n) - 1
        )
    with open(path, "w") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def _load_json(path):
    path = Path(path)
    if not path.exists():
        raise SchemaMismatch(f"no such file: {path}")
    with open(path) as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaMismatch(f"{path} is not valid JSON: {exc}") from exc


def _check_rows(doc, key, path) -> np.ndarray:
    if key not in doc:
        raise SchemaMismatch(f"{path} missing key '{key}'")
    try:
        arr = np.asarray(doc[key], dtype=float)
    except (TypeError, ValueError) as exc:
        raise SchemaMismatch(f"{path}: '{key}' is not a numeric array: {exc}") from exc
    if arr.ndim == 1 and arr.size == 0:
        arr = arr.reshape(0, int(doc.get("dim", 0)))
    if arr.ndim != 2:
        raise SchemaMismatch(f"{path}: '{key}' must be a list of rows")
    return arr


def _expected_dim(arr: np.ndarray, doc, problem: SwarmProblem, path) -> int:
    dim = int(doc.get("dim", arr.shape[1]))
    if arr.shape[1] != dim:
        raise SchemaMismatch(
            f"{path}: rows have length {arr.shape[1]}, 'dim' says {dim}"
        )
    if dim % (3 * problem.n) != 0 or dim < 3 * problem.n:
        raise DimensionMismatch(
            f"{path}: coefficient length {dim} does not factor as "
            f"3 * {problem.n} * (degree + 1)"
        )
    gen = doc.get("generated_for")
    if gen is not None:
        if int(gen.get("n", problem.n)) != problem.n:
            raise DimensionMismatch(
                f"{path}: generated for n={gen['n']}, problem has n={problem.n}"
            )
        if int(gen.get("H", problem.horizon_samples - 1)) != problem.horizon_samples - 1:
            raise DimensionMismatch(
                f"{path}: generated for H={gen['H']}, problem has "
                f"H={problem.horizon_samples - 1}"
            )
        if int(gen.get("m", dim // (3 * problem.n) - 1)) != dim // (3 * problem.n) - 1:
            raise DimensionMismatch(
                f"{path}: 'generated_for.m' disagrees with row length {dim}"
            )
    return dim


def load_proposals(path, problem: SwarmProblem) -> ProposalBatch:
    """Read a proposal batch and ensure it is boundary-feasible.

    Rows whose endpoint residual exceeds the tolerance are projected onto
    the endpoint conditions; the batch is then flagged as projected_on_load.
    """
    doc = _load_json(path)
    arr = _check_rows(doc, "data", path)
    dim = _expected_dim(arr, doc, problem, path)
    degree = dim // (3 * problem.n) - 1

    projected = False
    if arr.shape[0]:
        basis = build_basis(
            problem.duration, degree=degree, samples=problem.horizon_samples
        )
        equality = build_equality(problem, basis)
        from .projection import project_to_boundary

        tol = BOUNDARY_RTOL * (1.0 + float(np.abs(equality.rhs).max()))
        for s in range(arr.shape[0]):
            if float(np.abs(equality.residual(arr[s])).max()) > tol:
                arr[s] = project_to_boundary(arr[s], equality)
                projected = True

    seed = doc.get("seed")
    return ProposalBatch(
        proposals=arr,
        provenance="loaded",
        seed=None if seed is None else int(seed),
        projected_on_load=projected,
    )


def save_warmstarts(starts, path, problem: SwarmProblem | None = None) -> None:
    """Write warm starts (pairs of coefficient/multiplier vectors) as JSON."""
    starts = list(starts)
    xi = np.asarray([np.asarray(w.xi0, dtype=float).ravel() for w in starts])
    lam = np.asarray([np.asarray(w.lambda0, dtype=float).ravel() for w in starts])
    dim = int(xi.shape[1]) if starts else 0
    doc = {
        "dim": dim,
        "count": len(starts),
        "xi": xi.tolist(),
        "lambda": lam.tolist(),
    }
    if problem is not None and starts and dim % (3 * problem.n) == 0:
        doc["generated_for"] = _generated_for(problem, dim // (3 * problem.n) - 1)
    with open(path, "w") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_warmstart(path, problem: SwarmProblem) -> list[WarmStart]:
    """Read warm starts; lengths are validated against the problem."""
    doc = _load_json(path)
    xi = _check_rows(doc, "xi", path)
    lam = _check_rows(doc, "lambda", path)
    if xi.shape != lam.shape:
        raise SchemaMismatch(
            f"{path}: 'xi' shape {xi.shape} != 'lambda' shape {lam.shape}"
        )
    if xi.shape[0]:
        _expected_dim(xi, doc, problem, path)
    return [WarmStart(xi0=xi[s], lambda0=lam[s]) for s in range(xi.shape[0])]
