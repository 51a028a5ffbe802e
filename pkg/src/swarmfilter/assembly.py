"""Constraint assembly: equality system, stacked sampling operator, targets.

Vector layout
-------------
The stacked inequality operator F maps a flat coefficient vector to sampled
quantities, one block per axis (x, y, z); within an axis the pair block
comes first, then the workspace block:

    F xi = [ D_x ; P_x ; D_y ; P_y ; D_z ; P_z ]

where D_ax holds pairwise position differences (pair-major, time-minor; pairs
ordered lexicographically (i, j) with i < j) and P_ax holds the sampled
positions of every robot (robot-major, time-minor).  The spherical target
vector e built by build_spherical_rhs follows the same layout, with the
workspace block offset by the workspace center.

The equality system A xi = b pins position, velocity and acceleration at both
ends of the horizon; rows are axis-major, then robot, then the six conditions
(p0, v0, a0, pT, vT, aT).
"""
from __future__ import annotations

import threading
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse

from .basis import BasisMatrices, Trajectory, coeffs_to_axis_major
from .errors import DimensionMismatch, RankDeficient, SingularKKT
from .problem import SwarmProblem, pair_margin, workspace_margin

CONDITIONS_PER_AXIS = 6  # p, v, a at both ends

# LAPACK triangular solves are not reentrant in every build (concurrent
# getrs calls can corrupt the heap); all factor/solve calls share one lock
# so threaded batches stay safe.  Reentrant: the cache path factors under it.
LAPACK_LOCK = threading.RLock()


def endpoint_rows(basis: BasisMatrices) -> np.ndarray:
    """The 6 x (degree + 1) block sampling (p0, v0, a0, pT, vT, aT)."""
    return np.vstack(
        [
            basis.value[0],
            basis.velocity[0],
            basis.acceleration[0],
            basis.value[-1],
            basis.velocity[-1],
            basis.acceleration[-1],
        ]
    )


@dataclass
class EqualitySystem:
    """Endpoint conditions for every robot and axis.

    The full matrix is block diagonal over axes with kron(I_n, block) per
    axis; only the shared 6 x (degree + 1) block and a Cholesky factor of
    block @ block.T are stored.  ``rhs_axes`` has shape (3, n, 6).
    """

    n: int
    degree: int
    block: np.ndarray
    rhs_axes: np.ndarray
    gram_chol: tuple = field(repr=False)
    _matrix: scipy.sparse.csr_matrix | None = field(default=None, repr=False)

    @property
    def rows(self) -> int:
        return 3 * self.n * CONDITIONS_PER_AXIS

    @property
    def coeff_dim(self) -> int:
        return 3 * self.n * (self.degree + 1)

    @property
    def rhs(self) -> np.ndarray:
        return self.rhs_axes.ravel()

    def matrix(self) -> scipy.sparse.csr_matrix:
        """Explicit sparse A, assembled on first use."""
        if self._matrix is None:
            per_axis = scipy.sparse.kron(
                scipy.sparse.eye(self.n), scipy.sparse.csr_matrix(self.block)
            )
            self._matrix = scipy.sparse.block_diag([per_axis] * 3, format="csr")
        return self._matrix

    def apply(self, coeffs) -> np.ndarray:
        """A @ xi without materializing A."""
        C = coeffs_to_axis_major(coeffs, self.n, self.degree)
        return np.einsum("ank,ck->anc", C, self.block).ravel()

    def residual(self, coeffs) -> np.ndarray:
        return self.apply(coeffs) - self.rhs


def build_equality(problem: SwarmProblem, basis: BasisMatrices) -> EqualitySystem:
    """Assemble the endpoint system for a problem on a given basis."""
    if basis.samples != problem.horizon_samples:
        raise DimensionMismatch(
            f"basis has {basis.samples} samples, problem expects "
            f"{problem.horizon_samples}"
        )
    block = endpoint_rows(basis)
    gram = block @ block.T
    try:
        with LAPACK_LOCK:
            gram_chol = scipy.linalg.cho_factor(gram)
    except scipy.linalg.LinAlgError as exc:
        raise RankDeficient(
            "endpoint condition rows are linearly dependent; "
            f"degree {basis.degree} with duration {basis.duration}"
        ) from exc

    rhs_axes = np.empty((3, problem.n, CONDITIONS_PER_AXIS))
    for i, rb in enumerate(problem.boundary):
        for ax in range(3):
            rhs_axes[ax, i] = (
                rb.start.position[ax],
                rb.start.velocity[ax],
                rb.start.acceleration[ax],
                rb.goal.position[ax],
                rb.goal.velocity[ax],
                rb.goal.acceleration[ax],
            )

    return EqualitySystem(
        n=problem.n,
        degree=basis.degree,
        block=block,
        rhs_axes=rhs_axes,
        gram_chol=gram_chol,
    )


class KktFactorization:
    """LU factors of the coefficient-step saddle system for one penalty weight.

    The system couples the regularized quadratic with the endpoint
    constraints:

        [ I + rho F_ax^T F_ax   A_ax^T ] [ xi_ax ]   [ eta_ax ]
        [ A_ax                  0      ] [ nu    ] = [ b_ax   ]

    One factorization serves all three axes because F and A share the same
    per-axis structure.  Explicit inverses are never formed.
    """

    def __init__(self, equality: EqualitySystem, operator, rho: float):
        # rho = 0 degenerates to the plain endpoint projection QP, still well
        # posed for full-rank A; the solver config separately requires rho > 0.
        if not rho >= 0:
            raise ValueError(f"penalty weight must be nonnegative, got {rho}")
        self.rho = float(rho)
        n = operator.n
        coeff = n * (equality.degree + 1)
        eq_rows = n * CONDITIONS_PER_AXIS

        W = operator.basis.value
        gram_w = W.T @ W
        incidence_gram = operator.incidence.T @ operator.incidence + np.eye(n)
        Q = np.kron(incidence_gram, gram_w)
        Q *= self.rho
        Q[np.diag_indices_from(Q)] += 1.0

        A_ax = np.kron(np.eye(n), equality.block)
        size = coeff + eq_rows
        K = np.zeros((size, size))
        K[:coeff, :coeff] = Q
        K[:coeff, coeff:] = A_ax.T
        K[coeff:, :coeff] = A_ax
        self.matrix = K
        self.coeff = coeff
        self.eq_rows = eq_rows
        try:
            with LAPACK_LOCK:
                self.lu = scipy.linalg.lu_factor(K)
        except scipy.linalg.LinAlgError as exc:
            raise SingularKKT("saddle system factorization failed") from exc

    def solve(self, eta_axes: np.ndarray, rhs_eq_axes: np.ndarray, tol_eq: float):
        """Solve for all three axes at once.

        eta_axes: (3, n (degree+1)); rhs_eq_axes: (3, n, 6).  Returns
        coefficients shaped (3, n, degree + 1).  The endpoint rows of the
        solution are verified to ``tol_eq``; one iterative refinement pass is
        attempted before giving up with SingularKKT.
        """
        rhs = np.empty((self.coeff + self.eq_rows, 3))
        rhs[: self.coeff] = eta_axes.reshape(3, self.coeff).T
        rhs[self.coeff :] = rhs_eq_axes.reshape(3, self.eq_rows).T

        def eq_err(s):
            return float(np.abs(self.matrix[self.coeff :] @ s - rhs[self.coeff :]).max())

        with LAPACK_LOCK:
            sol = scipy.linalg.lu_solve(self.lu, rhs)
            err = eq_err(sol)
            for _ in range(4):  # iterative refinement, ill conditioning at large rho
                if err <= tol_eq:
                    break
                sol = sol + scipy.linalg.lu_solve(self.lu, rhs - self.matrix @ sol)
                new_err = eq_err(sol)
                if new_err >= err:  # stagnated
                    err = new_err
                    break
                err = new_err
        if err > tol_eq:
            raise SingularKKT(
                f"endpoint conditions missed by {err:.3e} after refinement "
                f"(tolerance {tol_eq:.3e})"
            )
        n = self.eq_rows // CONDITIONS_PER_AXIS
        return sol[: self.coeff].T.reshape(3, n, -1)


class PairwiseOperator:
    """Stacked sampling operator F (pairwise differences + positions).

    Construction happens once per problem; apply/transpose paths use the
    kron structure instead of the explicit matrix.  ``matrix()`` assembles
    the sparse form for verification and reporting.
    """

    def __init__(self, n: int, basis: BasisMatrices):
        if n < 1:
            raise DimensionMismatch(f"need at least one robot, got n={n}")
        self.n = n
        self.basis = basis
        pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
        self.pair_i = np.array([p[0] for p in pairs], dtype=np.intp)
        self.pair_j = np.array([p[1] for p in pairs], dtype=np.intp)
        incidence = np.zeros((len(pairs), n))
        incidence[np.arange(len(pairs)), self.pair_i] = 1.0
        incidence[np.arange(len(pairs)), self.pair_j] = -1.0
        self.incidence = incidence
        self._matrix = None
        self._kkt_cache: dict[float, KktFactorization] = {}
        self._kkt_equality: EqualitySystem | None = None

    @property
    def n_pairs(self) -> int:
        return self.pair_i.size

    @property
    def samples(self) -> int:
        return self.basis.samples

    @property
    def pair_rows(self) -> int:
        return self.n_pairs * self.samples

    @property
    def ws_rows(self) -> int:
        return self.n * self.samples

    @property
    def axis_rows(self) -> int:
        return self.pair_rows + self.ws_rows

    @property
    def rows(self) -> int:
        return 3 * self.axis_rows

    @property
    def coeff_dim(self) -> int:
        return 3 * self.n * (self.basis.degree + 1)

    def axes(self, coeffs) -> np.ndarray:
        return coeffs_to_axis_major(coeffs, self.n, self.basis.degree)

    def positions(self, coeff_axes: np.ndarray) -> np.ndarray:
        """Sampled positions, shape (3, n, samples), from (3, n, degree+1)."""
        return coeff_axes @ self.basis.value.T

    def pair_diffs(self, positions: np.ndarray) -> np.ndarray:
        """Pairwise differences p_i - p_j, shape (3, n_pairs, samples)."""
        return positions[:, self.pair_i, :] - positions[:, self.pair_j, :]

    def apply(self, coeffs) -> np.ndarray:
        """F @ xi as a flat vector in the documented layout."""
        pos = self.positions(self.axes(coeffs))
        diffs = self.pair_diffs(pos)
        out = np.empty(self.rows)
        for ax in range(3):
            base = ax * self.axis_rows
            out[base : base + self.pair_rows] = diffs[ax].ravel()
            out[base + self.pair_rows : base + self.axis_rows] = pos[ax].ravel()
        return out

    def apply_transpose_blocks(self, v_pair: np.ndarray, v_ws: np.ndarray) -> np.ndarray:
        """F^T applied to per-block values.

        v_pair: (3, n_pairs, samples); v_ws: (3, n, samples).  Returns the
        result in axis-major coefficient form (3, n, degree + 1).
        """
        combined = np.einsum("pn,apt->ant", self.incidence, v_pair) + v_ws
        return combined @ self.basis.value

    def apply_transpose(self, values) -> np.ndarray:
        """F^T @ v for a flat stacked vector v."""
        v = np.asarray(values, dtype=float).reshape(3, self.axis_rows)
        v_pair = v[:, : self.pair_rows].reshape(3, self.n_pairs, self.samples)
        v_ws = v[:, self.pair_rows :].reshape(3, self.n, self.samples)
        return self.apply_transpose_blocks(v_pair, v_ws).ravel()

    def matrix(self) -> scipy.sparse.csr_matrix:
        """Explicit sparse F, assembled on first use."""
        if self._matrix is None:
            W = scipy.sparse.csr_matrix(self.basis.value)
            per_axis = scipy.sparse.vstack(
                [
                    scipy.sparse.kron(scipy.sparse.csr_matrix(self.incidence), W),
                    scipy.sparse.kron(scipy.sparse.eye(self.n), W),
                ]
            )
            self._matrix = scipy.sparse.block_diag([per_axis] * 3, format="csr")
        return self._matrix

    def kkt_factorization(self, equality: EqualitySystem, rho: float) -> KktFactorization:
        """Factorization for one penalty weight, cached across solves."""
        with LAPACK_LOCK:  # also keeps threads from building the same key twice
            if self._kkt_equality is None:
                self._kkt_equality = equality
            elif self._kkt_equality is not equality:
                raise DimensionMismatch(
                    "operator KKT cache is bound to a different equality system"
                )
            key = float(rho)
            fact = self._kkt_cache.get(key)
            if fact is None:
                fact = KktFactorization(equality, self, rho)
                self._kkt_cache[key] = fact
            return fact


def build_pairwise_operator(problem: SwarmProblem, basis: BasisMatrices) -> PairwiseOperator:
    if basis.samples != problem.horizon_samples:
        raise DimensionMismatch(
            f"basis has {basis.samples} samples, problem expects "
            f"{problem.horizon_samples}"
        )
    return PairwiseOperator(problem.n, basis)


@dataclass(frozen=True)
class SphericalVars:
    """Angle/radius parameterization of every sampled constraint.

    Pair arrays have shape (n_pairs, samples); workspace arrays (n, samples).
    ``pair_radial`` is clamped to [1, inf) (at least one spheroid apart),
    ``ws_radial`` to [0, 1] (inside the workspace).
    """

    pair_azimuth: np.ndarray
    pair_polar: np.ndarray
    pair_radial: np.ndarray
    ws_azimuth: np.ndarray
    ws_polar: np.ndarray
    ws_radial: np.ndarray


def spherical_targets(svars: SphericalVars, problem: SwarmProblem):
    """Per-axis target blocks implied by spherical variables.

    Returns (pair_targets, ws_targets) with shapes (3, n_pairs, samples) and
    (3, n, samples); the workspace block includes the center offset.
    """
    # multiplication order mirrors the kernels so recomputing targets from
    # stored spherical variables reproduces the solver's fused path
    lat_r = problem.shape.lateral * svars.pair_radial * np.sin(svars.pair_polar)
    pair = np.stack(
        [
            lat_r * np.cos(svars.pair_azimuth),
            lat_r * np.sin(svars.pair_azimuth),
            problem.shape.vertical * svars.pair_radial * np.cos(svars.pair_polar),
        ]
    )
    lat_rw = problem.workspace.lateral * svars.ws_radial * np.sin(svars.ws_polar)
    ws = np.stack(
        [
            lat_rw * np.cos(svars.ws_azimuth),
            lat_rw * np.sin(svars.ws_azimuth),
            problem.workspace.vertical * svars.ws_radial * np.cos(svars.ws_polar),
        ]
    )
    ws += problem.workspace.center[:, None, None]
    return pair, ws


def build_spherical_rhs(svars: SphericalVars, problem: SwarmProblem) -> np.ndarray:
    """Flat target vector e matching the operator layout."""
    pair, ws = spherical_targets(svars, problem)
    n_pairs, samples = svars.pair_azimuth.shape
    n = svars.ws_azimuth.shape[0]
    pair_rows = n_pairs * samples
    axis_rows = pair_rows + n * samples
    out = np.empty(3 * axis_rows)
    for ax in range(3):
        base = ax * axis_rows
        out[base : base + pair_rows] = pair[ax].ravel()
        out[base + pair_rows : base + axis_rows] = ws[ax].ravel()
    return out


@dataclass(frozen=True)
class ViolationReport:
    """Constraint check of a sampled trajectory against the original problem."""

    ok: bool
    tol: float
    pair_margin_min: float  # most violated (lowest) pairwise margin
    workspace_margin_max: float  # most violated (highest) containment margin
    pair_violation_count: int
    workspace_violation_count: int
    pair_violations: tuple  # (i, j, sample_index, margin), worst first
    workspace_violations: tuple  # (robot, sample_index, margin), worst first

    def to_jsonable(self) -> dict:
        return {
            "ok": self.ok,
            "tol": self.tol,
            "pair_margin_min": self.pair_margin_min,
            "workspace_margin_max": self.workspace_margin_max,
            "pair_violation_count": self.pair_violation_count,
            "workspace_violation_count": self.workspace_violation_count,
            "pair_violations": [list(v) for v in self.pair_violations],
            "workspace_violations": [list(v) for v in self.workspace_violations],
        }


def check_original_constraints(
    traj: Trajectory, problem: SwarmProblem, tol: float = 1e-3, max_listed: int = 100
) -> ViolationReport:
    """Evaluate the original (non-reformulated) constraints on a trajectory.

    A pairwise margin below -tol or a workspace margin above +tol counts as
    a violation.  At most ``max_listed`` entries per kind are listed, worst
    first; counts and worst margins always cover everything.
    """
    pos = traj.positions  # shape (n, samples, 3)
    n = pos.shape[0]
    if n != problem.n:
        raise DimensionMismatch(
            f"trajectory has {n} robots, problem expects {problem.n}"
        )

    ws_m = workspace_margin(pos, problem.workspace)  # shape (n, samples)
    ws_bad = np.argwhere(ws_m > tol)
    ws_order = np.argsort(-ws_m[tuple(ws_bad.T)]) if ws_bad.size else []
    ws_list = tuple(
        (int(r), int(t), float(ws_m[r, t])) for r, t in ws_bad[ws_order][:max_listed]
    )

    pair_list = ()
    pair_min = np.inf
    if n > 1:
        ii, jj = np.triu_indices(n, k=1)
        deltas = pos[ii] - pos[jj]  # shape (n_pairs, samples, 3)
        pm = pair_margin(deltas, problem.shape)  # shape (n_pairs, samples)
        pair_min = float(pm.min())
        bad = np.argwhere(pm < -tol)
        order = np.argsort(pm[tuple(bad.T)]) if bad.size else []
        pair_list = tuple(
            (int(ii[p]), int(jj[p]), int(t), float(pm[p, t]))
            for p, t in bad[order][:max_listed]
        )
        n_pair_bad = int(bad.shape[0])
    else:
        n_pair_bad = 0

    ok = n_pair_bad == 0 and ws_bad.shape[0] == 0
    return ViolationReport(
        ok=ok,
        tol=tol,
        pair_margin_min=pair_min if n > 1 else np.inf,
        workspace_margin_max=float(ws_m.max()),
        pair_violation_count=n_pair_bad,
        workspace_violation_count=int(ws_bad.shape[0]),
        pair_violations=pair_list,
        workspace_violations=ws_list,
    )
