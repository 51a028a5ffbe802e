"""Problem description: robots, workspace, boundary conditions.

Geometry conventions used everywhere in the package:

* the safety spheroid between two robots has lateral semiaxis ``a`` (x and y)
  and vertical semiaxis ``b`` (z); robots i and j are clear of each other when
  ``((dx^2 + dy^2) / a^2 + dz^2 / b^2) >= 1`` with ``d = p_i - p_j``,
* the workspace is a spheroid with semiaxes ``(a_w, a_w, b_w)`` around a
  center point; a position is inside when the analogous quadratic form is
  ``<= 1``.

Margins below are the quadratic form minus one, so feasible means
``pair_margin >= 0`` and ``workspace_margin <= 0``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    DimensionMismatch,
    EndpointCollision,
    GoalOutsideWorkspace,
    NonPositiveGeometry,
    ProblemValidationError,
    SchemaMismatch,
    StartOutsideWorkspace,
    TooFewSamples,
)

# Strictness slack for endpoint checks, relative to the unit margin.
ENDPOINT_MARGIN = 1e-9


def _vec3(value, what):
    arr = np.asarray(value, dtype=float)
    if arr.shape != (3,):
        raise DimensionMismatch(f"{what} must be a 3-vector, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class RobotShape:
    """Semiaxes of the inter-robot safety spheroid."""

    lateral: float
    vertical: float


@dataclass(frozen=True)
class Workspace:
    """Spheroidal flight volume: center and semiaxes (lateral, lateral, vertical)."""

    center: np.ndarray
    lateral: float
    vertical: float

    def __post_init__(self):
        object.__setattr__(self, "center", _vec3(self.center, "workspace center"))


@dataclass(frozen=True)
class EndpointState:
    """Position, velocity and acceleration pinned at one end of the horizon."""

    position: np.ndarray
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    acceleration: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "position", _vec3(self.position, "position"))
        object.__setattr__(self, "velocity", _vec3(self.velocity, "velocity"))
        object.__setattr__(
            self, "acceleration", _vec3(self.acceleration, "acceleration")
        )


@dataclass(frozen=True)
class RobotBoundary:
    """Start and goal states of a single robot."""

    start: EndpointState
    goal: EndpointState


@dataclass(frozen=True)
class SwarmProblem:
    """One batch-filtering problem instance.

    ``horizon_samples`` is the number of time samples on the closed interval
    ``[0, duration]``, i.e. the constraint grid has ``horizon_samples`` points
    including both endpoints.
    """

    n: int
    horizon_samples: int
    duration: float
    shape: RobotShape
    workspace: Workspace
    boundary: tuple[RobotBoundary, ...]

    def __post_init__(self):
        object.__setattr__(self, "boundary", tuple(self.boundary))

    @property
    def n_pairs(self) -> int:
        return self.n * (self.n - 1) // 2


def pair_margin(delta, shape: RobotShape):
    """Clearance margin for separation vectors ``delta``, shape (..., 3).

    Non-negative means the robots are at least a safety spheroid apart;
    a separation of exactly (lateral, 0, 0) gives margin 0.
    """
    d = np.asarray(delta, dtype=float)
    return (
        (d[..., 0] ** 2 + d[..., 1] ** 2) / shape.lateral**2
        + d[..., 2] ** 2 / shape.vertical**2
        - 1.0
    )


def workspace_margin(points, workspace: Workspace):
    """Containment margin for positions ``points``, shape (..., 3).

    Non-positive means inside the workspace spheroid.
    """
    d = np.asarray(points, dtype=float) - workspace.center
    return (
        (d[..., 0] ** 2 + d[..., 1] ** 2) / workspace.lateral**2
        + d[..., 2] ** 2 / workspace.vertical**2
        - 1.0
    )


def validate_problem(problem: SwarmProblem) -> SwarmProblem:
    """Check every problem invariant, aggregating all violations.

    Raises ProblemValidationError listing each violated invariant with the
    offending robot index or pair; returns the problem unchanged when valid.
    """
    violations = []

    if problem.n < 1:
        violations.append(NonPositiveGeometry(f"n must be >= 1, got {problem.n}"))
    if problem.horizon_samples < 2:
        violations.append(
            TooFewSamples(
                f"horizon_samples must be >= 2, got {problem.horizon_samples}"
            )
        )
    if not (problem.duration > 0 and np.isfinite(problem.duration)):
        violations.append(
            NonPositiveGeometry(f"duration must be positive, got {problem.duration}")
        )

    geometry_ok = True
    for name, value in (
        ("shape.lateral", problem.shape.lateral),
        ("shape.vertical", problem.shape.vertical),
        ("workspace.lateral", problem.workspace.lateral),
        ("workspace.vertical", problem.workspace.vertical),
    ):
        if not (value > 0 and np.isfinite(value)):
            geometry_ok = False
            violations.append(
                NonPositiveGeometry(f"{name} must be positive, got {value}")
            )

    if len(problem.boundary) != problem.n:
        violations.append(
            DimensionMismatch(
                f"expected {problem.n} boundary entries, got {len(problem.boundary)}"
            )
        )

    if geometry_ok:
        for i, rb in enumerate(problem.boundary):
            m = workspace_margin(rb.start.position, problem.workspace)
            if not m < -ENDPOINT_MARGIN:
                violations.append(StartOutsideWorkspace(i, float(m)))
            m = workspace_margin(rb.goal.position, problem.workspace)
            if not m < -ENDPOINT_MARGIN:
                violations.append(GoalOutsideWorkspace(i, float(m)))

        for i in range(len(problem.boundary)):
            for j in range(i + 1, len(problem.boundary)):
                for where in ("start", "goal"):
                    pi = getattr(problem.boundary[i], where).position
                    pj = getattr(problem.boundary[j], where).position
                    m = pair_margin(pi - pj, problem.shape)
                    if m < -ENDPOINT_MARGIN:
                        violations.append(EndpointCollision((i, j), where, float(m)))

    if violations:
        raise ProblemValidationError(violations)
    return problem


def _endpoint_from_dict(entry, where):
    if not isinstance(entry, dict) or "p" not in entry:
        raise SchemaMismatch(f"boundary {where} entry must be an object with key 'p'")
    try:
        return EndpointState(
            position=entry["p"],
            velocity=entry.get("v", np.zeros(3)),
            acceleration=entry.get("a", np.zeros(3)),
        )
    except DimensionMismatch as exc:
        raise SchemaMismatch(f"boundary {where}: {exc}") from exc


def load_problem(source) -> SwarmProblem:
    """Build and validate a SwarmProblem from JSON.

    ``source`` may be a path to a JSON file or an already-parsed dict.
    Expected keys: n, H, T, a, b, workspace {center, a_w, b_w}, boundary
    (list of {start, goal}, each {p, v?, a?}); omitted endpoint velocities
    and accelerations default to zero.  The sample count is H + 1.
    """
    if isinstance(source, (str, Path)):
        with open(source) as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise SchemaMismatch(f"problem file is not valid JSON: {exc}") from exc
    elif isinstance(source, dict):
        doc = source
    else:
        raise SchemaMismatch(f"cannot load a problem from {type(source).__name__}")

    missing = [k for k in ("n", "H", "T", "a", "b", "workspace", "boundary") if k not in doc]
    if missing:
        raise SchemaMismatch(f"problem document missing keys: {', '.join(missing)}")

    ws = doc["workspace"]
    if not isinstance(ws, dict):
        raise SchemaMismatch("'workspace' must be an object")
    ws_missing = [k for k in ("center", "a_w", "b_w") if k not in ws]
    if ws_missing:
        raise SchemaMismatch(f"workspace missing keys: {', '.join(ws_missing)}")

    if not isinstance(doc["boundary"], list):
        raise SchemaMismatch("'boundary' must be a list")

    try:
        n = int(doc["n"])
        horizon = int(doc["H"])
        duration = float(doc["T"])
        shape = RobotShape(lateral=float(doc["a"]), vertical=float(doc["b"]))
        workspace = Workspace(
            center=ws["center"], lateral=float(ws["a_w"]), vertical=float(ws["b_w"])
        )
        boundary = []
        for entry in doc["boundary"]:
            if not isinstance(entry, dict) or "start" not in entry or "goal" not in entry:
                raise SchemaMismatch(
                    "each boundary entry must be an object with 'start' and 'goal'"
                )
            boundary.append(
                RobotBoundary(
                    start=_endpoint_from_dict(entry["start"], "start"),
                    goal=_endpoint_from_dict(entry["goal"], "goal"),
                )
            )
    except (TypeError, ValueError) as exc:
        raise SchemaMismatch(f"problem document has a malformed value: {exc}") from exc
    except DimensionMismatch as exc:
        raise SchemaMismatch(str(exc)) from exc

    prob = SwarmProblem(
        n=n,
        horizon_samples=horizon + 1,
        duration=duration,
        shape=shape,
        workspace=workspace,
        boundary=tuple(boundary),
    )
    return validate_problem(prob)
