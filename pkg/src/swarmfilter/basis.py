"""Bernstein polynomial basis sampled on a uniform time grid.

Trajectories are encoded as Bernstein coefficients per robot per axis.  The
full coefficient vector of a swarm is axis-major:

    xi = (c_1x, ..., c_nx, c_1y, ..., c_ny, c_1z, ..., c_nz)

where each c_ik holds degree + 1 coefficients, so len(xi) = 3 n (degree + 1).
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np
from scipy.special import comb

from .errors import DegreeTooLow, DimensionMismatch, TooFewSamples

# Six endpoint conditions (pos/vel/acc at both ends) need this many coefficients.
MIN_DEGREE = 5


def _bernstein(s, degree):
    """Evaluate all Bernstein polynomials of one degree at points s in [0, 1].

    Returns shape (len(s), degree + 1).
    """
    s = np.asarray(s, dtype=float)[:, None]
    k = np.arange(degree + 1)[None, :]
    return comb(degree, k) * s**k * (1.0 - s) ** (degree - k)


def bernstein_matrices(degree, samples, duration):
    """Sampling matrices for value, velocity and acceleration.

    Valid for any degree >= 1; the degree-gated entry point is build_basis.
    Returns (W, Wd, Wdd, time_grid) where W has shape (samples, degree + 1)
    and (W @ c) evaluates a coefficient vector c on the uniform grid.
    Derivatives are with respect to time, not the unit parameter.
    """
    if degree < 1:
        raise DegreeTooLow(f"degree must be >= 1, got {degree}")
    if samples < 2:
        raise TooFewSamples(f"need at least 2 samples, got {samples}")
    if not duration > 0:
        raise ValueError(f"duration must be positive, got {duration}")

    time_grid = np.linspace(0.0, duration, samples)
    s = time_grid / duration
    W = _bernstein(s, degree)

    # d/ds B_{k,m} = m (B_{k-1,m-1} - B_{k,m-1}); chain rule brings a 1/T.
    lower = _bernstein(s, degree - 1)
    Wd = np.zeros_like(W)
    Wd[:, :-1] -= lower
    Wd[:, 1:] += lower
    Wd *= degree / duration

    Wdd = np.zeros_like(W)
    if degree >= 2:
        lower2 = _bernstein(s, degree - 2)
        Wdd[:, :-2] += lower2
        Wdd[:, 1:-1] -= 2.0 * lower2
        Wdd[:, 2:] += lower2
        Wdd *= degree * (degree - 1) / duration**2

    return W, Wd, Wdd, time_grid


@dataclass(frozen=True)
class BasisMatrices:
    """Sampled basis for one (degree, grid) choice, shared across robots."""

    value: np.ndarray  # shape (samples, degree + 1)
    velocity: np.ndarray
    acceleration: np.ndarray
    time_grid: np.ndarray  # shape (samples,)
    duration: float

    @property
    def degree(self) -> int:
        return self.value.shape[1] - 1

    @property
    def samples(self) -> int:
        return self.value.shape[0]


def build_basis(duration, degree=10, samples=50) -> BasisMatrices:
    """Standard basis used by the solver.

    Degrees below MIN_DEGREE cannot pin position, velocity and acceleration
    at both ends, so they are rejected here.
    """
    if degree < MIN_DEGREE:
        raise DegreeTooLow(
            f"degree {degree} cannot satisfy six endpoint conditions per axis; "
            f"need at least {MIN_DEGREE}"
        )
    W, Wd, Wdd, time_grid = bernstein_matrices(degree, samples, duration)
    return BasisMatrices(
        value=W,
        velocity=Wd,
        acceleration=Wdd,
        time_grid=time_grid,
        duration=duration,
    )


@dataclass(frozen=True)
class Trajectory:
    """Sampled swarm trajectory.

    positions/velocities/accelerations have shape (n, samples, 3).
    """

    positions: np.ndarray
    velocities: np.ndarray
    accelerations: np.ndarray
    time_grid: np.ndarray

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    @property
    def samples(self) -> int:
        return self.positions.shape[1]


def coeffs_to_axis_major(coeffs, n, degree):
    """Reshape a flat coefficient vector to (3, n, degree + 1).

    Axis order is x, y, z.  Raises DimensionMismatch when the length does
    not factor as 3 n (degree + 1).
    """
    xi = np.asarray(coeffs, dtype=float).ravel()
    expected = 3 * n * (degree + 1)
    if xi.size != expected:
        raise DimensionMismatch(
            f"coefficient vector has length {xi.size}, expected {expected} "
            f"(n={n}, degree={degree})"
        )
    return xi.reshape(3, n, degree + 1)


def coeffs_to_trajectory(coeffs, basis: BasisMatrices, n) -> Trajectory:
    """Sample a flat coefficient vector on the basis grid."""
    C = coeffs_to_axis_major(coeffs, n, basis.degree)  # shape (3, n, m+1)
    pos = np.einsum("ank,tk->ant", C, basis.value)  # shape (3, n, samples)
    vel = np.einsum("ank,tk->ant", C, basis.velocity)
    acc = np.einsum("ank,tk->ant", C, basis.acceleration)
    return Trajectory(
        positions=np.moveaxis(pos, 0, -1),  # shape (n, samples, 3)
        velocities=np.moveaxis(vel, 0, -1),
        accelerations=np.moveaxis(acc, 0, -1),
        time_grid=basis.time_grid,
    )


TRAJECTORY_COLUMNS = ("robot", "t", "x", "y", "z", "vx", "vy", "vz", "ax", "ay", "az")


def write_trajectories_csv(path, trajectories, metadata=None, labels=None):
    """Write one or more trajectories to CSV.

    Metadata key/value pairs go into '# key=value' comment lines above the
    header.  When several trajectories are given a leading 'solution' column
    identifies each one; ``labels`` overrides the default 0..k-1 numbering.
    """
    trajectories = list(trajectories)
    multi = len(trajectories) != 1 or labels is not None
    if labels is None:
        labels = range(len(trajectories))
    with open(path, "w", newline="") as fh:
        for key, value in (metadata or {}).items():
            fh.write(f"# {key}={value}\n")
        writer = csv.writer(fh)
        header = (("solution",) if multi else ()) + TRAJECTORY_COLUMNS
        writer.writerow(header)
        for label, traj in zip(labels, trajectories):
            for robot in range(traj.n):
                for t_idx in range(traj.samples):
                    row = [
                        robot,
                        repr(float(traj.time_grid[t_idx])),
                        *(repr(float(v)) for v in traj.positions[robot, t_idx]),
                        *(repr(float(v)) for v in traj.velocities[robot, t_idx]),
                        *(repr(float(v)) for v in traj.accelerations[robot, t_idx]),
                    ]
                    writer.writerow(([label] if multi else []) + row)


def trajectory_to_jsonable(traj: Trajectory) -> dict:
    """Plain-list representation suitable for json.dump."""
    return {
        "time": traj.time_grid.tolist(),
        "positions": traj.positions.tolist(),
        "velocities": traj.velocities.tolist(),
        "accelerations": traj.accelerations.tolist(),
    }


def write_trajectories_json(path, trajectories, metadata=None):
    doc = {
        "metadata": dict(metadata or {}),
        "trajectories": [trajectory_to_jsonable(t) for t in trajectories],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)
        fh.write("\n")
