"""Shared fixtures: canonical problems, bases, and a solved demo batch."""
import json
from pathlib import Path

import numpy as np
import pytest

from swarmfilter import (
    EndpointState,
    RobotBoundary,
    RobotShape,
    SafetyFilter,
    SwarmProblem,
    Workspace,
    build_basis,
    build_equality,
    build_pairwise_operator,
)

SCENARIO_DIR = Path(__file__).resolve().parent.parent / "scenarios"


def make_problem(starts, goals, a=0.6, b=0.4, a_w=5.0, b_w=5.0,
                 center=(0.0, 0.0, 0.0), horizon_samples=51, duration=5.0):
    boundary = tuple(
        RobotBoundary(start=EndpointState(position=s), goal=EndpointState(position=g))
        for s, g in zip(starts, goals)
    )
    return SwarmProblem(
        n=len(boundary),
        horizon_samples=horizon_samples,
        duration=duration,
        shape=RobotShape(lateral=a, vertical=b),
        workspace=Workspace(center=np.asarray(center, dtype=float),
                            lateral=a_w, vertical=b_w),
        boundary=boundary,
    )


@pytest.fixture(scope="session")
def single_robot_problem():
    # one robot, no pair constraints, generous workspace
    return make_problem([(1.0, 0.5, 0.0)], [(-1.0, -0.5, 0.0)])


@pytest.fixture(scope="session")
def two_robot_problem():
    # antipodal swap along x; the frozen solver regression scenario
    return make_problem([(2.0, 0.0, 1.0), (-2.0, 0.0, 1.0)],
                        [(-2.0, 0.0, 1.0), (2.0, 0.0, 1.0)])


@pytest.fixture(scope="session")
def crossing4_path():
    return SCENARIO_DIR / "crossing4.json"


@pytest.fixture(scope="session")
def crossing4_doc(crossing4_path):
    with open(crossing4_path) as fh:
        return json.load(fh)


@pytest.fixture(scope="session")
def crossing4(crossing4_path):
    from swarmfilter import load_problem

    return load_problem(crossing4_path)


@pytest.fixture(scope="session")
def basis51():
    # matches the session problems above: degree 10, H+1 = 51 samples, T = 5
    return build_basis(5.0, degree=10, samples=51)


@pytest.fixture(scope="session")
def small_setup():
    """Small (n=3, degree 5, 7 samples) problem with basis/equality/operator.

    Small enough that dense oracles stay instant; three robots so the pair
    block has more than one row block.
    """
    prob = make_problem(
        [(2.0, 0.0, 0.0), (-1.0, 1.5, 0.5), (-1.0, -1.5, -0.5)],
        [(-2.0, 0.0, 0.0), (1.0, -1.5, -0.5), (1.0, 1.5, 0.5)],
        horizon_samples=7, duration=2.0,
    )
    basis = build_basis(prob.duration, degree=5, samples=prob.horizon_samples)
    equality = build_equality(prob, basis)
    operator = build_pairwise_operator(prob, basis)
    return prob, basis, equality, operator


@pytest.fixture(scope="session")
def two_robot_filter(two_robot_problem):
    return SafetyFilter(two_robot_problem, degree=10)
