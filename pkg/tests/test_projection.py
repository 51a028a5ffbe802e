import numpy as np
import pytest
import scipy.linalg

from swarmfilter import EndpointState, RobotBoundary, build_equality, project_to_boundary

from .conftest import make_problem
from .oracles import dense_projection


@pytest.fixture(scope="module")
def setup():
    from swarmfilter import build_basis

    prob = make_problem(
        [(2.0, 0.0, 0.0), (-1.0, 1.5, 0.5), (-1.0, -1.5, -0.5)],
        [(-2.0, 0.0, 0.0), (1.0, -1.5, -0.5), (1.0, 1.5, 0.5)],
        horizon_samples=9, duration=3.0,
    )
    basis = build_basis(prob.duration, degree=7, samples=prob.horizon_samples)
    eq = build_equality(prob, basis)
    return prob, eq


def test_feasible_point_unchanged(setup):
    _, eq = setup
    rng = np.random.default_rng(10)
    xi = project_to_boundary(rng.standard_normal(eq.coeff_dim), eq)
    again = project_to_boundary(xi, eq)
    np.testing.assert_allclose(again, xi, atol=1e-12)


def test_row_space_input_with_zero_rhs_maps_to_zero():
    from swarmfilter import build_basis

    prob = make_problem([(0.0, 0.0, 0.0)], [(0.0, 0.0, 0.0)], a_w=5.0, b_w=5.0,
                        horizon_samples=9, duration=3.0)
    basis = build_basis(3.0, degree=7, samples=9)
    eq = build_equality(prob, basis)
    assert np.abs(eq.rhs).max() == 0.0
    rng = np.random.default_rng(11)
    A = eq.matrix().toarray()
    xi = A.T @ rng.standard_normal(A.shape[0])
    np.testing.assert_allclose(project_to_boundary(xi, eq), 0.0, atol=1e-12)


@pytest.mark.parametrize("seed", range(10))
def test_matches_dense_oracle(setup, seed):
    _, eq = setup
    rng = np.random.default_rng(seed)
    xi = rng.standard_normal(eq.coeff_dim) * 3.0
    got = project_to_boundary(xi, eq)
    want = dense_projection(xi, eq.matrix().toarray(), eq.rhs)
    np.testing.assert_allclose(got, want, atol=1e-9)


@pytest.mark.parametrize("seed", range(5))
def test_boundary_residual_bound(setup, seed):
    _, eq = setup
    rng = np.random.default_rng(100 + seed)
    xi = project_to_boundary(rng.standard_normal(eq.coeff_dim) * 10.0, eq)
    bound = 1e-8 * (1.0 + np.abs(eq.rhs).max())
    assert np.abs(eq.residual(xi)).max() <= bound


def test_idempotent(setup):
    _, eq = setup
    rng = np.random.default_rng(12)
    once = project_to_boundary(rng.standard_normal(eq.coeff_dim), eq)
    twice = project_to_boundary(once, eq)
    np.testing.assert_allclose(twice, once, atol=1e-10)


def test_minimal_norm_correction(setup):
    # no feasible point is closer to the raw input than the projection
    _, eq = setup
    rng = np.random.default_rng(13)
    raw = rng.standard_normal(eq.coeff_dim)
    best = project_to_boundary(raw, eq)
    for _ in range(20):
        other = project_to_boundary(rng.standard_normal(eq.coeff_dim) * 5.0, eq)
        assert np.linalg.norm(best - raw) <= np.linalg.norm(other - raw) + 1e-9


def test_correction_lies_in_row_space(setup):
    _, eq = setup
    rng = np.random.default_rng(14)
    raw = rng.standard_normal(eq.coeff_dim)
    correction = project_to_boundary(raw, eq) - raw
    null_basis = scipy.linalg.null_space(eq.matrix().toarray())
    overlap = np.abs(null_basis.T @ correction).max()
    assert overlap <= 1e-9 * max(1.0, np.linalg.norm(correction))


def test_nonzero_velocity_boundary():
    # endpoint derivatives other than zero survive the projection exactly
    from swarmfilter import build_basis, coeffs_to_trajectory

    prob = make_problem([(1.0, 0.0, 0.0)], [(-1.0, 0.0, 0.0)],
                        horizon_samples=9, duration=3.0)
    boundary = (
        RobotBoundary(
            start=EndpointState(position=(1.0, 0.0, 0.0), velocity=(0.5, -0.2, 0.0)),
            goal=EndpointState(position=(-1.0, 0.0, 0.0), acceleration=(0.0, 0.3, 0.1)),
        ),
    )
    prob = type(prob)(n=1, horizon_samples=9, duration=3.0, shape=prob.shape,
                      workspace=prob.workspace, boundary=boundary)
    basis = build_basis(3.0, degree=7, samples=9)
    eq = build_equality(prob, basis)
    xi = project_to_boundary(np.zeros(eq.coeff_dim), eq)
    traj = coeffs_to_trajectory(xi, basis, 1)
    np.testing.assert_allclose(traj.velocities[0, 0], [0.5, -0.2, 0.0], atol=1e-10)
    np.testing.assert_allclose(traj.accelerations[0, -1], [0.0, 0.3, 0.1], atol=1e-9)
