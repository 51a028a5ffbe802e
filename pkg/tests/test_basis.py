import csv
import json

import numpy as np
import pytest

from swarmfilter import (
    BasisMatrices,
    DegreeTooLow,
    DimensionMismatch,
    TooFewSamples,
    bernstein_matrices,
    build_basis,
    coeffs_to_trajectory,
)
from swarmfilter.basis import (
    coeffs_to_axis_major,
    trajectory_to_jsonable,
    write_trajectories_csv,
    write_trajectories_json,
)

from .oracles import decasteljau


def basis_from_matrices(degree, samples, duration):
    W, Wd, Wdd, tg = bernstein_matrices(degree, samples, duration)
    return BasisMatrices(value=W, velocity=Wd, acceleration=Wdd,
                         time_grid=tg, duration=duration)


class TestBernsteinMatrices:
    def test_degree_one_endpoints(self):
        W, _, _, _ = bernstein_matrices(1, 2, 1.0)
        np.testing.assert_array_equal(W, [[1.0, 0.0], [0.0, 1.0]])

    @pytest.mark.parametrize("degree", [1, 2, 5, 10, 15])
    def test_partition_of_unity(self, degree):
        W, _, _, _ = bernstein_matrices(degree, 33, 3.0)
        np.testing.assert_allclose(W.sum(axis=1), 1.0, atol=1e-13)

    def test_endpoint_interpolation(self):
        W, _, _, _ = bernstein_matrices(10, 51, 5.0)
        np.testing.assert_allclose(W[0], np.eye(11)[0], atol=1e-15)
        np.testing.assert_allclose(W[-1], np.eye(11)[-1], atol=1e-15)

    def test_values_match_decasteljau(self):
        rng = np.random.default_rng(3)
        W, _, _, tg = bernstein_matrices(8, 17, 2.0)
        c = rng.standard_normal(9)
        via_matrix = W @ c
        via_recursion = [decasteljau(c, t / 2.0) for t in tg]
        np.testing.assert_allclose(via_matrix, via_recursion, atol=1e-13)

    def test_derivatives_match_decasteljau_differences(self):
        # independent derivative oracle: central differences of the
        # de Casteljau evaluation with a tiny step
        rng = np.random.default_rng(4)
        duration = 5.0
        W, Wd, Wdd, tg = bernstein_matrices(10, 11, duration)
        c = rng.standard_normal(11)
        h = 1e-5
        for idx in range(1, 10):  # interior points only
            s = tg[idx] / duration
            f = lambda u: decasteljau(c, u)
            d1 = (f(s + h) - f(s - h)) / (2 * h) / duration
            d2 = (f(s + h) - 2 * f(s) + f(s - h)) / h**2 / duration**2
            assert abs(d1 - Wd[idx] @ c) < 1e-8
            assert abs(d2 - Wdd[idx] @ c) < 1e-4

    def test_grid_finite_difference_convergence_order(self):
        # central differences on the sample grid converge at O(dt^2)
        errs = []
        for samples in (51, 101, 201):
            W, Wd, _, tg = bernstein_matrices(10, samples, 5.0)
            dt = tg[1] - tg[0]
            fd = (W[2:] - W[:-2]) / (2 * dt)
            errs.append(np.abs(fd - Wd[1:-1]).max())
        assert errs[0] / errs[1] > 3.5  # halving dt quarters the error
        assert errs[1] / errs[2] > 3.5

    def test_fine_grid_finite_difference_tolerance(self):
        # on a refined grid the agreement is well inside 1e-3 relative
        W, Wd, _, tg = bernstein_matrices(10, 2001, 5.0)
        dt = tg[1] - tg[0]
        fd = (W[2:] - W[:-2]) / (2 * dt)
        assert np.abs(fd - Wd[1:-1]).max() <= 1e-3 * np.abs(Wd).max()

    def test_degree_zero_rejected(self):
        with pytest.raises(DegreeTooLow):
            bernstein_matrices(0, 10, 1.0)

    def test_one_sample_rejected(self):
        with pytest.raises(TooFewSamples):
            bernstein_matrices(3, 1, 1.0)

    def test_nonpositive_duration_rejected(self):
        with pytest.raises(ValueError):
            bernstein_matrices(3, 10, 0.0)


class TestBuildBasis:
    def test_default_shape(self):
        basis = build_basis(5.0, degree=10, samples=51)
        assert basis.value.shape == (51, 11)
        assert basis.degree == 10
        assert basis.samples == 51
        assert basis.time_grid[0] == 0.0
        assert basis.time_grid[-1] == 5.0

    @pytest.mark.parametrize("degree", [1, 2, 3, 4])
    def test_low_degree_rejected(self, degree):
        # six endpoint conditions per axis need degree >= 5
        with pytest.raises(DegreeTooLow):
            build_basis(5.0, degree=degree, samples=51)

    def test_degree_five_accepted(self):
        assert build_basis(1.0, degree=5, samples=7).degree == 5


class TestCoeffsToTrajectory:
    def test_constant_coefficients(self, basis51):
        # all coefficients (5, 0, 0) -> constant position, zero derivatives
        C = np.zeros((3, 1, 11))
        C[0, 0, :] = 5.0
        traj = coeffs_to_trajectory(C.ravel(), basis51, 1)
        np.testing.assert_allclose(traj.positions[0, :, 0], 5.0, atol=1e-12)
        np.testing.assert_allclose(traj.positions[0, :, 1:], 0.0, atol=1e-12)
        np.testing.assert_allclose(traj.velocities, 0.0, atol=1e-12)
        np.testing.assert_allclose(traj.accelerations, 0.0, atol=1e-12)

    def test_degree_one_linear_interpolation(self):
        basis = basis_from_matrices(1, 11, 1.0)
        C = np.zeros((3, 1, 2))
        C[0, 0] = (0.0, 1.0)  # x(t) = t on [0, 1]
        traj = coeffs_to_trajectory(C.ravel(), basis, 1)
        np.testing.assert_allclose(traj.positions[0, :, 0], basis.time_grid, atol=1e-14)
        np.testing.assert_allclose(traj.velocities[0, :, 0], 1.0, atol=1e-13)

    def test_least_squares_roundtrip(self, basis51):
        # fit a sine per axis; resampling reproduces it within the fit residual
        t = basis51.time_grid
        target = np.stack([np.sin(t), np.cos(2 * t), 0.1 * t]).T  # (51, 3)
        C = np.empty((3, 1, 11))
        fit_err = 0.0
        for ax in range(3):
            sol, res, *_ = np.linalg.lstsq(basis51.value, target[:, ax], rcond=None)
            C[ax, 0] = sol
            fit_err = max(fit_err, np.abs(basis51.value @ sol - target[:, ax]).max())
        traj = coeffs_to_trajectory(C.ravel(), basis51, 1)
        assert np.abs(traj.positions[0] - target).max() <= fit_err + 1e-12

    def test_linearity(self, basis51):
        rng = np.random.default_rng(7)
        xi1 = rng.standard_normal(3 * 2 * 11)
        xi2 = rng.standard_normal(3 * 2 * 11)
        a, b = 0.3, -1.7
        combo = coeffs_to_trajectory(a * xi1 + b * xi2, basis51, 2)
        t1 = coeffs_to_trajectory(xi1, basis51, 2)
        t2 = coeffs_to_trajectory(xi2, basis51, 2)
        scale = np.abs(combo.positions).max()
        np.testing.assert_allclose(
            combo.positions, a * t1.positions + b * t2.positions,
            atol=1e-12 * max(scale, 1.0),
        )
        np.testing.assert_allclose(
            combo.accelerations, a * t1.accelerations + b * t2.accelerations,
            atol=1e-10,
        )

    def test_wrong_length_raises(self, basis51):
        with pytest.raises(DimensionMismatch, match="expected 66"):
            coeffs_to_trajectory(np.zeros(65), basis51, 2)

    def test_axis_major_layout(self):
        # x-block of robot 0 comes first, then robot 1, then the y-blocks
        xi = np.arange(3 * 2 * 3, dtype=float)
        C = coeffs_to_axis_major(xi, 2, 2)
        np.testing.assert_array_equal(C[0, 0], [0, 1, 2])
        np.testing.assert_array_equal(C[0, 1], [3, 4, 5])
        np.testing.assert_array_equal(C[1, 0], [6, 7, 8])


class TestExport:
    def test_csv_single_trajectory(self, tmp_path, basis51):
        traj = coeffs_to_trajectory(np.ones(3 * 1 * 11), basis51, 1)
        path = tmp_path / "one.csv"
        write_trajectories_csv(path, [traj], metadata={"seed": 0, "tol": 1e-3})
        lines = path.read_text().splitlines()
        assert lines[0] == "# seed=0"
        assert lines[1] == "# tol=0.001"
        assert lines[2] == "robot,t,x,y,z,vx,vy,vz,ax,ay,az"
        assert len(lines) == 3 + 51

    def test_csv_multi_roundtrip(self, tmp_path, basis51):
        rng = np.random.default_rng(11)
        trajs = [
            coeffs_to_trajectory(rng.standard_normal(3 * 2 * 11), basis51, 2)
            for _ in range(2)
        ]
        path = tmp_path / "many.csv"
        write_trajectories_csv(path, trajs, labels=[4, 9])
        with open(path) as fh:
            rows = list(csv.reader(r for r in fh if not r.startswith("#")))
        assert rows[0][0] == "solution"
        assert {r[0] for r in rows[1:]} == {"4", "9"}
        # repr serialization round-trips exactly
        first = rows[1]
        np.testing.assert_array_equal(
            [float(v) for v in first[3:6]], trajs[0].positions[0, 0]
        )

    def test_json_roundtrip(self, tmp_path, basis51):
        traj = coeffs_to_trajectory(np.ones(33), basis51, 1)
        path = tmp_path / "t.json"
        write_trajectories_json(path, [traj], metadata={"n": 1})
        doc = json.loads(path.read_text())
        assert doc["metadata"] == {"n": 1}
        got = np.asarray(doc["trajectories"][0]["positions"])
        np.testing.assert_array_equal(got, traj.positions)
        assert doc["trajectories"][0]["time"] == traj.time_grid.tolist()

    def test_jsonable_shapes(self, basis51):
        traj = coeffs_to_trajectory(np.zeros(66), basis51, 2)
        doc = trajectory_to_jsonable(traj)
        assert np.asarray(doc["velocities"]).shape == (2, 51, 3)
