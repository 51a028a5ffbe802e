import os
import subprocess
import sys

import numpy as np
import pytest

from swarmfilter import kernels
from swarmfilter.kernels import reference

from .oracles import SphericalGridOracle, spherical_cost

HAVE_COMPILED = "compiled" in kernels.available_backends()

needs_compiled = pytest.mark.skipif(
    not HAVE_COMPILED, reason="compiled extension not built"
)


@pytest.fixture
def restore_backend():
    before = kernels.active_backend()
    yield
    kernels.use_backend(before)


def random_inputs(rng, size, with_degenerate=True):
    d = rng.standard_normal((3, size)) * 2.0
    if with_degenerate and size >= 4:
        d[:, 0] = 0.0  # exact zero vector
        d[:, 1] = (0.0, 0.0, 1.3)  # on the polar axis
        d[:, 2] = (1e-300, 0.0, 0.0)  # denormal planar part
        d[:, 3] = (0.4, 0.0, 0.0)
    return np.ascontiguousarray(d[0]), np.ascontiguousarray(d[1]), np.ascontiguousarray(d[2])


class TestReferenceKernel:
    def test_on_surface_along_x(self):
        az, pol, rad, tx, ty, tz = reference.spherical_project(
            np.array([0.6]), np.array([0.0]), np.array([0.0]), 0.6, 0.4, 1.0, np.inf
        )
        assert az[0] == 0.0
        assert pol[0] == pytest.approx(np.pi / 2)
        assert rad[0] == pytest.approx(1.0)
        np.testing.assert_allclose([tx[0], ty[0], tz[0]], [0.6, 0.0, 0.0], atol=1e-15)

    def test_polar_axis_workspace_point(self):
        # relative vector straight up at the vertical semiaxis
        az, pol, rad, tx, ty, tz = reference.spherical_project(
            np.array([0.0]), np.array([0.0]), np.array([3.0]), 5.0, 3.0, 0.0, 1.0
        )
        assert az[0] == 0.0
        assert pol[0] == 0.0
        assert rad[0] == pytest.approx(1.0)
        np.testing.assert_allclose([tx[0], ty[0], tz[0]], [0.0, 0.0, 3.0], atol=1e-14)

    def test_degenerate_zero_vector_convention(self):
        az, pol, rad, tx, ty, tz = reference.spherical_project(
            np.zeros(1), np.zeros(1), np.zeros(1), 0.6, 0.4, 1.0, np.inf
        )
        assert az[0] == 0.0
        assert pol[0] == np.pi / 2
        assert rad[0] == 1.0  # clamped to the lower bound
        np.testing.assert_allclose([tx[0], ty[0], tz[0]], [0.6, 0.0, 0.0], atol=1e-15)

    def test_degenerate_zero_vector_workspace(self):
        # workspace family clamps to radial 0: target collapses to the origin
        _, _, rad, tx, ty, tz = reference.spherical_project(
            np.zeros(1), np.zeros(1), np.zeros(1), 5.0, 3.0, 0.0, 1.0
        )
        assert rad[0] == 0.0
        np.testing.assert_array_equal([tx[0], ty[0], tz[0]], [0.0, 0.0, 0.0])

    def test_radial_clamping(self):
        rng = np.random.default_rng(20)
        dx, dy, dz = random_inputs(rng, 200)
        for lo, hi in ((1.0, np.inf), (0.0, 1.0)):
            _, _, rad, *_ = reference.spherical_project(dx, dy, dz, 0.6, 0.4, lo, hi)
            assert rad.min() >= lo
            assert rad.max() <= hi

    def test_angle_ranges(self):
        rng = np.random.default_rng(21)
        dx, dy, dz = random_inputs(rng, 200)
        az, pol, *_ = reference.spherical_project(dx, dy, dz, 1.0, 1.0, 1.0, np.inf)
        assert az.min() >= -np.pi and az.max() <= np.pi
        assert pol.min() >= 0.0 and pol.max() <= np.pi

    def test_interior_point_is_exact_fit(self):
        # inside the allowed radial band the target reproduces the input
        rng = np.random.default_rng(22)
        dx, dy, dz = rng.standard_normal((3, 50)) * 0.3
        _, _, rad, tx, ty, tz = reference.spherical_project(
            dx, dy, dz, 5.0, 3.0, 0.0, 1.0
        )
        assert rad.max() < 1.0  # all strictly inside the workspace band
        np.testing.assert_allclose(tx, dx, atol=1e-12)
        np.testing.assert_allclose(ty, dy, atol=1e-12)
        np.testing.assert_allclose(tz, dz, atol=1e-12)

    @pytest.mark.parametrize("lo,hi", [(1.0, np.inf), (0.0, 1.0)])
    def test_block_optimality_spot_check(self, lo, hi):
        # unit scales: closed form must match the exhaustive oracle
        rng = np.random.default_rng(23)
        oracle = SphericalGridOracle(1.0, 1.0, n_azimuth=181, n_polar=91)
        dx, dy, dz = random_inputs(rng, 20)
        az, pol, rad, *_ = reference.spherical_project(dx, dy, dz, 1.0, 1.0, lo, hi)
        for k in range(20):
            closed = spherical_cost((dx[k], dy[k], dz[k]), 1.0, 1.0,
                                    az[k], pol[k], rad[k])
            brute = oracle.min_cost((dx[k], dy[k], dz[k]), lo, hi)
            assert closed <= brute + 1e-6


@needs_compiled
class TestCompiledKernel:
    @pytest.mark.parametrize("lo,hi", [(1.0, np.inf), (0.0, 1.0)])
    @pytest.mark.parametrize("scales", [(0.6, 0.4), (5.0, 3.0), (1.0, 1.0)])
    def test_matches_reference(self, lo, hi, scales):
        from swarmfilter.kernels import _speedups

        rng = np.random.default_rng(24)
        dx, dy, dz = random_inputs(rng, 500)
        ref = reference.spherical_project(dx, dy, dz, *scales, lo, hi)
        fast = _speedups.spherical_project(dx, dy, dz, *scales, lo, hi)
        for r, f in zip(ref, fast):
            np.testing.assert_allclose(np.asarray(f), r, rtol=1e-13, atol=1e-13)

    def test_output_types(self):
        from swarmfilter.kernels import _speedups

        out = _speedups.spherical_project(
            np.array([1.0]), np.array([0.5]), np.array([-0.2]), 1.0, 1.0, 0.0, 1.0
        )
        assert len(out) == 6
        for arr in out:
            a = np.asarray(arr)
            assert a.dtype == np.float64
            assert a.shape == (1,)


class TestBackendSelection:
    def test_reference_always_available(self):
        assert "reference" in kernels.available_backends()

    @needs_compiled
    def test_compiled_is_default(self):
        # a fresh interpreter picks the extension when present
        code = (
            "from swarmfilter import kernels; print(kernels.active_backend())"
        )
        out = subprocess.run(
            [sys.executable, "-c", code], capture_output=True, text=True,
            env={k: v for k, v in os.environ.items() if k != "SWARMFILTER_PURE_PYTHON"},
        )
        assert out.stdout.strip() == "compiled"

    def test_env_var_forces_reference(self):
        code = (
            "from swarmfilter import kernels; "
            "print(kernels.active_backend(), kernels.available_backends())"
        )
        env = dict(os.environ, SWARMFILTER_PURE_PYTHON="1")
        out = subprocess.run(
            [sys.executable, "-c", code], capture_output=True, text=True, env=env
        )
        assert out.stdout.split()[0] == "reference"
        assert "compiled" not in out.stdout

    def test_use_backend_switches(self, restore_backend):
        name = kernels.use_backend("reference")
        assert name == "reference"
        assert kernels.active_backend() == "reference"
        out = kernels.spherical_project(
            np.array([0.6]), np.array([0.0]), np.array([0.0]), 0.6, 0.4, 1.0, np.inf
        )
        assert out[2][0] == pytest.approx(1.0)

    def test_use_backend_unknown_name(self):
        with pytest.raises(ValueError, match="not available"):
            kernels.use_backend("fortran")

    @needs_compiled
    def test_solver_identical_across_backends(self, restore_backend):
        # full fixed-point runs agree between backends to round-off on an
        # asymmetric scenario (symmetric ones amplify last-ulp differences)
        from swarmfilter import SafetyFilter
        from swarmfilter.proposals import straight_line_coeffs

        from .conftest import make_problem

        prob = make_problem(
            [(1.5, 0.3, 1.0), (-1.5, -0.2, 0.9)],
            [(-1.5, 0.1, 1.1), (1.5, -0.3, 1.0)],
        )
        sf = SafetyFilter(prob, degree=10)
        xi = straight_line_coeffs(prob, sf.basis)
        kernels.use_backend("compiled")
        res_c = sf.solve(xi)
        kernels.use_backend("reference")
        res_r = sf.solve(xi)
        assert res_c.iterations == res_r.iterations
        assert res_c.converged and res_r.converged
        np.testing.assert_allclose(res_c.coeffs, res_r.coeffs, atol=1e-12)
        np.testing.assert_allclose(
            res_c.residual_inf, res_r.residual_inf, rtol=1e-9, atol=1e-13
        )
