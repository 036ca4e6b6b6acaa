"""Splitting u = v + w, the Gamma map, Picard iteration and the mild-form residual."""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import integrate

from bbmburgers.duhamel import (
    PicardReport,
    contraction_estimate,
    duhamel_residual,
    gamma_map,
    picard_solve,
    solve_v,
    time_derivative,
)
from bbmburgers.errors import DimensionError, NonConvergenceError
from bbmburgers.forcing import ForcingSpec
from bbmburgers.linear import assemble_generator, resolvent_diagonal, semigroup_matrix, solve_linear_forced
from bbmburgers.spectral import Field, Grid1D, burgers_term, random_field
from bbmburgers.stepper import SolverConfig, solve

K = 16


@pytest.fixture
def small_phi() -> Field:
    return random_field(Grid1D(K), 7, h1_norm=0.05)


class TestGammaMap:
    def test_zero_data_gives_zero(self):
        grid = Grid1D(K)
        v = solve_v(Field.zeros(grid), ForcingSpec.zero(), 0.5, 0.05)
        assert_allclose(gamma_map(v.with_coeffs(np.zeros_like(v.coeffs)), v, 0.05).coeffs, 0.0)

    def test_against_vector_quadrature(self):
        grid = Grid1D(K)
        phi = Field.mode(grid, 1, 0.3) + Field.mode(grid, 2, -0.2)
        dt = 0.025
        v = solve_v(phi, ForcingSpec.zero(), 0.5, dt)
        out = gamma_map(v.with_coeffs(np.zeros_like(v.coeffs)), v, dt)
        A = assemble_generator(grid)
        r = resolvent_diagonal(grid)
        padded = Grid1D.with_dealiasing(K)

        def integrand(s, t):
            vs = semigroup_matrix(A, s) @ phi.coeffs
            return -semigroup_matrix(A, t - s) @ (r * burgers_term(vs, padded))

        for n in (4, 10, 20):
            t = v.times[n]
            exact, _ = integrate.quad_vec(lambda s: integrand(s, t), 0, t, epsabs=1e-14)
            assert_allclose(out.coeffs[n], exact, atol=1e-8)

    def test_contraction_for_small_data(self, small_phi):
        dt = 0.02
        v = solve_v(small_phi, ForcingSpec.zero(), 1.0, dt)
        rng = np.random.default_rng(0)
        w1 = v.with_coeffs(0.01 * rng.standard_normal(v.coeffs.shape) / np.arange(1, K + 1) ** 2)
        w2 = v.with_coeffs(np.zeros_like(v.coeffs))
        assert contraction_estimate(w1, w2, v, dt) < 0.5

    def test_spacing_mismatch(self, small_phi):
        v = solve_v(small_phi, ForcingSpec.zero(), 0.5, 0.05)
        with pytest.raises(DimensionError):
            gamma_map(v, v, 0.1)


class TestPicard:
    def test_converges_geometrically(self, small_phi):
        u, report = picard_solve(small_phi, ForcingSpec.zero(), 1.0, 0.01, tol=1e-13)
        assert report.converged
        assert report.y1_delta[-1] < 1e-13
        ratio, r2 = report.geometric_fit()
        assert ratio < 0.1 and r2 > 0.95
        assert "w" in u.metadata

    def test_matches_stepper(self, small_phi):
        dt = 1e-3
        f = ForcingSpec.single_mode(0.01, 1, theta=1.0, temporal="cos")
        u, _ = picard_solve(small_phi, f, 1.0, dt, tol=1e-13)
        traj = solve(small_phi, f, 0.0, 1.0, SolverConfig(n_modes=K, dt=dt))
        assert (u - traj).y_norm(1.0) < 1e-7

    def test_budget_exhausted(self, small_phi):
        with pytest.raises(NonConvergenceError) as info:
            picard_solve(small_phi, ForcingSpec.zero(), 1.0, 0.01, tol=1e-30, max_iter=3)
        assert len(info.value.history) == 3

    def test_rejects_bad_tol(self, small_phi):
        with pytest.raises(ValueError):
            picard_solve(small_phi, ForcingSpec.zero(), 1.0, 0.01, tol=0.0)

    def test_report_csv(self, tmp_path, small_phi):
        _, report = picard_solve(small_phi, ForcingSpec.zero(), 0.5, 0.01)
        path = tmp_path / "picard.csv"
        report.to_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "iter,y1_delta,contraction_ratio"
        assert len(lines) == report.iterations + 1

    def test_geometric_fit_needs_three_points(self):
        assert PicardReport([1e-3, 1e-6]).geometric_fit() is None
        ratio, r2 = PicardReport([1.0, 0.1, 0.01, 0.001]).geometric_fit()
        assert_allclose(ratio, 0.1)
        assert_allclose(r2, 1.0)


class TestDuhamelResidual:
    def test_second_order_in_dt(self, small_phi):
        f = ForcingSpec.single_mode(0.01, 1, theta=1.0, temporal="cos")
        res = [
            duhamel_residual(solve(small_phi, f, 0.0, 1.0, SolverConfig(n_modes=K, dt=dt)), small_phi, f)
            for dt in (2e-3, 1e-3)
        ]
        assert_allclose(math.log2(res[0] / res[1]), 2.0, atol=0.2)

    def test_picard_solution_is_mild(self, small_phi):
        u, _ = picard_solve(small_phi, ForcingSpec.zero(), 0.5, 0.01, tol=1e-14)
        assert duhamel_residual(u, small_phi, ForcingSpec.zero()) < 1e-13

    def test_linear_trajectory(self, small_phi):
        v = solve_v(small_phi, ForcingSpec.single_mode(0.2), 0.5, 0.01)
        assert duhamel_residual(v, small_phi, ForcingSpec.single_mode(0.2), nonlinear=False) < 1e-14


class TestTimeDerivative:
    def test_exact_for_quadratic(self):
        grid = Grid1D(4)
        u = solve_v(Field.zeros(grid), ForcingSpec.zero(), 1.0, 0.1)
        t = u.times[:, None]
        q = u.with_coeffs(np.ones((len(u), 4)) * t**2)
        assert_allclose(time_derivative(q).coeffs, 2 * np.broadcast_to(t, (len(u), 4)), atol=1e-12)


class TestExampleCases:
    def test_v_delegates_to_linear_solver(self, small_phi):
        f = ForcingSpec.single_mode(0.1)
        assert np.array_equal(solve_v(small_phi, f, 0.5, 0.01).coeffs, solve_linear_forced(small_phi, f, 0.5, 0.01).coeffs)

    def test_zero_data_converges_at_once(self):
        u, report = picard_solve(Field.zeros(Grid1D(K)), ForcingSpec.zero(), 0.5, 0.01)
        assert report.iterations == 1 and report.converged
        assert np.all(u.coeffs == 0.0)

    def test_corrupted_snapshot_detected(self, small_phi):
        f = ForcingSpec.single_mode(0.01, 1, theta=1.0, temporal="cos")
        traj = solve(small_phi, f, 0.0, 1.0, SolverConfig(n_modes=K, dt=1e-3))
        bad = traj.coeffs.copy()
        bad[500, 0] += 1e-3
        assert duhamel_residual(traj.with_coeffs(bad), small_phi, f) >= 5e-4
        assert duhamel_residual(traj, small_phi, f) <= 1e-5
