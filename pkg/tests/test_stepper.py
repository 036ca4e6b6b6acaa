"""Crank-Nicolson IMEX stepper for the forced BBM-Burgers flow."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from bbmburgers.errors import AlignmentError, BlowUpError, DimensionError, DomainError, StepFailure
from bbmburgers.forcing import ForcingSpec
from bbmburgers.linear import assemble_generator, semigroup_apply
from bbmburgers.spectral import Field, Grid1D, bessel_norm, random_field
from bbmburgers.stepper import (
    Scheme,
    SolverConfig,
    cubic_integrals,
    data_norm,
    energy_residual,
    make_stepper,
    solve,
    step,
)

K = 32


def _cfg(**kw) -> SolverConfig:
    return SolverConfig(n_modes=K, **{"dt": 1e-2, **kw})


def _phi(h1: float = 0.5, seed: int = 3) -> Field:
    return random_field(Grid1D(K), seed, h1_norm=h1)


class TestSolverConfig:
    def test_defaults(self):
        cfg = SolverConfig()
        assert cfg.n_modes == 128 and cfg.dt == 1e-3 and cfg.scheme is Scheme.CN_AB2
        assert cfg.grid().dealias_modes == 192

    def test_scheme_from_string(self):
        assert SolverConfig(scheme="CN_FIXEDPOINT").scheme is Scheme.CN_FIXEDPOINT

    @pytest.mark.parametrize("kw", [{"dt": 0.0}, {"n_modes": 0}, {"save_every": 0}, {"fixedpoint_tol": -1.0}])
    def test_rejects(self, kw):
        with pytest.raises(DomainError):
            SolverConfig(**kw)

    def test_unknown_scheme(self):
        with pytest.raises(ValueError):
            SolverConfig(scheme="RK4")


class TestLinearLimit:
    @pytest.mark.parametrize("scheme", list(Scheme))
    def test_second_order_towards_semigroup(self, scheme):
        phi = _phi(1.0)
        exact = semigroup_apply(assemble_generator(phi.grid), 1.0, phi)
        errs = [
            bessel_norm(solve(phi, ForcingSpec.zero(), 0.0, 1.0, _cfg(dt=dt, nonlinear=False, scheme=scheme)).final - exact, 1.0)
            for dt in (0.1, 0.05, 0.025)
        ]
        assert_allclose(np.log2(errs[0] / errs[1]), 2.0, atol=0.05)
        assert_allclose(np.log2(errs[1] / errs[2]), 2.0, atol=0.05)


class TestEnergy:
    def test_unforced_fixedpoint_identity_to_tolerance(self):
        # midpoint evaluation makes the cubic term vanish exactly in the discrete balance
        traj = solve(_phi(1.0), ForcingSpec.zero(), 0.0, 1.0, _cfg(scheme="CN_FIXEDPOINT", fixedpoint_tol=1e-13))
        assert np.max(np.abs(energy_residual(traj, ForcingSpec.zero()))) < 1e-10

    def test_forced_ab2_residual_second_order(self):
        f = ForcingSpec.single_mode(0.1, 1, theta=1.0, temporal="cos")
        res = [np.max(np.abs(energy_residual(solve(_phi(1.0), f, 0.0, 1.0, _cfg(dt=dt)), f))) for dt in (0.02, 0.01)]
        assert res[1] < 1e-5
        assert res[0] / res[1] > 3.0

    def test_energy_decays_unforced(self):
        traj = solve(_phi(2.0), ForcingSpec.zero(), 0.0, 2.0, _cfg())
        assert np.all(np.diff(traj.energy) < 0)

    def test_cubic_integrals_vanish(self):
        traj = solve(_phi(2.0), ForcingSpec.zero(), 0.0, 0.5, _cfg())
        assert np.max(np.abs(cubic_integrals(traj))) < 1e-13

    @settings(max_examples=10)
    @given(st.integers(0, 2**31), st.floats(0.1, 3.0))
    def test_h1_norm_never_grows_unforced(self, seed, h1):
        traj = solve(_phi(h1, seed), ForcingSpec.zero(), 0.0, 0.2, _cfg(dt=0.02, scheme="CN_FIXEDPOINT"))
        assert np.all(np.diff(traj.norms(1.0)) <= 1e-12)


class TestTemporalOrder:
    @pytest.mark.parametrize("scheme", list(Scheme))
    def test_self_convergence(self, scheme):
        f = ForcingSpec.single_mode(0.5, 1, theta=1.0, temporal="sin")
        phi = _phi(1.0)
        finals = [solve(phi, f, 0.0, 1.0, _cfg(dt=dt, scheme=scheme)).final for dt in (0.04, 0.02, 0.01, 0.005)]
        e = [bessel_norm(finals[i] - finals[i + 1], 1.0) for i in range(3)]
        assert_allclose(np.log2(e[1] / e[2]), 2.0, atol=0.1)

    def test_schemes_agree(self):
        phi = _phi(1.0)
        a = solve(phi, ForcingSpec.zero(), 0.0, 0.5, _cfg(dt=1e-3)).final
        b = solve(phi, ForcingSpec.zero(), 0.0, 0.5, _cfg(dt=1e-3, scheme="CN_FIXEDPOINT")).final
        assert bessel_norm(a - b, 1.0) < 1e-6


class TestStepAPI:
    def test_step_matches_first_run_step(self):
        phi = _phi(1.0)
        cfg = _cfg()
        one = step(phi, 0.0, cfg.dt, ForcingSpec.zero(), cfg)
        traj = solve(phi, ForcingSpec.zero(), 0.0, cfg.dt, cfg)
        assert_allclose(one.coeffs, traj.final.coeffs, atol=1e-15)

    def test_ab2_step_with_history(self):
        phi = _phi(1.0)
        cfg = _cfg()
        traj = solve(phi, ForcingSpec.zero(), 0.0, 2 * cfg.dt, cfg)
        u1 = traj.snapshot(1)
        u2 = step(u1, cfg.dt, cfg.dt, ForcingSpec.zero(), cfg, u_prev=phi)
        assert_allclose(u2.coeffs, traj.final.coeffs, atol=1e-15)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            solve(random_field(Grid1D(16), 0), ForcingSpec.zero(), 0.0, 0.1, _cfg())

    def test_misaligned_horizon(self):
        with pytest.raises(AlignmentError):
            solve(_phi(), ForcingSpec.zero(), 0.0, 0.105, _cfg())

    def test_save_every(self):
        traj = solve(_phi(), ForcingSpec.zero(), 0.5, 1.0, _cfg(save_every=10))
        assert_allclose(traj.times, 0.5 + 0.1 * np.arange(11), atol=1e-12)
        assert set(traj.metadata["y_functionals"]) == {1.0, 2.0, 3.0}

    def test_deterministic(self):
        a = solve(_phi(), ForcingSpec.single_mode(0.1), 0.0, 0.5, _cfg())
        b = solve(_phi(), ForcingSpec.single_mode(0.1), 0.0, 0.5, _cfg())
        assert np.array_equal(a.coeffs, b.coeffs)

    def test_zero_stays_zero(self):
        traj = solve(Field.zeros(Grid1D(K)), ForcingSpec.zero(), 0.0, 0.5, _cfg())
        assert np.all(traj.coeffs == 0.0)


class TestFailures:
    def test_blowup_guard_keeps_partial_trajectory(self):
        f = ForcingSpec.single_mode(100.0)
        with pytest.raises(BlowUpError) as info:
            solve(Field.zeros(Grid1D(K)), f, 0.0, 1.0, _cfg(blowup_threshold=1.0))
        partial = info.value.trajectory
        assert len(partial) >= 1
        assert info.value.time > 0
        assert np.all(partial.norms(1.0) <= 1.0)

    def test_fixedpoint_budget(self):
        cfg = _cfg(dt=0.1, scheme="CN_FIXEDPOINT", fixedpoint_max_iter=2, fixedpoint_tol=1e-15)
        with pytest.raises(StepFailure) as info:
            make_stepper(ForcingSpec.zero(), cfg).step_midpoint(_phi(50.0).coeffs, 0.0)
        assert info.value.residual > 0


class TestDataNorm:
    def test_unforced_is_initial_norm(self):
        phi = _phi(0.7)
        assert_allclose(data_norm(phi, ForcingSpec.zero(), 1.0, 0.01), 0.7, rtol=1e-12)

    def test_constant_forcing(self):
        grid = Grid1D(K)
        f = ForcingSpec.single_mode(2.0)
        # ||f||_{H^-1}^2 = 4 / (1 + pi^2) for the first mode, integrated over [0, 3]
        expected = math.sqrt(3 * 4 / (1 + math.pi**2))
        assert_allclose(data_norm(Field.zeros(grid), f, 3.0, 0.01), expected, rtol=1e-12)


class TestExampleCases:
    def test_small_data_step_matches_linear(self):
        grid = Grid1D(128)
        u0 = Field.mode(grid, 1, 0.01)
        one = step(u0, 0.0, 1e-3, ForcingSpec.zero(), SolverConfig(dt=1e-3))
        lin = semigroup_apply(assemble_generator(grid), 1e-3, u0)
        assert bessel_norm(one - lin, 1.0) <= 1e-7

    def test_step_halving_local_order(self):
        cfg = _cfg(scheme="CN_FIXEDPOINT", fixedpoint_tol=1e-14)
        u0 = _phi(1.0)
        f = ForcingSpec.single_mode(0.3, 1, theta=1.0, temporal="sin")
        errs = []
        for dt in (0.04, 0.02, 0.01):
            full = step(u0, 0.0, dt, f, cfg)
            half = step(step(u0, 0.0, dt / 2, f, cfg), dt / 2, dt / 2, f, cfg)
            errs.append(bessel_norm(full - half, 1.0))
        orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
        assert np.all((orders >= 2.7) & (orders <= 3.3))

    def test_zero_data_functionals(self):
        traj = solve(Field.zeros(Grid1D(K)), ForcingSpec.zero(), 0.0, 0.2, _cfg())
        for ell, vals in traj.metadata["y_functionals"].items():
            assert vals == {"sup": 0.0, "l2": 0.0, "y": 0.0}

    def test_linear_energy_residual(self):
        traj = solve(_phi(1.0), ForcingSpec.zero(), 0.0, 1.0, _cfg(dt=1e-3, nonlinear=False))
        assert np.max(np.abs(energy_residual(traj, ForcingSpec.zero()))) <= 1e-6

    def test_nonlinear_energy_residual_small_data(self):
        f = ForcingSpec.single_mode(0.01, 1, theta=1.0, temporal="cos")
        res = [np.max(np.abs(energy_residual(solve(_phi(0.05), f, 0.0, 1.0, _cfg(dt=dt)), f))) for dt in (2e-3, 1e-3)]
        assert res[1] <= 1e-5
        assert res[0] / res[1] > 3.5
