"""Pseudo-parabolic extension with pluggable (F, Phi, G)."""

import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.testing import assert_allclose
from scipy import integrate

from bbmburgers.errors import DimensionError, DomainError, EvaluationError
from bbmburgers.forcing import ForcingSpec
from bbmburgers.linear import assemble_generator
from bbmburgers.pseudo import (
    REGISTRY,
    NonlinearityTriple,
    absorbing_check,
    assemble_rhs,
    check_assumptions,
    flux_integrals,
    get_triple,
    solve_pseudo,
)
from bbmburgers.spectral import Field, Grid1D, flux_integral, random_field
from bbmburgers.stepper import SolverConfig, solve

SQ2 = math.sqrt(2.0)
K = 32
CFG = SolverConfig(n_modes=K, dt=0.01)


def _phi(h1: float = 0.5, seed: int = 5) -> Field:
    return random_field(Grid1D(K), seed, h1_norm=h1)


class TestTriples:
    def test_registry(self):
        assert set(REGISTRY) >= {"burgers", "cubic", "cubic-damped", "zero"}
        assert get_triple("cubic").degree == 3
        with pytest.raises(KeyError):
            get_triple("quartic")

    def test_polynomial_derivatives(self):
        t = NonlinearityTriple.polynomial(F=[0, 1, 2], Phi=[0, 3], G=[1, 0, 0, 4])
        x = np.array([0.0, 1.0, -2.0])
        assert_allclose(t.F_prime(x), 1 + 4 * x)
        assert_allclose(t.Phi_prime(x), 3.0)
        assert_allclose(t.G_prime(x), 12 * x**2)
        assert t.zero_terms == frozenset()
        assert REGISTRY["burgers"].zero_terms == frozenset({"Phi", "G"})

    @pytest.mark.parametrize("degree, J", [(2, 48), (3, 64), (5, 96)])
    def test_padding_by_degree(self, degree, J):
        t = NonlinearityTriple.polynomial(F=[0] * degree + [1])
        assert t.padded_grid(K).dealias_modes == J


class TestAssumptions:
    @pytest.mark.parametrize("name", sorted(REGISTRY))
    def test_registry_passes(self, name):
        assert check_assumptions(get_triple(name)).passed

    def test_declared_bounds_take_precedence(self):
        report = check_assumptions(get_triple("cubic-damped"))
        assert report.sources == {"sup_G_prime": "declared", "inf_Phi_prime": "declared"}
        assert report.warnings == ()

    @pytest.mark.parametrize(
        "kw, failing",
        [
            ({"G": [0, 3.0]}, {"poincare", "gap"}),
            ({"Phi": [0, -1.0]}, {"gap"}),
            ({"F": [1.0, 1.0]}, {"F_zero"}),
        ],
    )
    def test_failures(self, kw, failing):
        assert set(check_assumptions(NonlinearityTriple.polynomial(**kw)).failures) == failing

    def test_wrong_derivative(self):
        t = NonlinearityTriple(F=np.sin, F_prime=np.sin)
        assert check_assumptions(t).failures == ["derivative"]

    def test_sampled_bounds_warn(self):
        report = check_assumptions(NonlinearityTriple.polynomial(G=[0, 0.1]))
        assert report.sources["sup_G_prime"] == "sampled"
        assert len(report.warnings) == 2

    def test_bad_sample_range(self):
        with pytest.raises(DomainError):
            check_assumptions(get_triple("zero"), (1.0, 1.0))


class TestAssembleRHS:
    def test_against_quadrature(self):
        # (I - Delta) u_t = -u_x + u_xx - (u^3)_x + (0.2 u_x^3)_x + (I - Delta)(-u^3)
        grid = Grid1D(8)
        c = np.array([0.4, -0.3, 0.2, 0.1, 0, 0, 0, 0])
        k = np.arange(1, 9)
        u = lambda x: np.sum(c * SQ2 * np.sin(k * np.pi * x))
        ux = lambda x: np.sum(c * SQ2 * k * np.pi * np.cos(k * np.pi * x))
        uxx = lambda x: -np.sum(c * SQ2 * (k * np.pi) ** 2 * np.sin(k * np.pi * x))

        def G_minus_Gxx(x):
            return -u(x) ** 3 + 6 * u(x) * ux(x) ** 2 + 3 * u(x) ** 2 * uxx(x)

        def rhs(x):
            return (-ux(x) + uxx(x) - 3 * u(x) ** 2 * ux(x) + 0.6 * ux(x) ** 2 * uxx(x) + G_minus_Gxx(x))

        triple = NonlinearityTriple.polynomial(F=[0, 0, 0, 1], Phi=[0, 0, 0, 0.2], G=[0, 0, 0, -1])
        got = assemble_rhs(Field.from_coeffs(grid, c), triple).coeffs
        oracle = [integrate.quad(lambda x, j=j: rhs(x) * SQ2 * np.sin(j * np.pi * x), 0, 1, limit=200)[0] for j in k]
        assert_allclose(got, oracle, atol=1e-9)

    def test_forcing_adds(self):
        grid = Grid1D(8)
        u = Field.mode(grid, 1, 0.1)
        f = Field.mode(grid, 2, 1.0)
        t = get_triple("burgers")
        assert_allclose(assemble_rhs(u, t, f).coeffs - assemble_rhs(u, t).coeffs, f.coeffs, atol=1e-15)

    def test_nonfinite_evaluation(self):
        t = NonlinearityTriple(F=lambda x: np.full_like(x, np.nan))
        with pytest.raises(EvaluationError) as info:
            assemble_rhs(Field.mode(Grid1D(8), 1), t)
        assert info.value.term == "F"


class TestSolvePseudo:
    def test_burgers_triple_reproduces_bbm_stepper(self):
        phi = _phi()
        f = ForcingSpec.single_mode(0.05, 1, theta=1.0, temporal="cos")
        a = solve_pseudo(phi, get_triple("burgers"), f, 1.0, CFG)
        b = solve(phi, f, 0.0, 1.0, CFG)
        assert_allclose(a.coeffs, b.coeffs, atol=1e-14)

    def test_zero_triple_is_linear(self):
        phi = _phi()
        a = solve_pseudo(phi, get_triple("zero"), ForcingSpec.zero(), 0.5, CFG)
        b = solve(phi, ForcingSpec.zero(), 0.0, 0.5, CFG.with_(nonlinear=False))
        assert_allclose(a.coeffs, b.coeffs, atol=1e-15)

    def test_warns_on_failed_assumptions(self):
        with pytest.warns(UserWarning, match="fails assumption"):
            solve_pseudo(_phi(), NonlinearityTriple.polynomial(G=[0, 3.0]), ForcingSpec.zero(), 0.1, CFG)

    def test_registry_triples_do_not_warn(self):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            solve_pseudo(_phi(), get_triple("cubic-damped"), ForcingSpec.zero(), 0.1, CFG)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            solve_pseudo(random_field(Grid1D(8), 0), get_triple("cubic"), ForcingSpec.zero(), 0.1, CFG)

    @given(st.integers(0, 2**31), st.floats(0.1, 4.0))
    def test_flux_integral_vanishes(self, seed, h1):
        grid = Grid1D(K)
        triple = get_triple("cubic")
        traj = solve_pseudo(random_field(grid, seed, h1_norm=h1), triple, ForcingSpec.zero(), 0.02, CFG)
        assert np.max(np.abs(flux_integrals(traj, triple))) < 1e-13 * max(1.0, h1**4)


    def test_flux_integral_matches_trapezoid_for_even_flux(self):
        triple = get_triple("burgers")
        traj = solve_pseudo(_phi(2.0), triple, ForcingSpec.zero(), 0.02, CFG)
        grid = triple.padded_grid(K)
        trap = [flux_integral(c, grid, triple.F) for c in traj.coeffs]
        assert_allclose(flux_integrals(traj, triple), trap, atol=1e-13)

    def test_damping_is_dissipative(self):
        # G-contribution to <rhs, u> for G = -u^3 on u = 0.1 sqrt2 sin(pi x)
        grid = Grid1D(K)
        u = Field.mode(grid, 1, 0.1)
        damped = assemble_rhs(u, NonlinearityTriple.polynomial(G=[0, 0, 0, -1])).coeffs
        bare = assemble_rhs(u, get_triple("zero")).coeffs
        contribution = np.dot(damped - bare, u.coeffs)
        assert contribution < 0
        # <(I - Delta)(-u^3), u> = -int u^4 - 3 int u^2 u_x^2
        x = lambda y: 0.1 * SQ2 * np.sin(np.pi * y)
        xd = lambda y: 0.1 * SQ2 * np.pi * np.cos(np.pi * y)
        exact = -integrate.quad(lambda y: x(y) ** 4 + 3 * x(y) ** 2 * xd(y) ** 2, 0, 1)[0]
        assert_allclose(contribution, exact, rtol=1e-12)


class TestAbsorbing:
    def test_unforced_decays_to_zero(self):
        traj = solve_pseudo(_phi(3.0), get_triple("cubic-damped"), ForcingSpec.zero(), 30.0, CFG.with_(save_every=10))
        report = absorbing_check(traj, 0.0, settle_time=25.0)
        assert report.passes()
        assert report.transient_rate > 0.5

    def test_forced_plateau_scales_with_delta(self):
        f = ForcingSpec.single_mode(0.01, 1, theta=1.0, temporal="cos")
        traj = solve_pseudo(_phi(3.0), get_triple("cubic-damped"), f, 20.0, CFG.with_(save_every=10))
        report = absorbing_check(traj, 0.01, settle_time=15.0)
        assert report.passes()
        assert report.plateau_ratio < 1.0

    def test_settle_time_beyond_horizon(self):
        traj = solve_pseudo(_phi(), get_triple("zero"), ForcingSpec.zero(), 1.0, CFG)
        with pytest.raises(DomainError):
            absorbing_check(traj, 0.0, settle_time=5.0)


class TestExampleCases:
    def test_linear_stabiliser_fails_gap_only(self):
        report = check_assumptions(NonlinearityTriple.polynomial(G=[0, 1.0]))
        assert report.poincare_ok and not report.gap_ok
        assert report.failures == ["gap"]

    def test_cubic_convection_zero_at_origin(self):
        assert check_assumptions(NonlinearityTriple.polynomial(F=[0, 0, 0, 1])).F_zero_ok
        assert not check_assumptions(NonlinearityTriple.polynomial(F=[1, 0, 0, 1])).F_zero_ok

    def test_zero_triple_is_linear_operator(self, rng):
        grid = Grid1D(K)
        u = random_field(grid, rng)
        rhs = assemble_rhs(u, get_triple("zero")).coeffs
        assert_allclose(rhs, grid.eigenvalues * (assemble_generator(grid) @ u.coeffs), atol=1e-12)

    def test_doubling_delta_at_most_quadruples_plateau(self):
        triple = get_triple("cubic-damped")
        phi = _phi(3.0)
        plateaus = []
        for delta in (0.01, 0.02):
            f = ForcingSpec.single_mode(delta, 1, theta=1.0, temporal="cos")
            traj = solve_pseudo(phi, triple, f, 20.0, CFG.with_(save_every=10))
            plateaus.append(absorbing_check(traj, delta, settle_time=15.0).plateau)
        assert plateaus[0] < plateaus[1] <= 4 * plateaus[0]
