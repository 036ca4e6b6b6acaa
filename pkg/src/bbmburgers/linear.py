"""Generator of the linear dispersive-dissipative flow and its semigroup.

The linear problem ``u_t + u_x - u_xx - u_xxt = f`` becomes, after applying the
resolvent ``R = (I - Delta)^{-1}``, the ODE ``u_t = A u + R f`` with

    A = -R D - I + R,

where ``D`` is the Galerkin matrix of ``d/dx`` in the sine basis. ``A`` is bounded,
so the semigroup is a dense matrix exponential.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike
from scipy.linalg import expm, lu_factor, lu_solve

from .errors import DimensionError, DomainError
from .forcing import ForcingSpec
from .spectral import FloatArray, Field, Grid1D, gradient_l2_sq
from .trajectory import Trajectory, uniform_steps


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    """A linear operator in the orthonormal sine basis."""

    entries: FloatArray
    name: str = ""

    def __post_init__(self) -> None:
        m = np.array(self.entries, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionError("operator matrix must be square")
        if not np.all(np.isfinite(m)):
            raise ValueError("operator matrix has non-finite entries")
        m.setflags(write=False)
        object.__setattr__(self, "entries", m)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def apply(self, u: Field) -> Field:
        if u.grid.n_modes != self.dim:
            raise DimensionError(f"operator of size {self.dim} applied to {u.grid.n_modes} modes")
        return Field.from_coeffs(u.grid, self.entries @ u.coeffs)

    def __matmul__(self, other: ArrayLike) -> FloatArray:
        return self.entries @ np.asarray(other)


def derivative_matrix(grid: Grid1D) -> OperatorMatrix:
    """``D_kj = <phi_j', phi_k> = 4jk/(k^2 - j^2)`` for odd ``j + k``, else 0."""
    k = np.arange(1, grid.n_modes + 1, dtype=float)
    kk, jj = np.meshgrid(k, k, indexing="ij")
    odd = ((kk + jj) % 2) == 1
    D = np.zeros_like(kk)
    D[odd] = 4.0 * jj[odd] * kk[odd] / (kk[odd] ** 2 - jj[odd] ** 2)
    return OperatorMatrix(D, "D")


def resolvent_diagonal(grid: Grid1D) -> FloatArray:
    """Diagonal of ``(I - Delta)^{-1}``."""
    return 1.0 / grid.eigenvalues


def generator_from_derivative(D: ArrayLike, grid: Grid1D) -> OperatorMatrix:
    """``A = -R D - I + R`` for a given transport matrix ``D``."""
    r = resolvent_diagonal(grid)
    A = -r[:, None] * np.asarray(D) - np.eye(grid.n_modes) + np.diag(r)
    return OperatorMatrix(A, "A")


def assemble_generator(grid: Grid1D) -> OperatorMatrix:
    """Galerkin matrix of the generator ``A``."""
    return generator_from_derivative(derivative_matrix(grid).entries, grid)


def semigroup_matrix(A: OperatorMatrix, t: float) -> FloatArray:
    """``e^{A t}`` by scaling and squaring."""
    if t < 0:
        raise DomainError(f"semigroup time must be >= 0, got {t}")
    if t == 0:
        return np.eye(A.dim)
    return expm(A.entries * t)


def semigroup_apply(A: OperatorMatrix, t: float, phi: Field) -> Field:
    """``e^{A t} phi``."""
    if t < 0:
        raise DomainError(f"semigroup time must be >= 0, got {t}")
    if t == 0:
        return Field.from_coeffs(phi.grid, phi.coeffs.copy())
    return Field.from_coeffs(phi.grid, semigroup_matrix(A, t) @ phi.coeffs)


def h1_weighted_symmetric_part(A: OperatorMatrix, grid: Grid1D) -> FloatArray:
    """Symmetric part of ``W A`` with ``W = diag(1 + k^2 pi^2)``; NSD iff dissipative in ``H^1``."""
    WA = grid.eigenvalues[:, None] * A.entries
    return 0.5 * (WA + WA.T)


def hs_operator_norm(M: ArrayLike, grid: Grid1D, s: float = 1.0) -> float:
    """Operator norm of ``M`` on ``H^s``."""
    w = grid.eigenvalues ** (s / 2)
    return float(np.linalg.norm(w[:, None] * np.asarray(M) / w[None, :], 2))


def spectral_abscissa(A: OperatorMatrix) -> float:
    return float(np.max(np.linalg.eigvals(A.entries).real))


def steady_state(A: OperatorMatrix, forcing_coeffs: ArrayLike, grid: Grid1D) -> Field:
    """Solve ``A u + R f = 0`` directly."""
    rhs = resolvent_diagonal(grid) * np.asarray(forcing_coeffs, dtype=float)
    return Field.from_coeffs(grid, -np.linalg.solve(A.entries, rhs))


class DuhamelIntegrator:
    """Simpson quadrature of ``I_n = int_0^{t_n} e^{A (t_n - s)} g(s) ds`` on a uniform grid.

    Even indices use composite Simpson; odd indices ``n >= 3`` combine Simpson on
    ``[0, t_{n-3}]`` with the 3/8 rule on the last three panels; ``n = 1`` uses the
    three-point Lagrange rule over the first panel. All weights are built from the
    precomputed increments ``e^{A dt}``, its square, cube and inverse.
    """

    def __init__(self, A: OperatorMatrix, dt: float) -> None:
        if dt <= 0:
            raise DomainError(f"dt must be positive, got {dt}")
        self.A = A
        self.dt = float(dt)
        self.E = semigroup_matrix(A, dt)
        self.E2 = self.E @ self.E
        self.E3 = self.E2 @ self.E
        self.Einv = semigroup_matrix(OperatorMatrix(-A.entries), dt)

    def propagate(self, c0: ArrayLike, n_steps: int) -> FloatArray:
        """Rows ``e^{A n dt} c0`` for ``n = 0..n_steps``."""
        out = np.empty((n_steps + 1, self.A.dim))
        out[0] = c0
        for n in range(n_steps):
            out[n + 1] = self.E @ out[n]
        return out

    def integrate(self, g: ArrayLike) -> FloatArray:
        """Duhamel integrals at every grid time for integrand samples ``g`` of shape ``(n_t, K)``."""
        g = np.asarray(g, dtype=float)
        n_t = g.shape[0]
        out = np.zeros_like(g)
        if n_t < 2:
            return out
        dt, E, E2, E3 = self.dt, self.E, self.E2, self.E3
        if n_t == 2:
            out[1] = 0.5 * dt * (E @ g[0] + g[1])
            return out
        Eg = g @ E.T
        E2g = g @ E2.T
        for n in range(2, n_t, 2):
            out[n] = E2 @ out[n - 2] + dt / 3.0 * (E2g[n - 2] + 4.0 * Eg[n - 1] + g[n])
        out[1] = dt * (5.0 / 12.0 * Eg[0] + 8.0 / 12.0 * g[1] - 1.0 / 12.0 * (self.Einv @ g[2]))
        for n in range(3, n_t, 2):
            out[n] = E3 @ out[n - 3] + 3.0 * dt / 8.0 * (
                E3 @ g[n - 3] + 3.0 * E2g[n - 2] + 3.0 * Eg[n - 1] + g[n]
            )
        return out


def solve_linear_homogeneous(phi: Field, T: float, dt: float, tau: float = 0.0) -> Trajectory:
    """Exact semigroup trajectory ``e^{A t} phi`` sampled every ``dt``."""
    n = uniform_steps(T, dt)
    A = assemble_generator(phi.grid)
    integ = DuhamelIntegrator(A, dt)
    times = tau + dt * np.arange(n + 1)
    return Trajectory(phi.grid, times, integ.propagate(phi.coeffs, n), {"solver": "semigroup", "dt": dt})


def solve_linear_forced(
    phi: Field, f: ForcingSpec, T: float, dt: float, tau: float = 0.0
) -> Trajectory:
    """Mild solution ``e^{A t} phi + int_0^t e^{A(t-s)} R f(s) ds`` with Simpson quadrature."""
    n = uniform_steps(T, dt)
    grid = phi.grid
    A = assemble_generator(grid)
    integ = DuhamelIntegrator(A, dt)
    times = tau + dt * np.arange(n + 1)
    coeffs = integ.propagate(phi.coeffs, n)
    if not f.is_zero:
        coeffs = coeffs + integ.integrate(resolvent_diagonal(grid) * f.coeffs(times, grid))
    return Trajectory(grid, times, coeffs, {"solver": "semigroup+simpson", "dt": dt})


def energy_identity_residual(traj: Trajectory) -> FloatArray:
    """Per-step ``d/dt(||u||^2 + ||u_x||^2) + 2 ||u_x||^2`` for the unforced linear flow.

    The time derivative is a forward difference and ``||u_x||^2`` is taken at the
    averaged snapshot, so the residual is second order in the spacing.
    """
    mid = 0.5 * (traj.coeffs[1:] + traj.coeffs[:-1])
    return np.diff(traj.energy) / np.diff(traj.times) + 2.0 * gradient_l2_sq(mid, traj.grid)


class CrankNicolson:
    """Crank-Nicolson propagators for ``u_t = A u + s``.

    One step is ``u_new = P u + dt Q s_half`` with ``Q = (I - dt/2 A)^{-1}`` and
    ``P = Q (I + dt/2 A)``.
    """

    def __init__(self, A: OperatorMatrix, dt: float) -> None:
        eye = np.eye(A.dim)
        self.dt = float(dt)
        lu = lu_factor(eye - 0.5 * dt * A.entries)
        self.Q = lu_solve(lu, eye)
        self.P = self.Q @ (eye + 0.5 * dt * A.entries)
