"""Mild solutions through the ``u = v + w`` splitting and Picard iteration.

``v`` solves the forced linear problem from ``phi``; ``w`` is the fixed point of

    Gamma(w)(t) = -int_0^t e^{A (t - s)} R [w w_x + (v w)_x + v v_x](s) ds,

whose integrand collapses to ``R P[((v + w)^2 / 2)_x]``. Integrals use the Simpson
recursion of :class:`~bbmburgers.linear.DuhamelIntegrator` on the trajectory grid.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DimensionError, NonConvergenceError
from .forcing import ForcingSpec
from .linear import DuhamelIntegrator, assemble_generator, resolvent_diagonal, solve_linear_forced
from .spectral import FloatArray, Field, Grid1D, bessel_norm_coeffs, burgers_term
from .trajectory import Trajectory, check_same_times


def solve_v(phi: Field, f: ForcingSpec, T: float, dt: float) -> Trajectory:
    """Linear part of the splitting."""
    return solve_linear_forced(phi, f, T, dt)


def _integrand(coeffs: FloatArray, grid: Grid1D) -> FloatArray:
    padded = Grid1D.with_dealiasing(grid.n_modes)
    return resolvent_diagonal(grid) * burgers_term(coeffs, padded)


def _gamma(w: FloatArray, v: FloatArray, integ: DuhamelIntegrator, grid: Grid1D) -> FloatArray:
    return -integ.integrate(_integrand(v + w, grid))


def _check_dt(traj: Trajectory, dt: float) -> None:
    if len(traj) > 1 and abs(traj.spacing - dt) > 1e-9 * dt:
        raise DimensionError(f"trajectory spacing {traj.spacing} differs from dt={dt}")


def gamma_map(w: Trajectory, v: Trajectory, dt: float) -> Trajectory:
    """One application of ``Gamma``."""
    check_same_times(w, v)
    _check_dt(v, dt)
    integ = DuhamelIntegrator(assemble_generator(v.grid), dt)
    return v.with_coeffs(_gamma(w.coeffs, v.coeffs, integ, v.grid), solver="gamma")


def contraction_estimate(w1: Trajectory, w2: Trajectory, v: Trajectory, dt: float) -> float:
    """``||Gamma(w1) - Gamma(w2)||_{Y^1} / ||w1 - w2||_{Y^1}``."""
    num = (gamma_map(w1, v, dt) - gamma_map(w2, v, dt)).y_norm(1.0)
    return num / (w1 - w2).y_norm(1.0)


@dataclass
class PicardReport:
    """Per-iteration ``Y^1`` increments and their ratios."""

    y1_delta: list[float] = field(default_factory=list)
    contraction_ratio: list[float] = field(default_factory=list)
    converged: bool = False
    tol: float = 0.0

    @property
    def iterations(self) -> int:
        return len(self.y1_delta)

    def geometric_fit(self) -> tuple[float, float] | None:
        """Per-iteration ratio and ``R^2`` of a log-linear fit of the increments.

        Needs three positive increments; returns ``None`` otherwise.
        """
        deltas = np.array(self.y1_delta)
        deltas = deltas[deltas > 0]
        if deltas.size < 3:
            return None
        idx = np.arange(deltas.size, dtype=float)
        y = np.log(deltas)
        slope, intercept = np.polyfit(idx, y, 1)
        ss_tot = float(np.sum((y - y.mean()) ** 2))
        r2 = 1.0 - float(np.sum((y - slope * idx - intercept) ** 2)) / ss_tot if ss_tot > 0 else 0.0
        return float(math.exp(slope)), r2

    def to_csv(self, path: str | Path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iter", "y1_delta", "contraction_ratio"])
            for i, (d, r) in enumerate(zip(self.y1_delta, self.contraction_ratio), start=1):
                writer.writerow([i, f"{d:.17g}", "" if math.isnan(r) else f"{r:.17g}"])


def picard_solve(
    phi: Field, f: ForcingSpec, T: float, dt: float, tol: float = 1e-12, max_iter: int = 50
) -> tuple[Trajectory, PicardReport]:
    """Iterate ``w^{n+1} = Gamma(w^n)`` from ``w^0 = 0`` and return ``v + w``.

    Raises:
        NonConvergenceError: With the ratio history if ``max_iter`` is exhausted.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    v = solve_v(phi, f, T, dt)
    integ = DuhamelIntegrator(assemble_generator(v.grid), dt)
    report = PicardReport(tol=tol)
    w = np.zeros_like(v.coeffs)
    for _ in range(max_iter):
        w_new = _gamma(w, v.coeffs, integ, v.grid)
        delta = v.with_coeffs(w_new - w).y_norm(1.0)
        prev = report.y1_delta[-1] if report.y1_delta else math.nan
        report.y1_delta.append(delta)
        report.contraction_ratio.append(delta / prev if prev and prev > 0 else math.nan)
        w = w_new
        if delta < tol:
            report.converged = True
            u = v.with_coeffs(v.coeffs + w, solver="picard")
            u.metadata["w"] = v.with_coeffs(w)
            return u, report
    raise NonConvergenceError(
        f"Picard iteration did not reach tol={tol} in {max_iter} iterations",
        history=report.contraction_ratio,
    )


def duhamel_residual(
    traj: Trajectory, phi: Field, f: ForcingSpec, nonlinear: bool = True
) -> float:
    """``sup_t || u(t) - e^{At} phi - int_0^t e^{A(t-s)} R (f - u u_x) ds ||_{H^1}``."""
    dt = traj.spacing
    grid = traj.grid
    integ = DuhamelIntegrator(assemble_generator(grid), dt)
    g = np.zeros_like(traj.coeffs)
    if not f.is_zero:
        g += resolvent_diagonal(grid) * f.coeffs(traj.times, grid)
    if nonlinear:
        g -= _integrand(traj.coeffs, grid)
    mild = integ.propagate(phi.coeffs, len(traj) - 1) + integ.integrate(g)
    return float(np.max(bessel_norm_coeffs(traj.coeffs - mild, grid, 1.0)))


def time_derivative(traj: Trajectory) -> Trajectory:
    """Second-order finite-difference ``u_t`` on the trajectory grid."""
    return traj.with_coeffs(np.gradient(traj.coeffs, traj.times, axis=0, edge_order=2))
