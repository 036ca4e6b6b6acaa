"""Time-stamped sequences of fields with norm and energy diagnostics."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any, Iterable

import numpy as np
from numpy.typing import ArrayLike
from scipy.integrate import trapezoid

from .errors import AlignmentError, DimensionError, DomainError
from .spectral import FloatArray, Field, Grid1D, bessel_norm_coeffs, gradient_l2_sq

DIAGNOSTIC_COLUMNS = ("t", "norm_L2", "norm_H1", "norm_H2", "norm_H3", "energy")


def uniform_steps(T: float, dt: float) -> int:
    """Number of steps of size ``dt`` covering ``T`` exactly.

    Raises:
        DomainError: If ``T`` or ``dt`` is not positive.
        AlignmentError: If ``dt`` does not divide ``T``.
    """
    if not (T > 0 and dt > 0):
        raise DomainError(f"T and dt must be positive, got T={T}, dt={dt}")
    n = int(round(T / dt))
    if n < 1 or abs(n * dt - T) > 1e-9 * max(T, 1.0):
        raise AlignmentError(f"dt={dt} does not divide T={T}")
    return n


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Snapshots ``u(t_i)`` stored as a ``(n_times, K)`` coefficient array.

    Attributes:
        grid: Spatial grid shared by all snapshots.
        times: Strictly increasing sample times.
        coeffs: Sine coefficients, one row per time.
        metadata: Free-form provenance (scheme, dt, ...).
    """

    grid: Grid1D
    times: FloatArray
    coeffs: FloatArray
    metadata: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        times = np.array(self.times, dtype=float)
        coeffs = np.array(self.coeffs, dtype=float)
        if times.ndim != 1 or coeffs.ndim != 2 or coeffs.shape[0] != times.size:
            raise DimensionError("coeffs must have one row per time")
        if coeffs.shape[1] != self.grid.n_modes:
            raise DimensionError(f"snapshots have {coeffs.shape[1]} modes, grid has {self.grid.n_modes}")
        if times.size > 1 and np.any(np.diff(times) <= 0):
            raise DomainError("times must be strictly increasing")
        times.setflags(write=False)
        coeffs.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "coeffs", coeffs)

    def __len__(self) -> int:
        return self.times.size

    @property
    def tau(self) -> float:
        return float(self.times[0])

    @property
    def horizon(self) -> float:
        return float(self.times[-1] - self.times[0])

    @property
    def spacing(self) -> float:
        """Snapshot spacing; raises if the grid is not uniform."""
        steps = np.diff(self.times)
        if steps.size == 0:
            raise DomainError("a single snapshot has no spacing")
        if np.ptp(steps) > 1e-9 * max(steps[0], 1e-300) + 1e-12:
            raise AlignmentError("snapshot times are not uniformly spaced")
        return float(np.mean(steps))

    def snapshot(self, i: int) -> Field:
        return Field.from_coeffs(self.grid, self.coeffs[i])

    @property
    def snapshots(self) -> list[Field]:
        return [self.snapshot(i) for i in range(len(self))]

    @property
    def final(self) -> Field:
        return self.snapshot(-1)

    def norms(self, s: float) -> FloatArray:
        """``||u(t_i)||_{H^s}`` for every snapshot."""
        return np.asarray(bessel_norm_coeffs(self.coeffs, self.grid, s))

    @cached_property
    def energy(self) -> FloatArray:
        """``||u||^2 + ||u_x||^2``."""
        return np.sum(self.coeffs**2, axis=-1) + gradient_l2_sq(self.coeffs, self.grid)

    @cached_property
    def diagnostics(self) -> dict[str, FloatArray]:
        out = {"t": self.times}
        for s in range(4):
            out[f"norm_{'L2' if s == 0 else f'H{s}'}"] = self.norms(float(s))
        out["energy"] = self.energy
        return out

    def y_functionals(self, ells: Iterable[float] = (1.0, 2.0, 3.0)) -> dict[float, dict[str, float]]:
        """``sup_t ||u||_{H^l}``, ``(int ||u||^2_{H^l} dt)^{1/2}`` and the combined norm."""
        out: dict[float, dict[str, float]] = {}
        for ell in ells:
            sq = self.norms(ell) ** 2
            sup = float(np.sqrt(sq.max()))
            l2 = float(np.sqrt(trapezoid(sq, self.times))) if len(self) > 1 else 0.0
            out[float(ell)] = {"sup": sup, "l2": l2, "y": float(np.hypot(sup, l2))}
        return out

    def y_norm(self, ell: float = 1.0) -> float:
        """Mixed norm ``(sup_t ||u||^2 + int ||u||^2 dt)^{1/2}`` in ``H^ell``."""
        return self.y_functionals((ell,))[float(ell)]["y"]

    def with_coeffs(self, coeffs: ArrayLike, **metadata: Any) -> Trajectory:
        """Same times, new snapshots."""
        return Trajectory(self.grid, self.times, np.asarray(coeffs), {**self.metadata, **metadata})

    def __sub__(self, other: Trajectory) -> Trajectory:
        check_same_times(self, other)
        return self.with_coeffs(self.coeffs - other.coeffs)

    def __add__(self, other: Trajectory) -> Trajectory:
        check_same_times(self, other)
        return self.with_coeffs(self.coeffs + other.coeffs)

    def index_of(self, t: float, tol: float = 1e-9) -> int:
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) > tol * max(1.0, abs(t)):
            raise DomainError(f"time {t} is not a sample time")
        return i

    def to_csv(self, path: str | Path) -> None:
        """Write the diagnostic table at 17 significant digits."""
        diag = self.diagnostics
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(DIAGNOSTIC_COLUMNS)
            for i in range(len(self)):
                writer.writerow([f"{diag[c][i]:.17g}" for c in DIAGNOSTIC_COLUMNS])


def check_same_times(a: Trajectory, b: Trajectory) -> None:
    if a.grid.n_modes != b.grid.n_modes:
        raise DimensionError("trajectories live on different grids")
    if a.times.shape != b.times.shape or not np.allclose(a.times, b.times, rtol=0, atol=1e-12):
        raise DimensionError("trajectories are sampled on different time grids")
