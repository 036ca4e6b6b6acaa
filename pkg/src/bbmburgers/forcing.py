"""Space-time forcing ``f(x, t)`` with an optional temporal period."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from numpy.typing import ArrayLike

from .errors import DomainError
from .spectral import FloatArray, Grid1D, bessel_norm_coeffs

TEMPORAL_PROFILES = ("const", "cos", "sin")


@dataclass(frozen=True)
class ForcingSpec:
    """Separable forcing ``amplitude * g(x) * p(t)`` or a user profile.

    Attributes:
        modes: Sine coefficients of the spatial shape ``g`` (mode 1 first).
        amplitude: Scale ``delta``.
        theta: Temporal period; 0 means aperiodic.
        temporal: One of ``const``, ``cos`` (``cos(2 pi t / theta)``) or ``sin``.
        custom: Optional callable ``(t, grid) -> K coefficients`` replacing the
            separable form. When ``theta > 0`` it is evaluated at ``t mod theta``,
            so periodicity holds by construction.
    """

    modes: tuple[float, ...] = ()
    amplitude: float = 0.0
    theta: float = 0.0
    temporal: str = "const"
    custom: Callable[[float, Grid1D], ArrayLike] | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "modes", tuple(float(m) for m in self.modes))
        if self.theta < 0 or not math.isfinite(self.theta):
            raise DomainError(f"theta must be finite and >= 0, got {self.theta}")
        if self.temporal not in TEMPORAL_PROFILES:
            raise DomainError(f"temporal profile must be one of {TEMPORAL_PROFILES}")
        if self.temporal != "const" and self.theta == 0 and self.custom is None:
            raise DomainError(f"temporal profile {self.temporal!r} needs theta > 0")

    @classmethod
    def zero(cls) -> ForcingSpec:
        return cls()

    @classmethod
    def single_mode(
        cls, amplitude: float, mode: int = 1, theta: float = 0.0, temporal: str = "const"
    ) -> ForcingSpec:
        shape = [0.0] * mode
        shape[mode - 1] = 1.0
        return cls(tuple(shape), amplitude, theta, temporal)

    @property
    def is_zero(self) -> bool:
        return self.custom is None and (self.amplitude == 0.0 or not any(self.modes))

    def _phase(self, t: FloatArray) -> FloatArray:
        return np.mod(t, self.theta) if self.theta > 0 else t

    def temporal_factor(self, t: ArrayLike) -> FloatArray:
        tt = self._phase(np.asarray(t, dtype=float))
        if self.temporal == "cos":
            return np.cos(2.0 * np.pi * tt / self.theta)
        if self.temporal == "sin":
            return np.sin(2.0 * np.pi * tt / self.theta)
        return np.ones_like(tt)

    def spatial_coeffs(self, grid: Grid1D) -> FloatArray:
        c = np.zeros(grid.n_modes)
        n = min(len(self.modes), grid.n_modes)
        c[:n] = self.modes[:n]
        return self.amplitude * c

    def coeffs(self, t: float | Sequence[float] | FloatArray, grid: Grid1D) -> FloatArray:
        """Sine coefficients of ``f(., t)``; shape ``(K,)`` or ``(n_t, K)``."""
        tt = np.asarray(t, dtype=float)
        if self.custom is not None:
            phase = self._phase(tt)
            if phase.ndim == 0:
                return np.asarray(self.custom(float(phase), grid), dtype=float)
            return np.stack([np.asarray(self.custom(float(p), grid), dtype=float) for p in phase])
        spatial = self.spatial_coeffs(grid)
        return np.multiply.outer(self.temporal_factor(tt), spatial)

    def norm(self, t: float | Sequence[float] | FloatArray, grid: Grid1D, s: float = -1.0) -> FloatArray | float:
        """``||f(., t)||_{H^s}``; the default ``s = -1`` is the a-priori-estimate norm."""
        return bessel_norm_coeffs(self.coeffs(t, grid), grid, s)
