"""Sine-spectral substrate on [0, 1] with homogeneous Dirichlet conditions.

Functions are expanded in the orthonormal basis ``phi_k(x) = sqrt(2) sin(k pi x)``,
``k = 1..K``, sampled at the interior nodes ``x_j = j / (K + 1)``. On these nodes the
type-I discrete sine transform is exactly unitary (up to scaling), so Parseval holds
to roundoff and every Bessel-potential operator ``(I - Delta)^s`` is diagonal.

Nonlinear products are formed on a padded grid of ``J`` interior nodes. For a
polynomial nonlinearity of degree ``p`` the projections are exact quadratures once
``J >= ceil((p + 1) K / 2)``; the default ``J = ceil(3K/2)`` covers quadratic terms.
"""

from __future__ import annotations

import csv
import functools
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import fft

from .errors import DimensionError, DomainError

FloatArray = NDArray[np.float64]


def padded_size(n_modes: int, degree: int = 2) -> int:
    """Smallest padded node count that integrates degree-``degree`` products exactly."""
    return math.ceil((degree + 1) * n_modes / 2)


@dataclass(frozen=True)
class Grid1D:
    """Collocation grid for ``K`` sine modes.

    Attributes:
        n_modes: Number of sine modes ``K``.
        dealias_modes: Interior node count ``J`` of the padded product grid.
            Defaults to the 3/2 rule; pass ``n_modes`` to disable dealiasing.
    """

    n_modes: int
    dealias_modes: int | None = None

    def __post_init__(self) -> None:
        if int(self.n_modes) != self.n_modes or self.n_modes < 1:
            raise DomainError(f"n_modes must be a positive integer, got {self.n_modes!r}")
        if self.dealias_modes is None:
            object.__setattr__(self, "dealias_modes", padded_size(self.n_modes))
        if self.dealias_modes < self.n_modes:
            raise DomainError("dealias_modes must be >= n_modes")

    @classmethod
    def with_dealiasing(cls, n_modes: int, enabled: bool = True, degree: int = 2) -> Grid1D:
        """Grid whose padding integrates degree-``degree`` products exactly (or none)."""
        return cls(n_modes, padded_size(n_modes, degree) if enabled else n_modes)

    @property
    def dealiased(self) -> bool:
        return self.dealias_modes >= padded_size(self.n_modes)

    @property
    def nodes(self) -> FloatArray:
        return np.arange(1, self.n_modes + 1) / (self.n_modes + 1)

    @property
    def wavenumbers(self) -> FloatArray:
        """``k pi`` for ``k = 1..K``."""
        return np.arange(1, self.n_modes + 1) * np.pi

    @property
    def eigenvalues(self) -> FloatArray:
        """Eigenvalues ``1 + k^2 pi^2`` of ``I - Delta``."""
        return 1.0 + self.wavenumbers**2

    @property
    def padded_nodes(self) -> FloatArray:
        """Closed padded grid ``n / (J + 1)``, ``n = 0..J+1`` (endpoints included)."""
        return np.arange(self.dealias_modes + 2) / (self.dealias_modes + 1)

    def with_padding(self, dealias_modes: int) -> Grid1D:
        return Grid1D(self.n_modes, dealias_modes)


def _check_length(arr: FloatArray, n: int, what: str) -> None:
    if arr.shape[-1] != n:
        raise DimensionError(f"{what} has length {arr.shape[-1]}, grid expects {n}")


def sine_transform(values: ArrayLike, grid: Grid1D) -> FloatArray:
    """Nodal values to sine coefficients (works along the last axis)."""
    v = np.asarray(values, dtype=float)
    _check_length(v, grid.n_modes, "values")
    return fft.dst(v, type=1, norm="ortho", axis=-1) / math.sqrt(grid.n_modes + 1)


def inverse_sine_transform(coeffs: ArrayLike, grid: Grid1D) -> FloatArray:
    """Sine coefficients to nodal values (works along the last axis)."""
    c = np.asarray(coeffs, dtype=float)
    _check_length(c, grid.n_modes, "coeffs")
    return fft.dst(c, type=1, norm="ortho", axis=-1) * math.sqrt(grid.n_modes + 1)


@dataclass(frozen=True, eq=False)
class Field:
    """A function on (0, 1) held as sine coefficients and/or nodal values.

    Coefficient-side fields vanish at both endpoints by construction. Value-side
    fields (e.g. derivatives) may carry nonzero ``boundary`` values; their
    ``coeffs`` are those of the sine interpolant of the interior samples.
    """

    grid: Grid1D
    _coeffs: FloatArray | None = field(default=None, repr=False)
    _values: FloatArray | None = field(default=None, repr=False)
    boundary: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self) -> None:
        if self._coeffs is None and self._values is None:
            raise ValueError("Field needs coefficients or values")
        for arr, name in ((self._coeffs, "coeffs"), (self._values, "values")):
            if arr is not None:
                _check_length(arr, self.grid.n_modes, name)
                arr.setflags(write=False)

    @classmethod
    def from_coeffs(cls, grid: Grid1D, coeffs: ArrayLike) -> Field:
        return cls(grid, _coeffs=np.array(coeffs, dtype=float))

    @classmethod
    def from_values(
        cls, grid: Grid1D, values: ArrayLike, boundary: tuple[float, float] = (0.0, 0.0)
    ) -> Field:
        return cls(grid, _values=np.array(values, dtype=float), boundary=boundary)

    @classmethod
    def from_function(cls, grid: Grid1D, func: Callable[[FloatArray], ArrayLike]) -> Field:
        """Sample ``func`` at the nodes."""
        return cls.from_values(grid, func(grid.nodes))

    @classmethod
    def zeros(cls, grid: Grid1D) -> Field:
        return cls.from_coeffs(grid, np.zeros(grid.n_modes))

    @classmethod
    def mode(cls, grid: Grid1D, k: int, amplitude: float = 1.0) -> Field:
        """``amplitude * sqrt(2) sin(k pi x)``."""
        if not 1 <= k <= grid.n_modes:
            raise DomainError(f"mode {k} outside 1..{grid.n_modes}")
        c = np.zeros(grid.n_modes)
        c[k - 1] = amplitude
        return cls.from_coeffs(grid, c)

    @property
    def coeffs(self) -> FloatArray:
        if self._coeffs is None:
            object.__setattr__(self, "_coeffs", sine_transform(self._values, self.grid))
            self._coeffs.setflags(write=False)
        return self._coeffs

    @property
    def values(self) -> FloatArray:
        if self._values is None:
            object.__setattr__(self, "_values", inverse_sine_transform(self._coeffs, self.grid))
            self._values.setflags(write=False)
        return self._values

    def __add__(self, other: Field) -> Field:
        _same_grid(self, other)
        return Field.from_coeffs(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other: Field) -> Field:
        _same_grid(self, other)
        return Field.from_coeffs(self.grid, self.coeffs - other.coeffs)

    def __mul__(self, scalar: float) -> Field:
        return Field.from_coeffs(self.grid, float(scalar) * self.coeffs)

    __rmul__ = __mul__

    def __neg__(self) -> Field:
        return Field.from_coeffs(self.grid, -self.coeffs)


def _same_grid(u: Field, v: Field) -> None:
    if u.grid.n_modes != v.grid.n_modes:
        raise DimensionError(f"grid mismatch: {u.grid.n_modes} vs {v.grid.n_modes} modes")


def bessel_weights(grid: Grid1D, s: float) -> FloatArray:
    """Per-mode weights ``(1 + k^2 pi^2)^s`` of the squared ``H^s`` norm."""
    if s < -1:
        raise DomainError(f"Sobolev index must be >= -1, got {s}")
    return grid.eigenvalues**s


def bessel_norm_coeffs(coeffs: ArrayLike, grid: Grid1D, s: float) -> FloatArray | float:
    """``H^s`` norm of coefficient vector(s) along the last axis."""
    c = np.asarray(coeffs, dtype=float)
    return np.sqrt(np.sum(bessel_weights(grid, s) * c**2, axis=-1))


def bessel_norm(u: Field, s: float) -> float:
    """Bessel-potential norm ``||(I - Delta)^{s/2} u||_{L^2}``."""
    return float(bessel_norm_coeffs(u.coeffs, u.grid, s))


def helmholtz_solve(u: Field, power: float) -> Field:
    """Apply ``(I - Delta)^power``; ``power = -1`` is the resolvent."""
    return Field.from_coeffs(u.grid, u.grid.eigenvalues**power * u.coeffs)


def l2_inner(u: Field, v: Field) -> float:
    """``L^2`` inner product via Parseval."""
    _same_grid(u, v)
    return float(np.dot(u.coeffs, v.coeffs))


def _cosine_synthesis(a: FloatArray, n_interior: int) -> FloatArray:
    """Evaluate ``sum_k a_k sqrt(2) cos(k pi x)`` on the closed grid of ``n_interior`` nodes."""
    K = a.shape[-1]
    buf = np.zeros(a.shape[:-1] + (n_interior + 2,))
    buf[..., 1 : K + 1] = a
    return fft.dct(buf, type=1, axis=-1) / math.sqrt(2.0)


def derivative_coeffs_values(coeffs: ArrayLike, grid: Grid1D, n_interior: int | None = None) -> FloatArray:
    """``u_x`` on the closed grid ``n / (J + 1)``, ``n = 0..J+1``."""
    J = grid.n_modes if n_interior is None else n_interior
    c = np.asarray(coeffs, dtype=float)
    return _cosine_synthesis(c * grid.wavenumbers, J)


def derivative(u: Field) -> Field:
    """Pseudospectral derivative stored value-side, with its endpoint values."""
    closed = derivative_coeffs_values(u.coeffs, u.grid)
    return Field.from_values(u.grid, closed[1:-1], boundary=(float(closed[0]), float(closed[-1])))


def padded_values(coeffs: ArrayLike, grid: Grid1D) -> FloatArray:
    """Values of ``u`` on the closed padded grid (zeros at the endpoints)."""
    c = np.asarray(coeffs, dtype=float)
    _check_length(c, grid.n_modes, "coeffs")
    J = grid.dealias_modes
    buf = np.zeros(c.shape[:-1] + (J + 2,))
    pad = np.zeros(c.shape[:-1] + (J,))
    pad[..., : grid.n_modes] = c
    buf[..., 1:-1] = fft.dst(pad, type=1, norm="ortho", axis=-1) * math.sqrt(J + 1)
    return buf


def padded_derivative(coeffs: ArrayLike, grid: Grid1D) -> FloatArray:
    """Values of ``u_x`` on the closed padded grid."""
    return derivative_coeffs_values(coeffs, grid, grid.dealias_modes)


def sine_project(closed_values: ArrayLike, grid: Grid1D) -> FloatArray:
    """``<g, phi_k>`` for ``k = 1..K`` by trapezoid quadrature on the closed padded grid."""
    g = np.asarray(closed_values, dtype=float)
    J = grid.dealias_modes
    _check_length(g, J + 2, "padded values")
    full = fft.dst(g[..., 1:-1], type=1, norm="ortho", axis=-1) / math.sqrt(J + 1)
    return full[..., : grid.n_modes]


def cosine_project(closed_values: ArrayLike, grid: Grid1D) -> FloatArray:
    """``<g, sqrt(2) cos(k pi x)>`` for ``k = 1..K`` by trapezoid quadrature."""
    g = np.asarray(closed_values, dtype=float)
    J = grid.dealias_modes
    _check_length(g, J + 2, "padded values")
    full = fft.dct(g, type=1, axis=-1) / (math.sqrt(2.0) * (J + 1))
    return full[..., 1 : grid.n_modes + 1]


def flux_divergence(closed_values: ArrayLike, grid: Grid1D) -> FloatArray:
    """Sine coefficients of ``d/dx g`` for a flux ``g`` given on the closed padded grid.

    Integration by parts against ``phi_k`` (which vanishes at the endpoints) gives
    ``<g_x, phi_k> = -k pi <g, sqrt(2) cos(k pi x)>``.
    """
    return -grid.wavenumbers * cosine_project(closed_values, grid)


@functools.lru_cache(maxsize=16)
def _parity_matrices(K: int, J: int) -> tuple[FloatArray, FloatArray, FloatArray]:
    """``<phi_m', phi_k>``, ``<sqrt2 cos(m pi x), phi_k>`` for ``m = 1..J`` and ``<1, phi_k>``."""
    k = np.arange(1, K + 1)[:, None]
    m = np.arange(1, J + 1)[None, :]
    odd = ((k + m) % 2) == 1
    denom = np.where(odd, k * k - m * m, 1).astype(float)
    D = np.where(odd, 4.0 * k * m / denom, 0.0)
    S = np.where(odd, 4.0 * k / (math.pi * denom), 0.0)
    kk = k[:, 0].astype(float)
    const = math.sqrt(2.0) * (1.0 - (-1.0) ** kk) / (kk * math.pi)
    for arr in (D, S, const):
        arr.setflags(write=False)
    return D, S, const


def odd_flux_divergence(closed_values: ArrayLike, grid: Grid1D) -> FloatArray:
    """Sine coefficients of ``g_x`` for an odd flux ``g`` (a sine series) on the closed padded grid.

    The full sine spectrum of ``g`` is recovered exactly when its bandwidth is at
    most ``J``; the rectangular Galerkin derivative matrix then maps it onto the
    first ``K`` modes.
    """
    g = np.asarray(closed_values, dtype=float)
    J = grid.dealias_modes
    _check_length(g, J + 2, "padded values")
    a = fft.dst(g[..., 1:-1], type=1, norm="ortho", axis=-1) / math.sqrt(J + 1)
    return a @ _parity_matrices(grid.n_modes, J)[0].T


def even_sine_project(closed_values: ArrayLike, grid: Grid1D) -> FloatArray:
    """``<g, phi_k>`` for an even ``g`` (a cosine series of bandwidth at most ``J``)."""
    g = np.asarray(closed_values, dtype=float)
    J = grid.dealias_modes
    _check_length(g, J + 2, "padded values")
    full = fft.dct(g, type=1, axis=-1) / (2.0 * (J + 1))
    b0 = full[..., :1]
    b = math.sqrt(2.0) * full[..., 1 : J + 1]
    _, S, const = _parity_matrices(grid.n_modes, J)
    return b @ S.T + b0 * const


def burgers_term(coeffs: ArrayLike, grid: Grid1D) -> FloatArray:
    """Sine coefficients of ``u u_x = (u^2 / 2)_x`` in conservative form."""
    u = padded_values(coeffs, grid)
    return flux_divergence(0.5 * u * u, grid)


def closed_quadrature(closed_values: ArrayLike, grid: Grid1D) -> FloatArray | float:
    """Trapezoid integral over [0, 1] of values on the closed padded grid."""
    g = np.asarray(closed_values, dtype=float)
    h = 1.0 / (grid.dealias_modes + 1)
    return h * (np.sum(g[..., 1:-1], axis=-1) + 0.5 * (g[..., 0] + g[..., -1]))


def flux_integral(coeffs: ArrayLike, grid: Grid1D, flux: Callable[[FloatArray], FloatArray]) -> FloatArray | float:
    """Discrete ``int_0^1 F(u) u_x dx`` on the padded grid (zero analytically when F(0) = 0)."""
    c = np.asarray(coeffs, dtype=float)
    return closed_quadrature(flux(padded_values(c, grid)) * padded_derivative(c, grid), grid)


def cubic_integral(coeffs: ArrayLike, grid: Grid1D) -> FloatArray | float:
    """Discrete ``int_0^1 u^2 u_x dx``."""
    return flux_integral(coeffs, grid, np.square)


def gradient_l2_sq(coeffs: ArrayLike, grid: Grid1D) -> FloatArray | float:
    """``||u_x||^2`` from the spectrum."""
    c = np.asarray(coeffs, dtype=float)
    return np.sum((grid.wavenumbers * c) ** 2, axis=-1)


def random_field(
    grid: Grid1D,
    rng: np.random.Generator | int | None = None,
    decay: float = 2.0,
    h1_norm: float | None = None,
) -> Field:
    """Gaussian sine coefficients with ``k^{-decay}`` envelope, optionally rescaled in ``H^1``."""
    gen = np.random.default_rng(rng)
    k = np.arange(1, grid.n_modes + 1, dtype=float)
    c = gen.standard_normal(grid.n_modes) / k**decay
    if h1_norm is not None:
        c *= h1_norm / bessel_norm_coeffs(c, grid, 1.0)
    return Field.from_coeffs(grid, c)


def write_field_csv(u: Field, path: str | Path, side: str = "coeff") -> None:
    """Write ``k,coeff`` or ``x,value`` CSV at 17 significant digits."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        if side == "coeff":
            writer.writerow(["k", "coeff"])
            rows: Iterable = zip(range(1, u.grid.n_modes + 1), u.coeffs)
            writer.writerows((k, f"{c:.17g}") for k, c in rows)
        elif side == "value":
            writer.writerow(["x", "value"])
            writer.writerows((f"{x:.17g}", f"{v:.17g}") for x, v in zip(u.grid.nodes, u.values))
        else:
            raise ValueError(f"side must be 'coeff' or 'value', got {side!r}")


def read_field_csv(path: str | Path, grid: Grid1D | None = None) -> Field:
    """Read a field written by :func:`write_field_csv`."""
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [row for row in reader if row]
    data = np.array([float(r[1]) for r in rows])
    grid = grid or Grid1D(len(data))
    if header == ["k", "coeff"]:
        return Field.from_coeffs(grid, data)
    if header == ["x", "value"]:
        return Field.from_values(grid, data)
    raise ValueError(f"unrecognised field CSV header {header}")
