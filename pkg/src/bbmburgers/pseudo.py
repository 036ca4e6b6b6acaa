"""Pseudo-parabolic extension with pluggable nonlinearities ``(F, Phi, G)``.

The model is

    (I - Delta) u_t = -u_x + u_xx - [F(u)]_x + [Phi(u_x)]_x + (I - Delta) G(u) + f,

so after the resolvent ``R`` the stabilising term ``G(u)`` enters bare:
``u_t = A u + R (f - P[F(u)]_x + P[Phi(u_x)]_x) + P G(u)``. All three functions are
evaluated pointwise on the padded grid; for polynomials of degree ``p`` the padding
``ceil((p + 1) K / 2)`` makes every projection an exact quadrature.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Sequence

import numpy as np
from numpy.polynomial import Polynomial

from .errors import DimensionError, DomainError, EvaluationError
from .fitting import fit_exponential_decay
from .forcing import ForcingSpec
from .linear import derivative_matrix, resolvent_diagonal
from .spectral import (
    FloatArray,
    Field,
    Grid1D,
    flux_divergence,
    even_sine_project,
    flux_integral,
    odd_flux_divergence,
    padded_derivative,
    padded_size,
    padded_values,
    sine_project,
)
from .stepper import ImexStepper, NonlinearTerm, SolverConfig
from .trajectory import Trajectory, uniform_steps

RealFunction = Callable[[FloatArray], FloatArray]

POINCARE_THRESHOLD = math.pi**2 / 4.0
GAP_THRESHOLD = 0.5
DERIVATIVE_STEP = 1e-6
DERIVATIVE_TOL = 1e-4


def _zero(x: FloatArray) -> FloatArray:
    return np.zeros_like(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class NonlinearityTriple:
    """Pointwise nonlinearities with their derivatives.

    Attributes:
        F, Phi, G: Convection, gradient flux and stabilising terms.
        F_prime, Phi_prime, G_prime: Their derivatives.
        declared_bounds: Optional ``{"sup_G_prime": ..., "inf_Phi_prime": ...}``
            overriding sampled estimates.
        degree: Largest polynomial degree, used to size the padded grid; ``None``
            for non-polynomial functions (3/2 rule).
        zero_terms: Names of terms known to vanish identically (skipped in the RHS).
    """

    F: RealFunction = _zero
    Phi: RealFunction = _zero
    G: RealFunction = _zero
    F_prime: RealFunction = _zero
    Phi_prime: RealFunction = _zero
    G_prime: RealFunction = _zero
    declared_bounds: Mapping[str, float] | None = None
    degree: int | None = None
    name: str = "custom"
    zero_terms: frozenset[str] = field(default_factory=frozenset)

    @classmethod
    def polynomial(
        cls,
        F: Sequence[float] = (),
        Phi: Sequence[float] = (),
        G: Sequence[float] = (),
        name: str = "polynomial",
        declared_bounds: Mapping[str, float] | None = None,
    ) -> NonlinearityTriple:
        """Triple from ascending coefficient lists, e.g. ``F=[0, 0, 0.5]`` is ``u^2 / 2``."""
        polys = {k: Polynomial(list(v) or [0.0]) for k, v in (("F", F), ("Phi", Phi), ("G", G))}
        zero = frozenset(k for k, p in polys.items() if not np.any(p.coef))
        degree = max(p.trim().degree() for p in polys.values())
        return cls(
            F=polys["F"],
            Phi=polys["Phi"],
            G=polys["G"],
            F_prime=polys["F"].deriv(),
            Phi_prime=polys["Phi"].deriv(),
            G_prime=polys["G"].deriv(),
            declared_bounds=declared_bounds,
            degree=int(degree),
            name=name,
            zero_terms=zero,
        )

    def padded_grid(self, n_modes: int, dealias: bool = True) -> Grid1D:
        if not dealias:
            return Grid1D(n_modes, n_modes)
        degree = max(2, self.degree) if self.degree is not None else 2
        return Grid1D(n_modes, padded_size(n_modes, degree))

    def parity_grid(self, grid: Grid1D) -> Grid1D:
        """Grid resolving the full spectrum of a degree-``p`` composition.

        ``F(u)`` of a ``K``-mode field has bandwidth ``p K``; reusing ``grid`` when
        it is already that fine, or when the degree is unknown or aliasing is on.
        """
        if self.degree is None or grid.dealias_modes == grid.n_modes:
            return grid
        J = max(grid.dealias_modes, self.degree * grid.n_modes)
        return grid if J == grid.dealias_modes else Grid1D(grid.n_modes, J)

    def derivative_errors(self, samples: FloatArray, h: float = DERIVATIVE_STEP) -> dict[str, float]:
        """Max forward-difference mismatch of each declared derivative."""
        x = np.asarray(samples, dtype=float)
        out = {}
        for name, fn, d in (("F", self.F, self.F_prime), ("Phi", self.Phi, self.Phi_prime), ("G", self.G, self.G_prime)):
            fd = (np.asarray(fn(x + h), dtype=float) - np.asarray(fn(x), dtype=float)) / h
            out[name] = float(np.max(np.abs(fd - np.asarray(d(x), dtype=float))))
        return out


REGISTRY: dict[str, NonlinearityTriple] = {
    "burgers": NonlinearityTriple.polynomial(F=[0, 0, 0.5], name="burgers"),
    "cubic": NonlinearityTriple.polynomial(F=[0, 0, 0, 1], name="cubic"),
    "cubic-damped": NonlinearityTriple.polynomial(
        F=[0, 0, 0, 1], G=[0, 0, 0, -1], name="cubic-damped",
        declared_bounds={"sup_G_prime": 0.0, "inf_Phi_prime": 0.0},
    ),
    "zero": NonlinearityTriple.polynomial(name="zero"),
}


def get_triple(name: str) -> NonlinearityTriple:
    try:
        return REGISTRY[name]
    except KeyError:
        raise KeyError(f"unknown nonlinearity triple {name!r}; known: {sorted(REGISTRY)}") from None


@dataclass(frozen=True)
class AssumptionReport:
    """Verdicts on the structural conditions for a triple."""

    sup_G_prime: float
    inf_Phi_prime: float
    sources: dict[str, str]
    poincare_ok: bool
    gap_ok: bool
    F_zero_ok: bool
    derivative_errors: dict[str, float]
    derivative_ok: bool
    warnings: tuple[str, ...] = ()

    @property
    def passed(self) -> bool:
        return self.poincare_ok and self.gap_ok and self.F_zero_ok and self.derivative_ok

    @property
    def failures(self) -> list[str]:
        names = ("poincare", "gap", "F_zero", "derivative")
        flags = (self.poincare_ok, self.gap_ok, self.F_zero_ok, self.derivative_ok)
        return [n for n, ok in zip(names, flags) if not ok]

    def to_dict(self) -> dict[str, Any]:
        return {
            "sup_G_prime": self.sup_G_prime,
            "inf_Phi_prime": self.inf_Phi_prime,
            "sources": dict(self.sources),
            "poincare_ok": self.poincare_ok,
            "gap_ok": self.gap_ok,
            "F_zero_ok": self.F_zero_ok,
            "derivative_errors": dict(self.derivative_errors),
            "derivative_ok": self.derivative_ok,
            "passed": self.passed,
            "warnings": list(self.warnings),
        }


def check_assumptions(
    triple: NonlinearityTriple,
    sample_range: tuple[float, float] = (-10.0, 10.0),
    n_samples: int = 2001,
) -> AssumptionReport:
    """Check ``sup G' < pi^2/4``, ``sup G' - inf Phi' < 1/2`` and ``F(0) = 0``.

    Declared bounds take precedence; sampled estimates add a warning because the
    conditions are stated over the whole real line.
    """
    lo, hi = map(float, sample_range)
    if not hi > lo:
        raise DomainError(f"degenerate sample range {sample_range}")
    if n_samples < 2:
        raise DomainError("n_samples must be >= 2")
    x = np.union1d(np.linspace(lo, hi, n_samples), [0.0] if lo <= 0.0 <= hi else [])
    declared = dict(triple.declared_bounds or {})
    notes: list[str] = []
    sources: dict[str, str] = {}
    if "sup_G_prime" in declared:
        sup_g, sources["sup_G_prime"] = float(declared["sup_G_prime"]), "declared"
    else:
        sup_g, sources["sup_G_prime"] = float(np.max(triple.G_prime(x))), "sampled"
        notes.append(f"sup G' estimated by sampling on [{lo}, {hi}]")
    if "inf_Phi_prime" in declared:
        inf_phi, sources["inf_Phi_prime"] = float(declared["inf_Phi_prime"]), "declared"
    else:
        inf_phi, sources["inf_Phi_prime"] = float(np.min(triple.Phi_prime(x))), "sampled"
        notes.append(f"inf Phi' estimated by sampling on [{lo}, {hi}]")
    f0 = float(np.asarray(triple.F(np.array([0.0])))[0])
    errs = triple.derivative_errors(x)
    return AssumptionReport(
        sup_G_prime=sup_g,
        inf_Phi_prime=inf_phi,
        sources=sources,
        poincare_ok=sup_g < POINCARE_THRESHOLD,
        gap_ok=sup_g - inf_phi < GAP_THRESHOLD,
        F_zero_ok=abs(f0) <= 1e-14,
        derivative_errors=errs,
        derivative_ok=all(e <= DERIVATIVE_TOL for e in errs.values()),
        warnings=tuple(notes),
    )


def _evaluate(fn: RealFunction, x: FloatArray, term: str) -> FloatArray:
    out = np.asarray(fn(x), dtype=float)
    if out.shape != x.shape:
        out = np.broadcast_to(out, x.shape)
    if not np.all(np.isfinite(out)):
        raise EvaluationError(term)
    return out


def _split(fn: RealFunction, u: FloatArray, term: str) -> tuple[FloatArray, FloatArray]:
    """Odd and even parts ``(fn(u) -+ fn(-u)) / 2``."""
    plus, minus = _evaluate(fn, u, term), _evaluate(fn, -u, term)
    return 0.5 * (plus - minus), 0.5 * (plus + minus)


def _pieces(c: FloatArray, triple: NonlinearityTriple, grid: Grid1D) -> tuple[FloatArray, FloatArray, FloatArray]:
    """``P[F(u)]_x``, ``P[Phi(u_x)]_x`` and ``P G(u)`` as sine coefficients.

    ``u`` is a sine series, so the odd part of ``F(u)`` and the even part of
    ``G(u)`` have the wrong parity for half-period trapezoid quadrature. Those
    parts are expanded on the finer parity grid and projected exactly.
    """
    zero = np.zeros(grid.n_modes)
    F_term, G_term = zero, zero
    if {"F", "G"} - triple.zero_terms:
        u = padded_values(c, grid)
        wide = triple.parity_grid(grid)
        u_wide = padded_values(c, wide) if wide is not grid else u
        if "F" not in triple.zero_terms:
            odd, even = _split(triple.F, u, "F")
            F_term = flux_divergence(even, grid)
            odd_wide = _split(triple.F, u_wide, "F")[0] if wide is not grid else odd
            if np.any(odd_wide):
                F_term = F_term + odd_flux_divergence(odd_wide, wide)
        if "G" not in triple.zero_terms:
            odd, even = _split(triple.G, u, "G")
            G_term = sine_project(odd, grid)
            even_wide = _split(triple.G, u_wide, "G")[1] if wide is not grid else even
            if np.any(even_wide):
                G_term = G_term + even_sine_project(even_wide, wide)
    if "Phi" in triple.zero_terms:
        Phi_term = zero
    else:
        Phi_term = flux_divergence(_evaluate(triple.Phi, padded_derivative(c, grid), "Phi"), grid)
    return F_term, Phi_term, G_term


def pseudo_nonlinearity(triple: NonlinearityTriple, grid: Grid1D) -> NonlinearTerm:
    """``B(c) = R (P[Phi(u_x)]_x - P[F(u)]_x) + P G(u)``."""
    r = resolvent_diagonal(grid)

    def term(c: FloatArray) -> FloatArray:
        F_term, Phi_term, G_term = _pieces(c, triple, grid)
        return r * (Phi_term - F_term) + G_term

    return term


def assemble_rhs(u: Field, triple: NonlinearityTriple, f_val: Field | None = None, dealias: bool = True) -> Field:
    """Coefficients of ``(I - Delta) u_t`` for the current state."""
    K = u.grid.n_modes
    grid = triple.padded_grid(K, dealias)
    c = u.coeffs
    W = grid.eigenvalues
    F_term, Phi_term, G_term = _pieces(c, triple, grid)
    rhs = -(derivative_matrix(grid) @ c) - (W - 1.0) * c - F_term + Phi_term + W * G_term
    if f_val is not None:
        rhs = rhs + f_val.coeffs
    return Field.from_coeffs(u.grid, rhs)


def solve_pseudo(
    phi: Field,
    triple: NonlinearityTriple,
    f: ForcingSpec,
    T: float,
    cfg: SolverConfig,
    tau: float = 0.0,
    sample_range: tuple[float, float] = (-10.0, 10.0),
) -> Trajectory:
    """IMEX trajectory of the pseudo-parabolic model; warns when assumptions fail."""
    report = check_assumptions(triple, sample_range)
    if not report.passed:
        warnings.warn(f"triple {triple.name!r} fails assumption checks: {report.failures}", stacklevel=2)
    if phi.grid.n_modes != cfg.n_modes:
        raise DimensionError(f"initial field has {phi.grid.n_modes} modes, config expects {cfg.n_modes}")
    n = uniform_steps(T, cfg.dt)
    grid = triple.padded_grid(cfg.n_modes, cfg.dealias)
    nonlinear = None if triple.zero_terms >= {"F", "Phi", "G"} else pseudo_nonlinearity(triple, grid)
    traj = ImexStepper(grid, f, cfg, nonlinear).run(phi.coeffs, tau, n)
    traj.metadata["triple"] = triple.name
    traj.metadata["y_functionals"] = traj.y_functionals((1.0, 2.0))
    return traj


def flux_integrals(traj: Trajectory, triple: NonlinearityTriple) -> FloatArray:
    """Discrete ``int F(u) u_x dx`` per snapshot, as ``-<P[F(u)]_x, u>``.

    Integration by parts makes the two equal for Dirichlet data; the Galerkin
    form is exact for polynomial ``F`` and is the quantity the energy balance uses.
    """
    grid = triple.padded_grid(traj.grid.n_modes)
    return np.array([-np.dot(_pieces(c, triple, grid)[0], c) for c in traj.coeffs])


@dataclass(frozen=True)
class AbsorbingReport:
    """Measured envelope ``||u(t)|| <= C e^{-c t} ||phi|| + C' delta``."""

    delta: float
    ell: float
    settle_time: float
    plateau: float
    plateau_ratio: float | None
    transient_rate: float | None
    transient_r_squared: float | None
    envelope_C: float | None
    initial_norm: float

    def passes(self, factor: float = 100.0, zero_floor: float = 1e-8) -> bool:
        """Tail plateau within ``factor * delta`` (or below ``zero_floor`` when unforced)."""
        return self.plateau <= (factor * self.delta if self.delta > 0 else zero_floor)

    def to_dict(self) -> dict[str, Any]:
        return dict(self.__dict__)


def absorbing_check(
    traj: Trajectory, delta: float, ell: float = 1.0, settle_time: float = 30.0
) -> AbsorbingReport:
    """Tail plateau after ``settle_time`` plus an exponential fit of the transient."""
    if traj.times[-1] <= settle_time:
        raise DomainError("trajectory must extend beyond settle_time")
    norms = traj.norms(ell)
    tail = traj.times >= settle_time
    plateau = float(norms[tail].max())
    initial = float(norms[0])
    ratio = plateau / delta if delta > 0 else None
    level = max(plateau, 1e-300)
    above = norms > 10.0 * level
    end_idx = int(np.argmin(above)) if not above.all() else len(norms)
    rate = r2 = env = None
    if end_idx >= 5:
        try:
            fit = fit_exponential_decay(traj.times[:end_idx], norms[:end_idx])
            rate, r2 = fit.rho, fit.r_squared
        except DomainError:
            pass
    if rate is not None and initial > 0:
        excess = np.clip(norms - (plateau if delta > 0 else 0.0), 0.0, None)
        env = float(np.max(excess * np.exp(rate * (traj.times - traj.tau))) / initial)
    return AbsorbingReport(delta, ell, settle_time, plateau, ratio, rate, r2, env, initial)
