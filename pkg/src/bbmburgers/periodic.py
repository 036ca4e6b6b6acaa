"""Period map, periodic orbits, periodicity defect and stability experiments."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .errors import AlignmentError, BlowUpError, DomainError, NonConvergenceError, OutsideRegimeError
from .fitting import DecayFit, fit_exponential_decay
from .forcing import ForcingSpec
from .spectral import FloatArray, Field, bessel_norm, bessel_norm_coeffs
from .stepper import SolverConfig, solve
from .trajectory import Trajectory, uniform_steps

__all__ = [
    "DecayFit",
    "DefectSeries",
    "PeriodicOrbit",
    "StabilityReport",
    "find_periodic_orbit",
    "fit_exponential_decay",
    "orbit_distance",
    "period_map",
    "periodicity_defect",
    "stability_experiment",
]

TRANSIENT_PERIODS = 3.0
MU_WINDOW = 5


def _require_period(f: ForcingSpec) -> float:
    if not f.theta > 0:
        raise DomainError("forcing must have a positive period theta")
    return f.theta


def period_map(phi: Field, f: ForcingSpec, cfg: SolverConfig) -> Field:
    """``phi -> u(theta; phi)`` by full time integration."""
    theta = _require_period(f)
    n = uniform_steps(theta, cfg.dt)
    traj = solve(phi, f, 0.0, theta, cfg.with_(save_every=n))
    return traj.final


def _median_ratio(ratios: Sequence[float]) -> float:
    tail = [r for r in ratios if math.isfinite(r)][-MU_WINDOW:]
    return float(np.median(tail)) if tail else 0.0


@dataclass
class PeriodicOrbit:
    """Fixed point of the period map with its convergence record.

    Attributes:
        phi_tilde: Fixed point ``u(0)`` of the periodic solution.
        theta: Period.
        mu: Median of the last five consecutive increment ratios.
        iterates: ``||u_{k+1} - u_k||_{H^ell}`` for every iteration.
        ratios: Consecutive increment ratios (first entry NaN).
        certificate: ``||P(phi_tilde) - phi_tilde||_{H^ell}``.
    """

    phi_tilde: Field
    theta: float
    mu: float
    iterates: list[float]
    ratios: list[float]
    tol: float
    ell: float
    certificate: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "theta": self.theta,
            "mu": self.mu,
            "tol": self.tol,
            "ell": self.ell,
            "certificate": self.certificate,
            "iterates": list(self.iterates),
            "ratios": [None if math.isnan(r) else r for r in self.ratios],
        }


def find_periodic_orbit(
    f: ForcingSpec,
    cfg: SolverConfig,
    tol: float = 1e-8,
    k_max: int = 200,
    ell: float = 1.0,
    phi0: Field | None = None,
) -> PeriodicOrbit:
    """Iterate the period map from ``phi0`` (default 0) until increments drop below ``tol``.

    Raises:
        NonConvergenceError: ``k_max`` iterations without convergence, or the
            fixed-point certificate exceeds ``2 tol``.
        OutsideRegimeError: Three consecutive ratios at or above one.
    """
    theta = _require_period(f)
    u = phi0 if phi0 is not None else Field.zeros(cfg.grid())
    iterates: list[float] = []
    ratios: list[float] = []
    for _ in range(k_max):
        nxt = period_map(u, f, cfg)
        d = bessel_norm(nxt - u, ell)
        ratios.append(d / iterates[-1] if iterates and iterates[-1] > 0 else math.nan)
        iterates.append(d)
        u = nxt
        if d < tol:
            break
        recent = ratios[-3:]
        if len(recent) == 3 and all(math.isfinite(r) and r >= 1.0 for r in recent):
            raise OutsideRegimeError("period-map increments stopped contracting", history=ratios)
    else:
        raise NonConvergenceError(f"period map not converged in {k_max} iterations", history=ratios)
    certificate = bessel_norm(period_map(u, f, cfg) - u, ell)
    if certificate >= 2.0 * tol:
        raise NonConvergenceError(f"fixed-point certificate {certificate:.3e} >= 2 tol", history=ratios)
    return PeriodicOrbit(u, theta, _median_ratio(ratios), iterates, ratios, tol, ell, certificate)


def _period_steps(traj: Trajectory, theta: float) -> int:
    spacing = traj.spacing
    p = int(round(theta / spacing))
    if p < 1 or abs(p * spacing - theta) > 1e-9 * theta:
        raise AlignmentError(f"theta={theta} is not a multiple of the snapshot spacing {spacing}")
    return p


@dataclass
class DefectSeries:
    times: FloatArray
    values: FloatArray
    fit: DecayFit | None

    def to_dict(self) -> dict[str, Any]:
        return {
            "times": self.times.tolist(),
            "values": self.values.tolist(),
            "fit": self.fit.to_dict() if self.fit else None,
        }


def _safe_fit(times: FloatArray, values: FloatArray, window: tuple[float, float]) -> DecayFit | None:
    try:
        return fit_exponential_decay(times, values, window)
    except DomainError:
        return None


def _default_window(times: FloatArray, theta: float) -> tuple[float, float]:
    return (float(times[0]) + TRANSIENT_PERIODS * theta, float(times[-1]))


def periodicity_defect(
    traj: Trajectory,
    theta: float,
    ell: float = 1.0,
    window: tuple[float, float] | None = None,
) -> DefectSeries:
    """``d(t) = ||u(t + theta) - u(t)||_{H^ell}`` with an exponential fit past the transient."""
    p = _period_steps(traj, theta)
    if len(traj) <= p:
        raise DomainError("trajectory shorter than one period")
    times = traj.times[:-p]
    values = np.asarray(bessel_norm_coeffs(traj.coeffs[p:] - traj.coeffs[:-p], traj.grid, ell))
    fit = _safe_fit(times, values, window or _default_window(times, theta))
    return DefectSeries(times, values, fit)


def orbit_distance(traj: Trajectory, orbit_traj: Trajectory, theta: float, ell: float = 1.0) -> FloatArray:
    """``||u(t) - u_tilde(t mod theta)||_{H^ell}`` given one period of the orbit."""
    p = _period_steps(traj, theta)
    if len(orbit_traj) < p or abs(orbit_traj.spacing - traj.spacing) > 1e-12:
        raise AlignmentError("orbit trajectory must cover one period on the same spacing")
    phase = np.round((traj.times - orbit_traj.tau) / traj.spacing).astype(int) % p
    return np.asarray(bessel_norm_coeffs(traj.coeffs - orbit_traj.coeffs[phase], traj.grid, ell))


def _floor_window(times: FloatArray, values: FloatArray, start: float, floor: float) -> tuple[float, float]:
    """Window from ``start`` up to the first sample below ``floor``."""
    below = np.nonzero((times >= start) & (values < floor))[0]
    end = float(times[below[0] - 1]) if below.size and below[0] > 0 else float(times[-1])
    return (start, end)


@dataclass
class StabilityReport:
    """All series and fits of a stability batch."""

    times: list[FloatArray]
    norms: list[FloatArray]
    orbit_distance: list[FloatArray | None]
    distance_fits: list[DecayFit | None]
    pair_differences: dict[tuple[int, int], FloatArray]
    pair_fits: dict[tuple[int, int], DecayFit | None]
    blowup: list[str | None]
    orbit: PeriodicOrbit | None = None
    ell: float = 1.0
    extra: dict[str, Any] = field(default_factory=dict)

    def final_difference(self, i: int, j: int) -> float:
        return float(self.pair_differences[(min(i, j), max(i, j))][-1])

    def to_dict(self) -> dict[str, Any]:
        per_initial = []
        for i, t in enumerate(self.times):
            dist = self.orbit_distance[i]
            fit = self.distance_fits[i]
            per_initial.append(
                {
                    "index": i,
                    "blowup": self.blowup[i],
                    "times": t.tolist(),
                    "norm": self.norms[i].tolist(),
                    "orbit_distance": None if dist is None else dist.tolist(),
                    "distance_fit": fit.to_dict() if fit else None,
                }
            )
        pairs = [
            {
                "pair": list(k),
                "difference": v.tolist(),
                "fit": self.pair_fits[k].to_dict() if self.pair_fits[k] else None,
            }
            for k, v in sorted(self.pair_differences.items())
        ]
        return {"ell": self.ell, "per_initial": per_initial, "pairs": pairs}


def stability_experiment(
    phi_list: Sequence[Field],
    f: ForcingSpec,
    cfg: SolverConfig,
    horizon: float,
    ell: float = 1.0,
    orbit: PeriodicOrbit | None = None,
    orbit_tol: float = 1e-10,
    max_workers: int | None = None,
) -> StabilityReport:
    """Run every initial datum, compare pairwise and against the periodic orbit.

    Fits start after three periods (or at ``0.1 horizon`` when aperiodic) and end
    where the series first drops under ``100 * orbit_tol``, the accuracy floor of
    the orbit itself. A blow-up is recorded per datum and does not stop the batch.
    """
    workers = max_workers or os.cpu_count() or 1

    def run(phi: Field) -> tuple[Trajectory, str | None]:
        try:
            return solve(phi, f, 0.0, horizon, cfg), None
        except BlowUpError as exc:
            return exc.trajectory, str(exc)

    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(run, phi_list))
    trajs = [r[0] for r in results]
    blowup = [r[1] for r in results]

    periodic = f.theta > 0
    if periodic and orbit is None:
        orbit = find_periodic_orbit(f, cfg, tol=orbit_tol, ell=ell)
    start = TRANSIENT_PERIODS * f.theta if periodic else 0.1 * horizon
    floor = 100.0 * (orbit.tol if orbit else orbit_tol)

    distances: list[FloatArray | None] = []
    dist_fits: list[DecayFit | None] = []
    if periodic:
        orbit_traj = solve(orbit.phi_tilde, f, 0.0, f.theta, cfg)
    for traj, err in zip(trajs, blowup):
        if not periodic or err is not None:
            distances.append(None)
            dist_fits.append(None)
            continue
        d = orbit_distance(traj, orbit_traj, f.theta, ell)
        distances.append(d)
        dist_fits.append(_safe_fit(traj.times, d, _floor_window(traj.times, d, start, floor)))

    diffs: dict[tuple[int, int], FloatArray] = {}
    pair_fits: dict[tuple[int, int], DecayFit | None] = {}
    for i in range(len(trajs)):
        for j in range(i + 1, len(trajs)):
            if blowup[i] or blowup[j]:
                continue
            d = np.asarray(bessel_norm_coeffs(trajs[i].coeffs - trajs[j].coeffs, trajs[i].grid, ell))
            diffs[(i, j)] = d
            t = trajs[i].times
            pair_fits[(i, j)] = _safe_fit(t, d, _floor_window(t, d, start, floor))

    return StabilityReport(
        times=[t.times for t in trajs],
        norms=[t.norms(ell) for t in trajs],
        orbit_distance=distances,
        distance_fits=dist_fits,
        pair_differences=diffs,
        pair_fits=pair_fits,
        blowup=blowup,
        orbit=orbit,
        ell=ell,
    )
