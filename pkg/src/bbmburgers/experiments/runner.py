"""Dispatch experiments to the solver modules and write their artifacts."""

from __future__ import annotations

import csv
import json
import math
import platform
import time
import traceback
from pathlib import Path
from typing import Any, Callable

import numpy as np
import scipy
from scipy.integrate import trapezoid

from .. import __version__
from ..duhamel import duhamel_residual, picard_solve
from ..errors import ConfigError, NonConvergenceError, StepFailure
from ..fitting import fit_exponential_decay
from ..linear import solve_linear_forced, solve_linear_homogeneous
from ..periodic import find_periodic_orbit, periodicity_defect, stability_experiment
from ..pseudo import NonlinearityTriple, absorbing_check, check_assumptions, get_triple, solve_pseudo
from ..spectral import bessel_norm, write_field_csv
from ..stepper import cubic_integrals, data_norm, energy_residual, solve
from ..trajectory import Trajectory
from .config import ExperimentConfig

MANIFEST_VERSION = 1


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, Path):
        return str(obj)
    return obj


def write_json(path: Path, data: Any) -> None:
    path.write_text(json.dumps(_jsonable(data), sort_keys=True, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


def _write_series(path: Path, columns: dict[str, Any]) -> None:
    names = list(columns)
    rows = zip(*(np.asarray(columns[n]) for n in names))
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(names)
        for row in rows:
            writer.writerow([f"{v:.17g}" for v in row])


class _Run:
    """Artifact bookkeeping for one experiment directory."""

    def __init__(self, cfg: ExperimentConfig) -> None:
        self.cfg = cfg
        self.out = Path(cfg.output_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        self.artifacts: list[str] = []

    def path(self, name: str) -> Path:
        self.artifacts.append(name)
        return self.out / name

    def trajectory(self, traj: Trajectory, name: str = "trajectory.csv") -> None:
        traj.to_csv(self.path(name))

    def json(self, name: str, data: Any) -> None:
        write_json(self.path(name), data)

    def plot(self, series: dict[str, tuple[Any, Any]], name: str = "plot.svg", ylabel: str = "norm") -> None:
        if not self.cfg.params.get("plot"):
            return
        from .plots import log_norm_svg

        log_norm_svg(series, self.path(name), ylabel=ylabel)


def _name(i: int, n: int, stem: str = "trajectory") -> str:
    return f"{stem}.csv" if n == 1 else f"{stem}_{i}.csv"


def _triple_from(params: dict[str, Any]) -> NonlinearityTriple:
    spec = params.get("triple", "cubic-damped")
    if isinstance(spec, str):
        try:
            return get_triple(spec)
        except KeyError as exc:
            raise ConfigError(str(exc)) from exc
    return NonlinearityTriple.polynomial(
        F=spec.get("F", ()), Phi=spec.get("Phi", ()), G=spec.get("G", ()), name=spec.get("name", "config")
    )


def _linear_decay(cfg: ExperimentConfig, run: _Run) -> dict[str, Any]:
    fits, series = [], {}
    phis = cfg.build_initials()
    for i, phi in enumerate(phis):
        traj = solve_linear_homogeneous(phi, cfg.horizon, cfg.solver.dt)
        run.trajectory(traj, _name(i, len(phis)))
        norms = traj.norms(1.0)
        entry = {"initial": i}
        if norms[-1] > 0:
            entry["fit"] = fit_exponential_decay(traj.times, norms).to_dict()
            series[f"initial {i}"] = (traj.times, norms)
        else:
            entry["fit"] = None
        fits.append(entry)
    run.json("decay_fit.json", {"ell": 1.0, "fits": fits})
    run.plot(series, ylabel="H1 norm")
    return {"fits": fits}


def _forced_response(cfg: ExperimentConfig, run: _Run) -> dict[str, Any]:
    out = []
    phis = cfg.build_initials()
    for i, phi in enumerate(phis):
        traj = solve_linear_forced(phi, cfg.forcing, cfg.horizon, cfg.solver.dt)
        run.trajectory(traj, _name(i, len(phis)))
        forcing_sq = trapezoid(np.asarray(cfg.forcing.norm(traj.times, traj.grid, -1.0)) ** 2, traj.times)
        sup_sq = float(np.max(traj.norms(1.0) ** 2))
        out.append(
            {"initial": i, "sup_h1_sq": sup_sq, "forcing_hm1_sq_integral": forcing_sq,
             "ratio": sup_sq / forcing_sq if forcing_sq > 0 else None}
        )
    run.json("summary.json", {"responses": out})
    return {"responses": out}


def _nonlinear_smalldata(cfg: ExperimentConfig, run: _Run) -> dict[str, Any]:
    out = []
    phis = cfg.build_initials()
    for i, phi in enumerate(phis):
        traj = solve(phi, cfg.forcing, 0.0, cfg.horizon, cfg.solver)
        run.trajectory(traj, _name(i, len(phis)))
        dn = data_norm(phi, cfg.forcing, cfg.horizon, cfg.solver.dt)
        y = traj.metadata["y_functionals"]
        out.append(
            {
                "initial": i,
                "y_functionals": y,
                "data_norm": dn,
                "y1_over_data": y[1.0]["y"] / dn if dn > 0 else None,
                "max_energy_residual": float(np.max(np.abs(energy_residual(traj, cfg.forcing)))),
                "max_cubic_integral": float(np.max(np.abs(cubic_integrals(traj)))),
            }
        )
    run.json("summary.json", {"runs": out})
    return {"runs": out}


def _picard(cfg: ExperimentConfig, run: _Run) -> dict[str, Any]:
    phi = cfg.build_initials()[0]
    p = cfg.params
    u, report = picard_solve(phi, cfg.forcing, cfg.horizon, cfg.solver.dt, p.get("tol", 1e-12), p.get("max_iter", 50))
    report.to_csv(run.path("picard_iterations.csv"))
    ref = solve(phi, cfg.forcing, 0.0, cfg.horizon, cfg.solver.with_(save_every=1))
    run.trajectory(u, "picard_trajectory.csv")
    run.trajectory(ref, "stepper_trajectory.csv")
    geo = report.geometric_fit()
    summary = {
        "iterations": report.iterations,
        "sup_h1_discrepancy": float(np.max((u - ref).norms(1.0))),
        "contraction_ratios": report.contraction_ratio,
        "geometric_ratio": geo[0] if geo else None,
        "geometric_r_squared": geo[1] if geo else None,
        "stepper_duhamel_residual": duhamel_residual(ref, phi, cfg.forcing),
    }
    run.json("summary.json", summary)
    return summary


def _periodic_find(cfg: ExperimentConfig, run: _Run) -> dict[str, Any]:
    p = cfg.params
    ell = float(p.get("ell", cfg.sobolev_ell[0]))
    phis = cfg.build_initials()
    orbits = [
        find_periodic_orbit(cfg.forcing, cfg.solver, p.get("tol", 1e-8), int(p.get("k_max", 200)), ell, phi0=phi)
        for phi in phis
    ]
    for i, orbit in enumerate(orbits):
        write_field_csv(orbit.phi_tilde, run.path(_name(i, len(orbits), "phi_tilde")))
    spread = max((bessel_norm(o.phi_tilde - orbits[0].phi_tilde, ell) for o in orbits), default=0.0)
    report = {"orbit": orbits[0].to_dict(), "orbits": [o.to_dict() for o in orbits], "seed_spread": spread}
    run.json("report.json", report)
    run.plot({f"seed {i}": (np.arange(1, len(o.iterates) + 1), o.iterates) for i, o in enumerate(orbits)},
             ylabel="period-map increment")
    return report


def _periodicity_defect(cfg: ExperimentConfig, run: _Run) -> dict[str, Any]:
    phi = cfg.build_initials()[0]
    traj = solve(phi, cfg.forcing, 0.0, cfg.horizon, cfg.solver)
    run.trajectory(traj)
    window = tuple(cfg.params["window"]) if "window" in cfg.params else None
    defects = {ell: periodicity_defect(traj, cfg.forcing.theta, ell, window) for ell in cfg.sobolev_ell}
    first = defects[cfg.sobolev_ell[0]]
    _write_series(run.path("defect.csv"), {"t": first.times, **{f"defect_H{e:g}": d.values for e, d in defects.items()}})
    report = {"defect": first.to_dict(), "defect_by_ell": {f"{e:g}": d.to_dict() for e, d in defects.items()}}
    run.json("report.json", report)
    run.plot({f"H^{e:g}": (d.times, d.values) for e, d in defects.items()}, ylabel="periodicity defect")
    return {"fits": {f"{e:g}": d.fit.to_dict() if d.fit else None for e, d in defects.items()}}


def _stability(cfg: ExperimentConfig, run: _Run) -> dict[str, Any]:
    p = cfg.params
    ell = float(p.get("ell", cfg.sobolev_ell[0]))
    rep = stability_experiment(
        cfg.build_initials(), cfg.forcing, cfg.solver, cfg.horizon, ell,
        orbit_tol=p.get("orbit_tol", 1e-10), max_workers=p.get("max_workers"),
    )
    for i, t in enumerate(rep.times):
        cols = {"t": t, "norm": rep.norms[i]}
        if rep.orbit_distance[i] is not None:
            cols["orbit_distance"] = rep.orbit_distance[i]
        _write_series(run.path(f"initial_{i}.csv"), cols)
    report = {"orbit": rep.orbit.to_dict() if rep.orbit else None, "stability": rep.to_dict()}
    run.json("report.json", report)
    run.plot({f"initial {i}": (t, d) for i, (t, d) in enumerate(zip(rep.times, rep.orbit_distance)) if d is not None},
             ylabel="distance to orbit")
    return {"blowup": rep.blowup, "final_pair_differences": {f"{i}-{j}": float(d[-1]) for (i, j), d in rep.pair_differences.items()}}


def _absorbing(cfg: ExperimentConfig, run: _Run) -> dict[str, Any]:
    triple = _triple_from(dict(cfg.params))
    settle = float(cfg.params.get("settle_time", 30.0))
    ell = float(cfg.params.get("ell", cfg.sobolev_ell[0]))
    delta = abs(cfg.forcing.amplitude)
    reports, series = [], {}
    phis = cfg.build_initials()
    for i, phi in enumerate(phis):
        traj = solve_pseudo(phi, triple, cfg.forcing, cfg.horizon, cfg.solver)
        run.trajectory(traj, _name(i, len(phis)))
        rep = absorbing_check(traj, delta, ell, settle)
        reports.append({**rep.to_dict(), "passes": rep.passes()})
        series[f"initial {i}"] = (traj.times, traj.norms(ell))
    run.json("report.json", {"triple": triple.name, "assumptions": check_assumptions(triple).to_dict(), "absorbing": reports})
    run.plot(series, ylabel=f"H{ell:g} norm")
    return {"absorbing": reports}


def _pseudo(cfg: ExperimentConfig, run: _Run) -> dict[str, Any]:
    triple = _triple_from(dict(cfg.params))
    assumptions = check_assumptions(triple)
    run.json("assumptions.json", assumptions.to_dict())
    out = []
    phis = cfg.build_initials()
    for i, phi in enumerate(phis):
        traj = solve_pseudo(phi, triple, cfg.forcing, cfg.horizon, cfg.solver)
        run.trajectory(traj, _name(i, len(phis)))
        out.append({"initial": i, "y_functionals": traj.metadata["y_functionals"],
                    "data_norm": data_norm(phi, cfg.forcing, cfg.horizon, cfg.solver.dt)})
    run.json("summary.json", {"triple": triple.name, "runs": out})
    return {"runs": out}


DISPATCH: dict[str, Callable[[ExperimentConfig, _Run], dict[str, Any]]] = {
    "linear-decay": _linear_decay,
    "forced-response": _forced_response,
    "nonlinear-smalldata": _nonlinear_smalldata,
    "picard-crosscheck": _picard,
    "periodic-find": _periodic_find,
    "periodicity-defect": _periodicity_defect,
    "stability": _stability,
    "absorbing": _absorbing,
    "pseudo": _pseudo,
}


def run(cfg: ExperimentConfig) -> int:
    """Execute ``cfg`` and write artifacts plus ``manifest.json``.

    Returns:
        0 on success, 1 on a solver failure (a ``failure.json`` record is written).
    """
    job = _Run(cfg)
    start = time.perf_counter()
    status, summary, failure = "ok", None, None
    try:
        summary = DISPATCH[cfg.experiment](cfg, job)
    except (StepFailure, NonConvergenceError, FloatingPointError, ValueError) as exc:
        status = "failed"
        failure = {
            "error": type(exc).__name__,
            "message": str(exc),
            "history": getattr(exc, "history", None),
            "time": getattr(exc, "time", None),
            "traceback": traceback.format_exc().splitlines()[-3:],
        }
        job.json("failure.json", failure)
    manifest = {
        "manifest_version": MANIFEST_VERSION,
        "experiment": cfg.experiment,
        "status": status,
        "config": cfg.raw,
        "config_hash": cfg.config_hash(),
        "code_version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "wall_time_s": time.perf_counter() - start,
        "artifacts": sorted(job.artifacts),
        "summary": summary,
        "rerun": f"bbm {cfg.experiment} --config {job.out / 'manifest.json'}",
    }
    write_json(job.out / "manifest.json", manifest)
    return 0 if status == "ok" else 1
