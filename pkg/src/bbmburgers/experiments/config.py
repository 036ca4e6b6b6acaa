"""Experiment configuration: TOML (or JSON) files merged over per-experiment defaults."""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from ..errors import ConfigError, DomainError
from ..forcing import ForcingSpec
from ..spectral import Field, Grid1D, bessel_norm_coeffs, random_field
from ..stepper import SolverConfig

try:
    import tomllib  # type: ignore[import-not-found]
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

EXPERIMENTS = (
    "linear-decay",
    "forced-response",
    "nonlinear-smalldata",
    "picard-crosscheck",
    "periodic-find",
    "periodicity-defect",
    "stability",
    "absorbing",
    "pseudo",
)
PERIODIC_EXPERIMENTS = {"periodic-find", "periodicity-defect", "stability"}

_PERIODIC_FORCING = {"modes": [1.0], "amplitude": 0.01, "theta": 1.0, "temporal": "cos"}
_SMALL_RANDOM = [{"preset": "random", "h1_norm": 0.05}]

DEFAULTS: dict[str, dict[str, Any]] = {
    "linear-decay": {"horizon": 10.0, "initials": [{"preset": "random", "h1_norm": 1.0}]},
    "forced-response": {
        "horizon": 20.0,
        "forcing": {"modes": [1.0], "amplitude": 0.01, "theta": 0.0, "temporal": "const"},
        "initials": [{"preset": "zero"}],
    },
    "nonlinear-smalldata": {"horizon": 5.0, "initials": _SMALL_RANDOM},
    "picard-crosscheck": {"horizon": 2.0, "initials": _SMALL_RANDOM, "params": {"tol": 1e-12, "max_iter": 50}},
    "periodic-find": {
        "horizon": 1.0,
        "forcing": _PERIODIC_FORCING,
        "initials": [{"preset": "zero"}],
        "params": {"tol": 1e-8, "k_max": 200},
    },
    "periodicity-defect": {"horizon": 25.0, "forcing": _PERIODIC_FORCING, "initials": [{"preset": "zero"}]},
    "stability": {
        "horizon": 40.0,
        "forcing": _PERIODIC_FORCING,
        "solver": {"save_every": 10},
        "initials": [{"preset": "zero"}, {"preset": "mode", "mode": 1, "amplitude": 3.0}],
        "params": {"orbit_tol": 1e-10},
    },
    "absorbing": {
        "horizon": 40.0,
        "forcing": _PERIODIC_FORCING,
        "solver": {"save_every": 10},
        "initials": [{"preset": "mode", "mode": 1, "h1_norm": 3.0}],
        "params": {"triple": "cubic-damped", "settle_time": 30.0},
    },
    "pseudo": {"horizon": 5.0, "initials": _SMALL_RANDOM, "params": {"triple": "cubic-damped"}},
}

_TOP_KEYS = {"experiment", "solver", "forcing", "initials", "horizon", "sobolev_ell", "seed", "output_dir", "params"}
_SOLVER_KEYS = {
    "n_modes", "dt", "scheme", "fixedpoint_tol", "fixedpoint_max_iter", "dealias", "save_every", "blowup_threshold",
}
_FORCING_KEYS = {"modes", "amplitude", "theta", "temporal"}
_INITIAL_KEYS = {"preset", "mode", "amplitude", "h1_norm", "coeffs", "decay"}
_PARAM_KEYS = {
    "tol", "max_iter", "k_max", "orbit_tol", "triple", "settle_time", "window", "plot", "max_workers", "ell",
}


@dataclass(frozen=True)
class InitialSpec:
    """Descriptor of an initial field.

    Presets: ``zero``; ``mode`` (``amplitude * sqrt(2) sin(mode pi x)``, or rescaled
    to ``h1_norm``); ``random`` (seeded, ``k^-decay`` spectrum); ``coeffs`` (explicit
    sine coefficients).
    """

    preset: str = "zero"
    mode: int = 1
    amplitude: float = 1.0
    h1_norm: float | None = None
    coeffs: tuple[float, ...] = ()
    decay: float = 2.0

    def build(self, grid: Grid1D, rng: np.random.Generator) -> Field:
        if self.preset == "zero":
            return Field.zeros(grid)
        if self.preset == "random":
            return random_field(grid, rng, self.decay, self.h1_norm)
        if self.preset == "mode":
            c = Field.mode(grid, self.mode, self.amplitude).coeffs.copy()
        elif self.preset == "coeffs":
            c = np.zeros(grid.n_modes)
            n = min(len(self.coeffs), grid.n_modes)
            c[:n] = self.coeffs[:n]
        else:
            raise ConfigError(f"unknown initial preset {self.preset!r}")
        if self.h1_norm is not None:
            norm = float(bessel_norm_coeffs(c, grid, 1.0))
            c = c * (self.h1_norm / norm) if norm > 0 else c
        return Field.from_coeffs(grid, c)


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    solver: SolverConfig
    forcing: ForcingSpec
    initials: tuple[InitialSpec, ...]
    horizon: float
    sobolev_ell: tuple[float, ...] = (1.0,)
    seed: int = 0
    output_dir: Path = Path("runs")
    params: Mapping[str, Any] = field(default_factory=dict)
    raw: Mapping[str, Any] = field(default_factory=dict, compare=False)

    @property
    def grid(self) -> Grid1D:
        return self.solver.grid()

    def build_initials(self) -> list[Field]:
        """Initial fields; one generator seeded once so the list is reproducible."""
        rng = np.random.default_rng(self.seed)
        return [spec.build(self.grid, rng) for spec in self.initials]

    def config_hash(self) -> str:
        blob = json.dumps(self.raw, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()


def _merge(base: dict[str, Any], override: Mapping[str, Any]) -> dict[str, Any]:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, Mapping) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def _check_keys(section: Mapping[str, Any], allowed: set[str], where: str) -> None:
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {sorted(unknown)}")


def read_config_file(path: str | Path) -> dict[str, Any]:
    """Parse TOML, or JSON (a plain config or a run manifest with a ``config`` entry)."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        if path.suffix == ".json":
            data = json.loads(text)
            return data["config"] if "config" in data and "manifest_version" in data else data
        return tomllib.loads(text)
    except (ValueError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc


def resolve(raw: Mapping[str, Any], experiment: str | None = None) -> ExperimentConfig:
    """Merge ``raw`` over the experiment defaults and validate.

    Raises:
        ConfigError: On unknown experiments or keys, bad values, or missing
            experiment-specific requirements.
    """
    _check_keys(raw, _TOP_KEYS, "config")
    name = experiment or raw.get("experiment")
    if raw.get("experiment") not in (None, name):
        raise ConfigError(f"config is for {raw['experiment']!r}, command asked for {name!r}")
    if name not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {name!r}; choose from {list(EXPERIMENTS)}")
    base = {
        "experiment": name,
        "solver": {"n_modes": 128, "dt": 1e-3, "scheme": "CN_AB2"},
        "forcing": {"modes": [], "amplitude": 0.0, "theta": 0.0, "temporal": "const"},
        "horizon": 1.0,
        "sobolev_ell": [1.0],
        "seed": 0,
        "output_dir": f"runs/{name}",
        "params": {},
    }
    merged = _merge(_merge(base, DEFAULTS[name]), raw)
    if "initials" in raw:
        merged["initials"] = copy.deepcopy(list(raw["initials"]))
    merged["experiment"] = name
    for section, allowed in (("solver", _SOLVER_KEYS), ("forcing", _FORCING_KEYS), ("params", _PARAM_KEYS)):
        if not isinstance(merged[section], Mapping):
            raise ConfigError(f"[{section}] must be a table")
        _check_keys(merged[section], allowed, f"[{section}]")
    if not merged.get("initials"):
        raise ConfigError("at least one initial field is required")
    for item in merged["initials"]:
        _check_keys(item, _INITIAL_KEYS, "[[initials]]")
    theta = merged["forcing"].get("theta", 0.0)
    if name in PERIODIC_EXPERIMENTS and not (isinstance(theta, (int, float)) and theta > 0):
        raise ConfigError(f"{name} requires forcing.theta > 0")
    try:
        solver = SolverConfig(**merged["solver"])
        forcing = ForcingSpec(**{**merged["forcing"], "modes": tuple(merged["forcing"]["modes"])})
        initials = tuple(
            InitialSpec(**{**item, "coeffs": tuple(item.get("coeffs", ()))}) for item in merged["initials"]
        )
        horizon = float(merged["horizon"])
        ells = tuple(float(s) for s in merged["sobolev_ell"])
        seed = int(merged["seed"])
    except (TypeError, ValueError, DomainError) as exc:
        raise ConfigError(str(exc)) from exc
    if not horizon > 0:
        raise ConfigError("horizon must be positive")
    if any(s < -1 for s in ells):
        raise ConfigError("sobolev_ell entries must be >= -1")
    for spec in initials:
        if spec.preset not in {"zero", "mode", "random", "coeffs"}:
            raise ConfigError(f"unknown initial preset {spec.preset!r}")
        if spec.preset == "mode" and not 1 <= spec.mode <= solver.n_modes:
            raise ConfigError(f"initial mode {spec.mode} outside 1..{solver.n_modes}")
    params = dict(merged["params"])
    if forcing.theta > 0:
        ratio = forcing.theta / solver.dt
        if abs(ratio - round(ratio)) > 1e-9 * ratio:
            raise ConfigError("solver.dt must divide forcing.theta exactly")
    if name == "absorbing" and not horizon > float(params.get("settle_time", 30.0)):
        raise ConfigError("absorbing requires horizon > params.settle_time")
    if name in {"absorbing", "pseudo"}:
        triple = params.get("triple", "cubic-damped")
        if not isinstance(triple, (str, Mapping)):
            raise ConfigError("params.triple must be a registry name or a table of coefficient lists")
        if isinstance(triple, Mapping):
            _check_keys(triple, {"F", "Phi", "G", "name"}, "[params.triple]")
    return ExperimentConfig(
        experiment=name,
        solver=solver,
        forcing=forcing,
        initials=initials,
        horizon=horizon,
        sobolev_ell=ells,
        seed=seed,
        output_dir=Path(merged["output_dir"]),
        params=params,
        raw=merged,
    )


def load_config(path: str | Path | None, experiment: str | None = None, **overrides: Any) -> ExperimentConfig:
    """Read ``path`` (optional), apply CLI-style overrides, and resolve.

    Recognised overrides: ``out``, ``seed``, ``modes``, ``dt``, ``plot``.
    """
    raw = read_config_file(path) if path is not None else {}
    raw = copy.deepcopy(raw)
    if overrides.get("out") is not None:
        raw["output_dir"] = str(overrides["out"])
    if overrides.get("seed") is not None:
        raw["seed"] = int(overrides["seed"])
    solver = dict(raw.get("solver", {}))
    if overrides.get("modes") is not None:
        solver["n_modes"] = int(overrides["modes"])
    if overrides.get("dt") is not None:
        solver["dt"] = float(overrides["dt"])
    if solver:
        raw["solver"] = solver
    if overrides.get("plot"):
        raw["params"] = {**raw.get("params", {}), "plot": True}
    return resolve(raw, experiment)
