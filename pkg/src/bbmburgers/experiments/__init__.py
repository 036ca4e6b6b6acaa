"""Configuration, orchestration, artifacts and the acceptance checklist."""

from .config import EXPERIMENTS, ExperimentConfig, InitialSpec, load_config, resolve
from .runner import run
from .verify import CRITERIA, CriterionResult, verify_suite

__all__ = [
    "CRITERIA",
    "EXPERIMENTS",
    "CriterionResult",
    "ExperimentConfig",
    "InitialSpec",
    "load_config",
    "resolve",
    "run",
    "verify_suite",
]
