"""Acceptance checklist shared by ``bbm verify`` and the test suite.

Each check returns a :class:`CriterionResult` with its measured values, the
threshold it was held to and its wall time. Fast-tier checks run in well under
two minutes together; the full tier adds the orbit, stability, absorbing and
convergence studies.
"""

from __future__ import annotations

import contextlib
import math
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Iterator

import numpy as np

from .. import linear
from ..duhamel import picard_solve
from ..forcing import ForcingSpec
from ..linear import (
    assemble_generator,
    energy_identity_residual,
    semigroup_matrix,
    solve_linear_homogeneous,
)
from ..periodic import find_periodic_orbit, periodicity_defect, stability_experiment
from ..pseudo import NonlinearityTriple, absorbing_check, check_assumptions, get_triple, solve_pseudo
from ..spectral import Field, Grid1D, bessel_norm, bessel_norm_coeffs, random_field
from ..stepper import SolverConfig, cubic_integrals, solve

SEED = 20240601


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    measured: dict[str, Any]
    threshold: str
    seconds: float = 0.0
    time_limit: float = math.inf
    notes: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        vals = ", ".join(f"{k}={_fmt(v)}" for k, v in self.measured.items())
        return (
            f"[{status}] criterion {self.number:>2} {self.title}: {vals} | "
            f"required {self.threshold} | {self.seconds:.1f}s (limit {self.time_limit:g}s)"
        )


def _fmt(v: Any) -> str:
    if isinstance(v, float):
        return f"{v:.3e}"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    return str(v)


Check = Callable[[], tuple[bool, dict[str, Any], str]]


@dataclass(frozen=True)
class Criterion:
    number: int
    title: str
    tier: str
    time_limit: float
    check: Check = field(repr=False)

    def run(self) -> CriterionResult:
        start = time.perf_counter()
        ok, measured, threshold = self.check()
        elapsed = time.perf_counter() - start
        within = elapsed < self.time_limit
        return CriterionResult(self.number, self.title, bool(ok and within), measured, threshold, elapsed, self.time_limit)


def _grid(K: int = 128) -> Grid1D:
    return Grid1D(K)


def _rng(offset: int = 0) -> np.random.Generator:
    return np.random.default_rng(SEED + offset)


def _periodic_forcing(delta: float = 0.01) -> ForcingSpec:
    return ForcingSpec((1.0,), delta, 1.0, "cos")


def check_dissipativity() -> tuple[bool, dict[str, Any], str]:
    grid = _grid()
    A = assemble_generator(grid)
    W = grid.eigenvalues
    k2 = grid.wavenumbers**2
    rng = _rng(1)
    worst_rel, worst_margin = 0.0, -math.inf
    for _ in range(100):
        c = random_field(grid, rng, h1_norm=1.0).coeffs
        Ac = A @ c
        ux2 = float(np.sum(k2 * c**2))
        uxx2 = float(np.sum(k2**2 * c**2))
        h1 = float(np.dot(W * c, Ac))
        h2 = float(np.dot(W**2 * c, Ac))
        worst_rel = max(worst_rel, abs(h1 + ux2) / ux2)
        worst_margin = max(worst_margin, h2 + 0.5 * (ux2 + uxx2))
    ok = worst_rel <= 1e-9 and worst_margin <= 1e-9
    return ok, {"h1_rel_error": worst_rel, "h2_margin": worst_margin}, "h1_rel_error <= 1e-9, h2_margin <= 1e-9"


def check_linear_decay() -> tuple[bool, dict[str, Any], str]:
    grid = _grid()
    rng = _rng(2)
    worst = 0.0
    for _ in range(10):
        traj = solve_linear_homogeneous(random_field(grid, rng, h1_norm=1.0), 10.0, 0.01)
        ratio = traj.energy * np.exp(traj.times) / traj.energy[0]
        worst = max(worst, float(ratio.max()))
    return worst <= 1 + 1e-6, {"max_energy_ratio_e^t": worst}, "E(t) e^t / E(0) <= 1 + 1e-6"


def check_energy_identity() -> tuple[bool, dict[str, Any], str]:
    grid = _grid()
    rng = _rng(3)
    phis = [random_field(grid, rng, h1_norm=1.0) for _ in range(3)]
    res = {}
    for dt in (1e-3, 5e-4):
        res[dt] = max(float(np.max(np.abs(energy_identity_residual(solve_linear_homogeneous(p, 2.0, dt))))) for p in phis)
    drop = res[1e-3] / res[5e-4]
    ok = res[1e-3] <= 1e-6 and drop >= 3.5
    return ok, {"residual_dt1e-3": res[1e-3], "residual_dt5e-4": res[5e-4], "drop": drop}, "residual <= 1e-6, drop >= 3.5"


def check_semigroup_law() -> tuple[bool, dict[str, Any], str]:
    grid = _grid()
    A = assemble_generator(grid)
    rng = _rng(4)
    phis = np.stack([random_field(grid, rng, h1_norm=1.0).coeffs for _ in range(10)])
    worst = 0.0
    for s, t in ((0.3, 0.7), (1.0, 1.0), (0.05, 2.0)):
        lhs = phis @ semigroup_matrix(A, s + t).T
        rhs = phis @ (semigroup_matrix(A, s) @ semigroup_matrix(A, t)).T
        worst = max(worst, float(np.max(bessel_norm_coeffs(lhs - rhs, grid, 1.0))))
    return worst <= 1e-9, {"max_h1_defect": worst}, "<= 1e-9"


def check_picard() -> tuple[bool, dict[str, Any], str]:
    grid = _grid()
    dt = 1e-3
    phi = random_field(grid, _rng(5), h1_norm=0.05)
    f = ForcingSpec.zero()
    u, report = picard_solve(phi, f, 2.0, dt, tol=1e-13)
    ref = solve(phi, f, 0.0, 2.0, SolverConfig(dt=dt))
    disc = float(np.max((u - ref).norms(1.0)))
    ratios = [r for r in report.contraction_ratio[1:]]
    band = max(1e-4, 5 * dt**2)
    ok = disc <= band and all(r < 1 for r in ratios) and report.converged
    return ok, {"sup_h1_discrepancy": disc, "ratios": ratios}, f"discrepancy <= {band:g}, every ratio after the first < 1"


def check_cubic() -> tuple[bool, dict[str, Any], str]:
    grid = _grid()
    phi = random_field(grid, _rng(6), h1_norm=0.05)
    traj = solve(phi, _periodic_forcing(), 0.0, 2.0, SolverConfig())
    worst = float(np.max(np.abs(cubic_integrals(traj))))
    return worst <= 1e-10, {"max_cubic_integral": worst}, "<= 1e-10"


def check_periodicity() -> tuple[bool, dict[str, Any], str]:
    grid = _grid()
    traj = solve(Field.zeros(grid), _periodic_forcing(), 0.0, 25.0, SolverConfig())
    fit = periodicity_defect(traj, 1.0, 1.0, (3.0, 20.0)).fit
    ok = fit is not None and fit.rho > 0.2 and fit.r_squared >= 0.95
    return ok, {"rho": fit.rho, "r_squared": fit.r_squared}, "rho > 0.2, R^2 >= 0.95 on [3, 20]"


def check_orbit() -> tuple[bool, dict[str, Any], str]:
    grid = _grid()
    tol = 1e-8
    f, cfg = _periodic_forcing(), SolverConfig()
    seeds = [Field.zeros(grid), Field.mode(grid, 2, 0.05)]
    orbits = [find_periodic_orbit(f, cfg, tol, phi0=s) for s in seeds]
    spread = bessel_norm(orbits[0].phi_tilde - orbits[1].phi_tilde, 1.0)
    certs = [o.certificate for o in orbits]
    mus = [o.mu for o in orbits]
    ok = all(m < 1 for m in mus) and spread <= 10 * tol and all(c < 2e-8 for c in certs)
    return ok, {"mu": mus, "seed_spread": spread, "certificate": certs}, "mu < 1, spread <= 1e-7, certificate < 2e-8"


def check_stability() -> tuple[bool, dict[str, Any], str]:
    grid = _grid()
    phis = [Field.zeros(grid), Field.mode(grid, 1, 3.0)]
    rep = stability_experiment(phis, _periodic_forcing(0.01), SolverConfig(save_every=10), 40.0)
    final = rep.final_difference(0, 1)
    fits = rep.distance_fits
    rhos = [f.rho if f else math.nan for f in fits]
    r2 = [f.r_squared if f else math.nan for f in fits]
    ok = final <= 1e-5 and all(f is not None and f.rho > 0 and f.r_squared >= 0.9 for f in fits)
    return ok, {"diff_h1_t40": final, "rho": rhos, "r_squared": r2}, "diff <= 1e-5, rho > 0, R^2 >= 0.9"


def check_absorbing() -> tuple[bool, dict[str, Any], str]:
    grid = _grid()
    delta = 0.01
    triple = get_triple("cubic-damped")
    phi = Field.mode(grid, 1, 3.0 / math.sqrt(1 + math.pi**2))
    traj = solve_pseudo(phi, triple, _periodic_forcing(delta), 40.0, SolverConfig(save_every=10))
    rep = absorbing_check(traj, delta, 1.0, 30.0)
    accept = check_assumptions(triple)
    reject = check_assumptions(NonlinearityTriple.polynomial(G=[0, 1], name="linear-G"))
    ok = rep.plateau <= 100 * delta and accept.passed and not reject.gap_ok and reject.poincare_ok
    measured = {
        "plateau": rep.plateau,
        "plateau_over_delta": rep.plateau_ratio,
        "cubic_damped_passes": accept.passed,
        "G=u_rejected_on_gap": not reject.gap_ok,
    }
    return ok, measured, "plateau <= 100 delta; checker accepts cubic-damped, rejects G=u on the gap clause"


def check_reduction() -> tuple[bool, dict[str, Any], str]:
    grid = _grid()
    phi = random_field(grid, _rng(11), h1_norm=0.05)
    f, cfg = _periodic_forcing(), SolverConfig()
    a = solve_pseudo(phi, get_triple("burgers"), f, 5.0, cfg)
    b = solve(phi, f, 0.0, 5.0, cfg)
    diff = float(np.max((a - b).norms(1.0)))
    return diff <= 1e-10, {"sup_h1_difference": diff}, "<= 1e-10"


def _embed(c: np.ndarray, K: int) -> np.ndarray:
    out = np.zeros(K)
    out[: c.size] = c
    return out


def check_convergence() -> tuple[bool, dict[str, Any], str]:
    # temporal: successive-refinement differences at T = 1
    grid = _grid()
    phi = random_field(grid, _rng(12), h1_norm=0.05)
    f = _periodic_forcing()
    dts = (4e-3, 2e-3, 1e-3, 5e-4)
    finals = [solve(phi, f, 0.0, 1.0, SolverConfig(dt=dt, save_every=10**6)).final.coeffs for dt in dts]
    diffs = [float(bessel_norm_coeffs(finals[i] - finals[i + 1], grid, 1.0)) for i in range(3)]
    slope = float(np.polyfit(np.log(dts[:3]), np.log(diffs), 1)[0])
    # spatial: single smooth mode at H1 size 0.05, same dt, against K = 256
    amp = 0.05 / math.sqrt(1 + math.pi**2)
    dt = 1e-3

    def final(K: int) -> np.ndarray:
        return solve(Field.mode(Grid1D(K), 1, amp), ForcingSpec.zero(), 0.0, 1.0,
                     SolverConfig(n_modes=K, dt=dt, save_every=10**6)).final.coeffs

    ref = final(256)
    errors = {K: float(np.linalg.norm(_embed(final(K), 256) - ref)) for K in (16, 32, 64)}
    ok_time = 1.8 <= slope <= 2.2
    ok_space = errors[64] < 1e-10 and errors[16] > errors[32] > errors[64]
    measured = {"dt_slope": slope, **{f"L2_err_K{K}": e for K, e in errors.items()}}
    return ok_time and ok_space, measured, "slope in [1.8, 2.2]; L2 error at K=64 < 1e-10"


CRITERIA: tuple[Criterion, ...] = (
    Criterion(1, "discrete dissipativity", "fast", 5, check_dissipativity),
    Criterion(2, "homogeneous linear decay", "fast", 20, check_linear_decay),
    Criterion(3, "energy identity residual", "fast", 20, check_energy_identity),
    Criterion(4, "semigroup law", "fast", 5, check_semigroup_law),
    Criterion(5, "Picard-stepper equivalence", "fast", 60, check_picard),
    Criterion(6, "cubic-term annihilation", "fast", 10, check_cubic),
    Criterion(7, "asymptotic periodicity", "fast", 60, check_periodicity),
    Criterion(8, "periodic orbit existence/uniqueness", "full", 180, check_orbit),
    Criterion(9, "global stability", "full", 300, check_stability),
    Criterion(10, "absorbing property (pseudo-parabolic)", "full", 300, check_absorbing),
    Criterion(11, "reduction identity", "fast", 60, check_reduction),
    Criterion(12, "convergence orders", "full", 180, check_convergence),
)


def criteria_for(level: str) -> list[Criterion]:
    if level not in ("fast", "full"):
        raise ValueError(f"level must be 'fast' or 'full', got {level!r}")
    return [c for c in CRITERIA if level == "full" or c.tier == "fast"]


@contextlib.contextmanager
def derivative_sign_flip() -> Iterator[None]:
    """Inject a bug: negate the strictly lower triangle of ``D`` (it becomes symmetric)."""
    original = linear.derivative_matrix

    def broken(grid: Grid1D) -> linear.OperatorMatrix:
        D = np.array(original(grid).entries)
        low = np.tril_indices_from(D, -1)
        D[low] = -D[low]
        return linear.OperatorMatrix(D, "D (mutated)")

    linear.derivative_matrix = broken
    try:
        yield
    finally:
        linear.derivative_matrix = original


MUTATIONS = {"d-sign-flip": derivative_sign_flip}


def verify_suite(level: str = "fast", mutation: str | None = None, echo: Callable[[str], None] | None = print) -> list[CriterionResult]:
    """Run the checklist; every criterion is reported even when earlier ones fail."""
    ctx = MUTATIONS[mutation]() if mutation else contextlib.nullcontext()
    results = []
    with ctx:
        for crit in criteria_for(level):
            try:
                res = crit.run()
            except Exception as exc:  # a crashing check is a failed criterion, not a crashed suite
                res = CriterionResult(crit.number, crit.title, False, {"error": f"{type(exc).__name__}: {exc}"}, "completes", 0.0, crit.time_limit)
            results.append(res)
            if echo:
                echo(res.line())
    if echo:
        n_pass = sum(r.passed for r in results)
        echo(f"{n_pass}/{len(results)} criteria passed ({level} tier)")
    return results
