"""Exponential-rate estimation by log-linear least squares."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from numpy.typing import ArrayLike

from .errors import DomainError

MIN_FIT_POINTS = 5


@dataclass(frozen=True)
class DecayFit:
    """Model ``value ~ C exp(-rho t)`` fitted over ``window``."""

    rho: float
    C: float
    r_squared: float
    window: tuple[float, float]
    n_points: int = 0

    def __call__(self, t: ArrayLike) -> np.ndarray:
        return self.C * np.exp(-self.rho * np.asarray(t, dtype=float))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["window"] = list(self.window)
        return d


def fit_exponential_decay(
    times: ArrayLike, values: ArrayLike, window: tuple[float, float] | None = None
) -> DecayFit:
    """Least-squares line through ``(t, log value)`` restricted to ``window``.

    Raises:
        DomainError: If a value in the window is not positive or fewer than five
            points fall inside it.
    """
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    if t.shape != v.shape:
        raise DomainError("times and values must have the same shape")
    lo, hi = (float(t.min()), float(t.max())) if window is None else map(float, window)
    mask = (t >= lo) & (t <= hi)
    if mask.sum() < MIN_FIT_POINTS:
        raise DomainError(f"need at least {MIN_FIT_POINTS} points in window [{lo}, {hi}], got {mask.sum()}")
    tw, vw = t[mask], v[mask]
    if np.any(~(vw > 0)):
        raise DomainError("values in the fit window must be positive")
    y = np.log(vw)
    slope, intercept = np.polyfit(tw, y, 1)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum((y - (slope * tw + intercept)) ** 2))
    if ss_tot <= 1e-28 * max(1.0, float(np.sum(y**2))):
        r2, slope = 0.0, 0.0
    else:
        r2 = min(1.0, max(0.0, 1.0 - ss_res / ss_tot))
    return DecayFit(float(-slope), float(math.exp(intercept)), r2, (lo, hi), int(mask.sum()))
