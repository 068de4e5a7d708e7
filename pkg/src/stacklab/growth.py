"""Log-log growth fits shared by the divergence and convergence diagnostics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DIVERGENT_SLOPE = 0.9
BOUNDED_SLOPE = 0.05


def _grid(ns, values):
    ns = np.asarray(ns, dtype=float)
    values = np.asarray(values, dtype=float)
    if ns.ndim != 1 or ns.shape != values.shape:
        raise ValueError("grid and values must be 1-d and of equal length")
    if len(ns) < 3:
        raise ValueError(f"need at least 3 grid points, got {len(ns)}")
    if np.any(np.diff(ns) <= 0) or ns[0] < 1:
        raise ValueError("grid must be strictly increasing positive integers")
    if np.any(values == 0) or not np.all(np.isfinite(values)):
        raise ValueError("values must be finite and nonzero for a log-log fit")
    return ns, np.abs(values)


@dataclass(frozen=True)
class GrowthFit:
    """``|value| ~ constant * n ** slope`` fitted by least squares in log-log space."""

    slope: float
    constant: float
    verdict: str

    def to_dict(self) -> dict:
        return {"slope": self.slope, "constant": self.constant, "verdict": self.verdict}


def classify_slope(slope: float) -> str:
    if slope >= DIVERGENT_SLOPE:
        return "divergent"
    if slope <= BOUNDED_SLOPE:
        return "bounded"
    return "inconclusive"


def fit_growth(ns, values) -> GrowthFit:
    ns, values = _grid(ns, values)
    slope, intercept = np.polyfit(np.log(ns), np.log(values), 1)
    return GrowthFit(float(slope), float(np.exp(intercept)), classify_slope(float(slope)))


@dataclass(frozen=True)
class RateFit:
    """``|x_n - x_inf| <= c / n`` with ``c`` the smallest constant covering the grid."""

    c: float
    slope: float

    def bound(self, n) -> float:
        return self.c / n


def fit_inverse_rate(ns, errors) -> RateFit:
    ns, errors = _grid(ns, errors)
    slope, _ = np.polyfit(np.log(ns), np.log(errors), 1)
    return RateFit(float(np.max(errors * ns)), float(slope))
