"""Power-law fits on log-log axes, zero-one classification and sample CIs."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

import numpy as np

from .errors import InsufficientData

Z95 = 1.96

POWER_LAW = "power_law"
ZERO_ONE = "zero_one"
INDETERMINATE = "indeterminate"


def confidence_interval(samples: Sequence[float]) -> tuple[float, float]:
    """Sample mean and 1.96 times the sample standard deviation (divisor M-1)."""
    arr = np.asarray(samples, dtype=float)
    if arr.size < 2:
        raise InsufficientData("a confidence interval needs at least two samples")
    mean = float(np.mean(arr))
    return mean, Z95 * float(np.std(arr, ddof=1))


def linear_fit(x, y, w=None) -> tuple[float, float, float, bool]:
    """(Weighted) least squares line; returns slope, intercept, r^2, zero_variance.

    A response with zero variance has r^2 reported as 1 and the flag set.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.ones_like(x) if w is None else np.asarray(w, dtype=float)
    sw = w.sum()
    xm = np.dot(w, x) / sw
    ym = np.dot(w, y) / sw
    dx = x - xm
    dy = y - ym
    sxx = np.dot(w, dx * dx)
    if sxx == 0:
        raise InsufficientData("regressor has zero variance")
    slope = float(np.dot(w, dx * dy) / sxx)
    intercept = float(ym - slope * xm)
    ss_tot = float(np.dot(w, dy * dy))
    if ss_tot == 0:
        return slope, intercept, 1.0, True
    resid = y - (intercept + slope * x)
    r2 = 1.0 - float(np.dot(w, resid * resid)) / ss_tot
    return slope, intercept, min(1.0, max(0.0, r2)), False


def _exp(v: float) -> float:
    return math.exp(v) if v < 709.0 else math.inf


@dataclass(frozen=True)
class PowerLawFit:
    """nu(n) ~ c * n**(-alpha) fitted on natural-log axes."""

    c: float
    alpha: float
    r_squared: float
    n_min_used: float
    n_max_used: float
    n_points_used: int
    n_excluded_zero: int = 0
    zero_variance: bool = False
    weighted: bool = False

    def predict(self, n) -> np.ndarray:
        return self.c * np.asarray(n, dtype=float) ** (-self.alpha)

    def to_dict(self) -> dict[str, Any]:
        return dict(self.__dict__)


def _value(v) -> float:
    if isinstance(v, (int, float, np.floating, np.integer)):
        return float(v)
    return float(v.mean)


def fit_power_law(
    points: Iterable[tuple[float, Any]],
    window: tuple[float | None, float | None] | None = None,
    weighted: bool = False,
) -> PowerLawFit:
    """Ordinary least squares of ln(nu) on ln(n).

    ``points`` holds (n, value) pairs where value is a float or anything with
    a ``mean`` attribute. Zero values are dropped and counted. With
    ``weighted=True`` each point is weighted by (mean / ci_halfwidth)**2, the
    inverse delta-method variance of ln(mean); points must then carry a
    ``ci_halfwidth`` attribute.
    """
    lo, hi = window if window is not None else (None, None)
    pts = [(float(n), v) for n, v in points
           if (lo is None or n >= lo) and (hi is None or n <= hi)]
    usable = [(n, v) for n, v in pts if _value(v) > 0]
    excluded = len(pts) - len(usable)
    if len(usable) < 3:
        raise InsufficientData(f"need >= 3 positive estimates in the fit window, got {len(usable)}")
    ns = np.array([n for n, _ in usable])
    vals = np.array([_value(v) for _, v in usable])
    w = None
    if weighted:
        hw = np.array([float(v.ci_halfwidth) for _, v in usable])
        if np.all(hw > 0):
            w = (vals / hw) ** 2
        else:
            weighted = False
    slope, intercept, r2, flat = linear_fit(np.log(ns), np.log(vals), w)
    return PowerLawFit(
        c=_exp(intercept),
        alpha=-slope,
        r_squared=r2,
        n_min_used=float(ns.min()),
        n_max_used=float(ns.max()),
        n_points_used=len(usable),
        n_excluded_zero=excluded,
        zero_variance=flat,
        weighted=weighted,
    )


@dataclass(frozen=True)
class DecayClassification:
    verdict: str
    evidence: dict[str, Any] = field(default_factory=dict)


def classify_decay(
    points: Sequence[tuple[float, Any]],
    tol_01: float = 0.02,
    r2_min: float = 0.9,
) -> DecayClassification:
    """Zero-one, power-law or indeterminate.

    zero_one: every mean lies within ``tol_01`` of 0 or 1.
    power_law: otherwise, a fit over the strictly interior means (those in
    the open interval (0, 1)) with at least three points has r^2 >= ``r2_min``
    and a positive decay exponent.
    """
    if len(points) < 3:
        raise InsufficientData("classification needs at least three points")
    ns = [float(n) for n, _ in points]
    means = [_value(v) for _, v in points]
    near = [min(abs(m), abs(1.0 - m)) <= tol_01 for m in means]
    evidence: dict[str, Any] = {
        "n": ns, "means": means, "near_zero_or_one": near,
        "tol_01": tol_01, "r2_min": r2_min,
    }
    if all(near):
        return DecayClassification(ZERO_ONE, evidence)
    interior = [(n, m) for n, m in zip(ns, means) if 0.0 < m < 1.0]
    if len(interior) >= 3:
        fit = fit_power_law(interior)
        evidence["fit"] = fit.to_dict()
        if fit.r_squared >= r2_min and fit.alpha > 0:
            return DecayClassification(POWER_LAW, evidence)
    return DecayClassification(INDETERMINATE, evidence)
