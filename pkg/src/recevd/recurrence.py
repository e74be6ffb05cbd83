"""Recurrence sets, Birkhoff measure estimation and derived diagnostics.

The recurrence set at scale n collects points that come back within
``n**(-radius_exponent)`` of themselves at some lag ``j`` in the horizon
``[1, g(n)]`` (maps) or ``[delta0/tau, h(T)/tau]`` (sampled flows, with n read
as the time scale T).

Measures are estimated by the double-sampling procedure: M Birkhoff averages
over N consecutive iterates each, taken along one long orbit where sample m
starts at ``f**(N+1)`` of the start of sample m-1.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import _kernels as K
from . import rng as rngmod
from .errors import ConfigError, EmptyBall
from .fitting import Z95, confidence_interval, linear_fit
from .systems import (
    SystemSpec,
    distances,
    orbit,
    sample_orbit,
    steps_per_sample,
)

CONTINUOUS_TIME_KINDS = ("lorenz_flow", "lorenz_strobo")


@dataclass(frozen=True)
class RecurrenceConfig:
    horizon_form: str = "power"
    gamma: float = 0.5
    radius_exponent: float | None = None  # None: 1/d of the system
    delta0: float = 0.0
    tau_sample: float | None = None

    def __post_init__(self) -> None:
        if self.horizon_form not in ("power", "log_power"):
            raise ConfigError("horizon_form must be 'power' or 'log_power'")
        if not (self.gamma > 0 and math.isfinite(self.gamma)):
            raise ConfigError("gamma must be a positive real")
        if self.radius_exponent is not None and not self.radius_exponent > 0:
            raise ConfigError("radius_exponent must be positive")
        if not self.delta0 >= 0:
            raise ConfigError("delta0 must be >= 0")
        if self.tau_sample is not None and not self.tau_sample > 0:
            raise ConfigError("tau_sample must be > 0")


@dataclass(frozen=True)
class MeasureEstimate:
    samples: tuple[float, ...]
    mean: float
    stddev: float
    ci_halfwidth: float
    n_points: int
    n_samples: int
    seed: int | None

    @classmethod
    def from_samples(cls, samples, n_points: int, seed: int | None) -> "MeasureEstimate":
        s = tuple(float(v) for v in samples)
        mean, hw = confidence_interval(s)
        return cls(s, mean, hw / Z95, hw, int(n_points), len(s), seed)

    @property
    def stderr(self) -> float:
        """Standard error of the mean (the CI above is per-sample spread)."""
        return self.stddev / math.sqrt(self.n_samples)


@dataclass(frozen=True)
class RatioEstimate:
    """Quotient of two Birkhoff estimates on shared orbits (delta-method spread)."""

    ratio: float
    stddev: float
    ci_halfwidth: float
    numerator: MeasureEstimate
    denominator: MeasureEstimate

    @property
    def stderr(self) -> float:
        return self.stddev / math.sqrt(self.numerator.n_samples)


@dataclass(frozen=True)
class LocalDimEstimate:
    radii: tuple[float, ...]
    log_measures: tuple[float, ...]
    slope: float
    r_squared: float


class OrbitIndicator:
    """Indicator of a set, evaluated on orbit rows with ``lookahead`` future iterates.

    ``func(orbit, base)`` returns a boolean array with one entry per base index.
    """

    def __init__(self, func: Callable[[np.ndarray, np.ndarray], np.ndarray], lookahead: int = 0):
        self.func = func
        self.lookahead = int(lookahead)

    def __call__(self, orbit_rows: np.ndarray, base: np.ndarray) -> np.ndarray:
        return np.asarray(self.func(orbit_rows, base), dtype=bool)


def _as_indicator(indicator) -> OrbitIndicator:
    if isinstance(indicator, OrbitIndicator):
        return indicator
    return OrbitIndicator(lambda rows, base: indicator(rows[base]), 0)


# --- horizons -----------------------------------------------------------------

def g_tilde(n: float, config: RecurrenceConfig) -> int:
    """Horizon floor(n**gamma) or floor((ln n)**gamma), never below 1."""
    if n < 2:
        raise ConfigError("the horizon is defined for n >= 2")
    if config.horizon_form == "power":
        h = n ** config.gamma
    else:
        h = math.log(n) ** config.gamma
    # guard exact powers such as 10000**0.5 evaluating to 99.99999999999999
    return max(1, math.floor(h + 1e-9))


def sampling_time(spec: SystemSpec, config: RecurrenceConfig) -> float:
    if spec.kind == "lorenz_strobo":
        return float(config.tau_sample or spec.params["tau_sample"])
    if spec.kind == "lorenz_flow":
        return float(config.tau_sample or spec.params["dt"])
    raise ConfigError(f"{spec.kind} is a discrete-time system")


def horizon_range(spec: SystemSpec, n: float, config: RecurrenceConfig) -> tuple[int, int]:
    """Inclusive lag range scanned for recurrence at scale n."""
    if spec.kind not in CONTINUOUS_TIME_KINDS:
        return 1, g_tilde(n, config)
    if n <= 1:
        raise ConfigError("flow time scale T must exceed 1")
    tau = sampling_time(spec, config)
    h = n ** config.gamma if config.horizon_form == "power" else math.log(n) ** config.gamma
    j_lo = max(1, math.ceil(config.delta0 / tau - 1e-9))
    return j_lo, math.floor(h / tau + 1e-9)


def radius(spec: SystemSpec, n: float, config: RecurrenceConfig) -> float:
    exponent = config.radius_exponent or 1.0 / spec.dimension
    return float(n) ** (-exponent)


def _sampled_spec(spec: SystemSpec, config: RecurrenceConfig) -> SystemSpec:
    """Stroboscopic spec realizing the sampling time for continuous-time kinds."""
    if spec.kind not in CONTINUOUS_TIME_KINDS:
        return spec
    tau = sampling_time(spec, config)
    p = spec.params
    steps_per_sample(tau, p["dt"])
    return SystemSpec.create(
        "lorenz_strobo", escape_bound=spec.escape_bound, tau_sample=tau, dt=p["dt"],
        sigma=p["sigma"], rho=p["rho"], beta=p["beta"],
    )


# --- single-point indicators ------------------------------------------------

def in_recurrence_set(
    spec: SystemSpec,
    x,
    n: int,
    config: RecurrenceConfig,
    orbit_window: np.ndarray | None = None,
) -> bool:
    """Whether dist(x, f^j x) <= n**(-radius_exponent) for some j in [1, g(n)]."""
    lo, hi = 1, g_tilde(n, config)
    x = np.asarray(x, dtype=float).reshape(-1)
    if orbit_window is None:
        orbit_window = orbit(spec, x, hi + 1, 0)[1:]
    window = np.asarray(orbit_window, dtype=float).reshape(-1, spec.dimension)
    if window.shape[0] < hi:
        raise ConfigError(f"orbit_window holds {window.shape[0]} iterates, need {hi}")
    d = distances(spec.metric, window[lo - 1:hi], x)
    return bool(np.min(d) <= radius(spec, n, config))


def in_flow_recurrence_set(spec: SystemSpec, x, T: float, config: RecurrenceConfig) -> bool:
    """Whether dist(x, flow_t x) <= T**(-1/d) at some sampled t = j*tau in [delta0, h(T)]."""
    if spec.kind not in CONTINUOUS_TIME_KINDS:
        raise ConfigError("in_flow_recurrence_set needs lorenz_flow or lorenz_strobo")
    if not T > 1:
        raise ConfigError("T must exceed 1")
    lo, hi = horizon_range(spec, T, config)
    if hi < lo:
        return False
    rows = orbit(_sampled_spec(spec, config), x, hi + 1, 0)
    d = distances(spec.metric, rows[lo:hi + 1], rows[0])
    return bool(np.min(d) <= radius(spec, T, config))


# --- double sampling ---------------------------------------------------------

def chained_orbit(
    spec: SystemSpec,
    N: int,
    M: int,
    lookahead: int,
    seed: int,
    transient: int | None = None,
    x0=None,
) -> tuple[np.ndarray, np.ndarray]:
    """One orbit serving M chained samples of N points, plus the base indices.

    Sample m covers rows m*(N+1) ... m*(N+1)+N-1; ``lookahead`` extra rows
    follow the last sample.
    """
    if N < 1 or M < 2:
        raise ConfigError("need N >= 1 and M >= 2")
    length = M * (N + 1) + int(lookahead)
    if x0 is not None:
        rows = orbit(spec, x0, length, 0 if transient is None else transient)
    else:
        rows = sample_orbit(spec, rngmod.substream(seed, rngmod.ORBIT), length, transient)
    base = (np.arange(M)[:, None] * (N + 1) + np.arange(N)[None, :]).reshape(-1)
    return rows, base


def _per_sample(hits: np.ndarray, M: int, N: int) -> np.ndarray:
    return hits.reshape(M, N).mean(axis=1)


def estimate_measure(
    spec: SystemSpec,
    indicator,
    N: int,
    M: int,
    seed: int,
    transient: int | None = None,
    x0=None,
) -> MeasureEstimate:
    """Double-sampling Birkhoff estimate of the measure of a set.

    ``indicator`` is either an :class:`OrbitIndicator` or a vectorized
    predicate on an array of states (one state per row).
    """
    ind = _as_indicator(indicator)
    rows, base = chained_orbit(spec, N, M, ind.lookahead, seed, transient, x0)
    hits = ind(rows, base)
    return MeasureEstimate.from_samples(_per_sample(hits, M, N), N, seed)


def recurrence_indicator(spec: SystemSpec, n: float, config: RecurrenceConfig) -> OrbitIndicator:
    """Indicator of the recurrence set at scale n, for use with estimate_measure."""
    lo, hi = horizon_range(spec, n, config)
    r = radius(spec, n, config)

    def func(rows, base):
        return scan(rows, base, spec, lo, np.array([hi]), np.array([r]))[:, 0]

    return OrbitIndicator(func, hi)


def scan(rows, base, spec, j_lo, j_hi, radii, jobs: int = 1) -> np.ndarray:
    """Recurrence hits for several (horizon, radius) pairs; optional thread split."""
    rows = np.ascontiguousarray(rows, dtype=float)
    base = np.ascontiguousarray(base, dtype=np.int64)
    j_hi = np.ascontiguousarray(j_hi, dtype=np.int64)
    radii = np.ascontiguousarray(radii, dtype=float)
    code = spec.metric.code
    if jobs <= 1 or base.size < 2 * jobs:
        return K.scan_recurrence(rows, base, code, int(j_lo), j_hi, radii)
    chunks = np.array_split(base, jobs)
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        parts = list(pool.map(
            lambda b: K.scan_recurrence(rows, b, code, int(j_lo), j_hi, radii), chunks
        ))
    return np.concatenate(parts, axis=0)


def measure_decay_curve(
    spec: SystemSpec,
    config: RecurrenceConfig,
    n_grid: Sequence[float],
    N: int,
    M: int,
    seed: int,
    transient: int | None = None,
    x0=None,
    jobs: int = 1,
) -> list[tuple[float, MeasureEstimate]]:
    """Estimates of the recurrence-set measure for every n in ``n_grid``.

    All scales share one chained orbit of length M(N+1) + g(n_max) and one
    pass over lags; hence estimates at different n are coupled but each is a
    valid double-sampling estimate.
    """
    grid = list(n_grid)
    if not grid:
        raise ConfigError("n_grid is empty")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ConfigError("n_grid must be strictly increasing")
    if grid[0] < 2:
        raise ConfigError("n_grid entries must be >= 2")
    ranges = [horizon_range(spec, n, config) for n in grid]
    j_lo = ranges[0][0]
    j_hi = np.array([hi for _, hi in ranges], dtype=np.int64)
    radii = np.array([radius(spec, n, config) for n in grid])
    sampled = _sampled_spec(spec, config)
    rows, base = chained_orbit(sampled, N, M, int(max(j_hi.max(), 0)), seed, transient, x0)
    hits = scan(rows, base, spec, j_lo, j_hi, radii, jobs=jobs)
    return [
        (n, MeasureEstimate.from_samples(_per_sample(hits[:, k], M, N), N, seed))
        for k, n in enumerate(grid)
    ]


def estimate_srt_ratio(
    spec: SystemSpec,
    center,
    r: float,
    k: int,
    N: int,
    M: int,
    seed: int,
    transient: int | None = None,
    x0=None,
) -> RatioEstimate:
    """Estimate nu(B(c,r) & f^-k B(c,r)) / nu(B(c,r)) on shared orbits.

    The spread is the delta-method linearization of the quotient, computed
    per sample so that ``ci_halfwidth`` is comparable with MeasureEstimate.
    """
    if not r > 0 or k < 1:
        raise ConfigError("need r > 0 and k >= 1")
    rows, base = chained_orbit(spec, N, M, k, seed, transient, x0)
    inside = distances(spec.metric, rows, center) <= r
    a = _per_sample(inside[base] & inside[base + k], M, N)
    b = _per_sample(inside[base], M, N)
    num = MeasureEstimate.from_samples(a, N, seed)
    den = MeasureEstimate.from_samples(b, N, seed)
    if den.mean == 0:
        raise EmptyBall(f"no orbit point within r={r} of the center")
    ratio = num.mean / den.mean
    z = (a - ratio * b) / den.mean
    sd = float(np.std(z, ddof=1))
    return RatioEstimate(ratio, sd, Z95 * sd, num, den)


def estimate_local_dimension(
    spec: SystemSpec,
    center,
    radii: Sequence[float],
    N: int,
    M: int,
    seed: int,
    transient: int | None = None,
    x0=None,
) -> LocalDimEstimate:
    """Least-squares slope of log nu(B(center, r)) against log r."""
    radii = [float(r) for r in radii]
    if len(radii) < 3:
        raise ConfigError("need at least three radii")
    if any(r <= 0 for r in radii) or any(b >= a for a, b in zip(radii, radii[1:])):
        raise ConfigError("radii must be positive and strictly decreasing")
    rows, base = chained_orbit(spec, N, M, 0, seed, transient, x0)
    d = distances(spec.metric, rows[base], center)
    means = []
    for r in radii:
        est = MeasureEstimate.from_samples(_per_sample(d <= r, M, N), N, seed)
        if est.mean == 0:
            raise EmptyBall(f"ball of radius {r} received no visits")
        means.append(est.mean)
    logs = np.log(means)
    slope, _, r2, _ = linear_fit(np.log(radii), logs)
    return LocalDimEstimate(tuple(radii), tuple(float(v) for v in logs), slope, r2)
