"""Catalog of discrete maps and Lorenz-63 reductions, plus their metrics.

A :class:`SystemSpec` names one member of the catalog together with its
parameters. States are 1-D float arrays whose length is the phase-space
dimension ``spec.dimension``.

>>> spec = SystemSpec.create("quadratic", a=3.9)
>>> float(step(spec, np.array([0.5]))[0])
0.975
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Mapping

import numpy as np
from numba.core.registry import CPUDispatcher
from numba import njit

from . import _kernels as K
from .errors import ConfigError, DivergedOrbit, NoReturn

State = np.ndarray


class MetricKind(str, Enum):
    TORUS_1D = "torus_1d"
    TORUS_3D = "torus_3d"
    INTERVAL_EUCLID = "interval_euclid"
    SKEW_PRODUCT = "skew_product"
    EUCLID_2D = "euclid_2d"
    EUCLID_3D = "euclid_3d"

    @property
    def code(self) -> int:
        return _METRIC_CODES[self]

    @property
    def dimension(self) -> int:
        return {"torus_1d": 1, "interval_euclid": 1, "skew_product": 2,
                "euclid_2d": 2, "torus_3d": 3, "euclid_3d": 3}[self.value]


_METRIC_CODES = {
    MetricKind.TORUS_1D: K.TORUS_1D,
    MetricKind.TORUS_3D: K.TORUS_3D,
    MetricKind.INTERVAL_EUCLID: K.INTERVAL_EUCLID,
    MetricKind.SKEW_PRODUCT: K.SKEW_PRODUCT,
    MetricKind.EUCLID_2D: K.EUCLID_2D,
    MetricKind.EUCLID_3D: K.EUCLID_3D,
}

LORENZ_DEFAULTS = {"sigma": 10.0, "rho": 28.0, "beta": 8.0 / 3.0}

# kind -> (default parameters, dimension, metric)
CATALOG: dict[str, tuple[dict[str, Any], int, MetricKind]] = {
    "doubling": ({"eps": 0.0}, 1, MetricKind.TORUS_1D),
    "quadratic": ({"a": 3.9}, 1, MetricKind.INTERVAL_EUCLID),
    "intermittency": ({"b": 0.1}, 1, MetricKind.INTERVAL_EUCLID),
    "alves_viana": ({"a": 1.9, "eps": 0.01, "base_degree": 16}, 2, MetricKind.SKEW_PRODUCT),
    "henon": ({"a": 1.4, "b": 0.3}, 2, MetricKind.EUCLID_2D),
    "anosov": ({"eps": 0.0}, 3, MetricKind.TORUS_3D),
    "arnold": ({"theta": 1.0 / 3.0, "k": 0.1}, 1, MetricKind.TORUS_1D),
    "rotation": ({"theta": (math.sqrt(5.0) - 1.0) / 2.0}, 1, MetricKind.TORUS_1D),
    "lorenz_flow": ({**LORENZ_DEFAULTS, "dt": 1e-3}, 3, MetricKind.EUCLID_3D),
    "lorenz_return": (
        {**LORENZ_DEFAULTS, "section_level": 30.0, "dt": 1e-3, "direction": "downward"},
        2,
        MetricKind.EUCLID_2D,
    ),
    "lorenz_strobo": ({**LORENZ_DEFAULTS, "tau_sample": 0.01, "dt": 1e-3}, 3, MetricKind.EUCLID_3D),
}

_MAP_CODES = {
    "doubling": K.DOUBLING,
    "quadratic": K.QUADRATIC,
    "intermittency": K.INTERMITTENCY,
    "alves_viana": K.ALVES_VIANA,
    "henon": K.HENON,
    "anosov": K.ANOSOV,
    "arnold": K.ARNOLD,
    "rotation": K.ROTATION,
}

# parameter order expected by the map kernels
_MAP_PARAMS = {
    "doubling": ("eps",),
    "quadratic": ("a",),
    "intermittency": ("b",),
    "alves_viana": ("a", "eps", "base_degree"),
    "henon": ("a", "b"),
    "anosov": ("eps",),
    "arnold": ("theta", "k"),
    "rotation": ("theta",),
}

FLOW_KINDS = ("lorenz_flow", "lorenz_return", "lorenz_strobo")
TORUS_KINDS = ("doubling", "anosov", "arnold", "rotation")
DIRECTIONS = {"downward": -1, "upward": 1, "both": 0}


@dataclass(frozen=True)
class SystemSpec:
    """One catalog entry.

    Use :meth:`create` to fill in defaults; the plain constructor expects a
    complete parameter mapping.
    """

    kind: str
    params: Mapping[str, Any]
    escape_bound: float = 1e6

    def __post_init__(self) -> None:
        if self.kind not in CATALOG:
            raise ConfigError(f"unknown system kind {self.kind!r}")
        defaults = CATALOG[self.kind][0]
        unknown = set(self.params) - set(defaults)
        if unknown:
            raise ConfigError(f"{self.kind}: unknown parameters {sorted(unknown)}")
        missing = set(defaults) - set(self.params)
        if missing:
            raise ConfigError(f"{self.kind}: missing parameters {sorted(missing)}")
        for name, value in self.params.items():
            if isinstance(defaults[name], str):
                continue
            if not math.isfinite(float(value)):
                raise ConfigError(f"{self.kind}: parameter {name} must be finite")
        if not self.escape_bound > 0:
            raise ConfigError("escape_bound must be positive")
        p = self.params
        if self.kind == "arnold" and not abs(p["k"]) < 1.0 / (2.0 * math.pi):
            raise ConfigError("arnold map requires |k| < 1/(2 pi) to be invertible")
        if self.kind == "alves_viana":
            deg = p["base_degree"]
            if deg != int(deg) or deg < 2:
                raise ConfigError("alves_viana base_degree must be an integer >= 2")
        if self.kind in FLOW_KINDS:
            dt = float(p["dt"])
            if not 0.0 < dt <= 0.01:
                raise ConfigError("dt must lie in (0, 0.01]")
        if self.kind == "lorenz_return" and p["direction"] not in DIRECTIONS:
            raise ConfigError(f"direction must be one of {sorted(DIRECTIONS)}")
        if self.kind == "lorenz_strobo":
            steps_per_sample(p["tau_sample"], p["dt"])

    @classmethod
    def create(cls, kind: str, escape_bound: float = 1e6, **params: Any) -> "SystemSpec":
        if kind not in CATALOG:
            raise ConfigError(f"unknown system kind {kind!r}")
        merged = dict(CATALOG[kind][0])
        merged.update(params)
        return cls(kind, merged, escape_bound)

    @property
    def dimension(self) -> int:
        return CATALOG[self.kind][1]

    @property
    def metric(self) -> MetricKind:
        return CATALOG[self.kind][2]

    @property
    def is_flow(self) -> bool:
        return self.kind in FLOW_KINDS

    def param_vector(self) -> np.ndarray:
        return np.array([float(self.params[k]) for k in _MAP_PARAMS[self.kind]])

    @property
    def flow(self) -> "FlowSpec":
        if not self.is_flow:
            raise ConfigError(f"{self.kind} is not derived from a flow")
        p = self.params
        return FlowSpec(
            params=(p["sigma"], p["rho"], p["beta"]),
            dt=float(p["dt"]),
            section_level=float(p.get("section_level", 30.0)),
            crossing_direction=p.get("direction", "downward"),
            escape_bound=self.escape_bound,
        )

    def describe(self) -> str:
        inner = ", ".join(f"{k}={v}" for k, v in self.params.items())
        return f"{self.kind}({inner})"


def steps_per_sample(tau: float, dt: float) -> int:
    ratio = tau / dt
    k = round(ratio)
    if k < 1 or abs(ratio - k) > 1e-9 * max(1.0, ratio):
        raise ConfigError(f"tau_sample={tau} is not an integer multiple of dt={dt}")
    return int(k)


@dataclass(frozen=True)
class FlowSpec:
    """A 3-D vector field plus integration and section settings.

    ``vector_field(x1, x2, x3, params)`` must return a 3-tuple. Plain Python
    callables are compiled with numba on construction.
    """

    vector_field: Callable = field(default=K.lorenz_rhs)
    params: tuple = (10.0, 28.0, 8.0 / 3.0)
    dt: float = 1e-3
    section_level: float = 30.0
    crossing_direction: str = "downward"
    escape_bound: float = 1e6
    tol_section: float = 1e-9
    time_budget: float = 1e4

    def __post_init__(self) -> None:
        if not isinstance(self.vector_field, CPUDispatcher):
            object.__setattr__(self, "vector_field", njit(self.vector_field))
        if not 0.0 < self.dt <= 0.01:
            raise ConfigError("dt must lie in (0, 0.01]")
        if self.crossing_direction not in DIRECTIONS:
            raise ConfigError(f"crossing_direction must be one of {sorted(DIRECTIONS)}")

    @property
    def param_array(self) -> np.ndarray:
        return np.asarray(self.params, dtype=float)

    @property
    def max_steps(self) -> int:
        return int(math.ceil(self.time_budget / self.dt))


def _as_state(x, d: int) -> np.ndarray:
    arr = np.array(x, dtype=float).reshape(-1)
    if arr.shape[0] != d:
        raise ConfigError(f"state has dimension {arr.shape[0]}, expected {d}")
    if not np.all(np.isfinite(arr)):
        raise ConfigError("state components must be finite")
    return arr


# --- metrics -----------------------------------------------------------------

def _circle(delta: np.ndarray) -> np.ndarray:
    t = np.abs(delta)
    t = t - np.floor(t)
    return np.minimum(t, 1.0 - t)


def distances(metric: MetricKind, points: np.ndarray, q) -> np.ndarray:
    """Vectorized distance from each row of ``points`` to the state ``q``."""
    metric = MetricKind(metric)
    P = np.asarray(points, dtype=float)
    if P.ndim == 1:
        P = P.reshape(-1, metric.dimension)
    q = np.asarray(q, dtype=float).reshape(-1)
    if P.shape[1] != metric.dimension or q.shape[0] != metric.dimension:
        raise ConfigError(f"dimension mismatch for metric {metric.value}")
    diff = P - q
    if metric in (MetricKind.TORUS_1D, MetricKind.TORUS_3D):
        diff = _circle(diff)
    elif metric is MetricKind.SKEW_PRODUCT:
        diff = np.column_stack([_circle(diff[:, 0]), diff[:, 1]])
    if diff.shape[1] == 1:
        return np.abs(diff[:, 0])
    return np.sqrt(np.sum(diff * diff, axis=1))


def distance(metric: MetricKind, p, q) -> float:
    """Distance between two states under ``metric``.

    Torus coordinates are compared modulo 1; the skew-product metric is the
    root-sum-square of the circle and interval distances.
    """
    return float(distances(metric, np.asarray(p, dtype=float).reshape(1, -1), q)[0])


# --- dynamics ---------------------------------------------------------------

def _raise_status(status: int, what: str) -> None:
    if status == K.DIVERGED:
        raise DivergedOrbit(f"{what}: orbit left the escape bound")
    if status == K.NO_RETURN:
        raise NoReturn(f"{what}: no section crossing within the time budget")


def integrate_flow(flow: FlowSpec, x, t: float) -> State:
    """Fixed-step RK4 solution of the flow after time ``t`` (a multiple of dt)."""
    x = _as_state(x, 3)
    if t < 0:
        raise ConfigError("integration time must be nonnegative")
    nsteps = round(t / flow.dt)
    if abs(nsteps * flow.dt - t) > 1e-9 * max(1.0, t):
        raise ConfigError(f"t={t} is not a multiple of dt={flow.dt}")
    out, status = K.integrate(
        flow.vector_field, flow.param_array, x, int(nsteps), flow.dt, flow.escape_bound
    )
    _raise_status(status, "integrate_flow")
    return out


def poincare_return(flow: FlowSpec, x) -> State:
    """Next crossing of the section {x3 = section_level} in the configured direction.

    For a start on the section this is the first-return map; a start off the
    section is flowed to its first crossing.
    """
    x = _as_state(x, 3)
    y1, y2, y3, status = K.next_crossing(
        flow.vector_field, flow.param_array, x[0], x[1], x[2], flow.dt,
        flow.section_level, DIRECTIONS[flow.crossing_direction], flow.max_steps,
        flow.tol_section, flow.escape_bound,
    )
    _raise_status(status, "poincare_return")
    return np.array([y1, y2, y3])


def orbit(spec: SystemSpec, x0, n_points: int, transient: int = 0) -> np.ndarray:
    """Iterates ``f^transient(x0) ... f^(transient+n_points-1)(x0)`` as rows."""
    if n_points < 1 or transient < 0:
        raise ConfigError("need n_points >= 1 and transient >= 0")
    x0 = _as_state(x0, spec.dimension)
    bound = spec.escape_bound
    if not spec.is_flow:
        out, status = K.iterate_map(
            _MAP_CODES[spec.kind], spec.param_vector(), x0, int(n_points), int(transient), bound
        )
        _raise_status(status, spec.kind)
        return out
    flow = spec.flow
    rhs, p = flow.vector_field, flow.param_array
    if spec.kind == "lorenz_flow":
        out, status = K.strobe_orbit(rhs, p, x0, n_points, transient, 1, flow.dt, bound)
    elif spec.kind == "lorenz_strobo":
        k = steps_per_sample(spec.params["tau_sample"], flow.dt)
        out, status = K.strobe_orbit(rhs, p, x0, n_points, transient, k, flow.dt, bound)
    else:
        start = np.array([x0[0], x0[1], flow.section_level])
        out, status = K.return_orbit(
            rhs, p, start, n_points, transient, flow.dt, flow.section_level,
            DIRECTIONS[flow.crossing_direction], flow.max_steps, flow.tol_section, bound,
        )
        out = np.ascontiguousarray(out[:, :2])
    _raise_status(status, spec.kind)
    return out


def step(spec: SystemSpec, x) -> State:
    """One application of the map (one dt, tau or section return for flows)."""
    return orbit(spec, x, 2, 0)[1]


# --- random starting points ------------------------------------------------

# kind -> (low, high) corners of the box initial conditions are drawn from
INITIAL_BOX: dict[str, tuple[tuple[float, ...], tuple[float, ...]]] = {
    "doubling": ((0.0,), (1.0,)),
    "quadratic": ((0.0,), (1.0,)),
    "intermittency": ((0.0,), (1.0,)),
    "alves_viana": ((0.0, -1.0), (1.0, 1.0)),
    "henon": ((-1.5, -0.4), (1.5, 0.4)),
    "anosov": ((0.0, 0.0, 0.0), (1.0, 1.0, 1.0)),
    "arnold": ((0.0,), (1.0,)),
    "rotation": ((0.0,), (1.0,)),
    "lorenz_flow": ((-20.0, -20.0, 0.0), (20.0, 20.0, 50.0)),
    "lorenz_return": ((-15.0, -15.0), (15.0, 15.0)),
    "lorenz_strobo": ((-20.0, -20.0, 0.0), (20.0, 20.0, 50.0)),
}

DEFAULT_TRANSIENT = {"lorenz_return": 500}


def default_transient(spec: SystemSpec) -> int:
    return DEFAULT_TRANSIENT.get(spec.kind, 2000)


def _random_words(rng: np.random.Generator, n_bits: int) -> np.ndarray:
    n_words = n_bits // 64 + 2
    return rng.integers(0, np.iinfo(np.uint64).max, size=n_words, dtype=np.uint64, endpoint=True)


def uses_exact_generator(spec: SystemSpec) -> bool:
    """Whether random-start orbits are produced in exact arithmetic.

    Maps that multiply the circle coordinate by a power of two lose one bit
    per doubling in floating point and collapse onto 0 within ~53 steps; the
    unperturbed cat-like torus map is integral. These are generated from
    random bit strings / integer lattices instead.
    """
    if spec.kind == "doubling":
        return spec.params["eps"] == 0
    if spec.kind == "anosov":
        return spec.params["eps"] == 0
    if spec.kind == "alves_viana":
        deg = int(spec.params["base_degree"])
        return deg & (deg - 1) == 0
    return False


def sample_orbit(
    spec: SystemSpec,
    rng: np.random.Generator,
    n_points: int,
    transient: int | None = None,
    max_retries: int = 100,
) -> np.ndarray:
    """Orbit of ``n_points`` iterates from a random start after burn-in.

    Divergent starts are redrawn up to ``max_retries`` times.
    """
    if transient is None:
        transient = default_transient(spec)
    if spec.kind == "doubling" and uses_exact_generator(spec):
        words = _random_words(rng, n_points + 64)
        return K.shift_orbit(words, 1, n_points).reshape(-1, 1)
    if spec.kind == "anosov" and uses_exact_generator(spec):
        w = _random_words(rng, 3 * 64)
        return K.lattice_cat_orbit(w[0], w[1], w[2], n_points, transient)
    lo, hi = (np.asarray(c) for c in INITIAL_BOX[spec.kind])
    last_error: Exception | None = None
    for _ in range(max_retries + 1):
        try:
            if spec.kind == "alves_viana" and uses_exact_generator(spec):
                return _alves_viana_exact(spec, rng, n_points, transient, lo, hi)
            x0 = lo + (hi - lo) * rng.random(lo.shape[0])
            return orbit(spec, x0, n_points, transient)
        except (DivergedOrbit, NoReturn) as exc:
            last_error = exc
    raise type(last_error)(f"{spec.kind}: no convergent start after {max_retries} retries")


def _alves_viana_exact(spec, rng, n_points, transient, lo, hi):
    p = spec.params
    shift = int(p["base_degree"]).bit_length() - 1
    total = transient + n_points
    words = _random_words(rng, shift * total + 64)
    xs = K.shift_orbit(words, shift, total)
    y0 = lo[1] + (hi[1] - lo[1]) * rng.random()
    ys, status = K.skew_fiber_orbit(xs, float(p["a"]), float(p["eps"]), y0, spec.escape_bound)
    _raise_status(status, "alves_viana")
    return np.column_stack([xs[transient:], ys[transient:]])
