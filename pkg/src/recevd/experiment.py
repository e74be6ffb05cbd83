"""Experiment configs, named presets and the runners behind the command line.

A config is a flat ``key = value`` text file (``#`` starts a comment). Lists
are comma separated; ``n_grid_log10 = start:stop:step`` expands to
``round(10**e)``. System parameters use the ``system.`` prefix, EVD settings
``evd.``, SRT settings ``srt.``, local-dimension settings ``localdim.`` and
synthetic self-test settings ``synthetic.``. Keys ``figure`` and ``label``
are echoed verbatim into output headers.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from . import __version__
from . import extremes as X
from . import output as out
from . import rng as rngmod
from .errors import ConfigError, InsufficientData
from .fitting import POWER_LAW, ZERO_ONE, classify_decay, fit_power_law
from .recurrence import (
    MeasureEstimate,
    RecurrenceConfig,
    estimate_local_dimension,
    estimate_srt_ratio,
    measure_decay_curve,
)
from .systems import CATALOG, SystemSpec

MODES = ("recurrence", "evd", "srt", "localdim", "synthetic")

_KNOWN = {
    "mode", "system", "escape_bound", "horizon_form", "gamma", "radius_exponent", "delta0",
    "tau_sample", "n_grid", "n_grid_log10", "N", "M", "M_rep", "seed", "transient",
    "fit_window", "emit_svg", "figure", "label",
    "evd.source", "evd.target", "evd.a_exponent", "evd.u_grid", "evd.n_grid", "evd.cap",
    "evd.mode", "srt.center", "srt.r", "srt.k", "localdim.center", "localdim.radii",
    "synthetic.alpha", "synthetic.c", "synthetic.noise",
}


# --- parsing ----------------------------------------------------------------------

def parse_config_text(text: str) -> dict[str, str]:
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        raw[key.strip()] = value.strip()
    return raw


def load_config(path: str | Path) -> dict[str, str]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config_text(text)


def _num(key: str, s: str) -> float:
    try:
        return float(Fraction(s)) if "/" in s else float(s)
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"{key}: not a number: {s!r}") from exc


def _int(key: str, s: str) -> int:
    v = _num(key, s)
    if v != int(v):
        raise ConfigError(f"{key}: expected an integer, got {s!r}")
    return int(v)


def _list(key: str, s: str) -> list[float]:
    if not s.strip():
        return []
    return [_num(key, part.strip()) for part in s.split(",")]


def _bool(key: str, s: str) -> bool:
    low = s.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {s!r}")


def log10_grid(spec: str) -> list[int]:
    try:
        a, b, step = (float(v) for v in spec.split(":"))
    except ValueError as exc:
        raise ConfigError("n_grid_log10 must be start:stop:step") from exc
    if step <= 0 or b < a:
        raise ConfigError("n_grid_log10 needs step > 0 and stop >= start")
    k = int(math.floor((b - a) / step + 1e-9))
    return [int(round(10 ** (a + i * step))) for i in range(k + 1)]


@dataclass
class ExperimentConfig:
    raw: dict[str, str]
    mode: str
    system: SystemSpec | None
    recurrence: RecurrenceConfig
    evd: X.EvdConfig | None
    n_grid: list[float]
    N: int
    M: int
    M_rep: int
    seed: int
    transient: int | None
    fit_window: tuple[float | None, float | None] | None
    emit_svg: bool
    extra: dict[str, Any] = field(default_factory=dict)

    @classmethod
    def from_mapping(cls, raw: Mapping[str, str]) -> "ExperimentConfig":
        raw = {k: str(v) for k, v in raw.items()}
        for key in raw:
            if key not in _KNOWN and not key.startswith("system."):
                raise ConfigError(f"unknown config key {key!r}")
        g = raw.get
        mode = g("mode", "recurrence")
        if mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}")

        system = None
        if mode != "synthetic" and not (mode == "evd" and g("evd.source", "orbit") == "iid"):
            kind = g("system")
            if kind is None:
                raise ConfigError("missing key 'system'")
            if kind not in CATALOG:
                raise ConfigError(f"unknown system kind {kind!r}")
            params: dict[str, Any] = {}
            for key, value in raw.items():
                if key.startswith("system."):
                    name = key[len("system."):]
                    default = CATALOG[kind][0].get(name)
                    params[name] = value if isinstance(default, str) else _num(key, value)
            system = SystemSpec.create(kind, escape_bound=_num("escape_bound", g("escape_bound", "1e6")),
                                       **params)

        rec = RecurrenceConfig(
            horizon_form=g("horizon_form", "power"),
            gamma=_num("gamma", g("gamma", "0.5")),
            radius_exponent=_num("radius_exponent", g("radius_exponent")) if g("radius_exponent") else None,
            delta0=_num("delta0", g("delta0", "0")),
            tau_sample=_num("tau_sample", g("tau_sample")) if g("tau_sample") else None,
        )
        if "n_grid" in raw and "n_grid_log10" in raw:
            raise ConfigError("give either n_grid or n_grid_log10, not both")
        if "n_grid_log10" in raw:
            n_grid: list[float] = log10_grid(raw["n_grid_log10"])
        else:
            n_grid = _list("n_grid", g("n_grid", ""))
        n_grid = [int(v) if float(v).is_integer() else v for v in n_grid]

        N = _int("N", g("N", "10000"))
        M = _int("M", g("M", "20"))
        M_rep = _int("M_rep", g("M_rep", "2000"))
        if N < 1 or M < 2:
            raise ConfigError("need N >= 1 and M >= 2")
        seed = _int("seed", g("seed", "2026"))
        if not 0 <= seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        transient = _int("transient", g("transient")) if g("transient") else None
        if transient is not None and transient < 0:
            raise ConfigError("transient must be >= 0")
        fit_window = None
        if g("fit_window"):
            parts = [p.strip() for p in raw["fit_window"].split(",")]
            if len(parts) != 2:
                raise ConfigError("fit_window must be 'lo, hi' (either may be empty)")
            fit_window = tuple(_num("fit_window", p) if p else None for p in parts)

        evd = None
        extra: dict[str, Any] = {}
        if mode == "evd":
            source = g("evd.source", "orbit")
            if source not in ("orbit", "iid"):
                raise ConfigError("evd.source must be 'orbit' or 'iid'")
            d = system.dimension if system else 1
            target = tuple(_list("evd.target", g("evd.target", ",".join(["0"] * d))))
            if system is not None and len(target) != d:
                raise ConfigError(f"evd.target needs {d} coordinates")
            evd = X.EvdConfig(
                target=target,
                a_exponent=_num("evd.a_exponent", g("evd.a_exponent", "0.5")),
                u_grid=tuple(_list("evd.u_grid", g("evd.u_grid", "-2,-1,0,1,2,3,4"))),
                n_grid=tuple(int(v) for v in _list("evd.n_grid", g("evd.n_grid", "100,1000,10000"))),
                d=d,
                observable_cap=_num("evd.cap", g("evd.cap", "50")),
            )
            extra["source"] = source
            extra["evd_mode"] = g("evd.mode", "independent")
            if extra["evd_mode"] not in ("independent", "chopped"):
                raise ConfigError("evd.mode must be 'independent' or 'chopped'")
            if M_rep < 20:
                raise ConfigError("M_rep must be >= 20")
        elif mode in ("srt", "localdim"):
            center = _list(f"{mode}.center", g(f"{mode}.center", ""))
            if len(center) != system.dimension:
                raise ConfigError(f"{mode}.center needs {system.dimension} coordinates")
            extra["center"] = tuple(center)
            if mode == "srt":
                extra["r"] = _num("srt.r", g("srt.r", "0.01"))
                extra["k"] = [int(v) for v in _list("srt.k", g("srt.k", "1,2,3,4,5"))]
                if not extra["k"] or min(extra["k"]) < 1 or not extra["r"] > 0:
                    raise ConfigError("srt needs r > 0 and lags k >= 1")
            else:
                extra["radii"] = _list("localdim.radii", g("localdim.radii", "0.1,0.05,0.02,0.01"))
        elif mode == "synthetic":
            extra["alpha"] = _num("synthetic.alpha", g("synthetic.alpha", "0.5"))
            extra["c"] = _num("synthetic.c", g("synthetic.c", "2"))
            extra["noise"] = _num("synthetic.noise", g("synthetic.noise", "0.05"))

        if mode in ("recurrence", "synthetic"):
            if any(b <= a for a, b in zip(n_grid, n_grid[1:])):
                raise ConfigError("n_grid must be strictly increasing")
            if n_grid and n_grid[0] < 2:
                raise ConfigError("n_grid entries must be >= 2")
        return cls(
            raw=dict(raw), mode=mode, system=system, recurrence=rec, evd=evd, n_grid=n_grid,
            N=N, M=M, M_rep=M_rep, seed=seed, transient=transient, fit_window=fit_window,
            emit_svg=_bool("emit_svg", g("emit_svg", "true")), extra=extra,
        )

    def header(self) -> dict[str, str]:
        meta = {"recevd_version": __version__, "mode": self.mode, "seed": str(self.seed)}
        for key in sorted(self.raw):
            if key not in ("mode", "seed"):
                meta[key] = self.raw[key]
        return meta


# --- presets ----------------------------------------------------------------------

_MAP_GRID = {"n_grid_log10": "2:6:0.5", "N": "10000", "M": "20", "gamma": "0.5"}


def _rec(figure: str, label: str, system: str, **kw: str) -> dict[str, str]:
    cfg = {"mode": "recurrence", "figure": figure, "label": label, "system": system}
    cfg.update(_MAP_GRID)
    cfg.update(kw)
    return cfg


PRESETS: dict[str, dict[str, str]] = {
    "doubling-eps0": _rec("none", "doubling map without noise; analytic anchor", "doubling",
                          **{"system.eps": "0"}),
    "fig1-doubling-eps0.01": _rec("1", "doubling map, noise 0.01", "doubling", **{"system.eps": "0.01"}),
    "fig1-doubling-eps0.1": _rec("1", "doubling map, noise 0.1", "doubling", **{"system.eps": "0.1"}),
    "fig2-quadratic": _rec("2", "quadratic family a=3.9", "quadratic", **{"system.a": "3.9"}),
    "fig3-intermittency-b0.1": _rec("3", "intermittency map b=0.1", "intermittency", **{"system.b": "0.1"}),
    "fig3-intermittency-b0.7": _rec("3", "intermittency map b=0.7", "intermittency", **{"system.b": "0.7"}),
    "fig4-alves-viana": _rec("4", "skew product a=1.9 eps=0.01", "alves_viana",
                             **{"system.a": "1.9", "system.eps": "0.01", "system.base_degree": "16"}),
    "fig5-henon": _rec("5", "Henon map (1.4, 0.3)", "henon", **{"system.a": "1.4", "system.b": "0.3"}),
    "fig6-lorenz-return": _rec(
        "6", "Lorenz return map on x3=30", "lorenz_return",
        **{"gamma": "0.3", "n_grid_log10": "2:7:0.5", "fit_window": "10000,", "transient": "500",
           "system.section_level": "30", "system.direction": "downward"}),
    "fig7-anosov-eps0": _rec("7", "torus Anosov map, eps=0", "anosov", **{"system.eps": "0"}),
    "fig7-anosov-eps0.15": _rec("7", "torus Anosov map, eps=0.15", "anosov", **{"system.eps": "0.15"}),
    "fig8-arnold-half": _rec("8", "Arnold family theta=1/2 k=0.1", "arnold",
                             **{"system.theta": "1/2", "system.k": "0.1"}),
    "fig8-arnold-third": _rec("8", "Arnold family theta=1/3 k=0.1", "arnold",
                              **{"system.theta": "1/3", "system.k": "0.1"}),
    "fig9-lorenz-strobo-tau0.01": _rec(
        "9", "Lorenz stroboscopic map tau=0.01", "lorenz_strobo",
        **{"system.tau_sample": "0.01", "gamma": "0.4", "delta0": "0.01",
           "n_grid_log10": "2:5:0.5", "transient": "2000"}),
    "fig10-lorenz-strobo-tau0.001": _rec(
        "10", "Lorenz stroboscopic map tau=0.001", "lorenz_strobo",
        **{"system.tau_sample": "0.001", "gamma": "0.4", "delta0": "0.01",
           "n_grid_log10": "2:4:0.5", "N": "10000", "transient": "20000"}),
    "evd-doubling": {
        "mode": "evd", "figure": "none", "label": "Gumbel law for the doubling map",
        "system": "doubling", "system.eps": "0", "evd.target": "0.3183098861837907",
        "evd.u_grid": "-2,-1,0,1,2,3,4", "evd.n_grid": "100,1000,10000", "N": "100000",
        "M": "20", "M_rep": "2000",
    },
    "iid-gumbel": {
        "mode": "evd", "figure": "none", "label": "i.i.d. unit exponentials",
        "evd.source": "iid", "evd.u_grid": "-2,-1,0,1,2,3,4", "evd.n_grid": "100,1000,10000",
        "N": "100000", "M": "20", "M_rep": "2000",
    },
    "synthetic-powerlaw": {
        "mode": "synthetic", "figure": "none", "label": "lognormal noise around 2 n^-0.5",
        "n_grid_log10": "2:6:0.5", "M": "20", "synthetic.alpha": "0.5", "synthetic.c": "2",
        "synthetic.noise": "0.05",
    },
}


def preset(name: str) -> dict[str, str]:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; known: {', '.join(sorted(PRESETS))}")
    return dict(PRESETS[name])


def preset_text(name: str) -> str:
    return "".join(f"{k} = {v}\n" for k, v in preset(name).items())


# --- runners ----------------------------------------------------------------------

@dataclass
class RecurrenceResult:
    curve: list[tuple[float, MeasureEstimate]]
    fit: Any
    classification: Any


def _record_run(out_dir: Path, cfg: ExperimentConfig, started: float, **extra: Any) -> None:
    info = {"recevd_version": __version__, "mode": cfg.mode, "seed": cfg.seed,
            "wall_time_s": round(time.perf_counter() - started, 3)}
    info.update(extra)
    out.write_json(out_dir / "run.json", info)


def _curve_rows(curve):
    for n, est in curve:
        yield (n, est.mean, est.stddev, est.ci_halfwidth,
               "[" + ",".join(repr(float(v)) for v in est.samples) + "]")


def _fit_and_classify(curve, window):
    cls = classify_decay(curve)
    try:
        fit = fit_power_law(curve, window=window)
    except InsufficientData:
        if cls.verdict != ZERO_ONE:
            raise
        fit = None
    return fit, cls


def _synthetic_curve(cfg: ExperimentConfig):
    gen = rngmod.substream(cfg.seed, rngmod.SYNTHETIC)
    a, c, s = cfg.extra["alpha"], cfg.extra["c"], cfg.extra["noise"]
    return [(n, MeasureEstimate.from_samples(c * float(n) ** (-a) * np.exp(s * gen.standard_normal(cfg.M)),
                                             cfg.N, cfg.seed))
            for n in cfg.n_grid]


def run_recurrence_experiment(cfg: ExperimentConfig, out_dir: Path, jobs: int = 1) -> RecurrenceResult:
    """Estimate the decay curve, write recurrence.csv / fit.json / recurrence.svg."""
    started = time.perf_counter()
    out_dir = Path(out_dir)
    if len(cfg.n_grid) < 3:
        raise InsufficientData(f"a decay fit needs at least three grid points, got {len(cfg.n_grid)}")
    if cfg.mode == "synthetic":
        curve = _synthetic_curve(cfg)
    else:
        curve = measure_decay_curve(cfg.system, cfg.recurrence, cfg.n_grid, cfg.N, cfg.M, cfg.seed,
                                    transient=cfg.transient, jobs=jobs)
    out_dir.mkdir(parents=True, exist_ok=True)
    out.write_csv(out_dir / "recurrence.csv", out.RECURRENCE_COLUMNS, _curve_rows(curve), cfg.header())
    fit, cls = _fit_and_classify(curve, cfg.fit_window)
    out.write_json(out_dir / "fit.json", {
        "fit": fit.to_dict() if fit else None,
        "fit_window": list(cfg.fit_window) if cfg.fit_window else None,
        "verdict": cls.verdict,
        "evidence": cls.evidence,
    })
    if cfg.emit_svg:
        title = cfg.raw.get("label", cfg.mode)
        svg = out.svg_loglog_decay([(float(n), e.mean, e.ci_halfwidth) for n, e in curve],
                                   fit.to_dict() if fit else None, title=title)
        (out_dir / "recurrence.svg").write_text(svg, encoding="utf-8")
    _record_run(out_dir, cfg, started)
    return RecurrenceResult(curve, fit, cls)


def _evd_source(cfg: ExperimentConfig):
    if cfg.extra["source"] == "iid":
        return X.IIDExponential()
    return X.OrbitObservable(cfg.system, cfg.evd.target, cfg.evd.observable_cap, cfg.transient)


def run_evd_experiment(cfg: ExperimentConfig, out_dir: Path, jobs: int = 1) -> X.EvdReport:
    started = time.perf_counter()
    out_dir = Path(out_dir)
    report = X.evd_report(_evd_source(cfg), cfg.evd, cfg.N, cfg.M, cfg.M_rep, cfg.seed,
                          mode=cfg.extra["evd_mode"], jobs=jobs)
    out_dir.mkdir(parents=True, exist_ok=True)
    meta = cfg.header()
    meta["c_hat"] = repr(report.c_hat)
    meta["a_exponent"] = repr(report.a_exponent)
    meta["gumbel_reference"] = "exp(-c_hat exp(-u)), c_hat estimated"
    rows = [(r.n, r.u, r.u_n, r.tau_n, r.tau_ci, r.g_na, r.empirical_cdf, r.cdf_ci,
             r.b1, r.b2, r.gumbel_ref, r.empty, r.invalid) for r in report.rows]
    out.write_csv(out_dir / "evd.csv", out.EVD_COLUMNS, rows, meta)
    if cfg.emit_svg:
        _, parsed = out.read_csv(out_dir / "evd.csv")
        svg = out.svg_evd_cdf(parsed, report.c_hat, title=cfg.raw.get("label", "evd"))
        (out_dir / "evd.svg").write_text(svg, encoding="utf-8")
    _record_run(out_dir, cfg, started, c_hat=report.c_hat)
    return report


def run_srt_experiment(cfg: ExperimentConfig, out_dir: Path, jobs: int = 1):
    started = time.perf_counter()
    out_dir = Path(out_dir)
    rows = []
    for k in cfg.extra["k"]:
        est = estimate_srt_ratio(cfg.system, cfg.extra["center"], cfg.extra["r"], k, cfg.N, cfg.M,
                                 cfg.seed, transient=cfg.transient)
        rows.append((k, est.ratio, est.stddev, est.ci_halfwidth, est.numerator.mean, est.denominator.mean))
    out_dir.mkdir(parents=True, exist_ok=True)
    meta = cfg.header()
    out.write_csv(out_dir / "srt.csv", out.SRT_COLUMNS, rows, meta)
    _record_run(out_dir, cfg, started)
    return rows


def run_localdim_experiment(cfg: ExperimentConfig, out_dir: Path, jobs: int = 1):
    started = time.perf_counter()
    out_dir = Path(out_dir)
    est = estimate_local_dimension(cfg.system, cfg.extra["center"], cfg.extra["radii"], cfg.N, cfg.M,
                                   cfg.seed, transient=cfg.transient)
    out_dir.mkdir(parents=True, exist_ok=True)
    out.write_csv(out_dir / "localdim.csv", out.LOCALDIM_COLUMNS,
                  list(zip(est.radii, est.log_measures)), cfg.header())
    out.write_json(out_dir / "fit.json", {"slope": est.slope, "r_squared": est.r_squared})
    _record_run(out_dir, cfg, started)
    return est


def run(cfg: ExperimentConfig, out_dir: Path, jobs: int = 1):
    if cfg.mode in ("recurrence", "synthetic"):
        return run_recurrence_experiment(cfg, out_dir, jobs)
    if cfg.mode == "evd":
        return run_evd_experiment(cfg, out_dir, jobs)
    if cfg.mode == "srt":
        return run_srt_experiment(cfg, out_dir, jobs)
    return run_localdim_experiment(cfg, out_dir, jobs)


__all__ = [
    "ExperimentConfig", "PRESETS", "POWER_LAW", "ZERO_ONE", "load_config", "parse_config_text",
    "preset", "preset_text", "run", "run_recurrence_experiment", "run_evd_experiment",
    "run_srt_experiment", "run_localdim_experiment",
]
