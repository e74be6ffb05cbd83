"""Command-line entry point: ``recevd <subcommand> [options]``.

Exit codes: 0 success, 2 configuration error, 3 dynamics failure (diverged
orbit or missing section return), 4 insufficient data.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import __version__
from . import experiment as ex
from . import output as out
from .errors import ConfigError, RecevdError


def _jobs_default() -> int:
    env = os.environ.get("RECEVD_JOBS")
    if env is None:
        return 1
    try:
        jobs = int(env)
    except ValueError as exc:
        raise ConfigError(f"RECEVD_JOBS must be a positive integer, got {env!r}") from exc
    if jobs < 1:
        raise ConfigError("RECEVD_JOBS must be >= 1")
    return jobs


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, help="unsigned 64-bit seed (overrides the config)")
    p.add_argument("--out", type=Path, help="output directory")
    p.add_argument("--jobs", type=int, help="worker threads (default: $RECEVD_JOBS or 1)")
    p.add_argument("--no-svg", action="store_true", help="skip SVG output")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override one config key; repeatable")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="recevd", description="Recurrence-set and extreme-value experiments.")
    parser.add_argument("--version", action="version", version=f"recevd {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for mode in ("recurrence", "evd", "srt", "localdim"):
        p = sub.add_parser(mode, help=f"run a {mode} experiment from a config file")
        p.add_argument("--config", type=Path, required=True, help="key = value config file")
        _common(p)
    p = sub.add_parser("preset", help="run a named preset")
    p.add_argument("name", nargs="?", help="preset name (omit with --list)")
    p.add_argument("--list", action="store_true", help="list presets and exit")
    p.add_argument("--show", action="store_true", help="print the preset config and exit")
    p.add_argument("--config", type=Path, help="extra config file layered over the preset")
    _common(p)
    p = sub.add_parser("plot", help="render an SVG from an emitted CSV")
    p.add_argument("csv", type=Path)
    p.add_argument("--out", type=Path, help="SVG path (default: next to the CSV)")
    return parser


def _overrides(pairs: list[str]) -> dict[str, str]:
    result = {}
    for item in pairs:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        result[key.strip()] = value.strip()
    return result


_EXCLUSIVE = {"n_grid": "n_grid_log10", "n_grid_log10": "n_grid"}


def _layer(raw: dict[str, str], extra: dict[str, str]) -> None:
    """Update ``raw`` in place; a grid given one way replaces a grid given the other way."""
    for key, value in extra.items():
        if key in _EXCLUSIVE:
            raw.pop(_EXCLUSIVE[key], None)
        raw[key] = value


def _run(args: argparse.Namespace) -> int:
    if args.command == "plot":
        return _plot(args)
    if args.command == "preset":
        if args.list:
            for name in sorted(ex.PRESETS):
                print(f"{name:32s} {ex.PRESETS[name].get('label', '')}")
            return 0
        if not args.name:
            raise ConfigError("preset needs a name (see --list)")
        raw = ex.preset(args.name)
        if args.show:
            sys.stdout.write(ex.preset_text(args.name))
            return 0
        raw["preset"] = args.name
        default_out = Path("recevd-out") / args.name
    else:
        raw = {"mode": args.command}
        default_out = Path("recevd-out") / args.command
    if args.config:
        _layer(raw, ex.load_config(args.config))
        if args.command != "preset":
            raw["mode"] = args.command
    _layer(raw, _overrides(args.set))
    if args.seed is not None:
        raw["seed"] = str(args.seed)
    if args.no_svg:
        raw["emit_svg"] = "false"
    name = raw.pop("preset", None)
    cfg = ex.ExperimentConfig.from_mapping(raw)
    if name:
        cfg.raw["preset"] = name
    jobs = args.jobs if args.jobs is not None else _jobs_default()
    if jobs < 1:
        raise ConfigError("--jobs must be >= 1")
    out_dir = args.out or default_out
    result = ex.run(cfg, out_dir, jobs)
    _summarize(cfg, result, out_dir)
    return 0


def _summarize(cfg, result, out_dir: Path) -> None:
    if cfg.mode in ("recurrence", "synthetic"):
        fit = result.fit
        alpha = f"alpha = {fit.alpha:.4f} (r^2 = {fit.r_squared:.3f})" if fit else "no fit"
        print(f"{alpha}; verdict {result.classification.verdict}; wrote {out_dir}")
    elif cfg.mode == "evd":
        print(f"c_hat = {result.c_hat:.4f}; wrote {out_dir}")
    elif cfg.mode == "localdim":
        print(f"local dimension = {result.slope:.4f}; wrote {out_dir}")
    else:
        print(f"wrote {out_dir}")


def _plot(args: argparse.Namespace) -> int:
    if not args.csv.exists():
        raise ConfigError(f"no such file: {args.csv}")
    meta, rows = out.read_csv(args.csv)
    target = args.out or args.csv.with_suffix(".svg")
    title = meta.get("label", args.csv.stem)
    if rows and "empirical_cdf" in rows[0]:
        svg = out.svg_evd_cdf(rows, float(meta["c_hat"]), title=title)
    else:
        fit = None
        fit_path = args.csv.parent / "fit.json"
        if fit_path.exists():
            fit = json.loads(fit_path.read_text(encoding="utf-8")).get("fit")
        pts = [(float(r["n"]), float(r["mean"]), float(r["ci_halfwidth"])) for r in rows]
        svg = out.svg_loglog_decay(pts, fit, title=title)
    Path(target).write_text(svg, encoding="utf-8")
    print(f"wrote {target}")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _run(args)
    except RecevdError as exc:
        print(f"recevd: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:
        print(f"recevd: error: {exc}", file=sys.stderr)
        return ConfigError.exit_code


if __name__ == "__main__":
    raise SystemExit(main())
