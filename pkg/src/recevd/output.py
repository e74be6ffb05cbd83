"""CSV tables with ``#`` metadata headers and hand-written deterministic SVG."""
from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Any, Iterable, Sequence

from .errors import InsufficientData

RECURRENCE_COLUMNS = ("n", "mean", "stddev", "ci_halfwidth", "samples_json")
EVD_COLUMNS = ("n", "u", "u_n", "tau_n", "tau_ci", "g_na", "empirical_cdf", "cdf_ci",
               "b1", "b2", "gumbel_ref", "empty", "invalid")
SRT_COLUMNS = ("k", "ratio", "stddev", "ci_halfwidth", "numerator", "denominator")
LOCALDIM_COLUMNS = ("r", "log_measure")


def _cell(v: Any) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def format_csv(columns: Sequence[str], rows: Iterable[Sequence[Any]],
               meta: dict[str, Any] | None = None) -> str:
    buf = io.StringIO()
    for key, value in (meta or {}).items():
        buf.write(f"# {key} = {value}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def write_csv(path: Path, columns, rows, meta=None) -> Path:
    path = Path(path)
    path.write_text(format_csv(columns, rows, meta), encoding="utf-8")
    return path


def read_csv(path: Path) -> tuple[dict[str, str], list[dict[str, str]]]:
    """Return (metadata, rows) with every cell left as text."""
    meta: dict[str, str] = {}
    body = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.startswith("#"):
            key, _, value = line[1:].partition("=")
            meta[key.strip()] = value.strip()
        elif line:
            body.append(line)
    return meta, list(csv.DictReader(body))


def write_json(path: Path, obj: Any) -> Path:
    path = Path(path)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


# --- SVG ------------------------------------------------------------------------

W, H = 640, 440
LEFT, RIGHT, TOP, BOTTOM = 70, 20, 30, 50


def _f(v: float) -> str:
    return f"{v:.3f}"


class _Axes:
    def __init__(self, xlo, xhi, ylo, yhi):
        if xhi == xlo:
            xlo, xhi = xlo - 0.5, xhi + 0.5
        if yhi == ylo:
            ylo, yhi = ylo - 0.5, yhi + 0.5
        self.xlo, self.xhi, self.ylo, self.yhi = xlo, xhi, ylo, yhi

    def x(self, v: float) -> float:
        return LEFT + (v - self.xlo) / (self.xhi - self.xlo) * (W - LEFT - RIGHT)

    def y(self, v: float) -> float:
        return H - BOTTOM - (v - self.ylo) / (self.yhi - self.ylo) * (H - TOP - BOTTOM)


def _frame(ax: _Axes, xlabel: str, ylabel: str, title: str, xticks, yticks) -> list[str]:
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
        f'<text x="{W // 2}" y="18" text-anchor="middle" font-size="13">{_esc(title)}</text>',
        f'<rect x="{LEFT}" y="{TOP}" width="{W - LEFT - RIGHT}" height="{H - TOP - BOTTOM}" '
        'fill="none" stroke="black"/>',
    ]
    for v, label in xticks:
        px = _f(ax.x(v))
        out.append(f'<line class="tick" x1="{px}" y1="{H - BOTTOM}" x2="{px}" y2="{H - BOTTOM + 5}" stroke="black"/>')
        out.append(f'<text x="{px}" y="{H - BOTTOM + 18}" text-anchor="middle" font-size="11">{label}</text>')
    for v, label in yticks:
        py = _f(ax.y(v))
        out.append(f'<line class="tick" x1="{LEFT - 5}" y1="{py}" x2="{LEFT}" y2="{py}" stroke="black"/>')
        out.append(f'<text x="{LEFT - 8}" y="{py}" text-anchor="end" dominant-baseline="middle" font-size="11">{label}</text>')
    out.append(f'<text x="{W // 2}" y="{H - 12}" text-anchor="middle" font-size="12">{_esc(xlabel)}</text>')
    out.append(f'<text x="16" y="{H // 2}" text-anchor="middle" font-size="12" '
               f'transform="rotate(-90 16 {H // 2})">{_esc(ylabel)}</text>')
    return out


def _esc(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def _decade_ticks(lo: float, hi: float) -> list[tuple[float, str]]:
    return [(float(k), f"1e{k}") for k in range(math.ceil(lo), math.floor(hi) + 1)]


def svg_loglog_decay(points: Sequence[tuple[float, float, float]], fit: dict | None = None,
                     title: str = "", xlabel: str = "n", ylabel: str = "measure") -> str:
    """Log-log plot of (n, mean, ci_halfwidth) with error bars and an optional fit line.

    Non-positive means cannot sit on a log axis; they are drawn as hollow
    markers on the lower edge.
    """
    if not points:
        raise InsufficientData("cannot plot an empty table")
    xs = [math.log10(n) for n, _, _ in points]
    pos = [m for _, m, _ in points if m > 0] + [m + c for _, m, c in points if m + c > 0]
    lows = [m - c for _, m, c in points if m - c > 0]
    ylo = math.floor(math.log10(min(pos + lows))) if pos else -1.0
    yhi = math.ceil(math.log10(max(pos))) if pos else 0.0
    if yhi <= ylo:
        yhi = ylo + 1
    xlo, xhi = math.floor(min(xs) * 2) / 2, math.ceil(max(xs) * 2) / 2
    ax = _Axes(xlo, xhi, ylo, yhi)
    out = _frame(ax, xlabel, ylabel, title, _decade_ticks(ax.xlo, ax.xhi), _decade_ticks(ax.ylo, ax.yhi))

    def ly(v: float) -> float:
        return ax.y(math.log10(v)) if v > 0 else float(H - BOTTOM)

    for x, (n, m, c) in zip(xs, points):
        px = _f(ax.x(x))
        out.append(f'<line class="errorbar" x1="{px}" y1="{_f(ly(m - c))}" x2="{px}" '
                   f'y2="{_f(ly(m + c))}" stroke="#555"/>')
        fill = "black" if m > 0 else "white"
        out.append(f'<circle class="marker" cx="{px}" cy="{_f(ly(m))}" r="3.5" fill="{fill}" stroke="black"/>')
    if fit is not None:
        a, c0 = float(fit["alpha"]), float(fit["c"])
        lo = math.log10(fit.get("n_min_used") or min(n for n, _, _ in points))
        hi = math.log10(fit.get("n_max_used") or max(n for n, _, _ in points))
        y0, y1 = math.log10(c0) - a * lo, math.log10(c0) - a * hi
        out.append(f'<path class="fit" d="M {_f(ax.x(lo))} {_f(ax.y(y0))} L {_f(ax.x(hi))} {_f(ax.y(y1))}" '
                   f'stroke="red" fill="none"/>')
        out.append(f'<text x="{W - RIGHT - 8}" y="{TOP + 16}" text-anchor="end" font-size="12">'
                   f'alpha = {a:.3f}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def svg_evd_cdf(rows: Sequence[dict], c_hat: float, title: str = "") -> str:
    """Empirical maxima CDF per n against u, with G_{n^a} and the Gumbel reference."""
    if not rows:
        raise InsufficientData("cannot plot an empty table")
    us = sorted({float(r["u"]) for r in rows})
    ns = sorted({int(float(r["n"])) for r in rows})
    ax = _Axes(us[0], us[-1], 0.0, 1.0)
    xticks = [(u, f"{u:g}") for u in us]
    yticks = [(v / 4, f"{v / 4:g}") for v in range(5)]
    out = _frame(ax, xlabel="u", ylabel="P(M_n <= u_n)", title=title, xticks=xticks, yticks=yticks)
    palette = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"]
    for i, n in enumerate(ns):
        color = palette[i % len(palette)]
        sub = sorted((r for r in rows if int(float(r["n"])) == n), key=lambda r: float(r["u"]))
        pts = " ".join(f"{_f(ax.x(float(r['u'])))},{_f(ax.y(float(r['g_na'])))}" for r in sub)
        out.append(f'<polyline class="g_na" points="{pts}" stroke="{color}" fill="none" stroke-dasharray="4 3"/>')
        for r in sub:
            px = _f(ax.x(float(r["u"])))
            p, c = float(r["empirical_cdf"]), float(r["cdf_ci"])
            out.append(f'<line class="errorbar" x1="{px}" y1="{_f(ax.y(max(0.0, p - c)))}" x2="{px}" '
                       f'y2="{_f(ax.y(min(1.0, p + c)))}" stroke="{color}"/>')
            out.append(f'<circle class="marker" cx="{px}" cy="{_f(ax.y(p))}" r="3" fill="{color}"/>')
        out.append(f'<text x="{LEFT + 10}" y="{TOP + 16 + 14 * i}" font-size="11" fill="{color}">n = {n}</text>')
    grid = [us[0] + (us[-1] - us[0]) * k / 100 for k in range(101)]
    d = " L ".join(f"{_f(ax.x(u))} {_f(ax.y(math.exp(-c_hat * math.exp(-u))))}" for u in grid)
    out.append(f'<path class="gumbel" d="M {d}" stroke="black" fill="none"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
