"""Plot-ready summaries: one CSV per series plus an optional SVG line chart."""

from __future__ import annotations

import math
import re
from pathlib import Path

import numpy as np

from ..errors import ConfigurationError
from .analysis import group_by, row_value

__all__ = ["RECIPES", "summarize", "emit_plot_data"]

# recipe -> (x field, y field, axis label for y)
RECIPES = {
    "fig2_style": ("k", "sin_theta_error", "subspace error"),
    "fig3_style": ("k", "sin_theta_error", "subspace error"),
    "fig4_style": ("M", "sin_theta_error", "subspace error"),
    "fig5_style": ("M", "transfer_error", "new-client parameter error"),
}
SERIES_COLUMNS = ("x", "median", "q25", "q75", "mean", "count")
_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf")


def summarize(rows, x_field: str, y_field: str) -> list:
    """Per-x median, quartiles, mean and count of the finite y values."""
    out = []
    for x, ys in group_by(rows, x_field, y_field).items():
        ys = np.asarray(ys)
        q25, med, q75 = np.percentile(ys, [25, 50, 75])
        out.append((x, float(med), float(q25), float(q75), float(ys.mean()), int(ys.size)))
    return out


def _num(v) -> str:
    if isinstance(v, float):
        if math.isnan(v):
            return "NA"
        return repr(int(v)) if v.is_integer() and abs(v) < 2**53 else repr(v)
    return str(v)


def _slug(name: str) -> str:
    return re.sub(r"[^a-z0-9]+", "_", name.lower()).strip("_")


def _write_series(path: Path, stats) -> None:
    lines = [",".join(SERIES_COLUMNS)] + [",".join(_num(v) for v in row) for row in stats]
    path.write_text("\n".join(lines) + "\n")


def _svg(series: dict, x_label: str, y_label: str, title: str) -> str:
    W, H, L, R, T, B = 640, 420, 70, 160, 40, 50
    pts = [(x, m) for stats in series.values() for x, m, *_ in stats]
    xs = [p[0] for p in pts] or [0.0, 1.0]
    ys = [p[1] for p in pts] or [0.0, 1.0]
    x0, x1 = min(xs), max(xs)
    y0, y1 = 0.0, max(ys) * 1.05 or 1.0
    if x1 == x0:
        x0, x1 = x0 - 1, x1 + 1

    def px(x):
        return L + (x - x0) / (x1 - x0) * (W - L - R)

    def py(y):
        return H - B - (y - y0) / (y1 - y0) * (H - T - B)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">',
        f'<rect width="{W}" height="{H}" fill="white"/>',
        f'<text x="{W / 2:.1f}" y="20" text-anchor="middle" font-size="14">{title}</text>',
        f'<line x1="{L}" y1="{H - B}" x2="{W - R}" y2="{H - B}" stroke="black"/>',
        f'<line x1="{L}" y1="{T}" x2="{L}" y2="{H - B}" stroke="black"/>',
        f'<text x="{(L + W - R) / 2:.1f}" y="{H - 12}" text-anchor="middle">{x_label}</text>',
        f'<text x="16" y="{(T + H - B) / 2:.1f}" text-anchor="middle" transform="rotate(-90 16 {(T + H - B) / 2:.1f})">{y_label}</text>',
    ]
    for t in np.linspace(y0, y1, 5):
        out.append(f'<text x="{L - 6}" y="{py(t) + 4:.1f}" text-anchor="end">{t:.3g}</text>')
    for x in sorted(set(xs)):
        out.append(f'<text x="{px(x):.1f}" y="{H - B + 16}" text-anchor="middle">{x:g}</text>')
    for idx, (name, stats) in enumerate(series.items()):
        color = _PALETTE[idx % len(_PALETTE)]
        coords = " ".join(f"{px(x):.2f},{py(m):.2f}" for x, m, *_ in stats)
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{coords}"/>')
        for x, m, *_ in stats:
            out.append(f'<circle cx="{px(x):.2f}" cy="{py(m):.2f}" r="3" fill="{color}"/>')
        ly = T + 10 + 18 * idx
        out.append(f'<line x1="{W - R + 10}" y1="{ly}" x2="{W - R + 30}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{W - R + 36}" y="{ly + 4}">{name}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_plot_data(rows, recipe: str, out_dir, *, svg: bool = False) -> list:
    """Write per-estimator summary CSVs for ``recipe`` and return their paths.

    Empty ``rows`` produce a single header-only ``<recipe>.csv``. The
    ``fig5_style`` recipe requires rows from the ``independent`` baseline.
    """
    if recipe not in RECIPES:
        raise ConfigurationError(f"unknown plot recipe {recipe!r}; expected one of {tuple(RECIPES)}")
    x_field, y_field, y_label = RECIPES[recipe]
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = list(rows)
    if not rows:
        path = out / f"{recipe}.csv"
        _write_series(path, [])
        return [path]
    names = list(dict.fromkeys(str(row_value(r, "estimator")) for r in rows))
    if recipe == "fig5_style" and "independent" not in names:
        raise ConfigurationError("fig5_style needs rows from the independent baseline")
    series = {}
    for name in names:
        stats = summarize([r for r in rows if row_value(r, "estimator") == name], x_field, y_field)
        if stats:
            series[name] = stats
    paths = []
    for name, stats in series.items():
        path = out / f"{recipe}_{_slug(name)}.csv"
        _write_series(path, stats)
        paths.append(path)
    if svg:
        path = out / f"{recipe}.svg"
        path.write_text(_svg(series, x_field, y_label, recipe.replace("_", " ")))
        paths.append(path)
    return paths
