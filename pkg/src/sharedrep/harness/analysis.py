"""Rate-law fitting and scaling-regime classification."""

from __future__ import annotations

import math
import warnings
from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError

__all__ = ["RateFit", "row_value", "group_by", "fit_rate_exponent", "classify_phase", "PHASE_REGIONS"]

PHASE_REGIONS = ("I", "II", "III", "IV")


def row_value(row, name: str):
    """Field lookup that works for result rows, dicts and plain objects."""
    if isinstance(row, dict):
        return row[name]
    if hasattr(row, "get") and callable(row.get):
        return row.get(name)
    return getattr(row, name)


def group_by(rows, x_field: str, y_field: str) -> dict:
    """Map each x value to the list of finite y values observed there."""
    out = defaultdict(list)
    for r in rows:
        y = float(row_value(r, y_field))
        if math.isnan(y):
            continue
        out[float(row_value(r, x_field))].append(y)
    return dict(sorted(out.items()))


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    r2: float
    x: np.ndarray
    y: np.ndarray


def fit_rate_exponent(rows, x_field: str, y_field: str) -> RateFit:
    """Least-squares line through ``(log x, log median y)``.

    Points with non-positive x or median y are dropped with a warning. At
    least three distinct x values must remain.
    """
    groups = group_by(rows, x_field, y_field)
    x = np.array(list(groups), dtype=float)
    y = np.array([np.median(v) for v in groups.values()], dtype=float)
    keep = (x > 0) & (y > 0)
    if not keep.all():
        warnings.warn(f"dropping {int((~keep).sum())} non-positive points from the rate fit", RuntimeWarning, stacklevel=2)
    x, y = x[keep], y[keep]
    if x.size < 3:
        raise ConfigurationError(f"rate fit needs >= 3 distinct positive x values, got {x.size}")
    lx, ly = np.log(x), np.log(y)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - float(np.sum(resid**2)) / ss_tot
    return RateFit(float(slope), float(intercept), r2, x, y)


def classify_phase(beta: float, gamma: float, delta: float) -> str:
    """Region of the scaling ``n = k^beta, M = k^(gamma+1), d = k^(delta+1)``.

    ``I``: ``beta + gamma < delta + 1``, consistent estimation impossible.
    ``II``: ``beta + gamma >= delta + 2``, the part of the possible region
    already covered by earlier methods. ``IV``: otherwise with
    ``2 beta + gamma >= delta + 2``. ``III``: the remainder, impossible.
    Points on a boundary line go to the possible side.
    """
    for name, v in (("beta", beta), ("gamma", gamma), ("delta", delta)):
        if not (isinstance(v, (int, float, np.floating, np.integer)) and v > 0 and math.isfinite(v)):
            raise ConfigurationError(f"{name} must be a positive finite number, got {v!r}")
    s = beta + gamma
    if s < delta + 1:
        return "I"
    if s >= delta + 2:
        return "II"
    if 2 * beta + gamma >= delta + 2:
        return "IV"
    return "III"
