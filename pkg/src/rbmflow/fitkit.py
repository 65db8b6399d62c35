"""Fit of the fixed-point minimum energy ``E_min = -2 exp(-a N_temp^b)``.

With ``y = ln(-ln(-E_min / 2))`` the law is linear, ``y = ln a + b ln N_temp``,
and is fitted by ordinary least squares.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

DEFAULT_CUTOFF = 100


@dataclass(frozen=True)
class FitResult:
    a: float
    b: float
    rss: float          # residual sum of squares in E space
    n_points: int
    cutoff: float
    clamped: bool = False

    def predict(self, n_temp):
        return extrapolate(self, n_temp)


def emin_law(n_temp, a: float, b: float):
    return -2.0 * np.exp(-a * np.power(np.asarray(n_temp, dtype=float), b))


def fit_emin_law(points, min_ntemp_cutoff: float = DEFAULT_CUTOFF) -> FitResult:
    """Least-squares fit of ``(N_temp, E_min)`` pairs with ``N_temp >= cutoff``.

    Raises:
        ValueError: fewer than three usable points, or an energy outside
            the open interval (-2, 0) where the transform is undefined.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    pts = pts[pts[:, 0] >= min_ntemp_cutoff]
    if len(pts) < 3:
        raise ValueError(f"need at least 3 points with N_temp >= {min_ntemp_cutoff}, got {len(pts)}")
    n_temp, e_min = pts[:, 0], pts[:, 1]
    if np.any(e_min <= -2) or np.any(e_min >= 0):
        raise ValueError("every E_min must lie strictly between -2 and 0")
    x = np.log(n_temp)
    y = np.log(-np.log(-e_min / 2.0))
    slope, intercept = np.polyfit(x, y, 1)
    a, b = float(np.exp(intercept)), float(slope)
    clamped = b < 0
    if clamped:
        warnings.warn(f"fitted b = {b:.3g} < 0 clamped to 0", RuntimeWarning, stacklevel=2)
        b = 0.0
    rss = float(np.sum((emin_law(n_temp, a, b) - e_min) ** 2))
    return FitResult(a, b, rss, len(pts), float(min_ntemp_cutoff), clamped)


def extrapolate(result: FitResult, n_temp):
    """Evaluate the fitted law at ``n_temp`` (scalar or array)."""
    out = emin_law(n_temp, result.a, result.b)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class TrendSummary:
    n_visible: tuple[int, ...]
    a: tuple[float, ...]
    b: tuple[float, ...]
    a_trend: str
    b_trend: str


def _verdict(values) -> str:
    d = np.diff(values)
    if np.all(d > 0):
        return "increasing"
    if np.all(d < 0):
        return "decreasing"
    if np.all(d == 0):
        return "constant"
    return "non-monotone"


def parameter_trend(results) -> TrendSummary:
    """Monotonicity of the fitted (a, b) across lattice sizes.

    Args:
        results: iterable of ``(N_v, FitResult)``; at least two sizes.
    """
    rows = sorted(results, key=lambda r: r[0])
    if len({n for n, _ in rows}) < 2:
        raise ValueError("need fits for at least two lattice sizes")
    nv = tuple(int(n) for n, _ in rows)
    a = tuple(r.a for _, r in rows)
    b = tuple(r.b for _, r in rows)
    return TrendSummary(nv, a, b, _verdict(a), _verdict(b))
