"""Euclidean projections onto the feasible sets of the weight problem.

Both projections use the sorted soft-threshold construction: sort the
magnitudes, find the largest support size whose threshold keeps every
retained entry positive, shift by that threshold.
"""

from __future__ import annotations

import numpy as np

# Relative slack for the "already feasible" short-circuit. Keeps
# project(project(v)) == project(v) bit for bit despite rounding in the sum.
_FEASIBLE_RTOL = 1e-12


def _threshold(sorted_desc: np.ndarray, total: float) -> float:
    """Soft threshold theta with sum(max(u - theta, 0)) == total for sorted u >= 0."""
    cssv = np.cumsum(sorted_desc) - total
    ind = np.arange(1, sorted_desc.size + 1)
    cond = sorted_desc - cssv / ind > 0
    rho = int(np.count_nonzero(cond))
    return float(cssv[rho - 1] / rho)


def project_simplex(v: np.ndarray, total: float = 1.0) -> np.ndarray:
    """Project ``v`` onto {w >= 0, sum(w) = total}."""
    v = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(v)):
        raise ValueError("project_simplex: input contains non-finite values")
    if total <= 0:
        raise ValueError(f"project_simplex: total must be positive, got {total}")
    if np.all(v >= 0) and abs(v.sum() - total) <= _FEASIBLE_RTOL * total:
        return v.copy()
    u = np.sort(v)[::-1]
    theta = _threshold(u, total)
    return np.maximum(v - theta, 0.0)


def project_l1_ball(v: np.ndarray, radius: float = 1.0) -> np.ndarray:
    """Project ``v`` onto {w : ||w||_1 <= radius}.

    Vectors already inside the ball come back unchanged.
    """
    v = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(v)):
        raise ValueError("project_l1_ball: input contains non-finite values")
    if not np.isfinite(radius) or radius <= 0:
        raise ValueError(f"project_l1_ball: radius must be finite and positive, got {radius}")
    magnitude = np.abs(v)
    if magnitude.sum() <= radius * (1.0 + _FEASIBLE_RTOL):
        return v.copy()
    u = np.sort(magnitude)[::-1]
    theta = _threshold(u, radius)
    return np.sign(v) * np.maximum(magnitude - theta, 0.0)
