"""Finite-difference stencils on uniform grids.

Interior points use 4th-order central differences; the rows nearest each
boundary fall back to 2nd-order (one-sided at the very edge).  The third
derivative keeps 4th order in the interior because the cubic quantum
streaming term would otherwise be contaminated by 2nd-order truncation
error.
"""

from __future__ import annotations

import numpy as np

__all__ = ["diff1", "diff2", "diff3"]


def _moved(f: np.ndarray, axis: int):
    g = np.moveaxis(np.asarray(f, dtype=float), axis, -1)
    if g.shape[-1] < 8:
        raise ValueError(f"stencils need at least 8 points along the axis, got {g.shape[-1]}")
    return g


def diff1(f: np.ndarray, h: float, axis: int = -1) -> np.ndarray:
    """First derivative: 5-point 4th-order central, 2nd-order near edges."""
    g = _moved(f, axis)
    out = np.empty_like(g)
    out[..., 2:-2] = (g[..., :-4] - 8.0 * g[..., 1:-3] + 8.0 * g[..., 3:-1] - g[..., 4:]) / (12.0 * h)
    out[..., 1] = (g[..., 2] - g[..., 0]) / (2.0 * h)
    out[..., -2] = (g[..., -1] - g[..., -3]) / (2.0 * h)
    out[..., 0] = (-3.0 * g[..., 0] + 4.0 * g[..., 1] - g[..., 2]) / (2.0 * h)
    out[..., -1] = (3.0 * g[..., -1] - 4.0 * g[..., -2] + g[..., -3]) / (2.0 * h)
    return np.moveaxis(out, -1, axis)


def diff2(f: np.ndarray, h: float, axis: int = -1) -> np.ndarray:
    """Second derivative: 5-point 4th-order central, 2nd-order near edges."""
    g = _moved(f, axis)
    h2 = h * h
    out = np.empty_like(g)
    out[..., 2:-2] = (
        -g[..., :-4] + 16.0 * g[..., 1:-3] - 30.0 * g[..., 2:-2] + 16.0 * g[..., 3:-1] - g[..., 4:]
    ) / (12.0 * h2)
    out[..., 1] = (g[..., 0] - 2.0 * g[..., 1] + g[..., 2]) / h2
    out[..., -2] = (g[..., -1] - 2.0 * g[..., -2] + g[..., -3]) / h2
    out[..., 0] = (2.0 * g[..., 0] - 5.0 * g[..., 1] + 4.0 * g[..., 2] - g[..., 3]) / h2
    out[..., -1] = (2.0 * g[..., -1] - 5.0 * g[..., -2] + 4.0 * g[..., -3] - g[..., -4]) / h2
    return np.moveaxis(out, -1, axis)


def diff3(f: np.ndarray, h: float, axis: int = -1) -> np.ndarray:
    """Third derivative: 7-point 4th-order central, 2nd-order near edges."""
    g = _moved(f, axis)
    h3 = h**3
    out = np.empty_like(g)
    out[..., 3:-3] = (
        0.125 * g[..., :-6]
        - g[..., 1:-5]
        + 1.625 * g[..., 2:-4]
        - 1.625 * g[..., 4:-2]
        + g[..., 5:-1]
        - 0.125 * g[..., 6:]
    ) / h3
    # 2nd-order central (5 points) one row further in
    out[..., 2] = (-g[..., 0] + 2.0 * g[..., 1] - 2.0 * g[..., 3] + g[..., 4]) / (2.0 * h3)
    out[..., -3] = (-g[..., -5] + 2.0 * g[..., -4] - 2.0 * g[..., -2] + g[..., -1]) / (2.0 * h3)
    # 2nd-order one-sided rows
    out[..., 1] = (-1.5 * g[..., 0] + 5.0 * g[..., 1] - 6.0 * g[..., 2] + 3.0 * g[..., 3] - 0.5 * g[..., 4]) / h3
    out[..., -2] = (1.5 * g[..., -1] - 5.0 * g[..., -2] + 6.0 * g[..., -3] - 3.0 * g[..., -4] + 0.5 * g[..., -5]) / h3
    out[..., 0] = (-2.5 * g[..., 0] + 9.0 * g[..., 1] - 12.0 * g[..., 2] + 7.0 * g[..., 3] - 1.5 * g[..., 4]) / h3
    out[..., -1] = (2.5 * g[..., -1] - 9.0 * g[..., -2] + 12.0 * g[..., -3] - 7.0 * g[..., -4] + 1.5 * g[..., -5]) / h3
    return np.moveaxis(out, -1, axis)
