"""Finite-difference weights, axis-wise differentiation and interpolation.

All derivative operators in the package come through here.  Weights are
generated with Fornberg's recurrence, which is exact for the small integer
offset sets we use, so interior stencils reproduce polynomials up to
degree four and the one-sided boundary stencils keep fourth order
(third order in the degenerate five-point case of a minimal grid).
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np


def fornberg_weights(offsets: np.ndarray, order: int, x0: float = 0.0) -> np.ndarray:
    """Weights w with f^(order)(x0) ~= sum w_j f(x0 + offsets_j).

    Standard recurrence over grid points; `offsets` need not be uniform.
    """
    x = np.asarray(offsets, dtype=np.float64)
    npts = x.size
    if order >= npts:
        raise ValueError(f"need more than {order} points for derivative order {order}")
    c = np.zeros((npts, order + 1))
    c[0, 0] = 1.0
    c1 = 1.0
    c4 = x[0] - x0
    for i in range(1, npts):
        mn = min(i, order)
        c2 = 1.0
        c5 = c4
        c4 = x[i] - x0
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, order].copy()


@lru_cache(maxsize=None)
def _stencil_plan(m: int, order: int) -> tuple:
    """Interior and boundary stencils for an m-point line, as h=1 weights.

    Returns (interior_offsets, interior_weights, rows) where rows is a
    tuple of (row_index, offsets, weights) covering every node within two
    nodes of either end.
    """
    if m < 5:
        raise ValueError(f"need at least 5 nodes per axis, got {m}")
    interior_off = np.arange(-2, 3)
    interior_w = fornberg_weights(interior_off, order)
    width = 6 if (order == 2 and m >= 6) else 5
    rows = []
    for r in (0, 1):
        off = np.arange(-r, width - r)
        rows.append((r, off, fornberg_weights(off, order)))
    for r in (m - 2, m - 1):
        back = width - (m - r)
        off = np.arange(-back, m - r)
        rows.append((r, off, fornberg_weights(off, order)))
    return interior_off, interior_w, tuple(rows)


def axis_derivative(arr: np.ndarray, axis: int, h: float, order: int = 1) -> np.ndarray:
    """Differentiate an n-d array along one axis with fourth-order stencils."""
    m = arr.shape[axis]
    interior_off, interior_w, rows = _stencil_plan(m, order)
    out = np.empty_like(arr)
    ndim = arr.ndim

    def sl(lo, hi):
        s = [slice(None)] * ndim
        s[axis] = slice(lo, hi)
        return tuple(s)

    def row(r):
        s = [slice(None)] * ndim
        s[axis] = r
        return tuple(s)

    target = sl(2, m - 2)
    acc = interior_w[0] * arr[sl(0, m - 4)]
    for k in range(1, interior_off.size):
        o = int(interior_off[k])
        acc += interior_w[k] * arr[sl(2 + o, m - 2 + o)]
    out[target] = acc
    for r, off, w in rows:
        acc = w[0] * arr[row(r + int(off[0]))]
        for k in range(1, off.size):
            acc += w[k] * arr[row(r + int(off[k]))]
        out[row(r)] = acc
    out *= 1.0 / h**order
    return out


@lru_cache(maxsize=None)
def time_derivative_matrix(nslices: int, order: int = 1) -> np.ndarray:
    """D with (d/dt)^order f at slice p ~= sum_q D[p,q] f(slice q), unit spacing."""
    offsets = np.arange(nslices, dtype=np.float64)
    return np.vstack([fornberg_weights(offsets - p, order) for p in range(nslices)])


def lagrange_weights(nodes: np.ndarray, x: float) -> np.ndarray:
    """Interpolation weights at x for the given nodes (derivative order 0)."""
    return fornberg_weights(np.asarray(nodes, dtype=np.float64) - x, 0)


def _window_start(x: float, x0: float, h: float, m: int, width: int = 4) -> int:
    """Left index of a width-point interpolation window containing x."""
    j = int(np.floor((x - x0) / h)) - (width // 2 - 1)
    return min(max(j, 0), m - width)


def interp_axis_weights(x: float, x0: float, h: float, m: int, width: int = 4):
    """Window start plus cubic Lagrange weights for a uniform axis."""
    j = _window_start(x, x0, h, m, width)
    nodes = x0 + h * np.arange(j, j + width)
    return j, lagrange_weights(nodes, x)


def interp_uniform(values: np.ndarray, x0: float, h: float, points: np.ndarray) -> np.ndarray:
    """Cubic interpolation of a 1-d sampled function at query points."""
    values = np.asarray(values, dtype=np.float64)
    pts = np.atleast_1d(np.asarray(points, dtype=np.float64))
    out = np.empty(pts.size)
    for i, x in enumerate(pts):
        j, w = interp_axis_weights(x, x0, h, values.size)
        out[i] = float(w @ values[j:j + 4])
    return out
