"""Short space-time windows over field history.

A FieldWindow is a stack of 1 or 5 uniformly spaced time slices of one
scalar field.  Five slices support 4th-order time differentiation at
every slice position through a dense differentiation matrix, which is
what lets vector-field operators with time components be applied
repeatedly: each application consumes the window and produces a new one
on the same times.

Windows built straight from solver history may carry the exact first
time derivative (psi); it is preferred over the stencil when available.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .equation import DerivativeBundle
from .errors import InsufficientHistoryError
from .fields import GridSpec, ScalarField, as_nd
from .stencils import axis_derivative, time_derivative_matrix

NSLICES = 5


@dataclass
class FieldWindow:
    grid: GridSpec
    times: np.ndarray
    data: np.ndarray
    exact_dt: np.ndarray | None = None

    def __post_init__(self):
        self.times = np.atleast_1d(np.asarray(self.times, dtype=np.float64))
        self.data = np.atleast_2d(np.asarray(self.data, dtype=np.float64))
        k = self.times.size
        if k not in (1, NSLICES):
            raise ValueError(f"window must hold 1 or {NSLICES} slices, got {k}")
        if self.data.shape != (k, self.grid.size):
            raise ValueError(
                f"data shape {self.data.shape} != ({k}, {self.grid.size})"
            )
        if k > 1:
            dts = np.diff(self.times)
            ref = dts[0]
            if ref == 0 or np.max(np.abs(dts - ref)) > 1e-9 * max(1.0, float(np.max(np.abs(self.times)))):
                raise ValueError("slice times must be uniformly spaced and distinct")
        if self.exact_dt is not None:
            self.exact_dt = np.atleast_2d(np.asarray(self.exact_dt, dtype=np.float64))
            if self.exact_dt.shape != self.data.shape:
                raise ValueError("exact_dt shape must match data")

    @property
    def nslices(self) -> int:
        return self.times.size

    @property
    def spacing(self) -> float:
        return float(self.times[1] - self.times[0]) if self.nslices > 1 else 0.0

    @property
    def newest_time(self) -> float:
        return float(self.times[-1])

    def newest(self) -> np.ndarray:
        return self.data[-1]

    def newest_field(self) -> ScalarField:
        return ScalarField(self.grid, self.newest().copy())

    def replace(self, data: np.ndarray, exact_dt: np.ndarray | None = None) -> "FieldWindow":
        return FieldWindow(self.grid, self.times, data, exact_dt)

    def time_derivative(self, order: int = 1) -> np.ndarray:
        """d^order/dt^order of every slice, shape (nslices, nodes)."""
        if order == 0:
            return self.data
        if order == 1 and self.exact_dt is not None:
            return self.exact_dt
        if self.nslices == 1:
            raise InsufficientHistoryError(
                "time derivative needs 5 slices (or an exact first derivative)"
            )
        mat = time_derivative_matrix(self.nslices, order) / self.spacing**order
        return mat @ self.data

    def newest_time_derivative(self, order: int = 1) -> np.ndarray:
        if order == 1 and self.exact_dt is not None:
            return self.exact_dt[-1]
        if self.nslices == 1:
            raise InsufficientHistoryError(
                "time derivative needs 5 slices (or an exact first derivative)"
            )
        row = time_derivative_matrix(self.nslices, order)[-1] / self.spacing**order
        return row @ self.data

    def space_derivative(self, axis: int, order: int = 1) -> np.ndarray:
        """d/dx_axis (0-based spatial axis) of every slice."""
        grid = self.grid
        out = np.empty_like(self.data)
        for s in range(self.nslices):
            nd = axis_derivative(as_nd(grid, self.data[s]), axis, grid.spacing, order)
            out[s] = nd.reshape(grid.size, order="F")
        return out

    def newest_space_derivative(self, axis: int, order: int = 1) -> np.ndarray:
        grid = self.grid
        nd = axis_derivative(as_nd(grid, self.newest()), axis, grid.spacing, order)
        return nd.reshape(grid.size, order="F")


def window_from_history(grid: GridSpec, times, phis, psis=None) -> FieldWindow:
    """Window over the last 5 history entries (or a single slice)."""
    times = np.asarray(times, dtype=np.float64)
    if times.size >= NSLICES:
        sel = slice(times.size - NSLICES, times.size)
    elif times.size == 1:
        sel = slice(0, 1)
    else:
        raise InsufficientHistoryError(
            f"need 1 or >= {NSLICES} slices, have {times.size}"
        )
    data = np.stack([np.asarray(p, dtype=np.float64) for p in list(phis)[sel]])
    exact = None
    if psis is not None:
        exact = np.stack([np.asarray(p, dtype=np.float64) for p in list(psis)[sel]])
    return FieldWindow(grid, times[sel], data, exact)


def window_from_state(state) -> FieldWindow:
    """Window of phi over the solver's history ring, psi as exact d/dt."""
    ts, phis, psis = state.history_arrays()
    return window_from_history(state.grid, ts, phis, psis)


def bundle_from_window(w: FieldWindow, second: bool = True) -> DerivativeBundle:
    """Pointwise derivative bundle of the newest slice.

    Time derivatives come from the window (exact psi if present, else
    the 5-slice stencil); spatial ones from the 4th-order stencils.
    """
    grid = w.grid
    n = grid.dimension
    phi = w.newest().copy()
    dt_phi = np.asarray(w.newest_time_derivative(1)).copy()
    grad = [w.newest_space_derivative(i) for i in range(n)]
    sec = None
    if second:
        if w.exact_dt is not None and w.nslices > 1:
            # One stencil pass on the exact psi beats two passes on phi.
            row = time_derivative_matrix(w.nslices, 1)[-1] / w.spacing
            sec = {(0, 0): row @ w.exact_dt}
        else:
            sec = {(0, 0): np.asarray(w.newest_time_derivative(2)).copy()}
        dt_nd = as_nd(grid, dt_phi)
        for i in range(n):
            nd = axis_derivative(dt_nd, i, grid.spacing, 1)
            sec[(0, i + 1)] = nd.reshape(grid.size, order="F")
        for i in range(n):
            sec[(i + 1, i + 1)] = w.newest_space_derivative(i, 2)
            gi = as_nd(grid, grad[i])
            for j in range(i + 1, n):
                nd = axis_derivative(gi, j, grid.spacing, 1)
                sec[(i + 1, j + 1)] = nd.reshape(grid.size, order="F")
    return DerivativeBundle(grid, phi, dt_phi, grad, sec)
