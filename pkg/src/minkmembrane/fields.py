"""Uniform grids over [-L, L]^n and scalar fields stored on them.

Fields are flat float64 arrays in row-major order with the x1 index
fastest, so `values.reshape(shape, order="F")` views the data with
physical axis k mapped to numpy axis k.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import CorruptFieldError
from .stencils import axis_derivative

# Node-count ceiling: a handful of float64 work buffers per field must fit
# in desk-scale memory.
MAX_NODES = 1 << 27


@dataclass(frozen=True)
class GridSpec:
    """Uniform tensor grid on [-extent, extent]^dimension.

    Parameters
    ----------
    dimension : spatial dimension, 1 to 3.
    extent : half-width L of the box.
    points : odd node count per axis, at least 5.
    """

    dimension: int
    extent: float
    points: int

    def __post_init__(self):
        if self.dimension not in (1, 2, 3):
            raise ValueError(f"dimension must be 1, 2 or 3, got {self.dimension}")
        if not (np.isfinite(self.extent) and self.extent > 0):
            raise ValueError(f"extent must be positive and finite, got {self.extent}")
        if self.points < 5 or self.points % 2 == 0:
            raise ValueError(f"points must be odd and >= 5, got {self.points}")
        if self.points**self.dimension > MAX_NODES:
            raise ValueError(
                f"grid of {self.points}^{self.dimension} nodes exceeds the "
                f"memory budget of {MAX_NODES} nodes"
            )

    @property
    def spacing(self) -> float:
        return 2.0 * self.extent / (self.points - 1)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.points,) * self.dimension

    @property
    def size(self) -> int:
        return self.points**self.dimension

    def axis_coords(self) -> np.ndarray:
        return np.linspace(-self.extent, self.extent, self.points)

    def mesh(self, axis: int) -> np.ndarray:
        """Coordinate array of spatial axis (0-based), broadcastable to shape."""
        shape = [1] * self.dimension
        shape[axis] = self.points
        return self.axis_coords().reshape(shape)

    def radius(self) -> np.ndarray:
        """|x| on the grid, full shape."""
        r2 = np.zeros(self.shape)
        for k in range(self.dimension):
            r2 = r2 + self.mesh(k) ** 2
        return np.sqrt(r2)

    def node_coords(self, flat_index: int) -> tuple[float, ...]:
        """Physical coordinates of a flat node index (x1 fastest)."""
        coords = []
        idx = flat_index
        ax = self.axis_coords()
        for _ in range(self.dimension):
            coords.append(float(ax[idx % self.points]))
            idx //= self.points
        return tuple(coords)


def as_nd(grid: GridSpec, flat: np.ndarray) -> np.ndarray:
    """View flat storage as an n-d array with physical axis k = numpy axis k."""
    return flat.reshape(grid.shape, order="F")


def as_flat(grid: GridSpec, nd: np.ndarray) -> np.ndarray:
    return nd.reshape(grid.size, order="F")


@dataclass
class ScalarField:
    """A float64 scalar field sampled on a GridSpec."""

    grid: GridSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=np.float64).reshape(-1)
        if v.size != self.grid.size:
            raise ValueError(
                f"field has {v.size} values, grid expects {self.grid.size}"
            )
        if not np.all(np.isfinite(v)):
            bad = int(np.flatnonzero(~np.isfinite(v))[0])
            raise CorruptFieldError(f"non-finite value at node {bad}")
        self.values = v

    def nd(self) -> np.ndarray:
        return as_nd(self.grid, self.values)

    def copy(self) -> "ScalarField":
        return ScalarField(self.grid, self.values.copy())


def field_from_nd(grid: GridSpec, nd: np.ndarray) -> ScalarField:
    return ScalarField(grid, as_flat(grid, nd))


def derivative(f: ScalarField, axis: int, order: int = 1) -> ScalarField:
    """Spatial derivative along 0-based axis, fourth-order stencils."""
    if not 0 <= axis < f.grid.dimension:
        raise ValueError(f"axis {axis} out of range for dimension {f.grid.dimension}")
    if order not in (1, 2):
        raise ValueError(f"derivative order must be 1 or 2, got {order}")
    out = axis_derivative(f.nd(), axis, f.grid.spacing, order)
    return field_from_nd(f.grid, out)


def norm_l2(f: ScalarField) -> float:
    """Rectangle-rule L2 norm, sqrt(h^n sum v^2).

    numpy's pairwise summation has a fixed association order for a given
    array length, which keeps this reduction bit-stable across runs and
    thread settings.
    """
    h = f.grid.spacing
    return float(np.sqrt(h**f.grid.dimension * np.dot(f.values, f.values)))


def norm_sup(f: ScalarField) -> float:
    return float(np.max(np.abs(f.values)))


def dump_field_csv(f: ScalarField, path: str, header_comment: str | None = None) -> None:
    """Write a field snapshot as CSV: index, coord_1..coord_n, value."""
    n = f.grid.dimension
    ax = f.grid.axis_coords()
    m = f.grid.points
    with open(path, "w") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        cols = ",".join(f"coord_{k}" for k in range(1, n + 1))
        fh.write(f"index,{cols},value\n")
        idx = np.arange(f.grid.size)
        coords = []
        rest = idx
        for _ in range(n):
            coords.append(ax[rest % m])
            rest = rest // m
        for i in range(f.grid.size):
            cs = ",".join(repr(float(c[i])) for c in coords)
            fh.write(f"{i},{cs},{float(f.values[i])!r}\n")
