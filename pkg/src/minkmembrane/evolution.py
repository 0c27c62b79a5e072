"""Method-of-lines evolution of the membrane equation.

The update solves for phi_tt from the principal form

    h00 phi_tt + 2 sum_i h0i d_i(phi_t) + sum_ij hij d_i d_j phi = 0,

where h00 = 1 + phi_t^2/(1-Q) >= 1 keeps the division safe for Q < 1.
Classical RK4 with a fixed dt = cfl * h per run; the last step is never
shortened because dt is chosen to divide the requested span exactly,
which keeps the stored history uniformly spaced.

Boundary policy: the box is sized so the support never reaches the
walls.  Wall nodes are pinned to zero (their acceleration is zeroed) and
a support guard aborts the run if anything noticeable enters the margin
band, so no reflection can contaminate the interior.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .equation import Formulation
from .errors import CorruptFieldError, InsufficientHistoryError, NonHyperbolicError
from .fields import GridSpec, ScalarField, as_nd
from .stencils import axis_derivative, interp_axis_weights, lagrange_weights

HISTORY_DEPTH = 5
SUPPORT_THRESHOLD = 1e-14


@dataclass
class SolverConfig:
    """Evolution parameters.

    cfl : dt / h ratio (fixed-step RK4 is comfortably stable here).
    q_max : declare breakdown once sup Q00 exceeds this (before the true
        degeneracy at 1, so reported states are still well resolved).
    support_margin : width of the guard band at the walls, as a fraction
        of the half-width L.
    formulation : which residual form convergence diagnostics evaluate;
        the update itself always solves the principal form for phi_tt.
    """

    cfl: float = 0.4
    q_max: float = 0.9
    support_margin: float = 0.05
    formulation: Formulation = Formulation.GEOMETRIC

    def __post_init__(self):
        if not 0 < self.cfl <= 1.0:
            raise ValueError(f"cfl must be in (0, 1], got {self.cfl}")
        if not 0 < self.q_max < 1:
            raise ValueError(f"q_max must be in (0, 1), got {self.q_max}")
        if not 0 < self.support_margin < 0.5:
            raise ValueError(f"support_margin must be in (0, 0.5), got {self.support_margin}")


@dataclass
class InitialData:
    """Initial surface displacement eps*f and velocity eps*g.

    Profiles are radial: "gaussian" is exp(-(r/width)^2), "bump" is the
    compactly supported exp(-1/(1-(r/width)^2)) for r < width and zero
    outside, "custom" interpolates a radial table cubically and is zero
    beyond its last abscissa.
    """

    epsilon: float
    profile: str = "gaussian"
    width: float = 1.0
    g_profile: str = "zero"
    g_width: float | None = None
    table: tuple[np.ndarray, np.ndarray] | None = None
    g_table: tuple[np.ndarray, np.ndarray] | None = None

    def __post_init__(self):
        for name in (self.profile, self.g_profile):
            if name not in ("gaussian", "bump", "custom", "zero"):
                raise ValueError(f"unknown profile {name!r}")
        if self.profile == "zero":
            raise ValueError("displacement profile must not be 'zero'; use epsilon=0")
        if not np.isfinite(self.epsilon) or self.epsilon < 0:
            raise ValueError(f"epsilon must be a finite nonnegative real, got {self.epsilon}")
        if self.width <= 0:
            raise ValueError(f"width must be positive, got {self.width}")


def _radial_profile(name: str, r: np.ndarray, width: float,
                    table: tuple[np.ndarray, np.ndarray] | None) -> np.ndarray:
    if name == "zero":
        return np.zeros_like(r)
    if name == "gaussian":
        return np.exp(-((r / width) ** 2))
    if name == "bump":
        u = r / width
        out = np.zeros_like(r)
        inside = u < 1.0
        with np.errstate(divide="ignore", over="ignore"):
            out[inside] = np.exp(-1.0 / (1.0 - u[inside] ** 2))
        return out
    if name == "custom":
        if table is None:
            raise ValueError("custom profile requires a radial table")
        rs, vs = np.asarray(table[0], float), np.asarray(table[1], float)
        if rs.ndim != 1 or rs.size != vs.size or rs.size < 4:
            raise ValueError("radial table needs matching 1-d arrays, length >= 4")
        if np.any(np.diff(rs) <= 0):
            raise ValueError("radial table abscissae must increase")
        out = np.zeros_like(r)
        inside = r <= rs[-1]
        flat = r[inside]
        vals = np.empty_like(flat)
        h = rs[1] - rs[0]
        for i, rv in enumerate(flat.ravel()):
            j, w = interp_axis_weights(float(rv), float(rs[0]), float(h), rs.size)
            vals.ravel()[i] = w @ vs[j:j + 4]
        out[inside] = vals
        return out
    raise ValueError(f"unknown profile {name!r}")


def support_radius(name: str, width: float,
                   table: tuple[np.ndarray, np.ndarray] | None = None) -> float:
    """Radius beyond which the profile is below 1e-14 relative."""
    if name == "zero":
        return 0.0
    if name == "gaussian":
        return width * math.sqrt(math.log(1e14))
    if name == "bump":
        return width
    if name == "custom":
        return float(np.asarray(table[0], float)[-1])
    raise ValueError(f"unknown profile {name!r}")


@dataclass
class State:
    """Evolution state: current slice plus a short uniform history."""

    grid: GridSpec
    t: float
    phi: np.ndarray
    psi: np.ndarray
    scale: float = 1.0
    history: deque = field(default_factory=lambda: deque(maxlen=HISTORY_DEPTH))

    def push_history(self):
        self.history.append((self.t, self.phi.copy(), self.psi.copy()))

    def phi_field(self) -> ScalarField:
        return ScalarField(self.grid, self.phi.copy())

    def psi_field(self) -> ScalarField:
        return ScalarField(self.grid, self.psi.copy())

    def history_arrays(self) -> tuple[np.ndarray, list[np.ndarray], list[np.ndarray]]:
        if not self.history:
            raise InsufficientHistoryError("state has no stored history")
        ts, phis, psis = zip(*self.history)
        ts = np.asarray(ts)
        if ts.size >= 2:
            dts = np.diff(ts)
            if np.max(np.abs(dts - dts[0])) > 1e-12 * max(1.0, abs(float(ts[-1]))):
                raise InsufficientHistoryError("history spacing is not uniform")
        return ts, list(phis), list(psis)


def initial_state(grid: GridSpec, data: InitialData, t0: float = 0.0,
                  config: SolverConfig | None = None) -> State:
    """Sample the initial data onto the grid, checking support fits the box."""
    config = config or SolverConfig()
    margin = config.support_margin * grid.extent
    r_support = max(
        support_radius(data.profile, data.width, data.table),
        support_radius(data.g_profile, data.g_width or data.width, data.g_table),
    )
    if data.epsilon > 0 and r_support > grid.extent - margin:
        raise ValueError(
            f"initial support radius {r_support:.3g} does not fit inside the "
            f"box of half-width {grid.extent} with margin {margin:.3g}"
        )
    r = grid.radius()
    phi = data.epsilon * _radial_profile(data.profile, r, data.width, data.table)
    psi = data.epsilon * _radial_profile(
        data.g_profile, r, data.g_width or data.width, data.g_table
    )
    return State(
        grid,
        float(t0),
        np.ascontiguousarray(phi.reshape(grid.size, order="F")),
        np.ascontiguousarray(psi.reshape(grid.size, order="F")),
        scale=max(data.epsilon, 1e-300),
    )


def _boundary_mask_flat(grid: GridSpec) -> np.ndarray:
    nd = np.zeros(grid.shape, dtype=bool)
    for k in range(grid.dimension):
        sl = [slice(None)] * grid.dimension
        sl[k] = 0
        nd[tuple(sl)] = True
        sl[k] = -1
        nd[tuple(sl)] = True
    return nd.reshape(grid.size, order="F")


def _band_indices(grid: GridSpec, margin: float) -> np.ndarray:
    """Flat indices of nodes within `margin` of any wall."""
    nd = np.zeros(grid.shape, dtype=bool)
    coords = np.abs(grid.axis_coords())
    outer = coords > grid.extent - margin
    for k in range(grid.dimension):
        shape = [1] * grid.dimension
        shape[k] = grid.points
        nd |= outer.reshape(shape)
    return np.flatnonzero(nd.reshape(grid.size, order="F"))


def _acceleration_nd(grid: GridSpec, phi_nd: np.ndarray, psi_nd: np.ndarray,
                     q_max: float, wall: np.ndarray) -> np.ndarray:
    n = grid.dimension
    h = grid.spacing
    dphi = [axis_derivative(phi_nd, k, h, 1) for k in range(n)]
    q = psi_nd * psi_nd
    for g in dphi:
        q -= g * g
    qtop = float(q.max())
    if qtop >= q_max:
        idx = np.unravel_index(int(np.argmax(q)), grid.shape)
        node = 0
        for k in reversed(range(n)):
            node = node * grid.points + idx[k]
        raise NonHyperbolicError(
            f"sup Q00 = {qtop:.6g} >= q_max = {q_max}", node=int(node), q_value=qtop
        )
    w = 1.0 / (1.0 - q)
    num = np.zeros_like(phi_nd)
    for k in range(n):
        dpsi_k = axis_derivative(psi_nd, k, h, 1)
        num += (-2.0 * psi_nd * w) * dphi[k] * dpsi_k
        d2k = axis_derivative(phi_nd, k, h, 2)
        num += (dphi[k] * dphi[k] * w - 1.0) * d2k
        for j in range(k + 1, n):
            mixed = axis_derivative(dphi[k], j, h, 1)
            num += 2.0 * (dphi[k] * dphi[j] * w) * mixed
    acc = -num / (1.0 + psi_nd * psi_nd * w)
    acc[wall] = 0.0
    return acc


def acceleration(state: State, q_max: float = 0.9) -> ScalarField:
    """phi_tt for the current slice, wall nodes pinned to zero."""
    wall = _boundary_mask_flat(state.grid).reshape(state.grid.shape, order="F")
    acc = _acceleration_nd(
        state.grid, as_nd(state.grid, state.phi), as_nd(state.grid, state.psi),
        q_max, wall,
    )
    return ScalarField(state.grid, acc.reshape(state.grid.size, order="F"))


def step(state: State, dt: float, config: SolverConfig | None = None) -> State:
    """One classical RK4 step, in place; appends to the history ring."""
    config = config or SolverConfig()
    grid = state.grid
    wall = _boundary_mask_flat(grid).reshape(grid.shape, order="F")
    phi = as_nd(grid, state.phi)
    psi = as_nd(grid, state.psi)

    def rhs(p, s):
        return s, _acceleration_nd(grid, p, s, config.q_max, wall)

    k1p, k1s = rhs(phi, psi)
    k2p, k2s = rhs(phi + 0.5 * dt * k1p, psi + 0.5 * dt * k1s)
    k3p, k3s = rhs(phi + 0.5 * dt * k2p, psi + 0.5 * dt * k2s)
    k4p, k4s = rhs(phi + dt * k3p, psi + dt * k3s)

    phi_new = phi + (dt / 6.0) * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
    psi_new = psi + (dt / 6.0) * (k1s + 2.0 * k2s + 2.0 * k3s + k4s)
    if not (np.all(np.isfinite(phi_new)) and np.all(np.isfinite(psi_new))):
        raise CorruptFieldError(f"non-finite values after step at t = {state.t + dt}")
    state.phi = phi_new.reshape(grid.size, order="F")
    state.psi = psi_new.reshape(grid.size, order="F")
    state.t = float(state.t + dt)
    state.push_history()
    return state


@dataclass
class ReachedEnd:
    t: float
    steps: int


@dataclass
class Breakdown:
    t: float
    node: int
    q_value: float
    node_coords: tuple[float, ...]


@dataclass
class SupportGuard:
    t: float
    sup_in_band: float


Termination = ReachedEnd | Breakdown | SupportGuard


def evolve(state: State, t_end: float, config: SolverConfig | None = None,
           callback=None) -> Termination:
    """March to t_end (forward or backward), reporting how the run ended.

    `callback(state)` runs after every completed step.
    """
    config = config or SolverConfig()
    grid = state.grid
    span = t_end - state.t
    if span == 0.0:
        return ReachedEnd(state.t, 0)
    nsteps = max(1, math.ceil(abs(span) / (config.cfl * grid.spacing)))
    dt = span / nsteps
    band = _band_indices(grid, config.support_margin * grid.extent)
    threshold = SUPPORT_THRESHOLD * state.scale
    for k in range(nsteps):
        try:
            step(state, dt, config)
        except NonHyperbolicError as err:
            node = err.node or 0
            return Breakdown(state.t, node, err.q_value or float("nan"),
                             grid.node_coords(node))
        if band.size:
            sup_band = max(
                float(np.max(np.abs(state.phi[band]))),
                float(np.max(np.abs(state.psi[band]))),
            )
            if sup_band > threshold:
                return SupportGuard(state.t, sup_band)
        if callback is not None:
            callback(state)
    return ReachedEnd(state.t, nsteps)


@dataclass
class Trajectory:
    """Stored slices of an evolution at uniform times, with interpolation."""

    grid: GridSpec
    times: list[float] = field(default_factory=list)
    phis: list[np.ndarray] = field(default_factory=list)
    psis: list[np.ndarray] = field(default_factory=list)

    def record(self, state: State):
        self.times.append(state.t)
        self.phis.append(state.phi.copy())
        self.psis.append(state.psi.copy())

    def _time_window(self, t: float) -> tuple[int, np.ndarray]:
        ts = np.asarray(self.times)
        if ts.size < 4:
            raise InsufficientHistoryError("trajectory needs at least 4 slices")
        lo, hi = (ts[0], ts[-1]) if ts[0] < ts[-1] else (ts[-1], ts[0])
        slack = 1e-9 * max(1.0, abs(hi))
        if not (lo - slack <= t <= hi + slack):
            raise ValueError(f"time {t} outside trajectory range [{lo}, {hi}]")
        dt = ts[1] - ts[0]
        j = int(np.floor((t - ts[0]) / dt)) - 1
        j = min(max(j, 0), ts.size - 4)
        return j, lagrange_weights(ts[j:j + 4], t)

    def sample_phi(self, t: float, points: np.ndarray) -> np.ndarray:
        """phi(t, x) at off-grid space-time points, cubic in every direction."""
        j, wts = self._time_window(t)
        return self._sample_points(self.phis[j:j + 4], wts, points)

    def sample_psi(self, t: float, points: np.ndarray) -> np.ndarray:
        j, wts = self._time_window(t)
        return self._sample_points(self.psis[j:j + 4], wts, points)

    def sample_dphi_axis(self, t: float, points: np.ndarray, axis: int) -> np.ndarray:
        """Spatial derivative d_axis phi at off-grid points."""
        j, wts = self._time_window(t)
        slices = [
            axis_derivative(as_nd(self.grid, s), axis, self.grid.spacing, 1)
            .reshape(self.grid.size, order="F")
            for s in self.phis[j:j + 4]
        ]
        return self._sample_points(slices, wts, points)

    def _sample_points(self, slices, wts, points) -> np.ndarray:
        grid = self.grid
        n = grid.dimension
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        if pts.shape[1] != n:
            raise ValueError(f"points must have {n} columns")
        blended = np.zeros(grid.size)
        for w, s in zip(wts, slices):
            blended += w * s
        nd = as_nd(grid, blended)
        out = np.empty(pts.shape[0])
        x0, h, m = -grid.extent, grid.spacing, grid.points
        for i, p in enumerate(pts):
            block = nd
            for k in range(n):
                j, wk = interp_axis_weights(float(p[k]), x0, h, m)
                block = np.tensordot(wk, block[j:j + 4], axes=(0, 0))
            out[i] = float(block)
        return out


def scale_solution(traj: Trajectory, a: float, times: list[float] | None = None,
                   grid: GridSpec | None = None) -> Trajectory:
    """The rescaled solution phi_a(t, x) = phi(a t, a x) / a, resampled.

    The membrane equation is invariant under this family, so applying it
    to a recorded solution yields (up to interpolation error) another
    solution; `times` and `grid` choose where the rescaled field is
    evaluated (defaults: source times / a on a box shrunk by 1/a).
    """
    if a <= 0:
        raise ValueError(f"scaling factor must be positive, got {a}")
    if grid is None:
        grid = GridSpec(traj.grid.dimension, traj.grid.extent / a, traj.grid.points)
    if times is None:
        times = [t / a for t in traj.times]
    out = Trajectory(grid)
    coords = [grid.mesh(k) for k in range(grid.dimension)]
    pts = np.stack(
        [np.broadcast_to(c, grid.shape).reshape(grid.size, order="F") for c in coords],
        axis=1,
    )
    for t in times:
        vals = traj.sample_phi(a * t, a * pts) / a
        out.times.append(t)
        out.phis.append(vals)
        out.psis.append(traj.sample_psi(a * t, a * pts))
    return out
