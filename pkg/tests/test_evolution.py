import numpy as np
import pytest

from minkmembrane.errors import CorruptFieldError
from minkmembrane.evolution import (
    Breakdown,
    InitialData,
    ReachedEnd,
    SolverConfig,
    State,
    SupportGuard,
    Trajectory,
    evolve,
    initial_state,
    scale_solution,
    step,
    support_radius,
)
from minkmembrane.fields import GridSpec


def test_solver_config_validation():
    for bad in ({"cfl": 0.0}, {"cfl": 1.5}, {"q_max": 1.0}, {"q_max": 0.0},
                {"support_margin": 0.5}, {"support_margin": 0.0}):
        with pytest.raises(ValueError):
            SolverConfig(**bad)
    assert SolverConfig(cfl=1.0).cfl == 1.0


def test_initial_data_validation():
    with pytest.raises(ValueError):
        InitialData(epsilon=-1.0)
    with pytest.raises(ValueError):
        InitialData(epsilon=float("nan"))
    with pytest.raises(ValueError):
        InitialData(epsilon=0.1, width=0.0)
    with pytest.raises(ValueError):
        InitialData(epsilon=0.1, profile="zero")
    with pytest.raises(ValueError):
        InitialData(epsilon=0.1, profile="sawtooth")
    data = InitialData(epsilon=0.0)
    assert data.g_profile == "zero"


def test_support_radius():
    assert support_radius("gaussian", 2.0) == pytest.approx(2.0 * np.sqrt(np.log(1e14)))
    assert support_radius("bump", 0.7) == pytest.approx(0.7)
    assert support_radius("zero", 1.0) == 0.0


def test_initial_state_support_fit():
    data = InitialData(epsilon=1e-3, profile="gaussian", width=1.0)
    with pytest.raises(ValueError):
        initial_state(GridSpec(1, 5.0, 101), data)
    st = initial_state(GridSpec(1, 7.0, 101), data)
    assert st.t == 0.0
    assert st.scale == pytest.approx(1e-3)
    # displacement sampled, velocity zero by default
    assert np.max(st.phi) == pytest.approx(1e-3)
    assert np.max(np.abs(st.psi)) == 0.0


def _linear_wave_error(points):
    """Sup error against the flat-space d'Alembert solution at tiny amplitude."""
    eps, width, t_end = 1e-9, 1.0, 1.0
    g = GridSpec(1, 8.0, points)
    st = initial_state(g, InitialData(epsilon=eps, profile="gaussian", width=width))
    term = evolve(st, t_end)
    assert isinstance(term, ReachedEnd)
    x = g.axis_coords()
    exact = 0.5 * eps * (
        np.exp(-(((x - t_end) / width) ** 2)) + np.exp(-(((x + t_end) / width) ** 2))
    )
    return float(np.max(np.abs(st.phi - exact)))


def test_linear_regime_matches_dalembert_and_converges_4th_order():
    coarse = _linear_wave_error(161)
    fine = _linear_wave_error(321)
    assert coarse < 1e-13  # ~1e-4 relative to the 1e-9 amplitude
    assert coarse / fine > 10.0


def test_support_guard_trips_when_wave_reaches_walls():
    g = GridSpec(1, 7.0, 141)
    st = initial_state(g, InitialData(epsilon=1e-3, profile="gaussian", width=1.0))
    term = evolve(st, 3.0)
    assert isinstance(term, SupportGuard)
    assert 0.0 < term.t < 3.0
    assert term.sup_in_band > 1e-14 * st.scale


def test_breakdown_reports_location():
    g = GridSpec(1, 6.0, 241)
    st = initial_state(g, InitialData(epsilon=3.0, profile="gaussian", width=0.5))
    term = evolve(st, 2.0)
    assert isinstance(term, Breakdown)
    assert term.q_value >= 0.9
    assert term.t > 0.0
    assert len(term.node_coords) == 1
    assert abs(term.node_coords[0]) <= 6.0


def test_evolve_zero_span_and_backward_retrace():
    g = GridSpec(1, 8.0, 161)
    data = InitialData(epsilon=1e-3, profile="gaussian", width=1.0)
    st = initial_state(g, data)
    assert evolve(st, 0.0) == ReachedEnd(0.0, 0)
    phi0, psi0 = st.phi.copy(), st.psi.copy()
    term = evolve(st, 1.0)
    assert isinstance(term, ReachedEnd)
    back = evolve(st, 0.0)
    assert isinstance(back, ReachedEnd)
    assert st.t == pytest.approx(0.0, abs=1e-12)
    # forward RK4 then backward RK4 cancels only up to the truncation error
    assert np.max(np.abs(st.phi - phi0)) < 1e-6 * 1e-3
    assert np.max(np.abs(st.psi - psi0)) < 1e-6 * 1e-3


def test_step_rejects_corrupt_fields():
    g = GridSpec(1, 6.0, 121)
    st = initial_state(g, InitialData(epsilon=1e-3, width=1.0))
    st.phi[3] = np.nan
    with pytest.raises(CorruptFieldError):
        step(st, 0.01, SolverConfig())


def _cubic_trajectory():
    g = GridSpec(1, 4.0, 41)
    x = g.axis_coords()
    traj = Trajectory(g)
    for t in np.linspace(0.0, 1.0, 5):
        traj.times.append(float(t))
        traj.phis.append(t**3 + x**3 - 2.0 * t * x)
        traj.psis.append(3.0 * t**2 - 2.0 * x)
    return g, traj


def test_trajectory_sampling_exact_on_cubics():
    _, traj = _cubic_trajectory()
    pts = np.array([[0.33], [-0.77], [2.125]])
    t = 0.3
    want_phi = t**3 + pts[:, 0] ** 3 - 2.0 * t * pts[:, 0]
    want_psi = 3.0 * t**2 - 2.0 * pts[:, 0]
    want_dx = 3.0 * pts[:, 0] ** 2 - 2.0 * t
    assert np.max(np.abs(traj.sample_phi(t, pts) - want_phi)) < 1e-12
    assert np.max(np.abs(traj.sample_psi(t, pts) - want_psi)) < 1e-12
    assert np.max(np.abs(traj.sample_dphi_axis(t, pts, 0) - want_dx)) < 1e-11
    with pytest.raises(ValueError):
        traj.sample_phi(5.0, pts)


def test_scale_solution_resamples_rescaled_field():
    _, traj = _cubic_trajectory()
    a = 2.0
    scaled = scale_solution(traj, a)
    assert scaled.grid.extent == pytest.approx(traj.grid.extent / a)
    x = scaled.grid.axis_coords()
    for tau, phi, psi in zip(scaled.times, scaled.phis, scaled.psis):
        t = a * tau
        want_phi = (t**3 + (a * x) ** 3 - 2.0 * t * (a * x)) / a
        want_psi = 3.0 * t**2 - 2.0 * (a * x)
        assert np.max(np.abs(phi - want_phi)) < 1e-11
        assert np.max(np.abs(psi - want_psi)) < 1e-11
    with pytest.raises(ValueError):
        scale_solution(traj, -1.0)
