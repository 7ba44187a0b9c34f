import math

import numpy as np
import pytest

from crimeblowup.coupled import (
    CoupledControl,
    CoupledState,
    VFloorError,
    dt_cap,
    quasi_steady_residual,
    quasi_steady_target,
    run_coupled,
    step_coupled,
    taxis_speed,
)
from crimeblowup.grid import integrate, make_grid
from crimeblowup.initial_data import InitialDataParams, construct_w0
from crimeblowup.scalar import StepControl


@pytest.fixture(scope="module")
def grid():
    return make_grid(3, 1.0, 64)


def _ctrl(T_end, **kw):
    return CoupledControl(StepControl(T_end, **kw))


def test_state_validation(grid):
    u, v = grid.profile(1.0), grid.profile(1.0)
    with pytest.raises(ValueError):
        CoupledState(u, v, 0.0, 0.0, 2.0)
    with pytest.raises(ValueError):
        CoupledState(u, v, 0.0, 1.5, 2.0)
    with pytest.raises(ValueError):
        CoupledState(u, v, 0.0, 0.1, -1.0)
    with pytest.raises(ValueError):
        CoupledState(u, grid.profile(0.0), 0.0, 0.1, 2.0)
    with pytest.raises(ValueError):
        CoupledControl(StepControl(1.0), cfl_safety=0.0)


def test_constant_data_oracle(grid):
    # u stays at 1.5 and v' = (u - 1) v
    rep = run_coupled(grid.profile(1.5), grid.profile(1.0), 0.1, 2.0, _ctrl(1.0, rel_tol=1e-7))
    assert rep.outcome == "reached_T_end"
    np.testing.assert_allclose(rep.final_state.v.values, math.exp(0.5), rtol=1e-6)
    np.testing.assert_allclose(rep.final_state.u.values, 1.5, rtol=1e-12)


def test_zero_u_decays_v(grid):
    rep = run_coupled(grid.profile(0.0), grid.profile(1.0), 0.1, 2.0, _ctrl(1.0, rel_tol=1e-7))
    np.testing.assert_allclose(rep.final_state.v.values, math.exp(-1.0), rtol=1e-6)
    assert np.all(rep.final_state.u.values == 0.0)


def test_mass_and_v_bound_on_nonuniform_data(grid):
    u0 = grid.evaluate(lambda r: 2.0 + np.cos(math.pi * r))
    v0 = grid.evaluate(lambda r: 1.0 + 0.5 * np.cos(math.pi * r))
    rep = run_coupled(u0, v0, 0.1, 2.0, _ctrl(0.1), sample_times=(0.05,))
    assert rep.outcome == "reached_T_end"
    assert rep.max_mass_drift <= 1e-9
    assert rep.v_bound_margin >= -1e-6
    assert rep.min_u_rel >= 0.0
    assert integrate(rep.final_state.u, 1) == pytest.approx(integrate(u0, 1), rel=1e-9)
    assert list(rep.samples) == [0.05, 0.1]
    assert rep.p_monitor == 2.5


def test_quasi_steady_residual_zero_on_manifold(grid):
    v = grid.evaluate(lambda r: 1.0 + r**2)
    m = 3.0
    u = quasi_steady_target(v, m, 2.0)
    assert integrate(u, 1) == pytest.approx(m, rel=1e-14)
    assert quasi_steady_residual(CoupledState(u, v, 0.0, 0.1, 2.0), m) == pytest.approx(0.0, abs=1e-15)
    # constant v with u at its mean also sits on the manifold
    mean = CoupledState(grid.profile(m / grid.volume), grid.profile(2.0), 0.0, 0.1, 2.0)
    assert quasi_steady_residual(mean, m) < 1e-14


def test_taxis_speed_and_cap(grid):
    assert taxis_speed(grid, np.ones(grid.N)) == 0.0
    state = CoupledState(grid.profile(0.0), grid.profile(1.0), 0.0, 0.1, 2.0)
    assert dt_cap(state, _ctrl(1.0)) == math.inf
    state = CoupledState(grid.profile(4.0), grid.evaluate(lambda r: 1.0 + r), 0.0, 0.1, 2.0)
    speed = taxis_speed(grid, state.v.values)
    assert dt_cap(state, _ctrl(1.0)) == pytest.approx(min(0.5 * 0.1 * grid.h / (2.0 * speed), 0.5 / 4.0))


def test_v_floor_raises(grid):
    state = CoupledState(grid.profile(0.0), grid.profile(1.0), 0.0, 0.1, 2.0)
    with pytest.raises(VFloorError):
        step_coupled(state, _ctrl(1.0), v_floor=2.0)


def test_p_monitor_and_data_validation(grid):
    with pytest.raises(ValueError):
        run_coupled(grid.profile(1.0), grid.profile(1.0), 0.1, 2.0, _ctrl(0.1), p_monitor=1.5)
    with pytest.raises(ValueError):
        run_coupled(grid.profile(-1.0), grid.profile(1.0), 0.1, 2.0, _ctrl(0.1))
    with pytest.raises(ValueError):
        run_coupled(grid.profile(1.0), grid.profile(1.0), 0.1, 2.0, _ctrl(0.1), sample_times=(0.2,))


def test_concentrating_mass_is_reported_as_blowup():
    grid = make_grid(3, 1.0, 256)
    v0, _ = construct_w0(grid, InitialDataParams(2.0, 3, 1.0, 4.0))
    u0 = quasi_steady_target(v0, 20.0, 2.0)
    rep = run_coupled(u0, v0, 0.1, 2.0, _ctrl(0.2, W_max_factor=1e4))
    assert rep.blew_up
    assert rep.T_detect < 0.2
    assert rep.max_mass_drift <= 1e-9
    assert rep.v_bound_margin >= -1e-6
