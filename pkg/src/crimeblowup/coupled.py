"""Reduced crime model in radial symmetry.

    eps u_t = Delta u - chi div(u/v grad v)
        v_t = Delta v - v + u v

Diffusion (and the decay of v) is implicit; taxis and the production u v are
explicit. Every u update is a difference of face fluxes, so the discrete mass
of u is conserved to roundoff.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .grid import Profile, RadialGrid, check_same_grid, flux_divergence_array, integrate_array
from .imex import DtUnderflow, LinearOperator, doubled_attempt, next_dt
from .scalar import StepControl


class VFloorError(RuntimeError):
    """v dropped to the positivity floor; the continuum v cannot, so this is a numerical failure."""


@dataclass(frozen=True)
class CoupledState:
    u: Profile
    v: Profile
    t: float
    eps: float
    chi: float
    dt_hint: Optional[float] = field(default=None, compare=False)

    def __post_init__(self) -> None:
        check_same_grid(self.u, self.v)
        if not 0 < self.eps <= 1:
            raise ValueError(f"eps must lie in (0, 1], got {self.eps}")
        if self.chi <= 0:
            raise ValueError(f"chi must be positive, got {self.chi}")
        if np.any(self.v.values <= 0):
            raise ValueError("v must be positive everywhere")

    @property
    def grid(self) -> RadialGrid:
        return self.u.grid


@dataclass(frozen=True)
class CoupledControl:
    """Step control for the coupled system; the CFL factor limits the explicit taxis."""

    base: StepControl
    cfl_safety: float = 0.5
    v_floor_factor: float = 1e-3

    def __post_init__(self) -> None:
        if not 0 < self.cfl_safety <= 1:
            raise ValueError("cfl_safety must lie in (0, 1]")


_OPS: dict = {}


def _operators(grid: RadialGrid, eps: float) -> tuple[LinearOperator, LinearOperator]:
    key = (grid, eps)
    ops = _OPS.get(key)
    if ops is None:
        ops = _OPS[key] = (LinearOperator(grid, 1.0 / eps), LinearOperator(grid, 1.0, 1.0))
    return ops


def _explicit(grid: RadialGrid, eps: float, chi: float):
    scale = chi / eps

    def rhs(t, ys):
        u, v = ys
        return [-scale * flux_divergence_array(grid, u / v, v), u * v]

    return rhs


def taxis_speed(grid: RadialGrid, v: np.ndarray) -> float:
    """max over interior faces of |v_r / v| with face-averaged v."""
    dv = np.diff(v) / grid.h
    vf = 0.5 * (v[1:] + v[:-1])
    return float(np.max(np.abs(dv / vf)))


def dt_cap(state: CoupledState, ctrl: CoupledControl) -> float:
    grid = state.grid
    cap = math.inf
    speed = taxis_speed(grid, state.v.values)
    if speed > 0:
        cap = ctrl.cfl_safety * state.eps * grid.h / (state.chi * speed)
    umax = float(np.max(np.abs(state.u.values)))
    if umax > 0:
        cap = min(cap, ctrl.base.safety / umax)
    return cap


def step_coupled(
    state: CoupledState,
    ctrl: CoupledControl,
    t_stop: Optional[float] = None,
    v_floor: float = 0.0,
) -> tuple[CoupledState, float]:
    """One accepted adaptive step, never past ``t_stop`` (default T_end)."""
    base = ctrl.base
    grid = state.grid
    ops = _operators(grid, state.eps)
    rhs = _explicit(grid, state.eps, state.chi)
    t_stop = base.T_end if t_stop is None else t_stop
    dt = state.dt_hint if state.dt_hint is not None else base.dt_init_value
    dt = min(dt, dt_cap(state, ctrl))
    last = dt >= t_stop - state.t
    if last:
        dt = t_stop - state.t
    ys = [state.u.values, state.v.values]
    while True:
        if dt < base.dt_min_value and not last:
            raise DtUnderflow(state.t, dt, base.dt_min_value)
        (u, v), err = doubled_attempt(ys, state.t, dt, ops, rhs)
        if err <= base.rel_tol and np.all(np.isfinite(u)) and np.all(np.isfinite(v)):
            break
        dt = next_dt(dt, err, base.rel_tol) if np.isfinite(err) else 0.2 * dt
        last = False
    if float(np.min(v)) <= v_floor:
        raise VFloorError(f"min v = {np.min(v):.3e} reached the floor {v_floor:.3e} at t = {state.t + dt:.6g}")
    hint = next_dt(dt, err, base.rel_tol)
    if last and state.dt_hint is not None:
        hint = max(hint, state.dt_hint)
    t_new = t_stop if last else state.t + dt
    new = CoupledState(Profile(grid, u), Profile(grid, v), t_new, state.eps, state.chi, hint)
    return new, dt


def quasi_steady_target(v: Profile, m: float, chi: float) -> Profile:
    """m v^chi / int v^chi."""
    return Profile(v.grid, m * v.values**chi / integrate_array(v.grid, v.values, chi))


def quasi_steady_residual(state: CoupledState, m: float, floor: float = 1e-300) -> float:
    """||u - m v^chi / int v^chi||_2 / max(||u||_2, floor)."""
    grid = state.grid
    target = quasi_steady_target(state.v, m, state.chi).values
    u = state.u.values
    num = math.sqrt(integrate_array(grid, u - target, 2))
    den = math.sqrt(integrate_array(grid, u, 2))
    return num / max(den, floor)


@dataclass
class CoupledRecord:
    t: float
    u_lp: float
    u_linf: float
    u_min: float
    v_min: float
    v_linf: float
    mass_drift: float
    residual: float


@dataclass
class CoupledRunReport:
    outcome: str  # "reached_T_end" | "blew_up" | "dt_underflow" | "step_limit"
    T_detect: Optional[float]
    t_final: float
    p_monitor: float
    history: list[CoupledRecord]
    samples: dict[float, CoupledRecord]
    steps: int
    sup_u_lp: float
    max_mass_drift: float
    max_step_mass_drift: float
    v_bound_margin: float  # min over steps of min v / (e^-t min v0) - 1
    min_u_rel: float  # min over steps of min u / ||u||_inf
    final_state: CoupledState
    snapshots: list[tuple[float, np.ndarray, np.ndarray]] = field(default_factory=list)

    @property
    def blew_up(self) -> bool:
        return self.outcome == "blew_up"


def _lp(grid: RadialGrid, u: np.ndarray, p: float) -> float:
    return integrate_array(grid, np.abs(u), p) ** (1.0 / p)


def run_coupled(
    u0: Profile,
    v0: Profile,
    eps: float,
    chi: float,
    ctrl: CoupledControl,
    p_monitor: Optional[float] = None,
    sample_times: Sequence[float] = (),
    record_every: int = 1,
    snapshot_every: int = 0,
) -> CoupledRunReport:
    """Integrate to T_end or blow-up of ||u||_{L^p}, p = p_monitor (default n/2 + 1)."""
    grid = check_same_grid(u0, v0)
    p = grid.n / 2.0 + 1.0 if p_monitor is None else float(p_monitor)
    if p <= grid.n / 2.0:
        raise ValueError(f"p_monitor must exceed n/2 = {grid.n / 2}, got {p}")
    if np.any(u0.values < 0):
        raise ValueError("u0 must be nonnegative")
    base = ctrl.base
    state = CoupledState(u0, v0, 0.0, eps, chi)
    mass0 = integrate_array(grid, u0.values)
    vmin0 = float(np.min(v0.values))
    v_floor = ctrl.v_floor_factor * math.exp(-base.T_end) * vmin0
    lp0 = _lp(grid, u0.values, p)
    threshold = base.threshold(lp0) if lp0 > 0 else math.inf
    # v grows like exp(int u dt), so a concentrating u can overflow v before its own norm crosses
    v_threshold = base.W_max_factor * float(np.max(v0.values))
    stops = sorted(t for t in set(float(s) for s in sample_times) if 0 < t < base.T_end)
    for t in sample_times:
        if not 0 < t <= base.T_end:
            raise ValueError(f"sample time {t} outside (0, T_end]")

    def record(s: CoupledState) -> CoupledRecord:
        u, v = s.u.values, s.v.values
        mass = integrate_array(grid, u)
        drift = abs(mass - mass0) / mass0 if mass0 > 0 else abs(mass)
        res = quasi_steady_residual(s, mass0, floor=1e-300) if mass0 > 0 else math.nan
        return CoupledRecord(
            s.t, _lp(grid, u, p), float(np.max(np.abs(u))), float(np.min(u)),
            float(np.min(v)), float(np.max(v)), drift, res,
        )

    rec = record(state)
    history = [rec]
    samples: dict[float, CoupledRecord] = {}
    lps = [rec.u_lp]
    sup_lp = rec.u_lp
    max_drift = 0.0
    max_step_drift = 0.0
    v_margin = 0.0
    min_u_rel = rec.u_min / rec.u_linf if rec.u_linf > 0 else 0.0
    prev_mass = mass0
    snapshots = [(0.0, u0.values, v0.values)] if snapshot_every > 0 else []
    outcome = "step_limit"
    steps = 0
    while steps < base.max_steps:
        t_stop = next((s for s in stops if s > state.t), base.T_end)
        try:
            state, _ = step_coupled(state, ctrl, t_stop, v_floor)
        except DtUnderflow:
            outcome = "blew_up" if len(lps) >= 2 and lps[-1] > lps[-2] else "dt_underflow"
            break
        steps += 1
        u, v = state.u.values, state.v.values
        mass = integrate_array(grid, u)
        if mass0 > 0:
            max_drift = max(max_drift, abs(mass - mass0) / mass0)
            max_step_drift = max(max_step_drift, abs(mass - prev_mass) / mass0)
        prev_mass = mass
        lp = _lp(grid, u, p)
        lps.append(lp)
        sup_lp = max(sup_lp, lp)
        v_margin = min(v_margin, float(np.min(v)) / (math.exp(-state.t) * vmin0) - 1.0)
        umax = float(np.max(np.abs(u)))
        if umax > 0:
            min_u_rel = min(min_u_rel, float(np.min(u)) / umax)
        sampled = state.t in stops or state.t >= base.T_end
        exploded = lp >= threshold or float(np.max(v)) >= v_threshold
        done = exploded or state.t >= base.T_end
        if sampled or done or steps % record_every == 0:
            rec = record(state)
            history.append(rec)
            if sampled:
                samples[state.t] = rec
        if snapshot_every > 0 and steps % snapshot_every == 0:
            snapshots.append((state.t, u, v))
        if exploded:
            outcome = "blew_up"
            break
        if state.t >= base.T_end:
            outcome = "reached_T_end"
            break
    if history[-1].t != state.t:
        history.append(record(state))
    if snapshot_every > 0 and snapshots[-1][0] != state.t:
        snapshots.append((state.t, state.u.values, state.v.values))
    return CoupledRunReport(
        outcome=outcome,
        T_detect=state.t if outcome == "blew_up" else None,
        t_final=state.t,
        p_monitor=p,
        history=history,
        samples=samples,
        steps=steps,
        sup_u_lp=sup_lp,
        max_mass_drift=max_drift,
        max_step_mass_drift=max_step_drift,
        v_bound_margin=v_margin,
        min_u_rel=min_u_rel,
        final_state=state,
        snapshots=snapshots,
    )
