"""Scalar nonlocal limit problem, its local comparison problem and the v-form.

Three right-hand sides share one integrator:

``nonlocal``     w_t = Delta w + m w^(chi+1) / int w^chi
``local_power``  z_t = Delta z + c z^(chi+1)
``v_form``       v_t = Delta v - v + m v^(chi+1) / int v^chi

All carry homogeneous Neumann conditions at r = R.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .grid import (
    Profile,
    RadialGrid,
    check_same_grid,
    derivative_array,
    integrate_array,
)
from .imex import DtUnderflow, LinearOperator, ars222_step, doubled_attempt, next_dt

MODES = ("nonlocal", "local_power", "v_form")

Source = Callable[[float, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ScalarMode:
    kind: str
    coeff: float  # m for nonlocal / v_form, the constant in front of z^(chi+1) otherwise
    chi: float

    def __post_init__(self) -> None:
        if self.kind not in MODES:
            raise ValueError(f"unknown mode {self.kind!r}; expected one of {MODES}")
        if self.chi <= 0:
            raise ValueError(f"chi must be positive, got {self.chi}")
        if self.coeff < 0:
            raise ValueError(f"reaction coefficient must be nonnegative, got {self.coeff}")

    @classmethod
    def nonlocal_(cls, m: float, chi: float) -> "ScalarMode":
        return cls("nonlocal", m, chi)

    @classmethod
    def local_power(cls, coeff: float, chi: float) -> "ScalarMode":
        return cls("local_power", coeff, chi)

    @classmethod
    def v_form(cls, m: float, chi: float) -> "ScalarMode":
        return cls("v_form", m, chi)

    @property
    def decay(self) -> float:
        return 1.0 if self.kind == "v_form" else 0.0


@dataclass(frozen=True)
class ScalarState:
    w: Profile
    t: float
    mode: ScalarMode
    dt_hint: Optional[float] = field(default=None, compare=False)

    @property
    def grid(self) -> RadialGrid:
        return self.w.grid


@dataclass(frozen=True)
class StepControl:
    T_end: float
    rel_tol: float = 1e-6
    dt_init: Optional[float] = None
    dt_min: Optional[float] = None
    W_max: Optional[float] = None
    max_steps: int = 2_000_000
    safety: float = 0.5
    W_max_factor: float = 1e8

    def __post_init__(self) -> None:
        if not self.T_end > 0:
            raise ValueError(f"T_end must be positive, got {self.T_end}")
        if not 1e-12 < self.rel_tol < 1e-2:
            raise ValueError(f"rel_tol must lie in (1e-12, 1e-2), got {self.rel_tol}")
        if self.dt_min_value >= self.dt_init_value:
            raise ValueError("dt_min must be smaller than dt_init")
        if self.max_steps < 1:
            raise ValueError("max_steps must be positive")

    @property
    def dt_init_value(self) -> float:
        return self.dt_init if self.dt_init is not None else 1e-3 * self.T_end

    @property
    def dt_min_value(self) -> float:
        return self.dt_min if self.dt_min is not None else 1e-13 * self.T_end

    def threshold(self, initial_max: float) -> float:
        W_max = self.W_max if self.W_max is not None else self.W_max_factor * initial_max
        if W_max <= initial_max:
            raise ValueError(f"W_max={W_max:g} must exceed the initial max norm {initial_max:g}")
        return W_max


# --- right-hand side ----------------------------------------------------------


def _nonlocal_factor(grid: RadialGrid, w: np.ndarray, mode: ScalarMode) -> float:
    if np.any(w <= 0):
        raise ValueError(f"{mode.kind} mode needs strictly positive values")
    return mode.coeff / integrate_array(grid, w, mode.chi)


def explicit_array(grid: RadialGrid, w: np.ndarray, mode: ScalarMode) -> np.ndarray:
    """The part of the right-hand side that the integrator treats explicitly."""
    chi = mode.chi
    if mode.kind == "local_power":
        if np.any(w <= 0) and not float(chi).is_integer():
            raise ValueError("local_power mode with fractional chi needs positive values")
        return mode.coeff * w ** (chi + 1.0)
    return _nonlocal_factor(grid, w, mode) * w ** (chi + 1.0)


def reaction_term(w: Profile, mode: ScalarMode) -> Profile:
    out = explicit_array(w.grid, w.values, mode)
    if mode.kind == "v_form":
        out = out - w.values
    return Profile(w.grid, out)


def lipschitz_scale(grid: RadialGrid, w: np.ndarray, mode: ScalarMode) -> float:
    """Reaction Lipschitz scale g = (chi+1) * coeff * ||w||^chi (coeff/int w^chi if nonlocal)."""
    wmax = float(np.max(np.abs(w)))
    if mode.kind == "local_power":
        k = mode.coeff
    else:
        k = _nonlocal_factor(grid, w, mode)
    return (mode.chi + 1.0) * k * wmax**mode.chi


def _explicit_fn(grid: RadialGrid, mode: ScalarMode, source: Optional[Source]):
    if source is None:
        return lambda t, ys: [explicit_array(grid, ys[0], mode)]
    r = grid.centers
    return lambda t, ys: [explicit_array(grid, ys[0], mode) + source(t, r)]


def _operator(state: ScalarState) -> LinearOperator:
    return _operator_cached(state.grid, state.mode.decay)


_OPS: dict = {}


def _operator_cached(grid: RadialGrid, decay: float) -> LinearOperator:
    key = (grid, decay)
    op = _OPS.get(key)
    if op is None:
        op = _OPS[key] = LinearOperator(grid, 1.0, decay)
    return op


def dt_cap(state: ScalarState, ctrl: StepControl) -> float:
    g = lipschitz_scale(state.grid, state.w.values, state.mode)
    if g <= 0:
        return math.inf
    return ctrl.safety / (state.mode.chi + 1.0) / g


def step(
    state: ScalarState,
    ctrl: StepControl,
    source: Optional[Source] = None,
) -> tuple[ScalarState, float]:
    """Advance by one accepted adaptive step.

    Raises :class:`DtUnderflow` when the controller needs dt < dt_min, which
    callers interpret as imminent blow-up.
    """
    op = _operator(state)
    explicit = _explicit_fn(state.grid, state.mode, source)
    dt_min = ctrl.dt_min_value
    dt = state.dt_hint if state.dt_hint is not None else ctrl.dt_init_value
    dt = min(dt, dt_cap(state, ctrl))
    remaining = ctrl.T_end - state.t
    last = dt >= remaining
    if last:
        dt = remaining
    while True:
        if dt < dt_min and not last:
            raise DtUnderflow(state.t, dt, dt_min)
        (w_new,), err = doubled_attempt([state.w.values], state.t, dt, [op], explicit)
        if err <= ctrl.rel_tol and np.all(np.isfinite(w_new)):
            hint = next_dt(dt, err, ctrl.rel_tol)
            if last:
                hint = max(hint, state.dt_hint or hint)
            t_new = ctrl.T_end if last else state.t + dt
            return ScalarState(Profile(state.grid, w_new), t_new, state.mode, hint), dt
        dt = next_dt(dt, err, ctrl.rel_tol) if np.isfinite(err) else 0.2 * dt
        last = False


def advance_fixed(
    state: ScalarState,
    dt: float,
    steps: int,
    source: Optional[Source] = None,
) -> ScalarState:
    """Plain ARS(2,2,2) with a constant step; used by convergence studies."""
    op = _operator(state)
    explicit = _explicit_fn(state.grid, state.mode, source)
    w = state.w.values
    t = state.t
    for i in range(steps):
        (w,) = ars222_step([w], t, dt, [op], explicit)
        t = state.t + (i + 1) * dt
    return ScalarState(Profile(state.grid, w), t, state.mode)


# --- diagnostics --------------------------------------------------------------


def k_of(state: ScalarState) -> float:
    if state.mode.kind == "local_power":
        raise ValueError("k(t) is only defined for the nonlocal problem")
    return state.mode.coeff / integrate_array(state.grid, state.w.values, state.mode.chi)


def J_profile(state: ScalarState, eta: float, q: float) -> Profile:
    """J = w_r + eta r w^q on the whole grid; monitors look at r < R/2 only."""
    if eta <= 0:
        raise ValueError("eta must be positive")
    if not 1.0 < q < state.mode.chi + 1.0:
        raise ValueError(f"q must lie in (1, chi+1), got {q}")
    grid = state.grid
    w = state.w.values
    return Profile(grid, derivative_array(grid, w) + eta * grid.centers * w**q)


def J_max_relative(state: ScalarState, eta: float, q: float) -> float:
    """max over r < R/2 of J / (eta r w^q); nonpositive means J <= 0 there."""
    grid = state.grid
    w = state.w.values
    inner = grid.centers < grid.R / 2.0
    pos = eta * grid.centers[inner] * w[inner] ** q
    J = derivative_array(grid, w)[inner] + pos
    return float(np.max(J / pos))


def default_q(chi: float, n: int) -> float:
    """Midpoint of (2 chi / n + 1, chi + 1)."""
    return 0.5 * ((2.0 * chi / n + 1.0) + (chi + 1.0))


def default_eta(mu: float, lam: float, chi: float, q: float) -> float:
    return min(mu, (chi + 1.0 - q) * lam / q)


def ode_minorant_blowup_time(M_eff: float, lam: float, chi: float) -> float:
    """Upper bound M_eff^(-chi) / (lam chi) on the comparison blow-up time."""
    if M_eff <= 0 or lam <= 0 or chi <= 0:
        raise ValueError("M_eff, lam and chi must be positive")
    return M_eff ** (-chi) / (lam * chi)


# --- runs ---------------------------------------------------------------------


@dataclass(frozen=True)
class Monitors:
    p_norms: tuple[float, ...] = (2.0,)
    J: Optional[tuple[float, float]] = None  # (eta, q)
    window_lambda: Optional[float] = None
    record_every: int = 1
    snapshot_every: int = 0  # 0 disables; otherwise every k accepted steps plus first and last


@dataclass
class HistoryRecord:
    t: float
    linf: float
    lp: tuple[float, ...]
    k: float
    J_rel: float
    min_value: float
    dt: float


@dataclass
class BlowupReport:
    outcome: str  # "blew_up" | "reached_T_end" | "step_limit" | "dt_underflow"
    T_detect: Optional[float]
    t_final: float
    history: list[HistoryRecord]
    k_trace: np.ndarray  # (steps+1, 2) array of (t, k) at every accepted step
    linf_trace: np.ndarray  # (steps+1, 2) array of (t, ||w||_inf)
    T1_detect: Optional[float]
    extrapolated_T: Optional[float]
    steps: int
    min_floor: float  # smallest value of min w over accepted steps
    max_Jrel: float  # largest J/(eta r w^q) while k >= 2 lam (nan if not monitored)
    max_derivative_rel: float  # largest r w_r / w over accepted steps, cells 0..N-2
    final_state: ScalarState
    J_first_positive: Optional[tuple[float, float]] = None  # (t, ||w||_inf) when J > 0 first seen
    p_norms: tuple[float, ...] = ()
    snapshots: list[tuple[float, np.ndarray]] = field(default_factory=list)

    @property
    def blew_up(self) -> bool:
        return self.outcome == "blew_up"


def _record(state: ScalarState, monitors: Monitors, k: float, dt: float) -> HistoryRecord:
    grid = state.grid
    w = state.w.values
    lp = tuple(integrate_array(grid, np.abs(w), p) ** (1.0 / p) for p in monitors.p_norms)
    J_rel = J_max_relative(state, *monitors.J) if monitors.J is not None else math.nan
    return HistoryRecord(state.t, float(np.max(np.abs(w))), lp, k, J_rel, float(np.min(w)), dt)


def extrapolate_blowup_time(t: np.ndarray, linf: np.ndarray, chi: float) -> Optional[float]:
    """Zero of the least-squares line through ||w||^(-chi) vs t over the last decade of growth."""
    if t.size < 3:
        return None
    sel = linf >= linf[-1] / 10.0
    # keep the final monotone stretch only
    idx = np.nonzero(sel)[0]
    start = idx[0]
    for j in range(idx.size - 1, 0, -1):
        if idx[j] - idx[j - 1] != 1:
            start = idx[j]
            break
    tt = t[start:]
    yy = linf[start:] ** (-chi)
    if tt.size < 3:
        return None
    slope, intercept = np.polyfit(tt, yy, 1)
    if slope >= 0:
        return None
    return float(-intercept / slope)


def run(
    state0: ScalarState,
    ctrl: StepControl,
    monitors: Monitors = Monitors(),
    source: Optional[Source] = None,
) -> BlowupReport:
    state = state0
    grid = state.grid
    mode = state.mode
    has_k = mode.kind != "local_power"
    W_max = ctrl.threshold(float(np.max(np.abs(state.w.values))))

    def k_now(s):
        return k_of(s) if has_k else math.nan

    k0 = k_now(state)
    history = [_record(state, monitors, k0, 0.0)]
    ts = [state.t]
    linfs = [history[0].linf]
    ks = [k0]
    min_floor = float(np.min(state.w.values))
    max_dr = float(np.max((derivative_array(grid, state.w.values) * grid.centers / state.w.values)[:-1]))
    lam2 = 2.0 * monitors.window_lambda if monitors.window_lambda is not None else None
    in_window = lam2 is None or (has_k and k0 >= lam2)
    T1 = None if in_window or lam2 is None else state.t
    max_Jrel = history[0].J_rel if (monitors.J is not None and in_window) else math.nan
    J_first_positive = (state.t, history[0].linf) if max_Jrel > 0 else None

    snapshots = [(state.t, state.w.values)] if monitors.snapshot_every > 0 else []
    outcome = "step_limit"
    steps = 0
    while steps < ctrl.max_steps:
        try:
            state, dt = step(state, ctrl, source)
        except DtUnderflow:
            rising = len(linfs) >= 2 and linfs[-1] > linfs[-2]
            outcome = "blew_up" if rising else "dt_underflow"
            break
        steps += 1
        w = state.w.values
        linf = float(np.max(np.abs(w)))
        k = k_now(state)
        ts.append(state.t)
        linfs.append(linf)
        ks.append(k)
        min_floor = min(min_floor, float(np.min(w)))
        max_dr = max(max_dr, float(np.max((derivative_array(grid, w) * grid.centers / w)[:-1])))
        if lam2 is not None and in_window and not (k >= lam2):
            in_window = False
            T1 = state.t
        if monitors.J is not None and in_window:
            J_rel = J_max_relative(state, *monitors.J)
            max_Jrel = J_rel if math.isnan(max_Jrel) else max(max_Jrel, J_rel)
            if J_rel > 0 and J_first_positive is None:
                J_first_positive = (state.t, linf)
        done = linf >= W_max or state.t >= ctrl.T_end
        if done or steps % monitors.record_every == 0:
            history.append(_record(state, monitors, k, dt))
        if monitors.snapshot_every > 0 and steps % monitors.snapshot_every == 0:
            snapshots.append((state.t, state.w.values))
        if linf >= W_max:
            outcome = "blew_up"
            break
        if state.t >= ctrl.T_end:
            outcome = "reached_T_end"
            break

    if history[-1].t != state.t:
        history.append(_record(state, monitors, ks[-1], 0.0))
    if monitors.snapshot_every > 0 and snapshots[-1][0] != state.t:
        snapshots.append((state.t, state.w.values))
    t_arr = np.asarray(ts)
    linf_arr = np.asarray(linfs)
    T_detect = state.t if outcome == "blew_up" else None
    extrap = extrapolate_blowup_time(t_arr, linf_arr, mode.chi) if outcome == "blew_up" else None
    return BlowupReport(
        outcome=outcome,
        T_detect=T_detect,
        t_final=state.t,
        history=history,
        k_trace=np.column_stack([t_arr, np.asarray(ks)]),
        linf_trace=np.column_stack([t_arr, linf_arr]),
        T1_detect=T1,
        extrapolated_T=extrap,
        steps=steps,
        min_floor=min_floor,
        max_Jrel=max_Jrel,
        max_derivative_rel=max_dr,
        final_state=state,
        J_first_positive=J_first_positive,
        p_norms=monitors.p_norms,
        snapshots=snapshots,
    )


@dataclass(frozen=True)
class T1Result:
    T1: Optional[float]  # None: window held on [0, T0]
    T0: float


def detect_T1(report: BlowupReport, lam: float, m: Optional[float] = None) -> T1Result:
    """First time with k < 2 lam inside [0, T0], T0 = min(m^-2, end of run)."""
    m = m if m is not None else report.final_state.mode.coeff
    horizon = report.T_detect if report.T_detect is not None else report.t_final
    T0 = min(m**-2, horizon)
    t = report.k_trace[:, 0]
    k = report.k_trace[:, 1]
    bad = np.nonzero((t <= T0) & ~(k >= 2.0 * lam))[0]
    return T1Result(float(t[bad[0]]) if bad.size else None, T0)


# --- synchronised comparison runs --------------------------------------------


@dataclass
class ComparisonReport:
    outcome: str  # which run terminated first and why
    t_final: float
    steps: int
    min_gap_rel: float  # min over steps inside the window of min_i (w - z) / ||w||_inf
    window_closed_at: Optional[float]
    times: np.ndarray
    gaps: np.ndarray
    k_trace: np.ndarray
    w_report_linf: np.ndarray
    z_report_linf: np.ndarray

    def passed(self, tol: float = 1e-6) -> bool:
        return self.min_gap_rel >= -tol


def run_comparison(
    w_state: ScalarState,
    z_state: ScalarState,
    ctrl: StepControl,
    lam: float,
) -> ComparisonReport:
    """Step the nonlocal w and the local z (coefficient 2 lam) on common time points."""
    check_same_grid(w_state.w, z_state.w)
    if w_state.mode.kind != "nonlocal" or z_state.mode.kind != "local_power":
        raise ValueError("comparison needs a nonlocal w and a local_power z")
    grid = w_state.grid
    ops = [_operator(w_state), _operator(z_state)]
    f_w = _explicit_fn(grid, w_state.mode, None)
    f_z = _explicit_fn(grid, z_state.mode, None)

    def explicit(t, ys):
        return [f_w(t, ys[:1])[0], f_z(t, ys[1:])[0]]

    W_max = ctrl.threshold(float(np.max(w_state.w.values)))
    dt_min = ctrl.dt_min_value
    w, z, t = w_state.w.values, z_state.w.values, w_state.t
    dt = ctrl.dt_init_value
    times, gaps, ks, wl, zl = [t], [], [], [float(np.max(w))], [float(np.max(z))]
    k = w_state.mode.coeff / integrate_array(grid, w, w_state.mode.chi)
    ks.append(k)
    gaps.append(float(np.min(w - z)) / float(np.max(w)))
    in_window = k >= 2 * lam
    window_closed = None if in_window else t
    min_gap = gaps[0] if in_window else math.inf
    outcome = "step_limit"
    steps = 0
    while steps < ctrl.max_steps:
        ws = replace(w_state, w=Profile(grid, w), t=t)
        zs = replace(z_state, w=Profile(grid, z), t=t)
        dt = min(dt, dt_cap(ws, ctrl), dt_cap(zs, ctrl))
        last = dt >= ctrl.T_end - t
        if last:
            dt = ctrl.T_end - t
        while True:
            if dt < dt_min and not last:
                break
            (w_new, z_new), err = doubled_attempt([w, z], t, dt, ops, explicit)
            if err <= ctrl.rel_tol and np.all(np.isfinite(w_new)) and np.all(np.isfinite(z_new)):
                break
            dt = next_dt(dt, err, ctrl.rel_tol) if np.isfinite(err) else 0.2 * dt
            last = False
        if dt < dt_min and not last:
            outcome = "w_blew_up" if wl[-1] > wl[-2 if len(wl) > 1 else -1] else "dt_underflow"
            break
        steps += 1
        t = ctrl.T_end if last else t + dt
        w, z = w_new, z_new
        dt = next_dt(dt, err, ctrl.rel_tol)
        k = w_state.mode.coeff / integrate_array(grid, w, w_state.mode.chi)
        wmax = float(np.max(w))
        times.append(t)
        ks.append(k)
        wl.append(wmax)
        zl.append(float(np.max(z)))
        gap = float(np.min(w - z)) / wmax
        gaps.append(gap)
        if in_window and k >= 2 * lam:
            min_gap = min(min_gap, gap)
        elif in_window:
            in_window = False
            window_closed = t
        if wmax >= W_max:
            outcome = "w_blew_up"
            break
        if zl[-1] >= W_max:
            outcome = "z_blew_up"
            break
        if t >= ctrl.T_end:
            outcome = "reached_T_end"
            break
    return ComparisonReport(
        outcome=outcome,
        t_final=t,
        steps=steps,
        min_gap_rel=min_gap,
        window_closed_at=window_closed,
        times=np.asarray(times),
        gaps=np.asarray(gaps),
        k_trace=np.column_stack([times, ks]),
        w_report_linf=np.asarray(wl),
        z_report_linf=np.asarray(zl),
    )
