"""Second-order IMEX Runge-Kutta core shared by the scalar and coupled solvers.

The scheme is the two-stage, L-stable ARS(2,2,2) pair: the linear diffusion
(+ decay) part is implicit, everything else explicit.  Both implicit stages use
the same tridiagonal matrix ``I - gamma*dt*L``, which is factored once per step.
Step-doubling supplies the local error estimate; the accepted value is the
Richardson-extrapolated one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import lapack

from .grid import RadialGrid, face_area_ratios

GAMMA = 1.0 - 1.0 / math.sqrt(2.0)
DELTA = 1.0 - 1.0 / (2.0 * GAMMA)
ORDER = 2


class DtUnderflow(RuntimeError):
    """The step controller asked for dt below dt_min."""

    def __init__(self, t: float, dt: float, dt_min: float) -> None:
        super().__init__(f"time step {dt:.3e} fell below dt_min={dt_min:.3e} at t={t:.12g}")
        self.t = t
        self.dt = dt
        self.dt_min = dt_min


@dataclass(frozen=True)
class LinearOperator:
    """``L p = diffusivity * Delta_h p - decay * p`` with Neumann faces."""

    grid: RadialGrid
    diffusivity: float = 1.0
    decay: float = 0.0

    def __post_init__(self) -> None:
        lower, upper = face_area_ratios(self.grid)
        object.__setattr__(self, "_lower", self.diffusivity * lower)
        object.__setattr__(self, "_upper", self.diffusivity * upper)

    def apply(self, p: np.ndarray) -> np.ndarray:
        lo, up = self._lower, self._upper
        out = -(lo + up + self.decay) * p
        out[1:] += lo[1:] * p[:-1]
        out[:-1] += up[:-1] * p[1:]
        return out

    def factor(self, c: float) -> Callable[[np.ndarray], np.ndarray]:
        """Return a solver for ``(I - c L) x = b``."""
        lo, up = self._lower, self._upper
        d = 1.0 + c * (lo + up + self.decay)
        dl = -c * lo[1:]
        du = -c * up[:-1]
        dl, d, du, du2, ipiv, info = lapack.dgttrf(dl, d, du)
        if info != 0:
            raise np.linalg.LinAlgError(f"tridiagonal factorisation failed (info={info})")

        def solve(b: np.ndarray) -> np.ndarray:
            x, info_s = lapack.dgttrs(dl, d, du, du2, ipiv, b)
            if info_s != 0:
                raise np.linalg.LinAlgError(f"tridiagonal solve failed (info={info_s})")
            return x

        return solve


Explicit = Callable[[float, Sequence[np.ndarray]], Sequence[np.ndarray]]


def ars222_step(
    ys: Sequence[np.ndarray],
    t: float,
    dt: float,
    ops: Sequence[LinearOperator],
    explicit: Explicit,
) -> list[np.ndarray]:
    """One ARS(2,2,2) step for the system y_k' = L_k y_k + N_k(t, y)."""
    solvers = [op.factor(GAMMA * dt) for op in ops]
    n1 = explicit(t, ys)
    y2 = [s(y + GAMMA * dt * f) for s, y, f in zip(solvers, ys, n1)]
    n2 = explicit(t + GAMMA * dt, y2)
    out = []
    for s, op, y, a, b, z in zip(solvers, ops, ys, n1, n2, y2):
        rhs = y + dt * ((1.0 - GAMMA) * op.apply(z) + DELTA * a + (1.0 - DELTA) * b)
        out.append(s(rhs))
    return out


def relative_error(fine: Sequence[np.ndarray], coarse: Sequence[np.ndarray]) -> float:
    """Cellwise relative step-doubling error estimate of the fine solution."""
    err = 0.0
    for f, c in zip(fine, coarse):
        scale = np.abs(f) + 1e-14 * float(np.max(np.abs(f))) + 1e-300
        err = max(err, float(np.max(np.abs(f - c) / scale)))
    return err / (2**ORDER - 1)


def doubled_attempt(
    ys: Sequence[np.ndarray],
    t: float,
    dt: float,
    ops: Sequence[LinearOperator],
    explicit: Explicit,
) -> tuple[list[np.ndarray], float]:
    """One full step against two half steps; returns (extrapolated y, error)."""
    coarse = ars222_step(ys, t, dt, ops, explicit)
    half = ars222_step(ys, t, 0.5 * dt, ops, explicit)
    fine = ars222_step(half, t + 0.5 * dt, 0.5 * dt, ops, explicit)
    err = relative_error(fine, coarse)
    k = 2**ORDER - 1
    return [f + (f - c) / k for f, c in zip(fine, coarse)], err


def next_dt(dt: float, err: float, rel_tol: float) -> float:
    if err <= 0.0 or not math.isfinite(err):
        return dt * (4.0 if err == 0.0 else 0.2)
    factor = 0.9 * (rel_tol / err) ** (1.0 / (ORDER + 1))
    return dt * min(4.0, max(0.2, factor))
