"""Blow-up seeding initial data for the nonlocal limit problem.

The profile is a smoothed copy of the singular function ``S(r) = r**(-2/chi)``:
a cubic cap on ``[0, delta]``, the pure power ``R**a * r**(-a)`` up to ``R/2``
and a quintic Hermite bridge on ``[R/2, R]`` that lands on ``W(R) = 1`` with
vanishing first and second derivative.  ``a = 2/chi`` throughout.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate as sp_integrate
from scipy.interpolate import BPoly

from .grid import (
    Profile,
    RadialGrid,
    boundary_slope,
    derivative_array,
    integrate_array,
    laplacian_array,
)

AUDIT_FACTOR = 4


class BridgeMonotonicityError(ValueError):
    """The quintic bridge is not strictly decreasing for the requested (chi, R)."""


class UnresolvedCapError(ValueError):
    """The grid places too few cells inside the cap radius delta."""


@dataclass(frozen=True)
class InitialDataParams:
    chi: float
    n: int
    R: float
    M: float

    def __post_init__(self) -> None:
        for name in ("chi", "R", "M"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive and finite, got {value}")
        if int(self.n) != self.n or self.n < 3:
            raise ValueError(f"n must be an integer >= 3, got {self.n}")

    @property
    def alpha(self) -> float:
        return 2.0 / self.chi

    @property
    def delta(self) -> float:
        return min(self.M ** (-1.0 / self.alpha), self.R / 4.0)


@dataclass(frozen=True)
class ConstructionConstants:
    A: float
    lam: float
    mu: float
    # values of the closed-form expressions before any enlargement
    lam_formula: float = field(default=math.nan, compare=False)
    mu_formula: float = field(default=math.nan, compare=False)


def cap_peak_factor(alpha: float) -> float:
    return 1.0 + alpha * (alpha + 5.0) / 6.0


def cap_coefficients(alpha: float) -> tuple[float, float, float]:
    """Coefficients of 1, s**2, s**3 (s = r/delta) in the cap, before scaling."""
    return (
        cap_peak_factor(alpha),
        -alpha * (alpha + 3.0) / 2.0,
        alpha * (alpha + 2.0) / 3.0,
    )


def cap_value(r, params: InitialDataParams, nu: int = 0):
    """The cap polynomial and its first two r-derivatives (``nu`` in 0..2)."""
    a = params.alpha
    d = params.delta
    c0, c2, c3 = cap_coefficients(a)
    scale = params.R**a * d ** (-a)
    s = np.asarray(r, dtype=np.float64) / d
    if nu == 0:
        return scale * (c0 + c2 * s**2 + c3 * s**3)
    if nu == 1:
        return scale / d * (2 * c2 * s + 3 * c3 * s**2)
    if nu == 2:
        return scale / d**2 * (2 * c2 + 6 * c3 * s)
    raise ValueError("only derivatives up to second order are available")


def singular_profile(grid: RadialGrid, chi: float) -> Profile:
    if chi <= 0:
        raise ValueError(f"chi must be positive, got {chi}")
    return Profile(grid, grid.centers ** (-2.0 / chi))


class Bridge:
    """Closed-form evaluator of W(r) on (0, R] and its r-derivatives."""

    def __init__(self, chi: float, R: float) -> None:
        if chi <= 0 or R <= 0:
            raise ValueError("chi and R must be positive")
        self.chi = float(chi)
        self.R = float(R)
        self.alpha = 2.0 / chi
        r0 = R / 2.0
        left = [self._power(r0, k) for k in range(3)]
        self._poly = BPoly.from_derivatives([r0, R], [left, [1.0, 0.0, 0.0]])
        self._dpoly = [self._poly, self._poly.derivative(1), self._poly.derivative(2)]

    def _power(self, r, nu: int):
        a, R = self.alpha, self.R
        r = np.asarray(r, dtype=np.float64)
        if nu == 0:
            return R**a * r ** (-a)
        if nu == 1:
            return -a * R**a * r ** (-a - 1)
        if nu == 2:
            return a * (a + 1) * R**a * r ** (-a - 2)
        raise ValueError("only derivatives up to second order are available")

    def quintic(self, r, nu: int = 0):
        return self._dpoly[nu](np.asarray(r, dtype=np.float64))

    def __call__(self, r, nu: int = 0):
        r = np.asarray(r, dtype=np.float64)
        inner = r < self.R / 2.0
        out = np.empty_like(r)
        out[inner] = self._power(r[inner], nu)
        out[~inner] = self._dpoly[nu](r[~inner])
        return out if out.ndim else float(out)

    def audit(self, samples: int) -> None:
        """Raise if W is not strictly decreasing and >= 1 on (R/2, R)."""
        r = np.linspace(self.R / 2.0, self.R, samples + 1)[:-1]
        slope = self.quintic(r, 1)
        if np.any(slope >= 0):
            bad = r[np.argmax(slope >= 0)]
            raise BridgeMonotonicityError(
                f"quintic bridge not strictly decreasing at r={bad:.6g} (chi={self.chi}, R={self.R})"
            )
        if np.any(self.quintic(r) < 1.0):
            raise BridgeMonotonicityError(f"quintic bridge drops below 1 (chi={self.chi}, R={self.R})")


@functools.lru_cache(maxsize=None)
def _bridge(chi: float, R: float) -> Bridge:
    return Bridge(chi, R)


def bridge_profile(grid: RadialGrid, chi: float, R: float | None = None) -> Profile:
    R = grid.R if R is None else R
    W = _bridge(chi, R)
    W.audit(AUDIT_FACTOR * grid.N)
    return Profile(grid, W(grid.centers))


@functools.lru_cache(maxsize=None)
def chi_integral_of_bridge(chi: float, n: int, R: float) -> float:
    """Integral of W**chi over B_R(0).

    On (0, R/2) the integrand is R**2 r**(-2) exactly (a*chi = 2), which gives
    a closed form; the quintic part is integrated adaptively.
    """
    W = _bridge(chi, R)
    omega = 2.0 * math.pi ** (n / 2) / math.gamma(n / 2)
    inner = R**2 * (R / 2.0) ** (n - 2) / (n - 2)
    outer, _ = sp_integrate.quad(
        lambda r: W.quintic(r) ** chi * r ** (n - 1), R / 2.0, R, epsabs=1e-15, epsrel=1e-13, limit=200
    )
    return omega * (inner + outer)


@functools.lru_cache(maxsize=None)
def construction_constants(chi: float, n: int, R: float) -> ConstructionConstants:
    """A, lambda and mu; they depend on (chi, n, R) only.

    lambda and mu start from the closed forms and are enlarged (lambda up,
    mu down) until both differential inequalities hold on the cap, on the
    pure-power stretch and on a dense sampling of the bridge.
    """
    a = 2.0 / chi
    peak = cap_peak_factor(a)
    lam_formula = a * (a + 3.0) * n * R**2
    mu_formula = a * peak ** (-chi - 1.0) * R**2

    # cap: the bound holds with R**2 replaced by R**-2 as well
    lam = max(lam_formula, a * (a + 3.0) * n / R**2)
    mu = min(mu_formula, a * peak ** (-chi - 1.0) / R**2)
    # pure power r**-a on (delta, R/2): Delta W = -a(n-a-2) W**(chi+1) / R**2
    lam = max(lam, a * (n - a - 2.0) / R**2)
    mu = min(mu, a / R**2)
    W = _bridge(chi, R)
    r = np.linspace(R / 2.0, R, 20001)
    lap = W.quintic(r, 2) + (n - 1) / r * W.quintic(r, 1)
    lam = max(lam, float(np.max(-lap / W.quintic(r) ** (chi + 1))))

    A = 1.0 / chi_integral_of_bridge(chi, n, R)
    return ConstructionConstants(A=A, lam=lam, mu=mu, lam_formula=lam_formula, mu_formula=mu_formula)


def w0_function(params: InitialDataParams):
    """Closed-form w0(r) (vectorised) for the given parameters."""
    W = _bridge(params.chi, params.R)
    d = params.delta

    def w0(r, nu: int = 0):
        r = np.asarray(r, dtype=np.float64)
        out = np.where(r <= d, cap_value(np.minimum(r, d), params, nu), 0.0)
        outer = r > d
        if np.any(outer):
            out[outer] = W(r[outer], nu)
        return out

    return w0


def construct_w0(
    grid: RadialGrid, params: InitialDataParams, *, min_cap_cells: int = 8
) -> tuple[Profile, ConstructionConstants]:
    if (params.n, params.R) != (grid.n, grid.R):
        raise ValueError(f"params (n={params.n}, R={params.R}) do not match grid {grid}")
    cells = int(np.count_nonzero(grid.centers < params.delta))
    if cells < min_cap_cells:
        raise UnresolvedCapError(
            f"only {cells} cells inside delta={params.delta:.4g} (need {min_cap_cells}); refine N"
        )
    _bridge(params.chi, params.R).audit(AUDIT_FACTOR * grid.N)
    values = w0_function(params)(grid.centers)
    return Profile(grid, values), construction_constants(params.chi, params.n, params.R)


def matching_defects(params: InitialDataParams) -> tuple[float, float, float]:
    """Relative jumps of value, slope and curvature between cap and W at delta."""
    W = _bridge(params.chi, params.R)
    d = params.delta
    out = []
    for nu in range(3):
        c = float(cap_value(d, params, nu))
        w = float(W(np.array([d]), nu)[0])
        out.append(abs(c - w) / abs(w))
    return tuple(out)


@dataclass
class CheckResult:
    name: str
    passed: bool
    margin: float  # worst normalised margin; >= -tol means pass
    detail: str = ""


@dataclass
class VerificationReport:
    checks: list[CheckResult]
    peak: float
    peak_meets_M: bool  # whether w0(0) >= M literally holds

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, key: str) -> CheckResult:
        for c in self.checks:
            if c.name == key:
                return c
        raise KeyError(key)

    def summary(self) -> str:
        lines = [f"{c.name}: {'pass' if c.passed else 'FAIL'} (margin {c.margin:.3e}) {c.detail}" for c in self.checks]
        return "\n".join(lines)


def verify_w0(
    w0: Profile,
    params: InitialDataParams,
    consts: ConstructionConstants,
    tol: float = 1e-6,
) -> VerificationReport:
    """Check the six defining properties of the seeding data on the grid.

    a  w0 >= 1
    b  w0_r <= 0 inside, w0_r(R) = 0
    c  profile equals the closed form; its centre value is R**a M (1 + a(a+5)/6) or more
    d  integral of w0**chi <= 1/A
    e  Delta w0 + lam w0**(chi+1) >= 0
    f  w0_r + mu r w0**(chi+1) <= 0 for r < R/2

    Failures are reported, never raised.
    """
    grid = w0.grid
    w = w0.values
    r = grid.centers
    chi = params.chi
    a = 2.0 / chi
    checks: list[CheckResult] = []

    margin_a = float(np.min(w) - 1.0)
    checks.append(CheckResult("a_floor", margin_a >= -tol, margin_a, f"min w0 = {np.min(w):.12g}"))

    # b: sign relative to the local scale w0/r; the last cell is covered by the face slope
    dw = derivative_array(grid, w)
    sign_margin = float(np.max(dw[:-1] * r[:-1] / w[:-1]))
    slope_R = boundary_slope(w0)
    slope_margin = abs(slope_R) * grid.R / w[-1]
    passed_b = sign_margin <= tol and slope_margin <= tol
    checks.append(
        CheckResult(
            "b_monotone_neumann",
            passed_b,
            max(sign_margin, slope_margin),
            f"max r w0_r/w0 = {sign_margin:.3e}, |w0_r(R)| R/w0(R) = {slope_margin:.3e}",
        )
    )

    closed = w0_function(params)
    sample_err = float(np.max(np.abs(closed(r) - w) / w))
    peak = float(closed(np.array([0.0]))[0])
    target = params.R**a * params.M * cap_peak_factor(a)
    margin_c = peak / target - 1.0
    passed_c = margin_c >= -tol and sample_err <= 1e-12
    checks.append(
        CheckResult(
            "c_peak",
            passed_c,
            margin_c,
            f"w0(0) = {peak:.12g}, required {target:.12g}, sampling error {sample_err:.1e}",
        )
    )

    chi_int = integrate_array(grid, w, chi)
    margin_d = 1.0 - chi_int * consts.A
    checks.append(
        CheckResult("d_chi_integral", margin_d >= -tol, margin_d, f"int w0^chi = {chi_int:.12g}, 1/A = {1 / consts.A:.12g}")
    )

    react = consts.lam * w ** (chi + 1.0)
    lap = laplacian_array(grid, w)
    margin_e = float(np.min((lap + react) / react))
    checks.append(CheckResult("e_subsolution", margin_e >= -tol, margin_e, "min (Delta w0 + lam w0^(chi+1)) / (lam w0^(chi+1))"))

    inner = r < grid.R / 2.0
    comp = consts.mu * r[inner] * w[inner] ** (chi + 1.0)
    margin_f = float(np.min(-(dw[inner] + comp) / comp))
    checks.append(CheckResult("f_gradient_comparison", margin_f >= -tol, margin_f, "min -(w0_r + mu r w0^(chi+1)) / (mu r w0^(chi+1))"))

    return VerificationReport(checks=checks, peak=peak, peak_meets_M=peak >= params.M)
