"""Cell-centred radial grids on the ball B_R(0) in R^n.

All operators are written in conservative face-flux form. The weight of cell
``i`` is ``omega * r_i**(n-1) * h``; with this weight the discrete Laplacian
and the flux divergence telescope exactly, so discrete integrals of their
outputs vanish to roundoff.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class GridMismatchError(ValueError):
    """Raised when two profiles living on different grids are combined."""


@dataclass(frozen=True)
class RadialGrid:
    n: int
    R: float
    N: int
    h: float = field(init=False, compare=False)
    centers: np.ndarray = field(init=False, compare=False, repr=False)
    face_radii: np.ndarray = field(init=False, compare=False, repr=False)
    surface_factor: float = field(init=False, compare=False, repr=False)
    weights: np.ndarray = field(init=False, compare=False, repr=False)

    def __post_init__(self) -> None:
        if int(self.n) != self.n or self.n < 3:
            raise ValueError(f"dimension n must be an integer >= 3, got {self.n}")
        if not (math.isfinite(self.R) and self.R > 0):
            raise ValueError(f"radius R must be positive, got {self.R}")
        if int(self.N) != self.N or self.N < 16:
            raise ValueError(f"cell count N must be an integer >= 16, got {self.N}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "R", float(self.R))
        object.__setattr__(self, "N", int(self.N))

        h = self.R / self.N
        idx = np.arange(self.N, dtype=np.float64)
        centers = (idx + 0.5) * h
        faces = (idx + 1.0) * h
        faces[-1] = self.R
        omega = 2.0 * math.pi ** (self.n / 2) / math.gamma(self.n / 2)
        weights = omega * centers ** (self.n - 1) * h
        for arr in (centers, faces, weights):
            arr.setflags(write=False)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "face_radii", faces)
        object.__setattr__(self, "surface_factor", omega)
        object.__setattr__(self, "weights", weights)

    @property
    def volume(self) -> float:
        """Discrete volume of the ball, i.e. ``integrate(1, 1)``."""
        return float(self.weights.sum())

    def profile(self, values) -> "Profile":
        return Profile(self, values)

    def evaluate(self, func) -> "Profile":
        """Sample ``func(r)`` at the cell centres."""
        return Profile(self, func(self.centers))


def make_grid(n: int, R: float, N: int) -> RadialGrid:
    return RadialGrid(n, R, N)


class Profile:
    """Radial field sampled at the cell centres of a :class:`RadialGrid`."""

    __slots__ = ("grid", "values")
    __array_priority__ = 100

    def __init__(self, grid: RadialGrid, values) -> None:
        vals = np.array(values, dtype=np.float64)
        if vals.ndim == 0:
            vals = np.full(grid.N, float(vals))
        if vals.shape != (grid.N,):
            raise ValueError(f"profile needs {grid.N} values, got shape {vals.shape}")
        vals.setflags(write=False)
        self.grid = grid
        self.values = vals

    def __len__(self) -> int:
        return self.grid.N

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    def __repr__(self) -> str:
        return f"Profile({self.grid!r}, min={self.values.min():.6g}, max={self.values.max():.6g})"

    def _other(self, other):
        if isinstance(other, Profile):
            check_same_grid(self, other)
            return other.values
        return other

    def __add__(self, other):
        return Profile(self.grid, self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return Profile(self.grid, self.values - self._other(other))

    def __rsub__(self, other):
        return Profile(self.grid, self._other(other) - self.values)

    def __mul__(self, other):
        return Profile(self.grid, self.values * self._other(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return Profile(self.grid, self.values / self._other(other))

    def __neg__(self):
        return Profile(self.grid, -self.values)

    def __pow__(self, p):
        return Profile(self.grid, self.values ** p)


def check_same_grid(*profiles: Profile) -> RadialGrid:
    grid = profiles[0].grid
    for p in profiles[1:]:
        if p.grid != grid:
            raise GridMismatchError(f"profiles live on different grids: {grid} vs {p.grid}")
    return grid


# --- stencils on raw arrays --------------------------------------------------
#
# The solvers call these directly to avoid wrapping every intermediate array.


def face_area_ratios(grid: RadialGrid) -> tuple[np.ndarray, np.ndarray]:
    """Return (lower, upper) coefficients a_{i-1/2}/V_i, a_{i+1/2}/V_i.

    Here a = r_face**(n-1) and V_i = r_i**(n-1) * h**2, so that
    ``(L p)_i = upper_i (p_{i+1}-p_i) - lower_i (p_i-p_{i-1})``. Both boundary
    faces carry zero flux.
    """
    n1 = grid.n - 1
    vol = grid.centers**n1 * grid.h**2
    upper = np.empty(grid.N)
    lower = np.empty(grid.N)
    upper[:-1] = grid.face_radii[:-1] ** n1 / vol[:-1]
    upper[-1] = 0.0
    lower[0] = 0.0
    lower[1:] = grid.face_radii[:-1] ** n1 / vol[1:]
    return lower, upper


def laplacian_array(grid: RadialGrid, p: np.ndarray) -> np.ndarray:
    n1 = grid.n - 1
    flux = np.zeros(grid.N + 1)
    flux[1:-1] = grid.face_radii[:-1] ** n1 * np.diff(p) / grid.h
    return (flux[1:] - flux[:-1]) / (grid.centers**n1 * grid.h)


def flux_divergence_array(grid: RadialGrid, coef: np.ndarray, potential: np.ndarray) -> np.ndarray:
    n1 = grid.n - 1
    flux = np.zeros(grid.N + 1)
    c_face = 0.5 * (coef[1:] + coef[:-1])
    flux[1:-1] = grid.face_radii[:-1] ** n1 * c_face * np.diff(potential) / grid.h
    return (flux[1:] - flux[:-1]) / (grid.centers**n1 * grid.h)


def integrate_array(grid: RadialGrid, p: np.ndarray, power: float = 1.0) -> float:
    if power == 1:
        return float(grid.weights @ p)
    if float(power).is_integer():
        return float(grid.weights @ p ** int(power))
    if np.any(p < 0):
        raise ValueError("negative values cannot be raised to a fractional power")
    return float(grid.weights @ p**power)


# --- public operations on profiles -------------------------------------------


def radial_laplacian(p: Profile) -> Profile:
    """Conservative discrete r^{1-n} (r^{n-1} p_r)_r with Neumann faces."""
    return Profile(p.grid, laplacian_array(p.grid, p.values))


def radial_flux_divergence(coef: Profile, potential: Profile) -> Profile:
    """Discrete r^{1-n} (r^{n-1} coef * potential_r)_r.

    The face value of ``coef`` is the arithmetic mean of its two neighbours;
    fluxes through r = 0 and r = R are zero.
    """
    grid = check_same_grid(coef, potential)
    return Profile(grid, flux_divergence_array(grid, coef.values, potential.values))


def integrate(p: Profile, power: float = 1.0) -> float:
    """Midpoint quadrature of the integral of ``p**power`` over the ball."""
    return integrate_array(p.grid, p.values, power)


def lp_norm(p: Profile, q: float) -> float:
    if q < 1:
        raise ValueError(f"L^q norms need q >= 1, got {q}")
    return integrate_array(p.grid, np.abs(p.values), q) ** (1.0 / q)


def linf_norm(p: Profile) -> float:
    return float(np.max(np.abs(p.values)))


def min_value(p: Profile) -> float:
    return float(np.min(p.values))


def derivative_array(grid: RadialGrid, p: np.ndarray) -> np.ndarray:
    h = grid.h
    d = np.empty_like(p, dtype=np.float64)
    d[1:-1] = (p[2:] - p[:-2]) / (2 * h)
    d[0] = (-3 * p[0] + 4 * p[1] - p[2]) / (2 * h)
    d[-1] = (3 * p[-1] - 4 * p[-2] + p[-3]) / (2 * h)
    return d


def radial_derivative(p: Profile) -> Profile:
    """Diagnostic radial derivative (centred inside, one-sided 2nd order at the ends).

    Not used by any time stepper.
    """
    return Profile(p.grid, derivative_array(p.grid, p.values))


def boundary_slope(p: Profile, points: int = 6) -> float:
    """Slope at the outer face r = R from a one-sided polynomial fit.

    A degree ``points-1`` polynomial through the last ``points`` cell values is
    differentiated at r = R.
    """
    grid = p.grid
    x = grid.centers[-points:] - grid.R
    coeffs = np.polynomial.polynomial.polyfit(x / grid.h, p.values[-points:], points - 1)
    return float(coeffs[1] / grid.h)
