"""Mean-field thermodynamics of the quartic Curie-Weiss magnet.

Units: k_B = 1 and energies in units of the quartet coupling J. The free
energy per spin in the sector ``s = +-1`` of the tested spin is

    F(m)/N = -J m^4 / 4 - g s m - T S(m)

with S the binary mixing entropy. Its derivative is
``F'(m) = -J m^3 - g s + T atanh(m)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, NoBarrierRegime, NoFerromagneticPhase, ValidationError

EDGE = 1.0 - 1e-15
ROOT_GRID = 2001
ROOT_XTOL = 1e-12


@dataclass(frozen=True)
class ModelParams:
    """Parameters of the measurement model in natural units (hbar = k_B = J = 1).

    ``gamma`` is the dimensionless magnet-bath coupling, ``Gamma`` the Debye
    cutoff, ``g`` the system-apparatus coupling, ``n`` the number of tested
    spins and ``b_x`` a transverse field on the tested spin.
    """

    N: int = 100
    J: float = 1.0
    T: float = 0.2
    gamma: float = 0.01
    Gamma: float = 10.0
    g: float = 0.05
    n: int = 1
    b_x: float = 0.0

    def __post_init__(self):
        problems = self.violations()
        if problems:
            raise ValidationError("; ".join(problems))

    def violations(self) -> list[str]:
        out = []
        if not isinstance(self.N, (int, np.integer)) or self.N < 2:
            out.append(f"N must be an integer >= 2 (got {self.N!r})")
        if not self.J > 0:
            out.append(f"J must be > 0 (got {self.J!r})")
        if not self.T > 0:
            out.append(f"T must be > 0 (got {self.T!r})")
        if not self.gamma > 0:
            out.append(f"gamma must be > 0 (got {self.gamma!r})")
        if not self.Gamma > 0:
            out.append(f"Gamma must be > 0 (got {self.Gamma!r})")
        if not self.g >= 0:
            out.append(f"g must be >= 0 (got {self.g!r})")
        if not isinstance(self.n, (int, np.integer)) or self.n < 1:
            out.append(f"n must be an integer >= 1 (got {self.n!r})")
        if not math.isfinite(self.b_x):
            out.append(f"b_x must be finite (got {self.b_x!r})")
        return out

    @property
    def theta(self) -> float:
        """Phenomenological per-spin bath damping time, 1/(gamma T)."""
        return 1.0 / (self.gamma * self.T)


def _check_m(m):
    m = np.asarray(m, dtype=float)
    if np.any(np.abs(m) > 1) or np.any(np.isnan(m)):
        raise DomainError("magnetization must lie in [-1, 1]")
    return m


def _xlogx(x):
    x = np.asarray(x, dtype=float)
    return np.where(x > 0, x * np.log(np.where(x > 0, x, 1.0)), 0.0)


def entropy_per_spin(m):
    """Binary mixing entropy S(m) per spin, with 0 ln 0 = 0."""
    m = _check_m(m)
    s = -(_xlogx((1 + m) / 2) + _xlogx((1 - m) / 2))
    return s[()] if s.ndim == 0 else s


def free_energy_per_spin(m, T, g, s=1, J=1.0):
    m = _check_m(m)
    if not T > 0:
        raise DomainError("T must be > 0")
    m2 = m * m
    f = -J * (m2 * m2) / 4 - g * s * m - T * entropy_per_spin(m)
    return f[()] if np.ndim(f) == 0 else f


def dfree_energy(m, T, g, s=1, J=1.0):
    """F'(m) per spin; atanh arguments are clamped to +-(1 - 1e-15)."""
    m = np.clip(np.asarray(m, dtype=float), -EDGE, EDGE)
    return -J * (m * m * m) - g * s + T * np.arctanh(m)


def d2free_energy(m, T, J=1.0):
    m = np.clip(np.asarray(m, dtype=float), -EDGE, EDGE)
    return -3 * J * m**2 + T / (1 - m**2)


class StationaryPoint(NamedTuple):
    m: float
    kind: str  # "minimum" or "maximum"


def stationary_points(T, g, s=1, J=1.0) -> list[StationaryPoint]:
    """All stationary points of F(m) on (-1, 1), in increasing order.

    Sign changes of F' are bracketed on a fixed grid and refined by Brent's
    method. Two roots closer than the grid spacing (right at a spinodal) can
    be missed.
    """
    if not T > 0:
        raise DomainError("T must be > 0")
    grid = np.linspace(-1.0, 1.0, ROOT_GRID)
    grid[0], grid[-1] = -EDGE, EDGE
    d = dfree_energy(grid, T, g, s, J)

    roots = [float(grid[i]) for i in np.flatnonzero(d == 0)]
    for i in np.flatnonzero(d[:-1] * d[1:] < 0):
        roots.append(
            brentq(dfree_energy, grid[i], grid[i + 1], args=(T, g, s, J), xtol=ROOT_XTOL)
        )
    roots.sort()
    out = []
    for r in roots:
        curv = float(d2free_energy(r, T, J))
        if curv == 0:
            continue
        out.append(StationaryPoint(r, "minimum" if curv > 0 else "maximum"))
    return out


def inflection_points(T, J=1.0) -> tuple[float, float]:
    """The two positive roots m1 < m2 of 3 J m^2 (1 - m^2) = T.

    Between them F'' < 0. They exist only for T < 3J/4.
    """
    if not T > 0:
        raise DomainError("T must be > 0")
    disc = 1 - 4 * T / (3 * J)
    if disc <= 0:
        raise NoBarrierRegime(f"F'' > 0 everywhere for T >= 0.75 J (T = {T})")
    root = math.sqrt(disc)
    # stable form of (1 - root)/2 for the smaller root
    m1_sq = (2 * T / (3 * J)) / (1 + root)
    m2_sq = (1 + root) / 2
    return math.sqrt(m1_sq), math.sqrt(m2_sq)


def ferromagnetic_magnetization(T, g=0.0, s=1, J=1.0) -> float:
    """Magnetization m_F of the ferromagnetic minimum aligned with sector ``s``.

    The minimum lies beyond the outer inflection point m2; it is the solution
    of m = tanh((J m^3 + g s)/T) nearest |m| = 1.
    """
    try:
        _, m2 = inflection_points(T, J)
    except NoBarrierRegime:
        raise NoFerromagneticPhase(f"no ferromagnetic phase at T = {T}") from None
    # work in the frame x = s m, where the field is +g
    def dx(x):
        return float(dfree_energy(x, T, g, 1, J))

    if dx(m2) >= 0:
        raise NoFerromagneticPhase(
            f"no ferromagnetic minimum at T = {T}, g = {g}, s = {s}"
        )
    x = brentq(dx, m2, EDGE, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    return s * x


def critical_coupling(T, J=1.0) -> float:
    """Smallest coupling at which the barrier between m = 0 and +m_F vanishes.

    At g_c the paramagnetic minimum and the barrier top merge into a double
    root of F' at the inner inflection point m*, so
    g_c = T atanh(m*) - J m*^3.
    """
    m_star, _ = inflection_points(T, J)
    return T * math.atanh(m_star) - J * m_star**3


def barrier_top(T, g=0.0, s=1, J=1.0):
    """Position of the free-energy maximum between m = 0 and the aligned
    ferromagnetic minimum, or None when the barrier is absent."""
    maxima = [p.m for p in stationary_points(T, g, s, J) if p.kind == "maximum" and p.m * s > 0]
    if not maxima:
        return None
    return min(maxima, key=abs)


@dataclass(frozen=True)
class FreeEnergyCurve:
    m_grid: np.ndarray
    f_values: np.ndarray
    T: float
    g: float
    s: int
    J: float = 1.0
    header: tuple = field(default=("m", "F_per_spin"), repr=False)

    def __post_init__(self):
        if np.any(np.diff(self.m_grid) <= 0):
            raise ValidationError("m_grid must be strictly increasing")

    def rows(self):
        return list(zip(self.m_grid.tolist(), self.f_values.tolist()))

    def comment(self) -> str:
        return f"T={self.T!r},g={self.g!r},s={self.s:+d}"

    def interior_maxima(self) -> np.ndarray:
        """Grid positions of strict local maxima of the sampled curve."""
        f = self.f_values
        idx = np.flatnonzero((f[1:-1] > f[:-2]) & (f[1:-1] > f[2:])) + 1
        return self.m_grid[idx]


def export_curve(T, g, s=1, grid_size=2001, J=1.0) -> FreeEnergyCurve:
    """Uniformly sampled F(m)/N on [-0.999999, 0.999999]."""
    if grid_size < 3:
        raise ValidationError("grid_size must be >= 3")
    n = int(grid_size)
    # integer numerators keep the grid exactly antisymmetric
    m = 0.999999 * ((2 * np.arange(n) - (n - 1)) / (n - 1))
    return FreeEnergyCurve(m, free_energy_per_spin(m, T, g, s, J), T, g, s, J)
