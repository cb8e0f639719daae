"""Off-diagonal (truncation) dynamics of the tested spin.

Under ``H_SA = -g s_z M`` each of the N magnet spins, prepared unpolarized,
multiplies ``r_ud`` by ``cos(2 g t)``. Times are in units of hbar/J.

The bath is modelled phenomenologically: every cosine is additionally damped
by ``exp(-t/theta)``. No microscopic spin-boson derivation stands behind
``theta``; :meth:`DephasingParams.from_model` uses ``theta = 1/(gamma T)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigurationError, DomainError, ValidationError


@dataclass(frozen=True)
class DephasingParams:
    N: int
    g: float
    n: int = 1
    theta: Optional[float] = None

    def __post_init__(self):
        bad = []
        if self.N < 1:
            bad.append("N must be >= 1")
        if not self.g > 0:
            bad.append("g must be > 0")
        if self.n < 1:
            bad.append("n must be >= 1")
        if self.theta is not None and not self.theta > 0:
            bad.append("theta must be > 0")
        if bad:
            raise ValidationError("; ".join(bad))

    @classmethod
    def from_model(cls, params, theta=None) -> "DephasingParams":
        return cls(params.N, params.g, params.n, params.theta if theta is None else theta)

    @property
    def tau(self) -> float:
        """Gaussian decay time 1/(g sqrt(2N))."""
        return 1.0 / (self.g * math.sqrt(2 * self.N))

    @property
    def t1(self) -> float:
        """First recurrence time pi/g."""
        return math.pi / self.g

    def _need_theta(self) -> float:
        if self.theta is None:
            raise ConfigurationError("no bath configured: theta is required")
        return self.theta


def _single_spin(p: DephasingParams):
    if p.n != 1:
        raise DomainError("this quantity is defined for a single tested spin (n = 1)")


def truncation_factor(p: DephasingParams, t):
    """r_ud(t)/r_ud(0) = cos^N(2 g t) for pure dephasing."""
    _single_spin(p)
    return np.cos(2 * p.g * np.asarray(t, dtype=float)) ** p.N


def gaussian_envelope(p: DephasingParams, t):
    t = np.asarray(t, dtype=float)
    return np.exp(-((t / p.tau) ** 2))


def recurrence_times(p: DephasingParams, k_max: int) -> np.ndarray:
    if k_max < 1:
        raise ValidationError("k_max must be >= 1")
    _single_spin(p)
    return np.arange(1, k_max + 1) * math.pi / p.g


def damped_truncation_factor(p: DephasingParams, t):
    """[cos(2 g t) exp(-t/theta)]^N."""
    theta = p._need_theta()
    _single_spin(p)
    t = np.asarray(t, dtype=float)
    return (np.cos(2 * p.g * t) * np.exp(-t / theta)) ** p.N


def bath_onset_time(p: DephasingParams) -> float:
    """t_B = theta/N, where the collective damping exponent N t/theta reaches 1."""
    return p._need_theta() / p.N


def recurrences_suppressed(p: DephasingParams) -> bool:
    """True when the bath sets in before the first recurrence (t_B < t_1)."""
    return bath_onset_time(p) < p.t1


def correlation_cascade(p: DephasingParams, k: int, t):
    """Magnitude of the S-M correlation involving k magnet spins, per |r_ud(0)|.

    The correlation <|up><down| sigma_z^(1)...sigma_z^(k)> has modulus
    |r_ud(0)| |sin 2gt|^k |cos 2gt|^(N-k); k = 0 gives back the truncation
    factor.
    """
    _single_spin(p)
    if not 1 <= k <= p.N:
        raise DomainError(f"k must lie in [1, N={p.N}], got {k}")
    x = 2 * p.g * np.asarray(t, dtype=float)
    return np.abs(np.sin(x)) ** k * np.abs(np.cos(x)) ** (p.N - k)


def cascade_peak_time(p: DephasingParams, k: int) -> float:
    """First maximum of :func:`correlation_cascade`: tan^2(2 g t*) = k/(N-k)."""
    if not 1 <= k < p.N:
        raise DomainError(f"k must lie in [1, N), got {k}")
    return math.atan(math.sqrt(k / (p.N - k))) / (2 * p.g)


def allowed_eigenvalues(n: int) -> np.ndarray:
    """Spectrum {-1, -1+2/n, ..., +1} of S = (1/n) sum_i s_z^(i)."""
    return (2 * np.arange(n + 1) - n) / n


def collective_truncation_factor(p: DephasingParams, s, s_prime, t):
    """cos^N(g (s - s') t): decay of the (s, s') block when measuring the mean
    z-polarization of n tested spins."""
    for v in (s, s_prime):
        k = (v + 1) * p.n / 2
        if abs(v) > 1 + 1e-12 or abs(k - round(k)) > 1e-9:
            raise DomainError(f"{v!r} is not an eigenvalue of S for n = {p.n}")
    if abs(s - s_prime) < 1e-12:
        raise DomainError("s and s' must differ")
    return np.cos(p.g * (s - s_prime) * np.asarray(t, dtype=float)) ** p.N


def characteristic_time(p: DephasingParams) -> float:
    """Truncation time n/(g sqrt(2N)) of adjacent collective eigenvalues."""
    return p.n / (p.g * math.sqrt(2 * p.N))


def time_series(p: DephasingParams, t) -> tuple[list[str], list[tuple]]:
    """Columns t, exact, gaussian and (with a bath) damped, for CSV export."""
    t = np.asarray(t, dtype=float)
    cols = {"t": t, "exact": truncation_factor(p, t), "gaussian": gaussian_envelope(p, t)}
    if p.theta is not None:
        cols["damped"] = damped_truncation_factor(p, t)
    header = list(cols)
    rows = list(zip(*(c.tolist() for c in cols.values())))
    return header, rows
