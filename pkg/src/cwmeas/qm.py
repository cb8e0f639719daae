"""Spin-1/2 density matrices and ensemble weights.

Arithmetic is written generically so that ``fractions.Fraction`` entries stay
exact through :func:`mix` and :func:`merge_frequencies`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple, Sequence

import numpy as np

from .errors import ValidationError

TOL = 1e-12


@dataclass(frozen=True)
class SpinDensityMatrix:
    """Density matrix of the tested spin in the s_z basis.

    Only ``r_ud`` is stored off the diagonal; ``r_du`` is its conjugate, so the
    matrix is Hermitian by construction. The diagonal is stored in full so that
    :func:`validate` can diagnose trace violations of hand-built matrices.
    """

    r_uu: float
    r_dd: float
    r_ud: complex = 0.0

    @property
    def r_du(self) -> complex:
        return complex(self.r_ud).conjugate()

    def to_array(self) -> np.ndarray:
        return np.array(
            [[self.r_uu, self.r_ud], [self.r_du, self.r_dd]], dtype=complex
        )

    @property
    def bloch(self) -> tuple[float, float, float]:
        r_ud = complex(self.r_ud)
        return (2 * r_ud.real, -2 * r_ud.imag, float(self.r_uu - self.r_dd))

    def diagonal(self) -> tuple[float, float]:
        return (self.r_uu, self.r_dd)

    def is_valid(self) -> bool:
        return not validate(self)

    @classmethod
    def from_array(cls, a) -> "SpinDensityMatrix":
        a = np.asarray(a, dtype=complex)
        if a.shape != (2, 2):
            raise ValidationError(f"expected a 2x2 matrix, got shape {a.shape}")
        if abs(a[1, 0] - np.conj(a[0, 1])) > TOL:
            raise ValidationError("matrix is not Hermitian")
        return cls(float(a[0, 0].real), float(a[1, 1].real), complex(a[0, 1]))

    @classmethod
    def maximally_mixed(cls) -> "SpinDensityMatrix":
        return cls(0.5, 0.5, 0.0)


class Violation(NamedTuple):
    invariant: str
    magnitude: float


def pure_state(direction: Sequence[float]) -> SpinDensityMatrix:
    """Projector onto the spin-1/2 state polarized along the unit vector ``direction``."""
    nx, ny, nz = (float(c) for c in direction)
    norm = math.sqrt(nx * nx + ny * ny + nz * nz)
    if abs(norm - 1.0) > 1e-9:
        raise ValidationError(f"direction must be a unit vector, |n| = {norm!r}")
    return SpinDensityMatrix((1 + nz) / 2, (1 - nz) / 2, complex(nx, -ny) / 2)


def mix(rho1: SpinDensityMatrix, rho2: SpinDensityMatrix, lam) -> SpinDensityMatrix:
    """Convex combination ``lam * rho1 + (1 - lam) * rho2``."""
    if not 0 <= lam <= 1:
        raise ValidationError(f"lambda must lie in [0, 1], got {lam!r}")
    mu = 1 - lam
    return SpinDensityMatrix(
        lam * rho1.r_uu + mu * rho2.r_uu,
        lam * rho1.r_dd + mu * rho2.r_dd,
        lam * rho1.r_ud + mu * rho2.r_ud,
    )


def validate(rho) -> list[Violation]:
    """List the density-matrix invariants violated by ``rho``.

    ``rho`` may be a :class:`SpinDensityMatrix` or any 2x2 array-like. An empty
    list means the matrix is a valid state.
    """
    if isinstance(rho, SpinDensityMatrix):
        r_uu, r_dd = float(rho.r_uu), float(rho.r_dd)
        r_ud = complex(rho.r_ud)
        herm = 0.0
        imag_diag = 0.0
    else:
        a = np.asarray(rho, dtype=complex)
        if a.shape != (2, 2):
            raise ValidationError(f"expected a 2x2 matrix, got shape {a.shape}")
        r_uu, r_dd = float(a[0, 0].real), float(a[1, 1].real)
        r_ud = complex(a[0, 1])
        herm = float(abs(a[1, 0] - np.conj(a[0, 1])))
        imag_diag = float(max(abs(a[0, 0].imag), abs(a[1, 1].imag)))

    out = []
    herm = max(herm, imag_diag)
    if herm > TOL:
        out.append(Violation("hermiticity", herm))
    trace_err = abs(r_uu + r_dd - 1.0)
    if trace_err > TOL:
        out.append(Violation("trace", trace_err))
    # both the diagonal and the determinant must be non-negative
    neg = max(-r_uu, -r_dd, abs(r_ud) ** 2 - r_uu * r_dd)
    if neg > TOL:
        out.append(Violation("positivity", neg))
    return out


class EnsembleWeights(tuple):
    """Normalized outcome frequencies ``q_i`` of an ensemble split.

    A tuple subclass; entries may be floats or ``Fraction`` objects.
    """

    def __new__(cls, q):
        q = tuple(q)
        if not q:
            raise ValidationError("weights must not be empty")
        if any(x < 0 for x in q):
            raise ValidationError(f"weights must be non-negative: {q!r}")
        if abs(sum(q) - 1) > TOL:
            raise ValidationError(f"weights must sum to 1, got {float(sum(q))!r}")
        return super().__new__(cls, q)

    def __repr__(self):
        return f"EnsembleWeights({tuple(self)!r})"


def merge_frequencies(q1, q2, n1: int, n2: int) -> EnsembleWeights:
    """Weights of the ensemble obtained by pooling ``n1`` members with weights
    ``q1`` and ``n2`` members with weights ``q2``.

    The pooled weights are ``lam*q1 + (1-lam)*q2`` with ``lam = n1/(n1+n2)``.
    Integer counts with integer or ``Fraction`` weights give an exact result.
    """
    q1, q2 = EnsembleWeights(q1), EnsembleWeights(q2)
    if len(q1) != len(q2):
        raise ValidationError(f"dimension mismatch: {len(q1)} vs {len(q2)} outcomes")
    if n1 < 0 or n2 < 0:
        raise ValidationError("member counts must be non-negative")
    total = n1 + n2
    if total == 0:
        raise ValidationError("cannot merge two empty ensembles")
    exact = all(isinstance(x, (int, Fraction)) for x in (*q1, *q2, n1, n2))
    lam = Fraction(n1, total) if exact else n1 / total
    return EnsembleWeights(lam * a + (1 - lam) * b for a, b in zip(q1, q2))
