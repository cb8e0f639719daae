"""Small-N brute-force checks of the closed-form dephasing results.

The magnet starts unpolarized, i.e. every one of the 2^N sigma_z
configurations with weight 2^-N. Spin operators of the tested spin are Pauli
matrices (eigenvalues +-1), and

    H = -b_x s_x - g s_z M - J M^4 / (4 N^3)

with M the total magnet magnetization. Nothing here imports the dephasing
module; the tests compare the two.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import comb

import numpy as np

from .errors import DomainError, StepSizeError
from .qm import SpinDensityMatrix

MAX_ENUM_N = 20
MAX_CORR_N = 16
MAX_CORR_K = 3
MAX_SECTOR_N = 12
NORM_GUARD = 1e-8


@lru_cache(maxsize=None)
def _configurations(N: int) -> np.ndarray:
    """sigma_z values (+-1) of all 2^N configurations, shape (2^N, N), int8."""
    c = np.arange(2**N, dtype=np.int64)[:, None]
    bits = (c >> np.arange(N)) & 1
    return (2 * bits - 1).astype(np.int8)


def _magnetizations(N: int) -> np.ndarray:
    return _configurations(N).sum(axis=1, dtype=np.int64).astype(float)


def quartic_energy(M, N, J=1.0):
    M = np.asarray(M, dtype=float)
    return -J * M**4 / (4 * N**3)


def enumerate_truncation_factor(N: int, g: float, t, include_quartic: bool = False, J: float = 1.0):
    """r_ud(t)/r_ud(0) by summing over every magnet configuration.

    With ``include_quartic`` the sector phases exp(-i t (-+g M + E(M))) are
    carried separately, so the cancellation of the magnet's own energy E(M)
    is computed rather than assumed.
    """
    if not 1 <= N <= MAX_ENUM_N:
        raise DomainError(f"enumeration is limited to 1 <= N <= {MAX_ENUM_N}")
    M = _magnetizations(N)
    e = quartic_energy(M, N, J) if include_quartic else np.zeros_like(M)
    out = []
    for ti in np.atleast_1d(np.asarray(t, dtype=float)):
        amp_up = np.exp(-1j * ti * (-g * M + e))
        amp_dn = np.exp(-1j * ti * (g * M + e))
        out.append((amp_up * np.conj(amp_dn)).sum() / 2**N)
    out = np.array(out)
    return out.real[0] if np.ndim(t) == 0 else out.real


def correlation_oracle(k: int, N: int, g: float, t):
    """|<|up><down| sigma_z^(1)...sigma_z^(k)>| / |r_ud(0)| by enumeration."""
    if not 1 <= k <= MAX_CORR_K:
        raise DomainError(f"k must lie in [1, {MAX_CORR_K}]")
    if not k <= N <= MAX_CORR_N:
        raise DomainError(f"N must lie in [k, {MAX_CORR_N}]")
    conf = _configurations(N)
    M = conf.sum(axis=1, dtype=np.int64).astype(float)
    string = conf[:, :k].prod(axis=1).astype(float)
    out = []
    for ti in np.atleast_1d(np.asarray(t, dtype=float)):
        out.append(abs((string * np.exp(2j * g * ti * M)).sum()) / 2**N)
    out = np.array(out)
    return out[0] if np.ndim(t) == 0 else out


@dataclass
class SymmetricSectorState:
    """Amplitudes psi[s, k] of the tested spin (s = up, down) jointly with the
    symmetric magnet state of k up spins; norm 1.

    The Hamiltonian never flips magnet spins, so the k blocks evolve
    independently and tracing out the magnet is a sum over k.
    """

    N: int
    amplitudes: np.ndarray  # shape (2, N + 1)

    @classmethod
    def product(cls, N: int, spinor) -> "SymmetricSectorState":
        w = np.array([comb(N, k) for k in range(N + 1)], dtype=float) / 2**N
        spinor = np.asarray(spinor, dtype=complex)
        return cls(N, spinor[:, None] * np.sqrt(w)[None, :])

    @property
    def norm(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2))

    def reduced(self) -> np.ndarray:
        a = self.amplitudes
        return a @ a.conj().T


def _block_hamiltonians(N, g, b_x, J, include_quartic):
    M = 2.0 * np.arange(N + 1) - N
    e = quartic_energy(M, N, J) if include_quartic else np.zeros_like(M)
    h = np.zeros((N + 1, 2, 2), dtype=complex)
    h[:, 0, 0] = -g * M + e
    h[:, 1, 1] = g * M + e
    h[:, 0, 1] = h[:, 1, 0] = -b_x
    return h


def gauss_step_matrices(h: np.ndarray, dt: float) -> np.ndarray:
    """One step of the two-stage Gauss-Legendre method for psi' = -i H psi.

    For a linear system it is the (2,2) Pade approximant of exp(-i H dt):
    fourth order and exactly unitary.
    """
    z = -1j * dt * h
    eye = np.eye(h.shape[-1])
    z2 = z @ z
    num = eye + z / 2 + z2 / 12
    den = eye - z / 2 + z2 / 12
    return np.linalg.solve(den, num)


@dataclass
class NonidealTrajectory:
    t: np.ndarray
    r_uu: np.ndarray
    r_ud: np.ndarray
    delta: np.ndarray
    norm_drift: float

    header = ("t", "r_uu", "re_r_ud", "im_r_ud", "delta")

    def states(self):
        return [SpinDensityMatrix(float(a), float(1 - a), complex(b)) for a, b in zip(self.r_uu, self.r_ud)]

    def rows(self):
        return list(
            zip(self.t.tolist(), self.r_uu.tolist(), self.r_ud.real.tolist(),
                self.r_ud.imag.tolist(), self.delta.tolist())
        )


def evolve_nonideal(
    N: int,
    g: float,
    b_x: float,
    rho0: SpinDensityMatrix,
    t: float,
    dt: float,
    J: float = 1.0,
    include_quartic: bool = True,
    record_every: int = 1,
) -> NonidealTrajectory:
    """Closed-system dynamics of the tested spin with a transverse field.

    The initial state rho0 (x) unpolarized magnet is unravelled into the
    eigenvectors of rho0, each evolved as a :class:`SymmetricSectorState`.
    Returns the reduced density matrix along the way and the Born deviation
    delta(t) = |r_uu(t) - r_uu(0)|.
    """
    if not 1 <= N <= MAX_SECTOR_N:
        raise DomainError(f"symmetric-sector oracle is limited to N <= {MAX_SECTOR_N}")
    if not dt > 0 or t < 0:
        raise DomainError("need dt > 0 and t >= 0")
    n_steps = int(np.ceil(t / dt - 1e-9))
    h_step = t / n_steps if n_steps else 0.0

    lam, vecs = np.linalg.eigh(rho0.to_array())
    keep = lam > 1e-15
    lam, vecs = lam[keep], vecs[:, keep]
    psi = np.stack([SymmetricSectorState.product(N, vecs[:, a]).amplitudes for a in range(len(lam))])
    # psi: (A, 2, K) -> work as (A, K, 2)
    psi = np.transpose(psi, (0, 2, 1))
    R = gauss_step_matrices(_block_hamiltonians(N, g, b_x, J, include_quartic), h_step)

    def reduced(p):
        return np.einsum("a,aki,akj->ij", lam, p, p.conj())

    ts, ruu, rud = [0.0], [], []
    r = reduced(psi)
    ruu.append(r[0, 0].real)
    rud.append(r[0, 1])
    drift = 0.0
    for step in range(1, n_steps + 1):
        psi = np.einsum("kij,akj->aki", R, psi)
        if step % record_every == 0 or step == n_steps:
            norms = np.sum(np.abs(psi) ** 2, axis=(1, 2))
            drift = max(drift, float(np.max(np.abs(norms - 1))))
            if drift > NORM_GUARD:
                raise StepSizeError(f"norm drift {drift:.2e} exceeds {NORM_GUARD}; reduce dt")
            r = reduced(psi)
            ts.append(step * h_step)
            ruu.append(r[0, 0].real)
            rud.append(r[0, 1])
    ruu = np.array(ruu)
    return NonidealTrajectory(np.array(ts), ruu, np.array(rud), np.abs(ruu - ruu[0]), drift)


def quarter_period(N: int, g: float, b_x: float) -> float:
    """pi / (2 Omega_max): up to this time every magnetization block's
    Rabi oscillation, and hence the Born deviation, is still growing."""
    return np.pi / (2 * np.hypot(b_x, g * N))
