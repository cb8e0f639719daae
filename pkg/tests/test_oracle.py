from functools import reduce

import numpy as np
import pytest
from scipy.linalg import expm

from cwmeas.dephasing import DephasingParams, correlation_cascade
from cwmeas.errors import DomainError, StepSizeError
from cwmeas.oracle import (
    SymmetricSectorState,
    correlation_oracle,
    enumerate_truncation_factor,
    evolve_nonideal,
    gauss_step_matrices,
    quarter_period,
)
from cwmeas.qm import pure_state

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SZ = np.diag([1.0, -1.0]).astype(complex)


def full_hamiltonian(N, g, b_x, J=1.0):
    """Oracle: H on the full 2^(N+1) space, tested spin first."""
    eye = np.eye(2)

    def site(op, i):
        return reduce(np.kron, [op if j == i else eye for j in range(N + 1)])

    M = sum(site(SZ, i) for i in range(1, N + 1))
    M4 = M @ M @ M @ M
    return -b_x * site(SX, 0) - g * site(SZ, 0) @ M - J * M4 / (4 * N**3)


def full_reduced(N, g, b_x, rho0, t):
    H = full_hamiltonian(N, g, b_x)
    rho = np.kron(rho0.to_array(), np.eye(2**N) / 2**N)
    U = expm(-1j * H * t)
    r = U @ rho @ U.conj().T
    return r.reshape(2, 2**N, 2, 2**N).trace(axis1=1, axis2=3)


def test_enumeration_small_n_hand_values():
    # N = 1: (e^{2igt} + e^{-2igt})/2
    assert enumerate_truncation_factor(1, 0.05, 3.0) == pytest.approx(np.cos(0.3), abs=1e-15)
    t = np.linspace(0, 10, 5)
    np.testing.assert_allclose(enumerate_truncation_factor(3, 0.1, t, include_quartic=True), np.cos(0.2 * t) ** 3, atol=1e-14)


def test_enumeration_limit():
    with pytest.raises(DomainError):
        enumerate_truncation_factor(21, 0.05, 1.0)


def test_correlation_oracle_matches_cascade():
    N, g = 12, 0.05
    t = np.linspace(0, 40, 30)
    for k in (1, 2, 3):
        np.testing.assert_allclose(
            correlation_oracle(k, N, g, t), correlation_cascade(DephasingParams(N, g), k, t), atol=1e-14
        )


def test_sector_state_product_and_reduced():
    st = SymmetricSectorState.product(6, [np.sqrt(0.3), np.sqrt(0.7)])
    assert st.norm == pytest.approx(1, abs=1e-15)
    np.testing.assert_allclose(st.reduced(), [[0.3, np.sqrt(0.21)], [np.sqrt(0.21), 0.7]], atol=1e-15)


def test_gauss_step_is_unitary():
    h = np.array([[[0.3, -0.1], [-0.1, -0.2]]], dtype=complex)
    R = gauss_step_matrices(h, 0.7)[0]
    np.testing.assert_allclose(R @ R.conj().T, np.eye(2), atol=1e-15)
    np.testing.assert_allclose(R, expm(-0.7j * h[0]), atol=1e-4)


@pytest.mark.parametrize("b_x", [0.0, 0.01])
def test_nonideal_matches_full_space_expm(b_x):
    N, g = 4, 0.05
    rho0 = pure_state((0.6, 0.0, 0.8))
    t = 30.0
    traj = evolve_nonideal(N, g, b_x, rho0, t, 0.01)
    ref = full_reduced(N, g, b_x, rho0, t)
    assert traj.r_uu[-1] == pytest.approx(ref[0, 0].real, abs=1e-8)
    assert traj.r_ud[-1] == pytest.approx(ref[0, 1], abs=1e-8)


def test_nonideal_without_field_conserves_diagonal():
    rho0 = pure_state((1, 0, 0))
    traj = evolve_nonideal(6, 0.05, 0.0, rho0, 100.0, 0.05)
    assert traj.delta.max() <= 1e-12
    # off-diagonal follows the truncation factor
    assert abs(traj.r_ud[-1]) == pytest.approx(0.5 * abs(np.cos(2 * 0.05 * 100.0)) ** 6, abs=1e-6)


def test_nonideal_rows_and_states():
    traj = evolve_nonideal(3, 0.05, 0.002, pure_state((1, 0, 0)), 1.0, 0.1, record_every=5)
    assert len(traj.rows()) == len(traj.t) == 3
    assert all(s.is_valid() for s in traj.states())
    assert traj.header[0] == "t"


def test_nonideal_norm_guard_trips_on_huge_step(monkeypatch):
    import cwmeas.oracle as oracle

    monkeypatch.setattr(oracle, "NORM_GUARD", -1.0)
    with pytest.raises(StepSizeError):
        evolve_nonideal(3, 0.05, 0.0, pure_state((1, 0, 0)), 1.0, 0.5)


def test_quarter_period():
    assert quarter_period(8, 0.05, 0.0) == pytest.approx(np.pi / 0.8)
    assert quarter_period(8, 0.05, 0.005) < quarter_period(8, 0.05, 0.0)
