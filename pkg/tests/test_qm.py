from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cwmeas.errors import ValidationError
from cwmeas.qm import (
    EnsembleWeights,
    SpinDensityMatrix,
    merge_frequencies,
    mix,
    pure_state,
    validate,
)

unit = st.tuples(
    st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1)
).filter(lambda v: np.linalg.norm(v) > 1e-3).map(lambda v: tuple(np.asarray(v) / np.linalg.norm(v)))
lam = st.fractions(min_value=0, max_value=1, max_denominator=1000)


def test_pure_state_matches_projector():
    n = np.array([0.6, 0.0, 0.8])
    rho = pure_state(n).to_array()
    sigma = [np.array([[0, 1], [1, 0]]), np.array([[0, -1j], [1j, 0]]), np.diag([1, -1])]
    expected = (np.eye(2) + sum(c * s for c, s in zip(n, sigma))) / 2
    np.testing.assert_allclose(rho, expected, atol=1e-15)
    np.testing.assert_allclose(rho @ rho, rho, atol=1e-15)


def test_pure_state_rejects_non_unit():
    with pytest.raises(ValidationError):
        pure_state((1, 1, 0))


def test_bloch_roundtrip():
    n = (0.0, 0.6, -0.8)
    assert pure_state(n).bloch == pytest.approx(n, abs=1e-15)


def test_ambiguity_z_and_x_decompositions_exact():
    half = Fraction(1, 2)
    up, down = SpinDensityMatrix(1, 0, 0), SpinDensityMatrix(0, 1, 0)
    plus, minus = SpinDensityMatrix(half, half, half), SpinDensityMatrix(half, half, -half)
    target = SpinDensityMatrix(half, half, 0)
    assert mix(up, down, half) == target
    assert mix(plus, minus, half) == target
    # floats are exact here as well
    assert mix(pure_state((0, 0, 1)), pure_state((0, 0, -1)), 0.5) == SpinDensityMatrix.maximally_mixed()
    assert mix(pure_state((1, 0, 0)), pure_state((-1, 0, 0)), 0.5) == SpinDensityMatrix.maximally_mixed()


@settings(max_examples=200, deadline=None)
@given(unit)
def test_ambiguity_any_axis(n):
    rho = mix(pure_state(n), pure_state(tuple(-c for c in n)), 0.5)
    np.testing.assert_allclose(rho.to_array(), np.eye(2) / 2, atol=1e-15)


@settings(max_examples=100, deadline=None)
@given(lam, lam, lam)
def test_mix_associative_on_rationals(a, b, c):
    r1 = SpinDensityMatrix(1, 0, 0)
    r2 = SpinDensityMatrix(Fraction(1, 2), Fraction(1, 2), Fraction(1, 2))
    r3 = SpinDensityMatrix(Fraction(1, 3), Fraction(2, 3), Fraction(1, 5))
    # a r1 + (1-a)[b r2 + (1-b) r3] regrouped as w [..] + (1-w) r3
    left = mix(r1, mix(r2, r3, b), a)
    w = a + (1 - a) * b
    if w == 0:
        assert left == r3
        return
    right = mix(mix(r1, r2, a / w), r3, w)
    assert left == right
    assert not validate(left)


@settings(max_examples=200, deadline=None)
@given(
    st.lists(st.fractions(0, 10, max_denominator=50), min_size=3, max_size=3),
    st.lists(st.fractions(0, 10, max_denominator=50), min_size=3, max_size=3),
    st.integers(0, 1000),
    st.integers(1, 1000),
)
def test_merge_exact_and_normalized(w1, w2, n1, n2):
    if sum(w1) == 0 or sum(w2) == 0:
        return
    q1 = [x / sum(w1) for x in w1]
    q2 = [x / sum(w2) for x in w2]
    q = merge_frequencies(q1, q2, n1, n2)
    assert sum(q) == 1
    for a, b, c in zip(q1, q2, q):
        assert c == Fraction(n1, n1 + n2) * a + Fraction(n2, n1 + n2) * b


def test_merge_hand_example():
    q = merge_frequencies((Fraction(1, 2), Fraction(1, 2)), (1, 0), 1, 3)
    assert q == (Fraction(7, 8), Fraction(1, 8))
    assert all(isinstance(x, Fraction) for x in q)


def test_merge_errors():
    with pytest.raises(ValidationError):
        merge_frequencies((1,), (0.5, 0.5), 1, 1)
    with pytest.raises(ValidationError):
        merge_frequencies((1,), (1,), 0, 0)
    with pytest.raises(ValidationError):
        EnsembleWeights((0.6, 0.6))
    with pytest.raises(ValidationError):
        EnsembleWeights((1.5, -0.5))


@pytest.mark.parametrize(
    "matrix, invariant",
    [
        ([[0.5, 0.1], [0.2, 0.5]], "hermiticity"),
        ([[0.6, 0], [0, 0.6]], "trace"),
        ([[1.2, 0], [0, -0.2]], "positivity"),
        ([[0.5, 0.6], [0.6, 0.5]], "positivity"),
    ],
)
def test_validate_names_invariant(matrix, invariant):
    names = [v.invariant for v in validate(matrix)]
    assert invariant in names


def test_validate_accepts_states():
    assert validate(np.eye(2) / 2) == []
    assert pure_state((0, 1, 0)).is_valid()


def test_from_array_rejects_non_hermitian():
    with pytest.raises(ValidationError):
        SpinDensityMatrix.from_array([[0.5, 0.1], [0.3, 0.5]])
    rho = SpinDensityMatrix.from_array([[0.3, 0.1 - 0.2j], [0.1 + 0.2j, 0.7]])
    assert rho.r_du == 0.1 + 0.2j


def test_mix_rejects_bad_lambda():
    with pytest.raises(ValidationError):
        mix(pure_state((0, 0, 1)), pure_state((0, 0, -1)), 1.5)
