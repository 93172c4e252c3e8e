import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from loschmidt import hamiltonians as hm
from loschmidt.dynamics import mat_exp
from loschmidt.errors import CausticEncountered, DimensionError
from loschmidt.phasespace import (
    cayley_b_to_m,
    cayley_m_to_b,
    skew_product,
    symplectic_defect,
    symplectic_form,
    triangle_area,
)

finite = st.floats(-1e3, 1e3, allow_nan=False)


@pytest.mark.parametrize("L", [1, 2, 3])
def test_symplectic_form_identities(L):
    J = symplectic_form(L)
    n = 2 * L
    assert np.array_equal(J @ J, -np.eye(n))
    assert np.array_equal(J.T, -J)
    assert np.linalg.det(J) == pytest.approx(1.0, abs=1e-15)


def test_symplectic_form_gives_hamilton_equations():
    # H = p^2/2: q' = p, p' = 0
    J = symplectic_form(1)
    grad = np.array([3.0, 0.0])
    assert np.array_equal(J @ grad, [0.0, 3.0])


def test_skew_product_examples():
    assert skew_product([1.0, 0.0], [0.0, 1.0]) == -1.0
    assert skew_product([2.0, 3.0], [5.0, 7.0]) == 1.0
    assert skew_product([0.3, -1.2], [0.3, -1.2]) == 0.0


def test_skew_product_dimension_mismatch():
    with pytest.raises(DimensionError):
        skew_product([1.0, 0.0], [1.0, 0.0, 0.0, 1.0])


def test_skew_product_matches_matrix_form(rng):
    J = symplectic_form(2)
    a, b = rng.standard_normal((2, 4))
    assert skew_product(a, b) == pytest.approx(a @ J @ b, abs=1e-14)


@given(arrays(float, 4, elements=finite), arrays(float, 4, elements=finite))
def test_skew_product_antisymmetric_bitwise(a, b):
    assert skew_product(a, b) == -skew_product(b, a)


def test_triangle_area_examples():
    x = np.zeros(2)
    assert triangle_area(x, [1.0, 0.0], [0.0, 1.0]) == 2.0
    assert triangle_area(x, x, [0.0, 1.0]) == 0.0
    assert triangle_area(x, [1.0, 0.0], x) == 0.0


@settings(max_examples=50)
@given(arrays(float, (4, 2), elements=st.floats(-10, 10)))
def test_triangle_area_translation_invariant(pts):
    x, xp, xm, shift = pts
    a0 = triangle_area(x, xp, xm)
    a1 = triangle_area(x + shift, xp + shift, xm + shift)
    assert abs(a0 - a1) <= 1e-12 * max(1.0, abs(a0)) * 100


def test_cayley_zero_is_identity():
    assert np.array_equal(cayley_b_to_m(np.zeros((2, 2))), np.eye(2))
    assert np.array_equal(cayley_m_to_b(np.eye(2)), np.zeros((2, 2)))


def test_cayley_harmonic_quarter_period():
    J = symplectic_form(1)
    M = cayley_b_to_m(-np.eye(2))
    np.testing.assert_allclose(M, J, atol=1e-15)
    np.testing.assert_allclose(M, mat_exp(hm.harmonic().generator(), np.pi / 2), atol=1e-15)
    np.testing.assert_allclose(cayley_m_to_b(mat_exp(hm.harmonic().generator(), np.pi / 2)), -np.eye(2),
                               atol=1e-14)


def test_cayley_inverted_oscillator():
    H = hm.inverted(1.0)
    B = -np.tanh(0.5) * H.hessian
    A = H.generator()
    expected = np.cosh(1.0) * np.eye(2) + np.sinh(1.0) * A
    np.testing.assert_allclose(cayley_b_to_m(B), expected, atol=1e-14)
    np.testing.assert_allclose(cayley_b_to_m(B), mat_exp(A, 1.0), atol=1e-14)


def test_cayley_half_period_is_caustic():
    M = mat_exp(hm.harmonic().generator(), np.pi)
    with pytest.raises(CausticEncountered):
        cayley_m_to_b(M)


def test_cayley_b_to_m_caustic():
    # I + JB singular for B = J^T-like symmetric choice: B = I gives det(I + J) = 2, so use B with JB = -I
    B = np.array([[0.0, 1.0], [1.0, 0.0]])  # JB = diag(-1, 1)
    with pytest.raises(CausticEncountered):
        cayley_b_to_m(B)


@settings(max_examples=60)
@given(arrays(float, (4, 4), elements=st.floats(-2, 2)))
def test_cayley_round_trip_and_symplectic(C):
    B = 0.5 * (C + C.T)
    try:
        M = cayley_b_to_m(B)
    except CausticEncountered:
        return
    # keep away from caustics, where the round trip is ill-conditioned
    if np.linalg.cond(np.eye(4) + M) > 1e3 or np.linalg.cond(np.eye(4) + symplectic_form(2) @ B) > 1e3:
        return
    assert symplectic_defect(M) <= 1e-9
    B2 = cayley_m_to_b(M)
    np.testing.assert_allclose(B2, B, rtol=0, atol=1e-10)
    assert np.array_equal(B2, B2.T)
