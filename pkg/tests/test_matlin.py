import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hualab import matlin as ml
from hualab.algebra import Algebra, Scalar, qmul
from hualab.errors import ConsistencyError, DimensionError, SingularMatrixError
from hualab.matlin import GroupElement, KMatrix

from conftest import haar, quat_complex_embedding, random_kmatrix, rotation


def hamilton(p, q):
    """Reference quaternion product written out from the multiplication table."""
    a1, b1, c1, d1 = p
    a2, b2, c2, d2 = q
    return np.array([
        a1 * a2 - b1 * b2 - c1 * c2 - d1 * d2,
        a1 * b2 + b1 * a2 + c1 * d2 - d1 * c2,
        a1 * c2 - b1 * d2 + c1 * a2 + d1 * b2,
        a1 * d2 + b1 * c2 - c1 * b2 + d1 * a2,
    ])


def quat(*c):
    return KMatrix.from_components(Algebra.H, np.array(c, dtype=float).reshape(1, 1, 4))


I, J, K = (0, 1, 0, 0), (0, 0, 1, 0), (0, 0, 0, 1)


# --- scalars ---------------------------------------------------------------

@given(st.lists(st.floats(-3, 3), min_size=8, max_size=8))
def test_quaternion_product_matches_multiplication_table(c):
    p, q = np.array(c[:4]), np.array(c[4:])
    np.testing.assert_allclose(qmul(p, q), hamilton(p, q), atol=1e-12)


def test_quaternion_units():
    assert np.allclose(qmul(np.array(I, float), np.array(J, float)), K)
    assert np.allclose(qmul(np.array(J, float), np.array(I, float)), -np.array(K))
    assert abs(Scalar.of(Algebra.H, [0, 1, 0, 0])) == 1.0


def test_scalar_rejects_extra_components():
    with pytest.raises(ValueError):
        Scalar.of(Algebra.R, [1.0, 2.0])


# --- construction and serialization ----------------------------------------

def test_bad_shape_rejected():
    with pytest.raises(DimensionError):
        KMatrix(Algebra.H, np.zeros((2, 2)))
    with pytest.raises(DimensionError):
        KMatrix.identity(Algebra.R, 2) @ KMatrix.identity(Algebra.R, 3)
    with pytest.raises(DimensionError):
        KMatrix.identity(Algebra.R, 2) + KMatrix.identity(Algebra.C, 2)


@given(st.sampled_from(list(Algebra)), st.integers(1, 4), st.integers(1, 4), st.integers(0, 2**31))
def test_json_round_trip_is_bit_exact(alg, r, c, seed):
    m = random_kmatrix(alg, r, c, seed)
    back = KMatrix.from_json(json.loads(json.dumps(m.to_json())))
    assert back.algebra is alg
    assert np.array_equal(back.data, m.data)


def test_json_layout_pads_unused_components():
    obj = KMatrix.real([[1.5]]).to_json()
    assert obj == {"algebra": "R", "rows": 1, "cols": 1, "entries": [[1.5, 0.0, 0.0, 0.0]]}


def test_values_are_immutable():
    m = KMatrix.identity(Algebra.C, 2)
    with pytest.raises(ValueError):
        m.data[0, 0] = 5


# --- inverse and blocks -----------------------------------------------------

@pytest.mark.parametrize("n", [1, 3, 5])
def test_inverse_against_numpy_on_real_embedding(alg, n):
    m = random_kmatrix(alg, n, seed=n)
    got = ml.real_embedding(m.invert()).data
    want = np.linalg.inv(ml.real_embedding(m).data)
    np.testing.assert_allclose(got, want, atol=1e-9)


def test_singular_matrix_raises():
    with pytest.raises(SingularMatrixError):
        KMatrix.real([[1.0, 2.0], [2.0, 4.0]]).invert()
    with pytest.raises(SingularMatrixError):
        KMatrix.zeros(Algebra.H, 2, 2).invert()


@pytest.mark.parametrize("pivot", ["A", "D"])
@pytest.mark.parametrize("n,p", [(2, 1), (4, 2), (5, 3)])
def test_frobenius_blocks_match_full_inverse(alg, pivot, n, p):
    m = random_kmatrix(alg, n, seed=10 * n + p).plus_identity(3.0)
    blocks = ml.frobenius_inverse(*ml.split_blocks(m, p), pivot=pivot)
    full = ml.split_blocks(m.invert(), p)
    for got, want in zip(blocks, full):
        assert (got - want).max_abs() < 1e-9


def test_frobenius_rejects_bad_pivot():
    blocks = ml.split_blocks(KMatrix.identity(Algebra.R, 2), 1)
    with pytest.raises(ValueError):
        ml.frobenius_inverse(*blocks, pivot="B")


def test_block_accessors():
    m = KMatrix.real(np.arange(9.0).reshape(3, 3))
    assert np.array_equal(m.block_upper_left(2).data, [[0, 1], [3, 4]])
    assert np.array_equal(m.block_lower_right(2).data, [[4, 5], [7, 8]])
    assert np.array_equal(m.block_lower_right(1).data, [[8.0]])


# --- determinants -----------------------------------------------------------

def test_identity_det_is_one(alg):
    assert ml.det(KMatrix.identity(alg, 4)) == pytest.approx(1.0)


def test_quaternion_diagonal_det_is_product_of_moduli():
    comps = np.zeros((3, 3, 4))
    comps[0, 0] = (1, 2, 0, 0)
    comps[1, 1] = (0, 0, 3, 4)
    comps[2, 2] = (0.5, 0.5, 0.5, 0.5)
    m = KMatrix.from_components(Algebra.H, comps)
    assert ml.det(m) == pytest.approx(np.sqrt(5) * 5 * 1.0, rel=1e-12)
    assert ml.det(quat(*I)) == pytest.approx(1.0)


@pytest.mark.parametrize("seed", range(5))
def test_quaternion_det_matches_complex_embedding(seed):
    m = random_kmatrix(Algebra.H, 3, seed=seed)
    want = abs(np.linalg.det(quat_complex_embedding(m))) ** 0.5
    assert ml.det(m) == pytest.approx(want, rel=1e-10)


@given(st.integers(1, 4), st.integers(0, 2**31))
def test_quaternion_det_multiplicative(n, seed):
    a = random_kmatrix(Algebra.H, n, seed=seed)
    b = random_kmatrix(Algebra.H, n, seed=seed + 1)
    assert ml.det(a @ b) == pytest.approx(ml.det(a) * ml.det(b), rel=1e-9)


def test_complex_det_matches_numpy():
    m = random_kmatrix(Algebra.C, 4, seed=3)
    assert ml.det(m) == pytest.approx(np.linalg.det(m.data), rel=1e-12)


# --- real embedding ---------------------------------------------------------

def test_real_embedding_examples():
    assert np.array_equal(ml.real_embedding(quat(1, 0, 0, 0)).data, np.eye(4))
    np.testing.assert_allclose(ml.real_embedding(quat(*I) @ quat(*J)).data,
                               ml.real_embedding(quat(*K)).data)


@given(st.sampled_from(list(Algebra)), st.integers(1, 3), st.integers(0, 2**31))
def test_real_embedding_is_homomorphism_and_respects_adjoint(alg, n, seed):
    a = random_kmatrix(alg, n, seed=seed)
    b = random_kmatrix(alg, n, seed=seed + 7)
    ea, eb = ml.real_embedding(a).data, ml.real_embedding(b).data
    np.testing.assert_allclose(ml.real_embedding(a @ b).data, ea @ eb, atol=1e-10)
    np.testing.assert_allclose(ml.real_embedding(a.adjoint()).data, ea.T, atol=1e-12)


# --- Cayley transform -------------------------------------------------------

def test_cayley_examples():
    assert ml.cayley(GroupElement.identity(Algebra.C, 3)).max_abs() == 0
    s = ml.cayley(KMatrix(Algebra.C, np.array([[-1j]])))
    assert s.data[0, 0] == pytest.approx(-1j)
    with pytest.raises(SingularMatrixError):
        ml.cayley(KMatrix.real([[-1.0]]))


@given(st.floats(-3.0, 3.0))
def test_cayley_of_rotation_is_skew(theta):
    s = ml.cayley(rotation(theta)).data
    np.testing.assert_allclose(s + s.T, 0, atol=1e-9)


@pytest.mark.parametrize("n", [1, 2, 4])
def test_cayley_skew_and_involutive(alg, n):
    g = haar(alg, n, seed=n)
    s = ml.cayley(g)
    assert (s + s.adjoint()).max_abs() < 1e-9
    assert ml.inverse_cayley(s).allclose(g.matrix, 1e-9)


# --- norms and group elements ----------------------------------------------

def test_operator_norm_examples():
    assert ml.operator_norm(KMatrix.identity(Algebra.H, 3)) == pytest.approx(1.0)
    assert ml.operator_norm(KMatrix.real([[0.5, 0], [0, 0.2]])) == pytest.approx(0.5, rel=1e-10)
    assert ml.operator_norm(KMatrix.zeros(Algebra.C, 2, 2)) == 0.0


@pytest.mark.parametrize("seed", range(4))
def test_operator_norm_matches_svd(alg, seed):
    m = random_kmatrix(alg, 3, seed=seed)
    want = np.linalg.svd(ml.real_embedding(m).data, compute_uv=False)[0]
    assert ml.operator_norm(m) == pytest.approx(want, rel=1e-6)


def test_unitary_invariants(alg):
    g = haar(alg, 4, seed=1)
    assert abs(ml.det(g)) == pytest.approx(1.0, abs=1e-9)
    assert ml.operator_norm(g) == pytest.approx(1.0, abs=1e-9)


def test_group_element_checks():
    with pytest.raises(ConsistencyError):
        GroupElement(KMatrix.real([[2.0]]))
    with pytest.raises(ConsistencyError):
        GroupElement(KMatrix.real([[1.0, 0], [0, -1.0]]))  # O(2) but not SO(2)
    with pytest.raises(DimensionError):
        GroupElement(KMatrix.zeros(Algebra.C, 1, 2))
    assert GroupElement.identity(Algebra.H, 2).group == "Sp"


# --- dissipative determinant identity --------------------------------------

def test_dissipative_examples():
    lhs, rhs = ml.dissipative_det_identity_check(KMatrix.identity(Algebra.R, 1))
    assert lhs == pytest.approx(1.0) and rhs == pytest.approx(1.0)
    lhs, rhs = ml.dissipative_det_identity_check(KMatrix.real([[2.0]]))
    assert lhs == pytest.approx(8 / 9) and rhs == pytest.approx(8 / 9)


@given(st.sampled_from(list(Algebra)), st.integers(1, 4), st.integers(0, 2**31))
def test_dissipative_identity_random(alg, n, seed):
    a = random_kmatrix(alg, n, seed=seed, scale=0.3)
    x = a.plus_identity(1.0)  # X + X* is close to 2 and positive definite
    x = x + (a @ a.adjoint())
    lhs, rhs = ml.dissipative_det_identity_check(x)
    assert lhs == pytest.approx(rhs, rel=1e-9)
