import numpy as np
import pytest
from hypothesis import given, strategies as st

from hualab import faults
from hualab import matlin as ml
from hualab import upsilon as ups
from hualab.algebra import Algebra
from hualab.closedform import ExponentSpec
from hualab.errors import ConsistencyError, DimensionError, SingularMatrixError
from hualab.matlin import GroupElement, KMatrix

from conftest import haar, rotation

thetas = st.floats(-3.0, 3.0)


def upsilon_oracle(g: GroupElement, m: int) -> np.ndarray:
    """``T - R (1+P)^-1 Q`` on the real embedding with numpy's solver."""
    e = ml.real_embedding(g).data
    d = g.algebra.dim * m
    p, q, r, t = e[:d, :d], e[:d, d:], e[d:, :d], e[d:, d:]
    return t - r @ np.linalg.solve(np.eye(d) + p, q)


# --- the map itself ---------------------------------------------------------

@pytest.mark.parametrize("n,m", [(2, 1), (3, 1), (5, 2), (6, 5)])
def test_upsilon_matches_numpy_oracle(alg, n, m):
    g = haar(alg, n, seed=n + m)
    got = ml.real_embedding(ups.upsilon(g, m)).data
    np.testing.assert_allclose(got, upsilon_oracle(g, m), atol=1e-10)


def test_upsilon_of_identity(alg):
    for m in (1, 2):
        assert ups.upsilon(GroupElement.identity(alg, 4), m).matrix.allclose(KMatrix.identity(alg, 4 - m))


@given(thetas)
def test_upsilon_of_rotation_is_one(theta):
    if abs(np.cos(theta) + 1) < 1e-6:
        return
    assert ups.upsilon(rotation(theta), 1).data[0, 0] == pytest.approx(1.0)


def test_upsilon_argument_checks():
    g = GroupElement.identity(Algebra.C, 3)
    with pytest.raises(DimensionError):
        ups.upsilon(g, 0)
    with pytest.raises(DimensionError):
        ups.upsilon(g, 3)
    with pytest.raises(SingularMatrixError):
        ups.upsilon(rotation(np.pi), 1)


def test_upsilon_accepts_unitary_kmatrix():
    m = KMatrix.identity(Algebra.H, 3)
    assert ups.upsilon(m, 1).n == 2
    with pytest.raises(TypeError):
        ups.upsilon(np.eye(3), 1)


def test_composition_example_u4():
    g = haar(Algebra.C, 4, seed=17)
    twice = ups.upsilon(ups.upsilon(g, 1), 1)
    assert twice.matrix.allclose(ups.upsilon(g, 2).matrix, 1e-9)


@given(st.sampled_from(list(Algebra)), st.integers(3, 7), st.data())
def test_composition_property(alg, n, data):
    k = data.draw(st.integers(1, n - 2))
    m = data.draw(st.integers(1, n - 1 - k))
    g = haar(alg, n, seed=data.draw(st.integers(0, 2**31)))
    lhs, rhs = ups.composition_check(g, k, m)
    assert (lhs - rhs).max_abs() < 1e-9


@given(st.sampled_from(list(Algebra)), st.integers(2, 6), st.data())
def test_equivariance_property(alg, n, data):
    m = data.draw(st.integers(1, n - 1))
    seed = data.draw(st.integers(0, 2**31))
    g, a, b = haar(alg, n, seed), haar(alg, n - m, seed + 1), haar(alg, n - m, seed + 2)
    lhs, rhs = ups.equivariance_check(g, m, a, b)
    assert (lhs - rhs).max_abs() < 1e-9


# --- xi and cube coordinates -------------------------------------------------

def test_xi_examples():
    h, block = ups.xi(GroupElement.identity(Algebra.R, 3), 1)
    assert h.matrix.allclose(KMatrix.identity(Algebra.R, 2)) and block.data[0, 0] == 1.0
    h, block = ups.xi(rotation(0.7), 1)
    assert h.data[0, 0] == pytest.approx(1.0) and block.data[0, 0] == pytest.approx(np.cos(0.7))


def test_xi_block_is_contraction(alg):
    g = haar(alg, 6, seed=2)
    _, block = ups.xi(g, 3)
    assert ml.operator_norm(block) <= 1 + 1e-12


def test_cube_coordinates_examples():
    p = ups.cube_coordinates(GroupElement.identity(Algebra.R, 5))
    assert p.to_list() == [1.0, 1.0, 1.0, 1.0]
    p = ups.cube_coordinates(rotation(1.1))
    assert abs(p.x(2)) == pytest.approx(abs(np.cos(1.1)))
    assert p.x(2).components[0] == pytest.approx(np.cos(1.1))
    with pytest.raises(IndexError):
        p.x(3)


def test_cube_coordinates_follow_the_chain(alg):
    g = haar(alg, 5, seed=4)
    p = ups.cube_coordinates(g)
    for k in range(2, 6):
        h = g if k == 5 else ups.upsilon(g, 5 - k)
        assert np.allclose(p.x(k).components, ml.block_upper_left(h, 1).entry(0, 0).components, atol=1e-10)
    assert all(abs(p.x(k)) <= 1 + 1e-12 for k in range(2, 6))


def test_cube_point_rejects_large_coordinates():
    with pytest.raises(ConsistencyError):
        ups.CubePoint(Algebra.R, 2, np.array([1.5]))


# --- chain scalars ------------------------------------------------------------

def test_chain_of_identity(alg):
    c = ups.chain_scalars(GroupElement.identity(alg, 4))
    np.testing.assert_allclose(np.abs(c.values), 2.0)
    assert [abs(c.partial_product(m)) for m in range(1, 5)] == pytest.approx([2, 4, 8, 16])


@given(thetas)
def test_chain_of_rotation(theta):
    if abs(np.cos(theta) + 1) < 1e-3:
        return
    c = ups.chain_scalars(rotation(theta))
    assert c.values == pytest.approx([2.0, 1 + np.cos(theta)])
    assert c.partial_product(2) == pytest.approx(2 + 2 * np.cos(theta))


@pytest.mark.parametrize("alg_n", [(Algebra.C, 5), (Algebra.R, 6), (Algebra.H, 4)])
def test_partial_products_equal_corner_determinants(alg_n):
    alg, n = alg_n
    g = haar(alg, n, seed=n)
    c = ups.chain_scalars(g, verify=False)
    for m in range(1, n + 1):
        direct = ml.det(ml.block_upper_left(g, m).plus_identity(1.0))
        assert abs(c.partial_product(m) - direct) <= 1e-9 * abs(direct)
    assert c.verify(g) < 1e-9
    with pytest.raises(DimensionError):
        c.partial_product(n + 1)


def test_chain_values_have_nonnegative_real_part(alg):
    for seed in range(20):
        c = ups.chain_scalars(haar(alg, 4, seed))
        assert np.all(np.real(c.values) >= -1e-12)


# --- integrands ---------------------------------------------------------------

def test_integrand_examples():
    g = rotation(0.9)
    assert ups.hua_integrand(g, ExponentSpec(Algebra.R, [0, 0])) == 1
    assert ups.hua_integrand(g, ExponentSpec(Algebra.R, [0, 1])) == pytest.approx(1 + np.cos(0.9))
    phi = 1.3
    u = GroupElement(KMatrix(Algebra.C, np.array([[np.exp(1j * phi)]])))
    got = ups.hua_integrand(u, ExponentSpec(Algebra.C, [1], [1]))
    assert got == pytest.approx(2 + 2 * np.cos(phi))


@pytest.mark.parametrize("seed", range(3))
def test_real_integrand_telescopes_to_determinant_powers(seed):
    # for real exponents the chain form equals prod det(1+[g]_(n-k+1))^(lam_k - lam_(k-1))
    g = haar(Algebra.R, 4, seed)
    lam = [0.3, -0.2, 1.1, 0.6]
    want = 1.0
    prev = 0.0
    for k, l in enumerate(lam, start=1):
        d = ml.det(ml.block_upper_left(g, 4 - k + 1).plus_identity(1.0))
        want *= d ** (l - prev)
        prev = l
    assert ups.hua_integrand(g, ExponentSpec(Algebra.R, lam)).real == pytest.approx(want, rel=1e-9)


def test_quaternion_integrand_uses_moduli():
    g = haar(Algebra.H, 3, seed=5)
    c = ups.chain_scalars(g)
    spec = ExponentSpec(Algebra.H, [0.5, 1.5, -0.7])
    want = np.prod(c.values ** np.array([0.5, 1.5, -0.7]))
    assert ups.hua_integrand(g, spec) == pytest.approx(want, rel=1e-12)


def test_complex_integrand_uses_principal_branch():
    g = haar(Algebra.C, 3, seed=6)
    c = ups.chain_scalars(g)
    lam, mu = [0.5 + 1j, 1.0, -0.3j], [0.2, 1.0 - 0.5j, 0.4]
    want = np.prod([np.exp(l * np.log(v) + m * np.log(np.conj(v))) for v, l, m in zip(c.values, lam, mu)])
    assert ups.hua_integrand(g, ExponentSpec(Algebra.C, lam, mu)) == pytest.approx(want, rel=1e-12)


def test_theta_integrand(alg):
    g = haar(alg, 3, seed=8)
    lam = [0.0, 0.5, 1.0]
    plain = ups.hua_integrand(g, ExponentSpec(alg, lam))
    assert ups.theta_integrand(g, ExponentSpec(alg, lam, theta=[0, 0, 0])) == pytest.approx(plain)
    p = ups.cube_coordinates(g)
    s = {Algebra.R: 0.5, Algebra.C: 1.0, Algebra.H: 2.0}[alg]
    weight = (1 - abs(p.x(2)) ** 2) ** (s * 1.0) * (1 - abs(p.x(3)) ** 2) ** (s * 2.0)
    got = ups.theta_integrand(g, ExponentSpec(alg, lam, theta=[1.0, 2.0]))
    assert got == pytest.approx(plain * weight, rel=1e-10)


def test_theta_integrand_vanishes_on_cube_boundary():
    assert ups.theta_integrand(GroupElement.identity(Algebra.R, 3),
                               ExponentSpec(Algebra.R, [0, 0, 0], theta=[0, 0, 1])) == 0


# --- identity checks ----------------------------------------------------------

def test_multiplicativity_examples():
    lhs, rhs = ups.multiplicativity_check(GroupElement.identity(Algebra.H, 4), 1, 3)
    assert lhs == pytest.approx(8) and rhs == pytest.approx(8)
    lhs, rhs = ups.multiplicativity_check(rotation(0.4), 1, 2)
    assert lhs == pytest.approx(2 + 2 * np.cos(0.4)) and rhs == pytest.approx(lhs)
    lhs, rhs = ups.multiplicativity_check(haar(Algebra.H, 4, 3), 1, 3)
    assert lhs == pytest.approx(rhs, rel=1e-9)
    with pytest.raises(DimensionError):
        ups.multiplicativity_check(rotation(0.4), 2, 2)


@pytest.mark.parametrize("alg_n_p", [(Algebra.R, 4, 2), (Algebra.C, 3, 1), (Algebra.H, 3, 2), (Algebra.C, 3, 3)])
def test_cayley_block(alg_n_p):
    alg, n, p = alg_n_p
    lhs, rhs = ups.cayley_block_check(haar(alg, n, seed=p), p)
    assert (lhs - rhs).max_abs() < 1e-9
    lhs, rhs = ups.cayley_block_check(GroupElement.identity(alg, n), p)
    assert lhs.max_abs() == 0 and rhs.max_abs() == 0


@pytest.mark.parametrize("alg_n_k", [(Algebra.R, 4, 2), (Algebra.C, 3, 1), (Algebra.H, 3, 1)])
def test_rn_pointwise(alg_n_k):
    alg, n, k = alg_n_k
    s = haar(alg, n, seed=1)
    a, b = haar(alg, k, seed=2), haar(alg, k, seed=3)
    lhs, rhs = ups.rn_pointwise_check(s, a, b)
    assert abs(lhs - rhs) <= 1e-9 * abs(lhs)
    # trivial twist reduces to multiplicativity with p = n, m = n - k
    ident = GroupElement.identity(alg, k)
    assert ups.rn_pointwise_check(s, ident, ident)[0] == pytest.approx(
        ups.multiplicativity_check(s, n - k, n)[0])


def test_sign_fault_breaks_upsilon():
    g = haar(Algebra.C, 4, seed=0)
    good = ups.upsilon(g, 1)
    assert good.n == 3
    with faults.inject("upsilon-sign"):
        with pytest.raises(ConsistencyError):
            ups.upsilon(g, 1)
    with pytest.raises(ValueError):
        with faults.inject("no-such-fault"):
            pass
