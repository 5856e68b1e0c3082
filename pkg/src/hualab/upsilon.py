"""The contraction maps ``Upsilon^m`` and the integrands built from them.

For ``g = [[P, Q], [R, T]]`` with ``P`` of size ``m``,
``Upsilon^m(g) = T - R (1 + P)^-1 Q`` maps the unitary group of size ``n``
onto the one of size ``n - m``.  Iterating ``Upsilon^1`` gives the *chain*
``y_j = [Upsilon^j(g)]_1`` (``j = 0..n-1``); read backwards it is the list of
cube coordinates ``x_k = y_{n-k}``.  Only scalar inverses are needed for the
chain, which is what the Monte Carlo code uses.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import algebra as alg_
from . import faults
from . import matlin as ml
from .algebra import Algebra
from .closedform import ExponentSpec
from .errors import ConsistencyError, DimensionError, SingularMatrixError
from .matlin import GroupElement, KMatrix

PIVOT_ATOL = ml.PIVOT_RTOL
TELESCOPE_RTOL = 1e-9
RESULT_TOL = 1e-9


# --- batched kernels ----------------------------------------------------------

def upsilon_raw(alg: Algebra, g: np.ndarray, m: int, atol: float = PIVOT_ATOL):
    """``Upsilon^m`` on a batch.  Returns ``(h, singular)``.

    ``1 + P`` counts as singular when an elimination pivot falls below
    ``atol`` times ``max(1, max|1 + P|)``.  Unitary blocks have entries of
    modulus at most one, so this is the natural scale.
    """
    n = ml.mat_shape(alg, g)[0]
    if not 0 <= m < n:
        raise DimensionError(f"Upsilon^{m} needs 0 <= m < n = {n}")
    if m == 0:
        return g, np.zeros(ml.batch_shape(alg, g), dtype=bool)
    head, tail = slice(0, m), slice(m, None)
    p = ml.sub(alg, g, head, head)
    q = ml.sub(alg, g, head, tail)
    r = ml.sub(alg, g, tail, head)
    t = ml.sub(alg, g, tail, tail)
    one_p = p + ml.identity(alg, m)
    inv, singular, ratio = ml.invert_batch(alg, one_p, rtol=0.0)
    scale = np.maximum(ml.max_abs(alg, one_p), 1.0)
    singular = singular | (ratio * ml.max_abs(alg, one_p) < atol * scale)
    correction = ml.matmul(alg, ml.matmul(alg, r, inv), q)
    if faults.active("upsilon-sign"):
        return t + correction, singular
    return t - correction, singular


def _pair_mul(z1, w1, z2, w2):
    """Quaternion product in symplectic-pair form."""
    return z1 * z2 - w1 * np.conj(w2), z1 * w2 + w1 * np.conj(z2)


def chain_raw(alg: Algebra, g: np.ndarray, atol: float = PIVOT_ATOL):
    """Chain ``y_j = [Upsilon^j(g)]_1`` for ``j = 0..n-1`` by iterating
    ``Upsilon^1``.

    Returns ``(y, singular, failed_step)``.  ``y`` has the chain index as the
    last matrix-free axis (components follow for H).  ``failed_step`` is the
    first ``j`` whose ``1 + y_j`` was singular, ``-1`` if none.  Singular
    samples are continued with a dummy pivot so the batch stays finite.
    """
    n = ml.mat_shape(alg, g)[0]
    batch = ml.batch_shape(alg, g)
    failed = np.full(batch, -1, dtype=np.int64)
    sign = 1.0 if faults.active("upsilon-sign") else -1.0
    if alg is Algebra.H:
        z, w = alg_.to_symplectic_pair(g)
        ys_z, ys_w = [], []
        for j in range(n):
            pz, pw = z[..., 0, 0], w[..., 0, 0]
            ys_z.append(pz)
            ys_w.append(pw)
            if j == n - 1:
                break
            az, aw = 1.0 + pz, pw
            mag2 = np.abs(az) ** 2 + np.abs(aw) ** 2
            bad = mag2 < atol * atol
            failed = np.where(bad & (failed < 0), j, failed)
            mag2 = np.where(bad, 1.0, mag2)
            # (1 + p)^-1 = conj(1 + p) / |1 + p|^2
            sz, sw = np.conj(az) / mag2, -aw / mag2
            rz, rw = z[..., 1:, 0], w[..., 1:, 0]
            rsz, rsw = _pair_mul(rz, rw, sz[..., None], sw[..., None])
            cz, cw = _pair_mul(rsz[..., :, None], rsw[..., :, None],
                               z[..., None, 0, 1:], w[..., None, 0, 1:])
            z = z[..., 1:, 1:] + sign * cz
            w = w[..., 1:, 1:] + sign * cw
        y = alg_.from_symplectic_pair(np.stack(ys_z, axis=-1), np.stack(ys_w, axis=-1))
        return y, failed >= 0, failed
    ys = []
    cur = g
    for j in range(n):
        p = cur[..., 0, 0]
        ys.append(p)
        if j == n - 1:
            break
        d = 1.0 + p
        bad = np.abs(d) < atol
        failed = np.where(bad & (failed < 0), j, failed)
        d = np.where(bad, 1.0, d)
        cur = cur[..., 1:, 1:] + sign * cur[..., 1:, 0:1] * (cur[..., 0:1, 1:] / d[..., None, None])
    return np.stack(ys, axis=-1), failed >= 0, failed


def cube_from_chain(alg: Algebra, y: np.ndarray) -> np.ndarray:
    """Reverse the chain into cube order ``x_1..x_n``."""
    axis = -2 if alg is Algebra.H else -1
    return np.flip(y, axis=axis)


def _log_one_plus(alg: Algebra, x: np.ndarray) -> np.ndarray:
    """Principal ``log(1 + x)``; for H the real ``log|1 + x|``."""
    with np.errstate(divide="ignore"):
        if alg is Algebra.H:
            shifted = x.copy()
            shifted[..., 0] += 1.0
            return 0.5 * np.log(np.sum(shifted * shifted, axis=-1))
        if alg is Algebra.C:
            return np.log(1.0 + x)
        return np.log(np.maximum(1.0 + x, 0.0))


def _theta_power(alg: Algebra) -> float:
    return {Algebra.R: 0.5, Algebra.C: 1.0, Algebra.H: 2.0}[alg]


def integrand_from_cube(alg: Algebra, x: np.ndarray, spec: ExponentSpec,
                        with_theta: bool = True) -> np.ndarray:
    """``prod_k (1+x_k)^lam_k [conj(1+x_k)^mu_k] (1-|x_k|^2)^(s theta_k)``
    on a batch of cube points in ``x_1..x_n`` order."""
    if spec.algebra is not alg:
        raise DimensionError("exponent spec and sample algebra differ")
    n = x.shape[-2] if alg is Algebra.H else x.shape[-1]
    if n != spec.n:
        raise DimensionError(f"spec has {spec.n} exponents, matrices have size {n}")
    logs = _log_one_plus(alg, x)
    total = np.zeros(logs.shape[:-1], dtype=np.complex128)
    for k in range(n):
        lam, mu = complex(spec.lam[k]), complex(spec.mus[k])
        lk = logs[..., k]
        if lam != 0:
            total = total + lam * lk
        if mu != 0:
            total = total + mu * np.conj(lk)
    if with_theta and spec.theta is not None:
        s = _theta_power(alg)
        abs2 = alg_.abs2(alg, x)
        for k in range(1, n):
            th = spec.theta[k]
            if th != 0:
                with np.errstate(divide="ignore"):
                    total = total + s * th * np.log(np.maximum(1.0 - abs2[..., k], 0.0))
    return np.exp(total)


# --- public single-element API -----------------------------------------------

def _as_element(g) -> GroupElement:
    if isinstance(g, GroupElement):
        return g
    if isinstance(g, KMatrix):
        return GroupElement(g)
    raise TypeError(f"expected a GroupElement, got {type(g).__name__}")


def upsilon(g, m: int) -> GroupElement:
    """``Upsilon^m(g) = T - R (1 + P)^-1 Q``."""
    g = _as_element(g)
    if not 1 <= m < g.n:
        raise DimensionError(f"Upsilon^{m} needs 1 <= m < n = {g.n}")
    h, singular = upsilon_raw(g.algebra, g.data, m)
    if singular:
        raise SingularMatrixError(0.0, f"1 + [g]_{m} is singular to working precision")
    return GroupElement(KMatrix(g.algebra, h), tol=RESULT_TOL)


def _upsilon_or_self(g: GroupElement, m: int) -> GroupElement:
    return g if m == 0 else upsilon(g, m)


def xi(g, m: int) -> tuple[GroupElement, KMatrix]:
    """``xi_m(g) = (Upsilon^m(g), [g]_m)``."""
    g = _as_element(g)
    return upsilon(g, m), ml.block_upper_left(g, m)


def _chain_single(g: GroupElement) -> np.ndarray:
    y, singular, failed = chain_raw(g.algebra, g.data[None])
    if singular[0]:
        step = int(failed[0])
        raise SingularMatrixError(0.0, f"1 + [Upsilon^{step}(g)]_1 vanishes", step=step)
    return cube_from_chain(g.algebra, y[0])


@dataclass(frozen=True)
class CubePoint:
    """Cube coordinates ``x_2..x_n`` of a group element."""

    algebra: Algebra
    n: int
    coords: np.ndarray

    def __post_init__(self):
        mags = alg_.absval(self.algebra, self.coords)
        if np.any(mags > 1 + 1e-12):
            raise ConsistencyError(f"cube coordinate of modulus {mags.max():.6g} > 1")

    def x(self, k: int) -> alg_.Scalar:
        """Coordinate ``x_k`` for ``2 <= k <= n``."""
        if not 2 <= k <= self.n:
            raise IndexError(f"coordinate index {k} outside 2..{self.n}")
        return alg_.Scalar(self.algebra, alg_.to_components(self.algebra, self.coords[k - 2]))

    def to_list(self) -> list:
        if self.algebra is Algebra.H:
            return self.coords.tolist()
        if self.algebra is Algebra.C:
            return [[z.real, z.imag] for z in self.coords]
        return self.coords.tolist()


def cube_coordinates(g) -> CubePoint:
    """``x_k = [Upsilon^(n-k)(g)]_1`` for ``k = 2..n``."""
    g = _as_element(g)
    x = _chain_single(g)
    return CubePoint(g.algebra, g.n, np.array(x[1:]))


@dataclass(frozen=True)
class ChainScalars:
    """``values[k-1] = 1 + x_k`` for ``k = 1..n`` (cube order).

    For H the values are the moduli ``|1 + x_k|``, which is all that enters
    the real quaternionic determinant.  ``det(1 + [g]_m)`` is the product of
    the last ``m`` values.
    """

    algebra: Algebra
    n: int
    values: np.ndarray

    def __post_init__(self):
        re = np.real(self.values)
        if np.any(re < -1e-12):
            raise ConsistencyError("chain value with negative real part")

    def partial_product(self, m: int):
        if not 1 <= m <= self.n:
            raise DimensionError(f"partial product of length {m} with n = {self.n}")
        v = np.prod(self.values[self.n - m:])
        return complex(v) if self.algebra is Algebra.C else float(v)

    def verify(self, g, rtol: float = TELESCOPE_RTOL) -> float:
        """Check every partial product against ``det(1 + [g]_m)``; returns the
        largest relative deviation."""
        g = _as_element(g)
        worst = 0.0
        for m in range(1, self.n + 1):
            direct = ml.det(ml.block_upper_left(g, m).plus_identity(1.0))
            chained = self.partial_product(m)
            err = abs(chained - direct) / max(abs(direct), 1e-300)
            if abs(direct) < 1e-300 and abs(chained) < 1e-300:
                err = 0.0
            worst = max(worst, err)
            if not err < rtol:
                raise ConsistencyError(f"telescoping fails at m = {m}: {chained} vs {direct}")
        return worst


def chain_scalars(g, verify: bool = True) -> ChainScalars:
    g = _as_element(g)
    x = _chain_single(g)
    if g.algebra is Algebra.H:
        shifted = x.copy()
        shifted[:, 0] += 1.0
        values = np.sqrt(np.sum(shifted ** 2, axis=-1))
    else:
        values = 1.0 + x
    out = ChainScalars(g.algebra, g.n, values)
    if verify:
        out.verify(g)
    return out


def _evaluate(g, spec: ExponentSpec, with_theta: bool) -> complex:
    g = _as_element(g)
    x = _chain_single(g)
    return complex(integrand_from_cube(g.algebra, x[None], spec, with_theta)[0])


def hua_integrand(g, spec: ExponentSpec) -> complex:
    """``prod_k (1+x_k)^lam_k``, times ``conj(1+x_k)^mu_k`` for C."""
    return _evaluate(g, spec, with_theta=False)


def theta_integrand(g, spec: ExponentSpec) -> complex:
    """:func:`hua_integrand` times ``prod_{k>=2} (1-|x_k|^2)^(s theta_k)`` with
    ``s = 1/2, 1, 2`` for R, C, H."""
    return _evaluate(g, spec, with_theta=True)


# --- identity checks ----------------------------------------------------------

def _det1(m: KMatrix):
    return ml.det(m.plus_identity(1.0))


def multiplicativity_check(g, m: int, p: int):
    """``det(1+[g]_p)`` against ``det(1+[g]_m) det(1+[Upsilon^m g]_(p-m))``."""
    g = _as_element(g)
    if not 1 <= m < p <= g.n:
        raise DimensionError(f"need 1 <= m < p <= n, got m={m}, p={p}, n={g.n}")
    lhs = _det1(ml.block_upper_left(g, p))
    h = upsilon(g, m)
    rhs = _det1(ml.block_upper_left(g, m)) * _det1(ml.block_upper_left(h, p - m))
    return lhs, rhs


def cayley_block_check(g, p: int) -> tuple[KMatrix, KMatrix]:
    """``{cayley(g)}_p`` against ``cayley(Upsilon^(n-p)(g))``."""
    g = _as_element(g)
    if not 1 <= p <= g.n:
        raise DimensionError(f"block size {p} out of range for n = {g.n}")
    lhs = ml.block_lower_right(ml.cayley(g), p)
    rhs = ml.cayley(_upsilon_or_self(g, g.n - p))
    return lhs, rhs


def rn_pointwise_check(s, a, b):
    """``det(1 + diag(1,A) S diag(1,B))`` against
    ``det(1 + [S]_n) det(1 + A Upsilon^n(S) B)``, ``n = size(S) - size(A)``."""
    s, a, b = _as_element(s), _as_element(a), _as_element(b)
    k = a.n
    if b.n != k or not k < s.n:
        raise DimensionError("A and B must be k x k with k < size(S)")
    n = s.n - k
    alg = s.algebra
    ea = KMatrix(alg, ml.embed_lower(alg, a.data, n))
    eb = KMatrix(alg, ml.embed_lower(alg, b.data, n))
    lhs = _det1(ea @ s.matrix @ eb)
    rhs = _det1(ml.block_upper_left(s, n)) * _det1(a.matrix @ upsilon(s, n).matrix @ b.matrix)
    return lhs, rhs


def composition_check(g, k: int, m: int) -> tuple[KMatrix, KMatrix]:
    """``Upsilon^k(Upsilon^m(g))`` against ``Upsilon^(k+m)(g)``."""
    g = _as_element(g)
    return upsilon(upsilon(g, m), k).matrix, upsilon(g, k + m).matrix


def equivariance_check(g, m: int, a, b) -> tuple[KMatrix, KMatrix]:
    """``Upsilon^m(diag(1,A) g diag(1,B))`` against ``A Upsilon^m(g) B``."""
    g, a, b = _as_element(g), _as_element(a), _as_element(b)
    alg = g.algebra
    if a.n != g.n - m or b.n != g.n - m:
        raise DimensionError("A and B must have size n - m")
    ea = KMatrix(alg, ml.embed_lower(alg, a.data, m))
    eb = KMatrix(alg, ml.embed_lower(alg, b.data, m))
    twisted = GroupElement(ea @ g.matrix @ eb, tol=RESULT_TOL)
    return upsilon(twisted, m).matrix, a.matrix @ upsilon(g, m).matrix @ b.matrix
