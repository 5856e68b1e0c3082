"""Dense linear algebra over R, C and H.

The module has two layers.  The lower layer consists of batched kernels that
take an :class:`~hualab.algebra.Algebra` and raw numpy arrays with arbitrary
leading batch axes; Monte Carlo code calls these directly.  The upper layer is
the immutable :class:`KMatrix` / :class:`GroupElement` pair used by the public
single-matrix API, which simply forwards to the kernels.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import algebra as alg_
from .algebra import Algebra
from .errors import ConsistencyError, DimensionError, NumericError, SingularMatrixError

PIVOT_RTOL = 1e-12
UNITARY_TOL = 1e-10


# --- shape helpers ----------------------------------------------------------

def mat_shape(alg: Algebra, a: np.ndarray) -> tuple[int, int]:
    if alg is Algebra.H:
        return a.shape[-3], a.shape[-2]
    return a.shape[-2], a.shape[-1]


def batch_shape(alg: Algebra, a: np.ndarray) -> tuple:
    return a.shape[:-3] if alg is Algebra.H else a.shape[:-2]


def sub(alg: Algebra, a: np.ndarray, rows: slice, cols: slice) -> np.ndarray:
    if alg is Algebra.H:
        return a[..., rows, cols, :]
    return a[..., rows, cols]


def entry(alg: Algebra, a: np.ndarray, i: int, j: int) -> np.ndarray:
    if alg is Algebra.H:
        return a[..., i, j, :]
    return a[..., i, j]


def concat_cols(alg: Algebra, a, b):
    return np.concatenate([a, b], axis=-2 if alg is Algebra.H else -1)


def concat_rows(alg: Algebra, a, b):
    return np.concatenate([a, b], axis=-3 if alg is Algebra.H else -2)


def assemble(alg: Algebra, a, b, c, d):
    """Block matrix ``[[a, b], [c, d]]``."""
    return concat_rows(alg, concat_cols(alg, a, b), concat_cols(alg, c, d))


def identity(alg: Algebra, n: int, batch: tuple = ()) -> np.ndarray:
    out = np.zeros(tuple(batch) + (n, n) + alg_.scalar_shape(alg), dtype=alg_.dtype(alg))
    idx = np.arange(n)
    if alg is Algebra.H:
        out[..., idx, idx, 0] = 1.0
    else:
        out[..., idx, idx] = 1.0
    return out


def block_diag(alg: Algebra, a, b):
    """``diag(a, b)`` for matrices sharing batch shape."""
    (p, _), (q, _) = mat_shape(alg, a), mat_shape(alg, b)
    batch = np.broadcast_shapes(batch_shape(alg, a), batch_shape(alg, b))
    out = np.zeros(batch + (p + q, p + q) + alg_.scalar_shape(alg), dtype=alg_.dtype(alg))
    if alg is Algebra.H:
        out[..., :p, :p, :] = a
        out[..., p:, p:, :] = b
    else:
        out[..., :p, :p] = a
        out[..., p:, p:] = b
    return out


def embed_lower(alg: Algebra, a: np.ndarray, n: int) -> np.ndarray:
    """``diag(1_n, a)``."""
    return block_diag(alg, identity(alg, n, batch_shape(alg, a)), a)


# --- products ---------------------------------------------------------------

def matmul(alg: Algebra, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if alg is Algebra.H:
        z1, w1 = alg_.to_symplectic_pair(a)
        z2, w2 = alg_.to_symplectic_pair(b)
        z = z1 @ z2 - w1 @ np.conj(w2)
        w = z1 @ w2 + w1 @ np.conj(z2)
        return alg_.from_symplectic_pair(z, w)
    return a @ b


def adjoint(alg: Algebra, a: np.ndarray) -> np.ndarray:
    if alg is Algebra.H:
        return alg_.qconj(np.swapaxes(a, -3, -2))
    if alg is Algebra.C:
        return np.conj(np.swapaxes(a, -2, -1))
    return np.swapaxes(a, -2, -1)


def max_abs(alg: Algebra, a: np.ndarray) -> np.ndarray:
    """Largest entry modulus over the matrix axes."""
    mags = alg_.absval(alg, a)
    return mags.max(axis=(-2, -1))


def unitarity_residual(alg: Algebra, a: np.ndarray) -> np.ndarray:
    n = mat_shape(alg, a)[1]
    return max_abs(alg, matmul(alg, adjoint(alg, a), a) - identity(alg, n))


# --- elimination ------------------------------------------------------------

def invert_batch(alg: Algebra, m: np.ndarray, rtol: float = PIVOT_RTOL):
    """Gauss--Jordan inverse with partial pivoting for a batch of matrices.

    Row operations multiply by scalars on the left, which keeps the
    elimination valid over H.  Returns ``(inverse, singular, min_pivot)``;
    entries flagged ``singular`` carry garbage in ``inverse``.
    """
    n, ncols = mat_shape(alg, m)
    if n != ncols:
        raise DimensionError(f"cannot invert a {n}x{ncols} matrix")
    batch = batch_shape(alg, m)
    tail = alg_.scalar_shape(alg)
    flat = m.reshape((-1, n, n) + tail)
    nb = flat.shape[0]
    aug = concat_cols(alg, flat.astype(alg_.dtype(alg)), identity(alg, n, (nb,)))
    scale = max_abs(alg, flat)
    singular = ~(scale > 0)
    min_ratio = np.full(nb, np.inf)
    rows = np.arange(nb)
    for k in range(n):
        col = alg_.absval(alg, aug[:, k:, k])
        p = np.argmax(col, axis=1) + k
        pivot_rows = aug[rows, p].copy()
        aug[rows, p] = aug[rows, k]
        aug[:, k] = pivot_rows
        piv = aug[:, k, k]
        mag = alg_.absval(alg, piv)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(scale > 0, mag / scale, 0.0)
        min_ratio = np.minimum(min_ratio, ratio)
        bad = ratio < rtol
        singular |= bad
        # exact zeros are swapped out even when rtol = 0 so nothing divides by zero
        swap = bad | ~(mag > 0)
        safe = np.where(swap[(...,) + (None,) * len(tail)], alg_.one(alg, (nb,)), piv)
        aug[:, k] = alg_.mul(alg, alg_.inv(alg, safe)[:, None], aug[:, k])
        factors = aug[:, :, k].copy()
        factors[:, k] = 0
        aug -= alg_.mul(alg, factors[:, :, None], aug[:, k][:, None, :])
    inv = sub(alg, aug, slice(None), slice(n, None))
    return (
        inv.reshape(batch + (n, n) + tail),
        singular.reshape(batch),
        min_ratio.reshape(batch),
    )


# --- embeddings and determinants --------------------------------------------

@lru_cache(maxsize=None)
def _left_mult_basis(alg: Algebra) -> np.ndarray:
    """``L[c]`` is the real matrix of left multiplication by basis unit c."""
    d = alg.dim
    basis = np.eye(d)
    out = np.zeros((d, d, d))
    for c in range(d):
        for col in range(d):
            e_c = alg_.from_components(alg, np.pad(basis[c], (0, 4 - d)))
            e_col = alg_.from_components(alg, np.pad(basis[col], (0, 4 - d)))
            prod = alg_.to_components(alg, alg_.mul(alg, e_c, e_col))
            out[c, :, col] = prod[:d]
    return out


def real_embedding_raw(alg: Algebra, a: np.ndarray) -> np.ndarray:
    """Real matrix of ``v -> a v`` on ``R^(dim*n)`` (a homomorphism)."""
    if alg is Algebra.R:
        return np.asarray(a, dtype=np.float64)
    d = alg.dim
    comps = alg_.to_components(alg, a)[..., :d]
    p, q = mat_shape(alg, a)
    out = np.einsum("...ijc,cab->...iajb", comps, _left_mult_basis(alg))
    return out.reshape(out.shape[:-4] + (p * d, q * d))


def det_batch(alg: Algebra, a: np.ndarray) -> np.ndarray:
    """Determinant: signed for R, complex for C, the nonnegative fourth root
    of the real-embedded determinant for H."""
    n, ncols = mat_shape(alg, a)
    if n != ncols:
        raise DimensionError(f"determinant of a {n}x{ncols} matrix")
    if alg is not Algebra.H:
        return np.linalg.det(a)
    emb = real_embedding_raw(alg, a)
    d = np.linalg.det(emb)
    # Hadamard bound gives the scale against which negativity is judged.
    bound = np.prod(np.linalg.norm(emb, axis=-1), axis=-1)
    if np.any(d < -1e-9 * np.maximum(bound, 1.0)):
        raise ConsistencyError("negative real-embedded determinant for a quaternionic matrix")
    return np.maximum(d, 0.0) ** 0.25


def operator_norm_raw(alg: Algebra, a: np.ndarray, rtol: float = 1e-12,
                      max_iter: int = 10000) -> float:
    """Largest singular value by power iteration on ``E^T E``, ``E`` the real
    embedding of a single matrix."""
    emb = real_embedding_raw(alg, a)
    gram = emb.T @ emb
    if not np.any(gram):
        return 0.0
    x = np.random.default_rng(0x5EED).standard_normal(gram.shape[0])
    x /= np.linalg.norm(x)
    prev = None
    for _ in range(max_iter):
        y = gram @ x
        lam = float(x @ y)
        ny = np.linalg.norm(y)
        if ny == 0:
            return 0.0
        x = y / ny
        if prev is not None and abs(lam - prev) <= rtol * abs(lam):
            return float(np.sqrt(max(float(x @ gram @ x), 0.0)))
        prev = lam
    raise NumericError(f"power iteration did not converge in {max_iter} steps")


# --- immutable matrix types ------------------------------------------------

def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class KMatrix:
    """A dense ``rows x cols`` matrix over R, C or H."""

    algebra: Algebra
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        alg = Algebra.parse(self.algebra)
        data = np.asarray(self.data, dtype=alg_.dtype(alg))
        expected = 3 if alg is Algebra.H else 2
        if data.ndim != expected or (alg is Algebra.H and data.shape[-1] != 4):
            raise DimensionError(f"bad array shape {data.shape} for algebra {alg.value}")
        object.__setattr__(self, "algebra", alg)
        object.__setattr__(self, "data", _freeze(data))

    # construction
    @classmethod
    def identity(cls, algebra, n: int) -> "KMatrix":
        alg = Algebra.parse(algebra)
        return cls(alg, identity(alg, n))

    @classmethod
    def zeros(cls, algebra, rows: int, cols: int) -> "KMatrix":
        alg = Algebra.parse(algebra)
        return cls(alg, np.zeros((rows, cols) + alg_.scalar_shape(alg), dtype=alg_.dtype(alg)))

    @classmethod
    def from_components(cls, algebra, comps) -> "KMatrix":
        alg = Algebra.parse(algebra)
        return cls(alg, alg_.from_components(alg, comps))

    @classmethod
    def real(cls, values) -> "KMatrix":
        return cls(Algebra.R, np.asarray(values, dtype=np.float64))

    @property
    def shape(self) -> tuple[int, int]:
        return mat_shape(self.algebra, self.data)

    @property
    def rows(self) -> int:
        return self.shape[0]

    @property
    def cols(self) -> int:
        return self.shape[1]

    def components(self) -> np.ndarray:
        return alg_.to_components(self.algebra, self.data)

    def entry(self, i: int, j: int) -> alg_.Scalar:
        return alg_.Scalar.of(self.algebra, entry(self.algebra, self.data, i, j))

    # arithmetic
    def _check(self, other: "KMatrix"):
        if other.algebra is not self.algebra:
            raise DimensionError("mixing matrices over different algebras")

    def __matmul__(self, other: "KMatrix") -> "KMatrix":
        self._check(other)
        if self.cols != other.rows:
            raise DimensionError(f"cannot multiply {self.shape} by {other.shape}")
        return KMatrix(self.algebra, matmul(self.algebra, self.data, other.data))

    def __add__(self, other: "KMatrix") -> "KMatrix":
        self._check(other)
        if self.shape != other.shape:
            raise DimensionError(f"cannot add {self.shape} and {other.shape}")
        return KMatrix(self.algebra, self.data + other.data)

    def __sub__(self, other: "KMatrix") -> "KMatrix":
        return self + (-other)

    def __neg__(self) -> "KMatrix":
        return KMatrix(self.algebra, -self.data)

    def scaled(self, r: float) -> "KMatrix":
        return KMatrix(self.algebra, self.data * r)

    def adjoint(self) -> "KMatrix":
        return KMatrix(self.algebra, adjoint(self.algebra, self.data))

    def plus_identity(self, c: float = 1.0) -> "KMatrix":
        if self.rows != self.cols:
            raise DimensionError("identity shift of a non-square matrix")
        return KMatrix(self.algebra, self.data + c * identity(self.algebra, self.rows))

    def max_abs(self) -> float:
        return float(max_abs(self.algebra, self.data))

    def allclose(self, other: "KMatrix", atol: float = 1e-9) -> bool:
        return self.shape == other.shape and (self - other).max_abs() <= atol

    # linear algebra (thin wrappers)
    def block_upper_left(self, p: int) -> "KMatrix":
        return block_upper_left(self, p)

    def block_lower_right(self, p: int) -> "KMatrix":
        return block_lower_right(self, p)

    def invert(self) -> "KMatrix":
        return invert(self)

    def det(self):
        return det(self)

    # serialization
    def to_json(self) -> dict:
        comps = self.components().reshape(-1, 4)
        return {
            "algebra": self.algebra.value,
            "rows": self.rows,
            "cols": self.cols,
            "entries": [[float(c) for c in row] for row in comps],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "KMatrix":
        alg = Algebra.parse(obj["algebra"])
        comps = np.asarray(obj["entries"], dtype=np.float64).reshape(obj["rows"], obj["cols"], 4)
        return cls.from_components(alg, comps)

    def __repr__(self) -> str:
        return f"KMatrix({self.algebra.value}, {self.rows}x{self.cols})"


@dataclass(frozen=True, eq=False)
class GroupElement:
    """A square matrix certified to lie in SO(n), U(n) or Sp(n)."""

    matrix: KMatrix
    tol: float = UNITARY_TOL

    def __post_init__(self):
        m = self.matrix
        if m.rows != m.cols:
            raise DimensionError(f"group element must be square, got {m.shape}")
        res = float(unitarity_residual(m.algebra, m.data))
        if not res < self.tol:
            raise ConsistencyError(f"not unitary: residual {res:.3e}")
        if m.algebra is Algebra.R and m.rows > 0:
            d = float(np.linalg.det(m.data))
            if abs(d - 1.0) > self.tol * max(1, m.rows):
                raise ConsistencyError(f"not in SO({m.rows}): det = {d:.6g}")

    @property
    def algebra(self) -> Algebra:
        return self.matrix.algebra

    @property
    def group(self) -> str:
        return self.algebra.group

    @property
    def n(self) -> int:
        return self.matrix.rows

    @property
    def data(self) -> np.ndarray:
        return self.matrix.data

    @classmethod
    def identity(cls, algebra, n: int) -> "GroupElement":
        return cls(KMatrix.identity(algebra, n))

    def to_json(self) -> dict:
        return {"group": self.group, **self.matrix.to_json()}


def as_kmatrix(m) -> KMatrix:
    return m.matrix if isinstance(m, GroupElement) else m


# --- public single-matrix operations ----------------------------------------

def block_upper_left(m, p: int) -> KMatrix:
    """``[M]_p``: the top-left ``p x p`` block."""
    m = as_kmatrix(m)
    if not 1 <= p <= min(m.rows, m.cols):
        raise DimensionError(f"block size {p} out of range for {m.shape}")
    return KMatrix(m.algebra, sub(m.algebra, m.data, slice(0, p), slice(0, p)))


def block_lower_right(m, p: int) -> KMatrix:
    """``{M}_p``: the bottom-right ``p x p`` block."""
    m = as_kmatrix(m)
    if not 1 <= p <= min(m.rows, m.cols):
        raise DimensionError(f"block size {p} out of range for {m.shape}")
    return KMatrix(m.algebra, sub(m.algebra, m.data, slice(m.rows - p, None), slice(m.cols - p, None)))


def split_blocks(m, p: int) -> tuple[KMatrix, KMatrix, KMatrix, KMatrix]:
    """Split a square matrix into ``(P, Q, R, T)`` with ``P`` of size ``p``."""
    m = as_kmatrix(m)
    a = m.algebra
    head, tail = slice(0, p), slice(p, None)
    return tuple(KMatrix(a, sub(a, m.data, r, c)) for r, c in
                 ((head, head), (head, tail), (tail, head), (tail, tail)))


def invert(m) -> KMatrix:
    m = as_kmatrix(m)
    if m.rows != m.cols:
        raise DimensionError(f"cannot invert a {m.rows}x{m.cols} matrix")
    inv, singular, ratio = invert_batch(m.algebra, m.data)
    if singular:
        raise SingularMatrixError(float(ratio) * m.max_abs())
    return KMatrix(m.algebra, inv)


def frobenius_inverse(a, b, c, d, pivot: str = "A") -> tuple[KMatrix, KMatrix, KMatrix, KMatrix]:
    """Blocks of ``[[A, B], [C, D]]^-1`` via the Schur complement of ``A``
    (``pivot="A"``) or of ``D`` (``pivot="D"``)."""
    a, b, c, d = (as_kmatrix(x) for x in (a, b, c, d))
    if a.rows != b.rows or c.rows != d.rows or a.cols != c.cols or b.cols != d.cols:
        raise DimensionError("blocks are not conformable")
    if pivot == "A":
        ai = invert(a)
        s = invert(d - c @ ai @ b)
        top_right = -(ai @ b @ s)
        return ai + ai @ b @ s @ c @ ai, top_right, -(s @ c @ ai), s
    if pivot == "D":
        di = invert(d)
        s = invert(a - b @ di @ c)
        return s, -(s @ b @ di), -(di @ c @ s), di + di @ c @ s @ b @ di
    raise ValueError(f"pivot must be 'A' or 'D', not {pivot!r}")


def assemble_blocks(a, b, c, d) -> KMatrix:
    a, b, c, d = (as_kmatrix(x) for x in (a, b, c, d))
    return KMatrix(a.algebra, assemble(a.algebra, a.data, b.data, c.data, d.data))


def det(m):
    """Determinant following the conventions of :func:`det_batch`."""
    m = as_kmatrix(m)
    value = det_batch(m.algebra, m.data)
    if m.algebra is Algebra.C:
        return complex(value)
    return float(value)


def real_embedding(m) -> KMatrix:
    m = as_kmatrix(m)
    return KMatrix(Algebra.R, real_embedding_raw(m.algebra, m.data))


def cayley(g) -> KMatrix:
    """``S = (g - 1)(g + 1)^-1``."""
    g = as_kmatrix(g)
    return g.plus_identity(-1.0) @ invert(g.plus_identity(1.0))


def inverse_cayley(s) -> KMatrix:
    """Inverse of :func:`cayley`: ``g = (1 + S)(1 - S)^-1``."""
    s = as_kmatrix(s)
    return s.plus_identity(1.0) @ invert(-s.plus_identity(-1.0))


def operator_norm(m) -> float:
    m = as_kmatrix(m)
    return operator_norm_raw(m.algebra, m.data)


def dissipative_det_identity_check(x) -> tuple[float, float]:
    """Both sides of ``det(1 - Z*Z) = det(2(X + X*)) / |det(1 + X)|^2`` for
    ``Z = (1 - X)(1 + X)^-1``."""
    x = as_kmatrix(x)
    one_plus = invert(x.plus_identity(1.0))
    z = (-x).plus_identity(1.0) @ one_plus
    lhs = det((-(z.adjoint() @ z)).plus_identity(1.0))
    rhs = det((x + x.adjoint()).scaled(2.0)) / abs(det(x.plus_identity(1.0))) ** 2
    return float(np.real(lhs)), float(np.real(rhs))
