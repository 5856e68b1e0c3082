"""Scalar arithmetic over the three real division algebras R, C and H.

Elements are stored as plain numpy arrays so that every routine works on
whole batches at once:

* ``R`` -- float64 arrays, one value per scalar
* ``C`` -- complex128 arrays
* ``H`` -- float64 arrays with a trailing axis of length 4 holding the
  components on the basis ``1, i, j, k``

Matrices follow the same rule, so an ``n x n`` quaternion matrix is an array of
shape ``(..., n, n, 4)``.  Vectors are columns, scalars act on the right and
matrices act on the left.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np


class Algebra(enum.Enum):
    R = "R"
    C = "C"
    H = "H"

    @property
    def dim(self) -> int:
        """Real dimension of the algebra (1, 2 or 4)."""
        return _DIMS[self]

    @property
    def group(self) -> str:
        return _GROUPS[self]

    @classmethod
    def parse(cls, value) -> "Algebra":
        if isinstance(value, Algebra):
            return value
        key = str(value).strip().lower()
        if key in _ALIASES:
            return _ALIASES[key]
        raise ValueError(f"unknown algebra or group {value!r}")


_DIMS = {Algebra.R: 1, Algebra.C: 2, Algebra.H: 4}
_GROUPS = {Algebra.R: "SO", Algebra.C: "U", Algebra.H: "Sp"}
_ALIASES = {
    "r": Algebra.R, "so": Algebra.R, "o": Algebra.R, "real": Algebra.R,
    "c": Algebra.C, "u": Algebra.C, "complex": Algebra.C,
    "h": Algebra.H, "sp": Algebra.H, "quaternion": Algebra.H,
}

# Shorthand used throughout the package.
AlgebraTag = Algebra


def scalar_shape(alg: Algebra) -> tuple:
    return (4,) if alg is Algebra.H else ()


def dtype(alg: Algebra):
    return np.complex128 if alg is Algebra.C else np.float64


# --- quaternion kernels ---------------------------------------------------

def qmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Hamilton product of quaternion arrays (broadcasting on leading axes)."""
    a0, a1, a2, a3 = np.moveaxis(a, -1, 0)
    b0, b1, b2, b3 = np.moveaxis(b, -1, 0)
    return np.stack(
        [
            a0 * b0 - a1 * b1 - a2 * b2 - a3 * b3,
            a0 * b1 + a1 * b0 + a2 * b3 - a3 * b2,
            a0 * b2 - a1 * b3 + a2 * b0 + a3 * b1,
            a0 * b3 + a1 * b2 - a2 * b1 + a3 * b0,
        ],
        axis=-1,
    )


def qconj(a: np.ndarray) -> np.ndarray:
    out = -a
    out[..., 0] = a[..., 0]
    return out


def to_symplectic_pair(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Split ``q = z + w j`` into its complex parts ``(z, w)``."""
    return a[..., 0] + 1j * a[..., 1], a[..., 2] + 1j * a[..., 3]


def from_symplectic_pair(z: np.ndarray, w: np.ndarray) -> np.ndarray:
    return np.stack([z.real, z.imag, w.real, w.imag], axis=-1)


# --- generic scalar operations ---------------------------------------------

def mul(alg: Algebra, a, b):
    """Elementwise product ``a * b`` (order matters over H)."""
    if alg is Algebra.H:
        return qmul(a, b)
    return a * b


def conj(alg: Algebra, a):
    if alg is Algebra.H:
        return qconj(a)
    if alg is Algebra.C:
        return np.conj(a)
    return a


def abs2(alg: Algebra, a) -> np.ndarray:
    if alg is Algebra.H:
        return np.sum(a * a, axis=-1)
    if alg is Algebra.C:
        return a.real ** 2 + a.imag ** 2
    return a * a


def absval(alg: Algebra, a) -> np.ndarray:
    return np.sqrt(abs2(alg, a))


def inv(alg: Algebra, a):
    """Multiplicative inverse; the caller is responsible for nonzero input."""
    if alg is Algebra.H:
        return qconj(a) / abs2(alg, a)[..., None]
    return 1.0 / a


def real_part(alg: Algebra, a) -> np.ndarray:
    if alg is Algebra.H:
        return a[..., 0]
    return np.real(a)


def scale(alg: Algebra, a, r):
    """Multiply by a real array ``r`` shaped like the scalar batch."""
    r = np.asarray(r)
    if alg is Algebra.H:
        return a * r[..., None]
    return a * r


def one(alg: Algebra, shape: tuple = ()) -> np.ndarray:
    out = np.zeros(tuple(shape) + scalar_shape(alg), dtype=dtype(alg))
    if alg is Algebra.H:
        out[..., 0] = 1.0
    else:
        out[...] = 1.0
    return out


def to_components(alg: Algebra, a) -> np.ndarray:
    """Components on ``1, i, j, k`` with a trailing axis of length 4."""
    a = np.asarray(a)
    if alg is Algebra.H:
        return np.array(a, dtype=np.float64)
    out = np.zeros(a.shape + (4,))
    out[..., 0] = np.real(a)
    if alg is Algebra.C:
        out[..., 1] = np.imag(a)
    return out


def from_components(alg: Algebra, comps) -> np.ndarray:
    comps = np.asarray(comps, dtype=np.float64)
    if alg is Algebra.H:
        return comps.copy()
    if alg is Algebra.C:
        return comps[..., 0] + 1j * comps[..., 1]
    return comps[..., 0].copy()


def standard_normal(alg: Algebra, rng: np.random.Generator, shape: tuple) -> np.ndarray:
    """Independent N(0, 1) draws for every real component."""
    if alg is Algebra.H:
        return rng.standard_normal(tuple(shape) + (4,))
    if alg is Algebra.C:
        x = rng.standard_normal(tuple(shape) + (2,))
        return x[..., 0] + 1j * x[..., 1]
    return rng.standard_normal(tuple(shape))


@dataclass(frozen=True)
class Scalar:
    """A single element of R, C or H given by its real components."""

    algebra: Algebra
    components: tuple[float, float, float, float]

    @classmethod
    def of(cls, algebra, value) -> "Scalar":
        alg = Algebra.parse(algebra)
        if np.ndim(value) == 0:
            comps = to_components(alg, np.asarray(value, dtype=dtype(alg)))
        else:
            comps = np.zeros(4)
            vals = np.asarray(value, dtype=np.float64)
            comps[: vals.size] = vals
            if alg is not Algebra.H and np.any(comps[alg.dim:] != 0):
                raise ValueError(f"too many components for {alg.value}")
        return cls(alg, tuple(float(c) for c in comps))

    def raw(self):
        return from_components(self.algebra, np.array(self.components))

    def __mul__(self, other: "Scalar") -> "Scalar":
        return Scalar.of(self.algebra, mul(self.algebra, self.raw(), other.raw()))

    def __add__(self, other: "Scalar") -> "Scalar":
        return Scalar.of(self.algebra, self.raw() + other.raw())

    def conj(self) -> "Scalar":
        return Scalar.of(self.algebra, conj(self.algebra, self.raw()))

    def __abs__(self) -> float:
        return float(np.sqrt(sum(c * c for c in self.components)))
