"""Haar-distributed samples from SO(n), U(n) and Sp(n)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import algebra as alg_
from .algebra import Algebra
from .errors import NumericError
from .matlin import GroupElement, KMatrix
from .rng import RngStream, as_generator

MAX_RETRIES = 8
_RANK_TOL = 1e-10


@dataclass(frozen=True)
class HaarSample:
    element: GroupElement
    seed: int
    stream_id: int
    index: int

    def to_json(self) -> dict:
        return {
            **self.element.to_json(),
            "provenance": {"seed": self.seed, "stream_id": self.stream_id, "index": self.index},
        }


def gaussian_kmatrix(algebra, n: int, rng) -> KMatrix:
    """Ginibre matrix: every real component an independent N(0, 1) draw."""
    alg = Algebra.parse(algebra)
    if n < 1:
        raise ValueError("n must be positive")
    return KMatrix(alg, alg_.standard_normal(alg, as_generator(rng), (n, n)))


def orthonormalize(alg: Algebra, g: np.ndarray):
    """Modified Gram--Schmidt on the columns of a batch of square matrices.

    Each column is projected twice to keep orthogonality at machine
    precision.  Returns ``(q, ok)``; ``ok`` is False where a column collapsed.
    Quaternion columns are handled as complex pairs ``z + w j``.
    """
    if alg is Algebra.H:
        z, w = alg_.to_symplectic_pair(g)
        qz, qw, ok = _mgs_pairs(z, w)
        return alg_.from_symplectic_pair(qz, qw), ok
    n = g.shape[-1]
    ok = np.ones(g.shape[:-2], dtype=bool)
    basis = []
    for j in range(n):
        v = g[..., j]
        ref = np.sqrt(np.sum(alg_.abs2(alg, v), axis=-1))
        for _ in range(2):
            for q in basis:
                v = v - q * np.sum(np.conj(q) * v, axis=-1)[..., None]
        # GS diagonal r_jj is real and positive, the phase convention under
        # which the orthonormalized Ginibre matrix is exactly Haar.
        r = np.sqrt(np.sum(alg_.abs2(alg, v), axis=-1))
        ok &= r > _RANK_TOL * ref
        basis.append(v / np.where(r > 0, r, 1.0)[..., None])
    return np.stack(basis, axis=-1), ok


def _mgs_pairs(z: np.ndarray, w: np.ndarray):
    n = z.shape[-1]
    ok = np.ones(z.shape[:-2], dtype=bool)
    bz, bw = [], []
    for j in range(n):
        vz, vw = z[..., j], w[..., j]
        ref = np.sqrt(np.sum(np.abs(vz) ** 2 + np.abs(vw) ** 2, axis=-1))
        for _ in range(2):
            for qz, qw in zip(bz, bw):
                # s = <q, v>, then v <- v - q s (scalar on the right)
                sz = np.sum(np.conj(qz) * vz + qw * np.conj(vw), axis=-1)[..., None]
                sw = np.sum(np.conj(qz) * vw - qw * np.conj(vz), axis=-1)[..., None]
                vz = vz - (qz * sz - qw * np.conj(sw))
                vw = vw - (qz * sw + qw * np.conj(sz))
        r = np.sqrt(np.sum(np.abs(vz) ** 2 + np.abs(vw) ** 2, axis=-1))
        ok &= r > _RANK_TOL * ref
        r = np.where(r > 0, r, 1.0)[..., None]
        bz.append(vz / r)
        bw.append(vw / r)
    return np.stack(bz, axis=-1), np.stack(bw, axis=-1), ok


def _fix_orientation(alg: Algebra, q: np.ndarray) -> np.ndarray:
    if alg is not Algebra.R:
        return q
    neg = np.linalg.det(q) < 0
    q = q.copy()
    q[neg, -1, :] *= -1.0
    return q


def haar_batch(algebra, n: int, size: int, rng) -> np.ndarray:
    """``size`` independent Haar samples as a raw array."""
    alg = Algebra.parse(algebra)
    gen = as_generator(rng)
    g = alg_.standard_normal(alg, gen, (size, n, n))
    q, ok = orthonormalize(alg, g)
    for _ in range(MAX_RETRIES):
        if ok.all():
            break
        bad = np.flatnonzero(~ok)
        redo = alg_.standard_normal(alg, gen, (bad.size, n, n))
        q[bad], ok[bad] = orthonormalize(alg, redo)
    else:
        if not ok.all():
            raise NumericError("Gram-Schmidt breakdown persisted after retries")
    return _fix_orientation(alg, q)


def haar_unitary(group, n: int, rng) -> GroupElement:
    """One Haar-distributed element of SO(n), U(n) or Sp(n)."""
    alg = Algebra.parse(group)
    if n < 1:
        raise ValueError("n must be positive")
    return GroupElement(KMatrix(alg, haar_batch(alg, n, 1, rng)[0]))


def haar_samples(group, n: int, count: int, seed: int, stream_id: int = 0) -> list[HaarSample]:
    alg = Algebra.parse(group)
    stream = RngStream(seed, stream_id)
    raw = haar_batch(alg, n, count, stream.generator())
    return [HaarSample(GroupElement(KMatrix(alg, raw[i])), stream.seed, stream.stream_id, i)
            for i in range(count)]
