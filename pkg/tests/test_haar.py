import json

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats as sps

from hualab import algebra as alg_
from hualab import matlin as ml
from hualab.algebra import Algebra
from hualab.haar import gaussian_kmatrix, haar_batch, haar_samples, haar_unitary
from hualab.rng import RngStream, as_generator

N = 20_000


def moments_match(a, b, z=4.0):
    """Two-sample z-test on the means of two independent samples."""
    se = np.hypot(a.std(ddof=1) / np.sqrt(a.size), b.std(ddof=1) / np.sqrt(b.size))
    return abs(a.mean() - b.mean()) <= z * se


# --- random streams -------------------------------------------------------

def test_stream_reproducible_and_distinct():
    a = RngStream(5, 0).generator().standard_normal(8)
    b = RngStream(5, 0).generator().standard_normal(8)
    c = RngStream(5, 1).generator().standard_normal(8)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_stream_masks_to_64_bits():
    assert RngStream(-1).seed == 2**64 - 1
    assert RngStream(2**64 + 3).seed == 3


def test_as_generator_accepts_common_inputs():
    g = np.random.default_rng(0)
    assert as_generator(g) is g
    assert isinstance(as_generator(RngStream(1)), np.random.Generator)
    assert isinstance(as_generator(7), np.random.Generator)
    with pytest.raises(TypeError):
        as_generator("seed")


# --- Ginibre matrices -------------------------------------------------------

def test_gaussian_components_standard_normal():
    gen = RngStream(11).generator()
    comps = np.concatenate([gaussian_kmatrix(Algebra.H, 3, gen).components().ravel()
                            for _ in range(3000)])
    comps = comps[comps != 0.0]
    se = 1 / np.sqrt(comps.size)
    assert abs(comps.mean()) < 4 * se
    assert abs(comps.var() - 1) < 4 * np.sqrt(2) * se


def test_gaussian_kmatrix_deterministic(alg):
    a = gaussian_kmatrix(alg, 3, RngStream(3))
    b = gaussian_kmatrix(alg, 3, RngStream(3))
    assert np.array_equal(a.data, b.data)
    with pytest.raises(ValueError):
        gaussian_kmatrix(alg, 0, RngStream(3))


# --- Haar samples -----------------------------------------------------------

@pytest.mark.parametrize("n", [1, 2, 5, 8])
def test_samples_are_group_elements(alg, n):
    raw = haar_batch(alg, n, 200, RngStream(n).generator())
    assert np.max(ml.unitarity_residual(alg, raw)) < 1e-10
    if alg is Algebra.R:
        np.testing.assert_allclose(np.linalg.det(raw), 1.0, atol=1e-10)


@given(st.sampled_from(list(Algebra)), st.integers(1, 5), st.integers(0, 2**63))
def test_single_sample_is_valid(alg, n, seed):
    g = haar_unitary(alg, n, RngStream(seed))
    assert g.n == n and g.algebra is alg


def test_entry_means_vanish_and_row_normalization(alg):
    n = 3
    raw = haar_batch(alg, n, N, RngStream(21).generator())
    comps = alg_.to_components(alg, raw)
    se = comps.std(axis=0, ddof=1) / np.sqrt(N)
    assert np.all(np.abs(comps.mean(axis=0)) <= 4 * se + 1e-15)
    a2 = alg_.abs2(alg, raw[:, 0, 0])
    assert abs(a2.mean() - 1 / n) <= 4 * a2.std(ddof=1) / np.sqrt(N)


def test_so3_corner_entry_uniform():
    raw = haar_batch(Algebra.R, 3, N, RngStream(3).generator())
    assert sps.kstest(raw[:, 0, 0], sps.uniform(-1, 2).cdf).pvalue >= 1e-3


def test_u2_corner_modulus_squared_uniform():
    raw = haar_batch(Algebra.C, 2, N, RngStream(4).generator())
    assert sps.kstest(np.abs(raw[:, 0, 0]) ** 2, sps.uniform(0, 1).cdf).pvalue >= 1e-3


def test_unitary_phase_is_uniform():
    # without a phase correction the diagonal would favour the positive axis
    raw = haar_batch(Algebra.C, 3, N, RngStream(8).generator())
    phase = np.angle(raw[:, 2, 2])
    assert sps.kstest(phase, sps.uniform(-np.pi, 2 * np.pi).cdf).pvalue >= 1e-3


@pytest.mark.parametrize("n", [2, 4])
def test_left_and_right_invariance(alg, n):
    gen = RngStream(99, n).generator()
    a = haar_unitary(alg, n, gen).data
    g = haar_batch(alg, n, N, gen)
    h = haar_batch(alg, n, N, gen)
    left = ml.matmul(alg, np.broadcast_to(a, g.shape), g)
    right = ml.matmul(alg, h, np.broadcast_to(a, h.shape))
    for moved in (left, right):
        for stat in (lambda x: alg_.real_part(alg, x[:, 0, 0]),
                     lambda x: alg_.abs2(alg, x[:, 0, n - 1]),
                     lambda x: alg_.real_part(alg, x[:, 1, 1])):
            assert moments_match(stat(moved), stat(h if moved is left else g))


def test_haar_samples_provenance_and_json():
    samples = haar_samples("sp", 2, 3, seed=42, stream_id=5)
    again = haar_samples("sp", 2, 3, seed=42, stream_id=5)
    assert [s.index for s in samples] == [0, 1, 2]
    text = json.dumps([s.to_json() for s in samples])
    assert text == json.dumps([s.to_json() for s in again])
    obj = json.loads(text)[1]
    assert obj["group"] == "Sp" and obj["provenance"] == {"seed": 42, "stream_id": 5, "index": 1}
    back = ml.KMatrix.from_json(obj)
    assert np.array_equal(back.data, samples[1].element.data)
