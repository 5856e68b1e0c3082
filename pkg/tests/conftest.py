import sys

import numpy as np
import pytest
from hypothesis import settings

from hualab.algebra import Algebra
from hualab.haar import haar_unitary
from hualab.matlin import GroupElement, KMatrix

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")

ALGEBRAS = list(Algebra)


def random_kmatrix(alg: Algebra, rows: int, cols: int | None = None, seed: int = 0, scale=1.0) -> KMatrix:
    """Gaussian matrix built from components, bypassing the library sampler."""
    cols = rows if cols is None else cols
    gen = np.random.default_rng(seed)
    comps = np.zeros((rows, cols, 4))
    comps[..., : alg.dim] = gen.standard_normal((rows, cols, alg.dim)) * scale
    return KMatrix.from_components(alg, comps)


def haar(alg: Algebra, n: int, seed: int = 0) -> GroupElement:
    return haar_unitary(alg, n, np.random.default_rng(seed))


def rotation(theta: float) -> GroupElement:
    c, s = np.cos(theta), np.sin(theta)
    return GroupElement(KMatrix.real([[c, -s], [s, c]]))


def quat_complex_embedding(m: KMatrix) -> np.ndarray:
    """q = z + w j  ->  [[z, w], [-conj(w), conj(z)]] blockwise (2n x 2n complex)."""
    c = m.components()
    z = c[..., 0] + 1j * c[..., 1]
    w = c[..., 2] + 1j * c[..., 3]
    return np.block([[z, w], [-w.conj(), z.conj()]])


@pytest.fixture(params=ALGEBRAS, ids=lambda a: a.value)
def alg(request):
    return request.param


def pytest_terminal_summary(terminalreporter):
    """One line per acceptance criterion, whatever the capture mode."""
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[number])
