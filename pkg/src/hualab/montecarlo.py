"""Sharded Monte Carlo estimators for the group and ball integrals, and the
distribution-level tests of the Haar pushforward.

Work is split into shards; shard ``k`` draws from ``RngStream(seed, k)`` in
fixed-size batches and the shard estimates are merged in shard order, so a
result depends only on ``(seed, shards)`` and never on how many threads ran.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import special

from . import algebra as alg_
from . import matlin as ml
from .algebra import Algebra
from .closedform import (ExponentSpec, ball_constant, ball_integral_rhs, ball_tau,
                         cube_factor_cdf, radial_expectation)
from .errors import DomainError, NumericError
from .haar import haar_batch
from .matlin import KMatrix
from .rng import RngStream, as_generator
from .stats import (ComparisonReport, McEstimate, StatCheck, correlation_check,
                    exact_mean_check, ks_check, ratio_estimate, two_sample_check)
from .upsilon import chain_raw, cube_from_chain, integrand_from_cube, upsilon_raw

BATCH_SIZE = 20000
MAX_REDRAWS = 20
MIN_ACCEPTANCE = 1e-4


def thread_cap() -> int:
    raw = os.environ.get("HUA_LAB_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return os.cpu_count() or 1


def shard_counts(total: int, shards: int) -> list[int]:
    if shards < 1:
        raise DomainError("need at least one shard")
    base, extra = divmod(int(total), shards)
    return [base + (1 if k < extra else 0) for k in range(shards)]


def _map_shards(job: Callable[[int, int], object], counts: list[int]) -> list:
    workers = min(len(counts), thread_cap())
    if workers <= 1:
        return [job(k, c) for k, c in enumerate(counts)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(job, range(len(counts)), counts))


def run_sharded(kernel: Callable, n_samples: int, seed: int, shards: int = 1,
                batch_size: int = BATCH_SIZE) -> McEstimate:
    """``kernel(gen, count) -> (values, discarded)`` evaluated over shards."""

    def job(k: int, count: int) -> McEstimate:
        gen = RngStream(seed, k).generator()
        est = McEstimate()
        done = 0
        while done < count:
            c = min(batch_size, count - done)
            values, discarded = kernel(gen, c)
            est = est.merge(McEstimate.from_values(values, discarded))
            done += c
        return est

    total = McEstimate()
    for est in _map_shards(job, shard_counts(n_samples, shards)):
        total = total.merge(est)
    return total


def collect_sharded(kernel: Callable, n_samples: int, seed: int, shards: int = 1,
                    batch_size: int = BATCH_SIZE) -> dict:
    """Like :func:`run_sharded` but concatenates per-sample dicts of arrays."""

    def job(k: int, count: int) -> list:
        gen = RngStream(seed, k).generator()
        parts, done = [], 0
        while done < count:
            c = min(batch_size, count - done)
            parts.append(kernel(gen, c))
            done += c
        return parts

    parts = [p for shard in _map_shards(job, shard_counts(n_samples, shards)) for p in shard]
    if not parts:
        return {}
    return {key: np.concatenate([p[key] for p in parts]) for key in parts[0]}


# --- Haar chains --------------------------------------------------------------

def haar_cube_batch(alg: Algebra, n: int, count: int, gen) -> tuple[np.ndarray, np.ndarray, int]:
    """``count`` Haar samples with well-defined chains.

    Returns ``(g, x, discarded)`` with ``x`` the cube coordinates
    ``x_1..x_n``; samples whose chain hits a singular step are redrawn.
    """
    g = haar_batch(alg, n, count, gen)
    y, singular, _ = chain_raw(alg, g)
    discarded = 0
    for _ in range(MAX_REDRAWS):
        if not singular.any():
            break
        bad = np.flatnonzero(singular)
        discarded += bad.size
        g[bad] = haar_batch(alg, n, bad.size, gen)
        y[bad], singular[bad], _ = chain_raw(alg, g[bad])
    else:
        if singular.any():
            raise NumericError("singular chains persisted after redraws")
    return g, cube_from_chain(alg, y), discarded


def _chain_kernel(spec: ExponentSpec, with_theta: bool):
    alg, n = spec.algebra, spec.n

    def kernel(gen, count):
        _, x, discarded = haar_cube_batch(alg, n, count, gen)
        vals = integrand_from_cube(alg, x, spec, with_theta)
        if alg is not Algebra.C:
            vals = vals.real
        return vals, discarded

    return kernel


def group_integral_mc(spec: ExponentSpec, n_samples: int, seed: int, shards: int = 1) -> McEstimate:
    """Haar average of the chain integrand (no theta weights)."""
    spec.require_domain()
    return run_sharded(_chain_kernel(spec, False), n_samples, seed, shards)


def theta_integral_mc(spec: ExponentSpec, n_samples: int, seed: int, shards: int = 1) -> McEstimate:
    """Haar average of the chain integrand with the theta weights."""
    spec.require_domain()
    return run_sharded(_chain_kernel(spec, True), n_samples, seed, shards)


# --- matrix balls -------------------------------------------------------------

def _ball_gram(alg: Algebra, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Membership mask and ``det(1 - Z*Z)`` for a batch of square matrices."""
    m = ml.mat_shape(alg, z)[0]
    if m == 1:
        d = 1.0 - alg_.abs2(alg, z[..., 0, 0, :] if alg is Algebra.H else z[..., 0, 0])
        return d > 0, d
    gram = ml.identity(alg, m) - ml.matmul(alg, ml.adjoint(alg, z), z)
    if m == 2:
        a = alg_.real_part(alg, ml.entry(alg, gram, 0, 0))
        b = alg_.real_part(alg, ml.entry(alg, gram, 1, 1))
        q2 = alg_.abs2(alg, ml.entry(alg, gram, 0, 1))
        d = a * b - q2
        return (a > 0) & (d > 0), d
    emb = ml.real_embedding_raw(alg, gram)
    emb = 0.5 * (emb + np.swapaxes(emb, -1, -2))
    eig = np.linalg.eigvalsh(emb)
    inside = eig[..., 0] > 0
    d = np.prod(np.where(inside[..., None], eig, 0.0), axis=-1) ** (1.0 / alg.dim)
    return inside, d


def ball_uniform_batch(alg: Algebra, m: int, count: int, gen) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``count`` cube draws; returns ``(Z, inside, det(1 - Z*Z))``."""
    shape = (count, m, m) + alg_.scalar_shape(alg)
    if alg is Algebra.C:
        u = gen.uniform(-1.0, 1.0, size=shape + (2,))
        z = u[..., 0] + 1j * u[..., 1]
    else:
        z = gen.uniform(-1.0, 1.0, size=shape)
    inside, d = _ball_gram(alg, z)
    return z, inside, d


def _check_ball_feasible(alg: Algebra, m: int):
    if m < 1 or m * alg.dim > 8:
        raise DomainError(f"rejection sampling of the {m}x{m} ball over {alg.value} is "
                          "infeasible (need m * dim <= 8); use a smaller m")


def ball_uniform_sample(algebra, m: int, rng, max_tries: int = 1000000):
    """One uniform draw from the open unit ball of ``m x m`` matrices."""
    alg = Algebra.parse(algebra)
    _check_ball_feasible(alg, m)
    gen = as_generator(rng)
    tries = 0
    while tries < max_tries:
        z, inside, _ = ball_uniform_batch(alg, m, 256, gen)
        tries += 256
        hit = np.flatnonzero(inside)
        if hit.size:
            return KMatrix(alg, z[hit[0]])
    raise NumericError(f"acceptance rate below {1 / max_tries:.1e}; use a smaller m")


def _schur_pivots(alg: Algebra, a: np.ndarray) -> np.ndarray:
    """Pivots of elimination without row exchanges (top-left first)."""
    m = ml.mat_shape(alg, a)[0]
    piv = []
    cur = a
    for j in range(m):
        p = ml.entry(alg, cur, 0, 0)
        piv.append(p)
        if j == m - 1:
            break
        pinv = alg_.inv(alg, p)
        left = alg_.mul(alg, ml.sub(alg, cur, slice(1, None), slice(0, 1)), pinv[..., None, None, :]
                        if alg is Algebra.H else pinv[..., None, None])
        cur = ml.sub(alg, cur, slice(1, None), slice(1, None)) - ml.matmul(
            alg, left, ml.sub(alg, cur, slice(0, 1), slice(1, None)))
    return np.stack(piv, axis=-2 if alg is Algebra.H else -1)


def ball_integrand(alg: Algebra, z: np.ndarray, spec: ExponentSpec) -> np.ndarray:
    """``prod_k det(1 + [Z]_(m-k+1))^(lam_k - lam_(k-1))`` (and the conjugate
    ``mu`` part for C), each power through principal logs of the elimination
    pivots of ``1 + Z``; these have positive real part inside the ball."""
    m = ml.mat_shape(alg, z)[0]
    if spec.n != m:
        raise DomainError("spec length must equal the ball size")
    piv = _schur_pivots(alg, z + ml.identity(alg, m))
    with np.errstate(divide="ignore"):
        if alg is Algebra.H:
            logs = 0.5 * np.log(np.sum(piv * piv, axis=-1))
        elif alg is Algebra.C:
            logs = np.log(piv)
        else:
            logs = np.log(np.maximum(piv, 0.0))
    cum = np.cumsum(logs, axis=-1)  # cum[..., j-1] = log det(1 + [Z]_j)
    total = np.zeros(cum.shape[:-1], dtype=np.complex128)
    prev_l, prev_m = 0j, 0j
    for k in range(1, m + 1):
        lam, mu = complex(spec.lam[k - 1]), complex(spec.mus[k - 1])
        lj = cum[..., m - k]
        if lam != prev_l:
            total = total + (lam - prev_l) * lj
        if mu != prev_m:
            total = total + (mu - prev_m) * np.conj(lj)
        prev_l, prev_m = lam, mu
    return np.exp(total)


@dataclass(frozen=True)
class BallEstimate:
    estimate: McEstimate
    accepted: int
    drawn: int

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.drawn if self.drawn else 0.0


def ball_integral_mc(algebra, m: int, tau: float | None = None, spec: ExponentSpec | None = None,
                     n_samples: int = 100000, seed: int = 0, shards: int = 1,
                     alpha: float | None = None, batch_size: int = 1 << 16) -> BallEstimate:
    """Rejection estimate of ``int_{||Z||<1} f(Z) det(1 - Z*Z)^(tau-1) dZ``.

    ``n_samples`` counts accepted draws.  ``f`` is :func:`ball_integrand` for
    ``spec`` (constant 1 without a spec).  Passing ``alpha`` fixes ``tau``
    from the weighted ball integrand.
    """
    alg = Algebra.parse(algebra)
    _check_ball_feasible(alg, m)
    if alpha is not None:
        tau = ball_tau(alg, m, alpha)
    if tau is None or not tau > 0:
        raise DomainError("tau must be positive")
    if spec is not None and (spec.algebra is not alg or spec.n != m):
        raise DomainError("exponent spec does not match the ball")
    volume = 2.0 ** (alg.dim * m * m)

    def job(k: int, target: int):
        gen = RngStream(seed, k).generator()
        est, accepted, drawn = McEstimate(), 0, 0
        while accepted < target:
            z, inside, d = ball_uniform_batch(alg, m, batch_size, gen)
            cum = np.cumsum(inside)
            if accepted + cum[-1] >= target:
                cut = int(np.searchsorted(cum, target - accepted)) + 1
                z, inside, d = z[:cut], inside[:cut], d[:cut]
            if drawn + inside.size > 1000 and (accepted + inside.sum()) < MIN_ACCEPTANCE * (drawn + inside.size):
                raise DomainError("ball acceptance rate below 1e-4; use a smaller m")
            vals = np.zeros(inside.size, dtype=np.complex128 if alg is Algebra.C else np.float64)
            idx = np.flatnonzero(inside)
            w = d[idx] ** (tau - 1.0)
            if spec is not None:
                f = ball_integrand(alg, z[idx], spec)
                w = w * (f if alg is Algebra.C else f.real)
            vals[idx] = volume * w
            est = est.merge(McEstimate.from_values(vals))
            accepted += idx.size
            drawn += inside.size
        return est, accepted, drawn

    total, acc, drawn = McEstimate(), 0, 0
    for est, a, dr in _map_shards(job, shard_counts(n_samples, shards)):
        total = total.merge(est)
        acc += a
        drawn += dr
    return BallEstimate(total, acc, drawn)


def compare_ball_constant(algebra, m: int, tau: float, n_samples: int, seed: int,
                          shards: int = 1) -> ComparisonReport:
    res = ball_integral_mc(algebra, m, tau=tau, n_samples=n_samples, seed=seed, shards=shards)
    return ComparisonReport.build(res.estimate, ball_constant(algebra, m, tau),
                                  name=f"ball-constant {Algebra.parse(algebra).value} m={m} tau={tau:g}",
                                  seed=seed, acceptance_rate=res.acceptance_rate)


def compare_ball_integral(algebra, m: int, alpha: float, spec: ExponentSpec, n_samples: int,
                          seed: int, shards: int = 1) -> ComparisonReport:
    res = ball_integral_mc(algebra, m, alpha=alpha, spec=spec, n_samples=n_samples,
                           seed=seed, shards=shards)
    return ComparisonReport.build(res.estimate, ball_integral_rhs(algebra, m, alpha, spec),
                                  name=f"ball {Algebra.parse(algebra).value} m={m} alpha={alpha:g}",
                                  seed=seed, acceptance_rate=res.acceptance_rate)


# --- distribution-level tests -------------------------------------------------

def _stat_re(alg: Algebra, a: np.ndarray) -> np.ndarray:
    return alg_.real_part(alg, a)


def _trace_re(alg: Algebra, g: np.ndarray) -> np.ndarray:
    n = ml.mat_shape(alg, g)[0]
    return sum(_stat_re(alg, ml.entry(alg, g, i, i)) for i in range(n))


def _test_functions(alg: Algebra, h: np.ndarray) -> dict:
    """Five bounded statistics of a batch of unitary matrices, chosen so that
    they stay functionally independent even on SO(2)."""
    n = ml.mat_shape(alg, h)[0]
    h2 = ml.matmul(alg, h, h)
    if n >= 2:
        off = _stat_re(alg, ml.entry(alg, h, 1, 0))
    elif alg is Algebra.R:
        off = np.zeros(h.shape[0])
    else:
        off = alg_.to_components(alg, ml.entry(alg, h, 0, 0))[..., 1]
    return {
        "re_h11": _stat_re(alg, ml.entry(alg, h, 0, 0)),
        "abs2_h11": alg_.abs2(alg, ml.entry(alg, h, 0, 0)),
        "h21": off,
        "re_trace_h2": _trace_re(alg, h2),
        "re_trace_h3": _trace_re(alg, ml.matmul(alg, h2, h)),
    }


def _block_power_sums(alg: Algebra, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``sum r_i^2`` and ``sum r_i^4`` over the singular values of ``b``."""
    e = ml.real_embedding_raw(alg, b)
    gram = np.swapaxes(e, -1, -2) @ e
    s1 = np.trace(gram, axis1=-2, axis2=-1) / alg.dim
    s2 = np.trace(gram @ gram, axis1=-2, axis2=-1) / alg.dim
    return s1, s2


def radial_coordinate_law(alg: Algebra, n: int):
    """For ``m = 1``: the statistic of ``g_11`` and its Beta cdf."""
    d = alg.dim
    if alg is Algebra.R:
        a = (n - 1) / 2
        return (lambda g11: (1 + g11) / 2), (lambda t: special.betainc(a, a, t))
    a, b = d / 2, (n - 1) * d / 2
    return (lambda g11: alg_.abs2(alg, g11)), (lambda t: special.betainc(a, b, t))


def pushforward_haar_test(group, n: int, m: int, n_samples: int, seed: int,
                          shards: int = 1) -> list:
    """Checks that ``Upsilon^m`` pushes Haar measure forward to Haar measure,
    that the block ``[g]_m`` has the radial law, and that the two are
    uncorrelated."""
    alg = Algebra.parse(group)
    if not 1 <= m < n:
        raise DomainError("need 1 <= m < n")

    def kernel(gen, count):
        g = haar_batch(alg, n, count, gen)
        h, singular = upsilon_raw(alg, g, m)
        redraw = 0
        while singular.any():
            bad = np.flatnonzero(singular)
            redraw += bad.size
            g[bad] = haar_batch(alg, n, bad.size, gen)
            h[bad], singular[bad] = upsilon_raw(alg, g[bad], m)
        direct = haar_batch(alg, n - m, count, gen)
        block = ml.sub(alg, g, slice(0, m), slice(0, m))
        s1, s2 = _block_power_sums(alg, block)
        out = {f"img_{k}": v for k, v in _test_functions(alg, h).items()}
        out.update({f"dir_{k}": v for k, v in _test_functions(alg, direct).items()})
        out["block_s1"], out["block_s2"] = s1, s2
        out["g11"] = ml.entry(alg, g, 0, 0)
        return out

    data = collect_sharded(kernel, n_samples, seed, shards)
    label = f"{alg.group}({n}) m={m}"
    checks = []
    for key in _test_functions(alg, haar_batch(alg, n - m, 1, np.random.default_rng(0))):
        checks.append(two_sample_check(f"{label} pushforward moment {key}",
                                       data[f"img_{key}"], data[f"dir_{key}"]))
    checks.append(exact_mean_check(f"{label} E|g11|^2 = 1/n", alg_.abs2(alg, data["g11"]), 1.0 / n))
    if m == 1:
        stat, cdf = radial_coordinate_law(alg, n)
        checks.append(ks_check(f"{label} radial law of g11", stat(data["g11"]), cdf))
    if n >= 2 * m:
        for key, fn in (("s1", lambda r: np.sum(r ** 2)), ("s2", lambda r: np.sum(r ** 4))):
            exact = radial_expectation(alg, n, m, fn)
            checks.append(exact_mean_check(f"{label} radial moment {key}", data[f"block_{key}"], exact))
    checks.append(correlation_check(f"{label} independence of image and block",
                                    data["img_re_trace_h2"], data["block_s1"]))
    return checks


def cube_law_test(n: int, n_samples: int, seed: int, shards: int = 1) -> list:
    """Per-coordinate KS tests of the cube coordinates of Haar ``SO(n)``."""

    def kernel(gen, count):
        _, x, _ = haar_cube_batch(Algebra.R, n, count, gen)
        return {"x": x}

    x = collect_sharded(kernel, n_samples, seed, shards)["x"]
    checks = []
    for k in range(2, n + 1):
        checks.append(ks_check(f"SO({n}) cube coordinate x_{k}", x[:, k - 1],
                               lambda t, k=k: cube_factor_cdf(k, t)))
    return checks


def measure_consistency_test(group, n: int, spec: ExponentSpec, n_samples: int, seed: int,
                             shards: int = 1) -> list:
    """Weighted pushforward under ``Upsilon^1``.

    Self-normalized averages of test functions of ``Upsilon^1(g)`` with the
    weight of ``spec`` on size ``n`` are compared with averages over an
    independent Haar sample of size ``n - 1`` weighted by the truncated spec.
    Weights must be real (real exponents, or ``mu = conj(lambda)`` for C).
    """
    alg = Algebra.parse(group)
    if spec.algebra is not alg or spec.n != n or n < 3:
        raise DomainError("spec must match the group and n >= 3")
    spec.require_domain()
    small = ExponentSpec(alg, spec.lam[:-1], spec.mu[:-1] if spec.mu is not None else None)

    def kernel(gen, count):
        g, x, _ = haar_cube_batch(alg, n, count, gen)
        w = integrand_from_cube(alg, x, spec, False)
        h, _ = upsilon_raw(alg, g, 1)
        g2, x2, _ = haar_cube_batch(alg, n - 1, count, gen)
        w2 = integrand_from_cube(alg, x2, small, False)
        out = {"w": w.real, "w_imag": w.imag, "w2": w2.real}
        out.update({f"a_{k}": v for k, v in _test_functions(alg, h).items()})
        out.update({f"b_{k}": v for k, v in _test_functions(alg, g2).items()})
        return out

    data = collect_sharded(kernel, n_samples, seed, shards)
    if np.max(np.abs(data["w_imag"])) > 1e-9 * max(1.0, np.max(np.abs(data["w"]))):
        raise DomainError("measure consistency test needs real weights")
    checks = []
    keys = [k[2:] for k in data if k.startswith("a_")]
    for key in keys:
        ta, sa = ratio_estimate(data["w"], data[f"a_{key}"])
        tb, sb = ratio_estimate(data["w2"], data[f"b_{key}"])
        se = math.hypot(sa, sb)
        z = abs(ta - tb) / se if se > 0 else (0.0 if abs(ta - tb) < 1e-9 else math.inf)
        checks.append(StatCheck(f"{alg.group}({n}) weighted pushforward {key}", "ratio", z, z <= 4.0,
                                None, {"lhs": ta, "rhs": tb, "stderr": se}))
    return checks
