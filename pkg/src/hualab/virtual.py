"""The virtual orthogonal group through its cube coordinates.

Under the Hua--Pickrell law with parameters ``lambda_k`` the coordinates
``x_2, x_3, ...`` are independent and ``(1 + x_k) / 2`` is
``Beta(lambda_k + (k-1)/2, (k-1)/2)``.  A virtual element is represented by a
finite prefix ``x_2..x_kmax`` of these coordinates; nothing else about it is
modelled.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import matlin as ml
from .algebra import Algebra
from .closedform import ExponentSpec, cube_factor_cdf, pickrell_product_rhs
from .errors import DomainError
from .haar import haar_batch
from .montecarlo import collect_sharded, haar_cube_batch, run_sharded
from .rng import RngStream, as_generator
from .stats import ComparisonReport, StatCheck, ks_check
from .upsilon import chain_raw, cube_from_chain, integrand_from_cube, upsilon_raw

DEFAULT_KMAX = 64
SKIP_DEVIATION = 1e-15


def _parse_rule(rule: str | None):
    if rule is None or rule == "":
        return None
    if rule == "quadratic":
        return ("quadratic", 1.0)
    if rule.startswith("geometric:"):
        r = float(rule.split(":", 1)[1])
        if not 0 <= abs(r) < 1:
            raise DomainError(f"geometric ratio must satisfy |r| < 1, got {r}")
        return ("geometric", r)
    raise DomainError(f"unknown deviation rule {rule!r} (use 'geometric:r' or 'quadratic')")


@dataclass(frozen=True)
class LambdaSequence:
    """``lambda_k = base + d_k`` with ``d_k`` from explicit entries plus an
    optional summable rule: ``geometric:r`` gives ``r^k``, ``quadratic``
    gives ``1/k^2`` (both for ``k >= 1``)."""

    base: float
    deviations: dict = field(default_factory=dict)
    rule: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "base", float(self.base))
        devs = {int(k): float(v) for k, v in dict(self.deviations).items()}
        if any(k < 1 for k in devs):
            raise DomainError("deviation indices start at 1")
        object.__setattr__(self, "deviations", devs)
        _parse_rule(self.rule)
        if not self.base > -0.5:
            raise DomainError(f"base lambda must exceed -1/2, got {self.base}")

    @classmethod
    def constant(cls, base: float) -> "LambdaSequence":
        return cls(base)

    def deviation(self, k: int) -> float:
        d = self.deviations.get(k, 0.0)
        rule = _parse_rule(self.rule)
        if rule is not None:
            kind, r = rule
            d += r ** k if kind == "geometric" else 1.0 / (k * k)
        return d

    def value(self, k: int) -> float:
        return self.base + self.deviation(k)

    __call__ = value

    def values(self, k_max: int) -> np.ndarray:
        return np.array([self.value(k) for k in range(1, k_max + 1)])

    def deviation_sum(self, k_max: int | None = None) -> float:
        """``sum_k |lambda_k - lambda|``, exact for the rules."""
        explicit = sum(abs(v) for v in self.deviations.values())
        rule = _parse_rule(self.rule)
        if rule is None:
            return explicit
        if k_max is not None:
            return float(np.sum(np.abs(self.values(k_max) - self.base)))
        kind, r = rule
        tail = abs(r) / (1 - abs(r)) if kind == "geometric" else math.pi ** 2 / 6
        return explicit + tail

    def validate(self, k_max: int):
        for k in range(2, k_max + 1):
            lk = self.value(k)
            if not lk > -(k - 1) / 2:
                raise DomainError(f"lambda_{k} = {lk} must exceed {-(k - 1) / 2}")

    def with_base_only(self) -> "LambdaSequence":
        return LambdaSequence(self.base)

    def to_json(self) -> dict:
        out = {"base": self.base, "deviations": {str(k): v for k, v in sorted(self.deviations.items())}}
        if self.rule:
            out["rule"] = self.rule
        return out


@dataclass(frozen=True)
class VirtualElement:
    """Coordinates ``x_2..x_kmax`` and the law they were drawn from."""

    k_max: int
    coords: np.ndarray
    law: LambdaSequence

    def x(self, k: int) -> float:
        if not 2 <= k <= self.k_max:
            raise IndexError(f"coordinate {k} outside 2..{self.k_max}")
        return float(self.coords[k - 2])


def sample_coordinates(law: LambdaSequence, k_max: int, count: int, gen) -> np.ndarray:
    """``(count, k_max - 1)`` array of ``x_2..x_kmax``."""
    if k_max < 2:
        raise DomainError("k_max must be at least 2")
    law.validate(k_max)
    ks = np.arange(2, k_max + 1)
    a = law.values(k_max)[1:] + (ks - 1) / 2
    b = (ks - 1) / 2
    t = gen.beta(a, b, size=(count, ks.size))
    return 2.0 * t - 1.0


def sample_virtual(law: LambdaSequence, k_max: int, rng) -> VirtualElement:
    x = sample_coordinates(law, k_max, 1, as_generator(rng))[0]
    x.setflags(write=False)
    return VirtualElement(k_max, x, law)


def phi_batch(x: np.ndarray, law: LambdaSequence) -> np.ndarray:
    """``2^(lambda_1 - lambda) prod_j (1 + x_j)^(lambda_j - lambda)`` over the
    rows of ``x`` (columns ``x_2..``)."""
    x = np.atleast_2d(x)
    k_max = x.shape[1] + 1
    log_phi = np.full(x.shape[0], law.deviation(1) * math.log(2.0))
    for k in range(2, k_max + 1):
        d = law.deviation(k)
        if abs(d) < SKIP_DEVIATION:
            continue
        with np.errstate(divide="ignore"):
            log_phi = log_phi + d * np.log(1.0 + x[:, k - 2])
    return np.exp(log_phi)


def phi(element: VirtualElement, law: LambdaSequence | None = None) -> float:
    """Value of Phi at a virtual element (``inf`` when some ``x_j = -1``
    carries a negative deviation)."""
    law = element.law if law is None else law
    return float(phi_batch(element.coords[None], law)[0])


def phi_integral_mc(law: LambdaSequence, k_max: int, n_samples: int, seed: int,
                    shards: int = 1) -> ComparisonReport:
    """Integral of Phi against the base Hua--Pickrell law (``lambda_k = lambda``)."""
    law.validate(k_max)
    base = law.with_base_only()

    def kernel(gen, count):
        return phi_batch(sample_coordinates(base, k_max, count, gen), law), 0

    est = run_sharded(kernel, n_samples, seed, shards)
    rhs = pickrell_product_rhs(law, law.base, k_max)
    report = ComparisonReport.build(est, rhs, name=f"pickrell k_max={k_max}", seed=seed,
                                    law=law.to_json(), tail_bound=rhs.tail_bound)
    mean = abs(est.mean)
    inconclusive = mean == 0 or est.stderr / mean > 0.5
    if inconclusive:
        report.extra["inconclusive"] = True
    return report


def truncation_diagnostic(law: LambdaSequence, k_grid, n_samples: int, seed: int) -> dict:
    """Partial Phi means on a common sample for each truncation in ``k_grid``
    together with the matching closed-form partial products."""
    k_grid = sorted(int(k) for k in k_grid)
    k_top = k_grid[-1]
    base = law.with_base_only()
    x = sample_coordinates(base, k_top, n_samples, RngStream(seed, 0).generator())
    rows = []
    prev = None
    for k in k_grid:
        vals = phi_batch(x[:, : k - 1], law)
        mean = float(vals.mean())
        rhs = pickrell_product_rhs(law, law.base, k).value.real
        rows.append({
            "k": k,
            "mc_mean": mean,
            "mc_stderr": float(vals.std(ddof=1) / math.sqrt(vals.size)),
            "closed_form": rhs,
            "mc_delta": None if prev is None else mean - prev[0],
            "closed_form_delta": None if prev is None else rhs - prev[1],
        })
        prev = (mean, rhs)
    return {"law": law.to_json(), "samples": n_samples, "seed": seed, "rows": rows}


# --- statistical batteries ----------------------------------------------------

def coordinate_ks_battery(lams=(0.0, 1.0, 2.5), k_max: int = 10, n_samples: int = 100000,
                          seed: int = 0) -> list[StatCheck]:
    checks = []
    for i, lam in enumerate(lams):
        law = LambdaSequence(lam)
        x = sample_coordinates(law, k_max, n_samples, RngStream(seed, i).generator())
        for k in range(2, k_max + 1):
            checks.append(ks_check(f"coordinate x_{k} lambda={lam:g}", x[:, k - 2],
                                   lambda t, k=k, lam=lam: cube_factor_cdf(k, t, lam)))
    return checks


def finite_level_consistency(n: int, n_samples: int, seed: int) -> list[StatCheck]:
    """Haar ``SO(n)`` cube coordinates and ``lambda = 0`` virtual coordinates
    pass the same per-coordinate KS tests."""
    _, x_haar, _ = haar_cube_batch(Algebra.R, n, n_samples, RngStream(seed, 0).generator())
    x_virt = sample_coordinates(LambdaSequence(0.0), n, n_samples, RngStream(seed, 1).generator())
    checks = []
    for k in range(2, n + 1):
        cdf = (lambda t, k=k: cube_factor_cdf(k, t))
        checks.append(ks_check(f"SO({n}) Haar x_{k}", x_haar[:, k - 1], cdf))
        checks.append(ks_check(f"virtual x_{k}", x_virt[:, k - 2], cdf))
    return checks


def _bounded_stats(g: np.ndarray) -> dict:
    n = g.shape[-1]
    return {
        "g_nn": g[:, n - 1, n - 1],
        "trace": np.trace(g, axis1=-2, axis2=-1),
        "g_1n": g[:, 0, n - 1],
    }


def quasi_invariance_test(size: int, k: int, lam: float, n_samples: int, seed: int,
                          shards: int = 1, rn: str = "upsilon") -> list[StatCheck]:
    """Two-sided check of ``E[f(T S)] = E[f(S) RN]`` under the Hua--Pickrell
    law ``det(1 + S)^lam`` on ``SO(size)``, ``T S = diag(1, A) S diag(1, B)``.

    Written against Haar measure: ``w(S) f(S)`` and ``w(S) RN(S) f(T S)``
    have equal means, where ``RN(S) = w(T S) / w(S)``.  With
    ``rn="upsilon"`` it is computed from ``Upsilon^(size-k)(S)`` alone, with
    ``rn="direct"`` from the chains of ``S`` and ``T S``; ``rn="none"`` drops
    it (a negative control that should fail).  The paired difference is
    z-tested.
    """
    if not 1 <= k < size:
        raise DomainError("need 1 <= k < size")
    if rn not in ("upsilon", "direct", "none"):
        raise ValueError(f"unknown rn mode {rn!r}")
    n = size - k
    gen0 = RngStream(seed, 1 << 32).generator()
    a = haar_batch(Algebra.R, k, 1, gen0)
    b = haar_batch(Algebra.R, k, 1, gen0)
    ea = ml.embed_lower(Algebra.R, a, n)
    eb = ml.embed_lower(Algebra.R, b, n)
    spec = ExponentSpec(Algebra.R, [lam] * size)

    def kernel(gen, count):
        s, x, _ = haar_cube_batch(Algebra.R, size, count, gen)
        w = integrand_from_cube(Algebra.R, x, spec, False).real
        ts = ea @ s @ eb
        if rn == "upsilon":
            h, singular = upsilon_raw(Algebra.R, s, n)
            num = np.linalg.det(np.eye(k) + a @ h @ b)
            den = np.linalg.det(np.eye(k) + h)
            with np.errstate(divide="ignore", invalid="ignore"):
                ratio = np.where(singular | (den <= 0), np.nan, (np.maximum(num, 0.0) / den) ** lam)
        elif rn == "direct":
            y, singular, _ = chain_raw(Algebra.R, ts)
            wt = integrand_from_cube(Algebra.R, cube_from_chain(Algebra.R, y), spec, False).real
            ratio = np.where(singular | (w <= 0), np.nan, wt / np.where(w > 0, w, 1.0))
        else:
            ratio = np.ones_like(w)
        fs, fts = _bounded_stats(s), _bounded_stats(ts)
        out = {"w": w, "rn": ratio}
        out.update({f"lhs_{key}": w * fs[key] for key in fs})
        out.update({f"rhs_{key}": w * ratio * fts[key] for key in fts})
        return out

    data = collect_sharded(kernel, n_samples, seed, shards)
    ok = np.isfinite(data["rn"])
    checks = []
    for key in ("g_nn", "trace", "g_1n"):
        lhs, rhs = data[f"lhs_{key}"][ok], data[f"rhs_{key}"][ok]
        wbar = data["w"][ok].mean()
        d = lhs - rhs
        se = float(d.std(ddof=1) / math.sqrt(d.size))
        z = abs(float(d.mean())) / se if se > 0 else 0.0
        checks.append(StatCheck(
            f"SO({size}) k={k} lambda={lam:g} quasi-invariance {key}", "paired", z, z <= 4.0, None,
            {"lhs": float(lhs.mean() / wbar), "rhs": float(rhs.mean() / wbar), "stderr": se / wbar,
             "dropped": int((~ok).sum())}))
    return checks
