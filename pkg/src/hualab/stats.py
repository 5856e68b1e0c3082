"""Streaming estimates, comparison reports and goodness-of-fit tests."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import special

from .closedform import ClosedFormValue
from .errors import DomainError

Z_THRESHOLD = 4.0
KS_P_MIN = 1e-3
DISCARD_WARN_RATE = 1e-3


def _json_complex(z: complex) -> dict:
    return {"re": float(z.real), "im": float(z.imag)}


@dataclass(frozen=True)
class McEstimate:
    """Mean of i.i.d. (possibly complex) draws with a Welford-style ``m2``.

    ``m2`` is the sum of ``|x - mean|^2``, so ``stderr`` is the standard
    error of the complex mean (real and imaginary variances added).
    """

    mean: complex = 0j
    m2: float = 0.0
    samples: int = 0
    discarded: int = 0

    @classmethod
    def from_values(cls, values, discarded: int = 0) -> "McEstimate":
        v = np.asarray(values)
        if v.size == 0:
            return cls(discarded=discarded)
        mean = complex(np.mean(v))
        m2 = float(np.sum(np.abs(v - mean) ** 2))
        return cls(mean, m2, int(v.size), int(discarded))

    def merge(self, other: "McEstimate") -> "McEstimate":
        n = self.samples + other.samples
        if n == 0:
            return McEstimate(discarded=self.discarded + other.discarded)
        delta = other.mean - self.mean
        mean = self.mean + delta * other.samples / n
        m2 = self.m2 + other.m2 + abs(delta) ** 2 * self.samples * other.samples / n
        return McEstimate(mean, m2, n, self.discarded + other.discarded)

    @property
    def variance(self) -> float:
        return self.m2 / (self.samples - 1) if self.samples > 1 else 0.0

    @property
    def stderr(self) -> float:
        return math.sqrt(self.variance / self.samples) if self.samples > 1 else 0.0

    @property
    def discard_rate(self) -> float:
        total = self.samples + self.discarded
        return self.discarded / total if total else 0.0

    @property
    def warning(self) -> str | None:
        if self.discard_rate > DISCARD_WARN_RATE:
            return f"discard rate {self.discard_rate:.2e} exceeds {DISCARD_WARN_RATE:g}"
        return None

    def to_json(self) -> dict:
        out = {
            "mean": _json_complex(self.mean),
            "stderr": self.stderr,
            "samples": self.samples,
            "discarded": self.discarded,
        }
        if self.warning:
            out["warning"] = self.warning
        return out


def z_score(diff: complex, stderr: float, atol: float = 1e-12) -> float:
    """``|diff| / stderr``; a zero-noise estimate is exact or infinitely off."""
    if stderr > 0:
        return abs(diff) / stderr
    return 0.0 if abs(diff) <= atol else math.inf


@dataclass(frozen=True)
class ComparisonReport:
    """Monte Carlo estimate against a closed-form value."""

    estimate: McEstimate
    closed_form: ClosedFormValue
    z_score: float
    passed: bool
    name: str = ""
    threshold: float = Z_THRESHOLD
    seed: int | None = None
    attempts: int = 1
    extra: dict = field(default_factory=dict)

    @classmethod
    def build(cls, estimate: McEstimate, closed_form: ClosedFormValue, name: str = "",
              threshold: float = Z_THRESHOLD, seed=None, **extra) -> "ComparisonReport":
        cf = closed_form.value
        atol = 1e-12 * max(1.0, abs(cf))
        z = z_score(estimate.mean - cf, estimate.stderr, atol)
        return cls(estimate, closed_form, z, z <= threshold, name, threshold, seed, 1, extra)

    @property
    def pass_(self) -> bool:
        return self.passed

    def to_json(self) -> dict:
        out = {
            "name": self.name,
            "kind": "comparison",
            "estimate": self.estimate.to_json(),
            "closed_form": self.closed_form.to_json(),
            "z_score": self.z_score,
            "threshold": self.threshold,
            "pass": self.passed,
            "attempts": self.attempts,
        }
        if self.seed is not None:
            out["seed"] = self.seed
        out.update(self.extra)
        return out


@dataclass(frozen=True)
class StatCheck:
    """Outcome of a test that is not a comparison with a closed form:
    two-sample z-tests, correlations and KS tests."""

    name: str
    kind: str
    statistic: float
    passed: bool
    p_value: float | None = None
    detail: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        out = {"name": self.name, "kind": self.kind, "statistic": self.statistic,
               "pass": self.passed}
        if self.p_value is not None:
            out["p_value"] = self.p_value
        out.update(self.detail)
        return out


def ks_test(samples, cdf: Callable) -> tuple[float, float]:
    """One-sample Kolmogorov--Smirnov test with the asymptotic p-value."""
    x = np.sort(np.asarray(samples, dtype=np.float64).ravel())
    n = x.size
    if n < 100:
        raise DomainError(f"KS test needs at least 100 samples, got {n}")
    f = np.asarray(cdf(x), dtype=np.float64)
    i = np.arange(1, n + 1)
    d = float(max(np.max(i / n - f), np.max(f - (i - 1) / n)))
    return d, float(special.kolmogorov(math.sqrt(n) * d))


def ks_check(name: str, samples, cdf: Callable, p_min: float = KS_P_MIN) -> StatCheck:
    d, p = ks_test(samples, cdf)
    return StatCheck(name, "ks", d, p >= p_min, p, {"samples": int(np.size(samples)), "p_min": p_min})


def mean_and_se(values) -> tuple[float, float]:
    v = np.asarray(values, dtype=np.float64)
    return float(v.mean()), float(v.std(ddof=1) / math.sqrt(v.size))


def two_sample_check(name: str, a, b, threshold: float = Z_THRESHOLD) -> StatCheck:
    """z-test that two independent samples share a mean."""
    ma, sa = mean_and_se(a)
    mb, sb = mean_and_se(b)
    se = math.hypot(sa, sb)
    z = z_score(ma - mb, se, 1e-9)
    return StatCheck(name, "two-sample", z, z <= threshold, None,
                     {"mean_a": ma, "mean_b": mb, "stderr": se})


def exact_mean_check(name: str, values, exact: float, threshold: float = Z_THRESHOLD) -> StatCheck:
    m, se = mean_and_se(values)
    z = z_score(m - exact, se, 1e-9)
    return StatCheck(name, "mean", z, z <= threshold, None, {"mean": m, "exact": exact, "stderr": se})


def correlation_check(name: str, a, b, threshold: float = Z_THRESHOLD) -> StatCheck:
    """Independence proxy: ``sqrt(N) * corr`` is approximately standard normal."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    sa, sb = a.std(), b.std()
    if sa < 1e-12 or sb < 1e-12:
        # a constant statistic is trivially independent of everything
        return StatCheck(name, "correlation", 0.0, True, None, {"corr": 0.0, "degenerate": True})
    r = float(np.mean((a - a.mean()) * (b - b.mean())) / (sa * sb))
    z = abs(r) * math.sqrt(a.size)
    return StatCheck(name, "correlation", z, z <= threshold, None, {"corr": r})


def ratio_estimate(weights, values) -> tuple[float, float]:
    """Self-normalized mean ``sum(w f) / sum(w)`` with a delta-method SE."""
    w = np.asarray(weights, dtype=np.float64)
    f = np.asarray(values, dtype=np.float64)
    wbar = w.mean()
    theta = float(np.sum(w * f) / np.sum(w))
    resid = w * (f - theta)
    se = float(resid.std(ddof=1) / (abs(wbar) * math.sqrt(w.size)))
    return theta, se
