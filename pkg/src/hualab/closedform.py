"""Closed-form Gamma-product values for the group, ball and cube integrals.

Every product is accumulated in log space and exponentiated once.  Values are
returned as :class:`ClosedFormValue` with a unit mantissa and a real
``log_scale`` so that very large or very small products survive.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, special

from .algebra import Algebra
from .errors import DomainError, GammaPoleError

# Lanczos approximation, g = 7, nine coefficients.
_LANCZOS_G = 7.0
_LANCZOS = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)
_HALF_LOG_2PI = 0.5 * math.log(2 * math.pi)


def _pole(z: complex):
    if z.imag == 0 and z.real <= 0 and z.real == math.floor(z.real):
        return int(z.real)
    return None


def log_gamma(z) -> complex:
    """Complex log-Gamma (Lanczos, reflection for ``Re z < 1/2``).

    The imaginary part is only meaningful modulo ``2 pi``.
    """
    z = complex(z)
    pole = _pole(z)
    if pole is not None:
        raise GammaPoleError(pole)
    if z.real < 0.5:
        # Gamma(z) Gamma(1 - z) = pi / sin(pi z)
        return math.log(math.pi) - cmath.log(cmath.sin(math.pi * z)) - log_gamma(1.0 - z)
    z -= 1.0
    x = _LANCZOS[0]
    for i in range(1, len(_LANCZOS)):
        x += _LANCZOS[i] / (z + i)
    t = z + _LANCZOS_G + 0.5
    return _HALF_LOG_2PI + (z + 0.5) * cmath.log(t) - t + cmath.log(x)


def gamma(z) -> complex:
    return cmath.exp(log_gamma(z))


@dataclass(frozen=True)
class ClosedFormValue:
    """``value = mantissa * exp(log_scale)``."""

    mantissa: complex
    log_scale: float
    formula_id: str
    tail_bound: float | None = None

    @property
    def value(self) -> complex:
        if self.mantissa == 0:
            return 0j
        return self.mantissa * math.exp(self.log_scale)

    @property
    def real(self) -> float:
        return self.value.real

    def __complex__(self) -> complex:
        return self.value

    def __float__(self) -> float:
        return self.value.real

    def to_json(self) -> dict:
        v = self.value
        out = {
            "value": v.real,
            "value_imag": v.imag,
            "log_scale": self.log_scale,
            "formula_id": self.formula_id,
        }
        if self.tail_bound is not None:
            out["tail_bound"] = self.tail_bound
        return out


@dataclass
class _LogProduct:
    """Accumulates ``sum of logs`` of a product of Gamma values and scalars."""

    formula_id: str
    total: complex = 0j
    zero: bool = False
    notes: list = field(default_factory=list)

    def gamma(self, z, power: int = 1) -> "_LogProduct":
        z = complex(z)
        pole = _pole(z)
        if pole is not None:
            if power < 0:
                self.zero = True
                return self
            raise GammaPoleError(pole, f"{self.formula_id}: Gamma pole at {pole}")
        self.total += power * log_gamma(z)
        return self

    def factor(self, x) -> "_LogProduct":
        x = complex(x)
        if x == 0:
            self.zero = True
        else:
            self.total += cmath.log(x)
        return self

    def log(self, value) -> "_LogProduct":
        self.total += complex(value)
        return self

    def result(self, tail_bound=None) -> ClosedFormValue:
        if self.zero:
            return ClosedFormValue(0j, 0.0, self.formula_id, tail_bound)
        return ClosedFormValue(cmath.exp(1j * self.total.imag), self.total.real,
                               self.formula_id, tail_bound)


# --- exponent sequences -----------------------------------------------------

@dataclass(frozen=True)
class ExponentSpec:
    """Exponents ``lambda_1..lambda_n`` (plus ``mu`` for C and an optional
    ``theta`` sequence with ``theta_1 = 0``) of a group integrand."""

    algebra: Algebra
    lam: tuple
    mu: tuple | None = None
    theta: tuple | None = None

    def __post_init__(self):
        alg = Algebra.parse(self.algebra)
        object.__setattr__(self, "algebra", alg)
        lam = tuple(_num(v) for v in self.lam)
        if not lam:
            raise DomainError("need at least one exponent")
        object.__setattr__(self, "lam", lam)
        if alg is Algebra.C:
            mu = tuple(_num(v) for v in self.mu) if self.mu is not None else (0.0,) * len(lam)
            if len(mu) != len(lam):
                raise DomainError("lambda and mu must have the same length")
            object.__setattr__(self, "mu", mu)
        elif self.mu is not None and any(_num(v) != 0 for v in self.mu):
            raise DomainError(f"mu exponents only exist for the complex case, got algebra {alg.value}")
        else:
            object.__setattr__(self, "mu", None)
        if self.theta is not None:
            theta = tuple(float(v) for v in self.theta)
            if len(theta) == len(lam) - 1:
                theta = (0.0,) + theta
            if len(theta) != len(lam):
                raise DomainError("theta must have length n")
            if theta[0] != 0:
                raise DomainError("theta_1 must be 0")
            object.__setattr__(self, "theta", theta)

    @property
    def n(self) -> int:
        return len(self.lam)

    @property
    def mus(self) -> tuple:
        return self.mu if self.mu is not None else (0.0,) * self.n

    @property
    def thetas(self) -> tuple:
        return self.theta if self.theta is not None else (0.0,) * self.n

    def without_theta(self) -> "ExponentSpec":
        return ExponentSpec(self.algebra, self.lam, self.mu, None)

    def in_domain(self) -> bool:
        """Absolute convergence of the group integral."""
        for k, (lam, mu, th) in enumerate(zip(self.lam, self.mus, self.thetas), start=1):
            lam = complex(lam)
            if self.algebra is Algebra.R:
                if k > 1 and not (lam.real > -(k + th - 1) / 2):
                    return False
            elif self.algebra is Algebra.C:
                if not ((lam + complex(mu)).real > -(k + th)):
                    return False
            elif not (lam.real > -(2 * (k + th) + 1)):
                return False
            if k > 1 and not th > -(k - 1):
                return False
        return True

    def require_domain(self):
        if not self.in_domain():
            raise DomainError(f"exponents outside the convergence domain: {self}")

    def to_json(self) -> dict:
        out = {"algebra": self.algebra.value, "lambda": [_json_num(v) for v in self.lam]}
        if self.mu is not None:
            out["mu"] = [_json_num(v) for v in self.mu]
        if self.theta is not None:
            out["theta"] = list(self.theta)
        return out


def _num(v):
    c = complex(v)
    return c.real if c.imag == 0 else c


def _json_num(v):
    c = complex(v)
    return c.real if c.imag == 0 else [c.real, c.imag]


# --- classical building blocks ----------------------------------------------

def beta(a, b) -> ClosedFormValue:
    return _LogProduct("beta").gamma(a).gamma(b).gamma(complex(a) + complex(b), -1).result()


def _is_nonpositive_int(x: complex) -> bool:
    return _pole(complex(x)) is not None


def hypergeometric_polynomial_at_1(a, b, c) -> complex:
    """Terminating series ``sum_k (a)_k (b)_k / ((c)_k k!)``."""
    a, b, c = complex(a), complex(b), complex(c)
    n_terms = min(-int(x.real) for x in (a, b) if _is_nonpositive_int(x))
    term, total = 1 + 0j, 1 + 0j
    for k in range(n_terms):
        term *= (a + k) * (b + k) / ((c + k) * (k + 1))
        total += term
    return total


def gauss_2f1_at_1(a, b, c) -> complex:
    """``2F1(a, b; c; 1) = Gamma(c) Gamma(c-a-b) / (Gamma(c-a) Gamma(c-b))``."""
    a, b, c = complex(a), complex(b), complex(c)
    polynomial = _is_nonpositive_int(a) or _is_nonpositive_int(b)
    if a == 0 or b == 0:
        return 1 + 0j
    if not polynomial and not (c - a - b).real > 0:
        raise DomainError(f"2F1(a,b;c;1) diverges: Re(c-a-b) = {(c - a - b).real}")
    try:
        val = (_LogProduct("gauss-2f1").gamma(c).gamma(c - a - b)
               .gamma(c - a, -1).gamma(c - b, -1).result().value)
    except GammaPoleError:
        if not polynomial:
            raise
        val = hypergeometric_polynomial_at_1(a, b, c)
    return val


def selberg(n: int, alpha, beta_, gamma_) -> ClosedFormValue:
    """Selberg integral over ``[0, 1]^n``."""
    if n < 1:
        raise DomainError("n must be positive")
    alpha, beta_, gamma_ = complex(alpha), complex(beta_), complex(gamma_)
    floor = 1.0 / n
    if n > 1:
        floor = min(floor, alpha.real / (n - 1), beta_.real / (n - 1))
    if not (alpha.real > 0 and beta_.real > 0 and gamma_.real > -floor):
        raise DomainError("Selberg parameters outside the convergence domain")
    p = _LogProduct("selberg")
    for j in range(1, n + 1):
        p.gamma(alpha + (j - 1) * gamma_).gamma(beta_ + (j - 1) * gamma_).gamma(1 + j * gamma_)
        p.gamma(alpha + beta_ + (n + j - 2) * gamma_, -1).gamma(1 + gamma_, -1)
    return p.result()


def ball_constant(algebra, m: int, tau) -> ClosedFormValue:
    """``c_K^(m)(tau) = int_{||Z||<1} det(1 - Z*Z)^(tau-1) dZ``."""
    alg = Algebra.parse(algebra)
    tau = complex(tau)
    if not tau.real > 0:
        raise DomainError(f"ball constant needs tau > 0, got {tau}")
    d = alg.dim
    p = _LogProduct(f"ball-constant-{alg.value}").log(m * m * d / 2 * math.log(math.pi))
    for j in range(1, m + 1):
        p.gamma(tau + (j - 1) * d / 2).gamma(tau + (m + j - 1) * d / 2, -1)
    return p.result()


def segment_integral(n: int, lam) -> ClosedFormValue:
    """``int_{-1}^{1} (1 - x^2)^((n-3)/2) (1 + x)^lam dx``."""
    lam = complex(lam)
    if not (n >= 2 and lam.real > -(n - 1) / 2):
        raise DomainError("segment integral diverges")
    a = lam + (n - 1) / 2
    return (_LogProduct("segment").log((lam + n - 2) * math.log(2))
            .gamma(a).gamma((n - 1) / 2).gamma(a + (n - 1) / 2, -1).result())


def disk_integral_jn(n: int, lam, mu) -> ClosedFormValue:
    """``J_n(lam, mu) = int_{|p|<1} (1+p)^lam (1+conj p)^mu (1-|p|^2)^(n-2) dA``."""
    lam, mu = complex(lam), complex(mu)
    if n < 2 or not (lam + mu).real > -n:
        raise DomainError("disk integral diverges")
    return (_LogProduct("disk-jn").factor(math.pi / (n - 1))
            .gamma(n).gamma(n + lam + mu).gamma(n + lam, -1).gamma(n + mu, -1).result())


def quaternion_integral_jn(n: int, lam) -> ClosedFormValue:
    """``int_{|h|<1} |1+h|^lam (1-|h|^2)^(2n-3) dh`` over the unit ball of H."""
    lam = complex(lam)
    if n < 2 or not lam.real > -(2 * n + 1):
        raise DomainError("quaternionic ball integral diverges")
    return (_LogProduct("quaternion-jn").factor(math.pi ** 2).gamma(2 * n - 2)
            .gamma(2 * n + lam + 1).gamma(2 * n + lam / 2, -1).gamma(2 * n + lam / 2 + 1, -1)
            .result())


# --- projection constants and group integrals -------------------------------

def _factor_terms(p: _LogProduct, alg: Algebra, k: int, lam, mu=0.0, shift: float = 0.0):
    """One-step projection constant for size ``k``; ``shift`` moves the
    dimension argument (used by the ball integrals)."""
    lam, mu = complex(lam), complex(mu)
    if alg is Algebra.R:
        s = k + shift
        p.log(lam * math.log(2))
        if s == 1:
            # Gamma(s-1)/Gamma((s-1)/2) * Gamma(lam)/Gamma(lam) -> 1
            return p
        p.gamma(s - 1).gamma(lam + (s - 1) / 2).gamma((s - 1) / 2, -1).gamma(lam + s - 1, -1)
    elif alg is Algebra.C:
        s = k + shift
        p.gamma(s).gamma(s + lam + mu).gamma(s + lam, -1).gamma(s + mu, -1)
    else:
        s = 2 * (k + shift)
        p.gamma(s).gamma(s + lam + 1).gamma(s + lam / 2, -1).gamma(s + lam / 2 + 1, -1)
    return p


def recursion_factor(algebra, n: int, lam_n, mu_n=0.0) -> ClosedFormValue:
    """Constant by which the top exponent scales the image under ``Upsilon^1``."""
    alg = Algebra.parse(algebra)
    if n < 1:
        raise DomainError("n must be positive")
    lam_n = complex(lam_n)
    if alg is Algebra.R and n > 1 and not lam_n.real > -(n - 1) / 2:
        raise DomainError("Re lambda_n must exceed -(n-1)/2")
    if alg is Algebra.C and not (lam_n + complex(mu_n)).real > -n:
        raise DomainError("Re(lambda_n + mu_n) must exceed -n")
    if alg is Algebra.H and not lam_n.real > -(2 * n + 1):
        raise DomainError("Re lambda_n must exceed -(2n+1)")
    return _factor_terms(_LogProduct(f"recursion-{alg.value}"), alg, n, lam_n, mu_n).result()


def group_integral_rhs(spec: ExponentSpec) -> ClosedFormValue:
    """Gamma product for the integral of the chain integrand over the group."""
    spec.require_domain()
    p = _LogProduct(f"group-{spec.algebra.value}")
    for k, (lam, mu) in enumerate(zip(spec.lam, spec.mus), start=1):
        _factor_terms(p, spec.algebra, k, lam, mu)
    return p.result()


def group_integral_theta_rhs(spec: ExponentSpec) -> ClosedFormValue:
    """Group integral with the extra ``(1 - |x_k|^2)`` weights of ``theta``."""
    alg = spec.algebra
    spec.require_domain()
    p = _LogProduct(f"group-theta-{alg.value}")
    n = spec.n
    lam1, mu1 = spec.lam[0], spec.mus[0]
    # k = 1 carries no theta weight; its factor is the plain one
    _factor_terms(p, alg, 1, lam1, mu1)
    if alg is Algebra.R:
        p.gamma(n / 2).log(-n / 2 * math.log(math.pi))
    elif alg is Algebra.C:
        p.gamma(n)
    else:
        p.gamma(2 * n)
    for k in range(2, n + 1):
        lam, mu, th = complex(spec.lam[k - 1]), complex(spec.mus[k - 1]), spec.thetas[k - 1]
        if alg is Algebra.R:
            s = k + th
            p.log((lam + s - 2) * math.log(2))
            p.gamma((s - 1) / 2).gamma(lam + (s - 1) / 2).gamma(lam + s - 1, -1)
        elif alg is Algebra.C:
            s = k + th
            p.gamma(s - 1).gamma(s + lam + mu).gamma(s + lam, -1).gamma(s + mu, -1)
        else:
            s = 2 * (k + th)
            p.gamma(s - 2).gamma(s + lam + 1).gamma(s + lam / 2, -1).gamma(s + lam / 2 + 1, -1)
    return p.result()


def ball_integral_rhs(algebra, m: int, alpha, spec: ExponentSpec) -> ClosedFormValue:
    """Closed form of the weighted matrix-ball integral with chain exponents."""
    alg = Algebra.parse(algebra)
    if spec.n != m or spec.algebra is not alg:
        raise DomainError("exponent spec must match the ball size and algebra")
    alpha = float(alpha)
    tau = ball_tau(alg, m, alpha)
    if not tau > 0:
        raise DomainError(f"alpha = {alpha} is too small for a {m}x{m} ball")
    for k, (lam, mu) in enumerate(zip(spec.lam, spec.mus), start=1):
        lam = complex(lam)
        ok = {Algebra.R: lambda: lam.real > -(alpha + k - 1) / 2,
              Algebra.C: lambda: (lam + complex(mu)).real > -(k + alpha),
              Algebra.H: lambda: lam.real > -(2 * (k + alpha) + 1)}[alg]()
        if not ok:
            raise DomainError(f"ball integral diverges at k = {k}")
    c = ball_constant(alg, m, tau)
    p = _LogProduct(f"ball-{alg.value}").log(c.log_scale + 1j * cmath.phase(c.mantissa))
    for k, (lam, mu) in enumerate(zip(spec.lam, spec.mus), start=1):
        _factor_terms(p, alg, k, lam, mu, shift=alpha)
    return p.result()


def ball_tau(algebra, m: int, alpha: float) -> float:
    """Exponent ``tau`` with weight ``det(1 - Z*Z)^(tau - 1)`` for ``alpha``."""
    alg = Algebra.parse(algebra)
    if alg is Algebra.R:
        return (alpha - m + 1) / 2
    if alg is Algebra.C:
        return alpha - m + 1
    return 2 * (alpha - m + 1)


# --- densities --------------------------------------------------------------

def radial_density(algebra, n: int, m: int, r) -> float:
    """Unnormalized density of the singular values of ``[g]_m``."""
    alg = Algebra.parse(algebra)
    r = np.asarray(r, dtype=np.float64)
    if r.shape != (m,):
        raise DomainError(f"expected {m} radial coordinates")
    if n < 2 * m:
        raise DomainError("radial density needs n >= 2m")
    if not (r[0] <= 1 and r[-1] >= 0 and np.all(np.diff(r) <= 0)):
        raise DomainError(f"{r} is outside the simplex 1 >= r_1 >= ... >= r_m >= 0")
    d = alg.dim
    e = ((n - 2 * m + 1) * d - 2) / 2
    val = np.prod((1 - r ** 2) ** e) * np.prod(r ** (d - 1))
    for i in range(m):
        for j in range(i + 1, m):
            val *= (r[i] ** 2 - r[j] ** 2) ** d
    return float(val)


def radial_expectation(algebra, n: int, m: int, stat: Callable) -> float:
    """``E[stat(r)]`` under the normalized radial density, by quadrature."""
    alg = Algebra.parse(algebra)
    if m == 1:
        def dens(r):
            return radial_density(alg, n, 1, [r])
        num = integrate.quad(lambda r: stat(np.array([r])) * dens(r), 0, 1, epsabs=1e-13, epsrel=1e-11)[0]
        den = integrate.quad(dens, 0, 1, epsabs=1e-13, epsrel=1e-11)[0]
        return num / den
    if m == 2:
        def dens2(r2, r1):
            return radial_density(alg, n, 2, [r1, r2])
        opts = dict(epsabs=1e-12, epsrel=1e-10)
        num = integrate.dblquad(lambda r2, r1: stat(np.array([r1, r2])) * dens2(r2, r1),
                                0, 1, 0, lambda r1: r1, **opts)[0]
        den = integrate.dblquad(dens2, 0, 1, 0, lambda r1: r1, **opts)[0]
        return num / den
    raise DomainError("radial quadrature implemented for m <= 2")


def cube_factor_density(k: int, x, lam_k=0.0):
    """Normalized law of the ``k``-th cube coordinate (``k >= 2``)."""
    x = np.asarray(x, dtype=np.float64)
    a = lam_k + (k - 1) / 2
    b = (k - 1) / 2
    log_norm = -(lam_k + k - 2) * math.log(2) - special.betaln(a, b)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = np.exp(log_norm) * (1 + x) ** lam_k * (1 - x * x) ** ((k - 3) / 2)
    return val


def cube_factor_cdf(k: int, x, lam_k=0.0):
    x = np.asarray(x, dtype=np.float64)
    t = np.clip((1 + x) / 2, 0.0, 1.0)
    return special.betainc(lam_k + (k - 1) / 2, (k - 1) / 2, t)


def cube_density(n: int, x: Sequence[float], lam: Sequence[float] | None = None) -> float:
    """Joint density of ``(x_2, ..., x_n)``; ``lam`` is ``lambda_1..lambda_n``
    (``lambda_1`` does not enter)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (n - 1,):
        raise DomainError(f"expected {n - 1} coordinates")
    lam = np.zeros(n) if lam is None else np.asarray(lam, dtype=np.float64)
    if lam.shape != (n,):
        raise DomainError(f"expected {n} exponents")
    if np.any(np.abs(x) > 1):
        raise DomainError("cube coordinates must lie in [-1, 1]")
    val = 1.0
    for k in range(2, n + 1):
        val *= float(cube_factor_density(k, x[k - 2], lam[k - 1]))
    return val


# --- Hua--Pickrell products -------------------------------------------------

def _lambda_at(lambdas, k: int):
    if callable(lambdas):
        return lambdas(k)
    return lambdas[k - 1]


def pickrell_product_rhs(lambdas, lam, k_max: int, tail_terms: int = 100000) -> ClosedFormValue:
    """Partial product up to ``k_max`` of the Hua--Pickrell integral of Phi.

    ``lambdas`` is a sequence ``lambda_1, lambda_2, ...`` or a callable
    ``k -> lambda_k``.  The reported ``tail_bound`` is
    ``sum_{k > k_max} |lambda_k - lambda| / sqrt(k)``.
    """
    lam = float(lam)
    if not lam > -0.5:
        raise DomainError("base lambda must exceed -1/2")
    p = _LogProduct("pickrell")
    for k in range(1, k_max + 1):
        lk = float(_lambda_at(lambdas, k))
        if k > 1 and not lk > -(k - 1) / 2:
            raise DomainError(f"lambda_{k} = {lk} must exceed {-(k - 1) / 2}")
        p.log((lk - lam) * math.log(2))
        if k == 1 or lk == lam:
            continue
        h = (k - 1) / 2
        p.gamma(lk + h).gamma(lam + k - 1).gamma(lam + h, -1).gamma(lk + k - 1, -1)
    if callable(lambdas):
        ks = np.arange(k_max + 1, k_max + 1 + tail_terms)
        devs = np.array([abs(float(lambdas(int(k))) - lam) for k in ks])
    else:
        ks = np.arange(k_max + 1, len(lambdas) + 1)
        devs = np.abs(np.asarray(lambdas[k_max:], dtype=np.float64) - lam)
    tail = float(np.sum(devs / np.sqrt(ks))) if ks.size else 0.0
    return p.result(tail_bound=tail)
