"""Verification suites: exact identities on random instances and the Monte
Carlo verification matrices, assembled into deterministic reports."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import integrate, special

from . import algebra as alg_
from . import matlin as ml
from .algebra import Algebra
from .closedform import (ExponentSpec, ball_constant, disk_integral_jn,
                         gauss_2f1_at_1, group_integral_rhs, group_integral_theta_rhs,
                         selberg, recursion_factor)
from .errors import ConsistencyError, SingularMatrixError
from .haar import haar_batch
from .matlin import GroupElement, KMatrix
from .montecarlo import (compare_ball_constant, compare_ball_integral, cube_law_test,
                         group_integral_mc, measure_consistency_test, pushforward_haar_test,
                         theta_integral_mc)
from .rng import RngStream
from .stats import ComparisonReport, StatCheck
from . import upsilon as ups
from .virtual import (LambdaSequence, coordinate_ks_battery, phi_integral_mc,
                      quasi_invariance_test)

IDENTITY_RTOL = 1e-9
SCHEMA_VERSION = 1


# --- report plumbing ------------------------------------------------------------

def build_id() -> str:
    """Content hash of the package sources."""
    h = hashlib.sha256()
    for path in sorted(Path(__file__).parent.glob("*.py")):
        h.update(path.name.encode())
        h.update(path.read_bytes())
    return h.hexdigest()[:12]


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    if hasattr(obj, "to_json"):
        return _jsonable(obj.to_json())
    return obj


def dumps(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=False) + "\n"


@dataclass
class Row:
    """One line of a suite report."""

    criterion: int
    name: str
    passed: bool
    statistic: float
    detail: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"criterion": self.criterion, "name": self.name, "pass": self.passed,
                "statistic": self.statistic, **self.detail}


def _row(criterion: int, result) -> Row:
    js = _jsonable(result.to_json())
    stat = getattr(result, "z_score", None)
    if stat is None:
        stat = getattr(result, "statistic", 0.0)
    js.pop("name", None)
    js.pop("pass", None)
    return Row(criterion, result.name, bool(result.passed), float(stat), js)


def cell_seed(base: int, name: str) -> int:
    digest = hashlib.sha256(f"{base}:{name}".encode()).digest()
    return int.from_bytes(digest[:8], "little") >> 1


def rerun_seed(seed: int) -> int:
    return cell_seed(seed, "rerun")


def with_rerun(fn: Callable[[int], object], seed: int, rerun: bool = True):
    """Run a statistical cell; a failed cell is repeated once with a fresh
    seed and the second outcome is the one reported."""
    first = fn(seed)
    items = first if isinstance(first, list) else [first]
    if all(r.passed for r in items) or not rerun:
        return items, 1
    second = fn(rerun_seed(seed))
    return (second if isinstance(second, list) else [second]), 2


# --- exact identity suite -----------------------------------------------------------

def _rel_matrix(lhs: KMatrix, rhs: KMatrix) -> float:
    return (lhs - rhs).max_abs() / max(1.0, rhs.max_abs())


def _rel_scalar(lhs, rhs) -> float:
    scale = max(abs(lhs), abs(rhs))
    return abs(lhs - rhs) / scale if scale > 0 else 0.0


def _dissipative(alg: Algebra, n: int, gen) -> KMatrix:
    """Random ``X`` with positive definite Hermitian part."""
    b = alg_.standard_normal(alg, gen, (n, n))
    s = alg_.standard_normal(alg, gen, (n, n))
    pos = ml.matmul(alg, b, ml.adjoint(alg, b)) + 0.1 * ml.identity(alg, n)
    skew = 0.5 * (s - ml.adjoint(alg, s))
    return KMatrix(alg, pos + skew)


def _identity_instance(alg: Algebra, n: int, gen) -> dict:
    """All exact identities on one random instance of size ``n``."""
    g = GroupElement(KMatrix(alg, haar_batch(alg, n, 1, gen)[0]))
    m = int(gen.integers(1, n))
    res = {}
    h = ups.upsilon(g, m)
    res["range (Upsilon^m is unitary)"] = float(ml.unitarity_residual(alg, h.data))
    if n >= 3:
        k = int(gen.integers(1, n - m)) if n - m > 1 else None
        if k is not None:
            res["composition"] = _rel_matrix(*ups.composition_check(g, k, m))
    p = int(gen.integers(1, n + 1))
    res["cayley block"] = _rel_matrix(*ups.cayley_block_check(g, p))
    a = GroupElement(KMatrix(alg, haar_batch(alg, n - m, 1, gen)[0]))
    b = GroupElement(KMatrix(alg, haar_batch(alg, n - m, 1, gen)[0]))
    res["equivariance"] = _rel_matrix(*ups.equivariance_check(g, m, a, b))
    # block inverse via the Schur complement of either corner
    raw = alg_.standard_normal(alg, gen, (n, n))
    full = KMatrix(alg, raw)
    q = int(gen.integers(1, n))
    blocks = ml.split_blocks(full, q)
    inv = ml.invert(full)
    for pivot in ("A", "D"):
        got = ml.assemble_blocks(*ml.frobenius_inverse(*blocks, pivot=pivot))
        res[f"frobenius ({pivot})"] = _rel_matrix(got, inv)
    p2 = int(gen.integers(m + 1, n + 1))
    res["multiplicativity"] = _rel_scalar(*ups.multiplicativity_check(g, m, p2))
    lhs, rhs = ml.dissipative_det_identity_check(_dissipative(alg, n, gen))
    res["dissipative determinant"] = _rel_scalar(lhs, rhs)
    k = n - m
    a2 = GroupElement(KMatrix(alg, haar_batch(alg, k, 1, gen)[0]))
    b2 = GroupElement(KMatrix(alg, haar_batch(alg, k, 1, gen)[0]))
    res["radon-nikodym pointwise"] = _rel_scalar(*ups.rn_pointwise_check(g, a2, b2))
    res["chain telescoping"] = ups.chain_scalars(g, verify=False).verify(g, rtol=math.inf)
    return res


def identity_suite(group, n_max: int = 8, trials: int = 100, seed: int = 0,
                   n_fixed: int | None = None) -> list[StatCheck]:
    """Every exact identity on ``trials`` random instances (sizes cycle over
    ``2..n_max`` unless ``n_fixed`` is given).  Each check reports the
    largest relative residual."""
    alg = Algebra.parse(group)
    gen = RngStream(seed, 0).generator()
    worst: dict[str, float] = {}
    counts: dict[str, int] = {}
    failures: dict[str, str] = {}
    redraws = 0
    for t in range(trials):
        n = n_fixed if n_fixed is not None else 2 + t % (n_max - 1)
        for _ in range(10):
            try:
                res = _identity_instance(alg, n, gen)
                break
            except SingularMatrixError:
                redraws += 1
            except (ConsistencyError, ArithmeticError) as exc:
                res = {"exception": math.inf}
                failures.setdefault("exception", f"{type(exc).__name__}: {exc}")
                break
        for key, val in res.items():
            if not np.isfinite(val):
                val = math.inf
            worst[key] = max(worst.get(key, 0.0), val)
            counts[key] = counts.get(key, 0) + 1
    checks = []
    for key in sorted(worst):
        detail = {"instances": counts[key], "rtol": IDENTITY_RTOL}
        if key in failures:
            detail["error"] = failures[key]
        checks.append(StatCheck(f"{alg.group} identity: {key}", "identity", worst[key],
                                worst[key] < IDENTITY_RTOL, None, detail))
    if redraws:
        checks.append(StatCheck(f"{alg.group} identity redraws", "info", float(redraws), True))
    return checks


# --- exponent specs for the verification matrices -------------------------------

_GROUP_SPECS = {
    Algebra.R: [
        (lambda n: [1.0] * n, None),
        (lambda n: [2.0, 0.5, -0.3, 1.5][:n], None),
        (lambda n: [0.7, -0.15, -0.35, -0.6][:n], None),
    ],
    Algebra.C: [
        (lambda n: [1.0] * n, lambda n: [1.0] * n),
        (lambda n: [1 + 0.5j, 0.3 - 0.2j, 0.8 + 1j, -0.2 + 0.3j][:n],
         lambda n: [1 - 0.5j, 0.3 + 0.2j, 0.8 - 1j, -0.2 - 0.3j][:n]),
        (lambda n: [0.5, 1.2, -0.3, 0.4][:n], lambda n: [1.0, -0.4 + 0.6j, 0.7, 0.2j][:n]),
    ],
    Algebra.H: [
        (lambda n: [1.0] * n, None),
        (lambda n: [2.5, -1.0, 0.5, 3.0][:n], None),
        (lambda n: [-0.8, 1.5, -2.0, 0.7][:n], None),
    ],
}


def group_spec_cells(ns=(2, 3, 4)) -> list[tuple[str, ExponentSpec]]:
    cells = [("anchor SO(2) lambda=(0,1)", ExponentSpec(Algebra.R, [0, 1])),
             ("anchor U(1) lambda=mu=(1)", ExponentSpec(Algebra.C, [1], [1]))]
    for alg, specs in _GROUP_SPECS.items():
        for n in ns:
            for i, (lam, mu) in enumerate(specs):
                spec = ExponentSpec(alg, lam(n), mu(n) if mu else None)
                cells.append((f"{alg.group}({n}) spec {i + 1}", spec))
    return cells


def group_cell(name: str, spec: ExponentSpec, samples: int, seed: int, shards: int = 1,
               theta: bool = False) -> Callable[[int], ComparisonReport]:
    def run(s: int) -> ComparisonReport:
        if theta:
            est, rhs = theta_integral_mc(spec, samples, s, shards), group_integral_theta_rhs(spec)
        else:
            est, rhs = group_integral_mc(spec, samples, s, shards), group_integral_rhs(spec)
        return ComparisonReport.build(est, rhs, name=name, seed=s, spec=spec.to_json())
    return run


def random_spec(gen, alg: Algebra, n: int) -> ExponentSpec:
    lam = list(gen.uniform(-0.2, 3.0, size=n))
    if alg is Algebra.C:
        lam = [complex(v, w) for v, w in zip(lam, gen.uniform(-1, 1, size=n))]
        mu = [complex(v, w) for v, w in zip(gen.uniform(-0.2, 3.0, size=n), gen.uniform(-1, 1, size=n))]
        return ExponentSpec(alg, lam, mu)
    return ExponentSpec(alg, lam)


def recursion_checks(count: int = 50, seed: int = 0) -> list[StatCheck]:
    """``rhs(n) = recursion_factor(n) * rhs(n-1)`` on random specs."""
    gen = RngStream(seed, 7).generator()
    worst = 0.0
    algs = list(Algebra)
    for i in range(count):
        alg = algs[i % 3]
        n = int(gen.integers(2, 9))
        spec = random_spec(gen, alg, n)
        head = ExponentSpec(alg, spec.lam[:-1], spec.mu[:-1] if spec.mu else None)
        full = group_integral_rhs(spec).value
        step = recursion_factor(alg, n, spec.lam[-1], spec.mus[-1]).value
        rest = group_integral_rhs(head).value
        worst = max(worst, abs(full - step * rest) / abs(full))
    return [StatCheck("group rhs recursion (50 random specs)", "identity", worst, worst < 1e-12,
                      None, {"rtol": 1e-12, "specs": count})]


# --- special-function oracles -------------------------------------------------------

def _series_2f1(a: float, b: float, c: float) -> float:
    """Terminating hypergeometric series written out term by term."""
    total, term, k = 1.0, 1.0, 0
    while True:
        term *= (a + k) * (b + k) / ((c + k) * (k + 1))
        k += 1
        if term == 0.0:
            return total
        total += term


def special_function_checks() -> list[StatCheck]:
    checks = []
    worst = 0.0
    cases = 0
    for a in (-1, -2, -3):
        for b in (-3.0, -1.5, 0.25, 0.7, 2.0, 4.5):
            for c in (0.5, 1.3, 2.0, 3.7, 6.0):
                got = gauss_2f1_at_1(a, b, c)
                want = _series_2f1(a, b, c)
                worst = max(worst, abs(got - want) / max(1.0, abs(want)))
                cases += 1
    checks.append(StatCheck("2F1(a,b;c;1) vs terminating series", "identity", worst,
                            worst < 1e-12, None, {"cases": cases, "rtol": 1e-12}))
    worst = 0.0
    for al, be in ((1.0, 1.0), (0.5, 2.5), (3.2, 0.7), (2.0, 5.0)):
        got = selberg(1, al, be, 0.9).value.real
        want = float(special.beta(al, be))
        worst = max(worst, abs(got - want) / want)
    checks.append(StatCheck("Selberg n=1 vs Beta", "identity", worst, worst < 1e-12, None,
                            {"rtol": 1e-12}))
    worst = 0.0
    for al, be, ga in ((1.0, 1.0, 0.5), (1.5, 2.0, 1.0), (2.0, 1.2, 0.3)):
        # symmetric integrand: integrate over y > x so the kink sits on the boundary
        want = 2 * integrate.dblquad(
            lambda y, x: (y - x) ** (2 * ga) * (x * y) ** (al - 1) * ((1 - x) * (1 - y)) ** (be - 1),
            0, 1, lambda x: x, 1, epsabs=1e-13, epsrel=1e-11)[0]
        got = selberg(2, al, be, ga).value.real
        worst = max(worst, abs(got - want) / want)
    checks.append(StatCheck("Selberg n=2 vs 2-d quadrature", "identity", worst, worst < 1e-10, None,
                            {"rtol": 1e-10}))
    worst = 0.0
    for n in (2, 3, 4, 6):
        want = 2 * math.pi * integrate.quad(lambda r: r * (1 - r * r) ** (n - 2), 0, 1,
                                            epsabs=1e-13, epsrel=1e-12)[0]
        got = disk_integral_jn(n, 0, 0).value.real
        worst = max(worst, abs(got - want) / want)
    checks.append(StatCheck("disk J_n(0,0) vs polar quadrature", "identity", worst, worst < 1e-6, None,
                            {"rtol": 1e-6}))
    return checks


def ball_normalization_checks() -> list[StatCheck]:
    worst = 0.0
    for n in range(2, 9):
        r = 1 / ball_constant(Algebra.R, 1, (n - 1) / 2).value.real
        worst = max(worst, abs(r - math.gamma(n / 2) / (math.sqrt(math.pi) * math.gamma((n - 1) / 2))) / r)
        c = 1 / ball_constant(Algebra.C, 1, n - 1).value.real
        worst = max(worst, abs(c - (n - 1) / math.pi) / c)
        h = 1 / ball_constant(Algebra.H, 1, 2 * n - 2).value.real
        worst = max(worst, abs(h - (2 * n - 2) * (2 * n - 1) / math.pi ** 2) / h)
    return [StatCheck("m=1 normalizing constants (R, C, H; n=2..8)", "identity", worst,
                      worst < 1e-12, None, {"rtol": 1e-12})]


# --- suite assembly -------------------------------------------------------------

@dataclass(frozen=True)
class SuiteConfig:
    samples: int = 1_000_000
    ks_samples: int = 100_000
    trials: int = 100
    n_max: int = 8
    shards: int = 1
    seed: int = 20240601
    group_ns: tuple = (2, 3, 4)
    rerun: bool = True

    def to_json(self) -> dict:
        return {"samples": self.samples, "ks_samples": self.ks_samples, "trials": self.trials,
                "n_max": self.n_max, "shards": self.shards, "seed": self.seed,
                "group_ns": list(self.group_ns), "rerun": self.rerun}


QUICK = SuiteConfig(samples=100_000, ks_samples=20_000, group_ns=(2,))
FULL = SuiteConfig()


def _cells(criterion: int, name: str, fn, cfg: SuiteConfig) -> list[Row]:
    items, attempts = with_rerun(fn, cell_seed(cfg.seed, name), cfg.rerun)
    rows = [_row(criterion, r) for r in items]
    for r in rows:
        r.detail["attempts"] = attempts
    return rows


def criterion_identities(cfg: SuiteConfig) -> list[Row]:
    rows = []
    for alg in Algebra:
        for c in identity_suite(alg, cfg.n_max, cfg.trials, cell_seed(cfg.seed, f"identities {alg.value}")):
            rows.append(_row(1, c))
    return rows


def criterion_group_matrix(cfg: SuiteConfig) -> list[Row]:
    rows = []
    for name, spec in group_spec_cells(cfg.group_ns):
        rows += _cells(2, name, group_cell(name, spec, cfg.samples, 0, cfg.shards), cfg)
    return rows


CONSISTENCY_SPECS = {
    Algebra.R: ExponentSpec(Algebra.R, [0.5, 1.0, 2.0]),
    Algebra.C: ExponentSpec(Algebra.C, [0.5, 1.0, 1.5], [0.5, 1.0, 1.5]),
    Algebra.H: ExponentSpec(Algebra.H, [1.0, 2.0, 0.5]),
}


def criterion_consistency(cfg: SuiteConfig) -> list[Row]:
    rows = []
    for alg, spec in CONSISTENCY_SPECS.items():
        name = f"{alg.group}(3) weighted pushforward"
        rows += _cells(3, name, lambda s, alg=alg, spec=spec: measure_consistency_test(
            alg, 3, spec, cfg.samples, s, cfg.shards), cfg)
    rows += [_row(3, c) for c in recursion_checks(50, cell_seed(cfg.seed, "recursion"))]
    return rows


PUSHFORWARD_CELLS = ([(Algebra.R, n, 1) for n in (3, 4, 5, 6)] + [(Algebra.C, n, 1) for n in (2, 3, 4)]
                     + [(Algebra.H, n, 1) for n in (2, 3)] + [(Algebra.R, n, 2) for n in (5, 6)])


def criterion_densities(cfg: SuiteConfig) -> list[Row]:
    rows = []
    for alg, n, m in PUSHFORWARD_CELLS:
        name = f"pushforward {alg.group}({n}) m={m}"
        rows += _cells(4, name, lambda s, alg=alg, n=n, m=m: pushforward_haar_test(
            alg, n, m, cfg.ks_samples, s, cfg.shards), cfg)
    rows += _cells(4, "cube law SO(5)", lambda s: cube_law_test(5, cfg.ks_samples, s, cfg.shards), cfg)
    return rows


BALL_CONSTANT_CELLS = [(a, m) for a, m in ((Algebra.R, 1), (Algebra.R, 2), (Algebra.C, 1),
                                           (Algebra.C, 2), (Algebra.H, 1))]
BALL_TAUS = (1.0, 1.5, 3.0)


def criterion_ball_constants(cfg: SuiteConfig) -> list[Row]:
    rows = []
    for alg, m in BALL_CONSTANT_CELLS:
        for tau in BALL_TAUS:
            name = f"ball constant {alg.value} m={m} tau={tau:g}"
            rows += _cells(5, name, lambda s, alg=alg, m=m, tau=tau: compare_ball_constant(
                alg, m, tau, cfg.samples, s, cfg.shards), cfg)
    rows += [_row(5, c) for c in ball_normalization_checks()]
    return rows


BALL_INTEGRAL_CELLS = [
    (Algebra.R, 1, 2.0, ExponentSpec(Algebra.R, [1.0])),
    (Algebra.R, 1, 3.5, ExponentSpec(Algebra.R, [-0.5])),
    (Algebra.C, 1, 1.0, ExponentSpec(Algebra.C, [1.0], [1.0])),
    (Algebra.C, 1, 1.5, ExponentSpec(Algebra.C, [0.5 + 0.5j], [1.0])),
    (Algebra.H, 1, 1.2, ExponentSpec(Algebra.H, [1.5])),
    (Algebra.H, 1, 2.0, ExponentSpec(Algebra.H, [-1.0])),
    (Algebra.R, 2, 3.0, ExponentSpec(Algebra.R, [0.7, 1.3])),
    (Algebra.R, 2, 4.0, ExponentSpec(Algebra.R, [-0.3, 0.5])),
]


def criterion_ball_integrals(cfg: SuiteConfig) -> list[Row]:
    rows = []
    for i, (alg, m, alpha, spec) in enumerate(BALL_INTEGRAL_CELLS):
        name = f"ball integral {alg.value} m={m} alpha={alpha:g} spec {i % 2 + 1}"
        rows += _cells(6, name, lambda s, alg=alg, m=m, alpha=alpha, spec=spec: compare_ball_integral(
            alg, m, alpha, spec, cfg.samples, s, cfg.shards), cfg)
    return rows


def criterion_special_functions(cfg: SuiteConfig) -> list[Row]:
    return [_row(7, c) for c in special_function_checks()]


PICKRELL_LAWS = (
    ("single deviation lambda_2 = 1", LambdaSequence(0.0, {2: 1.0})),
    ("geometric lambda_k = 1 + 2^-k", LambdaSequence(1.0, rule="geometric:0.5")),
    ("quadratic lambda_k = 1/2 + 1/k^2", LambdaSequence(0.5, rule="quadratic")),
)
QUASI_CELLS = ((3, 2, 1.0), (4, 2, 1.5), (5, 2, 0.7), (5, 3, 1.0))


def criterion_virtual(cfg: SuiteConfig) -> list[Row]:
    rows = _cells(8, "coordinate KS battery", lambda s: coordinate_ks_battery(
        (0.0, 1.0, 2.5), 10, cfg.ks_samples, s), cfg)
    for name, law in PICKRELL_LAWS:
        rows += _cells(8, f"pickrell {name}", lambda s, law=law, name=name: _named(
            phi_integral_mc(law, 15, cfg.samples, s, cfg.shards), f"pickrell {name}"), cfg)
    for size, k, lam in QUASI_CELLS:
        name = f"quasi-invariance SO({size}) k={k}"
        rows += _cells(8, name, lambda s, size=size, k=k, lam=lam: quasi_invariance_test(
            size, k, lam, max(cfg.samples // 5, 20000), s, cfg.shards), cfg)
    return rows


def _named(report: ComparisonReport, name: str) -> ComparisonReport:
    object.__setattr__(report, "name", name)
    return report


CRITERIA = {
    1: ("exact identity suite", criterion_identities),
    2: ("group integral matrix", criterion_group_matrix),
    3: ("one-step consistency", criterion_consistency),
    4: ("pushforward and density laws", criterion_densities),
    5: ("ball constants", criterion_ball_constants),
    6: ("weighted ball integrals", criterion_ball_integrals),
    7: ("special-function kit", criterion_special_functions),
    8: ("virtual group suite", criterion_virtual),
}


def quick_rows(cfg: SuiteConfig = QUICK) -> list[Row]:
    """Identities, the n <= 2 group cells, anchors and the special-function kit."""
    rows = criterion_identities(cfg)
    rows += criterion_group_matrix(cfg)
    rows += criterion_special_functions(cfg)
    rows += [_row(5, c) for c in ball_normalization_checks()]
    return rows


def run_suite(profile: str = "quick", cfg: SuiteConfig | None = None,
              criteria=None) -> dict:
    if profile == "quick":
        cfg = cfg or QUICK
        rows = quick_rows(cfg)
    elif profile == "full":
        cfg = cfg or FULL
        rows = []
        for c in sorted(criteria or CRITERIA):
            rows += CRITERIA[c][1](cfg)
    else:
        raise ValueError(f"unknown profile {profile!r}")
    return {
        "schema": SCHEMA_VERSION,
        "build": build_id(),
        "profile": profile,
        "config": cfg.to_json(),
        "pass": all(r.passed for r in rows),
        "rows": [r.to_json() for r in rows],
    }


def rows_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["criterion", "name", "pass", "statistic", "attempts"])
    for r in rows:
        writer.writerow([r["criterion"], r["name"], r["pass"], repr(float(r["statistic"])),
                         r.get("attempts", 1)])
    return buf.getvalue()
