"""Command-line entry point.

Every invocation is first turned into a :class:`JobSpec`, which is what gets
executed and embedded in the report.  Exit codes: 0 all checks passed,
1 a check failed, 2 usage or domain error.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import faults
from .algebra import Algebra
from .closedform import (ExponentSpec, ball_constant, ball_integral_rhs, disk_integral_jn,
                         group_integral_rhs, group_integral_theta_rhs, pickrell_product_rhs,
                         quaternion_integral_jn)
from .errors import DomainError, GammaPoleError
from .haar import haar_samples
from .montecarlo import ball_integral_mc, group_integral_mc, theta_integral_mc
from .stats import ComparisonReport
from .suites import (SCHEMA_VERSION, FULL, QUICK, SuiteConfig, build_id, dumps, identity_suite,
                     rows_to_csv, run_suite)
from .virtual import LambdaSequence, phi_integral_mc

EXIT_PASS, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class JobSpec:
    """A fully serializable description of one CLI run."""

    command: str
    action: str
    params: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"command": self.command, "action": self.action,
                "params": {k: self.params[k] for k in sorted(self.params)}}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)

    @classmethod
    def from_json(cls, obj) -> "JobSpec":
        if isinstance(obj, str):
            obj = json.loads(obj)
        return cls(obj["command"], obj["action"], dict(obj.get("params", {})))

    def get(self, key, default=None):
        value = self.params.get(key)
        return default if value is None else value


# --- argument parsing -------------------------------------------------------------

def _number_list(text: str | None):
    if text is None or text == "":
        return None
    out = []
    for part in text.split(","):
        part = part.strip().replace("i", "j")
        c = complex(part)
        out.append(c.real if c.imag == 0 else [c.real, c.imag])
    return out


def _deviations(text: str | None) -> dict:
    if not text:
        return {}
    out = {}
    for part in text.split(","):
        k, _, d = part.partition(":")
        if not d:
            raise UsageError(f"deviation {part!r} must look like k:d")
        out[str(int(k))] = float(d)
    return out


def _to_complex_list(values):
    if values is None:
        return None
    return [complex(v[0], v[1]) if isinstance(v, list) else v for v in values]


_VALUE_OPTIONS = {"--lambda", "--mu", "--theta", "--alpha", "--tau", "--lambda-base", "--deviations"}


def _glue_negative_values(argv: list[str]) -> list[str]:
    """Let ``--lambda -1,2`` through: argparse would read ``-1,2`` as a flag."""
    out, i = [], 0
    while i < len(argv):
        tok = argv[i]
        nxt = argv[i + 1] if i + 1 < len(argv) else None
        if tok in _VALUE_OPTIONS and nxt and len(nxt) > 1 and nxt[0] == "-" and (nxt[1].isdigit() or nxt[1] == "."):
            out.append(f"{tok}={nxt}")
            i += 2
        else:
            out.append(tok)
            i += 1
    return out


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="hualab", description="Hua-type matrix integrals: sampling, closed forms, verification")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(q, seed=True):
        q.add_argument("--json", action="store_true", help="print the JSON report (default)")
        q.add_argument("--out", "--output", dest="output", help="also write the JSON report to this file")
        if seed:
            q.add_argument("--seed", type=int, default=0)

    def exponents(q):
        q.add_argument("--group", default="so", help="so, u or sp (also r, c, h)")
        q.add_argument("--n", type=int)
        q.add_argument("--m", type=int, help="ball size (defaults to --n)")
        q.add_argument("--lambda", dest="lam", help="comma list lambda_1..lambda_n")
        q.add_argument("--mu", help="comma list mu_1..mu_n (complex case)")
        q.add_argument("--theta", help="comma list theta_1..theta_n or theta_2..theta_n")
        q.add_argument("--alpha", type=float)
        q.add_argument("--tau", type=float)

    sample = sub.add_parser("sample", help="draw Haar samples")
    ssub = sample.add_subparsers(dest="action", required=True, parser_class=_Parser)
    haar = ssub.add_parser("haar")
    haar.add_argument("--group", required=True)
    haar.add_argument("--n", type=int, required=True)
    haar.add_argument("--count", type=int, default=1)
    haar.add_argument("--stream", type=int, default=0)
    common(haar)

    ev = sub.add_parser("eval", help="evaluate closed forms")
    esub = ev.add_subparsers(dest="action", required=True, parser_class=_Parser)
    rhs = esub.add_parser("rhs")
    rhs.add_argument("--family", required=True,
                     choices=["group", "group-theta", "ball", "pickrell", "jn", "ball-constant"])
    exponents(rhs)
    _pickrell_args(rhs)
    common(rhs, seed=False)

    ver = sub.add_parser("verify", help="run verification checks")
    vsub = ver.add_subparsers(dest="action", required=True, parser_class=_Parser)
    ident = vsub.add_parser("identities")
    ident.add_argument("--group", required=True)
    ident.add_argument("--n", type=int, default=8, help="largest size (sizes cycle over 2..n)")
    ident.add_argument("--trials", type=int, default=100)
    common(ident)
    integ = vsub.add_parser("integral")
    integ.add_argument("--family", required=True, choices=["group", "group-theta", "ball", "ball-constant"])
    exponents(integ)
    integ.add_argument("--samples", type=int, default=100000)
    integ.add_argument("--shards", type=int, default=1)
    integ.add_argument("--csv", help="write a one-row CSV summary to this file")
    common(integ)
    pick = vsub.add_parser("pickrell")
    _pickrell_args(pick)
    pick.add_argument("--samples", type=int, default=100000)
    pick.add_argument("--shards", type=int, default=1)
    common(pick)

    suite = sub.add_parser("suite", help="run a verification profile")
    suite.add_argument("--profile", choices=["quick", "full"], default="quick")
    suite.add_argument("--csv", help="write one CSV row per cell to this file")
    suite.add_argument("--samples", type=int, help="override the Monte Carlo sample count")
    suite.add_argument("--shards", type=int, default=1)
    suite.add_argument("--criteria", help="comma list of criteria to run (full profile)")
    suite.add_argument("--inject-fault", choices=list(faults.KNOWN_FAULTS),
                       help="deliberately break a map to check the suite notices")
    common(suite)
    return p


def _pickrell_args(q):
    q.add_argument("--lambda-base", type=float)
    q.add_argument("--deviations", help="k1:d1,k2:d2,...")
    q.add_argument("--rule", help="geometric:r or quadratic")
    q.add_argument("--kmax", type=int, default=15)


def job_from_args(args: argparse.Namespace) -> JobSpec:
    params = {k: v for k, v in vars(args).items()
              if k not in ("command", "action", "json", "output", "csv") and v is not None}
    for key in ("lam", "mu", "theta"):
        if key in params:
            params[key] = _number_list(params[key])
    if "deviations" in params:
        params["deviations"] = _deviations(params["deviations"])
    if "criteria" in params:
        params["criteria"] = [int(c) for c in str(params["criteria"]).split(",")]
    action = getattr(args, "action", None) or getattr(args, "profile", "")
    return JobSpec(args.command, action, params)


# --- execution ----------------------------------------------------------------------

def _spec(job: JobSpec, n_key: str = "n") -> ExponentSpec:
    lam = _to_complex_list(job.get("lam"))
    if lam is None:
        raise UsageError("--lambda is required")
    n = job.get(n_key)
    if n is not None and n != len(lam):
        raise UsageError(f"--lambda has {len(lam)} entries, expected {n}")
    return ExponentSpec(Algebra.parse(job.get("group", "so")), lam,
                        _to_complex_list(job.get("mu")), job.get("theta"))


def _law(job: JobSpec) -> LambdaSequence:
    base = job.get("lambda_base")
    if base is None:
        raise UsageError("--lambda-base is required")
    return LambdaSequence(base, {int(k): v for k, v in job.get("deviations", {}).items()}, job.get("rule"))


def _eval_rhs(job: JobSpec):
    fam = job.get("family")
    alg = Algebra.parse(job.get("group", "so"))
    if fam == "group":
        return group_integral_rhs(_spec(job))
    if fam == "group-theta":
        if job.get("theta") is None:
            raise UsageError("--theta is required for group-theta")
        return group_integral_theta_rhs(_spec(job))
    if fam == "ball":
        spec = _spec(job, "m")
        if job.get("alpha") is None:
            raise UsageError("--alpha is required for the ball family")
        return ball_integral_rhs(alg, spec.n, job.get("alpha"), spec)
    if fam == "ball-constant":
        m = job.get("m", job.get("n"))
        if m is None or job.get("tau") is None:
            raise UsageError("--m (or --n) and --tau are required")
        return ball_constant(alg, m, job.get("tau"))
    if fam == "jn":
        n = job.get("n")
        lam = _to_complex_list(job.get("lam")) or [0.0]
        if n is None:
            raise UsageError("--n is required")
        if alg is Algebra.H:
            return quaternion_integral_jn(n, lam[0])
        mu = _to_complex_list(job.get("mu")) or [0.0]
        return disk_integral_jn(n, lam[0], mu[0])
    if fam == "pickrell":
        law = _law(job)
        return pickrell_product_rhs(law, law.base, job.get("kmax", 15))
    raise UsageError(f"unknown family {fam!r}")


def _verify_integral(job: JobSpec) -> ComparisonReport:
    fam = job.get("family")
    alg = Algebra.parse(job.get("group", "so"))
    samples, seed, shards = job.get("samples", 100000), job.get("seed", 0), job.get("shards", 1)
    if fam in ("group", "group-theta"):
        spec = _spec(job)
        if fam == "group":
            est, rhs = group_integral_mc(spec, samples, seed, shards), group_integral_rhs(spec)
        else:
            est, rhs = theta_integral_mc(spec, samples, seed, shards), group_integral_theta_rhs(spec)
        return ComparisonReport.build(est, rhs, name=f"{fam} {alg.group}({spec.n})", seed=seed)
    m = job.get("m", job.get("n"))
    if fam == "ball-constant":
        tau = job.get("tau")
        if m is None or tau is None:
            raise UsageError("--m (or --n) and --tau are required")
        res = ball_integral_mc(alg, m, tau=tau, n_samples=samples, seed=seed, shards=shards)
        return ComparisonReport.build(res.estimate, ball_constant(alg, m, tau), name=f"ball-constant m={m}",
                                      seed=seed, acceptance_rate=res.acceptance_rate)
    spec = _spec(job, "m")
    alpha = job.get("alpha")
    if alpha is None:
        raise UsageError("--alpha is required for the ball family")
    res = ball_integral_mc(alg, spec.n, alpha=alpha, spec=spec, n_samples=samples, seed=seed, shards=shards)
    return ComparisonReport.build(res.estimate, ball_integral_rhs(alg, spec.n, alpha, spec),
                                  name=f"ball m={spec.n}", seed=seed, acceptance_rate=res.acceptance_rate)


def run(job: JobSpec) -> tuple[int, dict, str | None]:
    """Execute a job.  Returns ``(exit_code, report, csv_text)``."""
    report = {"schema": SCHEMA_VERSION, "build": build_id(), "job": job.to_json()}
    csv_text = None
    code = EXIT_PASS
    if job.command == "sample":
        samples = haar_samples(job.get("group"), job.get("n"), job.get("count", 1),
                               job.get("seed", 0), job.get("stream", 0))
        report["samples"] = [s.to_json() for s in samples]
    elif job.command == "eval":
        report["result"] = _eval_rhs(job).to_json()
    elif job.command == "verify" and job.action == "identities":
        checks = identity_suite(job.get("group"), job.get("n", 8), job.get("trials", 100), job.get("seed", 0))
        report["checks"] = [c.to_json() for c in checks]
        report["max_residual"] = max(c.statistic for c in checks if c.kind == "identity")
        report["pass"] = all(c.passed for c in checks)
        code = EXIT_PASS if report["pass"] else EXIT_FAIL
    elif job.command == "verify" and job.action == "integral":
        res = _verify_integral(job)
        report["result"] = res.to_json()
        report["pass"] = res.passed
        code = EXIT_PASS if res.passed else EXIT_FAIL
        row = {"criterion": 0, "name": res.name, "pass": res.passed, "statistic": res.z_score}
        csv_text = rows_to_csv([row])
    elif job.command == "verify" and job.action == "pickrell":
        res = phi_integral_mc(_law(job), job.get("kmax", 15), job.get("samples", 100000),
                              job.get("seed", 0), job.get("shards", 1))
        report["result"] = res.to_json()
        report["pass"] = res.passed
        code = EXIT_PASS if res.passed else EXIT_FAIL
    elif job.command == "suite":
        base = QUICK if job.action == "quick" else FULL
        cfg = SuiteConfig(**{**base.to_json(), "group_ns": base.group_ns,
                             "seed": job.get("seed", base.seed), "shards": job.get("shards", 1),
                             "samples": job.get("samples", base.samples)})
        fault = job.get("inject_fault")
        if fault:
            # a broken map produces NaNs on purpose; the failing rows report them
            with faults.inject(fault), np.errstate(all="ignore"):
                out = run_suite(job.action, cfg, job.get("criteria"))
        else:
            out = run_suite(job.action, cfg, job.get("criteria"))
        report.update({k: v for k, v in out.items() if k not in ("schema", "build")})
        code = EXIT_PASS if out["pass"] else EXIT_FAIL
        csv_text = rows_to_csv(out["rows"])
    else:
        raise UsageError(f"unknown command {job.command} {job.action}")
    return code, report, csv_text


def _summary_table(report: dict) -> str:
    lines = []
    for r in report.get("rows", []):
        stat = r["statistic"]
        stat = f"{stat:.3g}" if isinstance(stat, (int, float)) else str(stat)
        lines.append(f"{'PASS' if r['pass'] else 'FAIL'}  [{r['criterion']}] {r['name']}  ({stat})")
    return "\n".join(lines)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(_glue_negative_values(list(sys.argv[1:] if argv is None else argv)))
        job = job_from_args(args)
        code, report, csv_text = run(job)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE
    except (DomainError, GammaPoleError, ValueError) as exc:
        print(f"hualab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    text = dumps(report)
    sys.stdout.write(text)
    if getattr(args, "output", None):
        Path(args.output).write_text(text)
    if csv_text is not None and getattr(args, "csv", None):
        Path(args.csv).write_text(csv_text)
    if job.command == "suite":
        print(_summary_table(report), file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
