"""Monte Carlo against closed form for random exponent specs.

Draws real exponents inside the convergence domain for each group and size
and prints the estimate, the closed-form value and the z-score.
"""
import argparse

import numpy as np

from hualab.algebra import Algebra
from hualab.closedform import ExponentSpec, group_integral_rhs
from hualab.montecarlo import group_integral_mc
from hualab.stats import ComparisonReport


def random_spec(alg: Algebra, n: int, gen) -> ExponentSpec:
    while True:
        lam = gen.uniform(-0.4, 1.5, n).round(2)
        mu = gen.uniform(-0.4, 1.5, n).round(2) if alg is Algebra.C else None
        spec = ExponentSpec(alg, lam, mu)
        if spec.in_domain():
            return spec


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--samples", type=int, default=100000)
    p.add_argument("--specs", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sizes", type=int, nargs="+", default=[2, 3, 4])
    args = p.parse_args()
    gen = np.random.default_rng(args.seed)
    for alg in Algebra:
        for n in args.sizes:
            for i in range(args.specs):
                spec = random_spec(alg, n, gen)
                est = group_integral_mc(spec, args.samples, seed=args.seed + i)
                rep = ComparisonReport.build(est, group_integral_rhs(spec))
                lam = ",".join(f"{v:g}" for v in np.real(spec.lam))
                print(f"{alg.group}({n}) lambda=({lam}) mc={est.mean.real:.5f}"
                      f" cf={rep.closed_form.real:.5f} z={rep.z_score:.2f}"
                      f" {'ok' if rep.passed else 'FAIL'}")


if __name__ == "__main__":
    main()
