"""Partial means of Phi for growing truncation levels.

Prints Monte Carlo partial means next to the closed-form partial products for
the three deviation laws used in the virtual group suite.
"""
import argparse

from hualab.suites import PICKRELL_LAWS
from hualab.virtual import truncation_diagnostic


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--samples", type=int, default=200000)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--kmax", type=int, nargs="+", default=[2, 4, 8, 15, 30, 60])
    args = p.parse_args()
    for name, law in PICKRELL_LAWS:
        out = truncation_diagnostic(law, args.kmax, args.samples, args.seed)
        print(name)
        print(f"  {'k':>4} {'mc mean':>12} {'stderr':>10} {'closed form':>12}")
        for r in out["rows"]:
            print(f"  {r['k']:>4} {r['mc_mean']:12.6f} {r['mc_stderr']:10.2e} {r['closed_form']:12.6f}")


if __name__ == "__main__":
    main()
