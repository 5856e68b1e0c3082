"""Run a verification profile and store the JSON report and CSV table.

    python3 scripts/run_suite.py --profile full --outdir results
"""
import argparse
import sys
import time
from pathlib import Path

from hualab.suites import CRITERIA, dumps, rows_to_csv, run_suite


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--profile", choices=["quick", "full"], default="quick")
    p.add_argument("--criteria", help="comma list, full profile only")
    p.add_argument("--outdir", default="results")
    args = p.parse_args()
    criteria = [int(c) for c in args.criteria.split(",")] if args.criteria else None
    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    report = run_suite(args.profile, None, criteria)
    elapsed = time.perf_counter() - start
    (out / f"{args.profile}.json").write_text(dumps(report))
    (out / f"{args.profile}.csv").write_text(rows_to_csv(report["rows"]))
    by_criterion = {}
    for r in report["rows"]:
        by_criterion.setdefault(r["criterion"], []).append(r["pass"])
    for c, passes in sorted(by_criterion.items()):
        title = CRITERIA.get(c, ("",))[0]
        print(f"[{c}] {title:32s} {sum(passes)}/{len(passes)} pass")
    print(f"{'PASS' if report['pass'] else 'FAIL'} in {elapsed:.1f}s; report in {out}/")
    return 0 if report["pass"] else 1


if __name__ == "__main__":
    sys.exit(main())
