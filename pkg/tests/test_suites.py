import csv
import io
import json
import math

import pytest

from hualab import faults
from hualab.algebra import Algebra
from hualab.stats import StatCheck
from hualab.suites import (CRITERIA, FULL, QUICK, SCHEMA_VERSION, Row, build_id, cell_seed, dumps,
                           identity_suite, recursion_checks, rerun_seed, rows_to_csv,
                           special_function_checks, with_rerun)


def check(passed, name="cell"):
    return StatCheck(name, "mean", 0.0 if passed else 9.0, passed)


def test_seeds_are_stable_and_distinct():
    assert cell_seed(1, "a") == cell_seed(1, "a")
    assert len({cell_seed(1, "a"), cell_seed(2, "a"), cell_seed(1, "b")}) == 3
    assert 0 <= cell_seed(1, "a") < 2**63
    assert rerun_seed(5) != 5


def test_rerun_policy():
    seen = []

    def flaky(seed):
        seen.append(seed)
        return check(len(seen) > 1)

    items, attempts = with_rerun(flaky, 7)
    assert attempts == 2 and items[0].passed and seen == [7, rerun_seed(7)]
    items, attempts = with_rerun(lambda s: [check(True), check(True)], 7)
    assert attempts == 1 and len(items) == 2
    items, attempts = with_rerun(lambda s: check(False), 7, rerun=False)
    assert attempts == 1 and not items[0].passed


def test_rows_to_csv():
    rows = [Row(1, "a", True, 0.5).to_json(), Row(2, "b, c", False, math.inf, {"attempts": 2}).to_json()]
    parsed = list(csv.reader(io.StringIO(rows_to_csv(rows))))
    assert parsed[0] == ["criterion", "name", "pass", "statistic", "attempts"]
    assert parsed[2] == ["2", "b, c", "False", "inf", "2"]


def test_dumps_handles_non_finite_and_complex():
    obj = json.loads(dumps({"x": math.nan, "y": -math.inf, "z": 1 + 2j}))
    assert obj == {"x": "nan", "y": "-inf", "z": {"re": 1.0, "im": 2.0}}


def test_build_id_is_a_stable_hash():
    assert build_id() == build_id() and len(build_id()) == 12


def test_profiles():
    assert QUICK.samples < FULL.samples
    assert FULL.samples == 10**6 and FULL.trials == 100 and FULL.n_max == 8
    assert sorted(CRITERIA) == list(range(1, 9))
    assert SCHEMA_VERSION == 1


@pytest.mark.parametrize("alg", list(Algebra))
def test_identity_suite_small(alg):
    checks = identity_suite(alg, 5, 12, seed=3)
    assert all(c.passed for c in checks), [c.to_json() for c in checks if not c.passed]


def test_identity_suite_detects_fault():
    with faults.inject("upsilon-sign"):
        checks = identity_suite("so", 4, 6, seed=3)
    assert not all(c.passed for c in checks)


def test_exact_kit_and_recursion():
    assert all(c.passed for c in special_function_checks())
    assert all(c.passed for c in recursion_checks(20, seed=1))
