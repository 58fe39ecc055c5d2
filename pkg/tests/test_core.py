import math

import pytest
from hypothesis import given, strategies as st

from lecfdr.core import (
    MultiRecord,
    Record,
    RiskSpec,
    ValidationError,
    max_errors_table,
    sort_by_uncertainty,
    validate_multi,
    validate_records,
)


def test_validate_accepts_well_formed_row():
    rows = [Record(1, 0.3, 0)]
    assert validate_records(rows) == rows


def test_validate_rejects_nan():
    with pytest.raises(ValidationError) as exc:
        validate_records([Record(1, float("nan"), 0)])
    assert exc.value.problems == [(1, "non-finite uncertainty")]


def test_validate_rejects_non_binary_label():
    with pytest.raises(ValidationError) as exc:
        validate_records([Record(1, 0.3, 2)])
    assert exc.value.problems == [(1, "error label not binary")]


def test_validate_reports_every_bad_row():
    with pytest.raises(ValidationError) as exc:
        validate_records([(1, 0.1, 0), (2, math.inf, 0), (3, 0.2, 1), (4, 0.2, -1)])
    assert [i for i, _ in exc.value.problems] == [2, 4]


def test_validate_tuples_and_dicts():
    got = validate_records([("a", "0.5", "1"), {"id": "b", "u": 0.25, "err": 0}])
    assert got == [Record("a", 0.5, 1), Record("b", 0.25, 0)]


def test_validate_multi_inconsistent_m():
    with pytest.raises(ValidationError) as exc:
        validate_multi([("a", [(0.1, 0), (0.2, 1)]), ("b", [(0.1, 0)])])
    assert exc.value.problems[0][0] == 2


def test_riskspec_bounds():
    RiskSpec(0.1, 0.05)
    for bad in (0.0, 1.0, -0.1):
        with pytest.raises(ValueError):
            RiskSpec(bad)
    with pytest.raises(ValueError):
        RiskSpec(0.1, 1.0)


def test_sort_two_elements():
    a, b = Record("a", 0.5, 1), Record("b", 0.1, 0)
    assert sort_by_uncertainty([a, b]) == [b, a]


def test_sort_identity_on_sorted():
    rows = [Record(i, u, 0) for i, u in enumerate([0.1, 0.2, 0.3])]
    assert sort_by_uncertainty(rows) == rows


def test_sort_is_stable_on_ties():
    a, b = Record("a", 0.2, 0), Record("b", 0.2, 1)
    assert [r.id for r in sort_by_uncertainty([a, b])] == ["a", "b"]


record_lists = st.lists(
    st.builds(Record, st.integers(), st.floats(-5, 5, allow_nan=False), st.integers(0, 1)), max_size=30
)


@given(record_lists)
def test_sort_idempotent_permutation(rows):
    once = sort_by_uncertainty(rows)
    assert sort_by_uncertainty(once) == once
    assert sorted(map(repr, once)) == sorted(map(repr, rows))


@given(record_lists)
def test_validate_idempotent(rows):
    assert validate_records(validate_records(rows)) == validate_records(rows)


def test_max_errors_table_exact_at_boundary():
    # 0.1 * 10 must count as exactly reaching -1 with no errors
    t = max_errors_table(0.1, 20)
    assert t[9] == -1 and t[10] == 0 and t[20] == 1


def test_multirecord_project():
    r = MultiRecord("x", ((0.1, 0), (0.7, 1)))
    assert r.m == 2
    assert r.project(1) == Record("x", 0.7, 1)
