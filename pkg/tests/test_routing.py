import math

import numpy as np
import pytest

from conftest import make_multi, make_records, random_rows
from lecfdr.core import BELOW_MIN, MultiRecord, ThresholdDecision
from lecfdr.routing import (
    calibrate_multi,
    calibrate_routing,
    cascade_outcomes,
    check_routing_constraint,
    gate_cascade,
    grid_scan_routing,
    system_indicators,
)
from lecfdr.single import calibrate_single
from oracles import brute_cascade, brute_lex_first, cascade_counts, exact_feasible

FOUR = make_multi([
    [(0.1, 0), (0.9, 1)],
    [(0.2, 0), (0.8, 0)],
    [(0.9, 1), (0.1, 0)],
    [(0.8, 0), (0.2, 0)],
])


def _rows(records):
    return [list(r.per_model) for r in records]


@pytest.mark.parametrize("row, expected", [
    (((0.1, 0), (0.9, 1)), (1, 0, 1)),
    (((0.9, 1), (0.1, 0)), (1, 0, 2)),
    (((0.9, 1), (0.9, 0)), (0, 0, None)),
])
def test_system_indicators_cascade(row, expected):
    ind = system_indicators(MultiRecord("r", row), (0.2, 0.2))
    assert (ind.S, ind.Z, ind.credited_model) == expected


def test_system_indicators_dimension_mismatch():
    with pytest.raises(ValueError):
        system_indicators(FOUR[0], (0.2,))


def test_check_routing_constraint_examples():
    ok, margin = check_routing_constraint(FOUR, (0.2, 0.2), 0.3)
    assert ok and margin == pytest.approx(-1.2)
    ok, margin = check_routing_constraint(FOUR, (0.9, BELOW_MIN), 0.3)
    assert not ok and margin == pytest.approx(-0.2)
    assert check_routing_constraint(FOUR, (BELOW_MIN, BELOW_MIN), 0.3) == (False, 0.0)


def test_calibrate_routing_four_records():
    d = calibrate_routing(FOUR, 0.3)
    assert d.feasible
    assert d.coverage_on_cal == 4
    assert d.margin == pytest.approx(-1.2)
    # several pairs reach full coverage with one fewer error; (0.2, 0.2) is one of them
    ok, margin = check_routing_constraint(FOUR, (0.2, 0.2), 0.3)
    assert ok and margin == pytest.approx(d.margin)
    # the documented tie policy then prefers the largest model-1 threshold
    assert d.thresholds == (0.8, 0.9)
    assert brute_cascade(_rows(FOUR), 0.3) == ((0.8, 0.9), 4, 0)


def test_routing_disabled_second_equals_single():
    d = calibrate_routing(FOUR, 0.3, disabled=(1,))
    s = calibrate_single([r.project(0) for r in FOUR], 0.3)
    assert d.feasible == s.feasible
    if s.feasible:
        assert d.thresholds == (s.threshold, BELOW_MIN)
        assert d.accepted_on_cal == s.accepted_on_cal


def test_routing_all_errors_infeasible():
    rows = make_multi([[(0.1 * i, 1), (0.2 * i, 1)] for i in range(6)])
    for a in (0.1, 0.5, 0.95):
        assert not calibrate_routing(rows, a).feasible


def test_routing_empty_is_infeasible():
    assert not calibrate_routing([], 0.3).feasible


def test_routing_rejects_wrong_m():
    with pytest.raises(ValueError):
        calibrate_routing(make_multi([[(0.1, 0)]]), 0.3)


def test_unknown_tie_policy():
    with pytest.raises(ValueError):
        calibrate_routing(FOUR, 0.3, tie_policy="coin-flip")


@pytest.mark.parametrize("ties", [False, True])
def test_routing_matches_exhaustive_grid(rng, ties):
    for _ in range(120):
        n = int(rng.integers(1, 40))
        rows = random_rows(rng, n, 2, ties=ties)
        a = float(rng.uniform(0.05, 0.5))
        d = calibrate_routing(make_multi(rows), a)
        ref = brute_cascade(rows, a)
        if ref is None:
            assert not d.feasible
            continue
        assert d.feasible
        assert (d.thresholds, d.coverage_on_cal, d.errors_on_cal) == ref


def test_multi_m1_equals_single(rng):
    for _ in range(40):
        n = int(rng.integers(1, 50))
        rows = random_rows(rng, n, 1)
        a = float(rng.uniform(0.05, 0.5))
        s = calibrate_single(make_records([r[0][0] for r in rows], [r[0][1] for r in rows]), a)
        for strategy in ("exact", "coord"):
            d = calibrate_multi(make_multi(rows), a, strategy=strategy)
            assert d.feasible == s.feasible
            if s.feasible:
                assert d.thresholds == s.thresholds and d.coverage_on_cal == s.accepted_on_cal


def test_multi_m2_exact_equals_routing(rng):
    for _ in range(40):
        rows = make_multi(random_rows(rng, int(rng.integers(2, 40)), 2))
        a = float(rng.uniform(0.05, 0.5))
        r = calibrate_routing(rows, a)
        m = calibrate_multi(rows, a)
        assert (r.status, r.thresholds, r.coverage_on_cal) == (m.status, m.thresholds, m.coverage_on_cal)


def test_multi_m3_exact_vs_brute_and_coord(rng):
    for _ in range(30):
        rows = random_rows(rng, 20, 3)
        ex = calibrate_multi(make_multi(rows), 0.3, strategy="exact")
        co = calibrate_multi(make_multi(rows), 0.3, strategy="coord")
        ref = brute_cascade(rows, 0.3)
        if ref is None:
            assert not ex.feasible and not co.feasible
            continue
        assert (ex.thresholds, ex.coverage_on_cal) == ref[:2]
        if co.feasible:
            assert co.coverage_on_cal <= ex.coverage_on_cal
            s, z = cascade_counts(rows, co.thresholds)
            assert exact_feasible(z, s, 0.3)


def test_multi_exact_cap():
    rows = make_multi([[(0.1, 0)] * 4])
    with pytest.raises(ValueError, match="coord"):
        calibrate_multi(rows, 0.3, strategy="exact")
    calibrate_multi(rows, 0.3, strategy="exact", exact_cap=4)


def test_coord_feasible_for_many_models(rng):
    for _ in range(20):
        rows = random_rows(rng, 150, 5)
        d = calibrate_multi(make_multi(rows), 0.25, strategy="coord")
        if d.feasible:
            s, z = cascade_counts(rows, d.thresholds)
            assert (s, z) == (d.coverage_on_cal, d.errors_on_cal)
            assert exact_feasible(z, s, 0.25)


def test_gate_cascade_examples():
    d = ThresholdDecision("feasible", (0.2, 0.2), 4, -1.2)
    assert gate_cascade(d, (0.15, 0.99)).model == 1
    assert gate_cascade(d, (0.5, 0.2)).model == 2
    assert gate_cascade(d, (0.5, 0.5)).model is None
    assert gate_cascade(ThresholdDecision("infeasible", None), (0.0, 0.0)).model is None
    with pytest.raises(ValueError):
        gate_cascade(d, (0.1,))


def test_cascade_outcomes_matches_scalar(rng):
    rows = random_rows(rng, 60, 3)
    recs = make_multi(rows)
    lams = (0.3, BELOW_MIN, 0.6)
    u = np.array([[p[0] for p in r] for r in rows])
    e = np.array([[p[1] for p in r] for r in rows])
    credited, z = cascade_outcomes(u, e, lams)
    for r, c, zz in zip(recs, credited, z):
        ind = system_indicators(r, lams)
        assert ind.credited_model == (None if c < 0 else c + 1)
        assert ind.Z == zz


def test_at_most_one_credit(rng):
    for rows in (random_rows(rng, 30, 3, ties=True) for _ in range(10)):
        for r in make_multi(rows):
            lams = tuple(rng.choice([BELOW_MIN, 0.25, 0.5, 1.0], 3))
            ind = system_indicators(r, lams)
            assert ind.S in (0, 1) and ind.Z <= ind.S
            assert (ind.credited_model is None) == (ind.S == 0)


def test_grid_scan_matches_lexicographic_oracle(rng):
    for _ in range(100):
        rows = random_rows(rng, int(rng.integers(1, 30)), 2)
        a = float(rng.uniform(0.05, 0.5))
        g = grid_scan_routing(make_multi(rows), a)
        ref = brute_lex_first(rows, a)
        if ref is None:
            assert not g.feasible
            continue
        assert (g.thresholds, g.coverage_on_cal) == ref[:2]
        best = calibrate_routing(make_multi(rows), a)
        assert best.coverage_on_cal >= g.coverage_on_cal


def test_below_min_threshold_never_selects():
    assert math.isinf(BELOW_MIN) and BELOW_MIN < 0
