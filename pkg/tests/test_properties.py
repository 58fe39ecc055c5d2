from hypothesis import given, settings, strategies as st

from conftest import make_multi, make_records
from lecfdr.coin import calibrate_coin
from lecfdr.routing import calibrate_routing
from lecfdr.single import calibrate_single
from oracles import brute_cascade, brute_single, cascade_counts, exact_feasible

scores = st.sampled_from([0.0, 0.1, 0.25, 0.5, 0.75, 0.9, 1.0]) | st.floats(0, 1)
alphas = st.floats(0.01, 0.99)
singles = st.lists(st.tuples(scores, st.integers(0, 1)), max_size=60)
pairs = st.lists(st.tuples(st.tuples(scores, st.integers(0, 1)), st.tuples(scores, st.integers(0, 1))),
                 max_size=14)


@settings(max_examples=300, deadline=None)
@given(singles, alphas)
def test_single_equals_scan(rows, alpha):
    us = [u for u, _ in rows]
    es = [e for _, e in rows]
    d = calibrate_single(make_records(us, es), alpha)
    ref = brute_single(us, es, alpha)
    assert (None if not d.feasible else (d.threshold, d.accepted_on_cal, d.errors_on_cal)) == ref


@settings(max_examples=300, deadline=None)
@given(pairs, alphas)
def test_routing_equals_grid(rows, alpha):
    rows = [list(r) for r in rows]
    d = calibrate_routing(make_multi(rows), alpha)
    ref = brute_cascade(rows, alpha) if rows else None
    got = (d.thresholds, d.coverage_on_cal, d.errors_on_cal) if d.feasible else None
    assert got == ref
    if d.feasible:
        s, z = cascade_counts(rows, d.thresholds)
        assert exact_feasible(z, s, alpha)


@settings(max_examples=200, deadline=None)
@given(singles, st.floats(0.01, 0.5))
def test_coin_never_looser_than_lec_on_zero_error_prefix(rows, alpha):
    # On error-free data the +1 rule needs k >= 1/alpha and CP needs k >= ln(delta)/ln(1 - alpha).
    # The second is larger whenever (1 - alpha)**(1/alpha) >= delta, which covers alpha <= 0.5 at
    # delta = 0.05 (near alpha = 1 the order flips: one clean record passes CP at alpha = 0.97).
    us = [u for u, _ in rows]
    recs = make_records(us, [0] * len(us))
    lec = calibrate_single(recs, alpha)
    for bound in ("cp", "hfd"):
        c = calibrate_coin(recs, alpha, 0.05, bound)
        if c.feasible:
            assert lec.feasible
            assert c.accepted_on_cal <= lec.accepted_on_cal
