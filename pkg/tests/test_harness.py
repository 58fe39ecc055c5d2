import numpy as np
import pytest

from conftest import make_records
from lecfdr.core import ThresholdDecision
from lecfdr.harness import (
    MethodSpec,
    compare_methods,
    min_feasible_accepted,
    repeated_eval,
    split,
    split_seed,
    summarize,
    test_metrics as metrics,
)
from lecfdr.synthetic import default_paired_spec, default_spec, gen_paired, gen_single


def test_split_sizes_and_partition():
    recs = list(range(10))
    cal, test = split(recs, 0.5, seed=3)
    assert len(cal) == len(test) == 5
    assert sorted(cal + test) == recs
    assert not set(cal) & set(test)
    assert split(recs, 0.5, seed=3) == (cal, test)


def test_split_errors():
    with pytest.raises(ValueError):
        split([1], 0.5, 0)
    with pytest.raises(ValueError):
        split([1, 2, 3], 1.0, 0)


def test_split_seed_stable_and_distinct():
    assert split_seed(0, 1) == split_seed(0, 1)
    assert len({split_seed(s, i) for s in range(5) for i in range(50)}) == 250


def test_metrics_hand_count():
    # accepted errs {0,0,1,0}; rejected {1}
    u = np.array([0.1, 0.2, 0.3, 0.4, 0.9])
    err = np.array([0, 0, 1, 0, 1])
    m = metrics(u, err, ThresholdDecision("feasible", (0.4,), method="lec"))
    assert m["test_fdr"] == 0.25 and m["accepted_correct"] == 3 and m["power"] == 1.0
    # one more correct answer rejected: power drops to 3/4
    u2, err2 = np.append(u, 0.95), np.append(err, 0)
    assert metrics(u2, err2, ThresholdDecision("feasible", (0.4,), method="lec"))["power"] == 0.75


def test_metrics_infeasible_abstains():
    m = metrics(np.array([0.1, 0.2]), np.array([0, 1]), ThresholdDecision("infeasible", None, method="lec"))
    assert m["test_fdr"] is None and m["power"] == 0.0 and m["abstained"] == 2


def test_metrics_all_correct():
    m = metrics(np.array([0.1, 0.2]), np.array([0, 0]), ThresholdDecision("feasible", (1.0,), method="lec"))
    assert m["test_fdr"] == 0.0


def test_method_spec_parse():
    assert MethodSpec.parse("lec:2") == MethodSpec("lec", 1)
    assert MethodSpec.parse("lec-route").multi
    for bad in ("nope", "lec-route:1"):
        with pytest.raises(ValueError):
            MethodSpec.parse(bad)


def test_single_split_is_one_pass():
    recs = gen_single(default_spec(3), 200)
    summ, table = repeated_eval(recs, "lec", 0.2, n_splits=1, seed=4)
    assert len(table) == 1 and summ.n_splits == 1
    r = table[0]
    from lecfdr.single import calibrate_arrays
    from lecfdr.harness import _permutation
    perm = _permutation(200, r.sub_seed)
    u = np.array([x.u for x in recs])
    e = np.array([x.err for x in recs])
    d = calibrate_arrays(u[perm[:100]], e[perm[:100]], 0.2)
    m = metrics(u[perm[100:]], e[perm[100:]], d)
    assert (r.feasible, r.test_fdr, r.power) == (d.feasible, m["test_fdr"], m["power"])


def test_deterministic_and_single_equals_compare():
    recs = gen_single(default_spec(1), 300)
    a = repeated_eval(recs, "lec", 0.15, n_splits=10, seed=2)
    b = repeated_eval(recs, "lec", 0.15, n_splits=10, seed=2)
    assert a == b
    summ, table = compare_methods(recs, ["lec", "coin-cp"], [0.15], n_splits=10, seed=2)
    assert summ[0] == a[0]
    assert [r.sub_seed for r in table if r.method == "lec"] == [r.sub_seed for r in table if r.method == "coin-cp"]


def test_summary_is_fold_of_table():
    recs = gen_single(default_spec(1), 300)
    summ, table = compare_methods(recs, ["lec", "coin-hfd"], [0.1, 0.3], n_splits=8)
    for s in summ:
        rows = [r for r in table if r.method == s.method and r.alpha == s.alpha]
        assert summarize(rows, s.method, s.alpha) == s
        assert 0.0 <= s.feasibility_rate <= 1.0
        assert s.fdr_undefined == sum(r.test_fdr is None for r in rows)


def test_no_leakage_from_test_labels():
    recs = gen_single(default_spec(5), 200)
    _, table = repeated_eval(recs, "lec", 0.2, n_splits=5, seed=9)
    flipped = list(recs)
    for s, r in enumerate(table):
        from lecfdr.harness import _permutation
        test_idx = _permutation(200, r.sub_seed)[100:]
        flipped = [x if i not in set(test_idx) else x.__class__(x.id, x.u, 1 - x.err) for i, x in enumerate(recs)]
        _, t2 = repeated_eval(flipped, "lec", 0.2, n_splits=s + 1, seed=9)
        assert t2[s].thresholds == r.thresholds


def test_fdr_controlled_on_synthetic():
    recs = gen_single(default_spec(8), 4000)
    summ, _ = repeated_eval(recs, "lec", 0.1, n_splits=100, seed=1)
    assert summ.fdr_mean <= 0.1 + 3 * summ.fdr_std / 10


def test_routing_methods_on_paired():
    recs = gen_paired(default_paired_spec(0.0, seed=2), 600)
    summ, table = compare_methods(recs, ["lec:1", "lec:2", "lec-route", "lec-route-grid", "lec-multi"], [0.15],
                                  n_splits=5)
    route = next(s for s in summ if s.method == "lec-route")
    multi = next(s for s in summ if s.method == "lec-multi")
    assert route.accepted_correct_mean == multi.accepted_correct_mean
    for r in table:
        assert sum(r.credited) == r.accepted_total


def test_compare_validation():
    recs = gen_single(default_spec(), 50)
    with pytest.raises(ValueError):
        compare_methods(recs, ["lec-route"], [0.1], n_splits=2)
    with pytest.raises(ValueError):
        compare_methods(recs, ["lec"], [1.2], n_splits=2)
    with pytest.raises(ValueError):
        compare_methods(recs, ["unknown"], [0.1], n_splits=2)


def test_min_feasible_accepted_closed_forms():
    recs = make_records(np.arange(1, 41) / 40, [0] * 40)
    assert min_feasible_accepted(recs, 0.1, "lec") == 10
    assert min_feasible_accepted(recs, 0.1, "coin-cp") == 29
    assert min_feasible_accepted(recs, 0.1, "coin-hfd") is None
