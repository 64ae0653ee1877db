import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from varmia.attack import AttackRecord
from varmia.metrics import (RocSummary, accuracy_at_tau, asr, auc, auc_oracle, roc_curve,
                            summarize, tpr_at_fpr, trapezoid_area)


def table(members, nonmembers):
    s = np.array(list(members) + list(nonmembers), dtype=float)
    y = np.array([True] * len(members) + [False] * len(nonmembers))
    return s, y


STAIR = table([0.8, 0.4], [0.6, 0.2])


def test_roc_perfect_separation():
    assert roc_curve(table([1.0], [0.0])) == [(0, 0), (0, 1), (1, 1)]


def test_roc_all_equal():
    assert roc_curve(table([0.3, 0.3], [0.3])) == [(0, 0), (1, 1)]


def test_roc_staircase():
    pts = roc_curve(STAIR)
    assert pts == [(0, 0), (0, 0.5), (0.5, 0.5), (0.5, 1), (1, 1)]


def test_auc_examples():
    assert auc(table([1.0], [0.0])) == 1.0
    assert auc(STAIR) == 0.75
    # pairs: (1.0 vs 1.0) tie, (1.0 vs 0.0) win
    assert auc(table([1.0], [1.0, 0.0])) == 0.75


def test_asr_examples():
    assert asr(table([1.0], [0.0])) == 1.0
    assert asr(table([0.5] * 5, [0.5] * 5)) == 0.5
    assert asr(STAIR) == 0.75


def test_tpr_at_fpr_examples():
    assert tpr_at_fpr(table([1.0], [0.0]), 0.01) == 1.0
    assert tpr_at_fpr(STAIR, 1.0) == 1.0
    assert tpr_at_fpr(table([0.1], [0.9, 0.8]), 1.0) == 1.0
    # one nonmember above every member uses the whole 1% budget of 100;
    # the next nonmember (0.6) closes the threshold range below 0.7
    s, y = table([0.9, 0.7, 0.5, 0.3], [1.0, 0.6] + [0.0] * 98)
    assert tpr_at_fpr((s, y), 0.01) == 0.5
    assert tpr_at_fpr((s, y), 0.0) == 0.0
    assert tpr_at_fpr((s, y), 0.02) == 1.0


def test_oracle_examples():
    assert auc_oracle(table([1.0], [0.0])) == 1.0
    assert auc_oracle(table([0.0, 0.1], [0.5, 0.9])) == 0.0


@pytest.mark.parametrize("fn", [roc_curve, auc, asr, auc_oracle, tpr_at_fpr])
def test_single_class_rejected(fn):
    with pytest.raises(ValueError):
        fn(table([0.1, 0.2], []))


def _random_tables(n_tables, seed=0):
    rng = np.random.default_rng(seed)
    for _ in range(n_tables):
        n = int(rng.integers(2, 40))
        y = rng.random(n) < rng.uniform(0.2, 0.8)
        y[0], y[1] = True, False
        # few distinct values so ties are common
        s = rng.integers(0, int(rng.integers(2, 12)), n).astype(float) / 3.0
        yield s, y


def check_roc_invariants(pts, a):
    pts = np.asarray(pts)
    assert tuple(pts[0]) == (0, 0) and tuple(pts[-1]) == (1, 1)
    assert np.all(np.diff(pts[:, 0]) >= 0) and np.all(np.diff(pts[:, 1]) >= 0)
    assert abs(trapezoid_area(pts) - a) <= 1e-9


def test_auc_equals_oracle_on_1000_tables():
    for s, y in _random_tables(1000):
        a = auc((s, y))
        assert abs(a - auc_oracle((s, y))) <= 1e-12
        check_roc_invariants(roc_curve((s, y)), a)


scores = st.lists(st.integers(-50, 50), min_size=2, max_size=30)


@settings(max_examples=200, deadline=None)
@given(scores, st.data())
def test_monotone_transform_invariance(vals, data):
    labels = data.draw(st.lists(st.booleans(), min_size=len(vals), max_size=len(vals)))
    labels[0], labels[1] = True, False
    s, y = np.array(vals, float), np.array(labels)
    g = s ** 3 + 5 * s  # strictly increasing and exact on small integers
    for fn in (auc, asr, tpr_at_fpr):
        assert fn((s, y)) == fn((g, y))


@settings(max_examples=200, deadline=None)
@given(scores, st.data())
def test_label_flip_duality(vals, data):
    labels = data.draw(st.lists(st.booleans(), min_size=len(vals), max_size=len(vals)))
    labels[0], labels[1] = True, False
    s, y = np.array(vals, float), np.array(labels)
    assert auc((-s, ~y)) == pytest.approx(auc((s, y)), abs=1e-12)


def _records(s, y):
    p = {"n": 1, "t": 1, "k": 1, "distance": "l1"}
    return [AttackRecord(i, bool(m), "rediffuse", float(v), p) for i, (v, m) in
            enumerate(zip(s, y))]


def test_records_and_arrays_agree():
    s, y = next(_random_tables(1, seed=4))
    assert auc(_records(s, y)) == auc((s, y))


def test_accuracy_at_tau_tie_is_nonmember():
    s, y = table([-0.5], [-0.6])
    assert accuracy_at_tau((s, y), 0.5) == 0.5
    assert accuracy_at_tau((s, y), 0.55) == 1.0


def test_summary_json_and_csv_round_trip():
    s, y = next(_random_tables(1, seed=9))
    sm = summarize((s, y), 0.05, tau=0.2)
    back = RocSummary.from_json(sm.to_json())
    assert back == sm
    rows = sm.points_csv().strip().splitlines()
    assert rows[0] == "fpr,tpr"
    parsed = [tuple(map(float, r.split(","))) for r in rows[1:]]
    assert parsed == [tuple(p) for p in sm.points]
