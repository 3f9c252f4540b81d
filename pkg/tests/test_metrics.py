import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tbdglmb.metrics import cardinality_error, label_consistency, label_consistency_per_target, ospa

points = st.lists(st.tuples(st.floats(-50, 50), st.floats(-50, 50)), max_size=5)


def _ospa_bruteforce(X, Y, c, p):
    """Permutation oracle for small sets."""
    if not X and not Y:
        return 0.0
    if len(X) > len(Y):
        X, Y = Y, X
    m, n = len(X), len(Y)
    best = math.inf
    for perm in itertools.permutations(range(n), m):
        cost = sum(min(math.dist(X[i], Y[j]), c) ** p for i, j in enumerate(perm))
        best = min(best, cost)
    return ((best + (n - m) * c**p) / n) ** (1 / p)


def test_ospa_examples():
    pts = [(1.0, 2.0), (5.0, -3.0)]
    assert ospa(pts, pts) == 0.0
    assert ospa([], [(0.0, 0.0)], 5.0, 1.0) == 5.0
    assert ospa([(0.0, 0.0)], [(2.0, 0.0)], 5.0, 1.0) == pytest.approx(2.0)
    assert ospa([], []) == 0.0
    with pytest.raises(ValueError):
        ospa([], [], c=0)
    with pytest.raises(ValueError):
        ospa([], [], p=0.5)


@given(points, points, st.sampled_from([1.0, 2.0]))
@settings(max_examples=150, deadline=None)
def test_ospa_matches_bruteforce_and_is_symmetric_bounded(X, Y, p):
    d = ospa(X, Y, 5.0, p)
    assert d == pytest.approx(_ospa_bruteforce(X, Y, 5.0, p), abs=1e-9)
    assert d == pytest.approx(ospa(Y, X, 5.0, p), abs=1e-12)
    assert 0.0 <= d <= 5.0 + 1e-12


def test_cardinality_error():
    assert cardinality_error(3, 2) == 1 and cardinality_error(0, 2) == -2


def _truth(n, tid=1):
    return {k: [(tid, float(k), 0.0)] for k in range(n)}


def test_label_consistency_examples():
    truth = _truth(10)
    steady = {k: [("1:0", float(k), 0.1)] for k in range(10)}
    assert label_consistency(steady, truth) == 1.0
    switch = {k: [("1:0" if k < 5 else "6:0", float(k), 0.1)] for k in range(10)}
    assert label_consistency(switch, truth) == 0.5
    assert label_consistency({}, truth) == 0.0


def test_label_consistency_gate_and_average():
    truth = {k: [(1, 0.0, 0.0), (2, 20.0, 0.0)] for k in range(4)}
    recs = {k: [("a", 0.5, 0.0), ("b" if k else "c", 20.0, 3.0)] for k in range(4)}
    per = label_consistency_per_target(recs, truth)
    # target 2's estimate is 3 m away, outside the 2 m gate: never associated
    assert per == {1: 1.0, 2: 0.0}
    assert label_consistency(recs, truth) == 0.5
    assert label_consistency_per_target(recs, truth, gate=3.5)[2] == 0.75
