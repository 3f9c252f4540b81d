import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from tbdglmb.rfs import (
    DegeneratePosteriorError,
    GlmbDensity,
    Hypothesis,
    Label,
    LabeledParticleTrack,
    cardinality_distribution,
    distinct_label_indicator,
    empty_density,
    multi_target_exponential,
    normalize,
)


def test_label_order_and_text():
    assert Label(1, 5) < Label(2, 0) < Label(2, 1)
    assert str(Label(12, 3)) == "12:3"
    assert Label.parse("12:3") == Label(12, 3)


@pytest.mark.parametrize(
    "states, expected",
    [([], 1), ([("s1", Label(0, 0)), ("s2", Label(0, 0))], 0), ([("s1", Label(0, 0)), ("s2", Label(0, 1))], 1)],
)
def test_distinct_label_indicator(states, expected):
    assert distinct_label_indicator(states) == expected


def test_multi_target_exponential():
    assert multi_target_exponential(lambda s: 7.0, []) == 1.0
    assert multi_target_exponential(lambda s: 1.0, [1, 2, 3]) == 1.0
    assert multi_target_exponential(lambda s: 2.0, [1, 2, 3]) == 8.0


def _density(log_weights, cards=None):
    cards = cards or [0] * len(log_weights)
    hyps = [
        Hypothesis(frozenset(Label(1, i) for i in range(c)), lw)
        for c, lw in zip(cards, log_weights)
    ]
    return GlmbDensity(hyps, {})


def test_normalize_examples():
    assert normalize(_density([-3.7])).weights.tolist() == [1.0]
    np.testing.assert_allclose(normalize(_density([0.4, 0.4])).weights, [0.5, 0.5], rtol=0, atol=1e-15)
    np.testing.assert_allclose(normalize(_density([0.0, math.log(3)])).weights, [0.25, 0.75], rtol=1e-15)


def test_normalize_degenerate():
    with pytest.raises(DegeneratePosteriorError):
        normalize(_density([-math.inf, -math.inf]))


@given(st.lists(st.floats(-700, 700), min_size=1, max_size=30))
def test_normalize_sums_to_one(log_weights):
    w = normalize(_density(log_weights)).weights
    assert abs(w.sum() - 1.0) <= 1e-12


def test_cardinality_distribution_examples():
    np.testing.assert_array_equal(cardinality_distribution(_density([0.0], [2])), [0, 0, 1])
    cd = cardinality_distribution(_density([math.log(0.3), math.log(0.7)], [0, 1]))
    np.testing.assert_allclose(cd, [0.3, 0.7], rtol=1e-15)


@given(st.lists(st.tuples(st.integers(0, 5), st.floats(-50, 50)), min_size=1, max_size=20))
def test_cardinality_distribution_partitions_unity(items):
    cards, lws = zip(*items)
    cd = cardinality_distribution(normalize(_density(list(lws), list(cards))))
    assert abs(cd.sum() - 1.0) <= 1e-12
    assert len(cd) == max(cards) + 1


def test_empty_density():
    d = empty_density(4)
    assert d.time == 4 and len(d.hypotheses) == 1 and d.hypotheses[0].cardinality == 0
    assert d.weights.tolist() == [1.0]


def test_existence_and_track_lookup():
    l1, l2 = Label(1, 0), Label(1, 1)
    t1 = LabeledParticleTrack(l1, np.zeros((2, 5)), np.array([0.5, 0.5]))
    d = normalize(GlmbDensity(
        [Hypothesis(frozenset({l1}), math.log(0.6)), Hypothesis(frozenset({l1, l2}), math.log(0.4))],
        {l1: t1},
    ))
    ex = d.existence()
    assert ex[l1] == pytest.approx(1.0, abs=1e-15) and ex[l2] == pytest.approx(0.4, rel=1e-12)
    assert d.track(0, l1) is t1
    with pytest.raises(KeyError):
        d.track(0, l2)


def test_track_validation():
    with pytest.raises(ValueError):
        LabeledParticleTrack(Label(0, 0), np.zeros((3, 4)), np.ones(3) / 3)
    with pytest.raises(ValueError):
        LabeledParticleTrack(Label(0, 0), np.zeros((3, 5)), np.ones(2) / 2)
    t = LabeledParticleTrack(Label(0, 0), np.zeros((4, 5)), np.full(4, 0.25))
    assert t.ess() == pytest.approx(4.0) and t.n_particles == 4
