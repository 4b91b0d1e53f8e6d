import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from socausal.closedform import (
    GaussSigmoidModel,
    gate_joint_table,
    or_gate_kernel,
    sample_gauss_sigmoid,
)
from socausal.domains import ValueDomain
from socausal.fitting import FitOptions
from socausal.inference import (
    InferenceError,
    InferenceOptions,
    decide,
    decide_pairwise,
    decision_from_scores,
    infer_orderings,
    select_orderings,
)

BIN = ValueDomain.binary()
REAL = ValueDomain.full_real()


def test_decide_examples():
    assert decide(3.3697, 3.4366) == "forward"
    assert decide(4.9918, 4.9920) == "undecided"
    assert decide(3.8770, 3.8758) == "backward"
    for v in (0.1, 3.0, 1e6):
        assert decide(v, v) == "undecided"


def test_decide_rejects_nonfinite():
    with pytest.raises(InferenceError):
        decide(float("nan"), 1.0)
    with pytest.raises(InferenceError):
        decide(1.0, float("inf"))


def test_negative_scores_use_absolute_scale():
    assert decide(-2.0, -2.0001) == "undecided"
    assert decide(-2.0, -2.1) == "backward"


@settings(max_examples=200, deadline=None)
@given(st.floats(0.1, 100), st.floats(0.1, 100), st.floats(0, 0.1), st.floats(0, 0.1))
def test_threshold_monotonicity(a, b, t1, t2):
    lo, hi = sorted((t1, t2))
    s = {(0, 1): a, (1, 0): b}
    assert select_orderings(s, lo) <= select_orderings(s, hi)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0.5, 10), min_size=6, max_size=6), st.floats(0, 0.05))
def test_multiway_band_monotone_and_contains_min(vals, thr):
    s = dict(zip(itertools.permutations(range(3)), vals))
    sel = select_orderings(s, thr)
    best = min(s, key=s.get)
    assert best in sel
    assert sel <= select_orderings(s, thr * 2)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.5, 10), st.floats(0.5, 10))
def test_verdict_undecided_iff_both_selected(a, b):
    d = decision_from_scores({(0, 1): a, (1, 0): b})
    assert (d.verdict == "undecided") == (len(d.selected) == 2)


def test_equivalence_classes():
    d = decision_from_scores({(0, 1, 2): 1.0, (1, 0, 2): 1.0, (2, 1, 0): 1.5, (0, 2, 1): 1.2,
                              (1, 2, 0): 1.5, (2, 0, 1): 2.0})
    assert d.equivalence_classes[0] == ((0, 1, 2), (1, 0, 2))
    assert d.verdict == "ordering-set"
    assert d.selected == frozenset({(0, 1, 2), (1, 0, 2)})


def _sigmoid_data(seed, n=2000):
    return sample_gauss_sigmoid(GaussSigmoidModel(0, 1, 2, 0), n, np.random.default_rng(seed))


def test_sigmoid_selects_backward():
    x, y = _sigmoid_data(0)
    d = infer_orderings([x, y], [BIN, REAL])
    assert d.verdict == "backward"
    assert d.selected == frozenset({(1, 0)})


def test_independent_product_undecided():
    rng = np.random.default_rng(1)
    x = (rng.random(2000) < 0.5).astype(float)
    y = rng.standard_normal(2000)
    assert infer_orderings([x, y], [BIN, REAL]).verdict == "undecided"


def test_relabeling_equivariance():
    x, y = _sigmoid_data(2)
    a = infer_orderings([x, y], [BIN, REAL])
    b = infer_orderings([y, x], [REAL, BIN])
    swap = {"forward": "backward", "backward": "forward", "undecided": "undecided"}
    assert b.verdict == swap[a.verdict]
    assert b.scores[(0, 1)] == pytest.approx(a.scores[(1, 0)], abs=1e-12)


def test_score_set_invariance_and_jobs():
    x, y = _sigmoid_data(3, 500)
    orders = [(0, 1), (1, 0)]
    a = infer_orderings([x, y], [BIN, REAL], orderings=orders)
    b = infer_orderings([x, y], [BIN, REAL], orderings=orders[::-1])
    c = infer_orderings([x, y], [BIN, REAL], InferenceOptions(jobs=2))
    assert a.scores == b.scores == c.scores


def test_decide_pairwise_matches():
    x, y = _sigmoid_data(4, 800)
    p = decide_pairwise(x, y, [BIN, REAL])
    full = infer_orderings([x, y], [BIN, REAL])
    assert p.scores == full.scores
    assert p.verdict == decide(p.scores[(0, 1)], p.scores[(1, 0)])


def test_domains_inferred_when_missing():
    x, y = _sigmoid_data(5, 500)
    assert infer_orderings([x, y]).scores == infer_orderings([x, y], [BIN, REAL]).scores


def test_max_vars_guard():
    cols = [np.array([0, 1, 0, 1], dtype=float)] * 6
    with pytest.raises(InferenceError, match="orderings"):
        infer_orderings(cols, [BIN] * 6)
    with pytest.raises(InferenceError):
        infer_orderings([cols[0]], [BIN])


def test_or_gate_output_placed_last():
    n, k, m = 4, 10.0, 5000
    table = gate_joint_table(or_gate_kernel(k, n - 1), n)
    states = list(table)
    probs = np.array([table[s] for s in states])
    rng = np.random.default_rng(6)
    idx = rng.choice(len(states), size=m, p=probs / probs.sum())
    rows = np.array(states, dtype=float)[idx]
    d = infer_orderings([rows[:, j] for j in range(n)], [BIN] * n,
                        InferenceOptions(fit=FitOptions(), max_vars=4))
    assert len(d.scores) == 24
    for o in d.selected:
        assert o[-1] == n - 1
