import numpy as np
from hypothesis import given, settings, strategies as st

from conftest import brute_force_loss, make_window
from driftgate.csvio import fmt
from driftgate.inference import BootstrapSpec, moving_block_bootstrap
from driftgate.metrics import FLAG_NOTHING, CostSpec, loss_at, optimal_threshold, pr_auc, roc_auc, score_iqr
from test_metrics import pairwise_auc

scores_labels = st.integers(1, 60).flatmap(
    lambda n: st.tuples(
        st.lists(st.integers(0, 20).map(lambda k: k / 20), min_size=n, max_size=n),
        st.lists(st.integers(0, 1), min_size=n, max_size=n),
    )
)
costs = st.tuples(st.floats(0.01, 100), st.floats(0.01, 100))


@settings(max_examples=300, deadline=None)
@given(scores_labels, costs)
def test_threshold_is_global_minimiser(sl, c):
    w = make_window(*sl)
    cost = CostSpec(*c)
    r = optimal_threshold(w, cost)
    grid = np.append(np.linspace(0, 1, 401), FLAG_NOTHING)
    best, _ = brute_force_loss(w, cost, grid)
    assert r.loss == best
    assert loss_at(w, r.tau, cost) == r.loss
    assert r.tau in set(w.scores.tolist()) | {FLAG_NOTHING}


@settings(max_examples=200, deadline=None)
@given(scores_labels)
def test_auc_properties(sl):
    s, y = np.array(sl[0]), np.array(sl[1])
    if 0 < y.sum() < y.size:
        a = roc_auc(make_window(s, y))
        assert abs(a - pairwise_auc(s, y)) < 1e-12
        # reversing the ranking mirrors the AUC
        assert abs(roc_auc(make_window(1 - s, y)) - (1 - a)) < 1e-12
    if y.sum() > 0:
        ap = pr_auc(make_window(s, y))
        assert 0 < ap <= 1 + 1e-12


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=7, max_size=60), st.integers(0, 2**32 - 1))
def test_bootstrap_point_and_order(xs, seed):
    x = np.array(xs)
    for b in moving_block_bootstrap(x, BootstrapSpec(replications=20, seed=seed)):
        assert b.point_estimate == np.mean(x)
        assert b.ci_low <= b.ci_high and b.se >= 0


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=1, max_size=50))
def test_iqr_nonnegative_bounded(xs):
    q = score_iqr(np.array(xs))
    assert 0 <= q <= 1


@given(st.floats(allow_nan=False))
def test_csv_float_round_trip(v):
    assert float(fmt(v)) == v
