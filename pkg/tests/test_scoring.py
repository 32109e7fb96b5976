import numpy as np
import pytest
from scipy.special import expit, logit

from conftest import make_window
from driftgate.errors import InputError
from driftgate.scoring import (
    LogisticModel,
    LogisticScorer,
    ScoredWindow,
    SolverOptions,
    export_scores,
    fit_standardizer,
    gradient,
    import_scores,
    load_model,
    objective,
    predict_proba,
    save_model,
    train_logistic,
)


def test_standardizer_two_point_and_constant():
    X = np.array([[0.0, 7.0], [2.0, 7.0]])
    std = fit_standardizer(X)
    assert std.means[0] == 1 and std.stds[0] == 1
    Z = std.transform(X)
    np.testing.assert_array_equal(Z[:, 0], [-1, 1])
    np.testing.assert_array_equal(Z[:, 1], [0, 0])
    assert std.stds[1] > 0


def test_standardizer_moments(rng):
    X = rng.normal(3, 5, size=(100, 5))
    Z = fit_standardizer(X).transform(X)
    assert np.all(np.abs(Z.mean(axis=0)) < 1e-9)
    assert np.all(np.abs(Z.std(axis=0) - 1) < 1e-9)


def test_standardizer_errors():
    with pytest.raises(InputError):
        fit_standardizer(np.empty((0, 3)))
    std = fit_standardizer(np.eye(3))
    with pytest.raises(InputError):
        std.transform(np.ones((2, 4)))


def test_gradient_central_differences():
    rng = np.random.default_rng(7)
    h = 1e-6
    for _ in range(50):
        n, d = int(rng.integers(5, 40)), int(rng.integers(1, 6))
        X = rng.normal(size=(n, d))
        y = (rng.random(n) < 0.4).astype(float)
        w, b, lam = rng.normal(size=d), float(rng.normal()), float(rng.uniform(0, 2))
        gw, gb = gradient(w, b, X, y, lam)
        num = np.empty(d + 1)
        for j in range(d):
            e = np.zeros(d)
            e[j] = h
            num[j] = (objective(w + e, b, X, y, lam) - objective(w - e, b, X, y, lam)) / (2 * h)
        num[d] = (objective(w, b + h, X, y, lam) - objective(w, b - h, X, y, lam)) / (2 * h)
        ana = np.append(gw, gb)
        rel = np.linalg.norm(ana - num) / max(np.linalg.norm(num), 1e-12)
        assert rel < 1e-5


def test_separable_data_stays_finite():
    X = np.array([[-2.0], [-1.0], [1.0], [2.0]])
    y = np.array([0, 0, 1, 1])
    m = train_logistic(X, y, lam=1.0)
    assert np.all(np.isfinite(m.weights)) and m.converged
    assert m.grad_norm < 1e-6
    assert all(b <= a for a, b in zip(m.objective_trace, m.objective_trace[1:]))


def test_shuffled_labels_give_intercept_only_fit():
    rng = np.random.default_rng(11)
    n = 4000
    X = rng.normal(size=(n, 3))
    y = (rng.random(n) < 0.2).astype(int)
    m = train_logistic(X, y, lam=1.0)
    p = y.mean()
    se_b = 1 / np.sqrt(n * p * (1 - p))
    assert abs(m.intercept - logit(p)) < 3 * se_b
    assert np.all(np.abs(m.weights) < 3 * se_b)


def test_bayes_boundary_recovered():
    rng = np.random.default_rng(5)
    x = np.concatenate([rng.normal(0, 1, 5000), rng.normal(2, 1, 5000)])[:, None]
    y = np.repeat([0, 1], 5000)
    fitted = LogisticScorer(lam=1e-4).fit(x, y)
    m, std = fitted.model, fitted.standardizer
    boundary = std.means[0] + std.stds[0] * (-m.intercept / m.weights[0])
    assert abs(boundary - 1.0) < 0.1


def test_training_errors():
    with pytest.raises(InputError):
        train_logistic(np.ones((3, 1)), np.zeros(3))
    with pytest.raises(InputError):
        train_logistic(np.array([[np.nan], [1.0]]), np.array([0, 1]))


def test_l2_scale_total_matches_scaled_lambda(rng):
    X = rng.normal(size=(200, 2))
    y = (X[:, 0] + rng.normal(size=200) > 0).astype(int)
    a = train_logistic(X, y, lam=1.0, opts=SolverOptions(l2_scale="total"))
    b = train_logistic(X, y, lam=1.0 / 200)
    np.testing.assert_allclose(a.weights, b.weights, rtol=1e-10)


def test_predict_proba_properties():
    zero = LogisticModel(np.zeros(2), 0.0, 1.0, True, 0)
    np.testing.assert_array_equal(predict_proba(zero, None, np.ones((3, 2))), 0.5)
    m = LogisticModel(np.array([1.0]), 0.0, 1.0, True, 0)
    assert predict_proba(m, None, np.array([[0.5]]))[0] == pytest.approx(expit(0.5), abs=1e-15)
    assert predict_proba(m, None, np.array([[0.5]]))[0] == pytest.approx(0.6225, abs=1e-4)
    rng = np.random.default_rng(0)
    X = rng.normal(size=(20, 3))
    m = LogisticModel(rng.normal(size=3), 0.3, 1.0, True, 0)
    neg = LogisticModel(-m.weights, -0.3, 1.0, True, 0)
    np.testing.assert_allclose(predict_proba(neg, None, X), 1 - predict_proba(m, None, X), atol=1e-15)
    extreme = LogisticModel(np.array([1e4]), 0.0, 1.0, True, 0)
    p = predict_proba(extreme, None, np.array([[-1.0], [1.0]]))
    assert np.all((p > 0) & (p < 1))
    with pytest.raises(InputError):
        predict_proba(m, None, np.ones((2, 4)))


def test_model_round_trip(tmp_path, rng):
    X = rng.normal(size=(50, 2))
    y = (X[:, 1] > 0).astype(int)
    fitted = LogisticScorer().fit(X, y)
    save_model(tmp_path / "m.json", fitted.model, fitted.standardizer)
    m, std = load_model(tmp_path / "m.json")
    np.testing.assert_array_equal(predict_proba(m, std, X), fitted.predict(X))


def test_scores_round_trip_and_errors(tmp_path):
    w = ScoredWindow(np.array([0.1, 0.25, 1.0]), np.array([0, 1, 1]), np.array([3, 3, 4]), np.array(["a", "b", "c"]))
    p = export_scores(w, tmp_path / "s.csv", {"x": 1})
    back = import_scores(p)
    assert len(back) == 3
    np.testing.assert_array_equal(back.scores, w.scores)
    np.testing.assert_array_equal(back.labels, w.labels)
    np.testing.assert_array_equal(back.time_steps, w.time_steps)
    np.testing.assert_array_equal(back.tx_ids, w.tx_ids)
    bad = tmp_path / "bad.csv"
    bad.write_text("tx_id,time_step,label,score\na,1,0,0.2\nb,1,1,1.5\n")
    with pytest.raises(InputError, match="row 3"):
        import_scores(bad)
    bad.write_text("tx_id,time_step,label,score\na,1,2,0.2\n")
    with pytest.raises(InputError, match="row 2"):
        import_scores(bad)


def test_scored_window_validation():
    with pytest.raises(InputError):
        make_window([0.5, -0.1], [0, 1])
    with pytest.raises(InputError):
        make_window([0.5], [2])
