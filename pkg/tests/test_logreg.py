import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from claimclass import logreg

import oracles


def _problem(rng, n=60, d=4, shift=0.0):
    X = rng.normal(size=(n, d))
    w = rng.normal(size=d)
    y = (rng.random(n) < logreg.sigmoid(X @ w + shift)).astype(float)
    y[:2] = [0, 1]
    return X, y


def _fd_gradient(fun, w, b, h=1e-6):
    gw = np.empty_like(w)
    for j in range(len(w)):
        e = np.zeros_like(w)
        e[j] = h
        gw[j] = (fun(w + e, b) - fun(w - e, b)) / (2 * h)
    gb = (fun(w, b + h) - fun(w, b - h)) / (2 * h)
    return gw, gb


def test_sigmoid_values():
    assert logreg.sigmoid(0.0) == 0.5
    assert logreg.sigmoid(-800.0) == 0.0
    assert logreg.sigmoid(800.0) == 1.0
    z = np.linspace(-30, 30, 61)
    assert np.allclose(logreg.sigmoid(z) + logreg.sigmoid(-z), 1.0)


def test_linear_score():
    model = logreg.LogregModel(np.array([2.0, -1.0]), 0.5)
    assert logreg.linear_score([1.0, 3.0], model) == 0.5 + 2 - 3


def test_penalty_values():
    w = np.array([3.0, -4.0])
    assert logreg.penalty_value(w, "ridge", 2.0) == 25.0
    assert logreg.penalty_value(w, "lasso", 2.0) == 7.0
    assert logreg.penalty_value(w, "elastic_net", 2.0, 0.5) == pytest.approx(2 * (0.5 * 7 + 0.25 * 25))
    assert logreg.penalty_value(w, "none", 2.0) == 0.0


def test_objective_at_zero_is_n_log2(rng):
    X, y = _problem(rng, n=17)
    assert logreg.objective(np.zeros(4), 0.0, X, y) == pytest.approx(17 * math.log(2), rel=1e-14)


def test_intercept_not_penalised(rng):
    X, y = _problem(rng)
    w = rng.normal(size=4)
    a = logreg.objective(w, 3.0, X, y, "ridge", 5.0) - logreg.objective(w, 3.0, X, y)
    b = logreg.objective(w, -1.0, X, y, "ridge", 5.0) - logreg.objective(w, -1.0, X, y)
    assert a == pytest.approx(b)


def test_ridge_gradient_adds_lam_w(rng):
    X, y = _problem(rng, d=2)
    w = np.array([3.0, -4.0])
    g0, _ = logreg.gradient(w, 0.0, X, y)
    g2, _ = logreg.gradient(w, 0.0, X, y, "ridge", 2.0)
    assert np.allclose(g2 - g0, [6.0, -8.0])


@pytest.mark.parametrize("penalty", ["none", "lasso", "ridge", "elastic_net"])
def test_objective_matches_oracle(rng, penalty):
    X, y = _problem(rng, n=30, d=3)
    w, b, lam, mix = rng.normal(size=3), 0.3, 0.7, 0.5
    l1 = {"none": 0, "lasso": lam / 2, "ridge": 0, "elastic_net": lam * mix}[penalty]
    l2 = {"none": 0, "lasso": 0, "ridge": lam, "elastic_net": lam * (1 - mix)}[penalty]
    expected = oracles.log_objective(w.tolist(), b, X.tolist(), y.tolist(), l1, l2)
    assert logreg.objective(w, b, X, y, penalty, lam, mix) == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("penalty", ["none", "ridge", "elastic_net", "lasso"])
@pytest.mark.parametrize("loss", ["log", "squared"])
def test_gradient_matches_finite_differences(rng, penalty, loss):
    for _ in range(10):
        X, y = _problem(rng, n=40, d=5)
        w = rng.normal(size=5)
        w[np.abs(w) < 0.05] = 0.3  # keep lasso away from its kink
        b = float(rng.normal())
        lam = float(rng.uniform(0.1, 3))

        def fun(w_, b_):
            return logreg.objective(w_, b_, X, y, penalty, lam, 0.4, loss)

        gw, gb = logreg.gradient(w, b, X, y, penalty, lam, 0.4, loss)
        fw, fb = _fd_gradient(fun, w, b)
        scale = max(1.0, np.linalg.norm(fw))
        assert np.linalg.norm(gw - fw) / scale < 1e-5
        assert abs(gb - fb) / max(1.0, abs(fb)) < 1e-5


def test_lasso_gradient_uses_sign_zero(rng):
    X, y = _problem(rng, d=2)
    g0, _ = logreg.gradient(np.zeros(2), 0.0, X, y)
    g1, _ = logreg.gradient(np.zeros(2), 0.0, X, y, "lasso", 4.0)
    assert np.array_equal(g0, g1)


def test_trace_non_increasing(rng):
    for i in range(6):
        X, y = _problem(rng, n=80, d=6)
        penalty = ["none", "lasso", "ridge", "elastic_net", "ridge", "lasso"][i]
        model = logreg.fit(X, y, penalty, 0.5)
        values = [v for _, v in model.trace]
        assert all(b <= a for a, b in zip(values, values[1:]))


def test_ridge_stationary_point(rng):
    X, y = _problem(rng, n=100, d=3)
    model = logreg.fit(X, y, "ridge", 1.0, logreg.FitConfig(tolerance=1e-14))
    gw, gb = logreg.gradient(model.weights, model.intercept, X, y, "ridge", 1.0)
    assert np.linalg.norm(gw) < 1e-4 and abs(gb) < 1e-4


def test_lasso_kkt_and_sparsity(rng):
    X = rng.normal(size=(200, 6))
    y = (rng.random(200) < logreg.sigmoid(2 * X[:, 0] - X[:, 1])).astype(float)
    lam = 40.0
    model = logreg.fit(X, y, "lasso", lam, logreg.FitConfig(tolerance=1e-13))
    g, _ = logreg.gradient(model.weights, model.intercept, X, y)  # data term only
    l1 = lam / 2
    for j, wj in enumerate(model.weights):
        if wj == 0:
            assert abs(g[j]) <= l1 + 1e-3
        else:
            assert abs(g[j] + l1 * np.sign(wj)) < 1e-3
    assert (model.weights == 0).sum() >= 3
    assert model.weights[0] > 0


def test_lasso_huge_penalty_zeros_everything(rng):
    X, y = _problem(rng)
    model = logreg.fit(X, y, "lasso", 1e6)
    assert np.all(model.weights == 0)


def test_ridge_shrinks_monotonically(rng):
    X, y = _problem(rng, n=150, d=4)
    norms = [np.linalg.norm(logreg.fit(X, y, "ridge", lam).weights) for lam in (0.01, 1, 10, 100)]
    assert all(b < a for a, b in zip(norms, norms[1:]))


def test_lasso_path_zeros_at_small_c(rng):
    X, y = _problem(rng, n=150, d=4)
    path = logreg.regularization_path(X, y, "lasso", [1e-4, 1e-2, 1.0, 100.0])
    assert np.all(path[0].weights == 0)
    assert np.count_nonzero(path[-1].weights) == 4
    with pytest.raises(ValueError):
        logreg.regularization_path(X, y, "lasso", [1.0, 0.1])


def test_separable_blobs():
    rng = np.random.default_rng(2024)
    a = rng.normal(size=(200, 2)) * 0.3 + [-1.5, 0]
    b = rng.normal(size=(200, 2)) * 0.3 + [1.5, 0]
    X = np.vstack([a, b])
    y = np.r_[np.zeros(200), np.ones(200)]
    model = logreg.fit(X, y, "ridge", 1e-4)
    assert np.mean(logreg.predict(X, model) == y) >= 0.99
    assert model.iterations <= 5000


def test_single_class_rejected(rng):
    X = rng.normal(size=(10, 2))
    with pytest.raises(ValueError, match="both classes"):
        logreg.fit(X, np.zeros(10))


def test_non_finite_rejected(rng):
    X = rng.normal(size=(10, 2))
    X[3, 1] = np.nan
    with pytest.raises(ValueError, match="non-finite"):
        logreg.fit(X, np.r_[np.zeros(5), np.ones(5)])


def test_penalty_aliases():
    assert logreg.canonical_penalty("l1") == "lasso"
    assert logreg.canonical_penalty("l2") == "ridge"
    with pytest.raises(ValueError):
        logreg.canonical_penalty("l3")


def test_threshold_boundary():
    model = logreg.LogregModel(np.array([1.0]), 0.0)
    assert logreg.predict(np.array([[0.0], [-1e-9], [1e-9]]), model).tolist() == [1, 0, 1]


def test_fixed_learning_rate(rng):
    X, y = _problem(rng)
    model = logreg.fit(X, y, "ridge", 1.0, logreg.FitConfig(learning_rate=0.005, max_iterations=20000, tolerance=1e-12))
    ref = logreg.fit(X, y, "ridge", 1.0, logreg.FitConfig(tolerance=1e-14))
    assert np.allclose(model.weights, ref.weights, atol=1e-4)


def test_save_load_round_trip(rng, tmp_path):
    X, y = _problem(rng)
    model = logreg.fit(X, y, "elastic_net", 0.3, mix=0.2)
    logreg.save_model(model, tmp_path / "m.json", {"a": 1})
    loaded, extra = logreg.load_model(tmp_path / "m.json")
    assert extra == {"a": 1}
    assert np.array_equal(loaded.weights, model.weights) and loaded.intercept == model.intercept
    assert (loaded.penalty, loaded.lam, loaded.mix) == ("elastic_net", 0.3, 0.2)
    assert np.array_equal(logreg.predict(X, loaded), logreg.predict(X, model))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(["none", "lasso", "ridge", "elastic_net"]), st.floats(0.01, 10))
def test_fit_never_increases_objective(seed, penalty, lam):
    rng = np.random.default_rng(seed)
    X, y = _problem(rng, n=30, d=3)
    model = logreg.fit(X, y, penalty, lam, logreg.FitConfig(max_iterations=200))
    values = [v for _, v in model.trace]
    assert all(b <= a for a, b in zip(values, values[1:]))
    assert values[-1] <= 30 * math.log(2) + 1e-12


def test_lasso_noise_coordinate_reaches_exact_zero():
    rng = np.random.default_rng(8)
    signal = rng.normal(size=300)
    noise = rng.normal(size=300)
    X = np.c_[signal, noise]
    y = (rng.random(300) < logreg.sigmoid(2.0 * signal)).astype(float)
    lam = 30.0
    model = logreg.fit(X, y, "lasso", lam, logreg.FitConfig(tolerance=1e-13))
    assert model.weights[0] != 0 and model.weights[1] == 0
    base = logreg.objective(model.weights, model.intercept, X, y, "lasso", lam)
    for delta in (1e-3, -1e-3):
        moved = model.weights + [0.0, delta]
        assert logreg.objective(moved, model.intercept, X, y, "lasso", lam) > base


@pytest.mark.parametrize("penalty, norm", [("lasso", 1), ("ridge", 2)])
def test_fitted_norm_non_increasing_in_lambda(rng, penalty, norm):
    X, y = _problem(rng, n=200, d=5)
    lams = [0.01, 0.1, 1, 5, 20, 80]
    norms = [np.linalg.norm(logreg.fit(X, y, penalty, lam, logreg.FitConfig(tolerance=1e-12)).weights, norm) for lam in lams]
    assert all(b <= a + 1e-9 for a, b in zip(norms, norms[1:]))
