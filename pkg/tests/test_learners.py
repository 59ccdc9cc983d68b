import itertools
import json

import numpy as np
import pytest

from cemio import learners
from cemio.learners import (
    EnsembleModel,
    LinearModel,
    ReluNetModel,
    TreeModel,
    gradient,
    predict,
    score,
    train,
    train_arrays,
)


def xor_data():
    X = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
    y = np.array([0.0, 1.0, 1.0, 0.0])
    return X, y


def separable_data(rng, n=60):
    X = rng.uniform(0, 1, size=(n, 2))
    y = (X[:, 0] + X[:, 1] > 1.0).astype(float)
    # margin so subgradient methods converge cleanly
    keep = np.abs(X[:, 0] + X[:, 1] - 1.0) > 0.1
    return X[keep], y[keep]


class TestTraining:
    def test_lr_zero_epochs_is_zero_model(self, rng):
        X = rng.uniform(size=(10, 3))
        y = (rng.uniform(size=10) > 0.5).astype(float)
        model = train_arrays(X, y, "lr", hyperparams={"epochs": 0})
        assert np.array_equal(model.weights, np.zeros(3))
        assert model.bias == 0.0
        assert all(score(model, x) == 0.0 for x in X)

    def test_cart_solves_xor_at_depth_two(self):
        X, y = xor_data()
        model = train_arrays(X, y, "cart", hyperparams={"max_depth": 2})
        acc = np.mean([float(score(model, x)) == yi for x, yi in zip(X, y)])
        # oracle: best depth-2 axis tree accuracy by enumeration
        assert acc == best_depth2_accuracy(X, y) == 1.0

    def test_rf_single_tree_no_bootstrap_equals_cart(self, rng):
        X = rng.uniform(size=(40, 3))
        y = (X[:, 0] > 0.5).astype(float)
        cart = train_arrays(X, y, "cart", hyperparams={"max_depth": 3})
        rf = train_arrays(X, y, "rf", hyperparams={
            "n_trees": 1, "bootstrap": False, "feature_frac": 1.0, "max_depth": 3}, seed=7)
        pts = rng.uniform(size=(50, 3))
        assert all(score(cart, p) == score(rf, p) for p in pts)

    @pytest.mark.parametrize("family", ["lr", "svm"])
    def test_linearly_separable_reaches_full_accuracy(self, family, rng):
        X, y = separable_data(rng)
        model = train_arrays(X, y, family, hyperparams={"epochs": 500})
        preds = [int(score(model, x) >= 0) for x in X]
        assert np.mean(np.array(preds) == y) == 1.0

    @pytest.mark.parametrize("family,hp", [
        ("lr", {"epochs": 50}),
        ("svm", {"epochs": 50}),
        ("cart", {"max_depth": 3}),
        ("rf", {"n_trees": 3, "max_depth": 3, "feature_frac": 0.7}),
        ("mlp", {"hidden": (5,), "epochs": 10}),
    ])
    def test_training_is_bitwise_deterministic(self, family, hp, rng):
        X = rng.uniform(size=(30, 4))
        y = (X[:, 0] + X[:, 1] > 1).astype(float)
        a = train_arrays(X, y, family, hyperparams=hp, seed=3)
        b = train_arrays(X, y, family, hyperparams=hp, seed=3)
        assert json.dumps(learners.to_dict(a)) == json.dumps(learners.to_dict(b))

    def test_hyperparam_validation(self, rng):
        X = rng.uniform(size=(10, 2))
        y = (rng.uniform(size=10) > 0.5).astype(float)
        with pytest.raises(ValueError):
            train_arrays(X, y, "cart", hyperparams={"max_depth": 0})
        with pytest.raises(ValueError):
            train_arrays(X, y, "lr", hyperparams={"lr": -1.0})
        with pytest.raises(ValueError):
            train_arrays(X, y, "mlp", hyperparams={"hidden": (0,)})
        with pytest.raises(ValueError):
            train_arrays(X, y, "gbm")

    def test_train_records_accuracy_and_classes(self, german):
        model = train(german, "lr", {"epochs": 100}, seed=0)
        assert model.classes == ("bad", "good")
        assert 0.5 < model.train_accuracy <= 1.0


class TestScore:
    def test_linear_arithmetic(self):
        model = LinearModel(np.array([2.0, -1.0]), 0.5, "logistic")
        assert score(model, [1.0, 1.0]) == pytest.approx(1.5)

    def test_relunet_zero_weights_returns_bias(self, rng):
        layers = [(np.zeros((4, 3)), np.zeros(4)), (np.zeros((1, 4)), np.array([0.3]))]
        model = ReluNetModel(layers)
        for _ in range(5):
            assert score(model, rng.uniform(size=3)) == pytest.approx(0.3)

    def test_tree_stump_routing(self):
        from cemio.learners import TreeNode
        root = TreeNode(split_col=0, threshold=0.5,
                        left=TreeNode(value=0.0), right=TreeNode(value=1.0))
        model = TreeModel(root, 2)
        assert score(model, [0.7, 0.0]) == 1.0
        assert score(model, [0.5, 0.9]) == 0.0

    def test_dimension_mismatch(self):
        model = LinearModel(np.array([1.0, 2.0]), 0.0, "logistic")
        with pytest.raises(ValueError):
            score(model, [1.0])

    def test_ensemble_is_exact_weighted_mean(self, rng):
        from cemio.learners import TreeNode
        trees = [TreeModel(TreeNode(value=v), 2) for v in (0.0, 1.0, 1.0)]
        model = EnsembleModel(trees, [0.2, 0.3, 0.5])
        assert score(model, [0.1, 0.2]) == 0.2 * 0.0 + 0.3 * 1.0 + 0.5 * 1.0


class TestGradient:
    def test_zero_net_bias_gradient_matches_loss_derivative(self):
        layers = [(np.zeros((2, 2)), np.zeros(2)), (np.zeros((1, 2)), np.zeros(1))]
        model = ReluNetModel(layers)
        grads = gradient(model, np.array([0.3, 0.4]), 1.0)
        # sigmoid(0) - 1 = -0.5 at the output bias
        assert grads[-1][1][0] == pytest.approx(-0.5)

    def test_linear_logistic_closed_form_at_zero(self, rng):
        model = LinearModel(np.zeros(3), 0.0, "logistic")
        x = rng.uniform(size=3)
        g = gradient(model, x, 1.0)
        np.testing.assert_allclose(g["weights"], (0.5 - 1.0) * x, rtol=1e-12)

    def test_backprop_matches_central_differences(self, rng):
        h = 1e-5
        worst = 0.0
        for _ in range(50):
            n_in = int(rng.integers(2, 5))
            hidden = int(rng.integers(2, 6))
            X = rng.uniform(size=(20, n_in))
            y = (rng.uniform(size=20) > 0.5).astype(float)
            model = train_arrays(X, y, "mlp",
                                 hyperparams={"hidden": (hidden,), "epochs": 2}, seed=1)
            x = rng.uniform(size=n_in)
            target = float(rng.integers(0, 2))
            grads = gradient(model, x, target)

            def loss(m):
                s = score(m, x)
                return float(np.log1p(np.exp(-abs(s))) + max(s, 0) - target * s)

            for li, (gW, gb) in enumerate(grads):
                W, b = model.layers[li]
                for idx in [(0, 0), (gW.shape[0] - 1, gW.shape[1] - 1)]:
                    Wp, Wm = W.copy(), W.copy()
                    Wp[idx] += h
                    Wm[idx] -= h
                    mp = ReluNetModel([(Wp if i == li else w, bb) for i, (w, bb) in enumerate(model.layers)])
                    mm = ReluNetModel([(Wm if i == li else w, bb) for i, (w, bb) in enumerate(model.layers)])
                    fd = (loss(mp) - loss(mm)) / (2 * h)
                    if abs(fd) > 1e-4 or abs(gW[idx]) > 1e-4:
                        rel = abs(gW[idx] - fd) / max(abs(fd), abs(gW[idx]), 1e-8)
                        worst = max(worst, rel)
        assert worst <= 1e-4

    def test_gradient_rejects_trees(self, rng):
        X = rng.uniform(size=(10, 2))
        y = (rng.uniform(size=10) > 0.5).astype(float)
        model = train_arrays(X, y, "cart")
        with pytest.raises(TypeError):
            gradient(model, X[0], 1.0)


class TestSerialization:
    @pytest.mark.parametrize("family,hp", [
        ("lr", {"epochs": 20}),
        ("svm", {"epochs": 20}),
        ("cart", {"max_depth": 3}),
        ("rf", {"n_trees": 3, "max_depth": 2}),
        ("mlp", {"hidden": (4,), "epochs": 3}),
    ])
    def test_round_trip_bit_exact(self, family, hp, rng, tmp_path):
        X = rng.uniform(size=(30, 3))
        y = (X.sum(axis=1) > 1.5).astype(float)
        model = train_arrays(X, y, family, hyperparams=hp, seed=5)
        path = tmp_path / "model.json"
        learners.save(model, path)
        again = learners.load(path)
        pts = rng.uniform(size=(20, 3))
        for p in pts:
            assert score(model, p) == score(again, p)

    def test_rejects_wrong_format(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"format": "other"}))
        with pytest.raises(ValueError):
            learners.load(path)


def best_depth2_accuracy(X, y):
    """Brute-force oracle: enumerate all depth-2 axis-aligned trees built
    from midpoint thresholds and report the best training accuracy."""
    def thresholds(col, idx):
        vals = np.unique(X[idx, col])
        return [(a + b) / 2 for a, b in zip(vals, vals[1:])]

    def leaf_acc(idx):
        if len(idx) == 0:
            return 0
        ones = y[idx].sum()
        return max(ones, len(idx) - ones)

    n = len(y)
    best = max(leaf_acc(np.arange(n)), 0)
    all_idx = np.arange(n)
    for c0 in range(X.shape[1]):
        for t0 in thresholds(c0, all_idx):
            left = all_idx[X[:, c0] <= t0]
            right = all_idx[X[:, c0] > t0]
            side_best = []
            for side in (left, right):
                s = leaf_acc(side)
                for c1 in range(X.shape[1]):
                    for t1 in thresholds(c1, side):
                        a = side[X[side, c1] <= t1]
                        b = side[X[side, c1] > t1]
                        s = max(s, leaf_acc(a) + leaf_acc(b))
                side_best.append(s)
            best = max(best, sum(side_best))
    return best / n
