import numpy as np
import pytest
from sklearn.base import clone

from mccshap.dataset import DataMatrix
from mccshap.exceptions import DataError, KTooLarge, NonBinaryTarget, SingularDesign
from mccshap.models import (
    CARTRegressor,
    ForestRegressor,
    KNNRegressor,
    LinearRegressor,
    LogisticClassifier,
    ModelSpec,
    OutputKind,
    as_predictor,
    fit_forest,
    fit_linear,
    fit_model,
)
from oracles import knn_brute


class TestLinear:
    def test_recovers_exact_plane(self, rng):
        X = rng.normal(size=(100, 2))
        y = 2 * X[:, 0] - 3 * X[:, 1] + 1
        m = LinearRegressor().fit(X, y)
        np.testing.assert_allclose(m.coef_, [2.0, -3.0], atol=1e-8)
        assert m.intercept_ == pytest.approx(1.0, abs=1e-8)

    def test_constant_target(self, rng):
        X = rng.normal(size=(50, 3))
        m = LinearRegressor().fit(X, np.full(50, 4.0))
        np.testing.assert_allclose(m.coef_, 0.0, atol=1e-12)
        np.testing.assert_allclose(m.predict(X), 4.0, atol=1e-12)

    def test_singular_design(self, rng):
        a = rng.normal(size=40)
        with pytest.raises(SingularDesign):
            LinearRegressor().fit(np.column_stack([a, a]), a)

    def test_ridge_splits_clones(self, rng):
        a = rng.normal(size=200)
        m = LinearRegressor(ridge_eps=1.0).fit(np.column_stack([a, a]), 3 * a)
        assert m.coef_[0] == pytest.approx(m.coef_[1], rel=1e-12)


class TestLogistic:
    def test_loss_decreases(self, rng):
        X = rng.normal(size=(200, 2))
        y = (X[:, 0] + 0.5 * X[:, 1] + 0.3 * rng.normal(size=200) > 0).astype(float)
        m = LogisticClassifier().fit(X, y)
        assert np.all(np.diff(m.loss_history_) <= 1e-12)
        assert m.loss_history_[-1] < m.loss_history_[0]
        assert np.mean(m.predict(X) == y) > 0.85

    def test_all_zero_target(self, rng):
        m = LogisticClassifier().fit(rng.normal(size=(60, 2)), np.zeros(60))
        assert m.intercept_ <= -2

    def test_non_binary(self, rng):
        with pytest.raises(NonBinaryTarget):
            LogisticClassifier().fit(rng.normal(size=(10, 2)), np.arange(10.0))

    def test_explained_on_logit(self, rng):
        X = rng.normal(size=(80, 2))
        m = LogisticClassifier(epochs=50).fit(X, (X[:, 0] > 0).astype(float))
        f = as_predictor(m)
        assert f.output_kind is OutputKind.CLASSIFICATION_LOGIT
        np.testing.assert_array_equal(f(X), m.decision_function(X))


class TestTree:
    def test_depth_one_step(self):
        X = np.linspace(0, 1, 40).reshape(-1, 1)
        y = np.where(X[:, 0] < 0.5, 1.0, 5.0)
        t = CARTRegressor(max_depth=1).fit(X, y)
        np.testing.assert_array_equal(t.predict(X), y)

    def test_leaf_size_n_gives_constant(self, rng):
        X = rng.normal(size=(30, 3))
        y = rng.normal(size=30)
        t = CARTRegressor(min_samples_leaf=30).fit(X, y)
        np.testing.assert_allclose(t.predict(X), y.mean())

    def test_deeper_fits_better(self, rng):
        X = rng.uniform(-2, 2, size=(400, 2))
        y = np.sin(2 * X[:, 0]) + X[:, 1] ** 2
        mse = [np.mean((CARTRegressor(max_depth=d).fit(X, y).predict(X) - y) ** 2) for d in (1, 6)]
        assert mse[1] < mse[0]

    def test_seeded(self, rng):
        X = rng.normal(size=(100, 3))
        y = X[:, 0] + rng.normal(size=100)
        a = CARTRegressor(random_state=3).fit(X, y).predict(X)
        b = CARTRegressor(random_state=3).fit(X, y).predict(X)
        np.testing.assert_array_equal(a, b)


class TestForest:
    def test_single_unbagged_tree_equals_tree(self, rng):
        X = rng.normal(size=(120, 3))
        y = X @ [1.0, -2.0, 0.5] + 0.1 * rng.normal(size=120)
        f = ForestRegressor(n_trees=1, bootstrap=False, bag_fraction=1.0, random_state=0).fit(X, y)
        tree = clone(f.estimators_[0]).fit(X, y)
        np.testing.assert_array_equal(f.predict(X), tree.predict(X))

    def test_deterministic_and_worker_invariant(self, rng):
        X = rng.normal(size=(150, 4))
        y = X[:, 0] * X[:, 1] + rng.normal(size=150)
        a = ForestRegressor(n_trees=10, random_state=5).fit(X, y).predict(X)
        b = ForestRegressor(n_trees=10, random_state=5, n_jobs=3).fit(X, y).predict(X)
        np.testing.assert_array_equal(a, b)

    def test_beats_single_tree_out_of_sample(self):
        r = np.random.default_rng(0)
        X = r.uniform(-2, 2, size=(600, 3))
        y = np.sin(2 * X[:, 0]) + X[:, 1] + 0.5 * r.normal(size=600)
        tr, te = slice(0, 400), slice(400, None)
        tree = CARTRegressor(max_depth=8).fit(X[tr], y[tr])
        forest = ForestRegressor(n_trees=30, max_depth=8).fit(X[tr], y[tr])
        mse = lambda m: np.mean((m.predict(X[te]) - y[te]) ** 2)  # noqa: E731
        assert mse(forest) <= mse(tree)


class TestKNN:
    train = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 2.0], [3.0, 1.0], [2.0, 2.0]])
    y = np.array([1.0, 2.0, 3.0, 4.0, 5.0])

    def test_k1_interpolates(self):
        m = KNNRegressor(k=1).fit(self.train, self.y)
        np.testing.assert_array_equal(m.predict(self.train), self.y)

    def test_k_equals_n(self):
        m = KNNRegressor(k=5).fit(self.train, self.y)
        np.testing.assert_allclose(m.predict([[10.0, -4.0], [0.0, 0.0]]), 3.0)

    def test_brute_force_k3(self):
        m = KNNRegressor(k=3).fit(self.train, self.y)
        mu, sd = self.train.mean(axis=0), self.train.std(axis=0, ddof=1)
        z = ((self.train - mu) / sd).tolist()
        for q in ([0.5, 0.5], [2.5, 1.5], [0.0, 3.0]):
            zq = ((np.array(q) - mu) / sd).tolist()
            assert m.predict([q])[0] == pytest.approx(knn_brute(z, self.y.tolist(), zq, 3), abs=1e-12)

    def test_k_too_large(self):
        with pytest.raises(KTooLarge):
            KNNRegressor(k=6).fit(self.train, self.y)


@pytest.mark.parametrize("spec", [
    ModelSpec("linear"), ModelSpec("tree", (("max_depth", 4),)),
    ModelSpec("forest", (("n_trees", 5),)), ModelSpec("knn", (("k", 3),)),
])
def test_batch_matches_single_rows(spec, correlated_data):
    f = fit_model(spec, correlated_data, "d")
    X = correlated_data.values[:40, :3]
    batch = f(X)
    rows = np.array([f(X[i:i + 1])[0] for i in range(len(X))])
    np.testing.assert_array_equal(batch, rows)


class TestModelSpec:
    def test_parse(self):
        s = ModelSpec.parse("forest", ["n_trees=7", "bootstrap=false", "seed=3"])
        est = s.build()
        assert (est.n_trees, est.bootstrap, est.random_state) == (7, False, 3)
        assert s.describe() == "forest bootstrap=False n_trees=7 seed=3"

    def test_unknown_family_and_option(self):
        with pytest.raises(DataError):
            ModelSpec("svm")
        with pytest.raises(DataError):
            ModelSpec.parse("knn", ["depth=3"])
        with pytest.raises(DataError):
            ModelSpec.parse("knn", ["k=abc"])

    def test_with_seed(self):
        assert ModelSpec("linear").with_seed(5) == ModelSpec("linear")
        assert dict(ModelSpec("tree").with_seed(5).params)["random_state"] == 5


def test_sklearn_clone_roundtrip():
    for est in (LinearRegressor(ridge_eps=0.5), LogisticClassifier(lr=0.2), CARTRegressor(max_depth=3),
                ForestRegressor(n_trees=4), KNNRegressor(k=2)):
        assert clone(est).get_params() == est.get_params()


def test_fit_helpers(correlated_data):
    f = fit_linear(correlated_data, "d")
    assert f.n_features == 3 and f.descriptor.startswith("linear")
    g = fit_forest(correlated_data, "d", n_trees=3, seed=1)
    np.testing.assert_array_equal(g(correlated_data.values[:5, :3]),
                                  fit_forest(correlated_data, "d", n_trees=3, seed=1)(correlated_data.values[:5, :3]))
    with pytest.raises(DataError):
        fit_model(ModelSpec("knn", (("k", 999),)), correlated_data, "d")


def test_datamatrix_accepted_via_values(correlated_data):
    X, y = correlated_data.split_target("d")
    assert isinstance(X, DataMatrix)
    m = LinearRegressor().fit(X.values, y)
    assert m.n_features_in_ == 3
