import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mccshap.dataset import (
    DataMatrix,
    FeatureKind,
    compute_covariance,
    inject_correlated_clone,
    load_csv,
)
from mccshap.exceptions import (
    DuplicateColumnName,
    FileUnreadable,
    NoUsableRows,
    NonNumericFeature,
    TooFewRows,
)
from mccshap.harness.synthetic import SyntheticSpec, generate_synthetic
from oracles import two_pass_covariance


def write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


class TestLoadCsv:
    def test_numeric(self, tmp_path):
        d = load_csv(write(tmp_path, "a,b\n1,2\n3,4.5\n-1,0\n"))
        assert (d.n, d.m) == (3, 2)
        assert d.feature_kinds == (FeatureKind.NUMERIC, FeatureKind.NUMERIC)
        assert d.values[1, 1] == 4.5

    def test_blank_cell_dropped(self, tmp_path):
        d = load_csv(write(tmp_path, "a,b\n1,2\n3,\n5,6\n"))
        assert d.n == 2
        assert d.dropped_rows == 1

    def test_unparseable_cell_dropped(self, tmp_path):
        d = load_csv(write(tmp_path, "a,b\n1,2\nx,3\n5,6\n7,inf\n"))
        assert d.n == 2 and d.dropped_rows == 2

    def test_duplicate_header(self, tmp_path):
        with pytest.raises(DuplicateColumnName):
            load_csv(write(tmp_path, "x,x\n1,2\n3,4\n"))

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileUnreadable):
            load_csv(tmp_path / "nope.csv")

    def test_no_usable_rows(self, tmp_path):
        with pytest.raises(NoUsableRows):
            load_csv(write(tmp_path, "a,b\n1,\n,2\n"))

    def test_text_column_rejected_unless_categorical(self, tmp_path):
        path = write(tmp_path, "a,color\n1,red\n2,blue\n3,red\n")
        with pytest.raises(NonNumericFeature):
            load_csv(path)
        d = load_csv(path, {"color": "categorical"})
        assert d.feature_kinds[1] is FeatureKind.ENCODED_CATEGORICAL
        np.testing.assert_array_equal(d.column("color"), [1.0, 0.0, 1.0])

    def test_encoded_categorical(self, tmp_path):
        d = load_csv(write(tmp_path, "a,dummy\n1.5,0\n2,1\n3,1\n"), {"dummy": "categorical"})
        assert not d.numeric_mask[1]


def test_datamatrix_invariants():
    with pytest.raises(TooFewRows):
        DataMatrix(np.ones((1, 2)), ["a", "b"])
    with pytest.raises(DuplicateColumnName):
        DataMatrix(np.ones((3, 2)), ["a", "a"])
    with pytest.raises(ValueError):
        DataMatrix(np.array([[1.0, np.nan], [1.0, 2.0]]), ["a", "b"])
    d = DataMatrix(np.arange(6.0).reshape(3, 2), ["a", "b"])
    assert not d.values.flags.writeable


class TestCovariance:
    def test_two_point(self):
        c = compute_covariance(DataMatrix([[0.0, 0.0], [2.0, 4.0]], ["x1", "x2"]))
        np.testing.assert_array_equal(c.means, [1.0, 2.0])
        assert c.cov[0, 0] == 2.0 and c.cov[0, 1] == 4.0 and c.cov[1, 1] == 8.0

    def test_clone_column(self, correlated_data):
        d = correlated_data.with_column("a2", correlated_data.column("a"))
        c = compute_covariance(d)
        assert c.cov[0, 4] == pytest.approx(c.cov[0, 0], rel=1e-14)

    def test_against_two_pass_oracle(self):
        spec = SyntheticSpec(n=200, n_features=3, blocks=[((0, 1, 2), [0.5, 0.2, -0.3])], seed=3)
        X, _ = generate_synthetic(spec).split_target("y")
        c = compute_covariance(X)
        means, cov = two_pass_covariance(X.values.tolist())
        np.testing.assert_allclose(c.means, means, rtol=0, atol=1e-12)
        np.testing.assert_allclose(c.cov, cov, rtol=0, atol=1e-12)

    def test_symmetric_exactly(self, correlated_data):
        c = compute_covariance(correlated_data)
        assert np.array_equal(c.cov, c.cov.T)

    def test_categorical_flagged_nan(self):
        d = DataMatrix([[1.0, 0.0], [2.0, 1.0], [4.0, 1.0]], ["a", "k"],
                       [FeatureKind.NUMERIC, FeatureKind.ENCODED_CATEGORICAL])
        c = compute_covariance(d)
        assert np.isnan(c.cov[0, 1]) and np.isnan(c.cov[1, 1])
        assert c.cov[0, 0] == pytest.approx(7 / 3)

    def test_column_swap(self, correlated_data):
        c = compute_covariance(correlated_data)
        swapped = compute_covariance(correlated_data.select(["c", "b", "a", "d"]))
        perm = [2, 1, 0, 3]
        np.testing.assert_allclose(swapped.cov, c.cov[np.ix_(perm, perm)], atol=1e-12, rtol=0)

    @settings(max_examples=40, deadline=None)
    @given(
        arrays(np.float64, (20, 3), elements=st.floats(-10, 10)),
        st.floats(-50, 50),
        st.integers(0, 2),
    )
    def test_shift_invariance(self, x, shift, col):
        d = DataMatrix(x, ["p", "q", "r"])
        moved = x.copy()
        moved[:, col] += shift
        a, b = compute_covariance(d), compute_covariance(DataMatrix(moved, ["p", "q", "r"]))
        np.testing.assert_allclose(a.cov, b.cov, atol=1e-12, rtol=0)
        assert b.means[col] == pytest.approx(a.means[col] + shift, abs=1e-9)

    @settings(max_examples=40, deadline=None)
    @given(
        arrays(np.float64, (15, 3), elements=st.floats(-10, 10)),
        st.floats(0.1, 10) | st.floats(-10, -0.1),
        st.integers(0, 2),
    )
    def test_scale_equivariance(self, x, scale, col):
        scaled = x.copy()
        scaled[:, col] *= scale
        a = compute_covariance(DataMatrix(x, ["p", "q", "r"])).cov
        b = compute_covariance(DataMatrix(scaled, ["p", "q", "r"])).cov
        expect = a.copy()
        expect[col, :] *= scale
        expect[:, col] *= scale
        np.testing.assert_allclose(b, expect, atol=1e-9, rtol=1e-9)


class TestClone:
    def test_zero_noise_exact(self, correlated_data):
        d = inject_correlated_clone(correlated_data, "b", 0.0, seed=1)
        assert d.feature_names[-1] == "b_corr"
        np.testing.assert_array_equal(d.column("b_corr"), correlated_data.column("b"))
        assert np.corrcoef(d.column("b"), d.column("b_corr"))[0, 1] == pytest.approx(1.0)
        assert correlated_data.m == 4

    def test_small_noise_high_correlation(self):
        X, _ = generate_synthetic(SyntheticSpec(n=500, n_features=3, seed=2)).split_target("y")
        sd = X.column("x1").std(ddof=1)
        d = inject_correlated_clone(X, "x1", 0.01 * sd, seed=9)
        assert np.corrcoef(d.column("x1"), d.column("x1_corr"))[0, 1] >= 0.999

    def test_categorical_rejected(self):
        d = DataMatrix([[1.0, 0.0], [2.0, 1.0], [3.0, 0.0]], ["a", "k"],
                       [FeatureKind.NUMERIC, FeatureKind.ENCODED_CATEGORICAL])
        with pytest.raises(NonNumericFeature):
            inject_correlated_clone(d, "k", 0.1, seed=0)

    def test_seeded(self, correlated_data):
        a = inject_correlated_clone(correlated_data, "a", 0.5, seed=4)
        b = inject_correlated_clone(correlated_data, "a", 0.5, seed=4)
        assert a.fingerprint() == b.fingerprint()
