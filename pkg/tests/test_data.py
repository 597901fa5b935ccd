import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from otmiss.data import (
    Mask,
    MaskedDataset,
    apply_mask_zero_impute,
    complete_case_filter,
    estimate_missingness,
    generate_mcar_mask,
    generate_mnar_mask,
    inverse_minmax_scale,
    minmax_scale,
    read_dataset_csv,
    read_mask_csv,
    write_dataset_csv,
    write_mask_csv,
)


def make_dataset(values, mask, probs=None):
    values = np.asarray(values, dtype=float)
    mask = Mask(np.asarray(mask))
    probs = np.ones(values.shape[1]) if probs is None else np.asarray(probs, float)
    return apply_mask_zero_impute(values, mask, probs)


class TestMcarMask:
    def test_p_one_gives_full_mask(self):
        m = generate_mcar_mask(50, 4, 1.0, seed=0)
        assert m.entries.all()

    def test_column_frequencies(self):
        m = generate_mcar_mask(100_000, 3, 0.95, seed=1)
        assert np.all(np.abs(m.column_means() - 0.95) < 0.01)

    def test_complete_case_survival_d100(self):
        # with p = 0.95 and d = 100 almost every row has a missing entry
        analytic = 0.95**100
        assert analytic == pytest.approx(0.005, abs=0.002)
        m = generate_mcar_mask(20_000, 100, 0.95, seed=2)
        frac = m.entries.all(axis=1).mean()
        se = np.sqrt(analytic * (1 - analytic) / 20_000)
        assert abs(frac - analytic) < 4 * se + 1e-12

    @pytest.mark.parametrize("bad", [0.0, -0.2, 1.2])
    def test_rejects_bad_probability(self, bad):
        with pytest.raises(ValueError):
            generate_mcar_mask(5, 2, bad, seed=0)

    def test_bit_exact_reproducibility(self):
        a = generate_mcar_mask(200, 6, 0.7, seed=42)
        b = generate_mcar_mask(200, 6, 0.7, seed=42)
        assert np.array_equal(a.entries, b.entries)

    def test_monte_carlo_frequency_within_three_se(self):
        # >= 1e4 mask draws per column
        p = np.array([0.3, 0.6, 0.95])
        draws = 40
        n = 300
        counts = np.zeros(3)
        for s in range(draws):
            counts += generate_mcar_mask(n, 3, p, seed=s).entries.sum(axis=0)
        total = draws * n
        freq = counts / total
        se = np.sqrt(p * (1 - p) / total)
        assert np.all(np.abs(freq - p) < 3 * se)


class TestMnarMask:
    def test_eps_zero_matches_mcar_distribution(self):
        X = np.zeros((60_000, 2))
        p = np.array([0.8, 0.4])
        m = generate_mnar_mask(X, p, eps=0.0, alpha=2.0, seed=3)
        se = np.sqrt(p * (1 - p) / 60_000)
        assert np.all(np.abs(m.column_means() - p) < 4 * se)

    def test_eps_one_sigmoid_at_zero(self):
        # observation probability 1/(1 + 2 e^0) = 1/3
        X = np.zeros((60_000, 2))
        m = generate_mnar_mask(X, 0.9, eps=1.0, alpha=2.0, seed=4)
        se = np.sqrt((1 / 3) * (2 / 3) / 60_000)
        assert np.all(np.abs(m.column_means() - 1 / 3) < 4 * se)

    def test_large_values_always_observed(self):
        X = np.full((1000, 3), 50.0)
        m = generate_mnar_mask(X, 0.5, eps=1.0, alpha=2.0, seed=5)
        assert m.entries.all()

    @pytest.mark.parametrize("bad", [-0.1, 1.1])
    def test_rejects_bad_eps(self, bad):
        with pytest.raises(ValueError):
            generate_mnar_mask(np.zeros((4, 2)), 0.5, eps=bad, seed=0)


class TestZeroImpute:
    def test_full_mask_identity(self, rng):
        X = rng.normal(size=(10, 3))
        ds = make_dataset(X, np.ones((10, 3)))
        assert np.array_equal(ds.values, X)

    def test_empty_mask_zeroes(self, rng):
        X = rng.normal(size=(10, 3))
        ds = apply_mask_zero_impute(X, Mask(np.zeros((10, 3), dtype=int)), np.full(3, 0.5))
        assert not ds.values.any()

    def test_entrywise_product(self):
        ds = make_dataset([[2.0, 3.0]], [[1, 0]])
        assert ds.values.tolist() == [[2.0, 0.0]]

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            apply_mask_zero_impute(np.zeros((3, 2)), Mask(np.ones((2, 2), dtype=int)), np.ones(2))

    def test_values_must_vanish_off_mask(self):
        with pytest.raises(ValueError):
            MaskedDataset(np.ones((2, 2)), Mask(np.array([[1, 0], [1, 1]])), np.ones(2))


class TestEstimateMissingness:
    def test_fully_observed_column(self):
        m = Mask(np.ones((8, 1), dtype=int))
        assert estimate_missingness(m)[0] == 1.0

    def test_half_observed(self):
        m = Mask(np.array([[1], [0], [1], [0]]))
        assert estimate_missingness(m)[0] == 0.5

    def test_all_missing_clamped(self):
        m = Mask(np.zeros((4, 1), dtype=int))
        assert estimate_missingness(m)[0] == pytest.approx(0.125)


class TestCompleteCase:
    def test_full_data(self, rng):
        X = rng.normal(size=(6, 2))
        rows, frac = complete_case_filter(make_dataset(X, np.ones((6, 2))))
        assert frac == 1.0 and np.array_equal(rows, X)

    def test_nothing_complete(self):
        mask = np.array([[1, 0], [0, 1]])
        rows, frac = complete_case_filter(make_dataset(np.ones((2, 2)), mask))
        assert frac == 0.0 and rows.shape == (0, 2)

    def test_d3_retention_rate(self):
        # about 15% of rows lost at p = 0.95, d = 3
        mask = generate_mcar_mask(100_000, 3, 0.95, seed=6)
        ds = apply_mask_zero_impute(np.ones((100_000, 3)), mask, np.full(3, 0.95))
        _, frac = complete_case_filter(ds)
        assert abs(frac - 0.95**3) < 0.01

    def test_identity_roundtrip_on_full_mask(self, rng):
        X = rng.normal(size=(7, 4))
        ds = make_dataset(X, np.ones((7, 4)))
        rows, frac = complete_case_filter(ds)
        assert frac == 1.0
        assert np.array_equal(rows, X)


class TestMinmaxScale:
    def test_affine_map(self):
        ds = make_dataset([[2.0], [4.0], [6.0]], [[1], [1], [1]])
        scaled, params = minmax_scale(ds)
        assert scaled.values[:, 0].tolist() == [0.0, 0.5, 1.0]
        assert not params.constant[0]

    def test_constant_feature_flagged(self):
        ds = make_dataset([[5.0], [5.0]], [[1], [1]])
        scaled, params = minmax_scale(ds)
        assert scaled.values[:, 0].tolist() == [0.0, 0.0]
        assert params.constant[0]

    def test_unobserved_feature_flagged(self):
        ds = make_dataset([[1.0, 0.0], [2.0, 0.0]], [[1, 0], [1, 0]], probs=[1.0, 0.5])
        scaled, params = minmax_scale(ds)
        assert params.unobserved[1] and not params.unobserved[0]

    def test_roundtrip(self, rng):
        X = rng.normal(size=(30, 4)) * 7 + 3
        mask = generate_mcar_mask(30, 4, 0.8, seed=7)
        ds = apply_mask_zero_impute(X, mask, np.full(4, 0.8))
        scaled, params = minmax_scale(ds)
        restored = inverse_minmax_scale(scaled, params)
        obs = mask.entries.astype(bool)
        assert np.max(np.abs(restored.values[obs] - ds.values[obs])) < 1e-12

    def test_missing_entries_stay_zero(self, rng):
        X = rng.normal(size=(20, 3)) + 10  # strictly positive, far from 0
        mask = generate_mcar_mask(20, 3, 0.6, seed=8)
        ds = apply_mask_zero_impute(X, mask, np.full(3, 0.6))
        scaled, _ = minmax_scale(ds)
        assert not scaled.values[~mask.entries.astype(bool)].any()


@given(seed=st.integers(0, 2**20), n=st.integers(1, 40), d=st.integers(1, 6))
@settings(max_examples=20)
def test_mask_generation_is_deterministic_and_binary(seed, n, d):
    a = generate_mcar_mask(n, d, 0.5, seed)
    b = generate_mcar_mask(n, d, 0.5, seed)
    assert np.array_equal(a.entries, b.entries)
    assert np.isin(a.entries, (0, 1)).all()


class TestCsv:
    def test_dataset_roundtrip(self, tmp_path, rng):
        X = rng.normal(size=(12, 3))
        mask = generate_mcar_mask(12, 3, 0.7, seed=9)
        ds = apply_mask_zero_impute(X, mask, np.full(3, 0.7))
        path = tmp_path / "data.csv"
        write_dataset_csv(path, ds, ["a", "b", "c"])
        loaded, names = read_dataset_csv(path, probs=np.full(3, 0.7))
        assert names == ["a", "b", "c"]
        assert np.array_equal(loaded.mask.entries, ds.mask.entries)
        assert np.allclose(loaded.values, ds.values)

    def test_empty_and_na_cells(self, tmp_path):
        path = tmp_path / "data.csv"
        path.write_text("a,b\n1.5,NA\n,2.0\n", encoding="utf-8")
        ds, _ = read_dataset_csv(path)
        assert ds.mask.entries.tolist() == [[1, 0], [0, 1]]
        assert ds.values.tolist() == [[1.5, 0.0], [0.0, 2.0]]

    def test_estimated_probs_by_default(self, tmp_path):
        path = tmp_path / "data.csv"
        path.write_text("a\n1.0\nNA\n1.0\nNA\n", encoding="utf-8")
        ds, _ = read_dataset_csv(path)
        assert ds.probs[0] == 0.5

    def test_mask_roundtrip(self, tmp_path):
        mask = generate_mcar_mask(9, 2, 0.5, seed=10)
        path = tmp_path / "mask.csv"
        write_mask_csv(path, mask)
        assert np.array_equal(read_mask_csv(path).entries, mask.entries)
