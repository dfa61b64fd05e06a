import numpy as np
import pytest

from ferasec.dtw import DtwConfig, classify_1nn, local_cost_matrix, mddtw_distance
from ferasec.errors import DimensionError, DomainError
from oracles import column_cost, enumerate_paths_minimum


def brute_force_dtw(x, y, metric="euclidean"):
    cost = local_cost_matrix(np.asarray(x, float), np.asarray(y, float), metric)
    return enumerate_paths_minimum(cost.tolist())


class TestMddtwDistance:
    def test_identity_is_zero(self):
        rng = np.random.default_rng(0)
        for _ in range(10):
            x = rng.normal(size=(6, int(rng.integers(1, 20))))
            assert mddtw_distance(x, x) == 0.0

    def test_single_columns_reduce_to_local_metric(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=(6, 1))
        y = rng.normal(size=(6, 1))
        expected = column_cost(x[:, 0], y[:, 0], "euclidean")
        assert mddtw_distance(x, y) == pytest.approx(expected, rel=1e-13)
        expected_m = column_cost(x[:, 0], y[:, 0], "manhattan")
        assert mddtw_distance(x, y, DtwConfig("manhattan")) == pytest.approx(expected_m, rel=1e-13)

    def test_local_costs_match_independent_formula(self):
        rng = np.random.default_rng(9)
        for metric in ("euclidean", "manhattan"):
            x = rng.normal(size=(6, 5))
            y = rng.normal(size=(6, 4))
            cost = local_cost_matrix(x, y, metric)
            for i in range(5):
                for j in range(4):
                    expected = column_cost(x[:, i], y[:, j], metric)
                    assert cost[i, j] == pytest.approx(expected, rel=1e-12)

    @pytest.mark.parametrize("metric", ["euclidean", "manhattan"])
    def test_matches_brute_force_enumeration(self, metric):
        rng = np.random.default_rng(2)
        cfg = DtwConfig(metric)
        for _ in range(60):
            k1 = int(rng.integers(1, 7))
            k2 = int(rng.integers(1, 7))
            x = rng.normal(size=(6, k1))
            y = rng.normal(size=(6, k2))
            assert mddtw_distance(x, y, cfg) == brute_force_dtw(x, y, metric)

    def test_symmetry(self):
        rng = np.random.default_rng(3)
        for _ in range(30):
            x = rng.normal(size=(6, int(rng.integers(1, 25))))
            y = rng.normal(size=(6, int(rng.integers(1, 25))))
            assert abs(mddtw_distance(x, y) - mddtw_distance(y, x)) <= 1e-9

    def test_nonnegative(self):
        rng = np.random.default_rng(4)
        for _ in range(30):
            x = rng.normal(size=(3, int(rng.integers(1, 12))))
            y = rng.normal(size=(3, int(rng.integers(1, 12))))
            assert mddtw_distance(x, y) >= 0.0

    def test_appending_shared_suffix_bounded_increase(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            x = rng.normal(size=(6, int(rng.integers(1, 10))))
            y = rng.normal(size=(6, int(rng.integers(1, 10))))
            u = rng.normal(size=(6, 1))
            v = rng.normal(size=(6, 1))
            base = mddtw_distance(x, y)
            grown = mddtw_distance(np.hstack([x, u]), np.hstack([y, v]))
            assert grown <= base + column_cost(u[:, 0], v[:, 0], "euclidean") + 1e-12

    def test_row_count_mismatch(self):
        with pytest.raises(DimensionError):
            mddtw_distance(np.zeros((6, 3)), np.zeros((5, 3)))

    def test_bad_metric(self):
        with pytest.raises(DomainError):
            DtwConfig("cosine")


class TestClassify1nn:
    def make_ramps(self):
        rng = np.random.default_rng(6)
        refs = []
        for slope, label in [(0.5, "slow"), (2.0, "mid"), (5.0, "fast")]:
            for _ in range(3):
                k = int(rng.integers(8, 14))
                base = slope * np.arange(k)
                refs.append((np.tile(base, (6, 1)) + rng.normal(0, 0.05, (6, k)), label))
        return refs

    def test_exact_match_wins_with_zero_distance(self):
        refs = self.make_ramps()
        label, distance = classify_1nn(refs[4][0], refs)
        assert label == refs[4][1]
        assert distance == 0.0

    def test_equal_reference_wins_regardless_of_order(self):
        rng = np.random.default_rng(7)
        test = rng.normal(size=(6, 9))
        far = test + 10.0
        for order in ([(far, "far"), (test, "same")], [(test, "same"), (far, "far")]):
            label, distance = classify_1nn(test, order)
            assert label == "same" and distance == 0.0

    def test_tie_breaks_to_earliest_reference(self):
        x = np.ones((6, 4))
        refs = [(x, "first"), (x, "second")]
        label, _ = classify_1nn(x + 0.5, refs)
        assert label == "first"

    def test_matches_exhaustive_oracle_on_toy_set(self):
        refs = self.make_ramps()
        rng = np.random.default_rng(8)
        for slope in (0.6, 1.8, 4.6, 3.0, 0.2):
            k = int(rng.integers(4, 7))
            test = np.tile(slope * np.arange(k), (6, 1))
            small_refs = [(r[:, :6], lab) for r, lab in refs]
            got_label, got_dist = classify_1nn(test, small_refs)
            brute = [(brute_force_dtw(test, r), lab) for r, lab in small_refs]
            best_dist, best_label = min(brute, key=lambda t: t[0])
            assert got_label == best_label
            assert got_dist == best_dist

    def test_empty_references(self):
        with pytest.raises(DomainError):
            classify_1nn(np.ones((6, 3)), [])
