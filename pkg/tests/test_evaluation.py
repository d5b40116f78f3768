import csv
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from numpy.testing import assert_allclose, assert_array_equal

from bayesdd.data import Dataset
from bayesdd.errors import ParameterError
from bayesdd.evaluation import (BenchmarkRow, ExperimentConfig, cross_validate, outlier_counts,
                                outlier_ratio_sweep, paired_runs, precision_at_k,
                                precision_for_scores, rank, run_benchmark, summarize_sweep,
                                train_method, write_benchmark, write_sweep)
from bayesdd.synth import uniform_box

FAST = ExperimentConfig(sigma=1.0, nu={"svdd": 0.2, "bdd": 0.5, "ssdd": 0.5, "ml": 0.5})


class TestPrecision:
    def test_perfect(self):
        assert precision_at_k(rank([0.1, 0.2, 5.0, 6.0], 2), [True, True, False, False]) == 1.0

    def test_reversed(self):
        assert precision_at_k(rank([5.0, 6.0, 0.1, 0.2], 2), [True, True, False, False]) == 0.0

    def test_counting(self):
        assert precision_at_k(rank([0.1, 0.2, 0.3, 0.4], 2), [True, False, True, False]) == 0.5

    @pytest.mark.parametrize("k", [0, 5])
    def test_k_range(self, k):
        with pytest.raises(ParameterError):
            precision_at_k(rank([1.0, 2.0, 3.0], k), [True, False, True])

    def test_length_mismatch(self):
        with pytest.raises(ParameterError):
            precision_at_k(rank([1.0, 2.0], 1), [True])

    def test_ties_by_index(self):
        r = rank([1.0, 0.5, 1.0, 0.5])
        assert_array_equal(r.order, [1, 3, 0, 2])
        assert precision_at_k(rank([1.0, 1.0, 1.0], 1), [False, True, True]) == 0.0

    @settings(max_examples=100, deadline=None)
    @given(arrays(np.float64, st.integers(2, 40), elements=st.floats(-1e3, 1e3)),
           st.data())
    def test_range_and_monotone_invariance(self, scores, data):
        n = scores.shape[0]
        is_target = np.array(data.draw(st.lists(st.booleans(), min_size=n, max_size=n)))
        if not is_target.any():
            is_target[0] = True
        r = rank(scores, int(is_target.sum()))
        p = precision_at_k(r, is_target)
        assert 0.0 <= p <= 1.0
        assert_array_equal(np.sort(r.order), np.arange(n))
        assert np.all(np.diff(scores[r.order]) >= 0)
        transformed = np.arctan(scores / 100.0) * 7.0 + 3.0
        if np.unique(transformed).size == np.unique(scores).size:
            assert precision_for_scores(transformed, is_target) == \
                precision_for_scores(scores, is_target)


class TestCrossValidate:
    X = np.random.default_rng(0).normal(size=(30, 2))

    def test_single_cell(self):
        assert cross_validate(self.X, [0.7], [0.3], folds=5) == (0.7, 0.3)

    def test_tie_break_towards_larger(self):
        # duplicated cells give identical objective values
        best, table = cross_validate(self.X, [1.0, 1.0], [0.5, 0.5], folds=5,
                                     return_table=True)
        assert best == (1.0, 0.5)
        # with a constant objective the largest sigma, then largest nu wins
        X = np.zeros((10, 2))
        assert cross_validate(X, [0.5, 2.0, 1.0], [0.1, 0.9], folds=5) == (2.0, 0.9)

    def test_deterministic(self):
        a = cross_validate(self.X, [0.3, 1.0, 3.0], [0.1, 0.5], folds=5, seed=3)
        b = cross_validate(self.X, [0.3, 1.0, 3.0], [0.1, 0.5], folds=5, seed=3)
        assert a == b

    def test_errors(self):
        with pytest.raises(ParameterError):
            cross_validate(self.X, [1.0], [0.5], folds=1)
        with pytest.raises(ParameterError):
            cross_validate(self.X[:3], [1.0], [0.5], folds=5)
        with pytest.raises(ParameterError):
            cross_validate(self.X, [], [0.5])

    @pytest.mark.parametrize("seed", [0, 2, 4, 9])
    def test_blob_recovers_oracle_sigma(self, seed):
        grid = [0.05, 0.1, 0.2, 0.4, 0.8, 1.6, 3.2]
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(200, 2))
        m = 3000
        Z = np.vstack((rng.normal(size=(m, 2)), uniform_box(X, m, seed=seed + 99)))
        y = np.r_[np.ones(m, bool), np.zeros(m, bool)]
        oracle = np.array([precision_for_scores(train_method("bdd", X, s, 0.5).score(Z), y)
                           for s in grid])
        se = math.sqrt(0.25 / m)
        plateau = np.flatnonzero(oracle >= oracle.max() - 2 * se)
        chosen = grid.index(cross_validate(X, grid, [0.5], folds=10, seed=seed)[0])
        assert np.abs(plateau - chosen).min() <= 1, (oracle, chosen)


def two_class_dataset(n=40, seed=0):
    rng = np.random.default_rng(seed)
    X = np.vstack((rng.normal(size=(n, 2)), rng.normal(size=(n, 2)) + 4))
    return Dataset(X, ["a"] * n + ["b"] * n, name="toy")


class TestSweep:
    def test_zero_ratio_is_perfect(self):
        rows = outlier_ratio_sweep(two_class_dataset(), [0.0], ["bdd"], [0], config=FAST)
        assert rows == [{"ratio": 0.0, "method": "bdd", "seed": 0, "precision": 1.0}]

    def test_rows_per_cell(self):
        rows = outlier_ratio_sweep(two_class_dataset(), [0.2, 0.5], ["bdd", "svdd"], [0, 1],
                                   config=FAST)
        assert len(rows) == 8
        summary = summarize_sweep(rows)
        assert set(summary) == {(0.2, "bdd"), (0.2, "svdd"), (0.5, "bdd"), (0.5, "svdd")}

    def test_unachievable_ratio_names_maximum(self):
        with pytest.raises(ParameterError, match="maximum achievable ratio is 0.6667"):
            outlier_ratio_sweep(two_class_dataset(), [0.9], ["bdd"], [0], config=FAST)

    def test_outlier_counts(self):
        assert outlier_counts(20, 0.0) == 0
        assert outlier_counts(20, 0.5) == 20
        assert outlier_counts(10, 0.75) == 30
        with pytest.raises(ParameterError):
            outlier_counts(10, 1.0)

    def test_write(self, tmp_path):
        rows = outlier_ratio_sweep(two_class_dataset(), [0.3], ["ml"], [0], config=FAST)
        write_sweep(rows, tmp_path / "s.csv")
        with open(tmp_path / "s.csv") as fh:
            read = list(csv.DictReader(fh))
        assert list(read[0]) == ["ratio", "method", "seed", "precision"]


class TestBenchmark:
    def test_single_row(self):
        rows = run_benchmark([two_class_dataset()], ["bdd"], repetitions=1, config=FAST)
        assert len(rows) == 1
        row = rows[0]
        assert row.runs == 1 and row.std_precision == 0.0 and row.error == ""
        assert 0.0 <= row.mean_precision <= 1.0 and row.mean_runtime > 0

    def test_std_over_runs(self):
        ds = two_class_dataset(seed=1)
        rows = run_benchmark([ds], ["bdd", "svdd"], repetitions=4, seed=2, config=FAST)
        runs = paired_runs(ds, ["bdd", "svdd"], repetitions=4, seed=2, config=FAST)
        for row in rows:
            assert row.runs == 4
            assert_allclose(row.mean_precision, runs[row.method].mean(), rtol=1e-14)
            assert_allclose(row.std_precision, runs[row.method].std(ddof=1), rtol=1e-12)

    def test_deterministic(self):
        a = run_benchmark([two_class_dataset()], ["svdd"], 2, seed=5, config=FAST)
        b = run_benchmark([two_class_dataset()], ["svdd"], 2, seed=5, config=FAST)
        assert (a[0].mean_precision, a[0].std_precision) == \
            (b[0].mean_precision, b[0].std_precision)

    def test_failing_dataset_reported(self, tmp_path):
        rows = run_benchmark([str(tmp_path / "missing.csv"), two_class_dataset()], ["ml"], 1,
                             config=FAST)
        assert rows[0].error and math.isnan(rows[0].mean_precision)
        assert rows[1].error == ""

    def test_semi_supervised_methods(self):
        rows = run_benchmark([two_class_dataset(60)], ["bdd", "ssdd"], 1,
                             config=ExperimentConfig(sigma=1.0, nu={"bdd": 0.5, "ssdd": 0.5},
                                                     semi_supervised=True))
        assert [r.method for r in rows] == ["bdd", "ssdd"]
        assert all(r.error == "" for r in rows)

    def test_cv_fallback_for_tiny_class(self):
        ds = Dataset([[0.0], [1.0], [5.0], [6.0], [7.0]], ["a", "a", "b", "b", "b"])
        rows = run_benchmark([ds], ["bdd"], 1)
        assert rows[0].error == ""

    def test_unknown_method(self):
        with pytest.raises(ParameterError):
            run_benchmark([two_class_dataset()], ["knn"], 1)

    def test_writers(self, tmp_path):
        rows = [BenchmarkRow("toy", "bdd", 0.9, 0.01, 0.002, 10)]
        write_benchmark(rows, tmp_path / "b.csv", tmp_path / "b.json", config={"seed": 0})
        doc = json.loads((tmp_path / "b.json").read_text())
        assert doc["rows"][0]["mean_precision"] == 0.9
        assert doc["config"] == {"seed": 0}
        with open(tmp_path / "b.csv") as fh:
            assert next(csv.reader(fh)) == ["dataset", "method", "mean_precision",
                                             "std_precision", "mean_runtime", "runs", "error"]
