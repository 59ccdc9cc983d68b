import numpy as np
import pytest

from cemio.builder import CeConfig, generate
from cemio.dataset import Dataset
from cemio.evaluate import (
    MetricsReport,
    aggregate,
    format_table,
    hull_membership,
    score_set,
)
from cemio.learners import LinearModel, predict
from cemio.schema import FeatureSchema, FeatureSpec, Kind


def wide_dataset(n_features=10):
    feats = [FeatureSpec(f"f{i}", Kind.CONTINUOUS, lower=0.0, upper=1.0)
             for i in range(n_features)]
    schema = FeatureSchema(feats, "label")
    rows = [{f"f{i}": 0.5 for i in range(n_features)},
            {f"f{i}": 0.1 for i in range(n_features)}]
    return Dataset(schema, rows, ["a", "b"])


def wide_model(n=10):
    return LinearModel(np.ones(n), -0.5 * n, "logistic", classes=("a", "b"))


class TestScoreSet:
    def test_degenerate_set_is_perfect(self, diet_dataset):
        model = LinearModel(np.zeros(4), 1.0, "logistic", classes=("0", "1"))
        factual = {"weight": 20.0, "diet": "vegan"}
        report = score_set(factual, [dict(factual)], model, diet_dataset, "1")
        assert report.sparsity == 1.0
        assert report.cont_proximity == 0.0
        assert report.cat_proximity == 1.0
        assert report.validity == 1.0
        assert report.cat_diversity is None  # singleton set

    def test_single_change_sparsity(self):
        ds = wide_dataset()
        factual = dict(ds.rows[0])
        ce = dict(factual)
        ce["f3"] = 0.9
        report = score_set(factual, [ce], wide_model(), ds, "b")
        assert report.sparsity == pytest.approx(0.9)

    def test_validity_counts_native_predictions(self):
        ds = wide_dataset()
        factual = dict(ds.rows[1])  # all 0.1, predicted "a"
        good = {k: 0.9 for k in factual}
        bad = {k: 0.2 for k in factual}
        report = score_set(factual, [good, bad], wide_model(), ds, "b")
        assert report.validity == pytest.approx(0.5)

    def test_cont_proximity_original_units(self, diet_dataset):
        model = LinearModel(np.zeros(4), 1.0, "logistic", classes=("0", "1"))
        factual = {"weight": 20.0, "diet": "vegan"}
        ce = {"weight": 25.0, "diet": "vegan"}
        report = score_set(factual, [ce], model, diet_dataset, "1")
        assert report.cont_proximity == pytest.approx(-5.0)

    def test_permutation_invariance(self, rng):
        ds = wide_dataset()
        factual = dict(ds.rows[0])
        ces = []
        for _ in range(4):
            ce = dict(factual)
            for k in rng.choice(list(factual), size=3, replace=False):
                ce[k] = float(rng.uniform())
            ces.append(ce)
        a = score_set(factual, ces, wide_model(), ds, "b")
        b = score_set(factual, list(reversed(ces)), wide_model(), ds, "b")
        for key, av in a.to_dict().items():
            bv = b.to_dict()[key]
            if isinstance(av, float):
                assert bv == pytest.approx(av, abs=1e-12), key
            else:
                assert av == bv, key

    def test_ranges_over_random_sets(self, rng, german, german_svm):
        for _ in range(15):
            idx = int(rng.integers(len(german)))
            factual = dict(german.rows[idx])
            ces = []
            for _ in range(int(rng.integers(1, 4))):
                j = int(rng.integers(len(german)))
                ces.append(dict(german.rows[j]))
            rep = score_set(factual, ces, german_svm, german, "good")
            assert 0.0 <= rep.validity <= 1.0
            assert 0.0 <= rep.sparsity <= 1.0
            assert 0.0 <= rep.cat_proximity <= 1.0
            assert rep.cont_proximity <= 0.0
            if rep.n_counterfactuals > 1:
                assert 0.0 <= rep.cat_diversity <= 1.0
                assert rep.cont_diversity >= 0.0
                assert 0.0 <= rep.count_diversity <= 1.0
            else:
                assert rep.cat_diversity is None

    def test_empty_set_rejected(self, diet_dataset):
        model = LinearModel(np.zeros(4), 1.0, "logistic", classes=("0", "1"))
        with pytest.raises(ValueError):
            score_set({"weight": 20.0, "diet": "vegan"}, [], model, diet_dataset, "1")


class TestHullMembership:
    def test_training_point_inside(self, german):
        idx = german.class_indices("good")[0]
        cert = hull_membership(german.encoded[idx], german, "good", 0.0, 1)
        assert cert.inside
        assert cert.slack_norm <= 1e-8

    def test_midpoint_inside(self, german):
        idx = german.class_indices("good")[:2]
        mid = german.encoded[idx].mean(axis=0)
        cert = hull_membership(mid, german, "good", 0.0, 1)
        assert cert.inside

    def test_outside_point_violation_measures_distance(self):
        # hull {(0,0),(1,1)}; the point (1,0) sits at l1 distance 1
        schema = FeatureSchema([
            FeatureSpec("a", Kind.CONTINUOUS, lower=0.0, upper=1.0),
            FeatureSpec("b", Kind.CONTINUOUS, lower=0.0, upper=1.0)], "label")
        ds = Dataset(schema, [{"a": 0.0, "b": 0.0}, {"a": 1.0, "b": 1.0}], ["y", "y"])
        cert = hull_membership(np.array([1.0, 0.0]), ds, "y", 0.0, 1)
        assert not cert.inside
        assert cert.violation == pytest.approx(1.0, abs=1e-6)
        relaxed = hull_membership(np.array([1.0, 0.0]), ds, "y", 1.0, 1)
        assert relaxed.inside

    def test_infinity_norm_variant(self):
        schema = FeatureSchema([
            FeatureSpec("a", Kind.CONTINUOUS, lower=0.0, upper=1.0),
            FeatureSpec("b", Kind.CONTINUOUS, lower=0.0, upper=1.0)], "label")
        ds = Dataset(schema, [{"a": 0.0, "b": 0.0}, {"a": 1.0, "b": 1.0}], ["y", "y"])
        cert = hull_membership(np.array([1.0, 0.0]), ds, "y", 0.0, "inf")
        assert cert.slack_norm == pytest.approx(0.5, abs=1e-6)

    def test_hard_manifold_ces_pass_oracle(self, german, german_svm):
        cfg = CeConfig(target_label="good", manifold_mode="hard",
                       manifold_epsilon=0.0, m=2)
        idx = next(i for i in range(len(german))
                   if predict(german_svm, german.encoded[i]) == "bad")
        res = generate(dict(german.rows[idx]), german_svm, german, cfg)
        assert res.counterfactuals
        for ce in res.counterfactuals:
            cert = hull_membership(ce.encoded, german, "good", 0.0, 1)
            assert cert.slack_norm <= 1e-6


class TestAggregate:
    def test_single_report_zero_se(self):
        r = MetricsReport(1.0, 0.8, 0.9, -3.0)
        agg = aggregate([r])
        assert agg.mean["validity"] == 1.0
        assert agg.se["validity"] == 0.0

    def test_two_point_se(self):
        rows = [MetricsReport(1.0, 0.5, None, -1.0), MetricsReport(0.0, 0.5, None, -2.0)]
        agg = aggregate(rows)
        assert agg.mean["validity"] == pytest.approx(0.5)
        assert agg.se["validity"] == pytest.approx(0.5)
        assert agg.mean["cat_proximity"] is None

    def test_matches_spreadsheet_oracle(self):
        # five hand-built report sets checked against plain mean/stdev formulas
        sets = [
            [(1.0, 0.9), (1.0, 0.7), (0.5, 0.8)],
            [(0.2, 0.1)],
            [(0.0, 0.0), (1.0, 1.0)],
            [(0.25, 0.5), (0.75, 0.5), (0.5, 0.5), (0.5, 0.5)],
            [(1.0, 1.0), (1.0, 1.0), (1.0, 1.0)],
        ]
        for vals in sets:
            reports = [MetricsReport(v, s, None, -1.0) for v, s in vals]
            agg = aggregate(reports)
            col = [v for v, _ in vals]
            mean = sum(col) / len(col)
            if len(col) > 1:
                var = sum((x - mean) ** 2 for x in col) / (len(col) - 1)
                se = (var ** 0.5) / (len(col) ** 0.5)
            else:
                se = 0.0
            assert abs(agg.mean["validity"] - mean) <= 1e-12
            assert abs(agg.se["validity"] - se) <= 1e-12

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            aggregate([])

    def test_format_table_shape(self):
        agg = aggregate([MetricsReport(1.0, 0.9, 0.8, -12.5, 0.1, 4.0, 0.2, 3)])
        text = format_table({"method": agg})
        lines = text.splitlines()
        assert len(lines) == 2
        assert "validity" in lines[0]
        assert "1.00 (0.00)" in lines[1]
