"""Change-metrics loading, the linear probability model and cross-validation."""

from __future__ import annotations

import numpy as np
import pytest

from riskrec.changerisk import (
    METRIC_NAMES,
    ChangeMetricsRecord,
    LinearModel,
    cross_validate,
    fit_linear_model,
    fold_partition,
    load_change_metrics,
    metric_correlations,
    predict_risk,
    read_risk_scores,
    risk_scores,
    write_change_metrics,
    write_risk_scores,
)
from riskrec.errors import InputError

HEADER = "component_id," + ",".join(METRIC_NAMES) + ",buggy"


def record_from_row(component_id: str, values: np.ndarray, label: bool | None = None) -> ChangeMetricsRecord:
    return ChangeMetricsRecord(component_id, dict(zip(METRIC_NAMES, map(float, values))), label)


def random_records(rng: np.random.Generator, n: int) -> list[ChangeMetricsRecord]:
    """Valid records with independent metric columns (max >= ave fixed up)."""
    x = rng.gamma(2.0, 3.0, size=(n, len(METRIC_NAMES)))
    records = []
    for k in range(n):
        row = dict(zip(METRIC_NAMES, map(float, x[k])))
        for max_name, ave_name in (
            ("max_loc_added", "ave_loc_added"),
            ("max_loc_deleted", "ave_loc_deleted"),
            ("max_code_churn", "ave_code_churn"),
        ):
            row[max_name] = row[ave_name] + float(rng.gamma(1.0, 2.0))
        records.append(ChangeMetricsRecord(f"c{k}", row))
    return records


class TestLoadChangeMetrics:
    def metrics_row(self, component="c1", **overrides) -> str:
        values = {name: 1.0 for name in METRIC_NAMES}
        values.update(overrides)
        return component + "," + ",".join(str(values[name]) for name in METRIC_NAMES) + ",1"

    def test_header_only_gives_empty_list(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text(HEADER + "\n")
        assert load_change_metrics(path) == []

    def test_valid_rows_preserve_order(self, tmp_path):
        path = tmp_path / "m.csv"
        rows = [self.metrics_row(f"c{k}") for k in range(3)]
        path.write_text(HEADER + "\n" + "\n".join(rows) + "\n")
        records = load_change_metrics(path)
        assert [r.component_id for r in records] == ["c0", "c1", "c2"]
        assert all(r.label is True for r in records)

    def test_max_below_ave_rejected_with_row(self, tmp_path):
        path = tmp_path / "m.csv"
        bad = self.metrics_row("c1", max_loc_added=1.0, ave_loc_added=2.0)
        path.write_text(HEADER + "\n" + self.metrics_row("c0") + "\n" + bad + "\n")
        with pytest.raises(InputError) as info:
            load_change_metrics(path)
        assert info.value.line == 3

    def test_negative_metric_rejected(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text(HEADER + "\n" + self.metrics_row("c1", code_churn=-3.0) + "\n")
        with pytest.raises(InputError):
            load_change_metrics(path)

    def test_missing_metric_column_rejected(self, tmp_path):
        path = tmp_path / "m.csv"
        header = "component_id," + ",".join(METRIC_NAMES[:-1])
        path.write_text(header + "\n")
        with pytest.raises(InputError, match="age_weeks"):
            load_change_metrics(path)

    def test_non_boolean_label_rejected(self, tmp_path):
        path = tmp_path / "m.csv"
        row = self.metrics_row("c1").rsplit(",", 1)[0] + ",maybe"
        path.write_text(HEADER + "\n" + row + "\n")
        with pytest.raises(InputError, match="boolean"):
            load_change_metrics(path)

    def test_label_column_optional_and_blank_allowed(self, tmp_path):
        path = tmp_path / "m.csv"
        row = self.metrics_row("c1").rsplit(",", 1)[0]
        path.write_text(HEADER.rsplit(",", 1)[0] + "\n" + row + "\n")
        records = load_change_metrics(path)
        assert records[0].label is None

    def test_round_trip_through_writer(self, tmp_path):
        rng = np.random.default_rng(2)
        records = random_records(rng, 5)
        records[0].label = True
        records[1].label = False
        path = tmp_path / "m.csv"
        write_change_metrics(path, records, seed=9)
        assert load_change_metrics(path) == records


class TestMetricCorrelations:
    def test_metric_identical_to_label(self):
        rng = np.random.default_rng(3)
        records = random_records(rng, 20)
        labels = [float(k % 2) for k in range(20)]
        for r, y in zip(records, labels):
            r.metrics["code_churn"] = y
        corr = metric_correlations(records, labels)
        assert corr["code_churn"] == pytest.approx(1.0)

    def test_metric_inverse_of_label(self):
        rng = np.random.default_rng(4)
        records = random_records(rng, 20)
        labels = [float(k % 2) for k in range(20)]
        for r, y in zip(records, labels):
            r.metrics["age_weeks"] = 1.0 - y
        corr = metric_correlations(records, labels)
        assert corr["age_weeks"] == pytest.approx(-1.0)

    def test_constant_metric_gives_zero(self):
        rng = np.random.default_rng(5)
        records = random_records(rng, 10)
        for r in records:
            r.metrics["modification_count"] = 4.0
        corr = metric_correlations(records, [float(k % 2) for k in range(10)])
        assert corr["modification_count"] == 0.0

    def test_fewer_than_two_records_rejected(self):
        rng = np.random.default_rng(6)
        with pytest.raises(ValueError):
            metric_correlations(random_records(rng, 1), [1.0])

    def test_bounded_by_one(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            records = random_records(rng, 15)
            labels = list(rng.integers(0, 2, size=15).astype(float))
            if len(set(labels)) < 2:
                continue
            corr = metric_correlations(records, labels)
            assert all(abs(v) <= 1 + 1e-12 for v in corr.values())


class TestFitLinearModel:
    def test_all_zero_labels_give_zero_model(self):
        rng = np.random.default_rng(8)
        records = random_records(rng, 20)
        model = fit_linear_model(records, [0.0] * 20)
        assert model.intercept == pytest.approx(0.0, abs=1e-12)
        assert all(abs(c) < 1e-12 for c in model.coefficients.values())

    def test_noiseless_churn_coefficient_recovered(self):
        # target built from the standardized churn column: OLS must return it
        rng = np.random.default_rng(9)
        records = random_records(rng, 40)
        churn = np.array([r.metrics["code_churn"] for r in records])
        z = (churn - churn.mean()) / churn.std()
        labels = 0.1 + 0.8 * z
        model = fit_linear_model(records, labels)
        assert model.coefficients["code_churn"] == pytest.approx(0.8, abs=1e-6)
        for name in METRIC_NAMES:
            if name != "code_churn":
                assert model.coefficients[name] == pytest.approx(0.0, abs=1e-6)
        assert model.intercept == pytest.approx(0.1, abs=1e-9)

    def test_intercept_equals_label_mean(self):
        rng = np.random.default_rng(10)
        records = random_records(rng, 30)
        labels = [1.0] * 15 + [0.0] * 15
        model = fit_linear_model(records, labels)
        assert model.intercept == pytest.approx(0.5, abs=1e-9)

    def test_rank_deficient_design_warns(self):
        rng = np.random.default_rng(11)
        records = random_records(rng, 20)
        for r in records:
            r.metrics["loc_added"] = 5.0  # constant column has no variance
        with pytest.warns(RuntimeWarning, match="rank-deficient"):
            model = fit_linear_model(records, [float(k % 2) for k in range(20)])
        assert model.coefficients["loc_added"] == pytest.approx(0.0, abs=1e-9)

    def test_residual_orthogonal_to_design(self):
        rng = np.random.default_rng(12)
        for _ in range(30):
            records = random_records(rng, 60)
            labels = rng.random(60)
            model = fit_linear_model(records, labels)
            predictions = np.array(
                [
                    model.intercept
                    + sum(
                        model.coefficients[m]
                        * (r.metrics[m] - model.standardization[m][0])
                        / model.standardization[m][1]
                        for m in METRIC_NAMES
                    )
                    for r in records
                ]
            )
            residual = labels - predictions
            assert abs(residual.sum()) < 1e-6  # intercept column
            for m in METRIC_NAMES:
                col = np.array(
                    [(r.metrics[m] - model.standardization[m][0]) / model.standardization[m][1] for r in records]
                )
                assert abs(col @ residual) < 1e-6

    def test_destandardized_coefficients_predict_identically(self):
        rng = np.random.default_rng(13)
        records = random_records(rng, 40)
        labels = list(rng.random(40))
        model = fit_linear_model(records, labels)
        # fold the standardization into raw-scale coefficients
        raw_coef = {m: model.coefficients[m] / model.standardization[m][1] for m in METRIC_NAMES}
        raw_intercept = model.intercept - sum(
            model.coefficients[m] * model.standardization[m][0] / model.standardization[m][1]
            for m in METRIC_NAMES
        )
        for r in records[:10]:
            standardized_path = model.intercept + sum(
                model.coefficients[m] * (r.metrics[m] - model.standardization[m][0]) / model.standardization[m][1]
                for m in METRIC_NAMES
            )
            raw_path = raw_intercept + sum(raw_coef[m] * r.metrics[m] for m in METRIC_NAMES)
            assert raw_path == pytest.approx(standardized_path, abs=1e-9)


class TestPredictRisk:
    def zero_model(self, intercept: float) -> LinearModel:
        return LinearModel(
            coefficients={m: 0.0 for m in METRIC_NAMES},
            intercept=intercept,
            standardization={m: (0.0, 1.0) for m in METRIC_NAMES},
            metric_correlations={m: 0.0 for m in METRIC_NAMES},
        )

    def test_zero_coefficients_return_intercept(self):
        rng = np.random.default_rng(14)
        record = random_records(rng, 1)[0]
        assert predict_risk(self.zero_model(0.3), record) == pytest.approx(0.3)

    def test_prediction_clamped_to_one(self):
        model = self.zero_model(1.7)
        rng = np.random.default_rng(15)
        assert predict_risk(model, random_records(rng, 1)[0]) == 1.0

    def test_prediction_clamped_to_zero(self):
        model = self.zero_model(-0.4)
        rng = np.random.default_rng(16)
        assert predict_risk(model, random_records(rng, 1)[0]) == 0.0

    def test_record_at_training_means_predicts_intercept(self):
        rng = np.random.default_rng(17)
        records = random_records(rng, 25)
        labels = list(rng.integers(0, 2, size=25).astype(float))
        model = fit_linear_model(records, labels)
        means_record = record_from_row(
            "mean", np.array([model.standardization[m][0] for m in METRIC_NAMES])
        )
        expected = min(1.0, max(0.0, model.intercept))
        assert predict_risk(model, means_record) == pytest.approx(expected, abs=1e-12)

    def test_output_always_in_unit_interval(self):
        rng = np.random.default_rng(18)
        records = random_records(rng, 30)
        labels = list(rng.random(30) * 4 - 2)
        model = fit_linear_model(records, labels)
        for record in random_records(rng, 200):
            assert 0.0 <= predict_risk(model, record) <= 1.0


class TestCrossValidate:
    def separable_dataset(self, rng: np.random.Generator, n: int = 60):
        records = random_records(rng, n)
        churn = np.array([r.metrics["code_churn"] for r in records])
        threshold = np.median(churn)
        # wide margin around the threshold keeps every fold separable
        labels = []
        for r in records:
            churn_value = r.metrics["code_churn"]
            if churn_value >= threshold:
                r.metrics["code_churn"] = churn_value + 50.0
                labels.append(1.0)
            else:
                labels.append(0.0)
        return records, labels

    def test_separable_data_classified_almost_perfectly(self):
        rng = np.random.default_rng(19)
        records, labels = self.separable_dataset(rng)
        report = cross_validate(records, labels, folds=10, repeats=20, seed=99)
        assert report.pc >= 99.0

    def test_all_negative_labels_score_perfectly(self):
        rng = np.random.default_rng(20)
        records = random_records(rng, 20)
        report = cross_validate(records, [0.0] * 20, folds=10, repeats=5, seed=1)
        assert report.pc == 100.0
        assert report.tp == 0 and report.fp == 0

    def test_same_seed_bit_identical(self):
        rng = np.random.default_rng(21)
        records, labels = self.separable_dataset(rng, 40)
        first = cross_validate(records, labels, folds=10, repeats=10, seed=7)
        second = cross_validate(records, labels, folds=10, repeats=10, seed=7)
        assert first == second

    def test_fewer_records_than_folds_rejected(self):
        rng = np.random.default_rng(22)
        with pytest.raises(ValueError):
            cross_validate(random_records(rng, 5), [0.0] * 5, folds=10, repeats=1, seed=0)

    def test_report_records_parameters(self):
        rng = np.random.default_rng(23)
        records, labels = self.separable_dataset(rng, 30)
        report = cross_validate(records, labels, folds=5, repeats=3, seed=42)
        assert (report.folds, report.repeats, report.seed) == (5, 3, 42)


class TestFoldPartition:
    def test_disjoint_covering_balanced(self):
        rng = np.random.default_rng(24)
        for _ in range(200):
            n = int(rng.integers(10, 120))
            folds = int(rng.integers(2, min(n, 12) + 1))
            partition = fold_partition(n, folds, np.random.default_rng(int(rng.integers(0, 2**32))))
            assert len(partition) == folds
            combined = np.concatenate(partition)
            assert sorted(combined.tolist()) == list(range(n))
            sizes = [len(fold) for fold in partition]
            assert max(sizes) - min(sizes) <= 1

    def test_too_few_records_rejected(self):
        with pytest.raises(ValueError):
            fold_partition(3, 10, np.random.default_rng(0))


class TestRiskScoreIo:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(25)
        records = random_records(rng, 15)
        labels = list(rng.integers(0, 2, size=15).astype(float))
        model = fit_linear_model(records, labels)
        scores = risk_scores(model, records)
        path = tmp_path / "risk.csv"
        write_risk_scores(path, scores, seed=5)
        assert read_risk_scores(path) == scores

    def test_out_of_range_score_rejected(self, tmp_path):
        path = tmp_path / "risk.csv"
        path.write_text("component_id,i_score\nc1,1.5\n")
        with pytest.raises(InputError):
            read_risk_scores(path)
