import csv
import json

import pytest

from thumbqc.core.errors import InvalidInputError, UndefinedMetricError
from thumbqc.metrics import (
    ScoredSample,
    accuracy,
    auroc,
    confusion,
    evaluate,
    f1,
    pairwise_auroc,
    write_report_csv,
    write_report_json,
)


def samples(pairs):
    return [ScoredSample(slide_id=str(i), score=s, label=y) for i, (s, y) in enumerate(pairs)]


def seeded_samples(rng, n, grid=None):
    labels = rng.integers(0, 2, n)
    labels[0], labels[1] = 0, 1
    if grid:
        scores = rng.integers(0, grid + 1, n) / grid
    else:
        scores = rng.random(n)
    return samples(zip(scores.tolist(), labels.tolist()))


class TestAccuracy:
    def test_all_correct(self):
        assert accuracy(samples([(0.9, 1), (0.1, 0), (0.6, 1)])) == 1.0

    def test_ties_predict_positive(self):
        assert accuracy(samples([(0.5, 1), (0.5, 0), (0.5, 1), (0.5, 0), (0.5, 1)])) == pytest.approx(3 / 5)

    def test_matches_counting_loop(self, rng):
        data = seeded_samples(rng, 100)
        correct = 0
        for s in data:
            correct += int((1 if s.score >= 0.5 else 0) == s.label)
        assert accuracy(data) == correct / 100

    def test_empty(self):
        with pytest.raises(InvalidInputError):
            accuracy([])


class TestF1:
    def test_perfect(self):
        assert f1(samples([(0.9, 1), (0.2, 0)])) == 1.0

    def test_confusion_arithmetic(self):
        data = samples([(0.9, 1), (0.8, 1), (0.7, 0), (0.3, 1), (0.1, 0)])
        c = confusion(data)
        assert (c.tp, c.fp, c.fn, c.tn) == (2, 1, 1, 1)
        assert f1(data) == pytest.approx(2 / 3)

    def test_no_positives_anywhere(self):
        assert f1(samples([(0.1, 0), (0.2, 0)])) == 0.0


class TestAUROC:
    def test_perfect_separation(self):
        assert auroc(samples([(0.9, 1), (0.8, 1), (0.1, 0), (0.2, 0)])) == 1.0

    def test_all_ties(self):
        assert auroc(samples([(0.4, 1), (0.4, 0), (0.4, 1), (0.4, 0)])) == 0.5

    def test_brute_force_example(self):
        assert auroc(samples([(0.8, 1), (0.4, 1), (0.6, 0), (0.2, 0)])) == pytest.approx(0.75)

    def test_single_class_is_undefined(self):
        with pytest.raises(UndefinedMetricError) as exc:
            auroc(samples([(0.3, 1), (0.6, 1)]))
        assert exc.value.detail["negatives"] == 0

    def test_rank_statistic_equals_pairwise_definition(self, rng):
        for i in range(100):
            data = seeded_samples(rng, int(rng.integers(2, 60)), grid=10 if i % 2 else None)
            assert abs(auroc(data) - pairwise_auroc(data)) < 1e-12

    def test_invariant_under_monotone_transform(self, rng):
        data = seeded_samples(rng, 50)
        cubed = [s.model_copy(update={"score": s.score ** 3}) for s in data]
        assert auroc(cubed) == auroc(data)

    def test_invariant_under_label_and_score_swap(self, rng):
        data = seeded_samples(rng, 40, grid=20)
        swapped = [s.model_copy(update={"score": 1.0 - s.score, "label": 1 - s.label}) for s in data]
        assert auroc(swapped) == pytest.approx(auroc(data), abs=1e-12)

    def test_scores_must_be_probabilities(self):
        with pytest.raises(ValueError):
            ScoredSample(slide_id="a", score=1.5, label=1)
        with pytest.raises(ValueError):
            ScoredSample(slide_id="a", score=0.5, label=2)


class TestEvaluate:
    def test_report_fields(self):
        report = evaluate(samples([(0.9, 1), (0.8, 1), (0.7, 0), (0.3, 1), (0.1, 0)]), dataset="tum")
        assert report.n == 5
        assert report.accuracy == pytest.approx(3 / 5)
        assert report.f1 == pytest.approx(2 / 3)
        assert report.auroc == pytest.approx(5 / 6)
        assert report.csv_row() == {"dataset": "tum", "n": 5, "acc": "0.6000", "f1": "0.6667", "auroc": "0.8333"}

    def test_single_class_group_has_undefined_auroc(self):
        report = evaluate(samples([(0.9, 1), (0.2, 1)]))
        assert report.auroc is None
        assert report.csv_row()["auroc"] == "undefined"

    def test_written_reports(self, tmp_path):
        reports = [
            evaluate(samples([(0.9, 1), (0.1, 0)]), dataset="a"),
            evaluate(samples([(0.9, 1)]), dataset="b"),
        ]
        write_report_csv(reports, tmp_path / "m.csv")
        write_report_json(reports, tmp_path / "m.json")
        with (tmp_path / "m.csv").open() as fh:
            rows = list(csv.DictReader(fh))
        assert [r["dataset"] for r in rows] == ["a", "b"]
        assert rows[0]["auroc"] == "1.0000" and rows[1]["auroc"] == "undefined"
        payload = json.loads((tmp_path / "m.json").read_text())
        assert payload[1]["auroc"] is None
        assert payload[0]["confusion"] == {"tp": 1, "fp": 0, "tn": 1, "fn": 0}

    def test_scanner_column_appears_only_when_split(self, tmp_path):
        plain = evaluate(samples([(0.9, 1), (0.1, 0)]), dataset="a")
        assert "scanner" not in plain.csv_row()
        split = [
            evaluate(samples([(0.9, 1), (0.1, 0)]), dataset="a", scanner="GT450"),
            evaluate(samples([(0.4, 1), (0.6, 0)]), dataset="a", scanner="AT2"),
        ]
        assert list(split[0].csv_row()) == ["dataset", "scanner", "n", "acc", "f1", "auroc"]
        write_report_csv(split, tmp_path / "m.csv")
        with (tmp_path / "m.csv").open() as fh:
            rows = list(csv.DictReader(fh))
        assert [(r["scanner"], r["auroc"]) for r in rows] == [("GT450", "1.0000"), ("AT2", "0.0000")]
