import random

from django.test import SimpleTestCase

from attribution.choices import RegionShape
from attribution.dataset import GeometryError, QASample, Region, RegionMap
from attribution.evaluation import (
    Counts,
    EvaluationError,
    PredictionRecord,
    iou,
    match_regions,
    node_bucket,
    order_consistent,
    score,
)

from .fixtures import g1_sample_json

DIAMOND = ((10, 0), (20, 10), (10, 20), (0, 10))


def g1_regions():
    return RegionMap(
        {
            "A": Region("A", RegionShape.RECT, (0, 0, 10, 10)),
            "B": Region("B", RegionShape.DIAMOND, (0, 20, 20, 20), ((10, 20), (20, 30), (10, 40), (0, 30))),
            "C": Region("C", RegionShape.RECT, (0, 50, 10, 10)),
            "D": Region("D", RegionShape.RECT, (20, 50, 10, 10)),
            "E": Region("E", RegionShape.STADIUM, (0, 70, 10, 10)),
        },
        (40, 90),
    )


def sample(identifier="s1", **overrides):
    return QASample.from_json(g1_sample_json(id=identifier, **overrides))


class IouTests(SimpleTestCase):
    def test_boxes(self):
        self.assertEqual(iou((0, 0, 10, 10), (0, 0, 10, 10)), 1.0)
        self.assertEqual(iou((0, 0, 10, 10), (5, 0, 10, 10)), 1 / 3)
        self.assertEqual(iou((0, 0, 10, 10), (20, 20, 5, 5)), 0.0)
        self.assertEqual(iou((0, 0, 10, 10), (10, 0, 10, 10)), 0.0)

    def test_polygons(self):
        self.assertAlmostEqual(iou({"polygon": DIAMOND}, {"polygon": DIAMOND}), 1.0)
        # the diamond covers half its bounding square
        self.assertAlmostEqual(iou({"polygon": DIAMOND}, {"bbox": (0, 0, 20, 20)}), 0.5)
        region = Region("B", RegionShape.DIAMOND, (0, 0, 20, 20), DIAMOND)
        self.assertAlmostEqual(iou(region, region), 1.0)

    def test_degenerate_geometry(self):
        with self.assertRaises(GeometryError):
            iou((0, 0, 0, 10), (0, 0, 10, 10))
        with self.assertRaises(GeometryError):
            iou({"polygon": ((0, 0), (10, 10), (10, 0), (0, 10))}, (0, 0, 10, 10))
        with self.assertRaises(GeometryError):
            iou({}, (0, 0, 10, 10))


class MatchRegionsTests(SimpleTestCase):
    def test_exact_match(self):
        self.assertEqual(match_regions([{"bbox": (0, 20, 20, 20)}], g1_regions()), ["B"])

    def test_polygon_prediction_matches_polygon(self):
        polygon = {"polygon": ((10, 20), (20, 30), (10, 40), (0, 30))}
        self.assertEqual(match_regions([polygon], g1_regions()), ["B"])

    def test_below_threshold(self):
        self.assertEqual(match_regions([(5, 0, 10, 10)], g1_regions()), [])
        self.assertEqual(match_regions([(5, 0, 10, 10)], g1_regions(), threshold=0.3), ["A"])

    def test_duplicates_collapse(self):
        preds = [(0, 50, 10, 10), (0, 0, 10, 10), (0.5, 50, 10, 10)]
        self.assertEqual(match_regions(preds, g1_regions()), ["C", "A"])

    def test_threshold_range(self):
        for threshold in (0, -0.1, 1.5):
            with self.assertRaises(ValueError):
                match_regions([], g1_regions(), threshold)


class ScoreTests(SimpleTestCase):
    def test_partial_overlap(self):
        report = score([PredictionRecord("s1", ["B", "C", "D"])], [sample()])
        self.assertEqual((report.overall.tp, report.overall.fp, report.overall.fn), (2, 1, 1))
        self.assertAlmostEqual(report.precision, 2 / 3)
        self.assertAlmostEqual(report.recall, 2 / 3)
        self.assertAlmostEqual(report.f1, 2 / 3)
        self.assertEqual(report.to_json()["overall"]["f1"], 66.67)

    def test_perfect_predictions(self):
        samples = [sample("s1"), sample("s2", gt_nodes=["B", "D"], split="wiki", question_type="topological")]
        report = score([PredictionRecord(item.id, item.gt_nodes) for item in samples], samples)
        data = report.to_json()
        self.assertEqual((data["overall"]["precision"], data["overall"]["recall"], data["overall"]["f1"]), (100.0, 100.0, 100.0))
        self.assertEqual(sorted(data["by_split"]), ["code", "wiki"])
        self.assertEqual(data["by_question_type"]["topological"]["tp"], 2)
        self.assertEqual(data["by_node_bucket"]["1-10"]["samples"], 2)
        self.assertEqual(data["iou_threshold"], 0.7)

    def test_missing_prediction_counts_as_empty(self):
        samples = [sample("s1"), sample("s2")]
        with self.assertLogs("attribution.evaluation", "WARNING"):
            report = score([PredictionRecord("s1", ["A", "B", "C"])], samples)
        self.assertEqual((report.overall.tp, report.overall.fp, report.overall.fn), (3, 0, 3))
        self.assertEqual(report.overall.precision, 1.0)
        self.assertEqual(report.overall.recall, 0.5)

    def test_empty_prediction_scores_zero(self):
        report = score([PredictionRecord("s1", [])], [sample()])
        self.assertEqual((report.precision, report.recall, report.f1), (0.0, 0.0, 0.0))

    def test_prediction_errors(self):
        with self.assertRaises(EvaluationError):
            score([PredictionRecord("nope", ["A"])], [sample()])
        with self.assertRaises(EvaluationError):
            score([PredictionRecord("s1", ["A"]), PredictionRecord("s1", ["B"])], [sample()])
        with self.assertRaises(EvaluationError):
            PredictionRecord("s1")
        with self.assertRaises(EvaluationError):
            PredictionRecord.from_json({"pred_nodes": ["A"]})

    def test_region_predictions(self):
        item = sample(regions=g1_regions().to_json())
        preds = [PredictionRecord("s1", pred_regions=[{"bbox": [0, 0, 10, 10]}, {"bbox": [0, 20, 20, 20]}, {"bbox": [20, 50, 10, 10]}])]
        report = score(preds, [item])
        self.assertEqual(report.diagnostics[0]["pred_nodes"], ["A", "B", "D"])
        self.assertEqual((report.overall.tp, report.overall.fp, report.overall.fn), (2, 1, 1))
        with self.assertRaises(EvaluationError):
            score(preds, [sample()])

    def test_raising_threshold_never_adds_true_positives(self):
        rng = random.Random(4)
        item = sample(regions=g1_regions().to_json())
        for _ in range(50):
            regions = []
            for region in g1_regions():
                x, y, width, height = region.bbox
                regions.append({"bbox": [x + rng.uniform(-4, 4), y + rng.uniform(-4, 4), width, height]})
            preds = [PredictionRecord("s1", pred_regions=regions)]
            loose = score(preds, [item], threshold=0.5).overall.tp
            strict = score(preds, [item], threshold=0.9).overall.tp
            self.assertLessEqual(strict, loose)

    def test_diagnostics(self):
        report = score([PredictionRecord("s1", ["C", "A", "A"])], [sample()])
        diagnostic = report.diagnostics[0]
        self.assertEqual(diagnostic["pred_nodes"], ["C", "A"])
        self.assertEqual(diagnostic["path_length_ratio"], round(2 / 3, 4))
        self.assertFalse(diagnostic["order_consistent"])

    def test_csv(self):
        report = score([PredictionRecord("s1", ["B", "C", "D"])], [sample()])
        lines = report.to_csv().splitlines()
        self.assertEqual(lines[0], "slice,group,precision,recall,f1,tp,fp,fn,samples")
        self.assertEqual(lines[1], "overall,all,66.67,66.67,66.67,2,1,1,1")
        self.assertIn("split,code,66.67,66.67,66.67,2,1,1,1", lines)
        self.assertIn("node_bucket,41+,0.00,0.00,0.00,0,0,0,0", lines)


class HelperTests(SimpleTestCase):
    def test_node_bucket(self):
        self.assertEqual([node_bucket(count) for count in (1, 10, 11, 40, 41, 44)], ["1-10", "1-10", "11-20", "31-40", "41+", "41+"])

    def test_order_consistent(self):
        self.assertTrue(order_consistent(["A", "X", "C"], ["A", "B", "C"]))
        self.assertFalse(order_consistent(["C", "A"], ["A", "B", "C"]))

    def test_f1_bounds(self):
        rng = random.Random(9)
        for _ in range(200):
            counts = Counts(rng.randint(0, 20), rng.randint(0, 20), rng.randint(0, 20))
            if counts.precision + counts.recall:
                self.assertLessEqual(min(counts.precision, counts.recall), counts.f1 + 1e-12)
                self.assertLessEqual(counts.f1, max(counts.precision, counts.recall) + 1e-12)
            else:
                self.assertEqual(counts.f1, 0.0)
