import json
import random
import tempfile
from pathlib import Path

from django.test import SimpleTestCase

from attribution.agent import Statement
from attribution.choices import QuestionType, RegionShape, Split, StyleFamily
from attribution.dataset import (
    DatasetError,
    GeometryError,
    QASample,
    Region,
    RegionMap,
    assemble_sample,
    dump_dataset,
    load_dataset,
)
from attribution.synthesis import label_sequence, random_flowchart, synthesize_statement

from .fixtures import build_g1, g1_sample_json

STATEMENT = Statement("What is printed when x is 5?", "Print positive", QuestionType.FACT_RETRIEVAL)


class RegionTests(SimpleTestCase):
    def test_polygon_must_stay_in_bbox(self):
        Region("B", RegionShape.DIAMOND, (0, 0, 10, 10), ((5, 0), (10, 5), (5, 10), (0, 5)))
        with self.assertRaises(GeometryError):
            Region("B", RegionShape.DIAMOND, (0, 0, 10, 10), ((5, 0), (12, 5), (5, 10)))

    def test_invalid_regions(self):
        with self.assertRaises(GeometryError):
            Region("A", RegionShape.RECT, (0, 0, 0, 10))
        with self.assertRaises(GeometryError):
            Region("A", "hexagon", (0, 0, 10, 10))
        with self.assertRaises(GeometryError):
            Region("A", RegionShape.RECT, (0, 0, 10, 10), ((0, 0), (1, 1)))

    def test_region_map_json(self):
        regions = RegionMap({"A": Region("A", RegionShape.RECT, (1, 2, 3, 4))}, (100, 50))
        data = regions.to_json()
        self.assertEqual(data, {"canvas": [100, 50], "nodes": {"A": {"shape_kind": "rect", "bbox": [1.0, 2.0, 3.0, 4.0]}}})
        self.assertEqual(RegionMap.from_json(data).get("A").center, (2.5, 4.0))


class SampleTests(SimpleTestCase):
    def test_from_json(self):
        sample = QASample.from_json(g1_sample_json())
        self.assertEqual(sample.node_count, 5)
        self.assertEqual(sample.statement, STATEMENT)
        self.assertIsNone(sample.regions)
        self.assertEqual(sample.to_json(), g1_sample_json())

    def test_defaults(self):
        data = g1_sample_json()
        del data["split"], data["style"]
        sample = QASample.from_json(data)
        self.assertEqual((sample.split, sample.style), (Split.CUSTOM, StyleFamily.DEFAULT))

    def test_rejects_bad_records(self):
        for data in (
            g1_sample_json(split="forum"),
            g1_sample_json(style="neon"),
            g1_sample_json(question_type="trivia"),
            g1_sample_json(schema_version=2),
        ):
            with self.subTest(data=data), self.assertRaises(DatasetError):
                QASample.from_json(data)
        data = g1_sample_json()
        del data["answer"]
        with self.assertRaisesMessage(DatasetError, "'answer'"):
            QASample.from_json(data)

    def test_rejects_records_that_contradict_their_chart(self):
        def regions(labels, bbox=(0, 0, 10, 10)):
            nodes = {label: {"shape_kind": "rect", "bbox": [bbox[0], bbox[1] + 20 * index, *bbox[2:]]} for index, label in enumerate(labels)}
            return {"canvas": [40, 120], "nodes": nodes}

        self.assertEqual(len(QASample.from_json(g1_sample_json(regions=regions("ABCDE"))).regions), 5)
        cases = (
            (g1_sample_json(mermaid=""), "unreadable mermaid"),
            (g1_sample_json(mermaid="flowchart TD\n"), "unreadable mermaid"),
            (g1_sample_json(mermaid=7), "mermaid must be a string"),
            (g1_sample_json(gt_nodes=["A", "Z"]), "gt_nodes not in the chart: Z"),
            (g1_sample_json(regions=regions("ABCD")), "without region: E"),
            (g1_sample_json(regions=regions("ABCDEF")), "unknown: F"),
            (g1_sample_json(regions={"canvas": [10, 10], "nodes": {"A": {"bbox": [0, 0, 10]}}}), "malformed record"),
            (g1_sample_json(regions={"canvas": [10, 10], "nodes": {"A": {"bbox": ["x", 0, 1, 1]}}}), "malformed record"),
            (g1_sample_json(regions={"canvas": [10, 10], "nodes": {"A": {"bbox": None}}}), "malformed record"),
        )
        for data, message in cases:
            with self.subTest(message=message):
                with self.assertRaises(DatasetError) as raised:
                    QASample.from_json(data)
                self.assertIn("Sample g1-fact", str(raised.exception))
                self.assertIn(message, str(raised.exception))

    def test_rejects_non_object_records(self):
        with self.assertRaises(DatasetError):
            QASample.from_json(["g1-fact"])


class JsonLinesTests(SimpleTestCase):
    def setUp(self):
        self.directory = tempfile.TemporaryDirectory()
        self.path = Path(self.directory.name) / "dataset.jsonl"

    def tearDown(self):
        self.directory.cleanup()

    def write(self, *lines):
        self.path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    def test_round_trip(self):
        samples = [QASample.from_json(g1_sample_json(id=f"s{index}")) for index in range(3)]
        dump_dataset(samples, self.path)
        self.assertEqual([sample.id for sample in load_dataset(self.path)], ["s0", "s1", "s2"])

    def test_blank_lines_are_skipped(self):
        self.write(json.dumps(g1_sample_json()), "", json.dumps(g1_sample_json(id="other")))
        self.assertEqual(len(load_dataset(self.path)), 2)

    def test_errors_carry_line_numbers(self):
        self.write(json.dumps(g1_sample_json()), "{not json")
        with self.assertRaisesMessage(DatasetError, "line 2"):
            load_dataset(self.path)
        self.write(json.dumps(g1_sample_json()), json.dumps(g1_sample_json()))
        with self.assertRaisesMessage(DatasetError, "line 2: duplicate sample id g1-fact"):
            load_dataset(self.path)
        self.write(json.dumps(g1_sample_json(split="forum")))
        with self.assertRaisesMessage(DatasetError, "line 1"):
            load_dataset(self.path)
        self.write(json.dumps(g1_sample_json()), json.dumps(g1_sample_json(id="broken", gt_nodes=["Q"])))
        with self.assertRaisesMessage(DatasetError, "line 2: Sample broken: gt_nodes not in the chart: Q"):
            load_dataset(self.path)


class AssembleTests(SimpleTestCase):
    def test_writes_svg_next_to_records(self):
        with tempfile.TemporaryDirectory() as directory:
            sample = assemble_sample(build_g1(), STATEMENT, ["A", "B", "C"], StyleFamily.BLACK_WHITE, 3, Split.CODE, directory)
            self.assertEqual(sample.image_path, f"{sample.id}.svg")
            self.assertTrue((Path(directory) / sample.image_path).read_text(encoding="utf-8").startswith("<svg"))
        self.assertTrue(sample.id.startswith("fa-"))
        self.assertEqual(sample.regions.labels(), ["A", "B", "C", "D", "E"])
        self.assertEqual(sample.metadata, {"seed": 3, "colors": ["#FFFFFF"]})
        self.assertEqual(sample.style, "black_white")
        self.assertEqual(sample.chart.nodes["B"].statement, "Is x > 0?")

    def test_ground_truth_must_be_in_chart(self):
        with self.assertRaises(DatasetError):
            assemble_sample(build_g1(), STATEMENT, ["A", "Z"], StyleFamily.DEFAULT, 0)

    def test_ids_are_stable_and_distinct(self):
        def build(seed):
            rng = random.Random(seed)
            chart = random_flowchart(rng, rng.randint(4, 12))
            question_type = QuestionType.values[seed % len(QuestionType.values)]
            statement, gt_nodes = synthesize_statement(chart, rng, question_type)
            return assemble_sample(chart, statement, gt_nodes, StyleFamily.MULTI_COLOR, seed).id

        ids = [build(seed) for seed in range(100)]
        self.assertEqual(len(set(ids)), 100)
        self.assertEqual([build(seed) for seed in range(0, 100, 10)], ids[::10])


class SynthesisTests(SimpleTestCase):
    def test_label_sequence(self):
        labels = label_sequence(28)
        self.assertEqual(labels[:3], ["A", "B", "C"])
        self.assertEqual(labels[25:], ["Z", "AA", "AB"])

    def test_random_flowchart_shape(self):
        rng = random.Random(42)
        for size in (1, 2, 5, 20):
            chart = random_flowchart(rng, size)
            self.assertEqual(list(chart.nodes), label_sequence(size))
            self.assertEqual(chart.get_statement("A"), "Start")
            if size > 1:
                self.assertEqual(chart.get_statement(label_sequence(size)[-1]), "End")
            self.assertEqual(len(chart.bfs("A")), size)
        with self.assertRaises(ValueError):
            random_flowchart(rng, 0)

    def test_random_flowchart_is_seeded(self):
        first = random_flowchart(random.Random(8), 15)
        second = random_flowchart(random.Random(8), 15)
        self.assertEqual(first.to_json(), second.to_json())

    def test_statements_point_into_the_chart(self):
        rng = random.Random(1)
        for _ in range(25):
            chart = random_flowchart(rng, rng.randint(2, 16))
            for question_type in QuestionType.values:
                statement, gt_nodes = synthesize_statement(chart, rng, question_type)
                self.assertEqual(statement.question_type, question_type)
                self.assertTrue(gt_nodes)
                self.assertEqual(len(gt_nodes), len(set(gt_nodes)))
                self.assertTrue(set(gt_nodes) <= set(chart.nodes))
        with self.assertRaises(ValueError):
            synthesize_statement(chart, rng, "trivia")

    def test_topological_answer(self):
        statement, gt_nodes = synthesize_statement(build_g1(), random.Random(0), QuestionType.TOPOLOGICAL)
        self.assertEqual(statement.answer, "2")
        self.assertEqual(gt_nodes, ["B", "C", "D"])
