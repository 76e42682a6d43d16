"""
Attribution scoring: IoU-gated region matching and micro-averaged precision,
recall and F1 over node sets, pooled overall and per slice.
"""
import csv
import io
import logging
from dataclasses import dataclass, field

from shapely.geometry import Polygon, box

from .choices import SCHEMA_VERSION
from .dataset import GeometryError, Region

logger = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 0.7
NODE_BUCKETS = ((1, 10), (11, 20), (21, 30), (31, 40))


class EvaluationError(ValueError):
    kind = "evaluation_error"


def _geometry(value):
    """Normalise a Region, a {"bbox"|"polygon"} mapping or an (x, y, w, h) tuple."""
    if isinstance(value, Region):
        return ("polygon", value.polygon) if value.polygon else ("box", value.bbox)
    if isinstance(value, dict):
        if value.get("polygon"):
            return "polygon", tuple(tuple(point) for point in value["polygon"])
        if value.get("bbox"):
            return "box", tuple(value["bbox"])
        raise GeometryError("Region needs a bbox or a polygon.")
    return "box", tuple(value)


def _box(bbox):
    x, y, width, height = (float(part) for part in bbox)
    if width <= 0 or height <= 0:
        raise GeometryError(f"Degenerate box {bbox!r}.")
    return x, y, width, height


def _shape(kind, data):
    if kind == "box":
        x, y, width, height = _box(data)
        return box(x, y, x + width, y + height)
    polygon = Polygon(data)
    if not polygon.is_valid or polygon.area <= 0:
        raise GeometryError("Degenerate or self-intersecting polygon.")
    return polygon


def iou(a, b):
    """Intersection over union. Box pairs are computed exactly; polygons go through shapely."""
    kind_a, data_a = _geometry(a)
    kind_b, data_b = _geometry(b)
    if kind_a == kind_b == "box":
        ax, ay, aw, ah = _box(data_a)
        bx, by, bw, bh = _box(data_b)
        overlap_w = min(ax + aw, bx + bw) - max(ax, bx)
        overlap_h = min(ay + ah, by + bh) - max(ay, by)
        if overlap_w <= 0 or overlap_h <= 0:
            return 0.0
        intersection = overlap_w * overlap_h
        return intersection / (aw * ah + bw * bh - intersection)
    shape_a = _shape(kind_a, data_a)
    shape_b = _shape(kind_b, data_b)
    union = shape_a.union(shape_b).area
    return shape_a.intersection(shape_b).area / union if union > 0 else 0.0


def _against(pred, region):
    kind, _ = _geometry(pred)
    if kind == "polygon" and region.polygon:
        return {"polygon": region.polygon}
    return {"bbox": region.bbox}


def match_regions(preds, region_map, threshold=DEFAULT_THRESHOLD):
    """
    Map free predicted regions to ground-truth labels: each prediction takes the
    node of maximum IoU (first in map order on ties) if it reaches the threshold.
    """
    if not 0 < threshold <= 1:
        raise ValueError("threshold must lie in (0, 1].")
    matched = []
    for pred in preds:
        best_label, best_iou = None, 0.0
        for region in region_map:
            overlap = iou(pred, _against(pred, region))
            if overlap > best_iou:
                best_label, best_iou = region.label, overlap
        if best_label is not None and best_iou >= threshold and best_label not in matched:
            matched.append(best_label)
    return matched


@dataclass
class PredictionRecord:
    sample_id: str
    pred_nodes: list = None
    pred_regions: list = None

    def __post_init__(self):
        if self.pred_nodes is None and self.pred_regions is None:
            raise EvaluationError(f"Prediction for {self.sample_id} has neither pred_nodes nor pred_regions.")

    def to_json(self):
        data = {"schema_version": SCHEMA_VERSION, "sample_id": self.sample_id}
        if self.pred_nodes is not None:
            data["pred_nodes"] = list(self.pred_nodes)
        if self.pred_regions is not None:
            data["pred_regions"] = list(self.pred_regions)
        return data

    @classmethod
    def from_json(cls, data):
        try:
            return cls(data["sample_id"], data.get("pred_nodes"), data.get("pred_regions"))
        except KeyError:
            raise EvaluationError("Prediction is missing sample_id.") from None


@dataclass
class Counts:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    samples: int = 0

    def add(self, tp, fp, fn):
        self.tp += tp
        self.fp += fp
        self.fn += fn
        self.samples += 1

    @property
    def precision(self):
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0

    @property
    def recall(self):
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0

    @property
    def f1(self):
        total = self.precision + self.recall
        return 2 * self.precision * self.recall / total if total else 0.0

    def to_json(self):
        return {
            "precision": round(self.precision * 100, 2),
            "recall": round(self.recall * 100, 2),
            "f1": round(self.f1 * 100, 2),
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "samples": self.samples,
        }


def node_bucket(count):
    for low, high in NODE_BUCKETS:
        if count <= high:
            return f"{low}-{high}"
    return f"{NODE_BUCKETS[-1][1] + 1}+"


def order_consistent(predicted, gt_nodes):
    """True when the ground-truth nodes that were predicted appear in ground-truth order."""
    common = set(predicted) & set(gt_nodes)
    return [label for label in predicted if label in common] == [label for label in gt_nodes if label in common]


@dataclass
class EvalReport:
    threshold: float
    overall: Counts = field(default_factory=Counts)
    by_split: dict = field(default_factory=dict)
    by_question_type: dict = field(default_factory=dict)
    by_node_bucket: dict = field(default_factory=dict)
    diagnostics: list = field(default_factory=list)

    @property
    def precision(self):
        return self.overall.precision

    @property
    def recall(self):
        return self.overall.recall

    @property
    def f1(self):
        return self.overall.f1

    def to_json(self):
        return {
            "schema_version": SCHEMA_VERSION,
            "iou_threshold": self.threshold,
            "overall": self.overall.to_json(),
            "by_split": {key: counts.to_json() for key, counts in sorted(self.by_split.items())},
            "by_question_type": {key: counts.to_json() for key, counts in sorted(self.by_question_type.items())},
            "by_node_bucket": {key: counts.to_json() for key, counts in self.by_node_bucket.items()},
            "diagnostics": self.diagnostics,
        }

    def rows(self):
        yield "overall", "all", self.overall
        for name, table in (
            ("split", self.by_split),
            ("question_type", self.by_question_type),
            ("node_bucket", self.by_node_bucket),
        ):
            for key in sorted(table) if name != "node_bucket" else table:
                yield name, key, table[key]

    def to_csv(self):
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(["slice", "group", "precision", "recall", "f1", "tp", "fp", "fn", "samples"])
        for name, key, counts in self.rows():
            data = counts.to_json()
            writer.writerow(
                [name, key, f"{data['precision']:.2f}", f"{data['recall']:.2f}", f"{data['f1']:.2f}",
                 counts.tp, counts.fp, counts.fn, counts.samples]
            )
        return buffer.getvalue()


def resolve_prediction(record, sample, threshold):
    if record is None:
        return []
    if record.pred_nodes is not None:
        labels = []
        for label in record.pred_nodes:
            if label not in labels:
                labels.append(label)
        return labels
    if sample.regions is None:
        raise EvaluationError(f"Sample {sample.id} has no regions to match predicted regions against.")
    return match_regions(record.pred_regions, sample.regions, threshold)


def score(preds, dataset, threshold=DEFAULT_THRESHOLD):
    """Pool TP/FP/FN over all samples; samples without a prediction count as empty predictions."""
    if not 0 < threshold <= 1:
        raise ValueError("threshold must lie in (0, 1].")
    samples = {sample.id: sample for sample in dataset}
    records = {}
    for record in preds:
        if record.sample_id not in samples:
            raise EvaluationError(f"Prediction for unknown sample {record.sample_id}.")
        if record.sample_id in records:
            raise EvaluationError(f"Duplicate prediction for sample {record.sample_id}.")
        records[record.sample_id] = record

    report = EvalReport(threshold)
    buckets = [f"{low}-{high}" for low, high in NODE_BUCKETS] + [f"{NODE_BUCKETS[-1][1] + 1}+"]
    report.by_node_bucket = {bucket: Counts() for bucket in buckets}
    missing = 0
    for sample in dataset:
        record = records.get(sample.id)
        missing += record is None
        predicted = resolve_prediction(record, sample, threshold)
        pred_set, gt_set = set(predicted), set(sample.gt_nodes)
        tp, fp, fn = len(pred_set & gt_set), len(pred_set - gt_set), len(gt_set - pred_set)
        report.overall.add(tp, fp, fn)
        report.by_split.setdefault(sample.split, Counts()).add(tp, fp, fn)
        report.by_question_type.setdefault(sample.question_type, Counts()).add(tp, fp, fn)
        report.by_node_bucket[node_bucket(sample.node_count)].add(tp, fp, fn)
        report.diagnostics.append(
            {
                "sample_id": sample.id,
                "tp": tp,
                "fp": fp,
                "fn": fn,
                "pred_nodes": predicted,
                "path_length_ratio": round(len(predicted) / len(sample.gt_nodes), 4) if sample.gt_nodes else None,
                "order_consistent": order_consistent(predicted, sample.gt_nodes),
            }
        )
    if missing:
        logger.warning("%d samples have no prediction and count as empty", missing)
    return report
