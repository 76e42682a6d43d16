"""
Benchmark records: node regions, region maps and QA samples, stored as JSON Lines.
"""
import hashlib
import json
import logging
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

from .agent import Statement
from .choices import SCHEMA_VERSION, QuestionType, RegionShape, Split, StyleFamily
from .mermaid import RECOVER, MermaidError, parse_mermaid, serialize_mermaid

logger = logging.getLogger(__name__)

EPSILON = 1e-6


class GeometryError(ValueError):
    kind = "degenerate_geometry"


class DatasetError(ValueError):
    kind = "dataset_error"

    def __init__(self, message, line=None):
        super().__init__(f"line {line}: {message}" if line else message)
        self.line = line


@dataclass(frozen=True)
class Region:
    label: str
    shape_kind: str
    bbox: tuple
    polygon: tuple = None

    def __post_init__(self):
        if self.shape_kind not in RegionShape.values:
            raise GeometryError(f"Unknown region shape {self.shape_kind!r}.")
        object.__setattr__(self, "shape_kind", str(self.shape_kind))
        x, y, width, height = (float(value) for value in self.bbox)
        if width <= 0 or height <= 0:
            raise GeometryError(f"Region {self.label} has a non-positive size.")
        object.__setattr__(self, "bbox", (x, y, width, height))
        if self.polygon is not None:
            points = tuple((float(px), float(py)) for px, py in self.polygon)
            if len(points) < 3:
                raise GeometryError(f"Region {self.label} polygon needs at least 3 vertices.")
            for px, py in points:
                if not (x - EPSILON <= px <= x + width + EPSILON and y - EPSILON <= py <= y + height + EPSILON):
                    raise GeometryError(f"Region {self.label} polygon leaves its bounding box.")
            object.__setattr__(self, "polygon", points)

    @property
    def center(self):
        x, y, width, height = self.bbox
        return x + width / 2, y + height / 2

    @property
    def bottom(self):
        return self.bbox[1] + self.bbox[3]

    def to_json(self):
        data = {"shape_kind": self.shape_kind, "bbox": list(self.bbox)}
        if self.polygon is not None:
            data["polygon"] = [list(point) for point in self.polygon]
        return data

    @classmethod
    def from_json(cls, label, data):
        polygon = data.get("polygon")
        return cls(label, data.get("shape_kind", RegionShape.RECT), tuple(data["bbox"]), tuple(polygon) if polygon else None)


@dataclass
class RegionMap:
    regions: dict
    canvas: tuple

    def __len__(self):
        return len(self.regions)

    def __iter__(self):
        return iter(self.regions.values())

    def __contains__(self, label):
        return label in self.regions

    def get(self, label):
        return self.regions.get(label)

    def labels(self):
        return list(self.regions)

    def to_json(self):
        return {
            "canvas": list(self.canvas),
            "nodes": {label: region.to_json() for label, region in self.regions.items()},
        }

    @classmethod
    def from_json(cls, data):
        regions = {label: Region.from_json(label, region) for label, region in (data.get("nodes") or {}).items()}
        return cls(regions, tuple(data.get("canvas") or (0, 0)))


@dataclass
class QASample:
    id: str
    mermaid: str
    question: str
    answer: str
    question_type: str
    split: str
    style: str
    gt_nodes: list
    regions: RegionMap = None
    image_path: str = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.question_type not in QuestionType.values:
            raise DatasetError(f"Sample {self.id}: unknown question type {self.question_type!r}.")
        if self.split not in Split.values:
            raise DatasetError(f"Sample {self.id}: unknown split {self.split!r}.")
        if self.style not in StyleFamily.values:
            raise DatasetError(f"Sample {self.id}: unknown style {self.style!r}.")

    @cached_property
    def chart(self):
        chart, _ = parse_mermaid(self.mermaid, mode=RECOVER)
        return chart

    @property
    def statement(self):
        return Statement(self.question, self.answer, self.question_type)

    @property
    def node_count(self):
        return len(self.chart.nodes)

    def to_json(self):
        data = {
            "schema_version": SCHEMA_VERSION,
            "id": self.id,
            "mermaid": self.mermaid,
            "question": self.question,
            "answer": self.answer,
            "question_type": self.question_type,
            "split": self.split,
            "style": self.style,
            "gt_nodes": list(self.gt_nodes),
            "regions": self.regions.to_json() if self.regions is not None else None,
        }
        if self.image_path:
            data["image_path"] = self.image_path
        if self.metadata:
            data["metadata"] = self.metadata
        return data

    def validate(self):
        """Check the record against its own chart; raises DatasetError naming the sample."""
        if not isinstance(self.mermaid, str):
            raise DatasetError(f"Sample {self.id}: mermaid must be a string.")
        try:
            nodes = self.chart.nodes
        except MermaidError as error:
            raise DatasetError(f"Sample {self.id}: unreadable mermaid ({error}).") from None
        missing = [label for label in self.gt_nodes if label not in nodes]
        if missing:
            raise DatasetError(f"Sample {self.id}: gt_nodes not in the chart: {', '.join(map(str, missing))}.")
        if self.regions is not None:
            unmapped = [label for label in nodes if label not in self.regions]
            stray = [label for label in self.regions.labels() if label not in nodes]
            if unmapped or stray:
                raise DatasetError(
                    f"Sample {self.id}: regions do not match the chart nodes "
                    f"(without region: {', '.join(unmapped) or '-'}; unknown: {', '.join(stray) or '-'})."
                )
        return self

    @classmethod
    def from_json(cls, data):
        if not isinstance(data, dict):
            raise DatasetError("Sample record must be a JSON object.")
        version = data.get("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise DatasetError(f"Unsupported schema_version {version}.")
        identifier = data.get("id", "?")
        try:
            sample = cls(
                data["id"],
                data["mermaid"],
                data["question"],
                data["answer"],
                data["question_type"],
                data.get("split", Split.CUSTOM),
                data.get("style", StyleFamily.DEFAULT),
                list(data.get("gt_nodes") or []),
                RegionMap.from_json(data["regions"]) if data.get("regions") else None,
                data.get("image_path"),
                dict(data.get("metadata") or {}),
            )
        except KeyError as error:
            raise DatasetError(f"Sample {identifier} is missing field {error.args[0]!r}.") from None
        except DatasetError:
            raise
        except (TypeError, ValueError, AttributeError) as error:
            raise DatasetError(f"Sample {identifier}: malformed record ({error}).") from None
        return sample.validate()


def read_jsonl(path):
    """Yield (line number, object) for each non-blank line of a JSON Lines file."""
    with Path(path).open(encoding="utf-8") as handle:
        for number, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                yield number, json.loads(line)
            except json.JSONDecodeError as error:
                raise DatasetError(f"invalid JSON ({error.msg})", number) from None


def write_jsonl(path, records):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as handle:
        for record in records:
            handle.write(json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n")


def load_dataset(path):
    samples = []
    seen = set()
    for number, data in read_jsonl(path):
        try:
            sample = QASample.from_json(data)
        except DatasetError as error:
            raise DatasetError(str(error), number) from None
        if sample.id in seen:
            raise DatasetError(f"duplicate sample id {sample.id}", number)
        seen.add(sample.id)
        samples.append(sample)
    logger.info("loaded %d samples from %s", len(samples), path)
    return samples


def dump_dataset(samples, path):
    write_jsonl(path, (sample.to_json() for sample in samples))


def sample_id(mermaid, statement, gt_nodes, style, seed, split):
    payload = json.dumps(
        {
            "mermaid": mermaid,
            "question": statement.question,
            "answer": statement.answer,
            "question_type": statement.question_type,
            "gt_nodes": list(gt_nodes),
            "style": style,
            "seed": seed,
            "split": split,
        },
        sort_keys=True,
        ensure_ascii=False,
    )
    return "fa-" + hashlib.sha1(payload.encode("utf-8")).hexdigest()[:12]


def assemble_sample(chart, statement, gt_nodes, style, seed, split=Split.CUSTOM, out_dir=None, overlay_labels=True):
    """
    Render a chart and package it with its statement as a QASample. With
    ``out_dir`` the SVG is written there as <id>.svg and image_path is relative to it.
    """
    from .layout import layout
    from .render import StyleSpec, render_svg

    missing = [label for label in gt_nodes if label not in chart.nodes]
    if missing:
        raise DatasetError(f"Ground-truth nodes not in the chart: {', '.join(missing)}.")
    mermaid = serialize_mermaid(chart)
    style_spec = StyleSpec.choose(style, seed)
    svg, region_map = render_svg(chart, layout(chart), style_spec, overlay_labels=overlay_labels)
    identifier = sample_id(mermaid, statement, gt_nodes, str(style), seed, str(split))
    image_path = None
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        image_path = out_dir / f"{identifier}.svg"
        image_path.write_text(svg, encoding="utf-8")
        image_path = image_path.name
    return QASample(
        identifier,
        mermaid,
        statement.question,
        statement.answer,
        statement.question_type,
        str(split),
        str(style),
        list(gt_nodes),
        region_map,
        image_path,
        {"seed": seed, "colors": list(style_spec.colors)},
    )
