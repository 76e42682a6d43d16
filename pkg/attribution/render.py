"""
SVG rendering of laid-out flowcharts, with the region map taken from the emitted geometry.
"""
import json
import logging
import random
from dataclasses import dataclass
from functools import lru_cache

from django.conf import settings
from django.template.loader import render_to_string
from django.utils.text import Truncator, wrap

from .choices import NodeShape, RegionShape, StyleFamily
from .dataset import Region, RegionMap

logger = logging.getLogger(__name__)

WRAP_WIDTH = 22
MAX_LINES = 3
LINE_HEIGHT = 14
ROUNDED_RADIUS = 10

REGION_SHAPES = {
    NodeShape.RECTANGLE: RegionShape.RECT,
    NodeShape.DIAMOND: RegionShape.DIAMOND,
    NodeShape.ROUNDED: RegionShape.ROUNDED,
    NodeShape.STADIUM: RegionShape.STADIUM,
    NodeShape.UNKNOWN: RegionShape.RECT,
}


@lru_cache(maxsize=None)
def _load_tables(path):
    with open(path, encoding="utf-8") as handle:
        return json.load(handle)


def style_tables():
    return _load_tables(str(settings.FLOWATTR_STYLE_TABLES))


@dataclass(frozen=True)
class StyleSpec:
    family: str
    colors: tuple
    seed: int = 0
    stroke: str = "#333333"
    text: str = "#000000"
    edge: str = "#333333"
    background: str = "#FFFFFF"

    @classmethod
    def choose(cls, family, seed=0):
        """Pick colours for a style family; the same (family, seed) always gives the same colours."""
        if family not in StyleFamily.values:
            raise ValueError(f"Unknown style family {family!r}.")
        tables = style_tables()
        rng = random.Random(seed)
        if family in (StyleFamily.DEFAULT, StyleFamily.BLACK_WHITE):
            fixed = tables[str(family)]
            colors = (fixed["fill"],)
        else:
            fixed = tables["colored"]
            if family == StyleFamily.SINGLE_COLOR:
                colors = (rng.choice(tables["single_color"]),)
            else:
                colors = tuple(rng.choice(tables["multi_color"]))
        return cls(str(family), colors, seed, fixed["stroke"], fixed["text"], fixed["edge"], fixed["background"])

    def fill_for(self, index):
        return self.colors[index % len(self.colors)]


def _text_lines(statement, center_y):
    lines = wrap(statement or "", WRAP_WIDTH).split("\n") if statement else []
    if len(lines) > MAX_LINES:
        lines = lines[: MAX_LINES - 1] + [Truncator(" ".join(lines[MAX_LINES - 1:])).chars(WRAP_WIDTH)]
    top = center_y - (len(lines) - 1) * LINE_HEIGHT / 2 + 4
    return [{"text": line, "y": top + index * LINE_HEIGHT} for index, line in enumerate(lines)]


def _diamond(node):
    x, y, width, height = node.bbox
    return [(x + width / 2, y), (x + width, y + height / 2), (x + width / 2, y + height), (x, y + height / 2)]


def _radius(node):
    if node.shape == NodeShape.STADIUM:
        return min(node.width, node.height) / 2
    if node.shape == NodeShape.ROUNDED:
        return ROUNDED_RADIUS
    return 0


def render_svg(chart, layout, style, overlay_labels=True):
    """Render a laid-out chart; returns the SVG text and the RegionMap of its nodes."""
    missing = [label for label in chart.nodes if label not in layout]
    if missing:
        raise ValueError(f"Layout does not cover nodes: {', '.join(missing)}.")
    nodes = []
    regions = {}
    for index, (label, chart_node) in enumerate(chart.nodes.items()):
        node = layout[label]
        center_x, center_y = node.center
        polygon = _diamond(node) if node.shape == NodeShape.DIAMOND else None
        nodes.append(
            {
                "label": label,
                "shape": node.shape,
                "x": node.x,
                "y": node.y,
                "width": node.width,
                "height": node.height,
                "cx": center_x,
                "rx": _radius(node),
                "polygon": polygon,
                "dashed": node.shape == NodeShape.UNKNOWN,
                "fill": style.fill_for(index),
                "stroke": style.stroke,
                "lines": _text_lines(chart_node.statement, center_y),
                "label_x": node.x + 4,
                "label_y": node.y + 14,
            }
        )
        regions[label] = Region(label, REGION_SHAPES[node.shape], node.bbox, tuple(polygon) if polygon else None)

    edges = []
    for route in layout.routes:
        label_x, label_y = route.label_at
        edges.append(
            {
                "source": route.source,
                "target": route.target,
                "points": route.points,
                "back": route.back,
                "label": route.condition.describe(),
                "label_x": label_x + 6,
                "label_y": label_y - 4,
            }
        )

    width, height = layout.canvas
    svg = render_to_string(
        "attribution/flowchart.svg",
        {
            "width": width,
            "height": height,
            "family": style.family,
            "background": style.background,
            "edge_color": style.edge,
            "text_color": style.text,
            "nodes": nodes,
            "edges": edges,
            "overlay": overlay_labels,
        },
    )
    logger.debug("rendered %d nodes (%s)", len(nodes), style.family)
    return svg, RegionMap(regions, (width, height))
