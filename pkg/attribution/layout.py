"""
Layered layout for flowcharts.

Back edges are found by DFS and ignored for layering; layers come from the
longest path from the roots; nodes inside a layer are ordered by the
barycenter of their predecessors. Geometry is computed along a rank axis (the
flow direction) and a cross axis, then mapped onto x/y for the chart's
direction.
"""
import logging
from dataclasses import dataclass, field

from .choices import NodeShape

logger = logging.getLogger(__name__)

BOX_WIDTH = 160
BOX_HEIGHT = 48
DIAMOND_HEIGHT = 80
LAYER_GAP = 60
COLUMN_GAP = 40
MARGIN = 20
BACK_EDGE_LANE = 30
SELF_LOOP = 15

DIRECTIONS = ("TD", "TB", "BT", "LR", "RL")


@dataclass(frozen=True)
class PositionedNode:
    label: str
    shape: str
    x: float
    y: float
    width: float
    height: float
    layer: int
    order: int

    @property
    def bbox(self):
        return (self.x, self.y, self.width, self.height)

    @property
    def center(self):
        return (self.x + self.width / 2, self.y + self.height / 2)


@dataclass
class EdgeRoute:
    source: str
    target: str
    condition: object
    points: list
    label_at: tuple
    back: bool = False


@dataclass
class Layout:
    direction: str
    nodes: dict
    canvas: tuple
    layers: list
    back_edges: set = field(default_factory=set)
    routes: list = field(default_factory=list)

    def __getitem__(self, label):
        return self.nodes[label]

    def __contains__(self, label):
        return label in self.nodes

    def layer_of(self, label):
        return self.nodes[label].layer


def box_size(shape):
    if shape == NodeShape.DIAMOND:
        return BOX_WIDTH, DIAMOND_HEIGHT
    return BOX_WIDTH, BOX_HEIGHT


def find_back_edges(chart):
    """Edges closing a cycle in a DFS from every node in insertion order (self-loops included)."""
    WHITE, GREY, BLACK = 0, 1, 2
    colour = {label: WHITE for label in chart.nodes}
    back = set()
    for root in chart.nodes:
        if colour[root] != WHITE:
            continue
        colour[root] = GREY
        stack = [(root, iter(chart.nodes[root].edges))]
        while stack:
            label, edges = stack[-1]
            edge = next(edges, None)
            if edge is None:
                colour[label] = BLACK
                stack.pop()
                continue
            if colour[edge.target] == GREY:
                back.add(edge)
            elif colour[edge.target] == WHITE:
                colour[edge.target] = GREY
                stack.append((edge.target, iter(chart.nodes[edge.target].edges)))
    return back


def assign_layers(chart, back_edges):
    predecessors = {label: [] for label in chart.nodes}
    successors = {label: [] for label in chart.nodes}
    for edge in chart.edges():
        if edge not in back_edges:
            predecessors[edge.target].append(edge.source)
            successors[edge.source].append(edge.target)
    remaining = {label: len(sources) for label, sources in predecessors.items()}
    ready = [label for label in chart.nodes if remaining[label] == 0]
    layer = {}
    while ready:
        label = ready.pop(0)
        layer[label] = max((layer[source] + 1 for source in predecessors[label]), default=0)
        for target in successors[label]:
            remaining[target] -= 1
            if remaining[target] == 0:
                ready.append(target)
    return layer, predecessors


def order_layers(chart, layer, predecessors):
    insertion = {label: index for index, label in enumerate(chart.nodes)}
    depth = max(layer.values(), default=-1) + 1
    layers = [[] for _ in range(depth)]
    for label in chart.nodes:
        layers[layer[label]].append(label)
    position = {label: index for index, label in enumerate(layers[0])} if layers else {}
    for members in layers[1:]:
        def barycenter(label):
            placed = [position[source] for source in predecessors[label] if source in position]
            return sum(placed) / len(placed) if placed else float("inf")

        members.sort(key=lambda label: (barycenter(label), insertion[label]))
        position.update({label: index for index, label in enumerate(members)})
    return layers


class _Frame:
    """Maps (rank, cross) coordinates onto x/y for one direction."""

    def __init__(self, direction, rank_total, cross_total):
        self.direction = direction
        self.rank_total = rank_total
        self.cross_total = cross_total

    @property
    def horizontal(self):
        return self.direction in ("LR", "RL")

    @property
    def canvas(self):
        if self.horizontal:
            return (self.rank_total, self.cross_total)
        return (self.cross_total, self.rank_total)

    def point(self, rank, cross):
        if self.direction in ("BT", "RL"):
            rank = self.rank_total - rank
        return (rank, cross) if self.horizontal else (cross, rank)

    def box(self, rank, cross, rank_extent, cross_extent):
        x1, y1 = self.point(rank, cross)
        x2, y2 = self.point(rank + rank_extent, cross + cross_extent)
        return min(x1, x2), min(y1, y2), abs(x2 - x1), abs(y2 - y1)


def layout(chart, direction=None):
    """Position every node of a non-empty chart and route its edges."""
    direction = direction or chart.direction or "TD"
    if direction not in DIRECTIONS:
        raise ValueError(f"Unknown direction {direction!r}.")
    if not chart.nodes:
        raise ValueError("Cannot lay out an empty chart.")
    back_edges = find_back_edges(chart)
    layer, predecessors = assign_layers(chart, back_edges)
    layers = order_layers(chart, layer, predecessors)

    horizontal = direction in ("LR", "RL")
    sizes = {}
    for label, node in chart.nodes.items():
        width, height = box_size(node.shape)
        sizes[label] = (width, height) if horizontal else (height, width)

    band_extent = [max(sizes[label][0] for label in members) for members in layers]
    band_start = []
    cursor = MARGIN
    for extent in band_extent:
        band_start.append(cursor)
        cursor += extent + LAYER_GAP
    rank_total = cursor - LAYER_GAP + MARGIN

    spans = [sum(sizes[label][1] for label in members) + COLUMN_GAP * (len(members) - 1) for members in layers]
    widest = max(spans)
    lane = BACK_EDGE_LANE if back_edges else 0
    cross_total = widest + 2 * MARGIN + lane
    frame = _Frame(direction, rank_total, cross_total)

    abstract = {}
    nodes = {}
    for index, members in enumerate(layers):
        cross = MARGIN + (widest - spans[index]) / 2
        for order, label in enumerate(members):
            rank_extent, cross_extent = sizes[label]
            rank = band_start[index] + (band_extent[index] - rank_extent) / 2
            abstract[label] = (rank, cross, rank_extent, cross_extent)
            x, y, width, height = frame.box(rank, cross, rank_extent, cross_extent)
            nodes[label] = PositionedNode(label, chart.nodes[label].shape, x, y, width, height, index, order)
            cross += cross_extent + COLUMN_GAP

    result = Layout(direction, nodes, frame.canvas, layers, back_edges)
    lane_cross = MARGIN + widest + lane / 2
    for edge in chart.edges():
        result.routes.append(_route(edge, abstract, layer, band_start, band_extent, frame, edge in back_edges, lane_cross))
    logger.debug("laid out %d nodes in %d layers", len(nodes), len(layers))
    return result


def _route(edge, abstract, layer, band_start, band_extent, frame, back, lane_cross):
    s_rank, s_cross, s_rext, s_cext = abstract[edge.source]
    t_rank, t_cross, t_rext, t_cext = abstract[edge.target]
    if edge.source == edge.target:
        side = s_cross + s_cext
        middle = s_rank + s_rext / 2
        points = [
            (middle - 10, side),
            (middle - 10, side + SELF_LOOP),
            (middle + 10, side + SELF_LOOP),
            (middle + 10, side),
        ]
    elif back:
        points = [
            (s_rank + s_rext / 2, s_cross + s_cext),
            (s_rank + s_rext / 2, lane_cross),
            (t_rank + t_rext / 2, lane_cross),
            (t_rank + t_rext / 2, t_cross + t_cext),
        ]
    else:
        source_layer = layer[edge.source]
        elbow = band_start[source_layer] + band_extent[source_layer] + LAYER_GAP / 2
        start = (s_rank + s_rext, s_cross + s_cext / 2)
        end = (t_rank, t_cross + t_cext / 2)
        points = [start, (elbow, start[1]), (elbow, end[1]), end]
    mapped = [frame.point(rank, cross) for rank, cross in points]
    (x1, y1), (x2, y2) = mapped[1], mapped[2]
    return EdgeRoute(edge.source, edge.target, edge.condition, mapped, ((x1 + x2) / 2, (y1 + y2) / 2), back)
