"""
Conditional directed graph behind every agent tool.

Nodes keep only their outgoing edges. Ancestor queries and in-degrees go
through a reverse index that is built on first use and dropped on mutation;
``freeze()`` builds it eagerly and forbids further mutation.
"""
import hashlib
import json
import logging
from collections import deque, namedtuple
from dataclasses import dataclass, field

from .choices import ConditionKind, NodeShape

logger = logging.getLogger(__name__)

NodeRef = namedtuple("NodeRef", ["label", "statement"])
Neighbour = namedtuple("Neighbour", ["label", "condition", "statement"])


class FlowChartError(Exception):
    kind = "flowchart_error"

    def __init__(self, message, label=None):
        super().__init__(message)
        self.label = label


class UnknownNodeError(FlowChartError):
    kind = "unknown_node"


class DuplicateNodeError(FlowChartError):
    kind = "duplicate_node"


class DuplicateEdgeError(FlowChartError):
    kind = "duplicate_edge"


class EmptyChartError(FlowChartError):
    kind = "empty_chart"


class InvalidNodeError(FlowChartError):
    kind = "invalid_node"


class InvalidArgumentError(FlowChartError):
    kind = "invalid_argument"


class FrozenChartError(FlowChartError):
    kind = "frozen_chart"


@dataclass(frozen=True)
class Condition:
    kind: str = ConditionKind.UNCONDITIONAL
    text: str = ""

    def __post_init__(self):
        if self.kind not in ConditionKind.values:
            raise ValueError(f"Unknown condition kind {self.kind!r}.")
        # plain strings keep hashing consistent with equality
        object.__setattr__(self, "kind", str(self.kind))
        object.__setattr__(self, "text", self.text.strip())
        if self.kind == ConditionKind.OTHER and not self.text:
            raise ValueError("Other conditions need a non-empty label.")

    @classmethod
    def from_label(cls, label):
        """Map a Mermaid edge label onto a condition."""
        text = (label or "").strip()
        if not text:
            return UNCONDITIONAL
        if text.lower() == "yes":
            return YES
        if text.lower() == "no":
            return NO
        return cls(ConditionKind.OTHER, text)

    @classmethod
    def from_json(cls, value):
        if value is None:
            return UNCONDITIONAL
        if isinstance(value, dict):
            return cls(ConditionKind.OTHER, str(value.get("other", "")).strip())
        if value == "yes":
            return YES
        if value == "no":
            return NO
        raise ValueError(f"Unrecognised condition {value!r}.")

    @property
    def is_unconditional(self):
        return self.kind == ConditionKind.UNCONDITIONAL

    def to_json(self):
        if self.kind == ConditionKind.YES:
            return "yes"
        if self.kind == ConditionKind.NO:
            return "no"
        if self.kind == ConditionKind.OTHER:
            return {"other": self.text}
        return None

    def describe(self):
        if self.kind == ConditionKind.YES:
            return "Yes"
        if self.kind == ConditionKind.NO:
            return "No"
        return self.text


YES = Condition(ConditionKind.YES)
NO = Condition(ConditionKind.NO)
UNCONDITIONAL = Condition(ConditionKind.UNCONDITIONAL)


@dataclass(frozen=True)
class Edge:
    source: str
    target: str
    condition: Condition = UNCONDITIONAL

    def to_json(self):
        return {"from": self.source, "to": self.target, "condition": self.condition.to_json()}


@dataclass
class Node:
    label: str
    statement: str
    shape: str = NodeShape.RECTANGLE
    edges: list = field(default_factory=list)


def labels(refs):
    """Strip statements from a list of NodeRef/Neighbour tuples."""
    return [ref.label for ref in refs]


class FlowChart:
    def __init__(self, direction="TD"):
        self.nodes = {}
        self.edge_count = 0
        self.direction = direction
        self._incoming = None
        self._edge_keys = set()
        self._frozen = False

    def __len__(self):
        return len(self.nodes)

    def __contains__(self, label):
        return label in self.nodes

    def __repr__(self):
        return f"<FlowChart nodes={len(self.nodes)} edges={self.edge_count}>"

    # construction

    def add_node(self, label, statement="", shape=NodeShape.RECTANGLE):
        self._check_mutable()
        if not label:
            raise InvalidNodeError("Node labels must be non-empty.")
        if label in self.nodes:
            raise DuplicateNodeError(f"Node {label} already exists.", label)
        if shape not in NodeShape.values:
            raise InvalidNodeError(f"Unknown shape {shape!r} for node {label}.", label)
        if not statement and shape != NodeShape.UNKNOWN:
            raise InvalidNodeError(f"Node {label} needs a statement.", label)
        node = Node(label, statement or "", str(shape))
        self.nodes[label] = node
        self._incoming = None
        return node

    def add_edge(self, source, target, condition=UNCONDITIONAL):
        self._check_mutable()
        for label in (source, target):
            if label not in self.nodes:
                raise UnknownNodeError(f"Node {label} not found.", label)
        key = (source, target, condition)
        if key in self._edge_keys:
            raise DuplicateEdgeError(
                f"Edge {source} -> {target} [{condition.describe() or 'unconditional'}] already exists.",
                source,
            )
        edge = Edge(source, target, condition)
        self.nodes[source].edges.append(edge)
        self._edge_keys.add(key)
        self.edge_count += 1
        self._incoming = None
        return edge

    def freeze(self):
        self._incoming_index()
        self._frozen = True
        return self

    @property
    def frozen(self):
        return self._frozen

    def _check_mutable(self):
        if self._frozen:
            raise FrozenChartError("The flowchart is frozen.")

    # lookups

    def _node(self, label):
        try:
            return self.nodes[label]
        except KeyError:
            raise UnknownNodeError(f"Node {label} not found.", label) from None

    def _incoming_index(self):
        incoming = self._incoming
        if incoming is None:
            incoming = {label: [] for label in self.nodes}
            for node in self.nodes.values():
                for edge in node.edges:
                    incoming[edge.target].append(edge)
            self._incoming = incoming
        return incoming

    def edges(self):
        for node in self.nodes.values():
            yield from node.edges

    def has_edge(self, source, target):
        node = self.nodes.get(source)
        return node is not None and any(edge.target == target for edge in node.edges)

    def default_start(self):
        if not self.nodes:
            raise EmptyChartError("The flowchart is empty.")
        incoming = self._incoming_index()
        for label in self.nodes:
            if not incoming[label]:
                return label
        return next(iter(self.nodes))

    def _ref(self, label, include_statements):
        return NodeRef(label, self.nodes[label].statement if include_statements else None)

    def _resolve_constraint(self, constraint):
        if not constraint:
            return {}
        resolved = {}
        for label, value in constraint.items():
            self._node(label)
            if isinstance(value, Condition):
                condition = value
            elif isinstance(value, bool):
                condition = YES if value else NO
            else:
                condition = Condition.from_label(str(value))
            if condition not in (YES, NO):
                raise InvalidArgumentError(
                    f"Condition for node {label} must be Yes or No, got {value!r}.", label
                )
            resolved[label] = condition
        return resolved

    @staticmethod
    def _traversable(edge, constraint):
        required = constraint.get(edge.source)
        if required is None or edge.condition.is_unconditional:
            return True
        return edge.condition == required

    # tool operations

    def get_statement(self, node):
        return self._node(node).statement

    def get_ancestors(self, node, levels=None, include_statements=False):
        self._node(node)
        incoming = self._incoming_index()
        return self._level_walk(
            node, levels, include_statements, lambda label: (edge.source for edge in incoming[label])
        )

    def get_descendants(self, node, levels=None, include_statements=False):
        self._node(node)
        return self._level_walk(
            node, levels, include_statements, lambda label: (edge.target for edge in self.nodes[label].edges)
        )

    def _level_walk(self, node, levels, include_statements, step):
        if levels is not None and levels < 1:
            raise InvalidArgumentError("levels must be at least 1.")
        seen = {node}
        found = []
        frontier = [node]
        depth = 0
        while frontier and (levels is None or depth < levels):
            next_frontier = []
            for current in frontier:
                for other in step(current):
                    if other not in seen:
                        seen.add(other)
                        found.append(other)
                        next_frontier.append(other)
            frontier = next_frontier
            depth += 1
        return [self._ref(label, include_statements) for label in found]

    def get_neighbours(self, node, include_statements=False):
        return [
            Neighbour(
                edge.target,
                edge.condition,
                self.nodes[edge.target].statement if include_statements else None,
            )
            for edge in self._node(node).edges
        ]

    def in_degree(self, node):
        self._node(node)
        return len(self._incoming_index()[node])

    def out_degree(self, node):
        return len(self._node(node).edges)

    def max_in_degree(self):
        incoming = self._incoming_index()
        return self._maxima({label: len(edges) for label, edges in incoming.items()})

    def max_out_degree(self):
        return self._maxima({label: len(node.edges) for label, node in self.nodes.items()})

    def _maxima(self, degrees):
        if not degrees:
            raise EmptyChartError("The flowchart is empty.")
        top = max(degrees.values())
        return [(label, degree) for label, degree in degrees.items() if degree == top]

    def bfs(self, start=None, constraint=None, include_statements=False):
        start = self.default_start() if start is None else start
        self._node(start)
        constraint = self._resolve_constraint(constraint)
        visited = {start}
        order = []
        queue = deque([start])
        while queue:
            current = queue.popleft()
            order.append(current)
            for edge in self.nodes[current].edges:
                if edge.target not in visited and self._traversable(edge, constraint):
                    visited.add(edge.target)
                    queue.append(edge.target)
        return [self._ref(label, include_statements) for label in order]

    def dfs(self, start=None, constraint=None, include_statements=False):
        start = self.default_start() if start is None else start
        self._node(start)
        constraint = self._resolve_constraint(constraint)
        visited = {start}
        order = [start]
        stack = [iter(self.nodes[start].edges)]
        while stack:
            edge = next(stack[-1], None)
            if edge is None:
                stack.pop()
                continue
            if edge.target in visited or not self._traversable(edge, constraint):
                continue
            visited.add(edge.target)
            order.append(edge.target)
            stack.append(iter(self.nodes[edge.target].edges))
        return [self._ref(label, include_statements) for label in order]

    def path_between(self, start, end, constraint=None, include_statements=False):
        self._node(start)
        self._node(end)
        constraint = self._resolve_constraint(constraint)
        if start == end:
            return [self._ref(start, include_statements)]
        visited = {start}
        path = [start]
        stack = [iter(self.nodes[start].edges)]
        while stack:
            edge = next(stack[-1], None)
            if edge is None:
                stack.pop()
                path.pop()
                continue
            if not self._traversable(edge, constraint):
                continue
            if edge.target == end:
                return [self._ref(label, include_statements) for label in path + [end]]
            if edge.target not in visited:
                visited.add(edge.target)
                path.append(edge.target)
                stack.append(iter(self.nodes[edge.target].edges))
        return None

    def shortest_path(self, start, end, constraint=None, include_statements=False):
        self._node(start)
        self._node(end)
        constraint = self._resolve_constraint(constraint)
        parents = {start: None}
        queue = deque([start])
        while queue and end not in parents:
            current = queue.popleft()
            for edge in self.nodes[current].edges:
                if edge.target not in parents and self._traversable(edge, constraint):
                    parents[edge.target] = current
                    queue.append(edge.target)
        if end not in parents:
            return None
        path = [end]
        while parents[path[-1]] is not None:
            path.append(parents[path[-1]])
        path.reverse()
        return [self._ref(label, include_statements) for label in path]

    # projections

    def to_json(self):
        return {
            "nodes": [
                {"label": node.label, "statement": node.statement, "shape": node.shape}
                for node in self.nodes.values()
            ],
            "edges": [edge.to_json() for edge in self.edges()],
        }

    @classmethod
    def from_json(cls, data, direction="TD"):
        chart = cls(direction=direction)
        for entry in data.get("nodes", []):
            chart.add_node(entry["label"], entry.get("statement", ""), entry.get("shape", NodeShape.RECTANGLE))
        for entry in data.get("edges", []):
            chart.add_edge(entry["from"], entry["to"], Condition.from_json(entry.get("condition")))
        return chart

    def fingerprint(self):
        payload = json.dumps(self.to_json(), sort_keys=True, ensure_ascii=False)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()
