"""
Registry of the agent-facing graph tools.

Each tool is a form (argument validation and coercion), a handler running the
matching FlowChart operation and a renderer producing the compact text that
goes back into the model transcript. ``final_answer`` is registered for its
schema only; the agent loop intercepts it.
"""
import json
import logging
import re
import time
from dataclasses import dataclass, field

from django import forms as django_forms

from . import forms
from .flowchart import Condition, FlowChartError, labels

logger = logging.getLogger(__name__)

FINAL_ANSWER = "final_answer"

ERROR_CODES = {
    "required": "missing_argument",
    "min_value": "out_of_range",
}

NEIGHBOUR_RE = re.compile(r'(\w+)(?: \[(Yes|No|"(?:[^"\\]|\\.)*")\])?(?:, |$)')
DEGREE_RE = re.compile(r"(\w+)\((\d+)\)(?:, |$)")


@dataclass(frozen=True)
class ArgumentSpec:
    name: str
    type: str
    required: bool
    description: str

    def to_schema(self):
        schema = {"description": self.description}
        if self.type != "any":
            schema["type"] = self.type
        return schema


@dataclass(frozen=True)
class ToolSpec:
    name: str
    description: str
    arguments: tuple
    form_class: type = field(repr=False, compare=False, default=None)

    @property
    def argument_names(self):
        return [argument.name for argument in self.arguments]

    def to_schema(self):
        return {
            "name": self.name,
            "description": self.description,
            "parameters": {
                "type": "object",
                "properties": {argument.name: argument.to_schema() for argument in self.arguments},
                "required": [argument.name for argument in self.arguments if argument.required],
            },
        }


@dataclass(frozen=True)
class ToolCall:
    tool: str
    arguments: dict
    call_id: str

    def to_json(self):
        return {"tool": self.tool, "arguments": self.arguments, "call_id": self.call_id}

    @classmethod
    def from_json(cls, data):
        return cls(data["tool"], dict(data.get("arguments") or {}), data.get("call_id", ""))


@dataclass
class ToolResult:
    call_id: str
    status: str
    payload: object
    rendered: str
    duration_ms: float = 0.0
    warnings: list = field(default_factory=list)

    @property
    def ok(self):
        return self.status == "ok"

    def to_json(self):
        return {
            "call_id": self.call_id,
            "status": self.status,
            "payload": self.payload,
            "rendered": self.rendered,
            "duration_ms": self.duration_ms,
            "warnings": list(self.warnings),
        }

    @classmethod
    def from_json(cls, data):
        return cls(
            data["call_id"],
            data["status"],
            data.get("payload"),
            data.get("rendered", ""),
            data.get("duration_ms", 0.0),
            list(data.get("warnings") or []),
        )


@dataclass(frozen=True)
class ArgumentError:
    code: str
    argument: str
    message: str

    def to_json(self):
        return {"code": self.code, "argument": self.argument, "message": self.message}


@dataclass
class BoundArguments:
    cleaned: dict
    errors: list
    warnings: list


# payloads and rendering


def _refs_payload(refs, include_statements):
    if include_statements:
        return [[ref.label, ref.statement] for ref in refs]
    return labels(refs)


def _render_refs(payload, separator=", ", empty="(none)"):
    if not payload:
        return empty
    parts = []
    for item in payload:
        if isinstance(item, list):
            parts.append(f"{item[0]}({item[1]})")
        else:
            parts.append(item)
    return separator.join(parts)


def _render_path(payload):
    if payload is None:
        return "no path"
    return _render_refs(payload, separator=" -> ")


def _render_neighbours(payload):
    if not payload:
        return "(none)"
    parts = []
    for item in payload:
        text = item[0] if len(item) < 3 else f"{item[0]}({item[2]})"
        condition = Condition.from_json(item[1])
        if condition.is_unconditional:
            parts.append(text)
        elif isinstance(item[1], dict):
            parts.append(f"{text} [{json.dumps(condition.text)}]")
        else:
            parts.append(f"{text} [{condition.describe()}]")
    return ", ".join(parts)


def _render_maxima(payload):
    return ", ".join(f"{label}({degree})" for label, degree in payload)


def _render_statement(payload):
    return payload or "(empty)"


def _neighbours(chart, node_id, include_statements=False):
    payload = []
    for neighbour in chart.get_neighbours(node_id, include_statements):
        item = [neighbour.label, neighbour.condition.to_json()]
        if include_statements:
            item.append(neighbour.statement)
        payload.append(item)
    return payload


def _path(method):
    def handler(chart, start_id, end_id, conditions=None, include_statements=False):
        refs = method(chart, start_id, end_id, conditions or None, include_statements)
        return None if refs is None else _refs_payload(refs, include_statements)

    return handler


def _traversal(method):
    def handler(chart, start_id=None, conditions=None, include_statements=False):
        refs = method(chart, start_id, conditions or None, include_statements)
        return _refs_payload(refs, include_statements)

    return handler


def _levels(method):
    def handler(chart, node_id, levels=None, include_statements=False):
        return _refs_payload(method(chart, node_id, levels, include_statements), include_statements)

    return handler


def _maxima(method):
    def handler(chart):
        return [[label, degree] for label, degree in method(chart)]

    return handler


@dataclass(frozen=True)
class _Tool:
    name: str
    description: str
    form_class: type
    handler: object
    renderer: object
    help_overrides: dict = field(default_factory=dict)


def _chart_method(name):
    return lambda chart, *args: getattr(chart, name)(*args)


_TOOLS = (
    _Tool(
        "get_statement",
        "Returns the statement associated with a node.",
        forms.NodeForm,
        lambda chart, node_id: chart.get_statement(node_id),
        _render_statement,
    ),
    _Tool(
        "get_ancestors",
        "Identifies all nodes that have paths leading to the specified node.",
        forms.LevelsForm,
        _levels(_chart_method("get_ancestors")),
        _render_refs,
        {"node_id": "Identifier of the target node."},
    ),
    _Tool(
        "get_descendants",
        "Identifies all nodes that can be reached from the specified node.",
        forms.LevelsForm,
        _levels(_chart_method("get_descendants")),
        _render_refs,
        {"node_id": "Identifier of the starting node."},
    ),
    _Tool(
        "get_neighbours",
        "Returns all nodes connected to the given node by outgoing edges.",
        forms.NodeStatementsForm,
        _neighbours,
        _render_neighbours,
    ),
    _Tool(
        "in_degree",
        "Returns the number of incoming edges to a node.",
        forms.NodeForm,
        lambda chart, node_id: chart.in_degree(node_id),
        str,
    ),
    _Tool(
        "out_degree",
        "Returns the number of outgoing edges from a node.",
        forms.NodeForm,
        lambda chart, node_id: chart.out_degree(node_id),
        str,
    ),
    _Tool(
        "max_in_degree",
        "Identifies nodes with the highest incoming edges.",
        forms.EmptyForm,
        _maxima(_chart_method("max_in_degree")),
        _render_maxima,
    ),
    _Tool(
        "max_out_degree",
        "Identifies nodes with the highest outgoing edges.",
        forms.EmptyForm,
        _maxima(_chart_method("max_out_degree")),
        _render_maxima,
    ),
    _Tool(
        "bfs",
        "Performs breadth-first search from a starting node.",
        forms.TraversalForm,
        _traversal(_chart_method("bfs")),
        _render_refs,
    ),
    _Tool(
        "dfs",
        "Performs depth-first search from a starting node.",
        forms.TraversalForm,
        _traversal(_chart_method("dfs")),
        _render_refs,
    ),
    _Tool(
        "path_between",
        "Finds a path between two nodes, considering edge conditions.",
        forms.PathForm,
        _path(_chart_method("path_between")),
        _render_path,
    ),
    _Tool(
        "shortest_path",
        "Finds the shortest path between two nodes using BFS.",
        forms.PathForm,
        _path(_chart_method("shortest_path")),
        _render_path,
    ),
    _Tool(
        FINAL_ANSWER,
        "Provides a final answer to the given problem.",
        forms.FinalAnswerForm,
        None,
        None,
    ),
)
_REGISTRY = {tool.name: tool for tool in _TOOLS}


def _argument_type(form_field):
    if isinstance(form_field, django_forms.BooleanField):
        return "boolean"
    if isinstance(form_field, django_forms.IntegerField):
        return "integer"
    if isinstance(form_field, forms.ConditionsField):
        return "object"
    if isinstance(form_field, forms.AnyJSONField):
        return "any"
    return "string"


def _spec(tool):
    arguments = tuple(
        ArgumentSpec(
            name,
            _argument_type(form_field),
            form_field.required,
            tool.help_overrides.get(name, str(form_field.help_text)),
        )
        for name, form_field in tool.form_class().fields.items()
    )
    return ToolSpec(tool.name, tool.description, arguments, tool.form_class)


_SPECS = tuple(_spec(tool) for tool in _TOOLS)


def list_tools():
    return list(_SPECS)


def get_tool(name):
    for spec in _SPECS:
        if spec.name == name:
            return spec
    return None


def tool_schemas():
    """Function-calling schema document for every registered tool."""
    return [spec.to_schema() for spec in _SPECS]


def bind(call):
    """Validate and coerce a call's arguments against its tool form."""
    tool = _REGISTRY.get(call.tool)
    if tool is None:
        return BoundArguments({}, [ArgumentError("unknown_tool", None, f"Unknown tool {call.tool!r}.")], [])
    arguments = call.arguments if isinstance(call.arguments, dict) else {}
    errors = [
        ArgumentError("unknown_argument", name, f"{call.tool} takes no argument {name!r}.")
        for name in arguments
        if name not in tool.form_class.base_fields
    ]
    form = tool.form_class({name: value for name, value in arguments.items() if name in tool.form_class.base_fields})
    if not form.is_valid():
        for name, field_errors in form.errors.as_data().items():
            for error in field_errors:
                code = ERROR_CODES.get(error.code, "invalid_value")
                errors.append(ArgumentError(code, name, f"{name}: {' '.join(error.messages)}"))
    return BoundArguments(dict(form.cleaned_data) if not errors else {}, errors, list(form.warnings))


def validate(call):
    return bind(call).errors


def _error_result(call, kind, message, started, warnings=(), **extra):
    payload = {"kind": kind, "message": message, **extra}
    return ToolResult(
        call.call_id,
        "error",
        payload,
        f"error ({kind}): {message}",
        (time.perf_counter() - started) * 1000,
        list(warnings),
    )


def dispatch(call, chart):
    """Run one tool call against a chart. Graph errors come back as error results."""
    started = time.perf_counter()
    bound = bind(call)
    if bound.errors:
        return _error_result(
            call,
            "invalid_arguments",
            "; ".join(error.message for error in bound.errors),
            started,
            bound.warnings,
            errors=[error.to_json() for error in bound.errors],
        )
    tool = _REGISTRY[call.tool]
    if tool.handler is None:
        return _error_result(call, "not_dispatchable", f"{call.tool} is handled by the agent loop.", started)
    try:
        payload = tool.handler(chart, **bound.cleaned)
    except FlowChartError as error:
        logger.debug("tool %s failed: %s", call.tool, error)
        return _error_result(call, error.kind, str(error), started, bound.warnings)
    rendered = tool.renderer(payload)
    return ToolResult(
        call.call_id,
        "ok",
        payload,
        rendered,
        (time.perf_counter() - started) * 1000,
        bound.warnings,
    )


def read_rendered(tool, text):
    """
    Parse the label-only rendered form of a tool result back into its payload.
    Forms rendered with statements are not reversible.
    """
    if tool == "get_statement":
        return "" if text == "(empty)" else text
    if tool in ("in_degree", "out_degree"):
        return int(text)
    if tool in ("max_in_degree", "max_out_degree"):
        return [[label, int(degree)] for label, degree in DEGREE_RE.findall(text)]
    if tool in ("path_between", "shortest_path"):
        return None if text == "no path" else text.split(" -> ")
    if tool == "get_neighbours":
        if text == "(none)":
            return []
        payload = []
        for label, condition in NEIGHBOUR_RE.findall(text):
            if not condition:
                payload.append([label, None])
            elif condition.startswith('"'):
                payload.append([label, {"other": json.loads(condition)}])
            else:
                payload.append([label, condition.lower()])
        return payload
    if tool in ("get_ancestors", "get_descendants", "bfs", "dfs"):
        return [] if text == "(none)" else text.split(", ")
    raise ValueError(f"Tool {tool!r} has no rendered form.")
