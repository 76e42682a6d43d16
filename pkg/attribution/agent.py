"""
The attribution episode loop.

An episode is one planning request (the only request carrying the labeled
image), then tool cycles that each execute a single graph tool, ended by a
``final_answer`` call that is parsed into an AttributionResult. The loop is
bounded: at most ``max_tool_cycles`` tools run and at most
``max_tool_cycles + 1`` requests follow the planning request.
"""
import json
import logging
import re
import time
from dataclasses import dataclass, field

from django.template.loader import render_to_string

from .backends import BackendError, ChatMessage, ChatRequest
from .choices import SCHEMA_VERSION, Outcome, QuestionType, StepKind
from .mermaid import RECOVER, parse_mermaid
from .tools import FINAL_ANSWER, ToolCall, ToolResult, dispatch, get_tool, tool_schemas, validate

logger = logging.getLogger(__name__)

LABEL_TOKEN_RE = re.compile(r"\b[A-Za-z0-9_]+\b")
MERMAID_FENCE_RE = re.compile(r"```(?:mermaid)?\s*\n(.*?)```", re.DOTALL)


class FinalAnswerError(ValueError):
    kind = "invalid_answer"


@dataclass(frozen=True)
class Statement:
    question: str
    answer: str
    question_type: str = QuestionType.FACT_RETRIEVAL

    def __post_init__(self):
        if not str(self.question).strip() or not str(self.answer).strip():
            raise ValueError("A statement needs a non-empty question and answer.")
        if self.question_type not in QuestionType.values:
            raise ValueError(f"Unknown question type {self.question_type!r}.")
        object.__setattr__(self, "question_type", str(self.question_type))


@dataclass(frozen=True)
class AgentConfig:
    max_tool_cycles: int = 8
    system_template: str = "attribution/prompts/system.txt"
    planning_template: str = "attribution/prompts/planning.txt"
    tool_cycle_template: str = "attribution/prompts/tool_cycle.txt"
    corrective_template: str = "attribution/prompts/corrective.txt"
    final_retry_template: str = "attribution/prompts/final_retry.txt"
    som_template: str = "attribution/prompts/som.txt"
    transcribe_template: str = "attribution/prompts/transcribe.txt"
    decoding: dict = field(default_factory=lambda: {"temperature": 0})

    def __post_init__(self):
        if self.max_tool_cycles < 1:
            raise ValueError("max_tool_cycles must be at least 1.")

    @classmethod
    def from_run_config(cls, config):
        return cls(max_tool_cycles=config.max_steps, decoding={"temperature": config.temperature})


@dataclass
class AgentStep:
    index: int
    kind: str
    call: ToolCall = None
    result: ToolResult = None
    model_text: str = ""
    duration_ms: float = 0.0

    def to_json(self):
        data = {"index": self.index, "kind": self.kind}
        if self.call is not None:
            data.update(tool=self.call.tool, arguments=self.call.arguments, call_id=self.call.call_id)
        if self.result is not None:
            data.update(
                status=self.result.status,
                payload=self.result.payload,
                rendered=self.result.rendered,
                tool_duration_ms=self.result.duration_ms,
                warnings=list(self.result.warnings),
            )
        data.update(model_text=self.model_text, duration_ms=self.duration_ms)
        return data

    @classmethod
    def from_json(cls, data):
        call = None
        if data.get("tool"):
            call = ToolCall(data["tool"], dict(data.get("arguments") or {}), data.get("call_id", ""))
        result = None
        if data.get("status"):
            result = ToolResult(
                data.get("call_id", ""),
                data["status"],
                data.get("payload"),
                data.get("rendered", ""),
                data.get("tool_duration_ms", 0.0),
                list(data.get("warnings") or []),
            )
        return cls(data["index"], data["kind"], call, result, data.get("model_text", ""), data.get("duration_ms", 0.0))


@dataclass
class AttributionResult:
    nodes: list
    edges: list
    regions: list = field(default_factory=list)
    reasoning: str = ""

    def to_json(self):
        return {
            "nodes": list(self.nodes),
            "edges": [list(edge) for edge in self.edges],
            "regions": [region.to_json() if region is not None else None for region in self.regions],
            "reasoning": self.reasoning,
        }

    @classmethod
    def from_json(cls, data):
        from .dataset import Region

        regions = [
            Region.from_json(label, region) if region is not None else None
            for label, region in zip(data.get("nodes", []), data.get("regions") or [])
        ]
        return cls(
            list(data.get("nodes", [])),
            [tuple(edge) for edge in data.get("edges", [])],
            regions,
            data.get("reasoning", ""),
        )


@dataclass
class AgentTrace:
    sample_id: str
    question_type: str = ""
    planned_nodes: list = field(default_factory=list)
    steps: list = field(default_factory=list)
    outcome: str = Outcome.BACKEND_ERROR
    result: AttributionResult = None
    error: dict = None
    mode: str = "agent"

    @property
    def answered(self):
        return self.outcome == Outcome.ANSWERED

    @property
    def tool_steps(self):
        return [step for step in self.steps if step.call is not None]

    def to_json(self):
        return {
            "schema_version": SCHEMA_VERSION,
            "sample_id": self.sample_id,
            "mode": self.mode,
            "question_type": self.question_type,
            "planned_nodes": list(self.planned_nodes),
            "steps": [step.to_json() for step in self.steps],
            "outcome": str(self.outcome),
            "result": self.result.to_json() if self.result is not None else None,
            "error": self.error,
        }

    @classmethod
    def from_json(cls, data):
        return cls(
            data["sample_id"],
            data.get("question_type", ""),
            list(data.get("planned_nodes") or []),
            [AgentStep.from_json(step) for step in data.get("steps", [])],
            data.get("outcome", Outcome.BACKEND_ERROR),
            AttributionResult.from_json(data["result"]) if data.get("result") else None,
            data.get("error"),
            data.get("mode", "agent"),
        )


def render_prompt(template_name, context):
    return render_to_string(template_name, context).strip()


def mentioned_labels(text, chart):
    """Chart labels named in free text, in order of first mention."""
    found = []
    for token in LABEL_TOKEN_RE.findall(text or ""):
        if token in chart.nodes and token not in found:
            found.append(token)
    return found


def _answer_items(payload):
    value = payload
    if isinstance(value, str):
        try:
            value = json.loads(value)
        except json.JSONDecodeError:
            raise FinalAnswerError(f"answer is not JSON: {payload[:80]!r}") from None
    if isinstance(value, dict):
        nodes = value.get("nodes")
        if not isinstance(nodes, list):
            raise FinalAnswerError("answer has no list of node labels")
        return nodes, str(value.get("reasoning") or "")
    if isinstance(value, list):
        return value, ""
    raise FinalAnswerError("answer has no list of node labels")


def parse_final_answer(payload, chart):
    """
    Accept ``{"nodes": [...], "reasoning": ...}`` or a bare label list.
    Labels missing from the chart are dropped with a warning in the reasoning.
    """
    items, reasoning = _answer_items(payload)
    nodes, dropped = [], []
    for item in items:
        if isinstance(item, bool) or not isinstance(item, (str, int)):
            dropped.append(repr(item))
            continue
        label = str(item).strip()
        if label in chart.nodes:
            if label not in nodes:
                nodes.append(label)
        else:
            dropped.append(label)
    if dropped:
        warning = f"warning: dropped labels not in the chart: {', '.join(dropped)}"
        reasoning = f"{reasoning}\n{warning}" if reasoning else warning
        logger.warning("final answer %s", warning)
    edges = [(source, target) for source, target in zip(nodes, nodes[1:]) if chart.has_edge(source, target)]
    return AttributionResult(nodes, edges, [], reasoning)


def attach_regions(result, region_map):
    if region_map is not None:
        result.regions = [region_map.get(label) for label in result.nodes]
    return result


def _elapsed(started):
    return (time.perf_counter() - started) * 1000


class _Episode:
    def __init__(self, chart, labeled_image, statement, region_map, config, backend, sample_id):
        self.chart = chart
        self.image = labeled_image
        self.statement = statement
        self.region_map = region_map
        self.config = config
        self.backend = backend
        self.schemas = tuple(tool_schemas())
        self.trace = AgentTrace(sample_id, statement.question_type)
        self.transcript = []
        self.context = {
            "question": statement.question,
            "answer": statement.answer,
            "question_type": statement.question_type,
            "tool_schemas": json.dumps(list(self.schemas), indent=2),
            "node_labels": ", ".join(chart.nodes),
            "max_tool_cycles": config.max_tool_cycles,
        }

    def prompt(self, template_name, **extra):
        return render_prompt(template_name, {**self.context, **extra})

    def request(self, tools):
        return self.backend.chat(ChatRequest(tuple(self.transcript), tools, dict(self.config.decoding)))

    def step(self, kind, call=None, result=None, model_text="", started=None):
        step = AgentStep(len(self.trace.steps), kind, call, result, model_text, _elapsed(started))
        self.trace.steps.append(step)
        return step

    def finish(self, outcome, error=None):
        self.trace.outcome = outcome
        self.trace.error = error
        logger.info(
            "episode %s finished: %s after %d steps",
            self.trace.sample_id or "-",
            outcome,
            len(self.trace.steps),
        )
        return self.trace

    def plan(self):
        self.transcript = [
            ChatMessage("system", self.prompt(self.config.system_template)),
            ChatMessage("user", self.prompt(self.config.planning_template), image=self.image),
        ]
        started = time.perf_counter()
        reply = self.request(())
        self.step(StepKind.PLANNING, model_text=reply.text, started=started)
        self.trace.planned_nodes = mentioned_labels(reply.text, self.chart)
        # the image is sent once; later turns see text only
        self.transcript[1] = self.transcript[1].without_image()
        self.transcript.append(ChatMessage("assistant", reply.text))
        self.transcript.append(ChatMessage("user", self.prompt(self.config.tool_cycle_template)))

    def run(self):
        try:
            self.plan()
            return self.cycle()
        except BackendError as error:
            logger.warning("episode %s backend failure: %s", self.trace.sample_id or "-", error)
            return self.finish(Outcome.BACKEND_ERROR, error.to_json())

    def cycle(self):
        cycles = 0
        corrected = False
        retried_answer = False
        for _ in range(self.config.max_tool_cycles + 1):
            started = time.perf_counter()
            reply = self.request(self.schemas)
            if reply.tool_call is None:
                self.step(StepKind.TOOL_CYCLE, model_text=reply.text, started=started)
                if corrected:
                    return self.finish(
                        Outcome.BACKEND_ERROR,
                        {"kind": "malformed_response", "retriable": False, "detail": "model replied without a tool call"},
                    )
                corrected = True
                self.transcript.append(ChatMessage("assistant", reply.text))
                self.transcript.append(ChatMessage("user", self.prompt(self.config.corrective_template)))
                continue

            corrected = False
            call = ToolCall(reply.tool_call.tool, reply.tool_call.arguments, f"call-{len(self.trace.steps)}")
            if call.tool == FINAL_ANSWER:
                try:
                    return self.answer(call, reply.text, started)
                except FinalAnswerError as error:
                    result = ToolResult(
                        call.call_id,
                        "error",
                        {"kind": error.kind, "message": str(error)},
                        f"error ({error.kind}): {error}",
                        _elapsed(started),
                    )
                    self.step(StepKind.TOOL_CYCLE, call, result, reply.text, started)
                    if retried_answer:
                        return self.finish(
                            Outcome.BACKEND_ERROR,
                            {"kind": "malformed_response", "retriable": False, "detail": str(error)},
                        )
                    retried_answer = True
                    self.transcript.append(ChatMessage("assistant", reply.text, tool_call=call))
                    self.transcript.append(ChatMessage("tool", result.rendered, tool_call_id=call.call_id))
                    self.transcript.append(
                        ChatMessage("user", self.prompt(self.config.final_retry_template, error=str(error)))
                    )
                    continue

            if cycles >= self.config.max_tool_cycles:
                self.step(StepKind.TOOL_CYCLE, call, None, reply.text, started)
                return self.finish(Outcome.STEP_CAP_REACHED)
            cycles += 1
            result = dispatch(call, self.chart)
            self.step(StepKind.TOOL_CYCLE, call, result, reply.text, started)
            self.transcript.append(ChatMessage("assistant", reply.text, tool_call=call))
            self.transcript.append(ChatMessage("tool", result.rendered, tool_call_id=call.call_id))
        return self.finish(Outcome.STEP_CAP_REACHED)

    def answer(self, call, text, started):
        errors = validate(call)
        if errors:
            raise FinalAnswerError("; ".join(error.message for error in errors))
        result = attach_regions(parse_final_answer(call.arguments["answer"], self.chart), self.region_map)
        tool_result = ToolResult(
            call.call_id,
            "ok",
            {"nodes": result.nodes},
            ", ".join(result.nodes) or "(none)",
            _elapsed(started),
        )
        self.step(StepKind.FINAL, call, tool_result, text, started)
        self.trace.result = result
        return self.finish(Outcome.ANSWERED)


def run_episode(chart, labeled_image, statement, region_map, config, backend, sample_id=""):
    """Run one attribution episode and return its trace. Backend failures end up in the trace."""
    if not chart.nodes:
        raise ValueError("Cannot attribute over an empty chart.")
    return _Episode(chart, labeled_image, statement, region_map, config, backend, sample_id).run()


def run_som_baseline(chart, labeled_image, statement, region_map, config, backend, sample_id=""):
    """
    Set-of-Marks baseline: a single request with the labeled image, answered
    through final_answer without any graph tool.
    """
    episode = _Episode(chart, labeled_image, statement, region_map, config, backend, sample_id)
    episode.trace.mode = "som"
    episode.schemas = (get_tool(FINAL_ANSWER).to_schema(),)
    episode.transcript = [ChatMessage("user", episode.prompt(config.som_template), image=labeled_image)]
    started = time.perf_counter()
    try:
        reply = episode.request(episode.schemas)
    except BackendError as error:
        return episode.finish(Outcome.BACKEND_ERROR, error.to_json())
    if reply.tool_call is None or reply.tool_call.tool != FINAL_ANSWER:
        episode.step(StepKind.FINAL, model_text=reply.text, started=started)
        return episode.finish(
            Outcome.BACKEND_ERROR,
            {"kind": "malformed_response", "retriable": False, "detail": "no final_answer call"},
        )
    call = ToolCall(FINAL_ANSWER, reply.tool_call.arguments, "call-0")
    try:
        return episode.answer(call, reply.text, started)
    except FinalAnswerError as error:
        episode.step(StepKind.FINAL, call, None, reply.text, started)
        return episode.finish(
            Outcome.BACKEND_ERROR,
            {"kind": "malformed_response", "retriable": False, "detail": str(error)},
        )


def extract_mermaid(text):
    match = MERMAID_FENCE_RE.search(text or "")
    return (match.group(1) if match else text or "").strip()


def transcribe_mermaid(backend, image, config=None):
    """Ask the backend to transcribe a chart image; returns (chart, diagnostics, source)."""
    config = config or AgentConfig()
    prompt = render_prompt(config.transcribe_template, {})
    reply = backend.chat(ChatRequest((ChatMessage("user", prompt, image=image),), (), dict(config.decoding)))
    source = extract_mermaid(reply.text)
    chart, diagnostics = parse_mermaid(source, mode=RECOVER)
    return chart, diagnostics, source
