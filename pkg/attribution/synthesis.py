"""
Seeded synthesis of flowcharts and templated statements for desk-built datasets.
"""
import string

from .agent import Statement
from .choices import NodeShape, QuestionType
from .flowchart import FlowChart, NO, UNCONDITIONAL, YES

ACTIONS = (
    "Read", "Validate", "Store", "Send", "Compute", "Update", "Log", "Notify",
    "Load", "Check", "Archive", "Print", "Merge", "Sort", "Reject", "Approve",
)
OBJECTS = (
    "the order", "the invoice", "user input", "the record", "the report", "the payment",
    "the request", "sensor data", "the ticket", "the file", "the total", "the account",
)
QUESTIONS = (
    "Is {} valid?", "Is {} complete?", "Does {} exist?", "Is {} above the limit?",
    "Was {} approved?", "Is {} empty?",
)

DIAMOND_RATE = 0.3
LOOP_RATE = 0.15


def label_sequence(count):
    """A, B, ..., Z, AA, AB, ... as used by the red node overlays."""
    labels = []
    index = 0
    while len(labels) < count:
        value, label = index, ""
        while True:
            value, remainder = divmod(value, 26)
            label = string.ascii_uppercase[remainder] + label
            if value == 0:
                break
            value -= 1
        labels.append(label)
        index += 1
    return labels


def _statement(rng, used, decision):
    for _ in range(50):
        subject = rng.choice(OBJECTS)
        text = rng.choice(QUESTIONS).format(subject) if decision else f"{rng.choice(ACTIONS)} {subject}"
        if text not in used:
            break
    else:
        text = f"{text} ({len(used)})"
    used.add(text)
    return text[0].upper() + text[1:]


def random_flowchart(rng, n_nodes):
    """
    A process-shaped chart: Start, a main sequence of steps and decisions, End.
    Decisions continue on Yes and jump forward (or occasionally back) on No.
    """
    if n_nodes < 1:
        raise ValueError("A flowchart needs at least one node.")
    labels = label_sequence(n_nodes)
    chart = FlowChart()
    used = set()
    shapes = []
    for index, label in enumerate(labels):
        if index == 0:
            chart.add_node(label, "Start", NodeShape.STADIUM)
        elif index == n_nodes - 1:
            chart.add_node(label, "End", NodeShape.STADIUM)
        else:
            decision = index < n_nodes - 2 and rng.random() < DIAMOND_RATE
            shape = NodeShape.DIAMOND if decision else rng.choice((NodeShape.RECTANGLE, NodeShape.RECTANGLE, NodeShape.ROUNDED))
            chart.add_node(label, _statement(rng, used, decision), shape)
        shapes.append(chart.nodes[label].shape)

    for index in range(n_nodes - 1):
        source = labels[index]
        if shapes[index] != NodeShape.DIAMOND:
            chart.add_edge(source, labels[index + 1], UNCONDITIONAL)
            continue
        chart.add_edge(source, labels[index + 1], YES)
        if index >= 1 and rng.random() < LOOP_RATE:
            target = labels[rng.randrange(1, index + 1)]
        else:
            target = labels[rng.randrange(index + 2, n_nodes)]
        chart.add_edge(source, target, NO)
    return chart.freeze()


def _quote(chart, label):
    return f'"{chart.get_statement(label)}"'


def _fact(chart, rng):
    candidates = [label for label, node in chart.nodes.items() if node.edges]
    if not candidates:
        label = next(iter(chart.nodes))
        statement = Statement(f"What does {label} say?", chart.get_statement(label), QuestionType.FACT_RETRIEVAL)
        return statement, [label]
    source = rng.choice(candidates)
    target = chart.nodes[source].edges[0].target
    return (
        Statement(
            f"What step follows {_quote(chart, source)}?",
            chart.get_statement(target),
            QuestionType.FACT_RETRIEVAL,
        ),
        [source, target],
    )


def _scenario(chart, rng):
    decisions = [label for label, node in chart.nodes.items() if node.shape == NodeShape.DIAMOND]
    if decisions:
        decision = rng.choice(decisions)
        branch = rng.choice(chart.nodes[decision].edges)
        choice = branch.condition.describe() or "Yes"
        return (
            Statement(
                f"If the answer to {_quote(chart, decision)} is {choice}, what happens next?",
                chart.get_statement(branch.target),
                QuestionType.APPLIED_SCENARIO,
            ),
            [decision, branch.target],
        )
    start = chart.default_start()
    target = rng.choice(list(chart.nodes))
    path = chart.shortest_path(start, target)
    nodes = [ref.label for ref in path] if path else [start]
    return (
        Statement(
            f"Which steps are taken from {_quote(chart, start)} to reach {_quote(chart, nodes[-1])}?",
            ", then ".join(chart.get_statement(label) for label in nodes),
            QuestionType.APPLIED_SCENARIO,
        ),
        nodes,
    )


def _referential(chart, rng):
    candidates = [label for label in chart.nodes if chart.in_degree(label)]
    if not candidates:
        return _fact(chart, rng)
    target = rng.choice(candidates)
    source = chart.get_ancestors(target, levels=1)[0].label
    return (
        Statement(
            f"What comes immediately before {_quote(chart, target)}?",
            chart.get_statement(source),
            QuestionType.FLOW_REFERENTIAL,
        ),
        [source, target],
    )


def _topological(chart, rng):
    label, degree = chart.max_out_degree()[0]
    neighbours = [neighbour.label for neighbour in chart.get_neighbours(label)]
    return (
        Statement(
            f"How many outgoing branches does {_quote(chart, label)} have?",
            str(degree),
            QuestionType.TOPOLOGICAL,
        ),
        [label] + [neighbour for neighbour in neighbours if neighbour != label],
    )


BUILDERS = {
    QuestionType.FACT_RETRIEVAL: _fact,
    QuestionType.APPLIED_SCENARIO: _scenario,
    QuestionType.FLOW_REFERENTIAL: _referential,
    QuestionType.TOPOLOGICAL: _topological,
}


def synthesize_statement(chart, rng, question_type):
    """Templated question/answer about a chart and its ground-truth nodes."""
    builder = BUILDERS.get(question_type)
    if builder is None:
        raise ValueError(f"Unknown question type {question_type!r}.")
    statement, gt_nodes = builder(chart, rng)
    unique = []
    for label in gt_nodes:
        if label not in unique:
            unique.append(label)
    return statement, unique
