"""
Parser and serializer for the Mermaid flowchart subset used by the benchmark.

Accepted grammar, one statement per line::

    flowchart TD                  header (``graph`` also accepted; TD TB LR RL BT)
    A[text]  A{text}  A(text)  A([text])
    A --> B
    A -->|Label| B[text]
    %% comment

Node text holding a closing bracket must be double-quoted; Mermaid entity
codes such as ``#quot;`` are unescaped. Subgraphs, style directives and
chained edges are outside the grammar. In ``recover`` mode lines that cannot
be parsed are skipped, chained edges are split and undeclared labels become
``unknown`` nodes; each touched line yields exactly one warning.

Nodes enter the chart in order of first declaration, inline declarations
inside edges included. A bare label used before its declaration takes the
declaration's place; undeclared labels kept by ``recover`` take the place of
their first mention. The serializer writes declarations up front in that
order, so a round trip keeps it.
"""
import html
import logging
import re
from dataclasses import dataclass, field

from .choices import NodeShape
from .flowchart import Condition, FlowChart, NO, YES

logger = logging.getLogger(__name__)

STRICT = "strict"
RECOVER = "recover"
MODES = (STRICT, RECOVER)

HEADER_RE = re.compile(r"^(flowchart|graph)\s+(TD|TB|LR|RL|BT)\s*;?$")
HEADER_KEYWORD_RE = re.compile(r"^(flowchart|graph)\b")
IDENT_RE = re.compile(r"[A-Za-z0-9_]+")
ENTITY_RE = re.compile(r"#(\w+);")

# longest opener first so "([" wins over "("
SHAPES = (
    ("([", "])", NodeShape.STADIUM),
    ("[", "]", NodeShape.RECTANGLE),
    ("{", "}", NodeShape.DIAMOND),
    ("(", ")", NodeShape.ROUNDED),
)
BRACKETS = {shape: (opener, closer) for opener, closer, shape in SHAPES}


class MermaidError(Exception):
    kind = "mermaid_error"


class MermaidSyntaxError(MermaidError):
    kind = "syntax_error"

    def __init__(self, line, column, message):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column
        self.message = message

    @property
    def diagnostic(self):
        return ParseDiagnostic(self.line, "error", f"column {self.column}: {self.message}", False)


class EmptyDiagramError(MermaidError):
    kind = "empty_chart"


@dataclass(frozen=True)
class ParseDiagnostic:
    line: int
    severity: str
    message: str
    recovered: bool = False

    def to_json(self):
        return {
            "line": self.line,
            "severity": self.severity,
            "message": self.message,
            "recovered": self.recovered,
        }


@dataclass
class NodeToken:
    label: str
    text: str = None
    shape: str = None
    column: int = 1

    @property
    def declares(self):
        return self.shape is not None


@dataclass
class MermaidStatement:
    line: int
    nodes: list
    conditions: list = field(default_factory=list)

    @property
    def links(self):
        for index, condition in enumerate(self.conditions):
            yield self.nodes[index], self.nodes[index + 1], condition


@dataclass
class MermaidDocument:
    keyword: str
    direction: str
    statements: list
    raw: str


def unescape(text):
    def replace(match):
        name = match.group(1)
        if name.isdigit():
            return chr(int(name))
        decoded = html.unescape(f"&{name};")
        return match.group(0) if decoded == f"&{name};" else decoded

    return ENTITY_RE.sub(replace, text)


def escape(text):
    return text.replace("#", "#35;").replace('"', "#quot;")


class _LineScanner:
    def __init__(self, text, line):
        self.text = text
        self.line = line
        self.pos = 0

    def fail(self, message):
        raise MermaidSyntaxError(self.line, self.pos + 1, message)

    def skip_spaces(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def node(self):
        self.skip_spaces()
        match = IDENT_RE.match(self.text, self.pos)
        if not match:
            self.fail("expected a node label")
        token = NodeToken(match.group(0), column=self.pos + 1)
        self.pos = match.end()
        for opener, closer, shape in SHAPES:
            if self.text.startswith(opener, self.pos):
                self.pos += len(opener)
                token.text = self._shape_text(closer)
                token.shape = shape
                break
        return token

    def _shape_text(self, closer):
        if self.text.startswith('"', self.pos):
            end = self.text.find('"', self.pos + 1)
            if end < 0:
                self.fail("unterminated quoted text")
            content = self.text[self.pos + 1:end]
            self.pos = end + 1
            self.skip_spaces()
            if not self.text.startswith(closer, self.pos):
                self.fail(f"expected {closer!r} after quoted text")
        else:
            end = self.text.find(closer, self.pos)
            if end < 0:
                self.fail(f"missing closing {closer!r}")
            content = self.text[self.pos:end]
            self.pos = end
        self.pos += len(closer)
        content = unescape(content.strip())
        if not content:
            self.fail("node text is empty")
        return content

    def arrow(self):
        self.skip_spaces()
        if not self.text.startswith("-->", self.pos):
            return None
        self.pos += 3
        self.skip_spaces()
        if not self.text.startswith("|", self.pos):
            return Condition.from_label("")
        self.pos += 1
        if self.text.startswith('"', self.pos):
            end = self.text.find('"', self.pos + 1)
            if end < 0:
                self.fail("unterminated quoted edge label")
            label = self.text[self.pos + 1:end]
            self.pos = end + 1
            if not self.text.startswith("|", self.pos):
                self.fail("expected '|' after quoted edge label")
        else:
            end = self.text.find("|", self.pos)
            if end < 0:
                self.fail("unterminated edge label")
            label = self.text[self.pos:end]
            self.pos = end
        self.pos += 1
        return Condition.from_label(unescape(label))

    def statement(self):
        nodes = [self.node()]
        conditions = []
        while True:
            condition = self.arrow()
            if condition is None:
                break
            conditions.append(condition)
            nodes.append(self.node())
        self.skip_spaces()
        if self.text.startswith(";", self.pos):
            self.pos += 1
            self.skip_spaces()
        if self.pos < len(self.text):
            self.fail(f"unexpected text {self.text[self.pos:self.pos + 12]!r}")
        return MermaidStatement(self.line, nodes, conditions)


class _Parser:
    def __init__(self, mode):
        if mode not in MODES:
            raise ValueError(f"Unknown parse mode {mode!r}.")
        self.mode = mode
        self.notes = {}

    @property
    def strict(self):
        return self.mode == STRICT

    def repair(self, line, column, message):
        if self.strict:
            raise MermaidSyntaxError(line, column, message)
        self.notes.setdefault(line, []).append(message)

    def skip(self, error):
        if self.strict:
            raise error
        self.notes.setdefault(error.line, []).append(f"skipped line: {error}")

    def diagnostics(self):
        # one warning per touched line, its messages joined
        return [
            ParseDiagnostic(line, "warning", "; ".join(messages), True)
            for line, messages in sorted(self.notes.items())
        ]

    def document(self, source):
        keyword, direction = None, None
        statements = []
        for number, raw_line in enumerate(source.splitlines(), start=1):
            text = raw_line.strip()
            if not text or text.startswith("%%"):
                continue
            header = HEADER_RE.match(text)
            if header or HEADER_KEYWORD_RE.match(text):
                if keyword is None and header:
                    keyword, direction = header.groups()
                elif keyword is None:
                    self.skip(MermaidSyntaxError(number, 1, f"malformed header {text!r}"))
                    keyword, direction = "flowchart", "TD"
                else:
                    self.skip(MermaidSyntaxError(number, 1, "header repeated"))
                continue
            if keyword is None:
                self.repair(number, 1, "missing flowchart header; assumed 'flowchart TD'")
                keyword, direction = "flowchart", "TD"
            try:
                statement = _LineScanner(text, number).statement()
            except MermaidSyntaxError as error:
                self.skip(error)
                continue
            if len(statement.nodes) > 2:
                self.repair(number, 1, f"chained edge split into {len(statement.conditions)} edges")
            statements.append(statement)
        if keyword is None:
            raise EmptyDiagramError("No flowchart header or statements found.")
        return MermaidDocument(keyword, direction, statements, source)

    def chart(self, document):
        declared = {}
        declared_at = {}
        mentioned = {}
        for statement in document.statements:
            for token in statement.nodes:
                mentioned.setdefault(token.label, (statement.line, token.column))
                if not token.declares:
                    continue
                previous = declared.get(token.label)
                if previous is None:
                    declared[token.label] = token
                    declared_at[token.label] = (statement.line, token.column)
                elif (previous.text, previous.shape) != (token.text, token.shape):
                    self.repair(
                        statement.line,
                        token.column,
                        f"conflicting redeclaration of {token.label} ignored",
                    )

        chart = FlowChart(direction=document.direction)
        # declared nodes by first declaration, undeclared ones by first mention
        order = sorted(mentioned, key=lambda label: declared_at.get(label, mentioned[label]))
        for label in order:
            line, column = mentioned[label]
            token = declared.get(label)
            if token is None:
                self.repair(line, column, f"undeclared node {label} added with unknown shape")
                chart.add_node(label, "", NodeShape.UNKNOWN)
            else:
                chart.add_node(label, token.text, token.shape)

        for statement in document.statements:
            for source, target, condition in statement.links:
                if (source.label, target.label, condition) in chart._edge_keys:
                    self.repair(
                        statement.line,
                        target.column,
                        f"duplicate edge {source.label} -> {target.label} skipped",
                    )
                    continue
                chart.add_edge(source.label, target.label, condition)
        if not chart.nodes:
            raise EmptyDiagramError("The flowchart declares no nodes.")
        return chart.freeze()


def parse_document(source, mode=STRICT):
    if not source or not source.strip():
        raise EmptyDiagramError("Mermaid source is empty.")
    parser = _Parser(mode)
    return parser.document(source), parser.diagnostics()


def parse_mermaid(source, mode=STRICT):
    """Parse Mermaid source into a frozen FlowChart plus parse diagnostics."""
    if not source or not source.strip():
        raise EmptyDiagramError("Mermaid source is empty.")
    parser = _Parser(mode)
    document = parser.document(source)
    chart = parser.chart(document)
    diagnostics = parser.diagnostics()
    for diagnostic in diagnostics:
        logger.debug("mermaid line %s: %s", diagnostic.line, diagnostic.message)
    return chart, diagnostics


def _declaration(node):
    if node.shape not in BRACKETS:
        return node.label
    opener, closer = BRACKETS[node.shape]
    return f'{node.label}{opener}"{escape(node.statement)}"{closer}'


def _edge_line(edge):
    if edge.condition == YES:
        arrow = "-->|Yes|"
    elif edge.condition == NO:
        arrow = "-->|No|"
    elif edge.condition.is_unconditional:
        arrow = "-->"
    else:
        arrow = f'-->|"{escape(edge.condition.text)}"|'
    return f"{edge.source} {arrow} {edge.target}"


def serialize_mermaid(chart):
    """Canonical Mermaid: header, declarations in insertion order, then edges."""
    lines = [f"flowchart {chart.direction}"]
    lines.extend(f"    {_declaration(node)}" for node in chart.nodes.values())
    lines.extend(f"    {_edge_line(edge)}" for edge in chart.edges())
    return "\n".join(lines) + "\n"
