import json
from pathlib import Path

from django.core.management.base import BaseCommand

from attribution.flowchart import FlowChart, FlowChartError
from attribution.management.utils import EXIT_IO, EXIT_USAGE, fail, read_text, write_diagnostics, write_output
from attribution.mermaid import RECOVER, MermaidError, parse_mermaid
from attribution.tools import ToolCall, dispatch, list_tools, validate


def load_graph(path, stderr=None):
    """A chart from Mermaid source, or from the graph JSON written by parse_mermaid (.json)."""
    text = read_text(path)
    if Path(path).suffix.lower() == ".json":
        try:
            data = json.loads(text)
            return FlowChart.from_json(data, direction=data.get("direction", "TD")).freeze()
        except (ValueError, KeyError, TypeError, FlowChartError) as error:
            raise fail(f"{path}: not a graph document ({error})", EXIT_IO) from error
    try:
        chart, diagnostics = parse_mermaid(text, mode=RECOVER)
    except MermaidError as error:
        raise fail(f"{path}: {error}", EXIT_IO) from error
    if stderr is not None:
        write_diagnostics(stderr, diagnostics)
    return chart


class Command(BaseCommand):
    help = "Run a single graph tool against a flowchart and print the ToolResult JSON."

    def add_arguments(self, parser):
        parser.add_argument("--graph", required=True, help="Mermaid file, or graph JSON from parse_mermaid.")
        parser.add_argument(
            "--name",
            required=True,
            help="Tool name: " + ", ".join(spec.name for spec in list_tools()) + ".",
        )
        parser.add_argument("--args", dest="tool_args", default="{}", help="JSON object with the tool arguments.")

    def handle(self, *args, **options):
        try:
            arguments = json.loads(options["tool_args"])
        except json.JSONDecodeError as error:
            raise fail(f"--args is not valid JSON: {error.msg}", EXIT_USAGE) from error
        if not isinstance(arguments, dict):
            raise fail("--args must be a JSON object.", EXIT_USAGE)

        call = ToolCall(options["name"], arguments, "cli-0")
        errors = validate(call)
        if errors:
            raise fail("; ".join(error.message for error in errors), EXIT_USAGE)

        chart = load_graph(options["graph"], self.stderr)
        result = dispatch(call, chart)
        if result.status == "error" and result.payload.get("kind") == "not_dispatchable":
            raise fail(result.payload["message"], EXIT_USAGE)
        write_output(self, result.to_json())
