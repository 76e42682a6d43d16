from django.core.management.base import BaseCommand

from attribution.choices import SCHEMA_VERSION
from attribution.management.utils import EXIT_IO, fail, read_text, write_diagnostics, write_output
from attribution.mermaid import RECOVER, STRICT, MermaidError, parse_mermaid


class Command(BaseCommand):
    help = "Parse a Mermaid flowchart and print its canonical graph JSON."

    def add_arguments(self, parser):
        parser.add_argument("input", help="Mermaid source file (.mmd).")
        mode = parser.add_mutually_exclusive_group()
        mode.add_argument("--strict", dest="mode", action="store_const", const=STRICT, help="Fail on the first malformed line (default).")
        mode.add_argument("--recover", dest="mode", action="store_const", const=RECOVER, help="Repair or skip malformed lines with warnings.")
        parser.set_defaults(mode=STRICT)
        parser.add_argument("--out", help="Write the graph JSON here instead of stdout.")

    def handle(self, *args, **options):
        source = read_text(options["input"])
        try:
            chart, diagnostics = parse_mermaid(source, mode=options["mode"])
        except MermaidError as error:
            raise fail(f"{options['input']}: {error}", EXIT_IO) from error
        write_diagnostics(self.stderr, diagnostics)
        data = {"schema_version": SCHEMA_VERSION, "direction": chart.direction, **chart.to_json()}
        write_output(self, data, options["out"])
