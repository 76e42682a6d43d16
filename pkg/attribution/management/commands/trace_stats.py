from pathlib import Path

from django.core.management.base import BaseCommand

from attribution.choices import SCHEMA_VERSION
from attribution.dataset import DatasetError, load_dataset
from attribution.management.utils import EXIT_IO, fail, write_output
from attribution.runner import load_traces
from attribution.stats import trace_stats


class Command(BaseCommand):
    help = "Summarise tool usage over a directory of agent traces."

    def add_arguments(self, parser):
        parser.add_argument("--traces", required=True, help="Directory of trace JSON files.")
        parser.add_argument("--dataset", help="Dataset the traces belong to; enables durations by chart size.")
        parser.add_argument("--out", help="Write the statistics JSON here instead of stdout.")

    def handle(self, *args, **options):
        if not Path(options["traces"]).is_dir():
            raise fail(f"{options['traces']} is not a directory.", EXIT_IO)
        try:
            traces = load_traces(options["traces"])
        except (OSError, ValueError, KeyError) as error:
            raise fail(f"Cannot read traces: {error}", EXIT_IO) from error
        node_counts = None
        if options["dataset"]:
            try:
                node_counts = {sample.id: sample.node_count for sample in load_dataset(options["dataset"])}
            except (OSError, DatasetError) as error:
                raise fail(f"{options['dataset']}: {error}", EXIT_IO) from error
        write_output(self, {"schema_version": SCHEMA_VERSION, **trace_stats(traces, node_counts)}, options["out"])
