import json
import random
from pathlib import Path

from django.core.exceptions import ImproperlyConfigured
from django.core.management.base import BaseCommand

from attribution.agent import Statement
from attribution.choices import QuestionType, Split, StyleFamily
from attribution.conf import get_run_config
from attribution.dataset import DatasetError, assemble_sample, dump_dataset
from attribution.management.utils import EXIT_IO, EXIT_USAGE, fail, read_text
from attribution.mermaid import STRICT, MermaidError, parse_mermaid
from attribution.synthesis import random_flowchart, synthesize_statement

MIN_RANDOM_NODES = 5
MAX_RANDOM_NODES = 44


def mermaid_sources(path):
    path = Path(path)
    if path.is_dir():
        return sorted(path.glob("*.mmd"))
    if path.exists():
        return [path]
    raise fail(f"{path} does not exist.", EXIT_IO)


def sidecar_statements(source):
    """Statements from <name>.json next to <name>.mmd: one object or a list of them."""
    sidecar = source.with_suffix(".json")
    if not sidecar.exists():
        return None
    try:
        data = json.loads(read_text(sidecar))
        entries = data if isinstance(data, list) else [data]
        return [
            (
                Statement(entry["question"], entry["answer"], entry.get("question_type", QuestionType.FACT_RETRIEVAL)),
                list(entry["gt_nodes"]),
                entry.get("split"),
            )
            for entry in entries
        ]
    except (ValueError, KeyError, TypeError) as error:
        raise fail(f"{sidecar}: invalid statement sidecar ({error})", EXIT_IO) from error


class Command(BaseCommand):
    help = "Render flowcharts to SVG and write benchmark samples as JSON Lines."

    def add_arguments(self, parser):
        source = parser.add_mutually_exclusive_group(required=True)
        source.add_argument("--mermaid", help="A .mmd file or a directory of them; <name>.json holds statements.")
        source.add_argument("--random", type=int, metavar="N", help="Synthesize N random charts and questions.")
        parser.add_argument("--style", choices=StyleFamily.values, help="Style family (default: configured style).")
        parser.add_argument("--seed", type=int, help="Seed for colours and synthesis (default: configured seed).")
        parser.add_argument("--split", choices=Split.values, default=Split.CUSTOM, help="Split recorded on the samples.")
        parser.add_argument("--out", required=True, help="Output directory for SVGs and dataset.jsonl.")
        parser.add_argument("--no-overlay", action="store_true", help="Render without the red node labels.")

    def handle(self, *args, **options):
        try:
            config = get_run_config({"style": options["style"], "seed": options["seed"]})
        except ImproperlyConfigured as error:
            raise fail(str(error), EXIT_USAGE) from error
        if config.style not in StyleFamily.values:
            raise fail(f"Unknown style {config.style!r}.", EXIT_USAGE)
        self.out = Path(options["out"])
        self.overlay = not options["no_overlay"]
        self.style_fixed = options["style"] is not None
        rng = random.Random(config.seed)

        if options["random"] is not None:
            if options["random"] < 1:
                raise fail("--random needs a positive count.", EXIT_USAGE)
            samples = self.random_samples(options["random"], rng, config, options["split"])
        else:
            samples = self.file_samples(options["mermaid"], rng, config, options["split"])

        dump_dataset(samples, self.out / "dataset.jsonl")
        self.stdout.write(f"Wrote {len(samples)} samples to {self.out / 'dataset.jsonl'}.")

    def assemble(self, chart, statement, gt_nodes, style, seed, split):
        try:
            return assemble_sample(chart, statement, gt_nodes, style, seed, split, self.out, self.overlay)
        except DatasetError as error:
            raise fail(str(error), EXIT_IO) from error
        except OSError as error:
            raise fail(f"Cannot write into {self.out}: {error}", EXIT_IO) from error

    def file_samples(self, path, rng, config, split):
        samples = []
        for source in mermaid_sources(path):
            try:
                chart, _ = parse_mermaid(read_text(source), mode=STRICT)
            except MermaidError as error:
                raise fail(f"{source}: {error}", EXIT_IO) from error
            statements = sidecar_statements(source)
            if statements is None:
                question_type = rng.choice(QuestionType.values)
                statement, gt_nodes = synthesize_statement(chart, rng, question_type)
                statements = [(statement, gt_nodes, None)]
            for statement, gt_nodes, sample_split in statements:
                samples.append(self.assemble(chart, statement, gt_nodes, config.style, config.seed, sample_split or split))
        return samples

    def random_samples(self, count, rng, config, split):
        samples = []
        for index in range(count):
            chart = random_flowchart(rng, rng.randint(MIN_RANDOM_NODES, MAX_RANDOM_NODES))
            question_type = QuestionType.values[index % len(QuestionType.values)]
            statement, gt_nodes = synthesize_statement(chart, rng, question_type)
            style = config.style if self.style_fixed else rng.choice(StyleFamily.values)
            samples.append(self.assemble(chart, statement, gt_nodes, style, config.seed + index, split))
        return samples
