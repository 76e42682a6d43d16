from django.core.management.base import BaseCommand

from attribution.choices import SCHEMA_VERSION
from attribution.dataset import DatasetError, load_dataset
from attribution.management.utils import EXIT_IO, fail, write_output
from attribution.stats import dataset_stats


class Command(BaseCommand):
    help = "Print split and question-type statistics of a dataset."

    def add_arguments(self, parser):
        parser.add_argument("--dataset", required=True, help="Dataset JSON Lines file.")
        parser.add_argument("--out", help="Write the statistics JSON here instead of stdout.")

    def handle(self, *args, **options):
        try:
            samples = load_dataset(options["dataset"])
        except (OSError, DatasetError) as error:
            raise fail(f"{options['dataset']}: {error}", EXIT_IO) from error
        write_output(self, {"schema_version": SCHEMA_VERSION, **dataset_stats(samples)}, options["out"])
