from pathlib import Path

from django.core.management.base import BaseCommand

from attribution.dataset import DatasetError, GeometryError, load_dataset, read_jsonl
from attribution.evaluation import DEFAULT_THRESHOLD, EvaluationError, PredictionRecord, score
from attribution.management.utils import EXIT_IO, EXIT_USAGE, fail, write_output


def load_predictions(path):
    records = []
    for number, data in read_jsonl(path):
        try:
            records.append(PredictionRecord.from_json(data))
        except EvaluationError as error:
            raise DatasetError(str(error), number) from None
    return records


class Command(BaseCommand):
    help = "Score predictions against a dataset with micro-averaged precision, recall and F1."

    def add_arguments(self, parser):
        parser.add_argument("--dataset", required=True, help="Dataset JSON Lines file.")
        parser.add_argument("--preds", required=True, help="Predictions JSON Lines file.")
        parser.add_argument("--iou", type=float, default=DEFAULT_THRESHOLD, help="IoU threshold for region predictions.")
        parser.add_argument("--report", help="Write the JSON report here instead of stdout.")
        parser.add_argument("--csv", help="Also write the summary table as CSV.")

    def handle(self, *args, **options):
        if not 0 < options["iou"] <= 1:
            raise fail("--iou must lie in (0, 1].", EXIT_USAGE)
        try:
            samples = load_dataset(options["dataset"])
            predictions = load_predictions(options["preds"])
            report = score(predictions, samples, options["iou"])
        except (OSError, DatasetError, EvaluationError, GeometryError) as error:
            raise fail(str(error), EXIT_IO) from error

        write_output(self, report.to_json(), options["report"])
        if options["csv"]:
            try:
                Path(options["csv"]).write_text(report.to_csv(), encoding="utf-8")
            except OSError as error:
                raise fail(f"Cannot write {options['csv']}: {error}", EXIT_IO) from error
        if options["report"]:
            overall = report.overall.to_json()
            self.stdout.write(f"P {overall['precision']:.2f}  R {overall['recall']:.2f}  F1 {overall['f1']:.2f}")
