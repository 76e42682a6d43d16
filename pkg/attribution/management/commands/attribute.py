from pathlib import Path

from django.core.exceptions import ImproperlyConfigured
from django.core.management.base import BaseCommand

from attribution.agent import AgentConfig
from attribution.backends import load_backend
from attribution.conf import get_run_config
from attribution.dataset import DatasetError, load_dataset
from attribution.management.utils import EXIT_BACKEND, EXIT_IO, EXIT_USAGE, dumps, fail
from attribution.runner import MODES, load_traces, predictions_from_traces, run_batch, write_predictions


class Command(BaseCommand):
    help = "Attribute every sample of a dataset and write traces and predictions."

    def add_arguments(self, parser):
        parser.add_argument("--dataset", required=True, help="Dataset JSON Lines file.")
        parser.add_argument("--traces", required=True, help="Directory receiving one trace JSON per sample.")
        parser.add_argument("--preds", required=True, help="Predictions JSON Lines file to (re)write.")
        parser.add_argument("--backend", help="Backend name from FLOWATTR_BACKENDS.")
        parser.add_argument("--mode", choices=sorted(MODES), default="agent", help="Tool-using agent or the SoM baseline.")
        parser.add_argument("--max-steps", type=int, help="Tool cycle cap per episode (default 8).")
        parser.add_argument("--concurrency", type=int, help="Episodes run in parallel (default 1).")
        parser.add_argument("--config", help="JSON config file; defaults to $FLOWATTR_CONFIG.")

    def handle(self, *args, **options):
        overrides = {
            "backend": options["backend"],
            "max_steps": options["max_steps"],
            "episode_concurrency": options["concurrency"],
        }
        try:
            config = get_run_config(overrides, options["config"])
        except ImproperlyConfigured as error:
            raise fail(str(error), EXIT_USAGE) from error

        try:
            samples = load_dataset(options["dataset"])
        except (OSError, DatasetError) as error:
            raise fail(f"{options['dataset']}: {error}", EXIT_IO) from error

        try:
            backend = load_backend(config.backend, config)
        except (ImproperlyConfigured, ImportError) as error:
            raise fail(f"Backend {config.backend!r} is misconfigured: {error}", EXIT_BACKEND) from error

        report = run_batch(
            samples,
            backend,
            AgentConfig.from_run_config(config),
            options["traces"],
            mode=options["mode"],
            concurrency=config.episode_concurrency,
            base_dir=Path(options["dataset"]).resolve().parent,
        )
        try:
            traces = load_traces(options["traces"])
            write_predictions(predictions_from_traces(traces, {sample.id for sample in samples}), options["preds"])
        except (OSError, ValueError, KeyError) as error:
            raise fail(f"Cannot rebuild predictions: {error}", EXIT_IO) from error

        self.stderr.write(dumps(report.to_json()))
        if report.misconfigured:
            raise fail(
                f"Backend {config.backend!r} is misconfigured for {len(report.misconfigured)} samples: "
                + ", ".join(report.misconfigured),
                EXIT_USAGE,
            )
        if report.processed and not report.succeeded:
            raise fail(f"All {report.processed} samples failed.", EXIT_BACKEND)
        self.stdout.write(f"{report.succeeded} attributed, {report.skipped} resumed, {len(report.failed)} failed.")
