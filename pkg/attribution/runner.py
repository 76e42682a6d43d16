"""
Batch attribution over a dataset: one trace file per sample, resumable by
sample id, and predictions rebuilt from every trace on disk.
"""
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from django.core.exceptions import ImproperlyConfigured

from .agent import AgentConfig, AgentTrace, run_episode, run_som_baseline
from .backends import ImageAttachment
from .choices import Outcome
from .dataset import write_jsonl
from .evaluation import PredictionRecord
from .mermaid import MermaidError

logger = logging.getLogger(__name__)

MODES = {"agent": run_episode, "som": run_som_baseline}


@dataclass
class BatchReport:
    processed: int = 0
    skipped: int = 0
    succeeded: int = 0
    failed: list = field(default_factory=list)
    misconfigured: list = field(default_factory=list)

    def to_json(self):
        return {
            "processed": self.processed,
            "skipped": self.skipped,
            "succeeded": self.succeeded,
            "failed": list(self.failed),
            "misconfigured": list(self.misconfigured),
        }


def trace_path(traces_dir, sample_id):
    return Path(traces_dir) / f"{sample_id}.json"


def load_image(sample, base_dir=None):
    if not sample.image_path:
        return None
    path = Path(sample.image_path)
    if not path.is_absolute() and base_dir is not None:
        path = Path(base_dir) / path
    return ImageAttachment.from_path(path)


def attribute_sample(sample, backend, config, mode="agent", base_dir=None):
    """Run one sample through the agent loop (or the SoM baseline) with a sample-bound backend."""
    runner = MODES[mode]
    return runner(
        sample.chart,
        load_image(sample, base_dir),
        sample.statement,
        sample.regions,
        config,
        backend.bind(sample),
        sample.id,
    )


def save_trace(trace, traces_dir):
    path = trace_path(traces_dir, trace.sample_id)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(trace.to_json(), indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    return path


def load_traces(traces_dir):
    traces = []
    for path in sorted(Path(traces_dir).glob("*.json")):
        traces.append(AgentTrace.from_json(json.loads(path.read_text(encoding="utf-8"))))
    return traces


def run_batch(samples, backend, config, traces_dir, mode="agent", concurrency=1, base_dir=None):
    """
    Attribute every sample without a trace on disk. Traces of backend failures
    are not written, so the next run retries those samples.
    """
    if mode not in MODES:
        raise ValueError(f"Unknown mode {mode!r}; choose from {', '.join(MODES)}.")
    if not isinstance(config, AgentConfig):
        raise TypeError("config must be an AgentConfig.")
    report = BatchReport()
    pending = []
    for sample in samples:
        if trace_path(traces_dir, sample.id).exists():
            report.skipped += 1
        else:
            pending.append(sample)
    logger.info("attributing %d samples (%d already traced)", len(pending), report.skipped)

    def work(sample):
        try:
            return sample, attribute_sample(sample, backend, config, mode, base_dir), None
        except (OSError, ValueError, MermaidError, ImproperlyConfigured) as error:
            return sample, None, error

    with ThreadPoolExecutor(max_workers=max(1, concurrency)) as executor:
        for sample, trace, error in executor.map(work, pending):
            report.processed += 1
            if error is not None:
                logger.error("sample %s failed: %s", sample.id, error)
                report.failed.append(sample.id)
                if isinstance(error, ImproperlyConfigured):
                    report.misconfigured.append(sample.id)
                continue
            if trace.outcome == Outcome.BACKEND_ERROR:
                logger.error("sample %s backend failure: %s", sample.id, (trace.error or {}).get("detail", ""))
                report.failed.append(sample.id)
                continue
            save_trace(trace, traces_dir)
            report.succeeded += 1
    return report


def predictions_from_traces(traces, sample_ids=None):
    records = []
    for trace in traces:
        if sample_ids is not None and trace.sample_id not in sample_ids:
            continue
        nodes = list(trace.result.nodes) if trace.result is not None else []
        records.append(PredictionRecord(trace.sample_id, pred_nodes=nodes))
    return records


def write_predictions(records, path):
    write_jsonl(path, (record.to_json() for record in records))
