"""
Descriptive statistics over agent traces and benchmark samples, emitted as plain
JSON-ready dictionaries for external plotting.
"""
import logging
import statistics
from collections import Counter, defaultdict

from .choices import Outcome, QuestionType, Split
from .evaluation import NODE_BUCKETS, node_bucket

logger = logging.getLogger(__name__)


def _bucket_names():
    return [f"{low}-{high}" for low, high in NODE_BUCKETS] + [f"{NODE_BUCKETS[-1][1] + 1}+"]


def _distribution(values):
    if not values:
        return {"count": 0, "min": 0.0, "median": 0.0, "max": 0.0}
    return {
        "count": len(values),
        "min": round(min(values), 3),
        "median": round(statistics.median(values), 3),
        "max": round(max(values), 3),
    }


def trace_stats(traces, node_counts=None):
    """
    Tool usage across episodes. Steps are numbered from 1 over the steps that
    carry a tool call, so the matrix reads as "which tool was used at step n".
    ``node_counts`` (sample id -> chart size) enables the per-bin durations.
    """
    node_counts = node_counts or {}
    frequency = defaultdict(Counter)
    links = Counter()
    durations = defaultdict(list)
    by_step = defaultdict(list)
    by_bin = defaultdict(list)
    by_question_type = defaultdict(Counter)
    calls_per_episode = Counter()
    outcomes = Counter({outcome: 0 for outcome in Outcome.values})

    for trace in traces:
        outcomes[str(trace.outcome)] += 1
        calls = trace.tool_steps
        calls_per_episode[len(calls)] += 1
        bin_name = node_bucket(node_counts[trace.sample_id]) if trace.sample_id in node_counts else None
        previous = None
        for position, step in enumerate(calls, start=1):
            tool = step.call.tool
            frequency[position][tool] += 1
            if trace.question_type:
                by_question_type[trace.question_type][tool] += 1
            if previous is not None:
                links[(f"{position - 1}:{previous}", f"{position}:{tool}")] += 1
            previous = tool
            if step.result is not None:
                durations[tool].append(step.result.duration_ms)
                by_step[position].append(step.result.duration_ms)
                if bin_name is not None:
                    by_bin[bin_name].append(step.result.duration_ms)

    return {
        "episodes": sum(outcomes.values()),
        "step_tool_frequency": {str(position): dict(sorted(counts.items())) for position, counts in sorted(frequency.items())},
        "sankey_links": [
            {"source": source, "target": target, "value": value} for (source, target), value in sorted(links.items())
        ],
        "tool_durations_ms": {tool: _distribution(values) for tool, values in sorted(durations.items())},
        "step_durations_ms": {str(position): _distribution(values) for position, values in sorted(by_step.items())},
        "node_bin_durations_ms": {name: _distribution(by_bin.get(name, [])) for name in _bucket_names()} if node_counts else {},
        "tools_by_question_type": {
            question_type: dict(sorted(by_question_type[question_type].items())) for question_type in QuestionType.values
        },
        "calls_per_episode": {str(count): episodes for count, episodes in sorted(calls_per_episode.items())},
        "outcomes": dict(outcomes),
    }


def _average(values):
    return round(sum(values) / len(values), 2) if values else 0.0


def _words(text):
    return len(str(text).split())


def _table(samples):
    node_sizes = [sample.node_count for sample in samples]
    path_lengths = [len(sample.gt_nodes) for sample in samples]
    types = Counter(sample.question_type for sample in samples)
    return {
        "questions": len(samples),
        "flowcharts": len({sample.mermaid for sample in samples}),
        "question_types": {question_type: types.get(question_type, 0) for question_type in QuestionType.values},
        "avg_nodes": _average(node_sizes),
        "max_nodes": max(node_sizes, default=0),
        "avg_attributed_path_length": _average(path_lengths),
        "max_attributed_path_length": max(path_lengths, default=0),
        "avg_question_words": _average([_words(sample.question) for sample in samples]),
        "avg_answer_words": _average([_words(sample.answer) for sample in samples]),
    }


def dataset_stats(samples):
    """Per-split and overall counts and averages of a benchmark, plus the node-count distribution."""
    samples = list(samples)
    splits = {split: [sample for sample in samples if sample.split == split] for split in Split.values}
    distribution = Counter(node_bucket(sample.node_count) for sample in samples)
    logger.debug("computing statistics over %d samples", len(samples))
    return {
        "overall": _table(samples),
        "splits": {split: _table(members) for split, members in splits.items() if members},
        "node_distribution": {name: distribution.get(name, 0) for name in _bucket_names()},
    }
