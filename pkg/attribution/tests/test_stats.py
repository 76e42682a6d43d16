from django.test import SimpleTestCase

from attribution.agent import AgentStep, AgentTrace
from attribution.choices import Outcome, StepKind
from attribution.dataset import QASample
from attribution.stats import dataset_stats, trace_stats
from attribution.tools import ToolCall, ToolResult

from .fixtures import g1_sample_json


def make_trace(sample_id, tools, durations=None, question_type="fact_retrieval", outcome=Outcome.ANSWERED):
    durations = durations or [1.0] * len(tools)
    steps = [AgentStep(0, StepKind.PLANNING, model_text="plan")]
    for position, (tool, duration) in enumerate(zip(tools, durations), start=1):
        call_id = f"call-{position}"
        kind = StepKind.FINAL if tool == "final_answer" else StepKind.TOOL_CYCLE
        result = ToolResult(call_id, "ok", None, "", duration)
        steps.append(AgentStep(position, kind, ToolCall(tool, {}, call_id), result))
    return AgentTrace(sample_id, question_type, [], steps, outcome)


class TraceStatsTests(SimpleTestCase):
    def test_single_trace(self):
        stats = trace_stats([make_trace("s1", ["get_statement", "final_answer"])])
        self.assertEqual(stats["episodes"], 1)
        self.assertEqual(stats["step_tool_frequency"], {"1": {"get_statement": 1}, "2": {"final_answer": 1}})
        self.assertEqual(stats["sankey_links"], [{"source": "1:get_statement", "target": "2:final_answer", "value": 1}])
        self.assertEqual(stats["calls_per_episode"], {"2": 1})
        self.assertEqual(stats["tools_by_question_type"]["fact_retrieval"], {"final_answer": 1, "get_statement": 1})

    def test_empty(self):
        stats = trace_stats([])
        self.assertEqual(stats["episodes"], 0)
        self.assertEqual(stats["step_tool_frequency"], {})
        self.assertEqual(stats["sankey_links"], [])
        self.assertEqual(stats["tool_durations_ms"], {})
        self.assertEqual(stats["outcomes"], {"answered": 0, "step_cap_reached": 0, "backend_error": 0})
        self.assertTrue(all(not counts for counts in stats["tools_by_question_type"].values()))

    def test_step_tool_matrix(self):
        traces = [make_trace(f"s{index}", ["bfs", "shortest_path", "final_answer"]) for index in range(3)]
        traces += [make_trace(f"t{index}", ["get_statement", "bfs", "final_answer"]) for index in range(7)]
        stats = trace_stats(traces)
        self.assertEqual(stats["step_tool_frequency"]["2"], {"bfs": 7, "shortest_path": 3})
        self.assertEqual(stats["step_tool_frequency"]["1"], {"bfs": 3, "get_statement": 7})
        links = {(link["source"], link["target"]): link["value"] for link in stats["sankey_links"]}
        self.assertEqual(links[("1:bfs", "2:shortest_path")], 3)
        self.assertEqual(links[("2:bfs", "3:final_answer")], 7)

    def test_durations(self):
        traces = [
            make_trace("s1", ["get_statement", "final_answer"], [1.0, 10.0]),
            make_trace("s2", ["get_statement", "get_statement", "final_answer"], [3.0, 2.0, 20.0]),
        ]
        stats = trace_stats(traces, node_counts={"s1": 5, "s2": 25})
        self.assertEqual(stats["tool_durations_ms"]["get_statement"], {"count": 3, "min": 1.0, "median": 2.0, "max": 3.0})
        self.assertEqual(stats["step_durations_ms"]["1"], {"count": 2, "min": 1.0, "median": 2.0, "max": 3.0})
        self.assertEqual(stats["node_bin_durations_ms"]["1-10"]["count"], 2)
        self.assertEqual(stats["node_bin_durations_ms"]["21-30"]["max"], 20.0)
        self.assertEqual(stats["node_bin_durations_ms"]["41+"]["count"], 0)

    def test_capped_call_has_no_duration(self):
        trace = make_trace("s1", ["bfs"], outcome=Outcome.STEP_CAP_REACHED)
        trace.steps[-1].result = None
        stats = trace_stats([trace])
        self.assertEqual(stats["step_tool_frequency"], {"1": {"bfs": 1}})
        self.assertEqual(stats["tool_durations_ms"], {})
        self.assertEqual(stats["outcomes"]["step_cap_reached"], 1)


class DatasetStatsTests(SimpleTestCase):
    def test_empty(self):
        stats = dataset_stats([])
        self.assertEqual(stats["overall"]["questions"], 0)
        self.assertEqual(stats["overall"]["avg_nodes"], 0.0)
        self.assertEqual(stats["splits"], {})
        self.assertEqual(set(stats["node_distribution"].values()), {0})

    def test_tables(self):
        samples = [
            QASample.from_json(g1_sample_json(id="s1")),
            QASample.from_json(g1_sample_json(id="s2", gt_nodes=["B"], question_type="topological", answer="2")),
            QASample.from_json(g1_sample_json(id="s3", split="wiki", gt_nodes=["A", "B"])),
        ]
        stats = dataset_stats(samples)
        overall = stats["overall"]
        self.assertEqual((overall["questions"], overall["flowcharts"]), (3, 1))
        self.assertEqual(overall["question_types"]["fact_retrieval"], 2)
        self.assertEqual(overall["question_types"]["topological"], 1)
        self.assertEqual((overall["avg_nodes"], overall["max_nodes"]), (5.0, 5))
        self.assertEqual((overall["avg_attributed_path_length"], overall["max_attributed_path_length"]), (2.0, 3))
        self.assertEqual(overall["avg_question_words"], 6.0)
        self.assertEqual(overall["avg_answer_words"], round(5 / 3, 2))
        self.assertEqual(sorted(stats["splits"]), ["code", "wiki"])
        self.assertEqual(stats["splits"]["code"]["questions"], 2)
        self.assertEqual(stats["node_distribution"]["1-10"], 3)
