from django.test import SimpleTestCase

from attribution.agent import (
    AgentConfig,
    AgentTrace,
    FinalAnswerError,
    Statement,
    mentioned_labels,
    parse_final_answer,
    run_episode,
    run_som_baseline,
    transcribe_mermaid,
)
from attribution.backends import ImageAttachment, ReplayBackend, ScriptedBackend
from attribution.choices import Outcome, StepKind
from attribution.dataset import Region, RegionMap
from attribution.flowchart import FlowChart

from .fixtures import build_g1

IMAGE = ImageAttachment("image/svg+xml", "PHN2Zz48L3N2Zz4=")
STATEMENT = Statement("What is printed when x is 5?", "Print positive", "fact_retrieval")


def tool(name, **arguments):
    return {"tool": name, "arguments": arguments}


def final(*nodes, reasoning="follows the Yes branch"):
    return tool("final_answer", answer={"nodes": list(nodes), "reasoning": reasoning})


def without_durations(data):
    data = dict(data)
    data["steps"] = [
        {key: value for key, value in step.items() if key not in ("duration_ms", "tool_duration_ms")}
        for step in data["steps"]
    ]
    return data


class EpisodeTests(SimpleTestCase):
    def setUp(self):
        self.chart = build_g1()
        self.regions = RegionMap(
            {label: Region(label, "rect", (index * 200.0, 0.0, 160.0, 48.0)) for index, label in enumerate("ABCDE")},
            (1000, 100),
        )

    def episode(self, script, config=None, region_map=None):
        backend = ScriptedBackend(script)
        trace = run_episode(self.chart, IMAGE, STATEMENT, region_map, config or AgentConfig(), backend, "g1")
        return trace, backend

    def test_answered_episode(self):
        trace, backend = self.episode(
            [
                "Explore A, B and C: B decides the sign.",
                tool("get_statement", node_id="B"),
                tool("shortest_path", start_id="A", end_id="C"),
                final("A", "B", "C"),
            ],
            region_map=self.regions,
        )
        self.assertEqual(trace.outcome, Outcome.ANSWERED)
        self.assertEqual(trace.planned_nodes, ["A", "B", "C"])
        self.assertEqual([step.kind for step in trace.steps], ["planning", "tool_cycle", "tool_cycle", "final"])
        self.assertEqual(trace.steps[1].result.payload, "Is x > 0?")
        self.assertEqual(trace.steps[2].result.payload, ["A", "B", "C"])
        self.assertEqual(trace.result.nodes, ["A", "B", "C"])
        self.assertEqual(trace.result.edges, [("A", "B"), ("B", "C")])
        self.assertEqual([region.label for region in trace.result.regions], ["A", "B", "C"])
        self.assertEqual(len(backend.requests), 4)

    def test_image_only_in_planning_request(self):
        _, backend = self.episode(["plan", tool("bfs"), final("A")])
        self.assertEqual([request.has_image for request in backend.requests], [True, False, False])
        self.assertEqual(backend.requests[0].tools, ())

    def test_call_ids_match_results(self):
        trace, _ = self.episode(["plan", tool("bfs"), tool("in_degree", node_id="E"), final("E")])
        for step in trace.tool_steps:
            self.assertEqual(step.call.call_id, f"call-{step.index}")
            self.assertEqual(step.result.call_id, step.call.call_id)

    def test_tool_transcript_reaches_backend(self):
        _, backend = self.episode(["plan", tool("in_degree", node_id="E"), final("E")])
        last = backend.requests[-1].messages
        self.assertEqual((last[-1].role, last[-1].text, last[-1].tool_call_id), ("tool", "2", "call-1"))
        self.assertEqual(last[-2].tool_call.tool, "in_degree")

    def test_step_cap(self):
        config = AgentConfig(max_tool_cycles=2)
        trace, backend = self.episode(["plan", tool("bfs"), tool("dfs"), tool("bfs"), final("A")], config)
        self.assertEqual(trace.outcome, Outcome.STEP_CAP_REACHED)
        self.assertIsNone(trace.result)
        self.assertEqual(len([step for step in trace.tool_steps if step.result is not None]), 2)
        self.assertLessEqual(len(backend.requests), config.max_tool_cycles + 2)

    def test_default_cap_is_eight(self):
        trace, backend = self.episode(["plan"] + [tool("bfs")] * 12)
        self.assertEqual(trace.outcome, Outcome.STEP_CAP_REACHED)
        self.assertEqual(len([step for step in trace.tool_steps if step.result is not None]), 8)
        self.assertEqual(len(backend.requests), 10)

    def test_narration_gets_one_correction(self):
        trace, backend = self.episode(["plan", "I believe the answer is at C.", tool("bfs"), final("C")])
        self.assertEqual(trace.outcome, Outcome.ANSWERED)
        corrective = backend.requests[2].messages[-1]
        self.assertEqual(corrective.role, "user")
        self.assertIn("final_answer", corrective.text)

    def test_repeated_narration_fails(self):
        trace, _ = self.episode(["plan", "thinking", "still thinking"])
        self.assertEqual(trace.outcome, Outcome.BACKEND_ERROR)
        self.assertEqual(trace.error["kind"], "malformed_response")

    def test_invalid_arguments_consume_a_cycle(self):
        trace, _ = self.episode(["plan", tool("get_ancestors", node_id="E", levels=0), final("E")])
        self.assertEqual(trace.steps[1].result.status, "error")
        self.assertEqual(trace.steps[1].result.payload["kind"], "invalid_arguments")
        self.assertEqual(trace.outcome, Outcome.ANSWERED)

    def test_graph_errors_are_observations(self):
        trace, _ = self.episode(["plan", tool("get_statement", node_id="Q"), final("A")])
        self.assertEqual(trace.steps[1].result.payload["kind"], "unknown_node")
        self.assertEqual(trace.outcome, Outcome.ANSWERED)

    def test_unparseable_final_answer_is_retried_once(self):
        trace, _ = self.episode(["plan", tool("final_answer", answer=42), final("B")])
        self.assertEqual(trace.outcome, Outcome.ANSWERED)
        self.assertEqual(trace.steps[1].result.payload["kind"], "invalid_answer")
        trace, _ = self.episode(["plan", tool("final_answer", answer=42), tool("final_answer", answer="nope")])
        self.assertEqual(trace.outcome, Outcome.BACKEND_ERROR)

    def test_backend_failure_is_traced(self):
        trace, _ = self.episode(["plan", tool("bfs")])
        self.assertEqual(trace.outcome, Outcome.BACKEND_ERROR)
        self.assertEqual(trace.error["kind"], "transport")

    def test_unknown_answer_labels_are_dropped(self):
        trace, _ = self.episode(["plan", final("A", "Q", "B")])
        self.assertEqual(trace.result.nodes, ["A", "B"])
        self.assertIn("Q", trace.result.reasoning)

    def test_replay_is_deterministic(self):
        script = ["Look at B.", "narrating", tool("get_neighbours", node_id="B"), final("A", "B", "C")]
        first, _ = self.episode(script)
        replayed = run_episode(self.chart, IMAGE, STATEMENT, None, AgentConfig(), ReplayBackend.from_trace(first), "g1")
        self.assertEqual(without_durations(replayed.to_json()), without_durations(first.to_json()))
        again, _ = self.episode(script)
        self.assertEqual(without_durations(again.to_json()), without_durations(first.to_json()))

    def test_trace_json(self):
        trace, _ = self.episode(["plan", tool("bfs"), final("A")])
        data = trace.to_json()
        self.assertEqual(data["schema_version"], 1)
        self.assertEqual(data["steps"][1]["tool"], "bfs")
        self.assertEqual(data["steps"][1]["rendered"], "A, B, C, D, E")
        self.assertEqual(AgentTrace.from_json(data).to_json(), data)

    def test_empty_chart(self):
        with self.assertRaises(ValueError):
            run_episode(FlowChart(), None, STATEMENT, None, AgentConfig(), ScriptedBackend([]))


class SetOfMarksTests(SimpleTestCase):
    def test_single_request(self):
        backend = ScriptedBackend([tool("final_answer", answer=["A", "B", "C"])])
        trace = run_som_baseline(build_g1(), IMAGE, STATEMENT, None, AgentConfig(), backend, "g1")
        self.assertEqual(trace.mode, "som")
        self.assertEqual(trace.outcome, Outcome.ANSWERED)
        self.assertEqual([(step.index, step.kind) for step in trace.steps], [(0, StepKind.FINAL)])
        self.assertEqual(len(backend.requests), 1)
        self.assertTrue(backend.requests[0].has_image)
        self.assertEqual(backend.requests[0].tool_names, ["final_answer"])

    def test_reply_without_answer(self):
        backend = ScriptedBackend(["I cannot tell."])
        trace = run_som_baseline(build_g1(), IMAGE, STATEMENT, None, AgentConfig(), backend, "g1")
        self.assertEqual(trace.outcome, Outcome.BACKEND_ERROR)


class FinalAnswerParsingTests(SimpleTestCase):
    def setUp(self):
        self.chart = build_g1()

    def test_nodes_and_edges(self):
        result = parse_final_answer({"nodes": ["A", "B", "D"], "reasoning": "took No branch"}, self.chart)
        self.assertEqual(result.nodes, ["A", "B", "D"])
        self.assertEqual(result.edges, [("A", "B"), ("B", "D")])
        self.assertEqual(result.reasoning, "took No branch")

    def test_bare_list(self):
        result = parse_final_answer(["E"], self.chart)
        self.assertEqual((result.nodes, result.edges), (["E"], []))

    def test_json_string(self):
        self.assertEqual(parse_final_answer('{"nodes": ["C", "E"]}', self.chart).edges, [("C", "E")])

    def test_no_labels(self):
        with self.assertRaises(FinalAnswerError):
            parse_final_answer({"answer": 42}, self.chart)
        with self.assertRaises(FinalAnswerError):
            parse_final_answer(42, self.chart)

    def test_non_consecutive_pairs_have_no_edge(self):
        result = parse_final_answer(["A", "C", "C", "E"], self.chart)
        self.assertEqual(result.nodes, ["A", "C", "E"])
        self.assertEqual(result.edges, [("C", "E")])

    def test_mentioned_labels(self):
        self.assertEqual(mentioned_labels("Check B first, then A and B again; X is absent.", self.chart), ["B", "A"])


class TranscriptionTests(SimpleTestCase):
    def test_fenced_mermaid(self):
        backend = ScriptedBackend(["Here it is:\n```mermaid\nflowchart LR\nA[Start] --> B{Done?}\n```"])
        chart, diagnostics, source = transcribe_mermaid(backend, IMAGE)
        self.assertEqual(list(chart.nodes), ["A", "B"])
        self.assertEqual(chart.direction, "LR")
        self.assertEqual(diagnostics, [])
        self.assertTrue(source.startswith("flowchart LR"))
        self.assertTrue(backend.requests[0].has_image)
