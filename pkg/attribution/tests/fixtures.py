from attribution.choices import NodeShape
from attribution.flowchart import NO, UNCONDITIONAL, YES, FlowChart

G1_SOURCE = """flowchart TD
    A[Start] --> B{"Is x > 0?"}
    B -->|Yes| C[Print positive]
    B -->|No| D[Print non-positive]
    C --> E([End])
    D --> E
"""


def build_g1():
    chart = FlowChart()
    chart.add_node("A", "Start", NodeShape.RECTANGLE)
    chart.add_node("B", "Is x > 0?", NodeShape.DIAMOND)
    chart.add_node("C", "Print positive", NodeShape.RECTANGLE)
    chart.add_node("D", "Print non-positive", NodeShape.RECTANGLE)
    chart.add_node("E", "End", NodeShape.STADIUM)
    chart.add_edge("A", "B", UNCONDITIONAL)
    chart.add_edge("B", "C", YES)
    chart.add_edge("B", "D", NO)
    chart.add_edge("C", "E", UNCONDITIONAL)
    chart.add_edge("D", "E", UNCONDITIONAL)
    return chart.freeze()


def g1_sample_json(**overrides):
    data = {
        "schema_version": 1,
        "id": "g1-fact",
        "mermaid": G1_SOURCE,
        "question": "What is printed when x is 5?",
        "answer": "Print positive",
        "question_type": "fact_retrieval",
        "split": "code",
        "style": "default",
        "gt_nodes": ["A", "B", "C"],
        "regions": None,
    }
    data.update(overrides)
    return data
