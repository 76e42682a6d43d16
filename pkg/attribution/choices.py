from django.db import models


class NodeShape(models.TextChoices):
    RECTANGLE = "rectangle", "Rectangle"
    DIAMOND = "diamond", "Diamond"
    ROUNDED = "rounded", "Rounded"
    STADIUM = "stadium", "Stadium"
    UNKNOWN = "unknown", "Unknown"


class ConditionKind(models.TextChoices):
    YES = "yes", "Yes"
    NO = "no", "No"
    UNCONDITIONAL = "unconditional", "Unconditional"
    OTHER = "other", "Other"


class QuestionType(models.TextChoices):
    FACT_RETRIEVAL = "fact_retrieval", "Fact Retrieval"
    APPLIED_SCENARIO = "applied_scenario", "Applied Scenario"
    FLOW_REFERENTIAL = "flow_referential", "Flow Referential"
    TOPOLOGICAL = "topological", "Topological"


class Split(models.TextChoices):
    CODE = "code", "Code"
    WIKI = "wiki", "Wiki"
    INSTRUCT = "instruct", "Instruct"
    CUSTOM = "custom", "Custom"


class StyleFamily(models.TextChoices):
    SINGLE_COLOR = "single_color", "Single Color"
    MULTI_COLOR = "multi_color", "Multi Color"
    DEFAULT = "default", "Default Mermaid"
    BLACK_WHITE = "black_white", "Black and White"


class RegionShape(models.TextChoices):
    RECT = "rect", "Rectangle"
    DIAMOND = "diamond", "Diamond"
    ROUNDED = "rounded", "Rounded"
    STADIUM = "stadium", "Stadium"


class StepKind(models.TextChoices):
    PLANNING = "planning", "Planning"
    TOOL_CYCLE = "tool_cycle", "Tool cycle"
    FINAL = "final", "Final"


class Outcome(models.TextChoices):
    ANSWERED = "answered", "Answered"
    STEP_CAP_REACHED = "step_cap_reached", "Step cap reached"
    BACKEND_ERROR = "backend_error", "Backend error"


SCHEMA_VERSION = 1
