import json

from django import forms
from django.core.exceptions import ValidationError


class ConditionsField(forms.Field):
    """Map of decision node -> "Yes"/"No". Booleans and JSON strings are accepted."""

    default_error_messages = {
        "invalid": "Enter a mapping of node IDs to Yes or No.",
        "invalid_value": "Condition for %(node)s must be Yes or No.",
    }

    def to_python(self, value):
        if value in self.empty_values:
            return {}
        if isinstance(value, str):
            try:
                value = json.loads(value)
            except json.JSONDecodeError:
                raise ValidationError(self.error_messages["invalid"], code="invalid")
        if not isinstance(value, dict):
            raise ValidationError(self.error_messages["invalid"], code="invalid")
        cleaned = {}
        for node, choice in value.items():
            if isinstance(choice, bool):
                cleaned[str(node)] = "Yes" if choice else "No"
            elif isinstance(choice, str) and choice.strip().lower() in ("yes", "no"):
                cleaned[str(node)] = choice.strip().capitalize()
            else:
                raise ValidationError(
                    self.error_messages["invalid_value"],
                    code="invalid",
                    params={"node": node},
                )
        return cleaned


class FlagField(forms.BooleanField):
    """Boolean argument: true/false, yes/no or 1/0 in any case. Other strings are rejected."""

    widget = forms.TextInput
    default_error_messages = {
        "invalid": "Enter true or false (yes or no also accepted).",
    }
    true_values = ("true", "yes", "1")
    false_values = ("false", "no", "0")

    def to_python(self, value):
        if value in self.empty_values:
            return False
        if isinstance(value, bool):
            return value
        if isinstance(value, int) and value in (0, 1):
            return bool(value)
        if isinstance(value, str):
            text = value.strip().lower()
            if text in self.true_values:
                return True
            if text in self.false_values:
                return False
        raise ValidationError(self.error_messages["invalid"], code="invalid")


class AnyJSONField(forms.Field):
    """Passes any JSON value through; only an absent value counts as missing."""

    def to_python(self, value):
        return value

    def validate(self, value):
        if value is None and self.required:
            raise ValidationError(self.error_messages["required"], code="required")


class ToolForm(forms.Form):
    """
    Base form for tool arguments. Subclasses declare one field per argument,
    with the argument description as help_text.
    """

    def __init__(self, arguments=None):
        self.raw_arguments = {key: value for key, value in (arguments or {}).items() if value is not None}
        super().__init__(data=self.raw_arguments)
        self.warnings = []

    def clean(self):
        cleaned = super().clean()
        for name, field in self.fields.items():
            raw = self.raw_arguments.get(name)
            if isinstance(field, forms.IntegerField) and isinstance(raw, str) and name in cleaned:
                self.warnings.append(f"{name} coerced from string {raw!r} to integer.")
        return cleaned


class NodeForm(ToolForm):
    node_id = forms.CharField(help_text="Identifier of the node.")


class NodeStatementsForm(NodeForm):
    include_statements = FlagField(
        required=False,
        help_text="If True, includes statements. Defaults to False.",
    )


class LevelsForm(NodeStatementsForm):
    levels = forms.IntegerField(
        required=False,
        min_value=1,
        help_text="Maximum levels to traverse.",
    )

    field_order = ["node_id", "levels", "include_statements"]


class EmptyForm(ToolForm):
    pass


class TraversalForm(ToolForm):
    start_id = forms.CharField(required=False, help_text="Identifier of the node.")
    conditions = ConditionsField(required=False, help_text="Dictionary of edge conditions.")
    include_statements = FlagField(
        required=False,
        help_text="If True, includes statements. Defaults to False.",
    )

    def clean_start_id(self):
        return self.cleaned_data.get("start_id") or None


class PathForm(ToolForm):
    start_id = forms.CharField(help_text="Start node.")
    end_id = forms.CharField(help_text="End node.")
    conditions = ConditionsField(required=False, help_text="Edge conditions.")
    include_statements = FlagField(
        required=False,
        help_text="If True, includes statements. Defaults to False.",
    )


class FinalAnswerForm(ToolForm):
    answer = AnyJSONField(help_text="The final answer.")
