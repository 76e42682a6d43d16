from django import template

register = template.Library()


@register.filter
def svgnum(value):
    """Two decimals at most, trailing zeros dropped: 20.0 -> 20, 12.345 -> 12.35."""
    text = f"{float(value):.2f}".rstrip("0").rstrip(".")
    return "0" if text == "-0" else text


@register.filter
def points(value):
    return " ".join(f"{svgnum(x)},{svgnum(y)}" for x, y in value)
