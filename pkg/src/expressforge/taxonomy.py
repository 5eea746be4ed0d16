"""Six-dimension description of a coded expression, plus category counts.

Assigning a label is a human coding act; this module only validates labels
against the closed category sets and aggregates them into per-dimension
proportions. A dynamic movement carries a free-text direction (e.g. "toward
the object") since direction only makes sense relative to the expression's
target.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Sequence

CATEGORIES: dict[str, tuple[str, ...]] = {
    "speed": ("slow", "normal", "fast"),
    "complexity": ("single", "compound"),
    "flow": ("continuous", "discrete", "combined"),
    "binding": ("environment", "object", "person"),
    "dynamics": ("dynamic", "static"),
    "focus": ("focused", "unfocused"),
}

DIMENSIONS = tuple(CATEGORIES)


class TaxonomyError(ValueError):
    pass


@dataclass(frozen=True)
class TaxonomyLabel:
    speed: str
    complexity: str
    flow: str
    binding: str
    dynamics: str
    focus: str
    # Required (non-empty) when dynamics == "dynamic".
    dynamics_direction: str = ""

    def category(self, dimension: str) -> str:
        return getattr(self, dimension)


def validate_label(label: TaxonomyLabel) -> list[str]:
    """Return violations against the closed category sets; empty if valid."""
    problems = []
    for dim in DIMENSIONS:
        value = label.category(dim)
        if value not in CATEGORIES[dim]:
            problems.append(
                f"{dim}: '{value}' not in {list(CATEGORIES[dim])}"
            )
    if label.dynamics == "dynamic" and not label.dynamics_direction:
        problems.append("dynamics: dynamic requires a direction")
    if label.dynamics == "static" and label.dynamics_direction:
        problems.append("dynamics: static must not carry a direction")
    return problems


def check_label(label: TaxonomyLabel) -> TaxonomyLabel:
    problems = validate_label(label)
    if problems:
        raise TaxonomyError("; ".join(problems))
    return label


def distribution(
    labels: Sequence[TaxonomyLabel],
) -> dict[str, dict[str, float]]:
    """Per-dimension proportions over categories; each dimension sums to 1."""
    if not labels:
        raise TaxonomyError("cannot compute a distribution of zero labels")
    for label in labels:
        check_label(label)
    result: dict[str, dict[str, float]] = {}
    total = len(labels)
    for dim in DIMENSIONS:
        counts = Counter(label.category(dim) for label in labels)
        result[dim] = {cat: counts[cat] / total for cat in counts}
    return result


def label_to_dict(label: TaxonomyLabel) -> dict:
    data = {dim: label.category(dim) for dim in DIMENSIONS}
    if label.dynamics == "dynamic":
        data["dynamics_direction"] = label.dynamics_direction
    return data


def label_from_dict(data: dict) -> TaxonomyLabel:
    return check_label(
        TaxonomyLabel(
            speed=data["speed"],
            complexity=data["complexity"],
            flow=data["flow"],
            binding=data["binding"],
            dynamics=data["dynamics"],
            focus=data["focus"],
            dynamics_direction=data.get("dynamics_direction", ""),
        )
    )
