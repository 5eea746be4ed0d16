"""Tabular report emitters: score tables, taxonomy distribution, battery stats.

Score tables put expression categories in columns; each column stacks
"Rk=pp" cells, one per referent the category arose from, with pp the score in
rounded percent. Percentages round half-to-even, the convention the study
tables follow. Output is CSV or Markdown; both are pure functions of their
inputs.
"""

from __future__ import annotations

import io
import csv
import statistics
from fractions import Fraction
from typing import Mapping, Sequence

from .coding import CodeBook, MatchTable, ResponseLabeling, count_matches
from .metrics import occurrence_score, qra
from .taxonomy import TaxonomyLabel, distribution
from .verification import (
    BatteryItem,
    VerificationResponse,
    reverse_transform,
)


def percent(value: Fraction | float) -> int:
    """Score as an integer percent, ties rounding to the even neighbor."""
    if isinstance(value, Fraction):
        scaled = value * 100
        floor = scaled.numerator // scaled.denominator
        rem = scaled - floor
        if rem > Fraction(1, 2):
            return floor + 1
        if rem < Fraction(1, 2):
            return floor
        return floor if floor % 2 == 0 else floor + 1
    return round(value * 100)


ScoreCells = dict[str, dict[str, Fraction]]  # category -> referent -> score


def os_cells(
    counts_by_referent: Mapping[str, Mapping[str, int]],
) -> ScoreCells:
    """Occurrence scores arranged for the table: category -> referent -> OS."""
    cells: ScoreCells = {}
    for referent in sorted(counts_by_referent):
        scores = occurrence_score(counts_by_referent[referent])
        for category, score in scores.items():
            cells.setdefault(category, {})[referent] = score
    return cells


def qra_cells(
    codebook: CodeBook,
    labelings_by_category: Mapping[str, Sequence[ResponseLabeling]],
    groups,
    match_table: MatchTable,
) -> ScoreCells:
    """Response accuracy per (category, origin referent) combination."""
    cells: ScoreCells = {}
    for category in codebook.categories:
        labelings = labelings_by_category.get(category.id, ())
        if not labelings:
            continue
        for referent in sorted(category.origin_referents):
            c_plus, c_minus = count_matches(
                category.id, referent, labelings, groups, match_table
            )
            cells.setdefault(category.id, {})[referent] = qra(c_plus, c_minus)
    return cells


def score_table_rows(
    cells: ScoreCells, metric_name: str
) -> tuple[list[str], list[list[str]]]:
    """Layout: header of category ids, then rows stacking 'Rk=pp' cells."""
    categories = sorted(cells)
    columns = {
        cat: [
            f"{ref}={percent(cells[cat][ref])}"
            for ref in sorted(cells[cat])
        ]
        for cat in categories
    }
    depth = max((len(col) for col in columns.values()), default=0)
    header = [metric_name] + categories
    rows = []
    for i in range(depth):
        row = [metric_name if i == 0 else ""]
        for cat in categories:
            col = columns[cat]
            row.append(col[i] if i < len(col) else "")
        rows.append(row)
    return header, rows


def render_csv(header: list[str], rows: list[list[str]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def render_markdown(header: list[str], rows: list[list[str]]) -> str:
    lines = [
        "| " + " | ".join(header) + " |",
        "| " + " | ".join("---" for _ in header) + " |",
    ]
    for row in rows:
        lines.append("| " + " | ".join(row) + " |")
    return "\n".join(lines) + "\n"


def os_table(
    counts_by_referent: Mapping[str, Mapping[str, int]], fmt: str = "csv"
) -> str:
    header, rows = score_table_rows(os_cells(counts_by_referent), "OS")
    return _render(header, rows, fmt)


def qra_table(cells: ScoreCells, fmt: str = "csv") -> str:
    header, rows = score_table_rows(cells, "QRA")
    return _render(header, rows, fmt)


def taxonomy_table(labels: Sequence[TaxonomyLabel], fmt: str = "csv") -> str:
    dist = distribution(labels)
    header = ["dimension", "category", "share_percent"]
    rows = [
        [dim, category, str(percent(share))]
        for dim, shares in dist.items()
        for category, share in sorted(shares.items())
    ]
    return _render(header, rows, fmt)


def battery_table(
    battery: Sequence[BatteryItem],
    responses: Sequence[VerificationResponse],
    fmt: str = "csv",
) -> str:
    """Median of each battery item per category, reversed items transformed."""
    by_category: dict[str, list[tuple[int, ...]]] = {}
    for response in responses:
        by_category.setdefault(response.category_id, []).append(
            reverse_transform(battery, response.vas)
        )
    header = ["category"] + [item.text for item in battery]
    rows = []
    for category in sorted(by_category):
        values = by_category[category]
        medians = [
            statistics.median(row[i] for row in values)
            for i in range(len(battery))
        ]
        rows.append([category] + [f"{m:g}" for m in medians])
    return _render(header, rows, fmt)


def _render(header: list[str], rows: list[list[str]], fmt: str) -> str:
    if fmt == "csv":
        return render_csv(header, rows)
    if fmt in ("md", "markdown"):
        return render_markdown(header, rows)
    raise ValueError(f"unknown table format '{fmt}' (use csv or md)")
