"""Ledger for both coding passes and the count structures metrics consume.

Phase 1: recorded clips are condensed by researchers into distinct
expressions and then into expression categories; this module stores those
assignments and counts proposals per (referent, category). Phase 2: free-text
interpretations are open-coded into labels, labels into groups, and a
researcher-authored match table says which groups count as fitting a
(category, referent) pair. The coding itself is human work; everything here
is storage and arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable, Mapping, Sequence

from .motion import MotionClip
from .taxonomy import TaxonomyLabel, label_from_dict, label_to_dict

CODES_SCHEMA = "codes/1"


class CodingError(ValueError):
    pass


@dataclass(frozen=True)
class DistinctExpression:
    id: str
    description: str


@dataclass(frozen=True)
class ExpressionCategory:
    id: str
    description: str
    member_distinct_ids: tuple[str, ...]
    origin_referents: frozenset[str]
    taxonomy: TaxonomyLabel

    def __post_init__(self) -> None:
        if not self.member_distinct_ids:
            raise CodingError(f"category {self.id}: no member expressions")
        if not self.origin_referents:
            raise CodingError(f"category {self.id}: no origin referents")


@dataclass(frozen=True)
class ClipAssignment:
    clip_id: str
    distinct_id: str


@dataclass(frozen=True)
class CodeBook:
    distinct_expressions: tuple[DistinctExpression, ...]
    categories: tuple[ExpressionCategory, ...]
    assignments: tuple[ClipAssignment, ...]

    def __post_init__(self) -> None:
        distinct_ids = {d.id for d in self.distinct_expressions}
        if len(distinct_ids) != len(self.distinct_expressions):
            raise CodingError("duplicate distinct expression ids")
        owners: dict[str, str] = {}
        for cat in self.categories:
            for did in cat.member_distinct_ids:
                if did not in distinct_ids:
                    raise CodingError(
                        f"category {cat.id} references unknown distinct {did}"
                    )
                if did in owners:
                    raise CodingError(
                        f"distinct {did} belongs to both {owners[did]} and {cat.id}"
                    )
                owners[did] = cat.id
        seen_clips: set[str] = set()
        for a in self.assignments:
            if a.distinct_id not in distinct_ids:
                raise CodingError(
                    f"assignment of clip {a.clip_id} references unknown "
                    f"distinct {a.distinct_id}"
                )
            if a.clip_id in seen_clips:
                raise CodingError(f"clip {a.clip_id} assigned more than once")
            seen_clips.add(a.clip_id)

    def category_of_distinct(self) -> dict[str, str]:
        owners: dict[str, str] = {}
        for cat in self.categories:
            for did in cat.member_distinct_ids:
                owners[did] = cat.id
        return owners

    def category_of_clip(self) -> dict[str, str]:
        owners = self.category_of_distinct()
        out: dict[str, str] = {}
        for a in self.assignments:
            if a.distinct_id in owners:
                out[a.clip_id] = owners[a.distinct_id]
        return out


@dataclass(frozen=True)
class ResponseLabeling:
    """Open-coded labels for one verification response; multi-label allowed."""

    response_id: str
    labels: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.labels:
            raise CodingError(
                f"response {self.response_id}: a labeling needs >= 1 label"
            )


@dataclass(frozen=True)
class LabelGroup:
    group_id: str
    theme: str
    member_labels: frozenset[str]


@dataclass(frozen=True)
class MatchTable:
    """(category, referent) -> label groups counted as fitting the intent."""

    entries: Mapping[tuple[str, str], frozenset[str]]

    def matching_groups(self, category_id: str, referent_id: str) -> frozenset[str]:
        return self.entries.get((category_id, referent_id), frozenset())


def group_lookup(groups: Iterable[LabelGroup]) -> dict[str, str]:
    """Map label text -> group id; a label may belong to only one group."""
    lookup: dict[str, str] = {}
    for group in groups:
        for label in group.member_labels:
            if label in lookup and lookup[label] != group.group_id:
                raise CodingError(
                    f"label '{label}' is in both '{lookup[label]}' "
                    f"and '{group.group_id}'"
                )
            lookup[label] = group.group_id
    return lookup


def proposal_counts(
    codebook: CodeBook, clips: Sequence[MotionClip]
) -> dict[str, dict[str, int]]:
    """Per referent, how many clips were coded into each expression category.

    Every clip must be assigned; a clip's referent is its provenance.
    """
    clip_category = codebook.category_of_clip()
    counts: dict[str, dict[str, int]] = {}
    for clip in clips:
        category = clip_category.get(clip.id)
        if category is None:
            raise CodingError(f"clip {clip.id} has no codebook assignment")
        per_ref = counts.setdefault(clip.provenance, {})
        per_ref[category] = per_ref.get(category, 0) + 1
    return counts


def count_matches(
    category_id: str,
    referent_id: str,
    labelings: Sequence[ResponseLabeling],
    groups: Sequence[LabelGroup],
    match_table: MatchTable,
) -> tuple[int, int]:
    """Count labels fitting / not fitting the referent's intended meaning.

    Returns (c_plus, c_minus) over all labels of the given responses. A label
    fits iff its group is in the match table for (category, referent).
    """
    lookup = group_lookup(groups)
    fitting = match_table.matching_groups(category_id, referent_id)
    c_plus = 0
    c_minus = 0
    for labeling in labelings:
        for label in labeling.labels:
            group = lookup.get(label)
            if group is None:
                raise CodingError(
                    f"label '{label}' (response {labeling.response_id}) "
                    "is not in any group"
                )
            if group in fitting:
                c_plus += 1
            else:
                c_minus += 1
    return c_plus, c_minus


def merge_categories(
    codebook: CodeBook, keep_id: str, absorb_id: str
) -> CodeBook:
    """Fold one category into another; per-referent counts add up."""
    by_id = {c.id: c for c in codebook.categories}
    if keep_id not in by_id or absorb_id not in by_id:
        raise CodingError("both categories must exist to merge")
    if keep_id == absorb_id:
        raise CodingError("cannot merge a category into itself")
    keep, absorb = by_id[keep_id], by_id[absorb_id]
    merged = replace(
        keep,
        member_distinct_ids=keep.member_distinct_ids + absorb.member_distinct_ids,
        origin_referents=keep.origin_referents | absorb.origin_referents,
    )
    categories = tuple(
        merged if c.id == keep_id else c
        for c in codebook.categories
        if c.id != absorb_id
    )
    return replace(codebook, categories=categories)


# --- serialization ------------------------------------------------------------


def codebook_bundle_to_dict(
    codebook: CodeBook,
    groups: Sequence[LabelGroup],
    match_table: MatchTable,
) -> dict:
    return {
        "schema": CODES_SCHEMA,
        "distinct_expressions": [
            {"id": d.id, "description": d.description}
            for d in codebook.distinct_expressions
        ],
        "categories": [
            {
                "id": c.id,
                "description": c.description,
                "member_distinct_ids": list(c.member_distinct_ids),
                "origin_referents": sorted(c.origin_referents),
                "taxonomy": label_to_dict(c.taxonomy),
            }
            for c in codebook.categories
        ],
        "assignments": [
            {"clip_id": a.clip_id, "distinct_id": a.distinct_id}
            for a in codebook.assignments
        ],
        "label_groups": [
            {
                "group_id": g.group_id,
                "theme": g.theme,
                "member_labels": sorted(g.member_labels),
            }
            for g in groups
        ],
        "match_table": [
            {
                "category_id": cat,
                "referent_id": ref,
                "group_ids": sorted(gids),
            }
            for (cat, ref), gids in sorted(match_table.entries.items())
        ],
    }


def codebook_bundle_from_dict(
    data: dict,
) -> tuple[CodeBook, list[LabelGroup], MatchTable]:
    if data.get("schema") != CODES_SCHEMA:
        raise CodingError(
            f"expected schema '{CODES_SCHEMA}', got {data.get('schema')!r}"
        )
    codebook = CodeBook(
        distinct_expressions=tuple(
            DistinctExpression(id=d["id"], description=d["description"])
            for d in data["distinct_expressions"]
        ),
        categories=tuple(
            ExpressionCategory(
                id=c["id"],
                description=c["description"],
                member_distinct_ids=tuple(c["member_distinct_ids"]),
                origin_referents=frozenset(c["origin_referents"]),
                taxonomy=label_from_dict(c["taxonomy"]),
            )
            for c in data["categories"]
        ),
        assignments=tuple(
            ClipAssignment(clip_id=a["clip_id"], distinct_id=a["distinct_id"])
            for a in data["assignments"]
        ),
    )
    groups = [
        LabelGroup(
            group_id=g["group_id"],
            theme=g["theme"],
            member_labels=frozenset(g["member_labels"]),
        )
        for g in data["label_groups"]
    ]
    group_lookup(groups)  # enforce one-group-per-label
    match_table = MatchTable(
        entries={
            (e["category_id"], e["referent_id"]): frozenset(e["group_ids"])
            for e in data["match_table"]
        }
    )
    return codebook, groups, match_table
