"""Deterministic demo bundle: a fully worked two-phase study.

Proposal counts are k-of-16 per referent (16 participants each proposing one
expression per referent) and are pinned by the reference occurrence-score
table below; response labels per expression are synthetic sets whose match
counts land exactly on the reference accuracy table. Everything is generated
from fixed seeds, so the bundle doubles as regression data for the analysis
pipeline.
"""

from __future__ import annotations

import random
from fractions import Fraction

from .bundle import StudyBundle
from .coding import (
    ClipAssignment,
    CodeBook,
    DistinctExpression,
    ExpressionCategory,
    LabelGroup,
    MatchTable,
)
from .elicitation import Referent, ReferentKind
from .kinematics import KinematicChain, default_chain
from .motion import Keyframe, MotionClip, TransitSpeed
from .taxonomy import TaxonomyLabel
from .verification import (
    AttentionCheck,
    BatteryItem,
    ExpressionVideo,
    StudyConfig,
    VerificationStudy,
)

PARTICIPANTS_PER_REFERENT = 16
QUOTA_PER_EXPRESSION = 20

# k-of-16 proposal counts per referent; yields REFERENCE_OS_PERCENT exactly.
OS_COUNTS: dict[str, dict[str, int]] = {
    "R1": {"E01": 4, "E02": 6, "E03": 6},
    "R2": {"E04": 6, "E05": 7, "E06": 3},
    "R3": {"E01": 6, "E02": 4, "E03": 6},
    "R4": {"E01": 3, "E07": 10, "E08": 3},
    "R5": {"E07": 6, "E08": 2, "E09": 8},
    "R6": {"E07": 8, "E08": 2, "E09": 6},
    "R7": {"E10": 11, "E11": 5},
    "R8": {"E12": 9, "E13": 7},
}

# Reference occurrence-score cells in rounded percent, by category and referent.
REFERENCE_OS_PERCENT: dict[str, dict[str, int]] = {
    "E01": {"R1": 25, "R3": 38, "R4": 19},
    "E02": {"R1": 38, "R3": 25},
    "E03": {"R1": 38, "R3": 38},
    "E04": {"R2": 38},
    "E05": {"R2": 44},
    "E06": {"R2": 19},
    "E07": {"R4": 62, "R5": 38, "R6": 50},
    "E08": {"R4": 19, "R5": 12, "R6": 12},
    "E09": {"R5": 50, "R6": 38},
    "E10": {"R7": 69},
    "E11": {"R7": 31},
    "E12": {"R8": 56},
    "E13": {"R8": 44},
}

# Reference response-accuracy cells in rounded percent.
REFERENCE_QRA_PERCENT: dict[str, dict[str, int]] = {
    "E01": {"R1": 75, "R3": 75},
    "E02": {"R1": 86, "R3": 86},
    "E03": {"R1": 94, "R3": 94},
    "E04": {"R2": 3},
    "E05": {"R2": 7},
    "E06": {"R2": 15},
    "E07": {"R4": 96, "R5": 96, "R6": 100},
    "E08": {"R4": 88, "R5": 88, "R6": 88},
    "E09": {"R5": 80, "R6": 80},
    "E10": {"R7": 29},
    "E11": {"R7": 13},
    "E12": {"R8": 73},
    "E13": {"R8": 21},
}


def audit_os_representability(
    percents: dict[str, dict[str, int]] | None = None,
    participants: int = PARTICIPANTS_PER_REFERENT,
    tolerance: Fraction = Fraction(1, 200),
) -> dict[tuple[str, str], int]:
    """Find for each table percentage the unique count k with p/100 ~ k/n.

    Raises if any cell admits no k (or more than one) within the tolerance,
    which would break the count reconstruction the fixtures rely on.
    """
    percents = REFERENCE_OS_PERCENT if percents is None else percents
    resolved: dict[tuple[str, str], int] = {}
    for category, row in percents.items():
        for referent, p in row.items():
            candidates = [
                k
                for k in range(participants + 1)
                if abs(Fraction(p, 100) - Fraction(k, participants)) <= tolerance
            ]
            if len(candidates) != 1:
                raise ValueError(
                    f"cell {category}/{referent}={p}%: expected exactly one "
                    f"k/{participants} representation, found {candidates}"
                )
            resolved[(category, referent)] = candidates[0]
    return resolved


REFERENTS = [
    Referent("T1", "Warm-up: make the arm look pleased.", ReferentKind.TUTORIAL),
    Referent("T2", "Warm-up: make the arm look unhappy.", ReferentKind.TUTORIAL),
    Referent(
        "R1",
        "An object sits on the table in front of the arm. Without touching "
        "it, look it over to take in more detail.",
        ReferentKind.TARGET,
    ),
    Referent(
        "R2",
        "A steady sound comes from a corner of the room. Listen to it to "
        "take in more detail.",
        ReferentKind.TARGET,
    ),
    Referent(
        "R3",
        "The object on the table is puzzling and you do not understand how "
        "it works. Try to become less uncertain about it.",
        ReferentKind.TARGET,
    ),
    Referent(
        "R4",
        "Someone is explaining something. Show that you follow and take "
        "the information in.",
        ReferentKind.TARGET,
    ),
    Referent(
        "R5",
        "Someone starts talking to you. Take an open stance that shows you "
        "are listening.",
        ReferentKind.TARGET,
    ),
    Referent(
        "R6",
        "Someone is talking to you. Show that you are engaged and attentive.",
        ReferentKind.TARGET,
    ),
    Referent(
        "R7",
        "You notice something frightening. Back away from it in fear.",
        ReferentKind.CONTROL,
    ),
    Referent(
        "R8",
        "Someone starts talking to you. Take a closed stance that shows you "
        "reject what they say.",
        ReferentKind.CONTROL,
    ),
]


def _tx(speed, complexity, flow, binding, dynamics, focus, direction=""):
    return TaxonomyLabel(
        speed=speed,
        complexity=complexity,
        flow=flow,
        binding=binding,
        dynamics=dynamics,
        focus=focus,
        dynamics_direction=direction,
    )


CATEGORY_DEFS: list[tuple[str, str, TaxonomyLabel]] = [
    (
        "E01",
        "Move the head close to the object and sweep along one axis.",
        _tx("normal", "single", "continuous", "object", "dynamic", "focused",
            "toward the object"),
    ),
    (
        "E02",
        "Move the head close and circle the object while pointing at it.",
        _tx("normal", "compound", "continuous", "object", "dynamic", "focused",
            "around the object"),
    ),
    (
        "E03",
        "Circle the object repeatedly, viewing it from two sides.",
        _tx("normal", "compound", "combined", "object", "dynamic", "focused",
            "around the object"),
    ),
    (
        "E04",
        "Lean forward and sweep the head horizontally to both sides.",
        _tx("normal", "compound", "combined", "environment", "dynamic",
            "unfocused", "sideways sweep"),
    ),
    (
        "E05",
        "Lean forward and point the head at one spot.",
        _tx("slow", "single", "continuous", "environment", "static", "focused"),
    ),
    (
        "E06",
        "Lean forward toward one spot, over and over.",
        _tx("normal", "compound", "discrete", "environment", "dynamic",
            "focused", "toward one spot"),
    ),
    (
        "E07",
        "Nod with the head.",
        _tx("normal", "single", "discrete", "person", "static", "focused"),
    ),
    (
        "E08",
        "Nod with the head, with body movement in between.",
        _tx("normal", "compound", "combined", "person", "dynamic", "focused",
            "toward the listener"),
    ),
    (
        "E09",
        "Signal attention with whole-body movement.",
        _tx("normal", "single", "continuous", "person", "dynamic", "unfocused",
            "toward the speaker"),
    ),
    (
        "E10",
        "Lean the body back, head kept on the target.",
        _tx("fast", "single", "continuous", "person", "dynamic", "focused",
            "away from the target"),
    ),
    (
        "E11",
        "Lean forward first, then back, head kept on the target.",
        _tx("fast", "compound", "combined", "person", "dynamic", "focused",
            "away after approaching"),
    ),
    (
        "E12",
        "Turn the head horizontally to both sides several times.",
        _tx("normal", "single", "discrete", "person", "static", "focused"),
    ),
    (
        "E13",
        "Turn the body and move away from the target.",
        _tx("slow", "compound", "continuous", "person", "dynamic", "unfocused",
            "away from the target"),
    ),
]

LABEL_GROUPS: list[tuple[str, str, tuple[str, ...]]] = [
    ("task evaluation", "exploratory",
     ("assessing", "examining", "inspecting", "scanning")),
    ("curiosity and interest", "exploratory",
     ("curiosity", "interest", "intrigued")),
    ("negative emotion", "negative", ("sadness", "anger", "annoyance")),
    ("negative social interaction", "negative", ("ignoring", "distancing")),
    ("negative consensus", "negative",
     ("disagreement", "refusal", "unwillingness")),
    ("fearful reactions", "negative", ("fear", "startled", "retreating")),
    ("uncertainty and confusion", "negative",
     ("confusion", "unsure", "searching")),
    ("positive social interaction", "positive",
     ("greeting", "approachable", "welcoming")),
    ("positive emotion", "positive", ("happiness", "excitement")),
    ("positive consensus", "positive",
     ("agreement", "acceptance", "confirmation")),
    ("active social interaction", "interactive", ("dancing", "playing")),
    ("indicative social interaction", "interactive",
     ("pointing", "beckoning", "commanding")),
]

# Per expression: total labels, count drawn from matching groups, the groups
# counted as fitting each origin referent, a matching label and a filler
# label. E07 additionally gets one curiosity label that fits only R6,
# yielding 24/25 for R4 and R5 but 25/25 for R6.
_QRA_PLAN: dict[str, dict] = {
    "E01": {"n": 20, "hits": 15, "match": ("task evaluation", "curiosity and interest"),
            "hit": "examining", "miss": "confusion"},
    "E02": {"n": 21, "hits": 18, "match": ("task evaluation", "curiosity and interest"),
            "hit": "curiosity", "miss": "confusion"},
    "E03": {"n": 31, "hits": 29, "match": ("task evaluation", "curiosity and interest"),
            "hit": "inspecting", "miss": "searching"},
    "E04": {"n": 30, "hits": 1, "match": ("curiosity and interest",),
            "hit": "curiosity", "miss": "pointing"},
    "E05": {"n": 28, "hits": 2, "match": ("curiosity and interest",),
            "hit": "interest", "miss": "pointing"},
    "E06": {"n": 20, "hits": 3, "match": ("curiosity and interest",),
            "hit": "intrigued", "miss": "beckoning"},
    "E07": {"n": 25, "hits": 24, "match": ("positive consensus", "positive social interaction"),
            "hit": "agreement", "miss": None, "extra_r6": "curiosity"},
    "E08": {"n": 25, "hits": 22, "match": ("positive consensus", "positive social interaction"),
            "hit": "confirmation", "miss": "dancing"},
    "E09": {"n": 20, "hits": 16, "match": ("positive social interaction", "positive consensus"),
            "hit": "welcoming", "miss": "dancing"},
    "E10": {"n": 21, "hits": 6, "match": ("fearful reactions",),
            "hit": "retreating", "miss": "distancing"},
    "E11": {"n": 23, "hits": 3, "match": ("fearful reactions",),
            "hit": "startled", "miss": "curiosity"},
    "E12": {"n": 22, "hits": 16, "match": ("negative consensus", "negative social interaction"),
            "hit": "disagreement", "miss": "confusion"},
    "E13": {"n": 24, "hits": 5, "match": ("negative consensus", "negative social interaction"),
            "hit": "distancing", "miss": "sadness"},
}

BATTERY = tuple(
    BatteryItem(text, reverse_scored=text in ("intrusive", "disturbing"))
    for text in (
        "engaged",
        "attentive",
        "explorative",
        "information-seeking",
        "curious",
        "understandable",
        "effective",
        "intrusive",
        "noticeable",
        "disturbing",
    )
)

ATTENTION_CHECKS = (AttentionCheck(position=5, min_value=0, max_value=10),)


def _random_keyframe(rng: random.Random, chain: KinematicChain) -> Keyframe:
    angles = tuple(
        round(rng.uniform(j.min_deg * 0.6, j.max_deg * 0.6), 1)
        for j in chain.joints
    )
    return Keyframe(
        angles_deg=angles,
        hold_ms=rng.choice((0, 0, 250, 500)),
        transit_speed=rng.choice(tuple(TransitSpeed)),
    )


def build_clips(chain: KinematicChain) -> list[MotionClip]:
    """16 clips per referent, each a small seeded 3-keyframe motion."""
    rng = random.Random(743901)
    clips = []
    for referent in sorted(OS_COUNTS):
        for p in range(1, PARTICIPANTS_PER_REFERENT + 1):
            pid = f"P{p:02d}"
            clips.append(
                MotionClip(
                    id=f"C-{referent}-{pid}",
                    chain_name=chain.name,
                    keyframes=tuple(_random_keyframe(rng, chain) for _ in range(3)),
                    created_by=pid,
                    provenance=referent,
                )
            )
    return clips


def build_codebook(clips: list[MotionClip]) -> CodeBook:
    """Distincts and categories wired so proposal counts equal OS_COUNTS.

    The demo condenses 128 clips into 37 distinct expressions and then 13
    categories; the 15 most common (category, referent) pairs get two
    distinct expressions each, the rest one (22 + 15 = 37).
    """
    combos = sorted(
        (
            (count, referent, category)
            for referent, per_cat in OS_COUNTS.items()
            for category, count in per_cat.items()
        ),
        key=lambda c: (-c[0], c[1], c[2]),
    )
    split = {(ref, cat) for _, ref, cat in combos[:15]}
    distincts: list[DistinctExpression] = []
    members: dict[str, list[str]] = {cid: [] for cid, _, _ in CATEGORY_DEFS}
    assignments: list[ClipAssignment] = []
    by_referent: dict[str, list[MotionClip]] = {}
    for clip in clips:
        by_referent.setdefault(clip.provenance, []).append(clip)
    seq = 0
    for referent in sorted(OS_COUNTS):
        pool = by_referent[referent]
        cursor = 0
        for category in sorted(OS_COUNTS[referent]):
            count = OS_COUNTS[referent][category]
            group = pool[cursor : cursor + count]
            cursor += count
            parts = 2 if (referent, category) in split else 1
            half = (len(group) + 1) // 2
            chunks = [group[:half], group[half:]] if parts == 2 else [group]
            for chunk in chunks:
                seq += 1
                did = f"D{seq:02d}"
                distincts.append(
                    DistinctExpression(
                        id=did,
                        description=f"{category} variant recorded for {referent}",
                    )
                )
                members[category].append(did)
                assignments += [
                    ClipAssignment(clip_id=c.id, distinct_id=did) for c in chunk
                ]
    # origin = the referents an expression was created for; E01 also absorbed
    # some R4 proposals (visible in the OS counts) without originating there,
    # so origins are keyed on the accuracy table, not the counts
    categories = tuple(
        ExpressionCategory(
            id=cid,
            description=desc,
            member_distinct_ids=tuple(members[cid]),
            origin_referents=frozenset(REFERENCE_QRA_PERCENT[cid]),
            taxonomy=tax,
        )
        for cid, desc, tax in CATEGORY_DEFS
    )
    return CodeBook(
        distinct_expressions=tuple(distincts),
        categories=categories,
        assignments=tuple(assignments),
    )


def build_label_groups() -> list[LabelGroup]:
    return [
        LabelGroup(group_id=gid, theme=theme, member_labels=frozenset(labels))
        for gid, theme, labels in LABEL_GROUPS
    ]


def build_match_table() -> MatchTable:
    entries: dict[tuple[str, str], frozenset[str]] = {}
    for category, plan in _QRA_PLAN.items():
        for referent in REFERENCE_QRA_PERCENT[category]:
            groups = set(plan["match"])
            if referent == "R6" and plan.get("extra_r6"):
                groups.add("curiosity and interest")
            entries[(category, referent)] = frozenset(groups)
    return MatchTable(entries=entries)


def _labels_for_expression(category: str) -> list[list[str]]:
    """Per-response label lists for the 20 responses of one expression."""
    plan = _QRA_PLAN[category]
    labels: list[str] = []
    hits, total = plan["hits"], plan["n"]
    labels += [plan["hit"]] * hits
    if plan.get("extra_r6"):
        labels += [plan["extra_r6"]]
    misses = total - len(labels)
    labels += [plan["miss"]] * misses
    assert len(labels) == total and misses >= 0
    # spread labels across the 20 responses; extras double up from the front
    per_response = [[] for _ in range(QUOTA_PER_EXPRESSION)]
    for i, label in enumerate(labels):
        per_response[i % QUOTA_PER_EXPRESSION].append(label)
    return per_response


def build_study_config() -> StudyConfig:
    return StudyConfig(
        study_id="curiosity-verification",
        expressions=tuple(
            ExpressionVideo(category_id=cid, video_uri=f"videos/{cid}.mp4")
            for cid, _, _ in CATEGORY_DEFS
        ),
        quota_per_expression=QUOTA_PER_EXPRESSION,
        battery=BATTERY,
        attention_checks=ATTENTION_CHECKS,
    )


def build_responses(config: StudyConfig):
    """Drive a real study object so gating timestamps are authentic."""
    rng = random.Random(592817)
    study = VerificationStudy(config)
    labels_by_category = {
        cid: _labels_for_expression(cid) for cid, _, _ in CATEGORY_DEFS
    }
    cursor = {cid: 0 for cid, _, _ in CATEGORY_DEFS}
    labelings: dict[str, tuple[str, ...]] = {}
    total = len(config.expressions) * config.quota_per_expression
    for i in range(1, total + 1):
        pid = f"V{i:03d}"
        assignment = study.assign(pid)
        study.record_video_ended(pid)
        for _ in range(rng.choice((0, 0, 1, 2))):
            study.record_video_ended(pid)
        cid = assignment.category_id
        labels = labels_by_category[cid][cursor[cid]]
        cursor[cid] += 1
        study.submit_interpretation(
            pid, "I think it shows " + " and ".join(labels) + "."
        )
        study.submit_vas(
            pid,
            [rng.randint(0, 100) for _ in config.battery],
            attention_answers=[5] * len(config.attention_checks),
            duration_s=round(rng.uniform(120.0, 420.0), 1),
        )
        labelings[pid] = tuple(labels)
    return study.responses(), labelings


def demo_bundle_dir():
    """Directory of the shipped (pre-generated) demo bundle."""
    from importlib import resources

    return resources.files("expressforge").joinpath("data/demo_bundle")


def build_demo_bundle() -> StudyBundle:
    chain = default_chain()
    clips = build_clips(chain)
    codebook = build_codebook(clips)
    config = build_study_config()
    responses, labelings = build_responses(config)
    return StudyBundle(
        chain=chain,
        referents=REFERENTS,
        sessions=[],
        clips=clips,
        codebook=codebook,
        label_groups=build_label_groups(),
        match_table=build_match_table(),
        study_config=config,
        responses=responses,
        labelings=labelings,
        exclusions=[],
    )
