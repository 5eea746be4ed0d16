"""Phase-1 study flow: presentation order, recording sessions, ratings.

Presentation order uses a balanced Latin square so every referent appears in
every serial position equally often and first-order carryover is balanced.
Sessions walk a fixed state machine: tutorial referents first, then one
record/refine loop per study referent, then a rating pass over the recorded
clips in a seeded random order.
"""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass
from typing import Optional, Sequence

from .kinematics import KinematicChain
from .motion import (
    Keyframe,
    MotionClip,
    TransitSpeed,
    append_keyframe,
    new_clip,
    set_segment_speed,
    undo_last_keyframe,
)

SESSION_SCHEMA = "session/1"
REFERENTS_SCHEMA = "referents/1"

RATING_DIMENSIONS = (
    "engaged",
    "attentive",
    "explorative",
    "information_seeking",
    "curious",
)


class ElicitationError(ValueError):
    pass


class ReferentKind(str, enum.Enum):
    TARGET = "target"
    CONTROL = "control"
    TUTORIAL = "tutorial"


@dataclass(frozen=True)
class Referent:
    id: str
    prompt: str
    kind: ReferentKind = ReferentKind.TARGET

    def __post_init__(self) -> None:
        if not self.prompt:
            raise ElicitationError(f"referent {self.id}: empty prompt")


@dataclass(frozen=True)
class SessionPlan:
    participant_id: str
    ordered_referents: tuple[str, ...]
    row_index: int


@dataclass(frozen=True)
class ElicitationRecord:
    participant_id: str
    referent_id: str
    clip_id: str
    ratings: tuple[int, ...]
    notes: str = ""


def validate_ratings(values: Sequence[float]) -> tuple[int, ...]:
    """Check the 5-item battery: exactly five integers in [0, 100]."""
    if len(values) != len(RATING_DIMENSIONS):
        raise ElicitationError(
            f"expected {len(RATING_DIMENSIONS)} ratings, got {len(values)}"
        )
    out = []
    for dim, v in zip(RATING_DIMENSIONS, values):
        if not 0 <= v <= 100:
            raise ElicitationError(f"rating '{dim}' out of range [0, 100]: {v}")
        out.append(int(v))
    return tuple(out)


def balanced_latin_square(n: int, seed: Optional[int] = None) -> list[list[int]]:
    """Order matrix over items 0..n-1.

    Every item appears once per row and once per column. For even n each
    ordered adjacency occurs exactly once across the n rows; for odd n the
    square is doubled with its row-reversals (2n rows) so adjacencies and
    column positions balance. A seed permutes the item labels only.
    """
    if n < 1:
        raise ElicitationError("square size must be >= 1")
    first_row = [0] * n
    first_row[0] = 0
    lo, hi = 1, n - 1
    for j in range(1, n):
        if j % 2 == 1:
            first_row[j] = lo
            lo += 1
        else:
            first_row[j] = hi
            hi -= 1
    rows = [[(d + i) % n for d in first_row] for i in range(n)]
    if n % 2 == 1:
        rows += [list(reversed(row)) for row in rows]
    if seed is not None:
        relabel = list(range(n))
        random.Random(seed).shuffle(relabel)
        rows = [[relabel[item] for item in row] for row in rows]
    return rows


def create_session(
    participant_id: str,
    participant_index: int,
    referents: Sequence[Referent],
    tutorials: Sequence[Referent] = (),
    seed: Optional[int] = None,
) -> SessionPlan:
    """Plan a session: tutorials first, then one counterbalanced row."""
    ids = [r.id for r in list(tutorials) + list(referents)]
    if len(set(ids)) != len(ids):
        raise ElicitationError("referent ids must be unique")
    ordered = [r.id for r in tutorials]
    if referents:
        square = balanced_latin_square(len(referents), seed)
        row = square[participant_index % len(square)]
        ordered += [referents[i].id for i in row]
        row_index = participant_index % len(square)
    else:
        row_index = 0
    return SessionPlan(
        participant_id=participant_id,
        ordered_referents=tuple(ordered),
        row_index=row_index,
    )


class SessionPhase(str, enum.Enum):
    TUTORIAL = "tutorial"
    RECORD = "record"
    RATE = "rate"
    DONE = "done"


# Action -> phases in which it is legal. Advancing past the last referent
# moves RECORD -> RATE; rating the last clip moves RATE -> DONE.
TRANSITIONS: dict[str, frozenset[SessionPhase]] = {
    "add_keyframe": frozenset({SessionPhase.TUTORIAL, SessionPhase.RECORD}),
    "undo": frozenset({SessionPhase.TUTORIAL, SessionPhase.RECORD}),
    "set_speed": frozenset({SessionPhase.TUTORIAL, SessionPhase.RECORD}),
    "preview": frozenset(
        {SessionPhase.TUTORIAL, SessionPhase.RECORD, SessionPhase.RATE}
    ),
    "advance": frozenset({SessionPhase.TUTORIAL, SessionPhase.RECORD}),
    "submit_ratings": frozenset({SessionPhase.RATE}),
}


class ElicitationSession:
    """Mutable state of one participant's elicitation session.

    Owned by a single actor; the service serializes mutations per session.
    """

    def __init__(
        self,
        plan: SessionPlan,
        referents: dict[str, Referent],
        chain: KinematicChain,
        rating_seed: int = 0,
    ):
        self.plan = plan
        self.referents = referents
        self.chain = chain
        self.rating_seed = rating_seed
        self.clips: dict[str, MotionClip] = {}  # referent id -> recorded clip
        self.records: list[ElicitationRecord] = []
        self.rating_order: list[str] = []  # referent ids, set when RATE starts
        self._position = 0  # index into plan (tutorial+record) or rating_order
        self.phase = self._initial_phase()

    def _initial_phase(self) -> SessionPhase:
        if not self.plan.ordered_referents:
            return SessionPhase.DONE
        first = self.referents[self.plan.ordered_referents[0]]
        if first.kind is ReferentKind.TUTORIAL:
            return SessionPhase.TUTORIAL
        return SessionPhase.RECORD

    def _check(self, action: str) -> None:
        if self.phase not in TRANSITIONS[action]:
            raise ElicitationError(
                f"action '{action}' not allowed in phase '{self.phase.value}'"
            )

    @property
    def current_referent(self) -> Referent:
        if self.phase in (SessionPhase.TUTORIAL, SessionPhase.RECORD):
            return self.referents[self.plan.ordered_referents[self._position]]
        if self.phase is SessionPhase.RATE:
            return self.referents[self.rating_order[self._position]]
        raise ElicitationError("session is done; no current referent")

    @property
    def current_clip(self) -> Optional[MotionClip]:
        return self.clips.get(self.current_referent.id)

    def add_keyframe(self, kf: Keyframe) -> MotionClip:
        self._check("add_keyframe")
        rid = self.current_referent.id
        clip = self.clips.get(rid)
        if clip is None:
            clip = new_clip(
                clip_id=f"{self.plan.participant_id}-{rid}",
                chain=self.chain,
                first=kf,
                created_by=self.plan.participant_id,
                provenance=rid,
            )
        else:
            clip = append_keyframe(clip, kf, self.chain)
        self.clips[rid] = clip
        return clip

    def undo(self) -> MotionClip:
        self._check("undo")
        rid = self.current_referent.id
        clip = self.clips.get(rid)
        if clip is None:
            raise ElicitationError("nothing recorded yet for this referent")
        clip = undo_last_keyframe(clip)
        self.clips[rid] = clip
        return clip

    def set_speed(self, index: int, speed: TransitSpeed) -> MotionClip:
        self._check("set_speed")
        rid = self.current_referent.id
        clip = self.clips.get(rid)
        if clip is None:
            raise ElicitationError("nothing recorded yet for this referent")
        clip = set_segment_speed(clip, index, speed)
        self.clips[rid] = clip
        return clip

    def advance(self) -> SessionPhase:
        """Seal the current referent's clip and move to the next stage."""
        self._check("advance")
        rid = self.current_referent.id
        if rid not in self.clips:
            raise ElicitationError(
                f"cannot advance: no clip recorded for referent {rid}"
            )
        self._position += 1
        if self._position >= len(self.plan.ordered_referents):
            self._start_rating()
            return self.phase
        nxt = self.referents[self.plan.ordered_referents[self._position]]
        self.phase = (
            SessionPhase.TUTORIAL
            if nxt.kind is ReferentKind.TUTORIAL
            else SessionPhase.RECORD
        )
        return self.phase

    def _start_rating(self) -> None:
        # Tutorial clips are practice only; rating covers study referents.
        rateable = [
            rid
            for rid in self.plan.ordered_referents
            if self.referents[rid].kind is not ReferentKind.TUTORIAL
        ]
        order = list(rateable)
        random.Random(self.rating_seed).shuffle(order)
        self.rating_order = order
        self._position = 0
        self.phase = SessionPhase.RATE if order else SessionPhase.DONE

    def submit_ratings(
        self, values: Sequence[float], notes: str = ""
    ) -> ElicitationRecord:
        self._check("submit_ratings")
        ratings = validate_ratings(values)
        rid = self.rating_order[self._position]
        record = ElicitationRecord(
            participant_id=self.plan.participant_id,
            referent_id=rid,
            clip_id=self.clips[rid].id,
            ratings=ratings,
            notes=notes,
        )
        self.records.append(record)
        self._position += 1
        if self._position >= len(self.rating_order):
            self.phase = SessionPhase.DONE
        return record


def referents_to_dict(referents: Sequence[Referent]) -> dict:
    return {
        "schema": REFERENTS_SCHEMA,
        "referents": [
            {"id": r.id, "prompt": r.prompt, "kind": r.kind.value}
            for r in referents
        ],
    }


def referents_from_dict(data: dict) -> list[Referent]:
    if data.get("schema") != REFERENTS_SCHEMA:
        raise ElicitationError(
            f"expected schema '{REFERENTS_SCHEMA}', got {data.get('schema')!r}"
        )
    refs = [
        Referent(id=r["id"], prompt=r["prompt"], kind=ReferentKind(r["kind"]))
        for r in data["referents"]
    ]
    ids = [r.id for r in refs]
    if len(set(ids)) != len(ids):
        raise ElicitationError("referent ids must be unique")
    return refs


def session_to_dict(session: ElicitationSession) -> dict:
    return {
        "schema": SESSION_SCHEMA,
        "participant_id": session.plan.participant_id,
        "row_index": session.plan.row_index,
        "plan": list(session.plan.ordered_referents),
        "records": [
            {
                "participant_id": r.participant_id,
                "referent_id": r.referent_id,
                "clip_id": r.clip_id,
                "ratings": list(r.ratings),
                "notes": r.notes,
            }
            for r in session.records
        ],
    }
