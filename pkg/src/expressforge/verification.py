"""Phase-2 survey machinery: balanced assignment, gated responses, exclusions.

Each participant is assigned exactly one expression video, with per-expression
quotas filled evenly (min-count first, lowest category id on ties). Response
collection is gated in a fixed order: the video-ended event unlocks the
free-text interpretation, and only a sealed interpretation unlocks the VAS
battery. Reverse-scored battery items are stored raw; the 100-x transform is
applied in reports only.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, replace
from typing import Optional, Sequence

STUDY_SCHEMA = "study/1"
RESPONSES_SCHEMA = "responses/1"

VAS_ITEM_COUNT = 10


class VerificationError(ValueError):
    pass


class GatingError(VerificationError):
    """A response step was attempted out of order."""


class QuotaFullError(VerificationError):
    pass


class AlreadyAssignedError(VerificationError):
    pass


@dataclass(frozen=True)
class BatteryItem:
    text: str
    reverse_scored: bool = False


@dataclass(frozen=True)
class AttentionCheck:
    """Extra slider with a known correct region; only the text is shown."""

    position: int
    min_value: int
    max_value: int
    text: str = "Drag this slider all the way to the left."


@dataclass(frozen=True)
class ExpressionVideo:
    category_id: str
    video_uri: str


@dataclass(frozen=True)
class StudyConfig:
    study_id: str
    expressions: tuple[ExpressionVideo, ...]
    quota_per_expression: int
    battery: tuple[BatteryItem, ...]
    attention_checks: tuple[AttentionCheck, ...] = ()

    def __post_init__(self) -> None:
        if self.quota_per_expression < 1:
            raise VerificationError("quota must be >= 1")
        if not self.expressions:
            raise VerificationError("a study needs at least one expression")
        texts = [item.text for item in self.battery]
        if len(set(texts)) != len(texts):
            raise VerificationError("battery items must be unique")
        ids = [e.category_id for e in self.expressions]
        if len(set(ids)) != len(ids):
            raise VerificationError("expression category ids must be unique")


@dataclass(frozen=True)
class Assignment:
    participant_id: str
    category_id: str
    issued_at: int  # logical event sequence number


@dataclass(frozen=True)
class VerificationResponse:
    participant_id: str
    category_id: str
    interpretation: str
    vas: tuple[int, ...]
    watch_count: int
    duration_s: float
    attention_answers: tuple[int, ...]
    video_completed_at: int
    interpretation_sealed_at: int
    vas_submitted_at: int
    movement_only_flag: bool = False
    # sliders start at the midpoint; per-item flag whether the handle moved
    vas_untouched: tuple[bool, ...] = ()


@dataclass
class _ParticipantState:
    assignment: Assignment
    watch_count: int = 0
    video_completed_at: Optional[int] = None
    interpretation: Optional[str] = None
    interpretation_sealed_at: Optional[int] = None
    response: Optional[VerificationResponse] = None


class VerificationStudy:
    """Live state of one between-subjects study; mutations are serialized."""

    def __init__(self, config: StudyConfig):
        self.config = config
        self._lock = threading.Lock()
        self._clock = 0
        self._states: dict[str, _ParticipantState] = {}
        self._counts: dict[str, int] = {
            e.category_id: 0 for e in config.expressions
        }

    def _tick(self) -> int:
        self._clock += 1
        return self._clock

    def video_uri(self, category_id: str) -> str:
        for e in self.config.expressions:
            if e.category_id == category_id:
                return e.video_uri
        raise VerificationError(f"unknown expression {category_id}")

    def assignment_counts(self) -> dict[str, int]:
        with self._lock:
            return dict(self._counts)

    def assign(self, participant_id: str) -> Assignment:
        """Assign the least-filled expression; ties go to the lowest id."""
        with self._lock:
            if participant_id in self._states:
                raise AlreadyAssignedError(
                    f"participant {participant_id} already has an assignment"
                )
            open_slots = [
                (count, cid)
                for cid, count in self._counts.items()
                if count < self.config.quota_per_expression
            ]
            if not open_slots:
                raise QuotaFullError("all expression quotas are full")
            _, category_id = min(open_slots)
            self._counts[category_id] += 1
            assignment = Assignment(
                participant_id=participant_id,
                category_id=category_id,
                issued_at=self._tick(),
            )
            self._states[participant_id] = _ParticipantState(assignment)
            return assignment

    def _state(self, participant_id: str) -> _ParticipantState:
        state = self._states.get(participant_id)
        if state is None:
            raise VerificationError(
                f"participant {participant_id} has no assignment"
            )
        return state

    def record_video_ended(self, participant_id: str) -> int:
        """Client-reported playback-finished event; allowed at any stage."""
        with self._lock:
            state = self._state(participant_id)
            state.watch_count += 1
            if state.video_completed_at is None:
                state.video_completed_at = self._tick()
            return state.watch_count

    def submit_interpretation(self, participant_id: str, text: str) -> None:
        with self._lock:
            state = self._state(participant_id)
            if state.watch_count < 1:
                raise GatingError(
                    "the video must finish before an interpretation is accepted"
                )
            if state.interpretation is not None:
                raise GatingError("interpretation sealed; it cannot change")
            if not text.strip():
                raise VerificationError("interpretation text is empty")
            state.interpretation = text
            state.interpretation_sealed_at = self._tick()

    def submit_vas(
        self,
        participant_id: str,
        values: Sequence[float],
        attention_answers: Sequence[float] = (),
        duration_s: float = 0.0,
        untouched: Sequence[bool] = (),
    ) -> VerificationResponse:
        with self._lock:
            state = self._state(participant_id)
            if state.interpretation is None:
                raise GatingError(
                    "the interpretation must be submitted before the sliders"
                )
            if state.response is not None:
                raise GatingError("response already finalized")
            if len(values) != len(self.config.battery):
                raise VerificationError(
                    f"expected {len(self.config.battery)} slider values, "
                    f"got {len(values)}"
                )
            for i, v in enumerate(values):
                if not 0 <= v <= 100:
                    raise VerificationError(
                        f"slider {i} out of range [0, 100]: {v}"
                    )
            if len(attention_answers) != len(self.config.attention_checks):
                raise VerificationError(
                    f"expected {len(self.config.attention_checks)} attention "
                    f"answers, got {len(attention_answers)}"
                )
            if untouched and len(untouched) != len(values):
                raise VerificationError(
                    "untouched flags must match the slider values"
                )
            response = VerificationResponse(
                participant_id=participant_id,
                category_id=state.assignment.category_id,
                interpretation=state.interpretation,
                vas=tuple(int(v) for v in values),
                watch_count=state.watch_count,
                duration_s=duration_s,
                attention_answers=tuple(int(v) for v in attention_answers),
                video_completed_at=state.video_completed_at or 0,
                interpretation_sealed_at=state.interpretation_sealed_at or 0,
                vas_submitted_at=self._tick(),
                vas_untouched=tuple(bool(u) for u in untouched),
            )
            state.response = response
            return response

    def flag_movement_only(self, participant_id: str) -> None:
        """Record the human judgement that a response only describes motion."""
        with self._lock:
            state = self._state(participant_id)
            if state.response is None:
                raise VerificationError("no finalized response to flag")
            state.response = replace(state.response, movement_only_flag=True)

    def stage(self, participant_id: str) -> str:
        """Where the participant is: video, interpretation, vas or done."""
        with self._lock:
            state = self._states.get(participant_id)
            if state is None:
                return "unassigned"
            if state.response is not None:
                return "done"
            if state.interpretation is not None:
                return "vas"
            if state.watch_count >= 1:
                return "interpretation"
            return "video"

    def watch_count(self, participant_id: str) -> int:
        with self._lock:
            return self._state(participant_id).watch_count

    def assignment_of(self, participant_id: str) -> Optional[Assignment]:
        with self._lock:
            state = self._states.get(participant_id)
            return state.assignment if state else None

    def responses(self) -> list[VerificationResponse]:
        with self._lock:
            return [
                s.response
                for s in self._states.values()
                if s.response is not None
            ]


@dataclass(frozen=True)
class ExclusionReport:
    kept: tuple[VerificationResponse, ...]
    excluded: tuple[tuple[VerificationResponse, str], ...]


def passes_attention_checks(
    response: VerificationResponse, checks: Sequence[AttentionCheck]
) -> bool:
    for check, answer in zip(checks, response.attention_answers):
        if not check.min_value <= answer <= check.max_value:
            return False
    return True


def apply_exclusions(
    responses: Sequence[VerificationResponse],
    checks: Sequence[AttentionCheck] = (),
) -> ExclusionReport:
    """Partition responses into kept and excluded-with-reason.

    Attention-check failures are automatic; movement-only exclusions come
    from the human-authored flag on each response.
    """
    kept: list[VerificationResponse] = []
    excluded: list[tuple[VerificationResponse, str]] = []
    for response in responses:
        if not passes_attention_checks(response, checks):
            excluded.append((response, "attention"))
        elif response.movement_only_flag:
            excluded.append((response, "movement-only"))
        else:
            kept.append(response)
    return ExclusionReport(kept=tuple(kept), excluded=tuple(excluded))


def reverse_transform(
    battery: Sequence[BatteryItem], vas: Sequence[int]
) -> tuple[int, ...]:
    """Report-side view of raw slider values: reversed items become 100-x."""
    return tuple(
        100 - v if item.reverse_scored else v
        for item, v in zip(battery, vas)
    )


# --- serialization ------------------------------------------------------------


def study_config_to_dict(config: StudyConfig) -> dict:
    return {
        "schema": STUDY_SCHEMA,
        "study_id": config.study_id,
        "quota_per_expression": config.quota_per_expression,
        "expressions": [
            {"category_id": e.category_id, "video_uri": e.video_uri}
            for e in config.expressions
        ],
        "battery": [
            {"text": b.text, "reverse_scored": b.reverse_scored}
            for b in config.battery
        ],
        "attention_checks": [
            {
                "position": c.position,
                "min_value": c.min_value,
                "max_value": c.max_value,
                "text": c.text,
            }
            for c in config.attention_checks
        ],
    }


def study_config_from_dict(data: dict) -> StudyConfig:
    if data.get("schema") != STUDY_SCHEMA:
        raise VerificationError(
            f"expected schema '{STUDY_SCHEMA}', got {data.get('schema')!r}"
        )
    return StudyConfig(
        study_id=data["study_id"],
        quota_per_expression=data["quota_per_expression"],
        expressions=tuple(
            ExpressionVideo(category_id=e["category_id"], video_uri=e["video_uri"])
            for e in data["expressions"]
        ),
        battery=tuple(
            BatteryItem(text=b["text"], reverse_scored=b.get("reverse_scored", False))
            for b in data["battery"]
        ),
        attention_checks=tuple(
            AttentionCheck(
                position=c["position"],
                min_value=c["min_value"],
                max_value=c["max_value"],
                text=c.get("text", AttentionCheck.text),
            )
            for c in data["attention_checks"]
        ),
    )


def response_to_dict(response: VerificationResponse) -> dict:
    return {
        "participant_id": response.participant_id,
        "category_id": response.category_id,
        "interpretation": response.interpretation,
        "vas": list(response.vas),
        "watch_count": response.watch_count,
        "duration_s": response.duration_s,
        "attention_answers": list(response.attention_answers),
        "timestamps": {
            "video_completed": response.video_completed_at,
            "interpretation_sealed": response.interpretation_sealed_at,
            "vas_submitted": response.vas_submitted_at,
        },
        "movement_only_flag": response.movement_only_flag,
        "vas_untouched": list(response.vas_untouched),
    }


def response_from_dict(data: dict) -> VerificationResponse:
    ts = data["timestamps"]
    return VerificationResponse(
        participant_id=data["participant_id"],
        category_id=data["category_id"],
        interpretation=data["interpretation"],
        vas=tuple(data["vas"]),
        watch_count=data["watch_count"],
        duration_s=data["duration_s"],
        attention_answers=tuple(data["attention_answers"]),
        video_completed_at=ts["video_completed"],
        interpretation_sealed_at=ts["interpretation_sealed"],
        vas_submitted_at=ts["vas_submitted"],
        movement_only_flag=data.get("movement_only_flag", False),
        vas_untouched=tuple(data.get("vas_untouched", ())),
    )


def responses_to_dict(
    study_id: str,
    responses: Sequence[VerificationResponse],
    exclusions: Sequence[tuple[str, str]] = (),
) -> dict:
    return {
        "schema": RESPONSES_SCHEMA,
        "study_id": study_id,
        "responses": [response_to_dict(r) for r in responses],
        "exclusions": [
            {"participant_id": pid, "reason": reason}
            for pid, reason in exclusions
        ],
    }


def responses_from_dict(
    data: dict,
) -> tuple[str, list[VerificationResponse], list[tuple[str, str]]]:
    if data.get("schema") != RESPONSES_SCHEMA:
        raise VerificationError(
            f"expected schema '{RESPONSES_SCHEMA}', got {data.get('schema')!r}"
        )
    return (
        data["study_id"],
        [response_from_dict(r) for r in data["responses"]],
        [(e["participant_id"], e["reason"]) for e in data["exclusions"]],
    )
