"""Keyframed motion clips: the edit loop participants drive, plus playback math.

A clip is an ordered list of keyframes. Segment k (k >= 1) travels from
keyframe k-1 to keyframe k at the angular rate of keyframe k's transit speed,
all joints arriving together (segment time set by the largest joint delta);
each keyframe then holds its pose for hold_ms. Interpolation is linear in
joint space. Clips are immutable values: every edit returns a new clip.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Optional, Sequence

from .kinematics import ChainError, KinematicChain, check_limits

CLIPS_SCHEMA = "clips/1"


class TransitSpeed(str, enum.Enum):
    SLOW = "slow"
    NORMAL = "normal"
    FAST = "fast"


# Angular rates behind the subjective speed labels. Configurable per call.
DEFAULT_SPEEDS_DEG_PER_S: dict[TransitSpeed, float] = {
    TransitSpeed.SLOW: 15.0,
    TransitSpeed.NORMAL: 30.0,
    TransitSpeed.FAST: 60.0,
}


class ClipError(ValueError):
    """Raised for invalid keyframes and bad edit operations."""


@dataclass(frozen=True)
class Keyframe:
    angles_deg: tuple[float, ...]
    hold_ms: int = 0
    transit_speed: TransitSpeed = TransitSpeed.NORMAL
    # When set, replaces the computed travel time of the segment ending here.
    segment_time_override_ms: Optional[int] = None

    def __post_init__(self) -> None:
        if self.hold_ms < 0:
            raise ClipError(f"hold_ms must be >= 0, got {self.hold_ms}")
        if (
            self.segment_time_override_ms is not None
            and self.segment_time_override_ms < 0
        ):
            raise ClipError("segment_time_override_ms must be >= 0")


@dataclass(frozen=True)
class MotionClip:
    id: str
    chain_name: str
    keyframes: tuple[Keyframe, ...]
    created_by: str = ""
    provenance: str = "freeform"

    def __post_init__(self) -> None:
        if not self.keyframes:
            raise ClipError("a clip needs at least one keyframe")
        lengths = {len(k.angles_deg) for k in self.keyframes}
        if len(lengths) != 1:
            raise ClipError("keyframes disagree on joint count")


@dataclass
class PlaybackState:
    """Live playback of one clip; owned by a single session's clock driver."""

    clip_id: str
    elapsed_ms: float = 0.0
    current_joints: tuple[float, ...] = ()
    playing: bool = False


def _validate_keyframe(chain: KinematicChain, kf: Keyframe) -> None:
    try:
        check_limits(chain, kf.angles_deg)
    except ChainError as exc:
        raise ClipError(str(exc)) from exc


def new_clip(
    clip_id: str,
    chain: KinematicChain,
    first: Keyframe,
    created_by: str = "",
    provenance: str = "freeform",
) -> MotionClip:
    _validate_keyframe(chain, first)
    return MotionClip(
        id=clip_id,
        chain_name=chain.name,
        keyframes=(first,),
        created_by=created_by,
        provenance=provenance,
    )


def append_keyframe(
    clip: MotionClip, kf: Keyframe, chain: KinematicChain
) -> MotionClip:
    """Return a new clip with kf appended; the input clip is untouched."""
    _validate_keyframe(chain, kf)
    if len(kf.angles_deg) != len(clip.keyframes[0].angles_deg):
        raise ClipError(
            f"keyframe has {len(kf.angles_deg)} joints, clip has "
            f"{len(clip.keyframes[0].angles_deg)}"
        )
    return replace(clip, keyframes=clip.keyframes + (kf,))


def undo_last_keyframe(clip: MotionClip) -> MotionClip:
    if len(clip.keyframes) == 1:
        raise ClipError("cannot empty a clip: it has a single keyframe")
    return replace(clip, keyframes=clip.keyframes[:-1])


def set_segment_speed(
    clip: MotionClip, index: int, speed: TransitSpeed
) -> MotionClip:
    if not 0 <= index < len(clip.keyframes):
        raise ClipError(
            f"keyframe index {index} out of range 0..{len(clip.keyframes) - 1}"
        )
    updated = replace(clip.keyframes[index], transit_speed=speed)
    frames = clip.keyframes[:index] + (updated,) + clip.keyframes[index + 1 :]
    return replace(clip, keyframes=frames)


def _travel_time_ms(
    prev: Keyframe, kf: Keyframe, speeds: dict[TransitSpeed, float]
) -> float:
    if kf.segment_time_override_ms is not None:
        return float(kf.segment_time_override_ms)
    max_delta = max(
        abs(a - b) for a, b in zip(prev.angles_deg, kf.angles_deg)
    )
    return max_delta / speeds[kf.transit_speed] * 1000.0


@dataclass(frozen=True)
class _Segment:
    start_ms: float
    end_ms: float
    kind: str  # "hold" or "travel"
    index: int  # keyframe reached / held


def _timeline(
    clip: MotionClip, speeds: dict[TransitSpeed, float]
) -> list[_Segment]:
    segments: list[_Segment] = []
    t = 0.0
    first = clip.keyframes[0]
    segments.append(_Segment(t, t + first.hold_ms, "hold", 0))
    t += first.hold_ms
    for i in range(1, len(clip.keyframes)):
        travel = _travel_time_ms(clip.keyframes[i - 1], clip.keyframes[i], speeds)
        segments.append(_Segment(t, t + travel, "travel", i))
        t += travel
        hold = clip.keyframes[i].hold_ms
        segments.append(_Segment(t, t + hold, "hold", i))
        t += hold
    return segments


def duration(
    clip: MotionClip,
    chain: Optional[KinematicChain] = None,
    speeds: dict[TransitSpeed, float] = DEFAULT_SPEEDS_DEG_PER_S,
) -> float:
    """Total clip length in milliseconds: travel times plus holds."""
    if chain is not None and len(clip.keyframes[0].angles_deg) != len(chain):
        raise ClipError("clip joint count does not match chain")
    return _timeline(clip, speeds)[-1].end_ms


def sample(
    clip: MotionClip,
    chain: Optional[KinematicChain],
    t_ms: float,
    speeds: dict[TransitSpeed, float] = DEFAULT_SPEEDS_DEG_PER_S,
) -> tuple[float, ...]:
    """Joint angles at time t_ms; clamps to the last keyframe past the end."""
    if t_ms < 0:
        raise ClipError(f"negative sample time {t_ms}")
    segments = _timeline(clip, speeds)
    if t_ms >= segments[-1].end_ms:
        return clip.keyframes[-1].angles_deg
    for seg in segments:
        if seg.start_ms <= t_ms < seg.end_ms:
            if seg.kind == "hold":
                return clip.keyframes[seg.index].angles_deg
            frac = (t_ms - seg.start_ms) / (seg.end_ms - seg.start_ms)
            a = clip.keyframes[seg.index - 1].angles_deg
            b = clip.keyframes[seg.index].angles_deg
            return tuple(x + (y - x) * frac for x, y in zip(a, b))
    return clip.keyframes[-1].angles_deg


def frame_stream(
    clip: MotionClip,
    chain: Optional[KinematicChain],
    tick_hz: float = 50.0,
    speeds: dict[TransitSpeed, float] = DEFAULT_SPEEDS_DEG_PER_S,
) -> list[tuple[float, tuple[float, ...]]]:
    """Sampled frames at t = 0, 1/tick_hz, ... up to and including duration."""
    if tick_hz <= 0:
        raise ClipError(f"tick_hz must be positive, got {tick_hz}")
    total = duration(clip, chain, speeds)
    step = 1000.0 / tick_hz
    frames: list[tuple[float, tuple[float, ...]]] = []
    k = 0
    while True:
        t = k * step
        if t > total:
            break
        frames.append((t, sample(clip, chain, t, speeds)))
        k += 1
    return frames


def clips_to_dict(clips: Sequence[MotionClip], chain_name: str) -> dict:
    return {
        "schema": CLIPS_SCHEMA,
        "chain": chain_name,
        "clips": [
            {
                "id": c.id,
                "provenance": c.provenance,
                "created_by": c.created_by,
                "keyframes": [
                    {
                        "angles_deg": list(k.angles_deg),
                        "hold_ms": k.hold_ms,
                        "transit_speed": k.transit_speed.value,
                        **(
                            {"segment_time_override_ms": k.segment_time_override_ms}
                            if k.segment_time_override_ms is not None
                            else {}
                        ),
                    }
                    for k in c.keyframes
                ],
            }
            for c in clips
        ],
    }


def clips_from_dict(data: dict) -> tuple[str, list[MotionClip]]:
    if data.get("schema") != CLIPS_SCHEMA:
        raise ClipError(
            f"expected schema '{CLIPS_SCHEMA}', got {data.get('schema')!r}"
        )
    chain_name = data["chain"]
    clips = [
        MotionClip(
            id=c["id"],
            chain_name=chain_name,
            created_by=c.get("created_by", ""),
            provenance=c.get("provenance", "freeform"),
            keyframes=tuple(
                Keyframe(
                    angles_deg=tuple(k["angles_deg"]),
                    hold_ms=k.get("hold_ms", 0),
                    transit_speed=TransitSpeed(k.get("transit_speed", "normal")),
                    segment_time_override_ms=k.get("segment_time_override_ms"),
                )
                for k in c["keyframes"]
            ),
        )
        for c in data["clips"]
    ]
    return chain_name, clips
