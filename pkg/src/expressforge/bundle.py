"""Study persistence: a directory of versioned JSON files plus a manifest.

Files are written in one canonical form (sorted keys, two-space indent,
trailing newline) so that export -> import -> export is byte-identical and
bundles diff cleanly under version control. Every file declares its schema
version and unknown fields are rejected; the manifest carries a sha256 per
file. Study data is scientific record, so nothing here is lenient.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import jsonschema

from . import coding, elicitation, kinematics, motion, verification

MANIFEST_SCHEMA = "bundle/1"
SESSIONS_SCHEMA = "sessions/1"

BUNDLE_FILES = (
    "chain.json",
    "referents.json",
    "sessions.json",
    "clips.json",
    "codes.json",
    "study.json",
    "responses.json",
)


class BundleError(ValueError):
    pass


def canonical_dumps(data: dict) -> str:
    return json.dumps(data, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def _sha256(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


# --- JSON schemas ---------------------------------------------------------


def _obj(properties: dict, required: Optional[list[str]] = None) -> dict:
    return {
        "type": "object",
        "properties": properties,
        "required": sorted(properties) if required is None else required,
        "additionalProperties": False,
    }


def _arr(items: dict) -> dict:
    return {"type": "array", "items": items}


_NUM = {"type": "number"}
_INT = {"type": "integer"}
_STR = {"type": "string"}
_BOOL = {"type": "boolean"}
_VEC3 = {"type": "array", "items": _NUM, "minItems": 3, "maxItems": 3}

CHAIN_JSON_SCHEMA = _obj(
    {
        "schema": {"const": kinematics.CHAIN_SCHEMA},
        "name": _STR,
        "base_frame": _obj({"position_mm": _VEC3, "rotation_rpy_deg": _VEC3}),
        "joints": _arr(
            _obj(
                {
                    "name": _STR,
                    "link_offset_mm": _VEC3,
                    "rotation_axis": _VEC3,
                    "min_deg": _NUM,
                    "max_deg": _NUM,
                }
            )
        ),
    }
)

_KEYFRAME_SCHEMA = _obj(
    {
        "angles_deg": _arr(_NUM),
        "hold_ms": _INT,
        "transit_speed": {"enum": ["slow", "normal", "fast"]},
        "segment_time_override_ms": _INT,
    },
    required=["angles_deg", "hold_ms", "transit_speed"],
)

CLIPS_JSON_SCHEMA = _obj(
    {
        "schema": {"const": motion.CLIPS_SCHEMA},
        "chain": _STR,
        "clips": _arr(
            _obj(
                {
                    "id": _STR,
                    "provenance": _STR,
                    "created_by": _STR,
                    "keyframes": _arr(_KEYFRAME_SCHEMA),
                }
            )
        ),
    }
)

REFERENTS_JSON_SCHEMA = _obj(
    {
        "schema": {"const": elicitation.REFERENTS_SCHEMA},
        "referents": _arr(
            _obj(
                {
                    "id": _STR,
                    "prompt": _STR,
                    "kind": {"enum": ["target", "control", "tutorial"]},
                }
            )
        ),
    }
)

_RECORD_SCHEMA = _obj(
    {
        "participant_id": _STR,
        "referent_id": _STR,
        "clip_id": _STR,
        "ratings": {"type": "array", "items": _INT, "minItems": 5, "maxItems": 5},
        "notes": _STR,
    }
)

SESSIONS_JSON_SCHEMA = _obj(
    {
        "schema": {"const": SESSIONS_SCHEMA},
        "sessions": _arr(
            _obj(
                {
                    "schema": {"const": elicitation.SESSION_SCHEMA},
                    "participant_id": _STR,
                    "row_index": _INT,
                    "plan": _arr(_STR),
                    "records": _arr(_RECORD_SCHEMA),
                }
            )
        ),
    }
)

_TAXONOMY_SCHEMA = _obj(
    {
        "speed": _STR,
        "complexity": _STR,
        "flow": _STR,
        "binding": _STR,
        "dynamics": _STR,
        "focus": _STR,
        "dynamics_direction": _STR,
    },
    required=["speed", "complexity", "flow", "binding", "dynamics", "focus"],
)

CODES_JSON_SCHEMA = _obj(
    {
        "schema": {"const": coding.CODES_SCHEMA},
        "distinct_expressions": _arr(_obj({"id": _STR, "description": _STR})),
        "categories": _arr(
            _obj(
                {
                    "id": _STR,
                    "description": _STR,
                    "member_distinct_ids": _arr(_STR),
                    "origin_referents": _arr(_STR),
                    "taxonomy": _TAXONOMY_SCHEMA,
                }
            )
        ),
        "assignments": _arr(_obj({"clip_id": _STR, "distinct_id": _STR})),
        "label_groups": _arr(
            _obj({"group_id": _STR, "theme": _STR, "member_labels": _arr(_STR)})
        ),
        "match_table": _arr(
            _obj({"category_id": _STR, "referent_id": _STR, "group_ids": _arr(_STR)})
        ),
    }
)

STUDY_JSON_SCHEMA = _obj(
    {
        "schema": {"const": verification.STUDY_SCHEMA},
        "study_id": _STR,
        "quota_per_expression": _INT,
        "expressions": _arr(_obj({"category_id": _STR, "video_uri": _STR})),
        "battery": _arr(_obj({"text": _STR, "reverse_scored": _BOOL})),
        "attention_checks": _arr(
            _obj(
                {
                    "position": _INT,
                    "min_value": _INT,
                    "max_value": _INT,
                    "text": _STR,
                }
            )
        ),
    }
)

_RESPONSE_SCHEMA = _obj(
    {
        "participant_id": _STR,
        "category_id": _STR,
        "interpretation": _STR,
        "vas": _arr(_INT),
        "watch_count": _INT,
        "duration_s": _NUM,
        "attention_answers": _arr(_INT),
        "timestamps": _obj(
            {
                "video_completed": _INT,
                "interpretation_sealed": _INT,
                "vas_submitted": _INT,
            }
        ),
        "movement_only_flag": _BOOL,
        "vas_untouched": _arr(_BOOL),
        "labels": _arr(_STR),
    },
    required=[
        "participant_id",
        "category_id",
        "interpretation",
        "vas",
        "watch_count",
        "duration_s",
        "attention_answers",
        "timestamps",
        "movement_only_flag",
        "vas_untouched",
    ],
)

RESPONSES_JSON_SCHEMA = _obj(
    {
        "schema": {"const": verification.RESPONSES_SCHEMA},
        "study_id": _STR,
        "responses": _arr(_RESPONSE_SCHEMA),
        "exclusions": _arr(_obj({"participant_id": _STR, "reason": _STR})),
    }
)

MANIFEST_JSON_SCHEMA = _obj(
    {
        "schema": {"const": MANIFEST_SCHEMA},
        "files": {
            "type": "object",
            "additionalProperties": {"type": "string"},
        },
    }
)

FILE_SCHEMAS = {
    "chain.json": CHAIN_JSON_SCHEMA,
    "referents.json": REFERENTS_JSON_SCHEMA,
    "sessions.json": SESSIONS_JSON_SCHEMA,
    "clips.json": CLIPS_JSON_SCHEMA,
    "codes.json": CODES_JSON_SCHEMA,
    "study.json": STUDY_JSON_SCHEMA,
    "responses.json": RESPONSES_JSON_SCHEMA,
    "manifest.json": MANIFEST_JSON_SCHEMA,
}


def validate_file_dict(name: str, data: dict) -> list[str]:
    """Schema-check one file's parsed content; returns human-readable errors."""
    validator = jsonschema.Draft202012Validator(FILE_SCHEMAS[name])
    return [
        f"{name}: {'/'.join(str(p) for p in err.absolute_path) or '<root>'}: "
        f"{err.message}"
        for err in validator.iter_errors(data)
    ]


# --- the bundle -----------------------------------------------------------


@dataclass
class StudyBundle:
    chain: kinematics.KinematicChain
    referents: list[elicitation.Referent]
    sessions: list[dict]
    clips: list[motion.MotionClip]
    codebook: coding.CodeBook
    label_groups: list[coding.LabelGroup]
    match_table: coding.MatchTable
    study_config: verification.StudyConfig
    responses: list[verification.VerificationResponse]
    labelings: dict[str, tuple[str, ...]] = field(default_factory=dict)
    exclusions: list[tuple[str, str]] = field(default_factory=list)

    def labelings_by_category(
        self,
    ) -> dict[str, list[coding.ResponseLabeling]]:
        out: dict[str, list[coding.ResponseLabeling]] = {}
        for response in self.responses:
            labels = self.labelings.get(response.participant_id)
            if labels:
                out.setdefault(response.category_id, []).append(
                    coding.ResponseLabeling(
                        response_id=response.participant_id, labels=labels
                    )
                )
        return out


def bundle_to_file_dicts(bundle: StudyBundle) -> dict[str, dict]:
    responses_doc = verification.responses_to_dict(
        bundle.study_config.study_id, bundle.responses, bundle.exclusions
    )
    for entry in responses_doc["responses"]:
        labels = bundle.labelings.get(entry["participant_id"])
        if labels:
            entry["labels"] = list(labels)
    sessions_doc = {"schema": SESSIONS_SCHEMA, "sessions": bundle.sessions}
    return {
        "chain.json": kinematics.chain_to_dict(bundle.chain),
        "referents.json": elicitation.referents_to_dict(bundle.referents),
        "sessions.json": sessions_doc,
        "clips.json": motion.clips_to_dict(bundle.clips, bundle.chain.name),
        "codes.json": coding.codebook_bundle_to_dict(
            bundle.codebook, bundle.label_groups, bundle.match_table
        ),
        "study.json": verification.study_config_to_dict(bundle.study_config),
        "responses.json": responses_doc,
    }


def save_bundle(bundle: StudyBundle, directory: str | Path) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    files = bundle_to_file_dicts(bundle)
    hashes = {}
    for name, data in files.items():
        text = canonical_dumps(data)
        (directory / name).write_text(text)
        hashes[name] = _sha256(text)
    manifest = {"schema": MANIFEST_SCHEMA, "files": hashes}
    (directory / "manifest.json").write_text(canonical_dumps(manifest))


def load_bundle(directory: str | Path) -> StudyBundle:
    """Read, schema-check and cross-reference a bundle directory."""
    directory = Path(directory)
    raw: dict[str, dict] = {}
    for name in BUNDLE_FILES + ("manifest.json",):
        path = directory / name
        if not path.exists():
            raise BundleError(f"missing bundle file {name}")
        raw[name] = json.loads(path.read_text())
    problems: list[str] = []
    for name, data in raw.items():
        problems += validate_file_dict(name, data)
    if problems:
        raise BundleError("; ".join(problems))
    manifest = raw["manifest.json"]
    for name in BUNDLE_FILES:
        digest = _sha256((directory / name).read_text())
        recorded = manifest["files"].get(name)
        if recorded != digest:
            raise BundleError(
                f"manifest hash mismatch for {name}: "
                f"recorded {recorded}, actual {digest}"
            )
    chain = kinematics.chain_from_dict(raw["chain.json"])
    referents = elicitation.referents_from_dict(raw["referents.json"])
    _, clips = motion.clips_from_dict(raw["clips.json"])
    codebook, groups, match_table = coding.codebook_bundle_from_dict(
        raw["codes.json"]
    )
    study_config = verification.study_config_from_dict(raw["study.json"])
    labelings = {
        r["participant_id"]: tuple(r["labels"])
        for r in raw["responses.json"]["responses"]
        if r.get("labels")
    }
    _, responses, exclusions = verification.responses_from_dict(
        {
            **raw["responses.json"],
            "responses": [
                {k: v for k, v in r.items() if k != "labels"}
                for r in raw["responses.json"]["responses"]
            ],
        }
    )
    bundle = StudyBundle(
        chain=chain,
        referents=referents,
        sessions=raw["sessions.json"]["sessions"],
        clips=clips,
        codebook=codebook,
        label_groups=groups,
        match_table=match_table,
        study_config=study_config,
        responses=responses,
        labelings=labelings,
        exclusions=exclusions,
    )
    errors = cross_reference_errors(bundle)
    if errors:
        raise BundleError("; ".join(errors))
    return bundle


def cross_reference_errors(bundle: StudyBundle) -> list[str]:
    """Dangling-id checks across the bundle's files."""
    errors: list[str] = []
    referent_ids = {r.id for r in bundle.referents}
    clip_ids = {c.id for c in bundle.clips}
    distinct_ids = {d.id for d in bundle.codebook.distinct_expressions}
    category_ids = {c.id for c in bundle.codebook.categories}
    group_ids = {g.group_id for g in bundle.label_groups}

    if bundle.chain.name != (bundle.clips[0].chain_name if bundle.clips else bundle.chain.name):
        errors.append("clips.json chain does not match chain.json")
    for clip in bundle.clips:
        if clip.provenance != "freeform" and clip.provenance not in referent_ids:
            errors.append(f"clip {clip.id}: unknown referent {clip.provenance}")
        try:
            for kf in clip.keyframes:
                kinematics.check_limits(bundle.chain, kf.angles_deg)
        except kinematics.ChainError as exc:
            errors.append(f"clip {clip.id}: {exc}")
    for a in bundle.codebook.assignments:
        if a.clip_id not in clip_ids:
            errors.append(f"assignment references unknown clip {a.clip_id}")
    for cat in bundle.codebook.categories:
        for rid in cat.origin_referents:
            if rid not in referent_ids:
                errors.append(f"category {cat.id}: unknown referent {rid}")
    for (cat, ref), gids in bundle.match_table.entries.items():
        if cat not in category_ids:
            errors.append(f"match table: unknown category {cat}")
        if ref not in referent_ids:
            errors.append(f"match table: unknown referent {ref}")
        for gid in gids - group_ids:
            errors.append(f"match table: unknown group {gid}")
    for e in bundle.study_config.expressions:
        if e.category_id not in category_ids:
            errors.append(f"study expression: unknown category {e.category_id}")
    try:
        label_owner = coding.group_lookup(bundle.label_groups)
    except coding.CodingError as exc:
        errors.append(str(exc))
        label_owner = {}
    for pid, labels in bundle.labelings.items():
        for label in labels:
            if label not in label_owner:
                errors.append(f"response {pid}: label '{label}' has no group")
    for response in bundle.responses:
        if response.category_id not in category_ids:
            errors.append(
                f"response {response.participant_id}: unknown category "
                f"{response.category_id}"
            )
        if len(response.vas) != len(bundle.study_config.battery):
            errors.append(
                f"response {response.participant_id}: vas arity "
                f"{len(response.vas)} != battery {len(bundle.study_config.battery)}"
            )
    for session in bundle.sessions:
        for rid in session["plan"]:
            if rid not in referent_ids:
                errors.append(
                    f"session {session['participant_id']}: unknown referent {rid}"
                )
        for record in session["records"]:
            if record["clip_id"] not in clip_ids:
                errors.append(
                    f"session {session['participant_id']}: unknown clip "
                    f"{record['clip_id']}"
                )
    return errors
