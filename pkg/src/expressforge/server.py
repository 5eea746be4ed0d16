"""HTTP API for the console UI: sessions, playback streaming, surveys, reports.

All mutating endpoints accept an optional client-supplied request_id and are
idempotent under it: a replay returns the original result without repeating
the mutation. Validation problems are 400 with machine-readable field paths,
gating/quota/state conflicts are 409, unknown ids are 404. Mutations to one
session or study are serialized; playback streams are newline-delimited JSON
driven by one generator per handle.
"""

from __future__ import annotations

import json
import os
import threading
from typing import Optional

from fastapi import FastAPI, Request, Response
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, PlainTextResponse, StreamingResponse
from pydantic import BaseModel

from . import reports
from .bundle import StudyBundle
from .coding import proposal_counts
from .elicitation import (
    ElicitationError,
    ElicitationSession,
    SessionPhase,
    create_session,
)
from .fixtures import build_demo_bundle
from .kinematics import ChainError, chain_to_dict, link_positions
from .motion import (
    ClipError,
    Keyframe,
    MotionClip,
    TransitSpeed,
    duration,
    frame_stream,
)
from .verification import (
    GatingError,
    VerificationError,
    VerificationStudy,
)

DEFAULT_TICK_HZ = 50.0


class ApiError(Exception):
    def __init__(self, status: int, message: str, path: str = ""):
        super().__init__(message)
        self.status = status
        self.message = message
        self.path = path


class KeyframeBody(BaseModel):
    angles_deg: list[float]
    hold_ms: int = 0
    transit_speed: str = "normal"
    request_id: Optional[str] = None


class SessionBody(BaseModel):
    participant_id: str
    request_id: Optional[str] = None


class SpeedBody(BaseModel):
    index: int
    speed: str
    request_id: Optional[str] = None


class RatingsBody(BaseModel):
    values: list[float]
    notes: str = ""
    request_id: Optional[str] = None


class AssignBody(BaseModel):
    participant_id: str
    request_id: Optional[str] = None


class WatchedBody(BaseModel):
    participant_id: str
    request_id: Optional[str] = None


class InterpretationBody(BaseModel):
    participant_id: str
    text: str
    request_id: Optional[str] = None


class VasBody(BaseModel):
    participant_id: str
    values: list[float]
    attention_answers: list[float] = []
    duration_s: float = 0.0
    untouched: list[bool] = []
    request_id: Optional[str] = None


class FkBody(BaseModel):
    angles_deg: list[float]


class RequestBody(BaseModel):
    request_id: Optional[str] = None


class _Service:
    """In-memory state behind the API; one instance per app."""

    def __init__(self, bundle: StudyBundle, latin_seed: Optional[int] = None):
        self.bundle = bundle
        self.chain = bundle.chain
        self.referents = {r.id: r for r in bundle.referents}
        self.tutorials = [r for r in bundle.referents if r.kind.value == "tutorial"]
        self.targets = [r for r in bundle.referents if r.kind.value != "tutorial"]
        self.latin_seed = latin_seed
        self.sessions: dict[str, ElicitationSession] = {}
        self.session_locks: dict[str, threading.Lock] = {}
        self.playbacks: dict[str, MotionClip] = {}
        self.studies: dict[str, VerificationStudy] = {
            bundle.study_config.study_id: VerificationStudy(bundle.study_config)
        }
        self.idempotency: dict[str, tuple[int, dict]] = {}
        self.lock = threading.Lock()
        self._session_seq = 0
        self._playback_seq = 0

    def new_session(self, participant_id: str) -> tuple[str, ElicitationSession]:
        with self.lock:
            index = self._session_seq
            self._session_seq += 1
            plan = create_session(
                participant_id,
                index,
                self.targets,
                self.tutorials,
                seed=self.latin_seed,
            )
            session = ElicitationSession(
                plan, self.referents, self.chain, rating_seed=index
            )
            session_id = f"S{index + 1:03d}"
            self.sessions[session_id] = session
            self.session_locks[session_id] = threading.Lock()
            return session_id, session

    def session(self, session_id: str) -> ElicitationSession:
        session = self.sessions.get(session_id)
        if session is None:
            raise ApiError(404, f"unknown session {session_id}")
        return session

    def study(self, study_id: str) -> VerificationStudy:
        study = self.studies.get(study_id)
        if study is None:
            raise ApiError(404, f"unknown study {study_id}")
        return study

    def new_playback(self, clip: MotionClip) -> str:
        with self.lock:
            self._playback_seq += 1
            handle = f"pb{self._playback_seq:04d}"
            self.playbacks[handle] = clip
            return handle


def _clip_summary(service: _Service, session: ElicitationSession) -> dict:
    clip = session.current_clip
    if clip is None:
        return {"keyframes": [], "duration_ms": 0.0, "clip_id": None}
    return {
        "clip_id": clip.id,
        "keyframes": [
            {
                "angles_deg": list(k.angles_deg),
                "hold_ms": k.hold_ms,
                "transit_speed": k.transit_speed.value,
            }
            for k in clip.keyframes
        ],
        "duration_ms": duration(clip, service.chain),
    }


def _session_state(service: _Service, session_id: str) -> dict:
    session = service.session(session_id)
    state = {
        "session_id": session_id,
        "participant_id": session.plan.participant_id,
        "phase": session.phase.value,
        "plan": list(session.plan.ordered_referents),
        "row_index": session.plan.row_index,
        "records": len(session.records),
    }
    if session.phase is not SessionPhase.DONE:
        ref = session.current_referent
        state["current_referent"] = {
            "id": ref.id,
            "prompt": ref.prompt,
            "kind": ref.kind.value,
        }
        state["clip"] = _clip_summary(service, session)
    return state


def create_app(
    bundle: Optional[StudyBundle] = None,
    data_dir: Optional[str] = None,
    latin_seed: Optional[int] = None,
) -> FastAPI:
    if bundle is None:
        data_dir = data_dir or os.environ.get("EXPRESSFORGE_DATA")
        if data_dir:
            from .bundle import load_bundle

            bundle = load_bundle(data_dir)
        else:
            bundle = build_demo_bundle()
    service = _Service(bundle, latin_seed=latin_seed)
    app = FastAPI(title="expressforge")
    app.state.service = service
    # the console may be served from a different origin; auth is out of scope
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.exception_handler(ApiError)
    async def _api_error(_req: Request, exc: ApiError) -> JSONResponse:
        return JSONResponse(
            status_code=exc.status,
            content={"errors": [{"path": exc.path, "message": exc.message}]},
        )

    @app.exception_handler(RequestValidationError)
    async def _validation_error(
        _req: Request, exc: RequestValidationError
    ) -> JSONResponse:
        return JSONResponse(
            status_code=400,
            content={
                "errors": [
                    {
                        "path": "/".join(str(p) for p in err["loc"]),
                        "message": err["msg"],
                    }
                    for err in exc.errors()
                ]
            },
        )

    def idempotent(request_id: Optional[str], compute) -> JSONResponse:
        """Run a mutation once per request id, replaying the stored result."""
        if request_id is not None:
            cached = service.idempotency.get(request_id)
            if cached is not None:
                return JSONResponse(status_code=cached[0], content=cached[1])
        payload = compute()
        if request_id is not None:
            service.idempotency[request_id] = (200, payload)
        return JSONResponse(status_code=200, content=payload)

    def run_locked(session_id: str, action):
        lock = service.session_locks.get(session_id)
        if lock is None:
            raise ApiError(404, f"unknown session {session_id}")
        with lock:
            return action()

    # --- kinematics -------------------------------------------------------

    @app.get("/chain")
    def get_chain() -> dict:
        return chain_to_dict(service.chain)

    @app.post("/chain/fk")
    def chain_fk(body: FkBody) -> dict:
        try:
            links = link_positions(service.chain, body.angles_deg)
        except ChainError as exc:
            raise ApiError(400, str(exc), path="angles_deg")
        return {"links_mm": [list(p) for p in links]}

    # --- elicitation sessions ----------------------------------------------

    @app.post("/sessions")
    def post_session(body: SessionBody) -> JSONResponse:
        def compute() -> dict:
            session_id, _ = service.new_session(body.participant_id)
            return _session_state(service, session_id)

        return idempotent(body.request_id, compute)

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str) -> dict:
        return _session_state(service, session_id)

    @app.post("/sessions/{session_id}/keyframes")
    def post_keyframe(session_id: str, body: KeyframeBody) -> JSONResponse:
        def compute() -> dict:
            def action() -> dict:
                session = service.session(session_id)
                try:
                    kf = Keyframe(
                        angles_deg=tuple(body.angles_deg),
                        hold_ms=body.hold_ms,
                        transit_speed=TransitSpeed(body.transit_speed),
                    )
                    session.add_keyframe(kf)
                except (ClipError, ValueError) as exc:
                    raise ApiError(400, str(exc), path="angles_deg")
                except ElicitationError as exc:
                    raise ApiError(409, str(exc))
                return _clip_summary(service, session)

            return run_locked(session_id, action)

        return idempotent(body.request_id, compute)

    @app.post("/sessions/{session_id}/undo")
    def post_undo(session_id: str, body: RequestBody = RequestBody()) -> JSONResponse:
        def compute() -> dict:
            def action() -> dict:
                session = service.session(session_id)
                try:
                    session.undo()
                except (ClipError, ElicitationError) as exc:
                    raise ApiError(409, str(exc))
                return _clip_summary(service, session)

            return run_locked(session_id, action)

        return idempotent(body.request_id, compute)

    @app.post("/sessions/{session_id}/speed")
    def post_speed(session_id: str, body: SpeedBody) -> JSONResponse:
        def compute() -> dict:
            def action() -> dict:
                session = service.session(session_id)
                try:
                    session.set_speed(body.index, TransitSpeed(body.speed))
                except (ClipError, ValueError) as exc:
                    raise ApiError(400, str(exc), path="index")
                except ElicitationError as exc:
                    raise ApiError(409, str(exc))
                return _clip_summary(service, session)

            return run_locked(session_id, action)

        return idempotent(body.request_id, compute)

    @app.post("/sessions/{session_id}/advance")
    def post_advance(session_id: str, body: RequestBody = RequestBody()) -> JSONResponse:
        def compute() -> dict:
            def action() -> dict:
                session = service.session(session_id)
                try:
                    session.advance()
                except ElicitationError as exc:
                    raise ApiError(409, str(exc))
                return _session_state(service, session_id)

            return run_locked(session_id, action)

        return idempotent(body.request_id, compute)

    @app.post("/sessions/{session_id}/play")
    def post_play(session_id: str, body: RequestBody = RequestBody()) -> JSONResponse:
        def compute() -> dict:
            def action() -> dict:
                session = service.session(session_id)
                clip = session.current_clip
                if clip is None:
                    raise ApiError(409, "no clip recorded for this referent")
                handle = service.new_playback(clip)
                frames = frame_stream(clip, service.chain, DEFAULT_TICK_HZ)
                return {
                    "playback_id": handle,
                    "frame_count": len(frames),
                    "duration_ms": duration(clip, service.chain),
                }

            return run_locked(session_id, action)

        return idempotent(body.request_id, compute)

    @app.post("/sessions/{session_id}/ratings")
    def post_ratings(session_id: str, body: RatingsBody) -> JSONResponse:
        def compute() -> dict:
            def action() -> dict:
                session = service.session(session_id)
                if session.phase is not SessionPhase.RATE:
                    raise ApiError(
                        409,
                        f"ratings not accepted in phase '{session.phase.value}'",
                    )
                try:
                    record = session.submit_ratings(body.values, body.notes)
                except ElicitationError as exc:
                    raise ApiError(400, str(exc), path="values")
                return {
                    "referent_id": record.referent_id,
                    "clip_id": record.clip_id,
                    "phase": session.phase.value,
                }

            return run_locked(session_id, action)

        return idempotent(body.request_id, compute)

    @app.get("/playback/{playback_id}/stream")
    def get_stream(playback_id: str, tick_hz: float = DEFAULT_TICK_HZ):
        clip = service.playbacks.get(playback_id)
        if clip is None:
            raise ApiError(404, f"unknown playback {playback_id}")
        if tick_hz <= 0:
            raise ApiError(400, "tick_hz must be positive", path="tick_hz")
        frames = frame_stream(clip, service.chain, tick_hz)

        def generate():
            for t_ms, angles in frames:
                links = link_positions(service.chain, angles)
                yield json.dumps(
                    {
                        "t_ms": t_ms,
                        "angles_deg": list(angles),
                        "links_mm": [list(p) for p in links],
                    }
                ) + "\n"
            yield json.dumps({"done": True}) + "\n"

        return StreamingResponse(generate(), media_type="application/x-ndjson")

    # --- verification studies ----------------------------------------------

    @app.post("/studies/{study_id}/assign")
    def post_assign(study_id: str, body: AssignBody) -> JSONResponse:
        def compute() -> dict:
            study = service.study(study_id)
            try:
                assignment = study.assign(body.participant_id)
            except (GatingError, VerificationError) as exc:
                raise ApiError(409, str(exc))
            return {
                "participant_id": assignment.participant_id,
                "category_id": assignment.category_id,
                "video_uri": study.video_uri(assignment.category_id),
            }

        return idempotent(body.request_id, compute)

    @app.post("/studies/{study_id}/responses/watched")
    def post_watched(study_id: str, body: WatchedBody) -> JSONResponse:
        def compute() -> dict:
            study = service.study(study_id)
            try:
                count = study.record_video_ended(body.participant_id)
            except VerificationError as exc:
                raise ApiError(409, str(exc))
            return {"watch_count": count}

        return idempotent(body.request_id, compute)

    @app.post("/studies/{study_id}/responses/interpretation")
    def post_interpretation(study_id: str, body: InterpretationBody) -> JSONResponse:
        def compute() -> dict:
            study = service.study(study_id)
            try:
                study.submit_interpretation(body.participant_id, body.text)
            except GatingError as exc:
                raise ApiError(409, str(exc))
            except VerificationError as exc:
                raise ApiError(400, str(exc), path="text")
            return {"stage": study.stage(body.participant_id)}

        return idempotent(body.request_id, compute)

    @app.post("/studies/{study_id}/responses/vas")
    def post_vas(study_id: str, body: VasBody) -> JSONResponse:
        def compute() -> dict:
            study = service.study(study_id)
            try:
                response = study.submit_vas(
                    body.participant_id,
                    body.values,
                    attention_answers=body.attention_answers,
                    duration_s=body.duration_s,
                    untouched=body.untouched,
                )
            except GatingError as exc:
                raise ApiError(409, str(exc))
            except VerificationError as exc:
                raise ApiError(400, str(exc), path="values")
            return {
                "stage": study.stage(body.participant_id),
                "category_id": response.category_id,
            }

        return idempotent(body.request_id, compute)

    @app.get("/studies/{study_id}/participants/{participant_id}")
    def get_participant(study_id: str, participant_id: str) -> dict:
        study = service.study(study_id)
        stage = study.stage(participant_id)
        state: dict = {"stage": stage}
        assignment = study.assignment_of(participant_id)
        if assignment is not None:
            state["category_id"] = assignment.category_id
            state["video_uri"] = study.video_uri(assignment.category_id)
            state["watch_count"] = study.watch_count(participant_id)
            state["battery"] = [
                {"text": item.text}
                for item in study.config.battery
            ]
            # expected regions stay server-side; the client only renders text
            state["attention_checks"] = [
                {"position": c.position, "text": c.text}
                for c in study.config.attention_checks
            ]
        return state

    # --- reports ------------------------------------------------------------

    def _report_response(request: Request, cells, kind: str) -> Response:
        accept = request.headers.get("accept", "application/json")
        if "text/csv" in accept:
            header, rows = reports.score_table_rows(cells, kind)
            return PlainTextResponse(
                reports.render_csv(header, rows), media_type="text/csv"
            )
        if "text/markdown" in accept:
            header, rows = reports.score_table_rows(cells, kind)
            return PlainTextResponse(
                reports.render_markdown(header, rows), media_type="text/markdown"
            )
        return JSONResponse(
            {
                kind.lower(): {
                    cat: {ref: float(v) for ref, v in refs.items()}
                    for cat, refs in sorted(cells.items())
                }
            }
        )

    @app.get("/reports/os")
    def report_os(request: Request) -> Response:
        counts = proposal_counts(service.bundle.codebook, service.bundle.clips)
        return _report_response(request, reports.os_cells(counts), "OS")

    @app.get("/reports/qra")
    def report_qra(request: Request) -> Response:
        cells = reports.qra_cells(
            service.bundle.codebook,
            service.bundle.labelings_by_category(),
            service.bundle.label_groups,
            service.bundle.match_table,
        )
        return _report_response(request, cells, "QRA")

    @app.get("/reports/taxonomy")
    def report_taxonomy(request: Request) -> Response:
        labels = [c.taxonomy for c in service.bundle.codebook.categories]
        accept = request.headers.get("accept", "application/json")
        if "text/csv" in accept:
            return PlainTextResponse(
                reports.taxonomy_table(labels, "csv"), media_type="text/csv"
            )
        if "text/markdown" in accept:
            return PlainTextResponse(
                reports.taxonomy_table(labels, "md"), media_type="text/markdown"
            )
        from .taxonomy import distribution

        return JSONResponse({"taxonomy": distribution(labels)})

    return app


def main() -> None:  # pragma: no cover - thin launcher
    import argparse

    import uvicorn

    parser = argparse.ArgumentParser(description="expressforge API server")
    parser.add_argument("--addr", default="127.0.0.1:8000")
    parser.add_argument("--data", default=None, help="bundle directory")
    args = parser.parse_args()
    host, _, port = args.addr.partition(":")
    app = create_app(data_dir=args.data)
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port or 8000))


if __name__ == "__main__":  # pragma: no cover
    main()
