"""HTTP service exposing the pipeline, feedback-driven evolution, and
knowledge-graph inspection.

The service is a thin adapter: every response is reproducible by calling
the module operations directly with the same inputs. Sessions live in
memory; the knowledge graph file is the durable state and is saved after
every evolution. Feedback follows the autonomous-mode rules regardless of
the configured batch mode, since a human verdict is exactly what that mode
is about.
"""

from __future__ import annotations

import threading
import uuid
from dataclasses import dataclass, field, replace
from pathlib import Path

from fastapi import FastAPI, HTTPException, Query, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .config import AppConfig, redacted
from .embedding import Embedder
from .errors import (
    MalformedReplyError,
    ScriptExhaustedError,
    UpstreamServiceError,
)
from .evolution import EvolutionRecord, FeedbackVerdict, Verdict, mastership_evolve
from .kg_store import DkgStore
from .llm_gateway import Confidence, LlmClient
from .pipeline import DatasetKind, Mode, PipelineResult, Question, answer_question

_UPSTREAM_ERRORS = (MalformedReplyError, ScriptExhaustedError, UpstreamServiceError)


class AskRequest(BaseModel):
    session_id: str | None = None
    question: str
    options: list[str] | None = None


class FeedbackRequest(BaseModel):
    session_id: str
    question_id: str
    verdict: str


@dataclass
class Turn:
    question: Question
    result: PipelineResult
    verdict: str | None = None


@dataclass
class Session:
    session_id: str
    turns: dict[str, Turn] = field(default_factory=dict)
    lock: threading.Lock = field(default_factory=threading.Lock)


def _result_payload(session_id: str, question_id: str, result: PipelineResult) -> dict:
    return {
        "session_id": session_id,
        "question_id": question_id,
        "answer": result.answer.answer,
        "confidence": (
            "positive" if result.answer.confidence is Confidence.POSITIVE else "negative"
        ),
        "support_info": result.answer.support_info,
        "triples": [t.as_dict() for t in result.accumulated],
        "depth_used": result.depth_used,
        "evidence": result.evidence.value,
        "trigger": result.trigger.value if result.trigger else None,
    }


def _evolution_summary(record: EvolutionRecord) -> dict:
    return {
        "question_id": record.question_id,
        "candidates": len(record.candidates),
        "added": len(record.added),
        "added_triples": [t.as_dict() for t in record.added_triples],
        "skipped_exact": len(record.skipped_exact),
        "skipped_similar": len(record.skipped_similar),
    }


def create_app(
    cfg: AppConfig,
    store: DkgStore,
    embedder: Embedder,
    llm: LlmClient,
) -> FastAPI:
    app = FastAPI(title="wts", docs_url=None, redoc_url=None)
    sessions: dict[str, Session] = {}
    sessions_lock = threading.Lock()
    size_series: list[int] = [store.stats().triple_count]
    feedback_cfg = replace(cfg.pipeline, mode=Mode.MASTERSHIP)

    @app.exception_handler(RequestValidationError)
    async def malformed_body(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"detail": exc.errors()})

    def get_session(session_id: str | None, create: bool) -> Session:
        with sessions_lock:
            if session_id and session_id in sessions:
                return sessions[session_id]
            if not create:
                raise HTTPException(status_code=404, detail=f"unknown session {session_id!r}")
            new_id = session_id or uuid.uuid4().hex[:12]
            session = sessions.setdefault(new_id, Session(session_id=new_id))
            return session

    @app.post("/api/ask")
    def ask(body: AskRequest):
        text = body.question.strip()
        if not text:
            raise HTTPException(status_code=400, detail="question must not be empty")
        session = get_session(body.session_id, create=True)
        question = Question(
            id=f"q-{uuid.uuid4().hex[:12]}",
            text=text,
            options=tuple(body.options) if body.options else None,
            kind=DatasetKind.MULTIPLE_CHOICE if body.options else DatasetKind.GENERATION,
        )
        try:
            result = answer_question(question, cfg.pipeline, store, embedder, llm)
        except _UPSTREAM_ERRORS as exc:
            raise HTTPException(
                status_code=502, detail=f"model backend failed: {type(exc).__name__}: {exc}"
            ) from exc
        with session.lock:
            session.turns[question.id] = Turn(question=question, result=result)
        return _result_payload(session.session_id, question.id, result)

    @app.post("/api/feedback")
    def feedback(body: FeedbackRequest):
        if body.verdict not in ("good", "bad"):
            raise HTTPException(status_code=400, detail="verdict must be 'good' or 'bad'")
        session = get_session(body.session_id, create=False)
        with session.lock:
            turn = session.turns.get(body.question_id)
            if turn is None:
                raise HTTPException(
                    status_code=404, detail=f"unknown question {body.question_id!r}"
                )
            if turn.verdict is not None:
                raise HTTPException(
                    status_code=409,
                    detail=f"feedback already recorded for {body.question_id!r}",
                )
            turn.verdict = body.verdict
        verdict = FeedbackVerdict(
            verdict=Verdict.POSITIVE if body.verdict == "good" else Verdict.NEGATIVE,
            session_id=session.session_id,
        )
        try:
            record = mastership_evolve(
                store,
                turn.question,
                turn.result,
                verdict,
                feedback_cfg,
                embedder,
                llm,
                audit_path=cfg.audit_log_path,
            )
        except _UPSTREAM_ERRORS as exc:
            with session.lock:
                turn.verdict = None  # let the client retry after a backend failure
            raise HTTPException(
                status_code=502, detail=f"model backend failed: {type(exc).__name__}: {exc}"
            ) from exc
        size_series.append(store.stats().triple_count)
        if cfg.store_path:
            Path(cfg.store_path).parent.mkdir(parents=True, exist_ok=True)
            store.save(cfg.store_path)
        return {"evolution": _evolution_summary(record)}

    @app.get("/api/kg/stats")
    def kg_stats():
        stats = store.stats()
        return {
            "triple_count": stats.triple_count,
            "entity_count": stats.entity_count,
            "relation_count": stats.relation_count,
            "size_series": list(size_series),
        }

    @app.get("/api/kg/search")
    def kg_search(entity: str = Query(min_length=1)):
        return {"triples": [t.as_dict() for t in store.exact_match(entity)]}

    @app.get("/api/config")
    def get_config():
        return redacted(cfg)

    @app.get("/api/health")
    def health():
        return {"status": "ok"}

    if cfg.static_dir and Path(cfg.static_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(cfg.static_dir), html=True), name="console")

    return app
