"""HTTP facade over the engine: thin endpoint-per-operation wrappers, JSON errors."""

from __future__ import annotations

import json
import logging
import socket
import threading
from dataclasses import dataclass, field

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, PlainTextResponse
from pydantic import BaseModel

from . import __version__
from .config import AppConfig
from .errors import (
    BindError,
    ConfigError,
    CorruptLog,
    DuplicateInBatch,
    EmptyInput,
    EngineError,
    GatewayError,
    IndexOutOfRange,
    NotFound,
    OutOfOrderEdit,
    ParseError,
    SchemaError,
    SearchProviderError,
    StagePreconditionError,
)
from .evaluation import HumanScoreSet, evaluate
from .gateway import LlmGateway
from .knowledge import KnowledgeStore
from .persistence import SessionStore
from .pipeline import KnowledgeSearchProvider, MockSearchProvider, PipelineConfig, PipelineEngine
from .ranking import ScorerModel
from .session import EDIT_TARGETS, Session
from .templates import TemplateRegistry

logger = logging.getLogger(__name__)


def _error_code(exc: EngineError) -> tuple[str, int]:
    if isinstance(exc, NotFound):
        return "not_found", 404
    if isinstance(exc, (OutOfOrderEdit, DuplicateInBatch)):
        return "conflict", 409
    if isinstance(exc, ParseError):
        return "parse_failed", 502
    if isinstance(exc, (GatewayError, SearchProviderError)):
        return "gateway_failed", 502
    if isinstance(
        exc,
        (EmptyInput, SchemaError, StagePreconditionError, IndexOutOfRange, ConfigError),
    ):
        return "bad_request", 400
    return "internal", 500


class StartSessionBody(BaseModel):
    keywords: str | None = None
    event_detail: str | None = None


class MainArgumentsBody(BaseModel):
    directions: list[str] | None = None


class SelectBody(BaseModel):
    rank: int | None = None
    text: str | None = None


class SupportingBody(BaseModel):
    structure: str


class EditBody(BaseModel):
    output: str | list[str]


class EvaluateBody(BaseModel):
    text: str


class IngestEventsBody(BaseModel):
    titles: list[str]


class IngestBookBody(BaseModel):
    title: str
    subject: str
    body: str


class HumanScoresBody(BaseModel):
    item_id: str
    scores: dict[str, float] = {}
    timeliness: float | None = None


@dataclass
class AppState:
    config: AppConfig
    gateway: LlmGateway
    knowledge: KnowledgeStore
    engine: PipelineEngine
    sessions: SessionStore
    cache: dict[str, Session] = field(default_factory=dict)
    locks: dict[str, threading.Lock] = field(default_factory=dict)
    _registry_lock: threading.Lock = field(default_factory=threading.Lock)

    def lock_for(self, session_id: str) -> threading.Lock:
        with self._registry_lock:
            return self.locks.setdefault(session_id, threading.Lock())

    def get_session(self, session_id: str) -> Session:
        if session_id in self.cache:
            return self.cache[session_id]
        session, torn_line = self.sessions.load_with_recovery(session_id)
        if torn_line is not None:
            session.warnings.append(
                f"recovered: dropped torn event-log line {torn_line}"
            )
            logger.warning("session %s: torn event-log line %d dropped",
                           session_id, torn_line)
        self.cache[session_id] = session
        return session


def build_state(config: AppConfig) -> AppState:
    config.validate()
    config.ensure_data_dir()
    templates = (
        TemplateRegistry.from_file(config.templates_path)
        if config.templates_path
        else TemplateRegistry()
    )
    gateway = LlmGateway(config=config.gateway, templates=templates)
    knowledge = KnowledgeStore(config.knowledge_path)
    ranker = (
        ScorerModel.load(config.ranking_model_path)
        if config.ranking_model_path
        else None
    )
    sessions = SessionStore(config.sessions_dir)
    if config.search_provider == "knowledge":
        search_provider = KnowledgeSearchProvider(knowledge)
    else:
        search_provider = MockSearchProvider()
    engine = PipelineEngine(
        gateway=gateway,
        knowledge=knowledge,
        ranker=ranker,
        search_provider=search_provider,
        config=PipelineConfig(
            retrieval_threshold=config.retrieval.threshold,
            retrieval_k_max=config.retrieval.k_max,
            m_max=config.limits.m_max,
            token_budget=config.limits.token_budget,
        ),
        event_sink=sessions.append,
    )
    return AppState(
        config=config, gateway=gateway, knowledge=knowledge,
        engine=engine, sessions=sessions,
    )


def create_app(config: AppConfig | None = None, state: AppState | None = None) -> FastAPI:
    state = state or build_state(config or AppConfig())
    app = FastAPI(title="commentary-engine", version=__version__)
    app.state.engine_state = state

    @app.exception_handler(EngineError)
    async def engine_error_handler(request: Request, exc: EngineError):
        code, status = _error_code(exc)
        detail = None
        if isinstance(exc, CorruptLog):
            detail = {"line_number": exc.line_number, "path": exc.path}
        if isinstance(exc, ParseError) and exc.raw_text:
            detail = {"raw_text": exc.raw_text[:500]}
        return JSONResponse(
            status_code=status,
            content={"code": code, "message": str(exc), "detail": detail},
        )

    @app.exception_handler(ValueError)
    async def value_error_handler(request: Request, exc: ValueError):
        return JSONResponse(
            status_code=400,
            content={"code": "bad_request", "message": str(exc), "detail": None},
        )

    # --- health ---------------------------------------------------------------

    @app.get("/v1/health")
    def health():
        return {"status": "ok", "version": __version__}

    # --- sessions ---------------------------------------------------------------

    @app.post("/v1/sessions")
    def start_session(body: StartSessionBody):
        session = state.engine.start_session(
            keywords=body.keywords, event_detail=body.event_detail
        )
        state.cache[session.id] = session
        return session.to_json()

    @app.get("/v1/sessions/{session_id}")
    def get_session(session_id: str):
        with state.lock_for(session_id):
            return state.get_session(session_id).to_json()

    @app.post("/v1/sessions/{session_id}/peg")
    def generate_peg(session_id: str):
        with state.lock_for(session_id):
            session = state.get_session(session_id)
            state.engine.generate_peg(session)
            return session.to_json()

    @app.post("/v1/sessions/{session_id}/main-arguments")
    def generate_main_arguments(session_id: str, body: MainArgumentsBody):
        with state.lock_for(session_id):
            session = state.get_session(session_id)
            candidates = state.engine.generate_main_arguments(session, body.directions)
            return {"candidates": [c.to_json() for c in candidates],
                    "session": session.to_json()}

    @app.post("/v1/sessions/{session_id}/main-argument/select")
    def select_main_argument(session_id: str, body: SelectBody):
        with state.lock_for(session_id):
            session = state.get_session(session_id)
            state.engine.select_main_argument(session, rank_index=body.rank, text=body.text)
            return session.to_json()

    @app.post("/v1/sessions/{session_id}/supporting-arguments")
    def generate_supporting(session_id: str, body: SupportingBody):
        with state.lock_for(session_id):
            session = state.get_session(session_id)
            state.engine.generate_supporting_arguments(session, body.structure)
            return session.to_json()

    @app.post("/v1/sessions/{session_id}/evidence/{index}")
    def generate_evidence(session_id: str, index: int):
        with state.lock_for(session_id):
            session = state.get_session(session_id)
            state.engine.generate_evidence(session, index)
            return session.to_json()

    @app.post("/v1/sessions/{session_id}/combine")
    def combine(session_id: str):
        with state.lock_for(session_id):
            session = state.get_session(session_id)
            commentary = state.engine.combine_article(session)
            return {"commentary": commentary.to_json(), "session": session.to_json()}

    @app.patch("/v1/sessions/{session_id}/stages/{stage}")
    def edit_stage(session_id: str, stage: str, body: EditBody):
        if stage not in EDIT_TARGETS:
            raise EmptyInput(f"unknown stage {stage!r}; expected one of {EDIT_TARGETS}")
        with state.lock_for(session_id):
            session = state.get_session(session_id)
            state.engine.edit_stage(session, stage, body.output)
            return session.to_json()

    @app.get("/v1/sessions/{session_id}/export")
    def export_session(session_id: str, format: str = "md"):
        with state.lock_for(session_id):
            session = state.get_session(session_id)
            commentary = state.engine.commentary_of(session)
        if format == "md":
            return PlainTextResponse(commentary.to_markdown(), media_type="text/markdown")
        if format == "json":
            return commentary.to_json()
        raise EmptyInput(f"unknown export format: {format}")

    # --- knowledge ---------------------------------------------------------------

    @app.post("/v1/knowledge/events")
    def ingest_events(body: IngestEventsBody):
        report = state.knowledge.refresh_daily(body.titles, state.gateway)
        return {
            "added": report.added,
            "failed": report.failed,
            "skipped": report.skipped,
            "failures": [{"title": t, "error": e} for t, e in report.failures],
        }

    @app.post("/v1/knowledge/books")
    def ingest_book(body: IngestBookBody):
        chunks = state.knowledge.ingest_book(body.title, body.subject, body.body)
        return {"chunks": len(chunks), "doc_count": state.knowledge.stats.doc_count}

    @app.get("/v1/knowledge/search")
    def search_knowledge(q: str, threshold: float | None = None, k: int | None = None):
        results = state.knowledge.search(
            q,
            threshold=state.config.retrieval.threshold if threshold is None else threshold,
            k_max=state.config.retrieval.k_max if k is None else k,
        )
        return {"results": [r.to_json() for r in results]}

    # --- evaluation ---------------------------------------------------------------

    @app.post("/v1/evaluate")
    def evaluate_text(body: EvaluateBody):
        report = evaluate(body.text, state.gateway)
        return report.to_json()

    @app.post("/v1/human-scores")
    def import_human_scores(body: HumanScoresBody):
        entry = HumanScoreSet(
            item_id=body.item_id, scores=dict(body.scores), timeliness=body.timeliness
        )
        entry.validate()
        path = state.config.ensure_data_dir() / "human_scores.jsonl"
        with path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps({
                "item_id": entry.item_id,
                "scores": entry.scores,
                "timeliness": entry.timeliness,
            }, ensure_ascii=False) + "\n")
        return {"stored": entry.item_id}

    return app


def serve(config: AppConfig) -> None:
    """Run the HTTP service until signalled; in-flight requests drain on shutdown."""
    import uvicorn

    config.validate()
    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.bind((config.http.host, config.http.port))
    except OSError as exc:
        raise BindError(
            f"cannot bind {config.http.host}:{config.http.port}: {exc}"
        ) from exc
    finally:
        probe.close()

    app = create_app(config)
    uvicorn.run(app, host=config.http.host, port=config.http.port, log_level="info")
