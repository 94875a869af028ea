"""Five-step commentary generation: peg, ranked main arguments, supporting
arguments, retrieval-grounded evidence, and article combination."""

from __future__ import annotations

import hashlib
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Protocol

from .errors import (
    EmptyInput,
    GatewayError,
    IndexOutOfRange,
    SearchProviderError,
    StagePreconditionError,
)
from .gateway import CompletionRequest, LlmGateway, TokenBudget
from .knowledge import KnowledgeStore
from .ranking import RankedCandidate, ScorerModel, rank
from .session import (
    EvidenceBlock,
    Session,
    apply_event,
    build_edit_event,
    invalid_markers,
    make_event,
    new_session_id,
    strip_markers,
)
from .taxonomy import DIRECTIONS, STRUCTURES, display_direction
from .templates import format_reference_block

logger = logging.getLogger(__name__)

TOP_SEARCH_RESULTS = 3


@dataclass(frozen=True)
class SearchHit:
    title: str
    content: str


class SearchProvider(Protocol):
    def search(self, keywords: str) -> list[SearchHit]: ...


class MockSearchProvider:
    """Deterministic offline stand-in for the event-detail search engine."""

    def search(self, keywords: str) -> list[SearchHit]:
        digest = hashlib.sha256(keywords.encode("utf-8")).hexdigest()[:8]
        return [
            SearchHit(
                title=f"Result {i} for {keywords}",
                content=f"Mock search content {i} about {keywords} ({digest}).",
            )
            for i in range(1, 6)
        ]


class KnowledgeSearchProvider:
    """Serves event details from the local knowledge index."""

    def __init__(self, store: KnowledgeStore, k_max: int = 5):
        self._store = store
        self._k_max = k_max

    def search(self, keywords: str) -> list[SearchHit]:
        results = self._store.search(keywords, threshold=0.0, k_max=self._k_max)
        return [SearchHit(title=r.record_id, content=r.snippet) for r in results]


@dataclass
class Commentary:
    title: str
    main_argument: str
    sections: list[tuple[str, EvidenceBlock]]
    ending: str
    assembled_text: str

    def to_json(self) -> dict:
        return {
            "title": self.title,
            "main_argument": self.main_argument,
            "sections": [
                {"supporting_argument": argument, "evidence": block.to_json()}
                for argument, block in self.sections
            ],
            "ending": self.ending,
            "assembled_text": self.assembled_text,
        }

    def to_markdown(self) -> str:
        parts = [f"# {self.title}", "", self.main_argument, ""]
        for argument, block in self.sections:
            parts.extend([argument, "", block.text, ""])
            if block.references:
                parts.extend(
                    f"> [{r.ref_number}] {r.snippet}" for r in block.references
                )
                parts.append("")
        parts.append(self.ending)
        return "\n".join(parts).rstrip() + "\n"


def assemble_text(session: Session) -> str:
    """Plain-text article in canonical order: title, main argument, sections, ending."""
    parts = [session.title, "", session.main_argument, ""]
    for argument, block in zip(session.supporting_arguments, session.evidence):
        parts.extend([argument, "", block.text if block else "", ""])
    parts.append(session.ending)
    return "\n".join(parts).rstrip() + "\n"


def preceding_text(session: Session) -> str:
    """Everything the combination prompts see: the article body before title/ending."""
    parts = [session.main_argument, ""]
    for argument, block in zip(session.supporting_arguments, session.evidence):
        parts.extend([argument, "", block.text if block else "", ""])
    return "\n".join(parts).strip()


@dataclass
class PipelineConfig:
    retrieval_threshold: float = 0.6
    retrieval_k_max: int = 5
    m_max: int = 5
    token_budget: int | None = None


class PipelineEngine:
    """Runs the staged generation against one gateway, knowledge store and ranker.

    Every state change is applied through an event and forwarded to the sink,
    so sessions replay from their logs.
    """

    def __init__(
        self,
        gateway: LlmGateway,
        knowledge: KnowledgeStore,
        ranker: ScorerModel | None = None,
        search_provider: SearchProvider | None = None,
        config: PipelineConfig | None = None,
        event_sink: Callable[[str, dict], None] | None = None,
    ):
        self.gateway = gateway
        self.knowledge = knowledge
        self.ranker = ranker or ScorerModel.zeros()
        self.search_provider = search_provider or MockSearchProvider()
        self.config = config or PipelineConfig()
        self._event_sink = event_sink
        self._budgets: dict[str, TokenBudget] = {}

    # --- plumbing ------------------------------------------------------------

    def _record(self, session: Session, op: str, data: dict) -> None:
        event = make_event(session, op, data)
        apply_event(session, event)
        if self._event_sink:
            self._event_sink(session.id, event)

    def _budget(self, session: Session) -> TokenBudget:
        if session.id not in self._budgets:
            self._budgets[session.id] = TokenBudget(self.config.token_budget)
        return self._budgets[session.id]

    # --- step 0: session -----------------------------------------------------

    def start_session(self, keywords: str | None = None,
                      event_detail: str | None = None) -> Session:
        if not (keywords and keywords.strip()) and not (event_detail and event_detail.strip()):
            raise EmptyInput("need keywords or a manual event detail")
        if event_detail and event_detail.strip():
            detail = event_detail.strip()
            keywords = keywords.strip() if keywords else None
        else:
            hits = self.search_provider.search(keywords.strip())
            if not hits:
                raise SearchProviderError(f"no search results for {keywords!r}")
            detail = "\n\n".join(h.content for h in hits[:TOP_SEARCH_RESULTS])
            keywords = keywords.strip()
        session = Session(id=new_session_id())
        self._record(
            session,
            "session_started",
            {"id": session.id, "keywords": keywords, "event_detail": detail},
        )
        return session

    # --- step 1: peg -----------------------------------------------------------

    def generate_peg(self, session: Session) -> str:
        if not session.event_detail:
            raise StagePreconditionError("event detail is empty")
        result = self.gateway.complete_template(
            "peg", {"event_detail": session.event_detail}, budget=self._budget(session)
        )
        self._record(session, "peg_set", {"peg": result.text, "origin": "generated"})
        return session.peg

    # --- step 2: main arguments --------------------------------------------------

    def generate_main_arguments(
        self, session: Session, directions: list[str] | None = None
    ) -> list[RankedCandidate]:
        if session.stage_status["peg"] != "valid":
            raise StagePreconditionError("peg stage is not valid")
        chosen = list(directions) if directions else list(DIRECTIONS)
        for direction in chosen:
            if direction not in DIRECTIONS:
                raise EmptyInput(f"unknown direction: {direction}")
        budget = self._budget(session)

        def one(direction: str) -> str:
            return self.gateway.complete_template(
                "main_argument",
                {
                    "direction": display_direction(direction),
                    "peg": session.peg,
                    "event_detail": session.event_detail,
                },
                budget=budget,
            ).text

        texts: dict[str, str] = {}
        warnings: list[str] = []
        max_workers = min(len(chosen), self.gateway.config.inflight_limit)
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            futures = {direction: pool.submit(one, direction) for direction in chosen}
            for direction, future in futures.items():
                try:
                    texts[direction] = future.result()
                except GatewayError as exc:
                    warnings.append(f"main argument for {direction} failed: {exc}")
        if not texts:
            raise GatewayError("all main-argument generations failed")

        ordered = [(texts[d], d) for d in chosen if d in texts]
        candidates = rank(self.ranker, ordered)
        self._record(
            session,
            "candidates_set",
            {"candidates": [c.to_json() for c in candidates], "warnings": warnings,
             "origin": "generated"},
        )
        return session.candidates

    def select_main_argument(self, session: Session, rank_index: int | None = None,
                             text: str | None = None) -> Session:
        if text is not None and text.strip():
            self._record(
                session, "main_argument_set", {"text": text.strip(), "origin": "manual"}
            )
            return session
        if not session.candidates:
            raise StagePreconditionError("no candidates to select from")
        if rank_index is None or not 1 <= rank_index <= len(session.candidates):
            raise IndexOutOfRange(
                f"rank {rank_index} outside 1..{len(session.candidates)}"
            )
        chosen = next(c for c in session.candidates if c.rank == rank_index)
        self._record(
            session,
            "main_argument_set",
            {"text": chosen.text, "origin": f"rank:{rank_index}"},
        )
        return session

    # --- step 3: supporting arguments ---------------------------------------------

    def generate_supporting_arguments(self, session: Session, structure: str) -> list[str]:
        if session.stage_status["main_argument"] != "valid":
            raise StagePreconditionError("main argument is not set")
        if structure not in STRUCTURES:
            raise EmptyInput(f"unknown structure: {structure}; expected one of {STRUCTURES}")
        items = self.gateway.complete_parsed_template(
            "supporting_argument",
            {
                "main_argument": session.main_argument,
                "event_detail": session.event_detail,
                "structure": structure,
            },
            parser="numbered_list",
            budget=self._budget(session),
        )
        warnings = []
        if len(items) > self.config.m_max:
            warnings.append(
                f"model produced {len(items)} supporting arguments, keeping first "
                f"{self.config.m_max}"
            )
            items = items[: self.config.m_max]
        self._record(
            session,
            "supporting_set",
            {"structure": structure, "arguments": items, "warnings": warnings,
             "origin": "generated"},
        )
        return session.supporting_arguments

    # --- step 4: evidence ------------------------------------------------------------

    def generate_evidence(self, session: Session, index: int) -> EvidenceBlock:
        if session.stage_status["supporting_arguments"] != "valid":
            raise StagePreconditionError("supporting arguments are not valid")
        if not 0 <= index < len(session.supporting_arguments):
            raise IndexOutOfRange(
                f"evidence index {index} outside 0..{len(session.supporting_arguments) - 1}"
            )
        argument = session.supporting_arguments[index]
        references = self.knowledge.search(
            argument,
            threshold=self.config.retrieval_threshold,
            k_max=self.config.retrieval_k_max,
        )
        reference_block = format_reference_block([r.snippet for r in references])
        slots = {
            "main_argument": session.main_argument,
            "supporting_argument": argument,
            "reference": reference_block,
        }
        budget = self._budget(session)
        result = self.gateway.complete_template("evidence", slots, budget=budget)
        text = result.text
        warnings: list[str] = []

        bad = invalid_markers(text, len(references))
        if bad:
            request = self.gateway.request_for("evidence", slots)
            reprompt = CompletionRequest(
                prompt=(
                    f"{request.prompt}\n\nYour previous continuation cited reference "
                    f"numbers that do not exist. Cite only numbers between 1 and "
                    f"{len(references)}."
                ),
                max_tokens=request.max_tokens,
                temperature=request.temperature,
                template_id=request.template_id,
            )
            text = self.gateway.complete(reprompt, budget).text
            bad = invalid_markers(text, len(references))
            if bad:
                text = strip_markers(text, bad)
                warnings.append(f"evidence {index}: stripped unresolved markers {bad}")

        block = EvidenceBlock(
            text=text, references=references, grounded=len(references) > 0
        )
        block.validate()
        self._record(
            session,
            "evidence_set",
            {"index": index, "block": block.to_json(), "warnings": warnings,
             "origin": "generated"},
        )
        return session.evidence[index]

    # --- step 5: combination ------------------------------------------------------------

    def combine_article(self, session: Session) -> Commentary:
        if session.stage_status["supporting_arguments"] != "valid":
            raise StagePreconditionError("supporting arguments are not valid")
        missing = [i for i, block in enumerate(session.evidence) if block is None]
        if missing or not session.evidence:
            raise StagePreconditionError(
                f"evidence blocks missing for indexes {missing or 'all'}"
            )
        # an upstream edit leaves stale title/ending; discard them before regenerating
        if session.stage_status["combination"] == "stale":
            session.title = ""
            session.ending = ""
        budget = self._budget(session)
        body = preceding_text(session)
        ending = self.gateway.complete_template(
            "ending", {"preceding_text": body}, budget=budget
        ).text
        title = self.gateway.complete_template(
            "title", {"preceding_text": body}, budget=budget
        ).text
        self._record(session, "combined", {"title": title, "ending": ending,
                                           "origin": "generated"})
        return self.commentary_of(session)

    def commentary_of(self, session: Session) -> Commentary:
        if session.stage_status["combination"] != "valid":
            raise StagePreconditionError("combination stage is not valid")
        sections = [
            (argument, block)
            for argument, block in zip(session.supporting_arguments, session.evidence)
        ]
        return Commentary(
            title=session.title,
            main_argument=session.main_argument,
            sections=sections,
            ending=session.ending,
            assembled_text=assemble_text(session),
        )

    # --- edits ----------------------------------------------------------------------

    def edit_stage(self, session: Session, target: str, payload) -> Session:
        event = build_edit_event(session, target, payload)
        apply_event(session, event)
        if self._event_sink:
            self._event_sink(session.id, event)
        return session

    # --- baseline one-shot mode ---------------------------------------------------------

    def one_shot_generate(
        self,
        event_detail: str,
        title: str | None = None,
        arguments: list[str] | None = None,
        evidence: list[str] | None = None,
    ) -> Commentary:
        if not event_detail or not event_detail.strip():
            raise EmptyInput("event detail must be non-empty")
        arguments = arguments or []
        evidence = evidence or []
        if len(arguments) > 3 or len(evidence) > len(arguments):
            raise EmptyInput("at most 3 argument/evidence pairs, evidence needs an argument")
        if arguments:
            lines = []
            for i, argument in enumerate(arguments, start=1):
                lines.append(f"Argument {i}: {argument}")
                if i <= len(evidence):
                    lines.append(f"Evidence {i}: {evidence[i - 1]}")
            references = "\n".join(lines)
        else:
            references = "none"
        result = self.gateway.complete_template(
            "baseline_one_shot",
            {
                "event_detail": event_detail.strip(),
                "title": title or "an appropriate title",
                "references": references,
            },
        )
        text = result.text
        parsed_title = title or _first_title_line(text)
        return Commentary(
            title=parsed_title,
            main_argument="",
            sections=[],
            ending="",
            assembled_text=text,
        )

    # --- convenience: full automatic run ----------------------------------------------

    def run_auto(
        self,
        keywords: str | None = None,
        event_detail: str | None = None,
        structure: str = "parallel",
        directions: list[str] | None = None,
        select_rank: int = 1,
    ) -> tuple[Session, Commentary]:
        session = self.start_session(keywords=keywords, event_detail=event_detail)
        self.generate_peg(session)
        self.generate_main_arguments(session, directions)
        self.select_main_argument(session, rank_index=select_rank)
        self.generate_supporting_arguments(session, structure)
        for index in range(len(session.supporting_arguments)):
            self.generate_evidence(session, index)
        commentary = self.combine_article(session)
        return session, commentary


def _first_title_line(text: str) -> str:
    for line in text.splitlines():
        line = line.strip()
        if line.lower().startswith("title:"):
            return line[len("title:"):].strip()
    for line in text.splitlines():
        if line.strip():
            return line.strip()
    return "Untitled"
