"""Evidence knowledge store: event/book ingestion, JSONL persistence, BM25 retrieval."""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Union

from .bm25 import Bm25Index, IndexStats
from .chunking import ChunkingConfig, split_chunks
from .errors import DuplicateInBatch, EngineError, GatewayError, ParseError, SchemaError
from .gateway import LlmGateway
from .taxonomy import DIRECTIONS, OTHER_DIRECTION, normalize_direction

logger = logging.getLogger(__name__)

EVENT_ELEMENT_KEYS = ("time", "location", "person", "cause", "process", "result")

SNIPPET_CHARS = 200


def _squash(text: str) -> str:
    """Single-line snippet for prompts and exports."""
    return " ".join(text.split())[:SNIPPET_CHARS]


@dataclass
class EventKnowledge:
    id: str
    title: str
    summary: str
    direction: str
    elements: dict[str, str]
    paragraph: str
    ingested_at: str  # ISO-8601 UTC

    def validate(self) -> None:
        if tuple(sorted(self.elements)) != tuple(sorted(EVENT_ELEMENT_KEYS)):
            raise SchemaError(f"elements must have exactly keys {EVENT_ELEMENT_KEYS}")
        if self.direction not in DIRECTIONS and self.direction != OTHER_DIRECTION:
            raise SchemaError(f"direction not canonical: {self.direction}")
        if not self.paragraph:
            raise SchemaError("paragraph must be non-empty")

    def search_text(self) -> str:
        return "\n".join([self.title, self.summary, self.paragraph])

    def snippet(self) -> str:
        return _squash(self.paragraph)

    def to_json(self) -> dict:
        return {
            "kind": "event",
            "id": self.id,
            "title": self.title,
            "summary": self.summary,
            "direction": self.direction,
            "elements": dict(self.elements),
            "paragraph": self.paragraph,
            "ingested_at": self.ingested_at,
        }


@dataclass
class BookChunk:
    id: str
    book_title: str
    subject: str
    seq: int
    text: str

    def validate(self, max_chunk_chars: int = 512) -> None:
        if not 1 <= len(self.text) <= max_chunk_chars:
            raise SchemaError(f"chunk text length {len(self.text)} outside [1, {max_chunk_chars}]")
        if self.seq < 0:
            raise SchemaError("seq must be >= 0")

    def search_text(self) -> str:
        return self.text

    def snippet(self) -> str:
        return _squash(self.text)

    def to_json(self) -> dict:
        return {
            "kind": "book_chunk",
            "id": self.id,
            "book_title": self.book_title,
            "subject": self.subject,
            "seq": self.seq,
            "text": self.text,
        }


KnowledgeRecord = Union[EventKnowledge, BookChunk]


def record_from_json(obj: dict) -> KnowledgeRecord:
    kind = obj.get("kind")
    if kind == "event":
        return EventKnowledge(
            id=obj["id"],
            title=obj["title"],
            summary=obj["summary"],
            direction=obj["direction"],
            elements=dict(obj["elements"]),
            paragraph=obj["paragraph"],
            ingested_at=obj["ingested_at"],
        )
    if kind == "book_chunk":
        return BookChunk(
            id=obj["id"],
            book_title=obj["book_title"],
            subject=obj["subject"],
            seq=obj["seq"],
            text=obj["text"],
        )
    raise SchemaError(f"unknown record kind: {kind!r}")


@dataclass(frozen=True)
class RetrievalResult:
    record_id: str
    raw_score: float
    norm_score: float
    snippet: str
    ref_number: int

    def to_json(self) -> dict:
        return {
            "record_id": self.record_id,
            "raw_score": self.raw_score,
            "norm_score": self.norm_score,
            "snippet": self.snippet,
            "ref_number": self.ref_number,
        }


@dataclass
class IngestReport:
    added: int = 0
    failed: int = 0
    skipped: int = 0
    failures: list[tuple[str, str]] = field(default_factory=list)


def event_id(title: str, date: str) -> str:
    """Stable id so re-ingesting the same title on the same day is a no-op."""
    return hashlib.sha1(f"{title}|{date}".encode("utf-8")).hexdigest()[:16]


def book_chunk_id(book_title: str, seq: int) -> str:
    return hashlib.sha1(book_title.encode("utf-8")).hexdigest()[:10] + f"-{seq:04d}"


class KnowledgeStore:
    """Holds all knowledge records, keeps the BM25 index in sync, persists to JSONL.

    Gateway calls during ingestion happen outside the index lock; only the
    final record insert touches the index.
    """

    def __init__(self, path: str | Path | None = None,
                 chunking: ChunkingConfig | None = None):
        self._path = Path(path) if path else None
        self._chunking = chunking or ChunkingConfig()
        self._records: dict[str, KnowledgeRecord] = {}
        self._index = Bm25Index()
        if self._path and self._path.exists():
            self._load()

    def __len__(self) -> int:
        return len(self._records)

    def get(self, record_id: str) -> KnowledgeRecord | None:
        return self._records.get(record_id)

    def has_event_for(self, title: str, date: str | None = None) -> bool:
        return event_id(title, date or _today()) in self._records

    # --- ingestion ---------------------------------------------------------

    def ingest_event(self, title: str, gateway: LlmGateway) -> EventKnowledge:
        """Build event knowledge through the four ingestion prompts and index it."""
        if not title or not title.strip():
            raise SchemaError("event title must be non-empty")
        title = title.strip()
        rec_id = event_id(title, _today())
        existing = self._records.get(rec_id)
        if isinstance(existing, EventKnowledge):
            return existing

        summary = gateway.complete_template("ingest_summarize", {"title": title}).text
        direction = self._classify_direction(title, gateway)
        try:
            elements = gateway.complete_parsed_template(
                "ingest_elements", {"title": title}, parser="six_elements"
            )
        except ParseError as exc:
            raise SchemaError(f"six-element extraction failed: {exc}") from exc
        elements_text = "\n".join(f"{k}: {elements[k]}" for k in EVENT_ELEMENT_KEYS)
        paragraph = gateway.complete_template(
            "ingest_paragraph", {"elements": elements_text}
        ).text

        record = EventKnowledge(
            id=rec_id,
            title=title,
            summary=summary,
            direction=direction,
            elements=elements,
            paragraph=paragraph,
            ingested_at=datetime.now(timezone.utc).isoformat(),
        )
        record.validate()
        self.index_upsert([record])
        return record

    def _classify_direction(self, title: str, gateway: LlmGateway) -> str:
        for attempt in range(2):
            raw = gateway.complete_template("ingest_direction", {"title": title}).text
            candidate = _last_line(raw)
            direction = normalize_direction(candidate)
            if direction:
                return direction
            if attempt == 0:
                logger.warning("direction %r not canonical for %r, retrying", candidate, title)
        logger.warning("direction fell back to %r for %r", OTHER_DIRECTION, title)
        return OTHER_DIRECTION

    def ingest_book(self, book_title: str, subject: str, body: str,
                    cfg: ChunkingConfig | None = None) -> list[BookChunk]:
        """Chunk a book body and index every chunk; re-ingesting a title replaces it."""
        cfg = cfg or self._chunking
        texts = split_chunks(body, cfg)
        chunks = [
            BookChunk(
                id=book_chunk_id(book_title, seq),
                book_title=book_title,
                subject=subject,
                seq=seq,
                text=text,
            )
            for seq, text in enumerate(texts)
        ]
        for chunk in chunks:
            chunk.validate(cfg.max_chunk_chars)

        stale = [
            rec.id
            for rec in self._records.values()
            if isinstance(rec, BookChunk) and rec.book_title == book_title
        ]
        if stale:
            self._remove(stale)
        self.index_upsert(chunks)
        return chunks

    def index_upsert(self, records: list[KnowledgeRecord]) -> IndexStats:
        seen: set[str] = set()
        for rec in records:
            if rec.id in seen:
                raise DuplicateInBatch(rec.id)
            seen.add(rec.id)
        stats = self._index.upsert([(rec.id, rec.search_text()) for rec in records])
        replaced = any(rec.id in self._records for rec in records)
        for rec in records:
            self._records[rec.id] = rec
        if self._path:
            if replaced:
                self._rewrite()
            else:
                self._append(records)
        return stats

    def _remove(self, record_ids: list[str]) -> None:
        self._index.remove(record_ids)
        for rec_id in record_ids:
            self._records.pop(rec_id, None)
        if self._path:
            self._rewrite()

    def refresh_daily(self, source: Iterable[str], gateway: LlmGateway) -> IngestReport:
        """Feed of titles; per-item failures are recorded, never fatal."""
        report = IngestReport()
        for title in source:
            title = title.strip()
            if not title:
                continue
            if self.has_event_for(title):
                report.skipped += 1
                continue
            try:
                self.ingest_event(title, gateway)
                report.added += 1
            except (SchemaError, GatewayError, EngineError) as exc:
                report.failed += 1
                report.failures.append((title, str(exc)))
        return report

    # --- retrieval -----------------------------------------------------------

    def search(self, query: str, threshold: float = 0.6, k_max: int = 5) -> list[RetrievalResult]:
        if not 0.0 <= threshold <= 1.0:
            raise ValueError("threshold must be within [0, 1]")
        hits = self._index.search(query, threshold, k_max)
        return [
            RetrievalResult(
                record_id=hit.doc_id,
                raw_score=hit.raw_score,
                norm_score=hit.norm_score,
                snippet=self._records[hit.doc_id].snippet(),
                ref_number=rank,
            )
            for rank, hit in enumerate(hits, start=1)
        ]

    @property
    def stats(self) -> IndexStats:
        return self._index.stats

    # --- persistence -----------------------------------------------------------

    def _load(self) -> None:
        with self._path.open("r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                record = record_from_json(json.loads(line))
                self._records[record.id] = record  # later lines win
        self._index.upsert([(r.id, r.search_text()) for r in self._records.values()])

    def _append(self, records: list[KnowledgeRecord]) -> None:
        self._path.parent.mkdir(parents=True, exist_ok=True)
        with self._path.open("a", encoding="utf-8") as fh:
            for rec in records:
                fh.write(json.dumps(rec.to_json(), ensure_ascii=False) + "\n")

    def _rewrite(self) -> None:
        self._path.parent.mkdir(parents=True, exist_ok=True)
        tmp = self._path.with_suffix(".tmp")
        with tmp.open("w", encoding="utf-8") as fh:
            for rec in self._records.values():
                fh.write(json.dumps(rec.to_json(), ensure_ascii=False) + "\n")
        tmp.replace(self._path)

    def save_index_snapshot(self, path: str | Path) -> None:
        self._index.save(path)


def _today() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%d")


def _last_line(text: str) -> str:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    return lines[-1] if lines else ""
