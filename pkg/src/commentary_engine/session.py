"""Session state for one commentary: stage outputs, edit points, invalidation.

All mutation goes through apply_event, so a session can be reconstructed by
replaying its append-only event log. Stage statuses are "empty" (never
produced), "valid", or "stale" (produced, then invalidated by an upstream
edit); outputs of invalidated stages are cleared so that non-empty stages
always form a prefix of the stage order.
"""

from __future__ import annotations

import re
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone

from .errors import EngineError, OutOfOrderEdit, SchemaError
from .knowledge import RetrievalResult
from .ranking import RankedCandidate
from .taxonomy import STAGES, stage_index

_MARKER_RE = re.compile(r"\[(\d+)\]")

# editable targets; title and ending are the two halves of the combination stage
EDIT_TARGETS = ("peg", "main_argument", "supporting_arguments", "evidence", "title", "ending")


def markers_in(text: str) -> list[int]:
    return [int(m) for m in _MARKER_RE.findall(text)]


def invalid_markers(text: str, n_references: int) -> list[int]:
    return sorted({n for n in markers_in(text) if n < 1 or n > n_references})


def strip_markers(text: str, numbers: list[int]) -> str:
    for n in numbers:
        text = text.replace(f"[{n}]", "")
    return text


@dataclass
class EvidenceBlock:
    text: str
    references: list[RetrievalResult] = field(default_factory=list)
    grounded: bool = False

    def validate(self) -> None:
        bad = invalid_markers(self.text, len(self.references))
        if bad:
            raise SchemaError(f"markers {bad} do not resolve to held references")
        if self.grounded != (len(self.references) > 0):
            raise SchemaError("grounded flag inconsistent with references")

    def to_json(self) -> dict:
        return {
            "text": self.text,
            "references": [r.to_json() for r in self.references],
            "grounded": self.grounded,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "EvidenceBlock":
        return cls(
            text=obj["text"],
            references=[RetrievalResult(**r) for r in obj["references"]],
            grounded=obj["grounded"],
        )


def _candidate_from_json(obj: dict) -> RankedCandidate:
    return RankedCandidate(
        text=obj["text"], direction=obj["direction"],
        score=obj["score"], rank=obj["rank"],
    )


@dataclass
class Session:
    id: str
    keywords: str | None = None
    event_detail: str = ""
    peg: str = ""
    candidates: list[RankedCandidate] = field(default_factory=list)
    main_argument: str = ""
    structure: str | None = None
    supporting_arguments: list[str] = field(default_factory=list)
    evidence: list[EvidenceBlock | None] = field(default_factory=list)
    title: str = ""
    ending: str = ""
    stage_status: dict[str, str] = field(
        default_factory=lambda: {stage: "empty" for stage in STAGES}
    )
    history: list[dict] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    event_count: int = 0

    @property
    def stage_valid(self) -> dict[str, bool]:
        return {stage: status == "valid" for stage, status in self.stage_status.items()}

    def valid_prefix_len(self) -> int:
        count = 0
        for stage in STAGES:
            if self.stage_status[stage] == "valid":
                count += 1
            else:
                break
        return count

    def require_valid_through(self, stage: str) -> None:
        """All stages strictly before `stage` must be valid."""
        for prior in STAGES[: stage_index(stage)]:
            if self.stage_status[prior] != "valid":
                raise OutOfOrderEdit(
                    f"stage {stage} requires valid {prior} (currently "
                    f"{self.stage_status[prior]})"
                )

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "keywords": self.keywords,
            "event_detail": self.event_detail,
            "peg": self.peg,
            "candidates": [c.to_json() for c in self.candidates],
            "main_argument": self.main_argument,
            "structure": self.structure,
            "supporting_arguments": list(self.supporting_arguments),
            "evidence": [b.to_json() if b else None for b in self.evidence],
            "title": self.title,
            "ending": self.ending,
            "stage_status": dict(self.stage_status),
            "stage_valid": self.stage_valid,
            "history": list(self.history),
            "warnings": list(self.warnings),
        }


def new_session_id() -> str:
    return uuid.uuid4().hex[:12]


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def make_event(session: Session, op: str, data: dict) -> dict:
    return {"seq": session.event_count + 1, "ts": _now(), "op": op, "data": data}


def _clear_stage(session: Session, stage: str) -> None:
    if stage == "main_argument":
        session.candidates = []
        session.main_argument = ""
    elif stage == "supporting_arguments":
        session.supporting_arguments = []
        session.structure = None
    elif stage == "evidence":
        m = len(session.supporting_arguments)
        session.evidence = [None] * m if m else []
    elif stage == "combination":
        session.title = ""
        session.ending = ""


def invalidate_downstream(session: Session, stage: str) -> list[str]:
    """Mark every stage after `stage` stale (if produced) and clear its output."""
    flipped = []
    for later in STAGES[stage_index(stage) + 1 :]:
        if session.stage_status[later] == "valid":
            session.stage_status[later] = "stale"
            flipped.append(later)
        _clear_stage(session, later)
    return flipped


def _combination_status(session: Session) -> str:
    return "valid" if session.title and session.ending else session.stage_status["combination"]


def apply_event(session: Session, event: dict) -> None:
    """The single state-transition function, shared by live ops and replay."""
    op = event["op"]
    data = event["data"]

    if op == "session_started":
        session.id = data["id"]
        session.keywords = data.get("keywords")
        session.event_detail = data["event_detail"]
    elif op == "peg_set":
        session.peg = data["peg"]
        session.stage_status["peg"] = "valid"
        invalidate_downstream(session, "peg")
    elif op == "candidates_set":
        # regeneration voids any previous selection and everything after it;
        # the stage itself completes on selection, not on generation
        invalidate_downstream(session, "peg")
        session.candidates = [_candidate_from_json(c) for c in data["candidates"]]
    elif op == "main_argument_set":
        session.main_argument = data["text"]
        session.stage_status["main_argument"] = "valid"
        invalidate_downstream(session, "main_argument")
    elif op == "supporting_set":
        session.structure = data.get("structure", session.structure)
        session.supporting_arguments = list(data["arguments"])
        session.stage_status["supporting_arguments"] = "valid"
        invalidate_downstream(session, "supporting_arguments")
    elif op == "evidence_set":
        index = data["index"]
        block = EvidenceBlock.from_json(data["block"])
        if index < 0 or index >= len(session.evidence):
            raise EngineError(f"evidence index {index} out of range")
        session.evidence[index] = block
        if session.evidence and all(b is not None for b in session.evidence):
            session.stage_status["evidence"] = "valid"
        invalidate_downstream(session, "evidence")
    elif op == "evidence_edited":
        blocks = [EvidenceBlock.from_json(b) for b in data["blocks"]]
        session.evidence = list(blocks)
        session.stage_status["evidence"] = "valid" if blocks else "empty"
        invalidate_downstream(session, "evidence")
    elif op == "combined":
        session.title = data["title"]
        session.ending = data["ending"]
        session.stage_status["combination"] = "valid"
    elif op == "title_set":
        session.title = data["text"]
        session.stage_status["combination"] = _combination_status(session)
    elif op == "ending_set":
        session.ending = data["text"]
        session.stage_status["combination"] = _combination_status(session)
    else:
        raise EngineError(f"unknown event op: {op}")

    for warning in data.get("warnings", []):
        session.warnings.append(warning)
    session.event_count = event["seq"]
    session.history.append(
        {"ts": event["ts"], "op": op, "origin": data.get("origin", "engine")}
    )


def replay(events: list[dict]) -> Session:
    session = Session(id="")
    for event in events:
        apply_event(session, event)
    return session


# --- manual edits ------------------------------------------------------------

def build_edit_event(session: Session, target: str, payload) -> dict:
    """Translate an edit_stage call into the event that realizes it."""
    if target not in EDIT_TARGETS:
        raise EngineError(f"unknown edit target: {target}; expected one of {EDIT_TARGETS}")
    stage = "combination" if target in ("title", "ending") else target
    session.require_valid_through(stage)

    if target == "peg":
        text = _require_text(payload, "peg")
        return make_event(session, "peg_set", {"peg": text, "origin": "manual"})
    if target == "main_argument":
        text = _require_text(payload, "main_argument")
        return make_event(session, "main_argument_set", {"text": text, "origin": "manual"})
    if target == "supporting_arguments":
        arguments = _require_text_list(payload, "supporting_arguments")
        return make_event(
            session,
            "supporting_set",
            {"structure": session.structure, "arguments": arguments, "origin": "manual"},
        )
    if target == "evidence":
        texts = _require_text_list(payload, "evidence")
        if len(texts) != len(session.supporting_arguments):
            raise SchemaError(
                f"evidence edit needs {len(session.supporting_arguments)} texts, "
                f"got {len(texts)}"
            )
        blocks = []
        warnings = []
        for i, text in enumerate(texts):
            current = session.evidence[i] if i < len(session.evidence) else None
            references = current.references if current else []
            bad = invalid_markers(text, len(references))
            if bad:
                text = strip_markers(text, bad)
                warnings.append(f"evidence {i}: stripped unresolved markers {bad}")
            blocks.append(
                EvidenceBlock(text=text, references=references,
                              grounded=len(references) > 0)
            )
        return make_event(
            session,
            "evidence_edited",
            {"blocks": [b.to_json() for b in blocks], "warnings": warnings,
             "origin": "manual"},
        )
    # title / ending
    text = _require_text(payload, target)
    return make_event(session, f"{target}_set", {"text": text, "origin": "manual"})


def _require_text(payload, name: str) -> str:
    if not isinstance(payload, str) or not payload.strip():
        raise SchemaError(f"{name} edit payload must be non-empty text")
    return payload


def _require_text_list(payload, name: str) -> list[str]:
    if (
        not isinstance(payload, list)
        or not payload
        or not all(isinstance(x, str) and x.strip() for x in payload)
    ):
        raise SchemaError(f"{name} edit payload must be a non-empty list of texts")
    return list(payload)
