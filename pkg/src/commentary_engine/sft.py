"""Per-stage supervised fine-tuning records from annotated commentaries."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import AlignmentError, SchemaError
from .taxonomy import DIRECTIONS, OTHER_DIRECTION, STRUCTURES, display_direction
from .templates import TemplateRegistry, format_reference_block

SFT_STAGES = ("peg", "main_argument", "supporting_arguments", "evidence", "combination")


@dataclass
class AnnotatedCommentary:
    event_detail: str
    peg: str
    direction: str
    main_argument: str
    structure: str
    supporting_arguments: list[str]
    evidence: list[tuple[str, list[str]]]  # (text, references) per supporting argument
    title: str
    ending: str

    def validate(self) -> None:
        for name in ("event_detail", "peg", "main_argument", "title", "ending"):
            if not getattr(self, name).strip():
                raise SchemaError(f"{name} must be non-empty")
        if self.direction not in DIRECTIONS and self.direction != OTHER_DIRECTION:
            raise SchemaError(f"unknown direction: {self.direction}")
        if self.structure not in STRUCTURES:
            raise SchemaError(f"unknown structure: {self.structure}")
        if not self.supporting_arguments:
            raise SchemaError("need at least one supporting argument")
        if any(not a.strip() for a in self.supporting_arguments):
            raise SchemaError("supporting arguments must be non-empty")
        if len(self.evidence) != len(self.supporting_arguments):
            raise AlignmentError(
                f"{len(self.evidence)} evidence entries for "
                f"{len(self.supporting_arguments)} supporting arguments"
            )
        if any(not text.strip() for text, _ in self.evidence):
            raise SchemaError("evidence texts must be non-empty")

    @classmethod
    def from_json(cls, obj: dict) -> "AnnotatedCommentary":
        doc = cls(
            event_detail=obj["event_detail"],
            peg=obj["peg"],
            direction=obj["direction"],
            main_argument=obj["main_argument"],
            structure=obj["structure"],
            supporting_arguments=list(obj["supporting_arguments"]),
            evidence=[(e["text"], list(e.get("references", []))) for e in obj["evidence"]],
            title=obj["title"],
            ending=obj["ending"],
        )
        doc.validate()
        return doc


@dataclass(frozen=True)
class SftRecord:
    stage: str
    instruction: str
    input: str
    output: str

    def to_json(self) -> dict:
        return {
            "stage": self.stage,
            "instruction": self.instruction,
            "input": self.input,
            "output": self.output,
        }


def _numbered(items: list[str]) -> str:
    return "\n".join(f"{i}. {item}" for i, item in enumerate(items, start=1))


def _preceding_text(doc: AnnotatedCommentary) -> str:
    parts = [doc.main_argument, ""]
    for argument, (evidence_text, _refs) in zip(doc.supporting_arguments, doc.evidence):
        parts.extend([argument, "", evidence_text, ""])
    return "\n".join(parts).strip()


def build_records(doc: AnnotatedCommentary, templates: TemplateRegistry | None = None,
                  split_combination: bool = False) -> list[SftRecord]:
    """4 + m records per document (5 + m with split_combination): one per stage,
    one evidence record per supporting argument. Instructions render from the
    same templates inference uses."""
    doc.validate()
    templates = templates or TemplateRegistry()
    records: list[SftRecord] = []

    records.append(
        SftRecord(
            stage="peg",
            instruction=templates.render("peg", {"event_detail": doc.event_detail}),
            input=doc.event_detail,
            output=doc.peg,
        )
    )

    direction = display_direction(doc.direction)
    records.append(
        SftRecord(
            stage="main_argument",
            instruction=templates.render(
                "main_argument",
                {"direction": direction, "peg": doc.peg, "event_detail": doc.event_detail},
            ),
            input=f"direction: {direction}\npeg: {doc.peg}\nevent detail: {doc.event_detail}",
            output=doc.main_argument,
        )
    )

    records.append(
        SftRecord(
            stage="supporting_arguments",
            instruction=templates.render(
                "supporting_argument",
                {
                    "main_argument": doc.main_argument,
                    "event_detail": doc.event_detail,
                    "structure": doc.structure,
                },
            ),
            input=(
                f"structure: {doc.structure}\nmain argument: {doc.main_argument}\n"
                f"event detail: {doc.event_detail}"
            ),
            output=_numbered(doc.supporting_arguments),
        )
    )

    for argument, (evidence_text, references) in zip(doc.supporting_arguments, doc.evidence):
        block = format_reference_block(references)
        records.append(
            SftRecord(
                stage="evidence",
                instruction=templates.render(
                    "evidence",
                    {
                        "main_argument": doc.main_argument,
                        "supporting_argument": argument,
                        "reference": block,
                    },
                ),
                input=(
                    f"main argument: {doc.main_argument}\nsupporting argument: {argument}\n"
                    f"references:\n{block}"
                ),
                output=evidence_text,
            )
        )

    preceding = _preceding_text(doc)
    if split_combination:
        records.append(
            SftRecord(
                stage="combination",
                instruction=templates.render("ending", {"preceding_text": preceding}),
                input=preceding,
                output=doc.ending,
            )
        )
        records.append(
            SftRecord(
                stage="combination",
                instruction=templates.render("title", {"preceding_text": preceding}),
                input=preceding,
                output=doc.title,
            )
        )
    else:
        records.append(
            SftRecord(
                stage="combination",
                instruction=templates.render("ending", {"preceding_text": preceding}),
                input=preceding,
                output=f"title: {doc.title}\nending: {doc.ending}",
            )
        )
    return records


def mix_records(records: list[SftRecord], general: list[SftRecord],
                ratio: float) -> list[SftRecord]:
    """Interleave floor(ratio * len(records)) general records evenly, in order."""
    if ratio <= 0 or not general:
        return list(records)
    target = int(ratio * len(records))
    mixed: list[SftRecord] = []
    inserted = 0
    for i, record in enumerate(records, start=1):
        mixed.append(record)
        want = int(i * target / len(records))
        while inserted < want and inserted < target:
            mixed.append(general[inserted % len(general)])
            inserted += 1
    return mixed


def export_jsonl(records: list[SftRecord], path: str | Path) -> int:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record.to_json(), ensure_ascii=False) + "\n")
    return len(records)


def load_records_jsonl(path: str | Path) -> list[SftRecord]:
    records = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            records.append(
                SftRecord(
                    stage=obj["stage"],
                    instruction=obj["instruction"],
                    input=obj["input"],
                    output=obj["output"],
                )
            )
    return records


def load_corpus_jsonl(path: str | Path) -> list[AnnotatedCommentary]:
    docs = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                docs.append(AnnotatedCommentary.from_json(json.loads(line)))
    return docs
