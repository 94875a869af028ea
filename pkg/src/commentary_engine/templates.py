"""Prompt templates for the five generation stages, ingestion tasks and judging.

The seed texts are editable: an operator can override any of them from a JSON
file (id -> body) to substitute e.g. Chinese originals; slot names must be
preserved.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

from .errors import MissingSlot, TemplateError, UnknownSlot

_SLOT_RE = re.compile(r"\{([a-z_]+)\}")

TEMPLATE_IDS = (
    "peg",
    "main_argument",
    "supporting_argument",
    "evidence",
    "ending",
    "title",
    "ingest_summarize",
    "ingest_direction",
    "ingest_elements",
    "ingest_paragraph",
    "judge_dimension",
    "baseline_one_shot",
)

_SEED_BODIES: dict[str, str] = {
    "peg": (
        "You are a commentary writing expert, and here are the details of an event. "
        "Event detail: {event_detail}. "
        "Please refine it into a concise and well-articulated peg:"
    ),
    "main_argument": (
        "You are a commentary writing expert. Please complete the main argument in the "
        "direction of {direction} based on the peg: {peg} and event detail: {event_detail}. "
        "The main argument should be profound, concise, and strongly related to the peg. "
        "Please provide the main argument:"
    ),
    "supporting_argument": (
        "You are a commentary writing expert. Based on the given main argument "
        "{main_argument} of the commentary and event detail {event_detail}, generate "
        "multiple supporting arguments for the commentary. The supporting arguments form "
        "{structure} structure, refining around the main argument with multi-level, "
        "multi-faceted, and multi-angle perspectives. Please provide the supporting arguments:"
    ),
    "evidence": (
        "You are a commentary writing expert. Surrounding the main argument {main_argument}, "
        "please use the evidence provided in the reference information, including dates, data, "
        "viewpoints, core content, etc., to continue writing evidence in the commentary to "
        "support the supporting argument {supporting_argument}. Please annotate the "
        "corresponding reference information numbers in the continuation.\n"
        "Reference information: {reference}.\n"
        "Please provide the evidence:"
    ),
    "ending": (
        "You are a commentary writing expert. Please write a conclusion for the article, "
        "maintaining smooth language, consistent style, and logical coherence with the "
        "preceding text. The preceding text is as follows: {preceding_text}. "
        "Please provide the ending:"
    ),
    "title": (
        "You are a commentary writing expert. Please write a title for the article, "
        "maintaining smooth language, consistent style, and logical coherence with the "
        "article text. The article text is as follows: {preceding_text}. "
        "Please provide the title:"
    ),
    "ingest_summarize": (
        "Here is the title of a news article: {title}. "
        "Please summarize the event related to the article title:"
    ),
    "ingest_direction": (
        "Here is the title of a news article: {title}. "
        "Please determine which direction the event belongs to, choosing exactly one of: "
        "technology, finance, society, politics, literature and arts, lifestyle, "
        "environment, sports, education, science. Reply with the direction only:"
    ),
    "ingest_elements": (
        "Here is the title of a news article: {title}. "
        "Please extract the six elements of the event, including time, location, person, "
        "cause, process and result. Reply with one line per element in the form "
        "'element: value':"
    ),
    "ingest_paragraph": (
        "Here are the six elements of an event:\n{elements}\n"
        "Please describe the event in a paragraph based on the six elements:"
    ),
    "judge_dimension": (
        "You are an expert in scoring generated commentaries. Please rate your answers from "
        "the {perspective} perspective based on the provided commentary. "
        "The scoring criteria are:\n{criteria}\n"
        "Commentary:\n{commentary}\n"
        "Please output a line that contains only one value representing the score. "
        "Please avoid any potential biases, and ensure that there are no factors other than "
        "the text that affect your judgment."
    ),
    "baseline_one_shot": (
        "I will provide you with a news background: {event_detail}\n"
        "Based on this news, with the title '{title}', please create a commentary article. "
        "The article should have clear and profound arguments, true and abundant evidence, "
        "smooth logical reasoning, reasonable structure, and appropriate commentary language. "
        "Your article should reference the following argument and evidence:\n{references}"
    ),
}


def format_reference_block(snippets: list[str]) -> str:
    """Numbered reference lines for the evidence prompt; each [n] starts a line."""
    if not snippets:
        return "none"
    return "\n" + "\n".join(f"[{i}] {s}" for i, s in enumerate(snippets, start=1))


@dataclass(frozen=True)
class PromptTemplate:
    id: str
    body: str
    required_slots: tuple[str, ...]

    def render(self, slots: Mapping[str, str]) -> str:
        for name in self.required_slots:
            if name not in slots or not str(slots[name]).strip():
                raise MissingSlot(name)
        for name in slots:
            if name not in self.required_slots:
                raise UnknownSlot(name)
        text = self.body
        for name in self.required_slots:
            text = text.replace("{" + name + "}", str(slots[name]))
        return text


def _build(template_id: str, body: str) -> PromptTemplate:
    slots = tuple(dict.fromkeys(_SLOT_RE.findall(body)))
    if not slots:
        raise TemplateError(f"template {template_id} declares no slots")
    for name in slots:
        if body.count("{" + name + "}") != 1:
            raise TemplateError(f"template {template_id}: slot {name} must appear exactly once")
    return PromptTemplate(id=template_id, body=body, required_slots=slots)


class TemplateRegistry:
    """All known templates; the single source of truth for inference and SFT."""

    def __init__(self, overrides: Mapping[str, str] | None = None):
        bodies = dict(_SEED_BODIES)
        if overrides:
            for template_id, body in overrides.items():
                if template_id not in TEMPLATE_IDS:
                    raise TemplateError(f"unknown template id in overrides: {template_id}")
                bodies[template_id] = body
        self._templates = {tid: _build(tid, bodies[tid]) for tid in TEMPLATE_IDS}

    def get(self, template_id: str) -> PromptTemplate:
        try:
            return self._templates[template_id]
        except KeyError:
            raise TemplateError(f"unknown template id: {template_id}") from None

    def render(self, template_id: str, slots: Mapping[str, str]) -> str:
        return self.get(template_id).render(slots)

    def ids(self) -> tuple[str, ...]:
        return TEMPLATE_IDS

    @classmethod
    def from_file(cls, path: str | Path) -> "TemplateRegistry":
        overrides = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(overrides=overrides)
