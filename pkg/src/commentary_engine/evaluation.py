"""Five-dimension commentary evaluation with an LLM judge, plus the
Pearson machinery used to validate the judge against human annotators."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path

from .errors import LengthMismatch, UnmatchedItems, ZeroVariance
from .gateway import LlmGateway

logger = logging.getLogger(__name__)

DIMENSIONS = (
    "structure_soundness",
    "logic_consistency",
    "argument_quality",
    "evidence_support",
    "language_finesse",
)

# column labels for the aggregate table
DIMENSION_LABELS = {
    "structure_soundness": "Structure",
    "logic_consistency": "Logic",
    "argument_quality": "Argument",
    "evidence_support": "Evidence",
    "language_finesse": "Language",
}

_PERSPECTIVES = {
    "structure_soundness": "structure soundness",
    "logic_consistency": "logic consistency",
    "argument_quality": "argument quality",
    "evidence_support": "evidence support",
    "language_finesse": "language finesse",
}

_ASPECTS = {
    "structure_soundness": (
        "clarity of the hierarchy, compactness of the writing, and rationality "
        "of the layout"
    ),
    "logic_consistency": (
        "consistency of the content, rationality of the argument, and thoughtfulness"
    ),
    "argument_quality": "freshness and directionality of the topic conception",
    "evidence_support": "specificity and appropriateness of the evidence used",
    "language_finesse": "fluency, depth, and vividness of the expression style",
}

SCORE_MIN = 1.0
SCORE_MAX = 10.0


def rubric_for(dimension: str) -> str:
    """Anchored 1-10 criteria text. The anchors are reconstructions and can be
    overridden by editing the returned text into a custom rubric table."""
    aspects = _ASPECTS[dimension]
    return (
        f"(1) 10 points represent exceptional {aspects}.\n"
        f"(2) 8 points represent strong {aspects} with minor lapses.\n"
        f"(3) 6 points represent adequate {aspects} with visible weaknesses.\n"
        f"(4) 4 points represent poor {aspects} undermining the commentary.\n"
        f"(5) 2 points represent severely deficient {aspects}."
    )


@dataclass
class HumanScoreSet:
    item_id: str
    scores: dict[str, float]
    timeliness: float | None = None

    def validate(self) -> None:
        for dimension, value in self.scores.items():
            if dimension not in DIMENSIONS:
                raise ValueError(f"unknown dimension: {dimension}")
            if not SCORE_MIN <= value <= SCORE_MAX:
                raise ValueError(f"{dimension} score {value} outside [1, 10]")
        if self.timeliness is not None and not SCORE_MIN <= self.timeliness <= SCORE_MAX:
            raise ValueError(f"timeliness {self.timeliness} outside [1, 10]")


@dataclass
class EvaluationReport:
    scores: dict[str, float]
    overall: float
    judge_transcripts: dict[str, str]
    judged_by: str
    timeliness: float | None = None  # human-entered only, never computed
    item_id: str | None = None

    def to_json(self) -> dict:
        return {
            "item_id": self.item_id,
            "scores": dict(self.scores),
            "overall": self.overall,
            "timeliness": self.timeliness,
            "judged_by": self.judged_by,
            "judge_transcripts": dict(self.judge_transcripts),
        }


def overall_of(scores: dict[str, float]) -> float:
    """Arithmetic mean of the five dimension scores; timeliness never enters."""
    missing = [d for d in DIMENSIONS if d not in scores]
    if missing:
        raise ValueError(f"missing dimensions: {missing}")
    return sum(scores[d] for d in DIMENSIONS) / len(DIMENSIONS)


def judge_dimension(commentary_text: str, dimension: str,
                    gateway: LlmGateway) -> tuple[float, str]:
    """One judged score in [1, 10] plus the raw judge reply."""
    if not commentary_text.strip():
        raise ValueError("commentary text is empty")
    if dimension not in DIMENSIONS:
        raise ValueError(f"unknown dimension: {dimension}")
    request = gateway.request_for(
        "judge_dimension",
        {
            "perspective": _PERSPECTIVES[dimension],
            "criteria": rubric_for(dimension),
            "commentary": commentary_text,
        },
    )
    value, result = gateway.complete_parsed_detailed(request, parser="score_line")
    if value < SCORE_MIN or value > SCORE_MAX:
        clamped = min(max(value, SCORE_MIN), SCORE_MAX)
        logger.warning("judge score %s for %s clamped to %s", value, dimension, clamped)
        value = clamped
    return float(value), result.text


def evaluate(commentary_text: str, gateway: LlmGateway,
             item_id: str | None = None) -> EvaluationReport:
    """Judge all five dimensions; a report exists only if every call succeeds."""
    scores: dict[str, float] = {}
    transcripts: dict[str, str] = {}
    for dimension in DIMENSIONS:
        value, raw = judge_dimension(commentary_text, dimension, gateway)
        scores[dimension] = value
        transcripts[dimension] = raw
    return EvaluationReport(
        scores=scores,
        overall=overall_of(scores),
        judge_transcripts=transcripts,
        judged_by=gateway.provider.name,
        item_id=item_id,
    )


def pearson(xs: list[float], ys: list[float]) -> float:
    """Product-moment correlation coefficient."""
    if len(xs) != len(ys):
        raise LengthMismatch(f"lengths differ: {len(xs)} vs {len(ys)}")
    if len(xs) < 2:
        raise LengthMismatch("need at least two points")
    n = len(xs)
    mx = math.fsum(xs) / n
    my = math.fsum(ys) / n
    vx = math.fsum((x - mx) ** 2 for x in xs)
    vy = math.fsum((y - my) ** 2 for y in ys)
    if vx == 0.0 or vy == 0.0:
        raise ZeroVariance("one of the series is constant")
    cov = math.fsum((x - mx) * (y - my) for x, y in zip(xs, ys))
    return cov / math.sqrt(vx * vy)


def consistency_analysis(reports: list[EvaluationReport],
                         humans: list[HumanScoreSet]) -> dict[str, float]:
    """Per-dimension Pearson r between judge scores and human scores,
    matched on item_id."""
    judge_by_id = {r.item_id: r for r in reports if r.item_id is not None}
    human_by_id = {h.item_id: h for h in humans}
    if len(judge_by_id) != len(reports):
        raise UnmatchedItems("every report needs an item_id")
    if set(judge_by_id) != set(human_by_id):
        missing = set(judge_by_id) ^ set(human_by_id)
        raise UnmatchedItems(f"item ids do not match: {sorted(missing)!r}")
    if len(judge_by_id) < 2:
        raise LengthMismatch("need at least two matched items")
    item_ids = sorted(judge_by_id)
    result = {}
    for dimension in DIMENSIONS:
        xs = [judge_by_id[i].scores[dimension] for i in item_ids]
        ys = [human_by_id[i].scores[dimension] for i in item_ids]
        result[dimension] = pearson(xs, ys)
    return result


# --- interchange ------------------------------------------------------------

def load_human_scores_csv(path: str | Path) -> list[HumanScoreSet]:
    """CSV with columns item_id, dimension, score; dimension may also be
    'timeliness' for the human-only metric."""
    by_item: dict[str, HumanScoreSet] = {}
    with Path(path).open("r", encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            item_id = row["item_id"].strip()
            dimension = row["dimension"].strip().lower()
            value = float(row["score"])
            entry = by_item.setdefault(item_id, HumanScoreSet(item_id=item_id, scores={}))
            if dimension == "timeliness":
                entry.timeliness = value
            else:
                entry.scores[dimension] = value
    scores = list(by_item.values())
    for entry in scores:
        entry.validate()
    return scores


def format_consistency(r_by_dimension: dict[str, float]) -> str:
    """One 'label r' line per dimension, in canonical dimension order."""
    return "\n".join(
        f"{DIMENSION_LABELS[d]}: r={r_by_dimension[d]:.2f}" for d in DIMENSIONS
    )


def aggregate_table(reports: list[EvaluationReport]) -> str:
    """Mean per dimension across a test set, in the standard column layout."""
    if not reports:
        return "no reports"
    header = ["Overall"] + [DIMENSION_LABELS[d] for d in DIMENSIONS]
    means = [sum(r.overall for r in reports) / len(reports)] + [
        sum(r.scores[d] for r in reports) / len(reports) for d in DIMENSIONS
    ]
    width = max(len(h) for h in header) + 2
    head = "".join(h.rjust(width) for h in header)
    row = "".join(f"{m:.2f}".rjust(width) for m in means)
    return f"{head}\n{row}"
