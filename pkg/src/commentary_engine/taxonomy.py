"""Closed vocabularies: thematic directions, argument structures, pipeline stages."""

from __future__ import annotations

DIRECTIONS: tuple[str, ...] = (
    "technology",
    "finance",
    "society",
    "politics",
    "literature_and_arts",
    "lifestyle",
    "environment",
    "sports",
    "education",
    "science",
)

OTHER_DIRECTION = "other"

STRUCTURES: tuple[str, ...] = ("parallel", "progressive", "contrasting")

# Stage order is load-bearing: validity must always form a prefix of this tuple.
STAGES: tuple[str, ...] = (
    "peg",
    "main_argument",
    "supporting_arguments",
    "evidence",
    "combination",
)


def display_direction(direction: str) -> str:
    """Human-readable form used inside prompts ("literature and arts")."""
    return direction.replace("_", " ")


def normalize_direction(text: str) -> str | None:
    """Map free-form model output onto a canonical direction, or None."""
    cleaned = text.strip().strip(".").lower().replace(" ", "_").replace("-", "_")
    if cleaned in DIRECTIONS:
        return cleaned
    return None


def stage_index(stage: str) -> int:
    if stage not in STAGES:
        raise ValueError(f"unknown stage: {stage}")
    return STAGES.index(stage)
