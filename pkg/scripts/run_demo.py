#!/usr/bin/env python3
"""Full offline walkthrough: ingest knowledge, run the five-step pipeline with
the mock gateway, print the assembled commentary and its judged scores."""

from __future__ import annotations

import tempfile
from pathlib import Path

from commentary_engine.evaluation import evaluate
from commentary_engine.gateway import GatewayConfig, LlmGateway
from commentary_engine.knowledge import KnowledgeStore
from commentary_engine.pipeline import PipelineConfig, PipelineEngine

TITLES = [
    "City bans smoking in all public parks",
    "Youth smoking rates hit a record low",
    "Hospitals report fewer asthma admissions",
]

BOOK_BODY = (
    "Public health law rests on the balance between individual liberty and "
    "collective welfare.\n\n"
    "Historical smoking bans in workplaces preceded outdoor restrictions by "
    "roughly two decades, and compliance rose once social norms shifted.\n\n"
    "Enforcement through fines is less effective than environmental design, "
    "such as removing ashtrays and adding signage.\n"
) * 3


def main() -> None:
    gateway = LlmGateway(config=GatewayConfig(retry_backoff_ms=0))
    with tempfile.TemporaryDirectory() as tmp:
        store = KnowledgeStore(Path(tmp) / "knowledge.jsonl")
        report = store.refresh_daily(TITLES, gateway)
        store.ingest_book("Public Health Law", "law", BOOK_BODY)
        print(f"knowledge: +{report.added} events, "
              f"{store.stats.doc_count} docs, {store.stats.term_count} terms")

        engine = PipelineEngine(
            gateway=gateway,
            knowledge=store,
            config=PipelineConfig(retrieval_threshold=0.3),
        )
        session, commentary = engine.run_auto(keywords="smoking ban parks")
        print("\n--- commentary (markdown) ---\n")
        print(commentary.to_markdown())
        grounded = sum(1 for _, b in commentary.sections if b.grounded)
        print(f"--- {grounded}/{len(commentary.sections)} sections grounded, "
              f"session {session.id} ---\n")

        evaluation = evaluate(commentary.assembled_text, gateway)
        print("judged scores:", {k: v for k, v in evaluation.scores.items()})
        print("overall:", evaluation.overall)


if __name__ == "__main__":
    main()
