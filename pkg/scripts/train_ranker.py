#!/usr/bin/env python3
"""Build a synthetic like-ordered corpus, train the pairwise scorer, report accuracy."""

from __future__ import annotations

import time

from commentary_engine.ranking import (
    TrainConfig,
    build_pairs_from_likes,
    pair_accuracy,
    train,
)

PHRASES_GOOD = [
    "a fresh structural lens on {}",
    "an original second-order take on {}",
    "a contrarian but evidenced view of {}",
]
PHRASES_BLAND = [
    "some thoughts about {}",
    "what everyone already says about {}",
    "a generic recap of {}",
]
TOPICS = ["the ban", "the budget", "the election", "the league", "the reform",
          "the museum", "the startup", "the flood", "the curriculum", "the telescope"]


def main() -> None:
    articles = []
    for i, topic in enumerate(TOPICS * 3):
        articles.append((PHRASES_GOOD[i % 3].format(topic) + f" #{i}", 100 + i))
        articles.append((PHRASES_BLAND[i % 3].format(topic) + f" #{i}", 3 + i % 5))

    pairs = build_pairs_from_likes(articles, max_pairs=400, seed=0)
    print(f"{len(articles)} articles -> {len(pairs)} ordered pairs")

    started = time.monotonic()
    model = train(pairs, TrainConfig(lr=0.5, epochs=30, seed=1, feature_dim=2 ** 16))
    elapsed = time.monotonic() - started
    print(f"trained in {elapsed:.2f} s; "
          f"training pair accuracy {pair_accuracy(model, pairs):.3f}")


if __name__ == "__main__":
    main()
