"""Argument scorer trained with a pairwise logistic loss on like-ordered text pairs.

The scorer contract is pluggable; the reference implementation is a linear
model over hashed character n-grams. Minimizing sum(weight * phi(f(a) - f(b)))
with a = the higher-liked text pushes f(a) above f(b).
"""

from __future__ import annotations

import json
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    DivergenceError,
    EmptyCandidates,
    EmptyPairSet,
    NoOrderedPairs,
)

DEFAULT_FEATURE_DIM = 2 ** 18
LENGTH_FEATURE_INDEX = 0
LENGTH_SCALE = 256.0
NGRAM_SIZES = (2, 3)


@dataclass(frozen=True)
class RankPair:
    preferred: str  # the higher-liked text
    other: str
    weight: float = 1.0

    def __post_init__(self):
        if self.preferred == self.other:
            raise ValueError("pair members must differ")
        if not self.weight > 0:
            raise ValueError("pair weight must be positive")


@dataclass
class ScorerModel:
    feature_dim: int
    weights: np.ndarray
    bias: float = 0.0
    version: int = 1

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.shape != (self.feature_dim,):
            raise ValueError("weights length must equal feature_dim")
        if not np.all(np.isfinite(self.weights)):
            raise ValueError("weights must be finite")

    @classmethod
    def zeros(cls, feature_dim: int = DEFAULT_FEATURE_DIM) -> "ScorerModel":
        return cls(feature_dim=feature_dim, weights=np.zeros(feature_dim))

    def save(self, path: str | Path) -> None:
        nonzero = np.nonzero(self.weights)[0]
        payload = {
            "feature_dim": self.feature_dim,
            "bias": self.bias,
            "version": self.version,
            "weights": {str(i): self.weights[i] for i in nonzero},
        }
        Path(path).write_text(json.dumps(payload), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "ScorerModel":
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        weights = np.zeros(payload["feature_dim"])
        for index, value in payload["weights"].items():
            weights[int(index)] = value
        return cls(
            feature_dim=payload["feature_dim"],
            weights=weights,
            bias=payload["bias"],
            version=payload["version"],
        )


@dataclass(frozen=True)
class SparseFeatures:
    """Sparse encoding of a real vector of length `dim`."""

    dim: int
    indices: np.ndarray
    values: np.ndarray

    def dot(self, weights: np.ndarray) -> float:
        if self.indices.size == 0:
            return 0.0
        return float(weights[self.indices] @ self.values)

    def to_dense(self) -> np.ndarray:
        dense = np.zeros(self.dim)
        dense[self.indices] = self.values
        return dense


def ngram_bucket(gram: str, feature_dim: int) -> int:
    """Stable across processes; bucket 0 is reserved for the length feature."""
    return 1 + zlib.crc32(gram.encode("utf-8")) % (feature_dim - 1)


def extract_features(text: str, feature_dim: int = DEFAULT_FEATURE_DIM) -> SparseFeatures:
    """Hashed character n-gram (n=2,3) counts, L2-normalized, plus a length feature."""
    if feature_dim < 2:
        raise ValueError("feature_dim must be >= 2")
    if not text:
        return SparseFeatures(dim=feature_dim, indices=np.empty(0, dtype=np.int64),
                              values=np.empty(0))
    counts: dict[int, float] = {}
    for n in NGRAM_SIZES:
        for i in range(len(text) - n + 1):
            bucket = ngram_bucket(text[i : i + n], feature_dim)
            counts[bucket] = counts.get(bucket, 0.0) + 1.0
    if counts:
        norm = float(np.sqrt(sum(v * v for v in counts.values())))
        for bucket in counts:
            counts[bucket] /= norm
    counts[LENGTH_FEATURE_INDEX] = min(len(text) / LENGTH_SCALE, 1.0)
    indices = np.array(sorted(counts), dtype=np.int64)
    values = np.array([counts[i] for i in indices])
    return SparseFeatures(dim=feature_dim, indices=indices, values=values)


def score(model: ScorerModel, argument: str) -> float:
    """f(x) = weights . features(x) + bias."""
    return extract_features(argument, model.feature_dim).dot(model.weights) + model.bias


def phi(margin: float) -> float:
    """Logistic surrogate ln(1 + e^(-d)); stable for |d| up to 1e4."""
    return float(np.logaddexp(0.0, -margin))


def _sigmoid(x: float) -> float:
    return float(0.5 * (1.0 + np.tanh(0.5 * x)))


def _margins(model: ScorerModel, pairs: list[RankPair],
             cache: dict[str, SparseFeatures]) -> list[float]:
    margins = []
    for pair in pairs:
        fa = cache[pair.preferred].dot(model.weights)
        fb = cache[pair.other].dot(model.weights)
        margins.append(fa - fb)
    return margins


def _feature_cache(pairs: list[RankPair], feature_dim: int) -> dict[str, SparseFeatures]:
    cache: dict[str, SparseFeatures] = {}
    for pair in pairs:
        for text in (pair.preferred, pair.other):
            if text not in cache:
                cache[text] = extract_features(text, feature_dim)
    return cache


def pairwise_loss(model: ScorerModel, pairs: list[RankPair]) -> float:
    """sum over pairs of weight * phi(f(preferred) - f(other))."""
    if not pairs:
        raise EmptyPairSet("no pairs given")
    cache = _feature_cache(pairs, model.feature_dim)
    margins = _margins(model, pairs, cache)
    return float(sum(p.weight * phi(d) for p, d in zip(pairs, margins)))


def pairwise_loss_gradient(model: ScorerModel, pairs: list[RankPair]) -> np.ndarray:
    """Analytic dL/dweights as a dense vector (the bias cancels in every margin)."""
    if not pairs:
        raise EmptyPairSet("no pairs given")
    cache = _feature_cache(pairs, model.feature_dim)
    grad = np.zeros(model.feature_dim)
    for pair in pairs:
        xa = cache[pair.preferred]
        xb = cache[pair.other]
        d = xa.dot(model.weights) - xb.dot(model.weights)
        coeff = -pair.weight * _sigmoid(-d)
        grad[xa.indices] += coeff * xa.values
        grad[xb.indices] -= coeff * xb.values
    return grad


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 0.5
    epochs: int = 20
    seed: int = 0
    l2: float = 0.0
    feature_dim: int = DEFAULT_FEATURE_DIM


def train(pairs: list[RankPair], hyper: TrainConfig | None = None) -> ScorerModel:
    """SGD on the pairwise loss; a fixed seed makes the result bit-reproducible.

    The learning rate decays as lr/(1+epoch). Raises DivergenceError if the
    full-set loss stops being finite.
    """
    if not pairs:
        raise EmptyPairSet("no pairs given")
    hyper = hyper or TrainConfig()
    cache = _feature_cache(pairs, hyper.feature_dim)
    weights = np.zeros(hyper.feature_dim)
    rng = np.random.default_rng(hyper.seed)

    for epoch in range(hyper.epochs):
        lr_t = hyper.lr / (1.0 + epoch)
        for i in rng.permutation(len(pairs)):
            pair = pairs[i]
            xa = cache[pair.preferred]
            xb = cache[pair.other]
            d = xa.dot(weights) - xb.dot(weights)
            step = lr_t * pair.weight * _sigmoid(-d)
            weights[xa.indices] += step * xa.values
            weights[xb.indices] -= step * xb.values
            if hyper.l2:
                weights *= 1.0 - lr_t * hyper.l2
        epoch_loss = sum(
            p.weight * phi(cache[p.preferred].dot(weights) - cache[p.other].dot(weights))
            for p in pairs
        )
        if not np.isfinite(epoch_loss):
            raise DivergenceError(f"training loss became non-finite at epoch {epoch}")

    return ScorerModel(feature_dim=hyper.feature_dim, weights=weights)


@dataclass(frozen=True)
class RankedCandidate:
    text: str
    direction: str
    score: float
    rank: int

    def to_json(self) -> dict:
        return {
            "text": self.text,
            "direction": self.direction,
            "score": self.score,
            "rank": self.rank,
        }


def rank(model: ScorerModel, candidates: list[tuple[str, str]]) -> list[RankedCandidate]:
    """Score and sort candidates descending; ties keep the input order."""
    if not candidates:
        raise EmptyCandidates("no candidates to rank")
    scored = [
        (score(model, text), position, text, direction)
        for position, (text, direction) in enumerate(candidates)
    ]
    ordered = sorted(scored, key=lambda t: (-t[0], t[1]))
    return [
        RankedCandidate(text=text, direction=direction, score=s, rank=position + 1)
        for position, (s, _, text, direction) in enumerate(ordered)
    ]


def build_pairs_from_likes(articles: list[tuple[str, int]], max_pairs: int,
                           seed: int = 0) -> list[RankPair]:
    """All (higher-liked, lower-liked) pairs; ties emit nothing. Above max_pairs
    the set is subsampled with the given seed."""
    if len(articles) < 2:
        raise NoOrderedPairs("need at least two articles")
    ordered: list[RankPair] = []
    for i, (text_a, likes_a) in enumerate(articles):
        for j, (text_b, likes_b) in enumerate(articles):
            if i == j:
                continue
            if likes_a > likes_b and text_a != text_b:
                ordered.append(RankPair(preferred=text_a, other=text_b))
    if not ordered:
        raise NoOrderedPairs("all like counts equal")
    if len(ordered) <= max_pairs:
        return ordered
    rng = np.random.default_rng(seed)
    chosen = sorted(rng.choice(len(ordered), size=max_pairs, replace=False))
    return [ordered[i] for i in chosen]


def pair_accuracy(model: ScorerModel, pairs: list[RankPair]) -> float:
    """Fraction of pairs where the preferred text outscores the other."""
    if not pairs:
        raise EmptyPairSet("no pairs given")
    hits = sum(1 for p in pairs if score(model, p.preferred) > score(model, p.other))
    return hits / len(pairs)


# --- JSONL interchange -------------------------------------------------------

def load_pairs_jsonl(path: str | Path) -> list[RankPair]:
    pairs = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            pairs.append(
                RankPair(
                    preferred=obj["preferred"],
                    other=obj["other"],
                    weight=obj.get("weight", 1.0),
                )
            )
    return pairs


def load_likes_jsonl(path: str | Path) -> list[tuple[str, int]]:
    articles = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            articles.append((obj["text"], int(obj["likes"])))
    return articles
