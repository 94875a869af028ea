"""In-process BM25 inverted index with snapshot reads and single-writer commits."""

from __future__ import annotations

import math
import pickle
import re
import threading
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

from .errors import DuplicateInBatch

K1_DEFAULT = 1.2
B_DEFAULT = 0.75

_WORD_RE = re.compile(r"\w+", re.UNICODE)
_CJK_RE = re.compile(r"[㐀-䶿一-鿿豈-﫿]")


def tokenize(text: str) -> list[str]:
    """Lowercased unicode word tokens; CJK runs additionally emit character bigrams."""
    tokens: list[str] = []
    for tok in _WORD_RE.findall(text.lower()):
        tokens.append(tok)
        if len(tok) >= 2 and _CJK_RE.search(tok):
            tokens.extend(tok[i : i + 2] for i in range(len(tok) - 1))
    return tokens


@dataclass(frozen=True)
class IndexStats:
    doc_count: int
    term_count: int


@dataclass(frozen=True)
class ScoredDoc:
    doc_id: str
    raw_score: float
    norm_score: float


class _Snapshot:
    """Immutable view of the index state; searches never observe partial commits."""

    __slots__ = ("k1", "b", "postings", "doc_len", "doc_count", "avg_dl")

    def __init__(self, k1: float, b: float, postings: dict[str, dict[str, int]],
                 doc_len: dict[str, int]):
        self.k1 = k1
        self.b = b
        self.postings = postings
        self.doc_len = doc_len
        self.doc_count = len(doc_len)
        total = sum(doc_len.values())
        self.avg_dl = total / self.doc_count if self.doc_count else 0.0

    def score_query(self, query: str) -> list[tuple[str, float]]:
        """All docs with positive BM25 score, unsorted."""
        if self.doc_count == 0:
            return []
        scores: dict[str, float] = {}
        for term in tokenize(query):
            posting = self.postings.get(term)
            if not posting:
                continue
            df = len(posting)
            idf = math.log(1.0 + (self.doc_count - df + 0.5) / (df + 0.5))
            for doc_id, tf in posting.items():
                dl = self.doc_len[doc_id]
                norm = self.k1 * (1.0 - self.b + self.b * dl / self.avg_dl)
                contrib = idf * tf * (self.k1 + 1.0) / (tf + norm)
                scores[doc_id] = scores.get(doc_id, 0.0) + contrib
        return [(doc_id, s) for doc_id, s in scores.items() if s > 0.0]


def rank_and_filter(hits: list[tuple[str, float]], threshold: float,
                    k_max: int) -> list[ScoredDoc]:
    """Sort by raw score desc (ties: id asc), normalize by the top score,
    keep norm_score >= threshold, cap at k_max."""
    if not hits:
        return []
    ordered = sorted(hits, key=lambda t: (-t[1], t[0]))
    top = ordered[0][1]
    results: list[ScoredDoc] = []
    for doc_id, raw in ordered:
        norm = raw / top
        if norm < threshold:
            break
        results.append(ScoredDoc(doc_id=doc_id, raw_score=raw, norm_score=norm))
        if len(results) >= k_max:
            break
    return results


class Bm25Index:
    """Inverted index over (id, text) documents.

    Writes are serialized through a single lock and commit by swapping an
    immutable snapshot, so a search that started before a commit keeps seeing
    the pre-commit state.
    """

    def __init__(self, k1: float = K1_DEFAULT, b: float = B_DEFAULT):
        self.k1 = k1
        self.b = b
        self._write_lock = threading.Lock()
        self._doc_terms: dict[str, Counter] = {}
        self._snapshot = _Snapshot(k1, b, {}, {})

    @property
    def stats(self) -> IndexStats:
        snap = self._snapshot
        return IndexStats(doc_count=snap.doc_count, term_count=len(snap.postings))

    def upsert(self, docs: list[tuple[str, str]]) -> IndexStats:
        """Insert or replace documents; duplicate ids within one batch are rejected."""
        seen: set[str] = set()
        for doc_id, _ in docs:
            if doc_id in seen:
                raise DuplicateInBatch(doc_id)
            seen.add(doc_id)
        with self._write_lock:
            for doc_id, text in docs:
                self._doc_terms[doc_id] = Counter(tokenize(text))
            self._commit()
        return self.stats

    def remove(self, doc_ids: list[str]) -> IndexStats:
        with self._write_lock:
            for doc_id in doc_ids:
                self._doc_terms.pop(doc_id, None)
            self._commit()
        return self.stats

    def _commit(self) -> None:
        postings: dict[str, dict[str, int]] = {}
        doc_len: dict[str, int] = {}
        for doc_id, terms in self._doc_terms.items():
            doc_len[doc_id] = sum(terms.values())
            for term, tf in terms.items():
                postings.setdefault(term, {})[doc_id] = tf
        self._snapshot = _Snapshot(self.k1, self.b, postings, doc_len)

    def search(self, query: str, threshold: float, k_max: int) -> list[ScoredDoc]:
        if not query.strip() or k_max <= 0:
            return []
        snap = self._snapshot
        return rank_and_filter(snap.score_query(query), threshold, k_max)

    def save(self, path: str | Path) -> None:
        """Binary snapshot of the raw term counts (rebuildable from the JSONL store)."""
        payload = {"k1": self.k1, "b": self.b, "doc_terms": self._doc_terms}
        Path(path).write_bytes(pickle.dumps(payload))

    @classmethod
    def load(cls, path: str | Path) -> "Bm25Index":
        payload = pickle.loads(Path(path).read_bytes())
        index = cls(k1=payload["k1"], b=payload["b"])
        index._doc_terms = payload["doc_terms"]
        index._commit()
        return index
