"""Fuzzy name resolution via normalized embedding cosine similarity.

LLM output rarely reproduces names verbatim ("trash_can" vs "trash can"),
so action names and parameters are matched against their candidate sets by
cosine similarity of unit-norm embeddings. The built-in embedder hashes
character trigrams, which keeps the core pipeline fully deterministic and
free of any model server; a sentence-embedding backend can be dropped in
through the same protocol.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np

from .errors import EmptyAfterNormalization, NoMatch

EMBED_DIM = 512
DEFAULT_THRESHOLD = 0.35

# Scores closer than this are considered tied; ties resolve to the lowest index.
_TIE_EPS = 1e-9

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_U64_MASK = 0xFFFFFFFFFFFFFFFF

_ENUM_PREFIX = re.compile(r"^\s*(?:\d+\s*[.)]|[-*•]+)\s*")
_NON_WORD = re.compile(r"[^\w\s]")
_WS_RUN = re.compile(r"\s+")


def strip_enum_prefix(text: str) -> str:
    """Remove one leading list marker such as "1.", "2)", "-", "*"."""
    return _ENUM_PREFIX.sub("", text, count=1)


def normalize_label(text: str) -> str:
    """Canonical form used for all name comparisons.

    Lowercases, maps underscores/hyphens to spaces, drops punctuation and
    leading enumeration markers, and collapses whitespace.
    """
    text = strip_enum_prefix(text)
    text = text.lower().replace("_", " ").replace("-", " ")
    text = _NON_WORD.sub("", text)
    return _WS_RUN.sub(" ", text).strip()


def _fnv1a64(data: bytes) -> int:
    value = _FNV_OFFSET
    for byte in data:
        value ^= byte
        value = (value * _FNV_PRIME) & _U64_MASK
    return value


def trigram_embed(text: str) -> np.ndarray:
    """Deterministic unit-norm embedding from hashed character trigrams.

    The normalized string is padded with one space on each side, its
    trigrams are counted into 512 buckets via FNV-1a 64-bit mod 512, and the
    count vector is L2-normalized. The hash is pinned so any implementation
    reproduces identical vectors.
    """
    normalized = normalize_label(text)
    if not normalized:
        raise EmptyAfterNormalization(f"{text!r} is empty after normalization")
    padded = f" {normalized} "
    counts = np.zeros(EMBED_DIM, dtype=float)
    for i in range(len(padded) - 2):
        bucket = _fnv1a64(padded[i : i + 3].encode("utf-8")) % EMBED_DIM
        counts[bucket] += 1.0
    return counts / np.linalg.norm(counts)


class Embedder(Protocol):
    def embed(self, text: str) -> np.ndarray: ...


class TrigramEmbedder:
    """Embedder-protocol wrapper around :func:`trigram_embed`."""

    def embed(self, text: str) -> np.ndarray:
        return trigram_embed(text)


_DEFAULT_EMBEDDER = TrigramEmbedder()


@dataclass(frozen=True)
class MatchResult:
    query: str
    candidate_index: int
    candidate: str
    score: float


def best_match(
    query: str,
    candidates: Sequence[str],
    threshold: float = DEFAULT_THRESHOLD,
    embedder: Embedder | None = None,
) -> MatchResult:
    """Resolve `query` to the closest candidate.

    Exact equality after normalization short-circuits with score 1.0.
    Otherwise the argmax of embedding cosines wins, ties going to the lowest
    index. Raises NoMatch when the best score falls below `threshold`.
    """
    if not candidates:
        raise ValueError("candidates must be non-empty")
    normalized_query = normalize_label(query)
    if not normalized_query:
        raise EmptyAfterNormalization(f"{query!r} is empty after normalization")
    normalized_candidates = []
    for candidate in candidates:
        normalized = normalize_label(candidate)
        if not normalized:
            raise EmptyAfterNormalization(f"candidate {candidate!r} is empty after normalization")
        normalized_candidates.append(normalized)

    for index, normalized in enumerate(normalized_candidates):
        if normalized == normalized_query:
            return MatchResult(query, index, candidates[index], 1.0)

    embedder = embedder or _DEFAULT_EMBEDDER
    query_vec = embedder.embed(normalized_query)
    best_index = 0
    best_score = float("-inf")
    for index, normalized in enumerate(normalized_candidates):
        score = float(query_vec @ embedder.embed(normalized))
        if score > best_score + _TIE_EPS:
            best_index = index
            best_score = score
    if best_score < threshold:
        raise NoMatch(query, candidates[best_index], best_score, threshold)
    return MatchResult(query, best_index, candidates[best_index], best_score)
