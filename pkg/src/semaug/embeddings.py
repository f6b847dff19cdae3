"""Word vectors, caption tokenization, and cosine similarity.

The embedding table is loaded from the common text vector format (one
``word v1 v2 ... vD`` record per line) and backs the closest-word label
matching. Vectors are static per-word embeddings; a contextual provider can
be slotted in anywhere a table is accepted, as matching only relies on the
``dimension`` / ``get`` surface.
"""

from __future__ import annotations

import re
import string
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np


class EmbeddingError(Exception):
    """Base class for embedding-table errors."""


class EmptyFile(EmbeddingError):
    pass


class DimensionMismatch(EmbeddingError):
    pass


class UnparsableFloat(EmbeddingError):
    pass


class DuplicateWord(EmbeddingError):
    pass


class DegenerateTable(EmbeddingError):
    """Every vector in the table has zero norm."""


class ZeroVector(EmbeddingError):
    pass


class AllTokensOutOfVocabulary(EmbeddingError):
    pass


@dataclass(frozen=True)
class Token:
    """A caption word with half-open character offsets into the source string."""

    text: str
    start: int
    end: int


class EmbeddingTable:
    """Immutable word -> vector map of fixed dimension."""

    def __init__(self, dimension: int, entries: dict[str, np.ndarray]):
        if dimension < 1:
            raise DimensionMismatch("dimension must be positive")
        if entries and not any(np.linalg.norm(v) > 0 for v in entries.values()):
            raise DegenerateTable("no vector in the table has nonzero norm")
        self.dimension = dimension
        self._entries = entries

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, word: str) -> bool:
        return word in self._entries

    def get(self, word: str) -> Optional[np.ndarray]:
        return self._entries.get(word)

    def words(self) -> Iterable[str]:
        return self._entries.keys()


def load_embeddings(reader: Iterable[str]) -> EmbeddingTable:
    """Load a text-format vector file into an EmbeddingTable.

    Each line is ``word v1 v2 ... vD``, single-space separated. The
    dimension is inferred from the first record; blank lines are ignored.
    Words are lowercased on load.

    Raises EmptyFile, DimensionMismatch(line_no), UnparsableFloat(line_no),
    or DuplicateWord(word).
    """
    entries: dict[str, np.ndarray] = {}
    dimension = None
    for line_no, line in enumerate(reader, start=1):
        line = line.rstrip("\r\n")
        if not line:
            continue
        parts = line.split(" ")
        word = parts[0].lower()
        values = parts[1:]
        if dimension is None:
            if len(values) < 1:
                raise DimensionMismatch(f"line {line_no}: record has no vector components")
            dimension = len(values)
        elif len(values) != dimension:
            raise DimensionMismatch(
                f"line {line_no}: expected {dimension} components, got {len(values)}"
            )
        try:
            vector = np.array([float(v) for v in values], dtype=np.float64)
        except ValueError as exc:
            raise UnparsableFloat(f"line {line_no}: {exc}") from exc
        if word in entries:
            raise DuplicateWord(word)
        entries[word] = vector
    if dimension is None:
        raise EmptyFile("vector file contains no records")
    return EmbeddingTable(dimension, entries)


_CHUNK = re.compile(r"\S+")
_PUNCT = set(string.punctuation)


def tokenize(caption: str) -> list[Token]:
    """Split a caption into lowercase word tokens with source offsets.

    Splits on Unicode whitespace, strips leading/trailing ASCII punctuation
    per token, and drops tokens that are empty after stripping. Offsets
    always reference the original string, so ``caption[t.start:t.end]``
    recovers the original word form.
    """
    tokens = []
    for match in _CHUNK.finditer(caption):
        start, end = match.span()
        while start < end and caption[start] in _PUNCT:
            start += 1
        while end > start and caption[end - 1] in _PUNCT:
            end -= 1
        if start < end:
            tokens.append(Token(text=caption[start:end].lower(), start=start, end=end))
    return tokens


def cosine_similarity(u, v) -> float:
    """Cosine similarity of two vectors, clamped to [-1, 1] against rounding."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise DimensionMismatch(f"vector shapes differ: {u.shape} vs {v.shape}")
    norm_u = np.linalg.norm(u)
    norm_v = np.linalg.norm(v)
    if norm_u == 0.0 or norm_v == 0.0:
        raise ZeroVector("cosine similarity is undefined for zero vectors")
    return float(np.clip(np.dot(u, v) / (norm_u * norm_v), -1.0, 1.0))


def embed_phrase(table: EmbeddingTable, phrase: str) -> np.ndarray:
    """Mean of the vectors of the phrase's in-vocabulary tokens.

    Out-of-vocabulary tokens are skipped; raises AllTokensOutOfVocabulary
    if nothing remains.
    """
    vectors = []
    for token in tokenize(phrase):
        vec = table.get(token.text)
        if vec is not None:
            vectors.append(vec)
    if not vectors:
        raise AllTokensOutOfVocabulary(f"no token of {phrase!r} is in the table")
    return np.mean(vectors, axis=0)
