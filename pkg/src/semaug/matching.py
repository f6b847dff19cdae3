"""Closest-word extraction: find the caption token nearest a class label.

The anchor for replacement augmentation. A caption like "a woman sitting on
a couch" with class label "person" should anchor on "woman": the token whose
embedding is most cosine-similar to the label's embedding.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .embeddings import (
    AllTokensOutOfVocabulary,
    EmbeddingTable,
    Token,
    cosine_similarity,
    embed_phrase,
    tokenize,
)

DEFAULT_MIN_SCORE = 0.35


class LabelOutOfVocabulary(Exception):
    """No token of the label phrase is in the embedding table."""


@dataclass(frozen=True)
class MatchResult:
    token: Token
    score: float
    label: str


def match_label_word(
    caption: str,
    label: str,
    table: EmbeddingTable,
    min_score: float = DEFAULT_MIN_SCORE,
) -> Optional[MatchResult]:
    """Return the in-vocabulary caption token most similar to ``label``.

    Ties break toward the earliest token offset. Returns None (no match)
    when every caption token is out of vocabulary or the best score falls
    below ``min_score``; the threshold keeps function words like "the" from
    anchoring a replacement.

    Raises LabelOutOfVocabulary if the label itself has no in-vocabulary
    token.
    """
    if not -1.0 <= min_score <= 1.0:
        raise ValueError(f"min_score must be in [-1, 1], got {min_score}")
    try:
        label_vector = embed_phrase(table, label)
    except AllTokensOutOfVocabulary as exc:
        raise LabelOutOfVocabulary(label) from exc

    best: Optional[MatchResult] = None
    for token in tokenize(caption):
        vector = table.get(token.text)
        if vector is None:
            continue
        score = cosine_similarity(vector, label_vector)
        if best is None or score > best.score:
            best = MatchResult(token=token, score=score, label=label)
    if best is None or best.score < min_score:
        return None
    return best
