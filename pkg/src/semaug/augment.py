"""The four caption augmentation strategies with deterministic randomness.

Strategies: prefix ("A cartoon of a woman..."), suffix ("...on a rainy
day"), replacement (swap a label's anchor word for a peer from the same
supercategory), and compound (prefix, then suffix, then replacement).

All randomness flows through an explicit ChoiceSource so that a run seed
fully determines every augmented caption, independent of execution order.
"""

from __future__ import annotations

import random
import string
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

from .coco import CaptionAnnotation, Category, supercategory_peers
from .embeddings import EmbeddingTable
from .hashing import MASK64, fnv1a64
from .matching import DEFAULT_MIN_SCORE, LabelOutOfVocabulary, match_label_word


class StrategyKind(Enum):
    PREFIX = "prefix"
    SUFFIX = "suffix"
    REPLACEMENT = "replacement"
    COMPOUND = "compound"


DEFAULT_PREFIXES = (
    "A cartoon of",
    "A grainy image of",
    "A black and white image of",
)

DEFAULT_SUFFIXES = (
    "on a rainy day",
    "on a foggy night",
    "in the mountains",
    "near the sea",
)


@dataclass(frozen=True)
class AugmentationConfig:
    """Knobs for the strategy layer.

    ``strategy_weights`` are the selection probabilities in StrategyKind
    declaration order (prefix, suffix, replacement, compound) and must sum
    to 1. ``replacement_prob`` is the per-label Bernoulli probability of
    being swapped; ``min_score`` is the similarity floor for anchor words.
    """

    prefixes: tuple[str, ...] = DEFAULT_PREFIXES
    suffixes: tuple[str, ...] = DEFAULT_SUFFIXES
    strategy_weights: tuple[float, float, float, float] = (0.25, 0.25, 0.25, 0.25)
    replacement_prob: float = 0.5
    min_score: float = DEFAULT_MIN_SCORE

    def __post_init__(self):
        object.__setattr__(self, "prefixes", tuple(self.prefixes))
        object.__setattr__(self, "suffixes", tuple(self.suffixes))
        object.__setattr__(self, "strategy_weights", tuple(self.strategy_weights))
        if not self.prefixes or not all(self.prefixes):
            raise ValueError("prefixes must be a nonempty list of nonempty strings")
        if not self.suffixes or not all(self.suffixes):
            raise ValueError("suffixes must be a nonempty list of nonempty strings")
        if len(self.strategy_weights) != 4:
            raise ValueError("strategy_weights must have exactly 4 entries")
        if any(w < 0 for w in self.strategy_weights):
            raise ValueError("strategy weights must be nonnegative")
        if abs(sum(self.strategy_weights) - 1.0) > 1e-9:
            raise ValueError("strategy weights must sum to 1")
        if not 0.0 < self.replacement_prob <= 1.0:
            raise ValueError("replacement_prob must be in (0, 1]")
        if not -1.0 <= self.min_score <= 1.0:
            raise ValueError("min_score must be in [-1, 1]")

    @classmethod
    def from_dict(cls, raw: dict) -> "AugmentationConfig":
        kwargs = {}
        for key in ("prefixes", "suffixes", "strategy_weights"):
            if key in raw:
                kwargs[key] = tuple(raw[key])
        for key in ("replacement_prob", "min_score"):
            if key in raw:
                kwargs[key] = float(raw[key])
        return cls(**kwargs)


class ChoiceSource:
    """A seeded stream of random draws, recording each choice it makes.

    Same seed, same stream. Streams for distinct captions are derived as
    ``run_seed XOR fnv1a64("caption:<id>")`` so captions can be augmented
    in parallel without the execution order affecting any output.
    """

    def __init__(self, seed: int):
        self._rng = random.Random(seed & MASK64)
        self.trace: list[int] = []

    @classmethod
    def derived(cls, run_seed: int, tag: str) -> "ChoiceSource":
        return cls((run_seed ^ fnv1a64(tag.encode("utf-8"))) & MASK64)

    @classmethod
    def for_caption(cls, run_seed: int, caption_id: int) -> "ChoiceSource":
        return cls.derived(run_seed, f"caption:{caption_id}")

    def index(self, n: int) -> int:
        """Uniform integer in [0, n)."""
        if n < 1:
            raise ValueError("index draw needs at least one option")
        value = self._rng.randrange(n)
        self.trace.append(value)
        return value

    def bernoulli(self, p: float) -> bool:
        hit = self._rng.random() < p
        self.trace.append(int(hit))
        return hit

    def weighted(self, weights: Sequence[float]) -> int:
        """Index drawn with the given probabilities (weights sum to 1)."""
        roll = self._rng.random()
        cumulative = 0.0
        for i, w in enumerate(weights):
            cumulative += w
            if roll < cumulative:
                self.trace.append(i)
                return i
        # guard against float shortfall in the cumulative sum
        last = len(weights) - 1
        self.trace.append(last)
        return last


@dataclass(frozen=True)
class Replacement:
    old_category_id: int
    new_category_id: int
    span: tuple[int, int]  # anchor token offsets in the text being spliced

    def to_dict(self) -> dict:
        return {
            "old_category_id": self.old_category_id,
            "new_category_id": self.new_category_id,
            "span": list(self.span),
        }


@dataclass(frozen=True)
class AugmentedCaption:
    source_caption_id: int
    text: str
    strategy: StrategyKind
    replacements: tuple[Replacement, ...]
    labels_after: frozenset[int]
    choice_trace: tuple[int, ...]

    def to_dict(self) -> dict:
        return {
            "source_caption_id": self.source_caption_id,
            "text": self.text,
            "strategy": self.strategy.value,
            "replacements": [r.to_dict() for r in self.replacements],
            "labels_after": sorted(self.labels_after),
            "choice_trace": list(self.choice_trace),
        }


def _lowercase_first_alpha(text: str) -> str:
    for i, ch in enumerate(text):
        if ch.isalpha():
            return text[:i] + ch.lower() + text[i + 1 :]
    return text


def apply_prefix(caption: str, prefix: str) -> str:
    """Prepend ``prefix``, lowercasing the caption's first alphabetic character.

    An empty (or all-whitespace) caption yields the prefix alone.
    """
    if not prefix:
        raise ValueError("prefix must be nonempty")
    body = _lowercase_first_alpha(caption)
    if not body.strip():
        return prefix
    return prefix + " " + body


def apply_suffix(caption: str, suffix: str) -> str:
    """Append ``suffix`` after trimming trailing periods and whitespace."""
    if not suffix:
        raise ValueError("suffix must be nonempty")
    trimmed = caption.rstrip(string.whitespace + ".")
    if not trimmed:
        return suffix
    return trimmed + " " + suffix


def apply_replacement(
    caption: str,
    labels: set[Category],
    taxonomy: Sequence[Category],
    table: EmbeddingTable,
    cfg: AugmentationConfig,
    choices: ChoiceSource,
) -> tuple[str, list[Replacement]]:
    """Swap anchor words of sampled labels for same-supercategory peers.

    Each label (ascending id order) is independently selected with
    probability ``cfg.replacement_prob``; if the round selects none, the
    lowest-id label is forced so the sampled subset is never empty. A
    selected label is swapped only when its anchor word is found in the
    caption and the taxonomy offers at least one peer; otherwise it is
    skipped silently. Swaps are applied sequentially, each matching against
    the current text, and the recorded span refers to that intermediate
    text.
    """
    ordered = sorted(labels, key=lambda c: c.id)
    if not ordered:
        return caption, []
    selected = [lab for lab in ordered if choices.bernoulli(cfg.replacement_prob)]
    if not selected:
        selected = [ordered[0]]

    text = caption
    swaps: list[Replacement] = []
    for label in selected:
        peers = supercategory_peers(taxonomy, label.id)
        if not peers:
            continue
        try:
            match = match_label_word(text, label.name, table, cfg.min_score)
        except LabelOutOfVocabulary:
            continue
        if match is None:
            continue
        peer = peers[choices.index(len(peers))]
        token = match.token
        text = text[: token.start] + peer.name + text[token.end :]
        swaps.append(Replacement(label.id, peer.id, (token.start, token.end)))
    return text, swaps


def apply_compound(
    caption: str,
    labels: set[Category],
    taxonomy: Sequence[Category],
    table: EmbeddingTable,
    cfg: AugmentationConfig,
    choices: ChoiceSource,
) -> tuple[str, list[Replacement]]:
    """Prefix, then suffix, then replacement, in that fixed order."""
    prefix = cfg.prefixes[choices.index(len(cfg.prefixes))]
    suffix = cfg.suffixes[choices.index(len(cfg.suffixes))]
    staged = apply_suffix(apply_prefix(caption, prefix), suffix)
    return apply_replacement(staged, labels, taxonomy, table, cfg, choices)


def augment_caption(
    annotation: CaptionAnnotation,
    labels: set[Category],
    taxonomy: Sequence[Category],
    table: EmbeddingTable,
    cfg: AugmentationConfig,
    choices: ChoiceSource,
) -> AugmentedCaption:
    """Draw a strategy per the configured weights and apply it."""
    trace_start = len(choices.trace)
    strategy = list(StrategyKind)[choices.weighted(cfg.strategy_weights)]
    swaps: list[Replacement] = []
    if strategy is StrategyKind.PREFIX:
        text = apply_prefix(annotation.caption, cfg.prefixes[choices.index(len(cfg.prefixes))])
    elif strategy is StrategyKind.SUFFIX:
        text = apply_suffix(annotation.caption, cfg.suffixes[choices.index(len(cfg.suffixes))])
    elif strategy is StrategyKind.REPLACEMENT:
        text, swaps = apply_replacement(annotation.caption, labels, taxonomy, table, cfg, choices)
    else:
        text, swaps = apply_compound(annotation.caption, labels, taxonomy, table, cfg, choices)

    labels_after = {cat.id for cat in labels}
    for swap in swaps:
        labels_after.discard(swap.old_category_id)
        labels_after.add(swap.new_category_id)

    return AugmentedCaption(
        source_caption_id=annotation.id,
        text=text,
        strategy=strategy,
        replacements=tuple(swaps),
        labels_after=frozenset(labels_after),
        choice_trace=tuple(choices.trace[trace_start:]),
    )
