"""Attribute vocabulary: categories, modifiers, view-dependent context terms.

The vocabulary is fixed at world creation and shared by the captioner,
the embedding, and the consensus aggregator. Confusable categories model
the classic captioner failure of drifting between near-synonyms
(couch vs armchair) under viewpoint changes.
"""
from __future__ import annotations

import string
from dataclasses import dataclass, field

STOP_TOKENS = frozenset({"a", "the", "with", "in", "on"})

_STRIP = string.punctuation


def tokenize(text: str) -> list[str]:
    """Lowercased content tokens of a caption; stop tokens and punctuation dropped."""
    out = []
    for raw in text.split():
        tok = raw.strip(_STRIP).lower()
        if tok and tok not in STOP_TOKENS:
            out.append(tok)
    return out


@dataclass(frozen=True)
class AttributeSet:
    """Latent description of one object: category, intrinsic modifiers,
    and optional view-dependent context terms (clutter that only shows
    up from some viewpoints, never part of the object itself)."""

    category: str
    modifiers: tuple[str, ...]
    context: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.category:
            raise ValueError("category must be non-empty")

    def tokens(self) -> set[str]:
        """Object-intrinsic attribute tokens: category plus modifiers."""
        return {self.category, *self.modifiers}


@dataclass(frozen=True)
class Vocabulary:
    categories: tuple[str, ...]
    modifiers: tuple[str, ...]
    context_tokens: tuple[str, ...]
    confusable: dict[str, tuple[str, ...]] = field(default_factory=dict)

    def __post_init__(self):
        if not self.categories or not self.modifiers:
            raise ValueError("vocabulary needs at least one category and one modifier")
        for cat, others in self.confusable.items():
            if cat not in self.categories:
                raise ValueError(f"confusable key {cat!r} not a category")
            for o in others:
                if o not in self.categories:
                    raise ValueError(f"confusable value {o!r} not a category")

    def all_tokens(self) -> tuple[str, ...]:
        return self.categories + self.modifiers + self.context_tokens

    def is_view_dependent(self, token: str) -> bool:
        return token in self.context_tokens

    def confusables_for(self, category: str) -> tuple[str, ...]:
        return self.confusable.get(category, ())


def default_vocabulary() -> Vocabulary:
    categories = (
        "couch", "armchair", "bench", "bed", "table", "desk", "chair",
        "stool", "lamp", "lantern", "cabinet", "shelf", "mirror", "frame",
        "rug", "mat", "plant", "flower",
    )
    modifiers = (
        "black", "white", "red", "blue", "green", "brown", "gray", "yellow",
        "leather", "wooden", "metal", "fabric", "plastic", "glass",
        "small", "large", "tall", "round", "square", "striped",
    )
    context = (
        "pillow", "blanket", "shadow", "window", "doorway", "corner",
        "clutter", "reflection",
    )
    groups = [
        ("couch", "armchair", "bench", "bed"),
        ("table", "desk"),
        ("chair", "stool"),
        ("lamp", "lantern"),
        ("cabinet", "shelf"),
        ("mirror", "frame"),
        ("rug", "mat"),
        ("plant", "flower"),
    ]
    confusable: dict[str, tuple[str, ...]] = {}
    for group in groups:
        for cat in group:
            confusable[cat] = tuple(c for c in group if c != cat)
    return Vocabulary(categories, modifiers, context, confusable)


DEFAULT_VOCABULARY = default_vocabulary()
