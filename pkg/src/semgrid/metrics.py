"""Cross-view consistency, attribute-accuracy proxy, and scalability metrics.

All metrics are pure functions of logged data, so re-evaluating a log always
reproduces the same numbers. Per-object consistency (CS) is the mean pairwise
cosine similarity over the object's caption multiset; single-caption objects
score 1.0 by convention so that policies are not penalized for brief visits.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np

from .oracle import Embedder
from .vocabulary import AttributeSet, Vocabulary, tokenize


class UndefinedMetricsError(ValueError):
    """Metric requested over an empty domain."""


class InsufficientDataError(UndefinedMetricsError):
    """Episode too short for the requested diagnostic."""


def mean_similarity_from_counts(counts: dict[str, int], embedder: Embedder) -> float:
    """Frequency-weighted mean pairwise cosine similarity of a caption histogram.

    Uses the closed form for unit vectors: with V the count-weighted sum of
    caption embeddings and N the multiset size, the pair-similarity sum is
    (||V||^2 - N) / 2, so one pass over distinct captions suffices.
    """
    n = sum(counts.values())
    if n == 0:
        raise UndefinedMetricsError("object has no captions")
    if n == 1:
        return 1.0
    total = np.zeros(embedder.dim)
    for text, count in counts.items():
        total += count * embedder.embed(text)
    pair_sum = (float(total @ total) - n) / 2.0
    return pair_sum / (n * (n - 1) / 2)


def pairwise_mean_similarity(captions: list[str], embedder: Embedder) -> float:
    """Mean cosine similarity over all unordered caption pairs (1.0 for singletons)."""
    return mean_similarity_from_counts(Counter(captions), embedder)


@dataclass(frozen=True)
class ConsistencyReport:
    per_object: dict[int, float]
    mean: float
    median: float
    iqr: float


def caption_consistency(per_object_captions: dict[int, list[str]],
                        embedder: Embedder) -> ConsistencyReport:
    """Scene-level consistency: mean/median/IQR over per-object CS values."""
    if not per_object_captions:
        raise UndefinedMetricsError("no captioned objects")
    per_object = {oid: pairwise_mean_similarity(caps, embedder)
                  for oid, caps in per_object_captions.items()}
    values = np.array(list(per_object.values()))
    q25, q75 = np.percentile(values, [25, 75])
    return ConsistencyReport(
        per_object=per_object,
        mean=float(values.mean()),
        median=float(np.median(values)),
        iqr=float(q75 - q25),
    )


@dataclass(frozen=True)
class AttributeScore:
    precision: float
    recall: float
    f1: float


def attribute_f1(predicted_text: str, truth: AttributeSet,
                 vocabulary: Vocabulary) -> AttributeScore:
    """Set precision/recall over {category} plus modifiers.

    Predicted attribute tokens are the caption tokens that are vocabulary
    categories or modifiers; context tokens fall outside the attribute space
    and are ignored on both sides.
    """
    attribute_space = set(vocabulary.categories) | set(vocabulary.modifiers)
    predicted = {t for t in tokenize(predicted_text) if t in attribute_space}
    actual = truth.tokens()
    inter = len(predicted & actual)
    precision = inter / len(predicted) if predicted else 0.0
    recall = inter / len(actual) if actual else 0.0
    if precision + recall == 0:
        return AttributeScore(precision, recall, 0.0)
    return AttributeScore(precision, recall,
                          2 * precision * recall / (precision + recall))


@dataclass(frozen=True)
class ScalabilitySeries:
    steps: tuple[int, ...]
    token_counts: tuple[int, ...]
    object_counts: tuple[int, ...]
    step_times: tuple[float, ...]


@dataclass(frozen=True)
class ScalabilityDiagnostics:
    series: ScalabilitySeries
    saturation_step: int
    corr_tokens_objects: float
    corr_tokens_steps_suffix: float
    passed: bool


def _corr(a: np.ndarray, b: np.ndarray) -> float:
    """Pearson correlation; defined as 0.0 when either side has no variance."""
    if len(a) < 2 or a.std() == 0 or b.std() == 0:
        return 0.0
    return float(np.corrcoef(a, b)[0, 1])


def memory_scalability(steps: list[int], token_counts: list[int],
                       object_counts: list[int],
                       distinct_caption_counts: list[int],
                       step_times: list[float] | None = None) -> ScalabilityDiagnostics:
    """Token-growth diagnostics: does memory scale with objects, not steps?

    Saturation is the first step after which both the entry count and the
    distinct-caption count are final; the step-index correlation is computed
    on the post-saturation suffix only.
    """
    n = len(steps)
    if n < 10:
        raise InsufficientDataError(f"need >= 10 steps, got {n}")
    if not (len(token_counts) == len(object_counts) == len(distinct_caption_counts) == n):
        raise ValueError("series length mismatch")
    final_objects = object_counts[-1]
    final_distinct = distinct_caption_counts[-1]
    sat_index = 0
    for i in range(n):
        if object_counts[i] == final_objects and distinct_caption_counts[i] == final_distinct:
            sat_index = i
            break
    tokens = np.array(token_counts, dtype=float)
    objects = np.array(object_counts, dtype=float)
    corr_obj = _corr(tokens, objects)
    suffix = slice(sat_index + 1, n)
    corr_steps = _corr(tokens[suffix], np.array(steps[suffix], dtype=float))
    series = ScalabilitySeries(
        steps=tuple(steps), token_counts=tuple(token_counts),
        object_counts=tuple(object_counts),
        step_times=tuple(step_times) if step_times else tuple([0.0] * n))
    return ScalabilityDiagnostics(
        series=series,
        saturation_step=steps[sat_index],
        corr_tokens_objects=corr_obj,
        corr_tokens_steps_suffix=corr_steps,
        passed=corr_obj > corr_steps,
    )


@dataclass(frozen=True)
class TimingProfile:
    step_times: tuple[float, ...]
    max_time: float
    median_time: float
    max_over_median: float

    def within_bound(self, bound: float = 10.0) -> bool:
        return self.max_over_median <= bound


def timing_profile(step_times: list[float]) -> TimingProfile:
    """Per-step wall-time summary; the headline figure is max / median."""
    if not step_times:
        raise UndefinedMetricsError("no step times")
    arr = np.array(step_times, dtype=float)
    median = float(np.median(arr))
    max_t = float(arr.max())
    ratio = max_t / median if median > 0 else float("inf")
    return TimingProfile(tuple(step_times), max_t, median, ratio)
