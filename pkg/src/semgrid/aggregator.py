"""Consensus pseudo-captioning: one viewpoint-invariant caption per object.

Attributes are recovered by frequency-weighted voting over the caption
histogram: every caption contributes its occurrence count to each attribute
token it contains. The category is the plurality winner, modifiers survive
when their vote share reaches the threshold, and view-dependent context
tokens are always excluded. Informative views are chosen greedily by new
footprint coverage with an angular-diversity tiebreak; they document which
observations support the caption but never add votes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .memory import ObjectEntry
from .vocabulary import Vocabulary, tokenize
from .world import AgentPose, Cell


@dataclass(frozen=True)
class ViewRecord:
    step: int
    pose: AgentPose
    covered_cells: frozenset[Cell]


@dataclass(frozen=True)
class PseudoCaption:
    text: str
    supporting_frequencies: dict[str, int]
    views_used: tuple[int, ...] = ()  # steps of the selected views


def _view_angle(record: ViewRecord, cell_size: float) -> float:
    """Bearing from the covered-cell centroid to the observing pose (radians)."""
    cells = record.covered_cells
    if not cells:
        return math.radians(record.pose.heading_degrees)
    cx = (sum(c for c, _ in cells) / len(cells) + 0.5) * cell_size
    cy = (sum(r for _, r in cells) / len(cells) + 0.5) * cell_size
    return math.atan2(record.pose.position[1] - cy, record.pose.position[0] - cx)


def _angular_separation(a: float, b: float) -> float:
    diff = abs(a - b) % (2 * math.pi)
    return min(diff, 2 * math.pi - diff)


def select_informative_views(records: list[ViewRecord], budget: int,
                             cell_size: float = 1.0) -> list[ViewRecord]:
    """Greedy max-coverage selection of up to ``budget`` views.

    Ties on coverage gain break toward larger angular separation from the
    views already picked, then toward the earlier step.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    pool = list(records)
    picked: list[ViewRecord] = []
    picked_angles: list[float] = []
    covered: set[Cell] = set()
    while pool and len(picked) < budget:
        best = None
        best_key = None
        for rec in pool:
            gain = len(rec.covered_cells - covered)
            angle = _view_angle(rec, cell_size)
            if picked_angles:
                sep = min(_angular_separation(angle, a) for a in picked_angles)
            else:
                sep = math.inf
            key = (-gain, -sep, rec.step)
            if best_key is None or key < best_key:
                best, best_key = rec, key
        pool.remove(best)
        picked.append(best)
        picked_angles.append(_view_angle(best, cell_size))
        covered |= best.covered_cells
    return picked


def consensus_caption(entry: ObjectEntry, selected_views: list[ViewRecord],
                      vocabulary: Vocabulary,
                      vote_threshold: float = 0.5) -> PseudoCaption:
    """Vote attributes out of the caption histogram and render the consensus.

    Views are coverage evidence only; all votes come from the histogram.
    """
    if not entry.captions:
        raise ValueError("entry has no captions")
    votes: dict[str, int] = {}
    for text, count in entry.captions.items():
        for token in set(tokenize(text)):
            votes[token] = votes.get(token, 0) + count
    total = entry.observation_count
    category = None
    best_votes = 0
    for cat in vocabulary.categories:  # canonical order decides ties
        v = votes.get(cat, 0)
        if v > best_votes:
            category, best_votes = cat, v
    if category is None:
        raise ValueError("no category token in the caption history")
    modifiers = tuple(m for m in vocabulary.modifiers
                      if votes.get(m, 0) / total >= vote_threshold)
    text = " ".join(["a", *modifiers, category])
    supporting = {tok: votes[tok] for tok in (*modifiers, category)}
    return PseudoCaption(
        text=text,
        supporting_frequencies=supporting,
        views_used=tuple(v.step for v in selected_views),
    )


def frequency_baseline(entry: ObjectEntry) -> str:
    """Most frequent caption; ties resolve to the first seen."""
    if not entry.captions:
        raise ValueError("entry has no captions")
    return max(entry.captions.items(), key=lambda kv: kv[1])[0]
