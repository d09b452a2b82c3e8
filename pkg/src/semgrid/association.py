"""Data association: ground-truth oracle, gated nearest-neighbor heuristic,
memory commit, and association metrics.

The oracle labels each detection against a registry of true-object-to-
persistent-ID bindings and is correct by construction. The heuristic scores
detection/entry pairs with a convex blend of spatial proximity and best
caption similarity; a pair is eligible only if it passes at least one of
the two gates, and assignment is greedy one-to-one in descending score.

Metric semantics (per detection decision, replayed in order):
  - a match is correct iff it points at the persistent ID currently bound
    to the detection's true object;
  - a NEW_ID is correct iff the true object has no binding yet, and then
    binds it to the freshly created persistent ID;
  - IDSW counts incorrect matches, Frag counts incorrect NEW_IDs, so
    correct + IDSW + Frag always partitions the decisions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .memory import EpisodicMemory
from .metrics import UndefinedMetricsError
from .oracle import Embedder
from .protocol import MatchDecision
from .world import Observation


@dataclass(frozen=True)
class AssociationConfig:
    distance_gate: float = 1.0            # meters
    caption_similarity_gate: float = 0.3  # cosine
    weight_spatial: float = 0.6

    def __post_init__(self):
        if not math.isfinite(self.distance_gate) or self.distance_gate <= 0:
            raise ValueError("distance_gate must be finite and positive")
        if not 0 <= self.weight_spatial <= 1:
            raise ValueError("weight_spatial must be in [0, 1]")


@dataclass(frozen=True)
class AssociationRecord:
    step: int
    decision: MatchDecision
    predicted_persistent_id: int
    true_object_id: int


def associate_oracle(observation: Observation, memory: EpisodicMemory,
                     registry: dict[int, int]) -> list[MatchDecision]:
    """Ground-truth labeler: committed objects match their bound ID, else NEW_ID."""
    decisions = []
    for det in observation.detections:
        pid = registry.get(det.true_id_hidden)
        decisions.append(MatchDecision(det.transient_id, pid))
    return decisions


def _pair_score(distance: float, best_sim: float, cfg: AssociationConfig) -> float:
    spatial = max(0.0, 1.0 - distance / cfg.distance_gate)
    return cfg.weight_spatial * spatial + (1.0 - cfg.weight_spatial) * best_sim


def associate_heuristic(observation: Observation, captions: list[str],
                        memory: EpisodicMemory, cfg: AssociationConfig,
                        embedder: Embedder) -> list[MatchDecision]:
    """Greedy one-to-one matching on blended spatial/semantic scores.

    Captions must be aligned with the observation's detections. Ties break
    on lower transient ID, then lower persistent ID. Detections whose every
    entry pair fails both gates become NEW_ID.
    """
    dets = observation.detections
    if len(captions) != len(dets):
        raise ValueError("one caption per detection required")
    candidates = []
    for det, caption in zip(dets, captions):
        for entry in memory:
            dx = det.world_position[0] - entry.position[0]
            dy = det.world_position[1] - entry.position[1]
            dz = det.world_position[2] - entry.position[2]
            distance = math.sqrt(dx * dx + dy * dy + dz * dz)
            best_sim = max(
                embedder.similarity(caption, text) for text in entry.captions)
            if distance > cfg.distance_gate and best_sim < cfg.caption_similarity_gate:
                continue
            score = _pair_score(distance, best_sim, cfg)
            candidates.append((score, det.transient_id, entry.persistent_id))
    candidates.sort(key=lambda t: (-t[0], t[1], t[2]))
    assigned: dict[int, int] = {}
    used_entries: set[int] = set()
    for score, tid, pid in candidates:
        if tid in assigned or pid in used_entries:
            continue
        assigned[tid] = pid
        used_entries.add(pid)
    return [MatchDecision(det.transient_id, assigned.get(det.transient_id))
            for det in dets]


def apply_matches(memory: EpisodicMemory, decisions: list[MatchDecision],
                  observation: Observation, captions: list,
                  registry: dict[int, int] | None = None,
                  step: int = 0) -> list[AssociationRecord]:
    """Commit one frame's decisions to memory and emit association records.

    NEW_ID creates an entry; a match updates the target entry (an unknown
    persistent ID is a hard error). When a registry is supplied (oracle
    mode) the first commit of a true object records its binding.
    """
    dets = observation.detections
    if len(decisions) != len(dets) or len(captions) != len(dets):
        raise ValueError("decisions and captions must cover all detections")
    by_tid = {d.transient_id: d for d in decisions}
    if len(by_tid) != len(dets):
        raise ValueError("duplicate transient id in decisions")
    records = []
    for det, caption in zip(dets, captions):
        try:
            decision = by_tid[det.transient_id]
        except KeyError:
            raise ValueError(f"no decision for transient id {det.transient_id}") from None
        if decision.is_new:
            pid = memory.insert_new(det, caption)
            if registry is not None and det.true_id_hidden not in registry:
                registry[det.true_id_hidden] = pid
        else:
            pid = decision.target
            memory.update_entry(pid, det, caption)
        records.append(AssociationRecord(
            step=step, decision=decision, predicted_persistent_id=pid,
            true_object_id=det.true_id_hidden))
    return records


@dataclass(frozen=True)
class AssociationMetrics:
    acc: float
    f1_match: float
    f1_new: float
    idsw: int
    frag: int
    correct_matches: int
    correct_news: int
    total: int


def _f1(correct: int, predicted: int, actual: int) -> float:
    precision = correct / predicted if predicted else 1.0
    recall = correct / actual if actual else 1.0
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def evaluate_association(records: list[AssociationRecord]) -> AssociationMetrics:
    """Fold an episode's records into Acc / F1-M / F1-N / IDSW / Frag."""
    if not records:
        raise UndefinedMetricsError("no association records")
    binding: dict[int, int] = {}
    correct_matches = correct_news = idsw = frag = 0
    predicted_matches = predicted_news = actual_matches = actual_news = 0
    for rec in records:
        true_id = rec.true_object_id
        bound = binding.get(true_id)
        if bound is None:
            actual_news += 1
        else:
            actual_matches += 1
        if rec.decision.is_new:
            predicted_news += 1
            if bound is None:
                correct_news += 1
                binding[true_id] = rec.predicted_persistent_id
            else:
                frag += 1
        else:
            predicted_matches += 1
            if bound is not None and rec.decision.target == bound:
                correct_matches += 1
            else:
                idsw += 1
    total = len(records)
    return AssociationMetrics(
        acc=(correct_matches + correct_news) / total,
        f1_match=_f1(correct_matches, predicted_matches, actual_matches),
        f1_new=_f1(correct_news, predicted_news, actual_news),
        idsw=idsw,
        frag=frag,
        correct_matches=correct_matches,
        correct_news=correct_news,
        total=total,
    )
