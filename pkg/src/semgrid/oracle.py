"""Viewpoint-conditioned stochastic captioner and deterministic text embedding.

The captioner manufactures the failure mode the rest of the system exists
to repair: the same object is described differently depending on distance
and viewing angle. Corruption probability is linear in normalized distance
and angle, clamped to [0, p_max]; with an all-zero noise model the caption
is a pure function of the object, identical from every pose.

The embedding is an L2-normalized term-frequency vector over the world
vocabulary (stop tokens excluded, out-of-vocabulary tokens pooled into one
shared component). It deliberately has the two properties the disagreement
machinery needs: identical captions embed identically, and captions with
disjoint content are orthogonal.
"""
from __future__ import annotations

import math
import random
from dataclasses import dataclass

import numpy as np

from .vocabulary import AttributeSet, Vocabulary, tokenize
from .world import AgentPose, SensorConfig, WorldObject, _angle_offset

__all__ = [
    "AttributeSet", "Caption", "NoiseModel", "Embedder",
    "caption_object", "render_caption", "cosine_similarity",
]


@dataclass(frozen=True)
class NoiseModel:
    p0: float = 0.0        # base per-modifier corruption probability
    k_d: float = 0.0       # slope in distance / max_range
    k_a: float = 0.0       # slope in |view angle| / (fov / 2)
    p_max: float = 1.0     # clamp for all corruption probabilities
    p_cat: float = 0.0     # base category-confusion probability, same scaling
    p_context: float = 0.0  # per-token inclusion of view-dependent clutter

    @classmethod
    def zero(cls) -> "NoiseModel":
        return cls()

    @property
    def is_zero(self) -> bool:
        return (self.p0 == 0 and self.k_d == 0 and self.k_a == 0
                and self.p_cat == 0 and self.p_context == 0)


@dataclass(frozen=True)
class Caption:
    text: str
    source_step: int = 0
    source_pose: AgentPose | None = None


def render_caption(category: str, modifiers: tuple[str, ...],
                   context: tuple[str, ...] = ()) -> str:
    parts = ["a", *modifiers, category]
    if context:
        parts += ["with", *context]
    return " ".join(parts)


def corruption_probability(noise: NoiseModel, base: float, distance: float,
                           angle_offset: float, sensor: SensorConfig,
                           cell_size: float) -> float:
    max_range = sensor.max_range_cells * cell_size
    dist_frac = distance / max_range if max_range > 0 else 0.0
    angle_frac = angle_offset / (sensor.fov_degrees / 2.0)
    p = base + noise.k_d * dist_frac + noise.k_a * angle_frac
    return min(max(p, 0.0), noise.p_max)


def caption_object(obj: WorldObject, pose: AgentPose, noise: NoiseModel,
                   sensor: SensorConfig, vocabulary: Vocabulary,
                   rng: random.Random, cell_size: float = 0.5,
                   step: int = 0) -> Caption:
    """Produce one caption for a visible object from the given pose.

    Each ground-truth modifier is independently dropped or substituted with
    probability p(distance, angle); the category flips to a confusable one
    under the same scaling with base p_cat; each view-dependent context
    token is included with probability p_context.
    """
    attrs = obj.attributes
    distance = math.hypot(obj.center[0] - pose.position[0],
                          obj.center[1] - pose.position[1])
    angle = _angle_offset(pose, obj.center[:2])
    p_mod = corruption_probability(noise, noise.p0, distance, angle, sensor, cell_size)
    p_cat = corruption_probability(noise, noise.p_cat, distance, angle, sensor, cell_size)

    modifiers = []
    pool = vocabulary.modifiers
    for mod in attrs.modifiers:
        if p_mod > 0 and rng.random() < p_mod:
            if rng.random() < 0.5:
                continue  # dropped
            others = [m for m in pool if m != mod]
            modifiers.append(rng.choice(others) if others else mod)
        else:
            modifiers.append(mod)

    category = attrs.category
    confusables = vocabulary.confusables_for(category)
    if confusables and p_cat > 0 and rng.random() < p_cat:
        category = rng.choice(confusables)

    context = tuple(tok for tok in attrs.context
                    if noise.p_context > 0 and rng.random() < noise.p_context)

    return Caption(render_caption(category, tuple(modifiers), context),
                   source_step=step, source_pose=pose)


class Embedder:
    """Term-frequency embedding over a fixed vocabulary, unit L2 norm.

    Dimension is len(vocabulary tokens) + 1; the extra component pools all
    out-of-vocabulary tokens. Empty text maps to the all-zero vector.
    """

    def __init__(self, vocabulary: Vocabulary):
        self.vocabulary = vocabulary
        tokens = vocabulary.all_tokens()
        self._index = {tok: i for i, tok in enumerate(tokens)}
        self.dim = len(tokens) + 1
        self._cache: dict[str, np.ndarray] = {}
        self._pair_cache: dict[tuple[str, str], float] = {}

    def embed(self, text: str) -> np.ndarray:
        cached = self._cache.get(text)
        if cached is not None:
            return cached
        vec = np.zeros(self.dim)
        for tok in tokenize(text):
            vec[self._index.get(tok, self.dim - 1)] += 1.0
        norm = np.linalg.norm(vec)
        if norm > 0:
            vec /= norm
        vec.setflags(write=False)
        self._cache[text] = vec
        return vec

    def similarity(self, a: str, b: str) -> float:
        """Cosine similarity of two texts, memoized per unordered pair."""
        key = (a, b) if a <= b else (b, a)
        hit = self._pair_cache.get(key)
        if hit is None:
            hit = cosine_similarity(self.embed(a), self.embed(b))
            self._pair_cache[key] = hit
        return hit


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """Inner product of unit vectors; 0.0 when either vector is all-zero."""
    if a.shape != b.shape:
        raise ValueError("embedding dimensions differ")
    return float(np.dot(a, b))
