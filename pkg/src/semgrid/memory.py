"""Episodic object memory: persistent entries, caption histograms, tokenization.

Each entry keeps a persistent ID, a running-mean position estimate over all
associated detections, and an insertion-ordered histogram of caption texts
with occurrence counts. Serialization emits the exact block layout consumed
as the model prompt fragment:

    [SCENE-START]
    [OBJ-ID] 11
    [CAPTION-HISTORY]
      2: "a bed with a pink and blue polka dot sheet."
    [POSITION] [-7.09, 1.67, 3.79]
    [SCENE-END]

with a blank line between consecutive object blocks. Token counting uses a
frozen rule (word runs and individual punctuation/bracket characters) so
counts are comparable across runs.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from typing import Iterator

SCENE_START = "[SCENE-START]"
SCENE_END = "[SCENE-END]"

_TOKEN_RE = re.compile(r"\w+|[^\w\s]")


class UnknownEntryError(KeyError):
    """Association to a persistent ID that does not exist."""


def discretize_position(p: tuple[float, float, float]) -> tuple[float, float, float]:
    """Round each coordinate to 2 decimals, ties away from zero."""
    out = []
    for v in p:
        q = Decimal(str(float(v))).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP)
        f = float(q)
        out.append(0.0 if f == 0 else f)
    return (out[0], out[1], out[2])


def token_count(text: str) -> int:
    """Count under the frozen tokenizer rule: \\w+ runs, else one char per token."""
    return len(_TOKEN_RE.findall(text))


@dataclass
class ObjectEntry:
    persistent_id: int
    position: tuple[float, float, float]
    captions: dict[str, int] = field(default_factory=dict)  # insertion-ordered
    observation_count: int = 0

    @property
    def distinct_captions(self) -> int:
        return len(self.captions)

    def caption_list(self) -> list[str]:
        """Caption multiset expanded to a flat list, histogram order."""
        out = []
        for text, count in self.captions.items():
            out.extend([text] * count)
        return out


class EpisodicMemory:
    """Ordered collection of object entries with a sequential ID allocator."""

    def __init__(self, base_id: int = 1):
        self._entries: dict[int, ObjectEntry] = {}
        self.base_id = base_id
        self.next_id = base_id

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self) -> Iterator[ObjectEntry]:
        return iter(self._entries.values())

    def __contains__(self, persistent_id: int) -> bool:
        return persistent_id in self._entries

    @property
    def entries(self) -> list[ObjectEntry]:
        return list(self._entries.values())

    def get(self, persistent_id: int) -> ObjectEntry:
        try:
            return self._entries[persistent_id]
        except KeyError:
            raise UnknownEntryError(persistent_id) from None

    def insert_new(self, detection, caption) -> int:
        """Create an entry from a detection; IDs are allocated sequentially."""
        pid = self.next_id
        self.next_id += 1
        text = caption.text if hasattr(caption, "text") else str(caption)
        self._entries[pid] = ObjectEntry(
            persistent_id=pid,
            position=tuple(detection.world_position),
            captions={text: 1},
            observation_count=1,
        )
        return pid

    def update_entry(self, persistent_id: int, detection, caption) -> None:
        """Fold one more observation into an entry.

        Position becomes the running mean over all associated detections; the
        caption count is incremented, or the caption appended in first-seen
        order.
        """
        entry = self.get(persistent_id)
        n = entry.observation_count
        pos = detection.world_position
        entry.position = tuple((entry.position[i] * n + pos[i]) / (n + 1)
                               for i in range(3))
        text = caption.text if hasattr(caption, "text") else str(caption)
        entry.captions[text] = entry.captions.get(text, 0) + 1
        entry.observation_count = n + 1

    def distinct_caption_count(self) -> int:
        return sum(e.distinct_captions for e in self)

    def serialize(self) -> str:
        return serialize(self)


def serialize(memory: EpisodicMemory) -> str:
    """Render the memory as the scene block, bit-exact and parseable."""
    blocks = []
    for entry in memory:
        lines = [f"[OBJ-ID] {entry.persistent_id}", "[CAPTION-HISTORY]"]
        for text, count in entry.captions.items():
            lines.append(f'  {count}: "{text}"')
        x, y, z = discretize_position(entry.position)
        lines.append(f"[POSITION] [{x:.2f}, {y:.2f}, {z:.2f}]")
        blocks.append("\n".join(lines))
    if not blocks:
        return f"{SCENE_START}\n{SCENE_END}"
    return f"{SCENE_START}\n" + "\n\n".join(blocks) + f"\n{SCENE_END}"
