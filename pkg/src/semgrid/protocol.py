"""Prompt serializer and strict parser for the structured model turn.

A model turn is a block of [MATCH] lines, then one [CAPTION] line per match
in the same order, then exactly one [ACTION] line:

    [MATCH] 37 : 12
    [MATCH] 16 : NEW_ID
    [CAPTION] "a black leather couch with a white pillow"
    [CAPTION] "a small wooden side table"
    [ACTION] move_forward

Parsing is total: every input either parses or raises exactly one named
error. There is no lenient recovery; both sides of this protocol are
generated in-process, so any drift must surface as a hard failure.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

from .memory import (SCENE_END, SCENE_START, EpisodicMemory, ObjectEntry,
                     discretize_position, serialize)
from .world import ACTIONS, Observation


class ProtocolError(ValueError):
    """Base class for all prompt/output grammar errors."""


class MissingActionError(ProtocolError):
    pass


class UnknownActionError(ProtocolError):
    pass


class InvalidIdError(ProtocolError):
    pass


class DuplicateMatchError(ProtocolError):
    pass


class CaptionCountMismatchError(ProtocolError):
    pass


class MalformedLineError(ProtocolError):
    pass


class MemoryBlockError(ProtocolError):
    """Malformed serialized-memory block."""


class DuplicateObjectIdError(MemoryBlockError):
    pass


class InvalidCaptionCountError(MemoryBlockError):
    pass


@dataclass(frozen=True)
class MatchDecision:
    transient_id: int
    target: int | None  # None means NEW_ID

    @property
    def is_new(self) -> bool:
        return self.target is None


@dataclass(frozen=True)
class StructuredOutput:
    matches: tuple[MatchDecision, ...]
    captions: tuple[str, ...]
    action: str

    def validate(self) -> None:
        if len(self.captions) != len(self.matches):
            raise CaptionCountMismatchError(
                f"{len(self.captions)} captions for {len(self.matches)} matches")
        if self.action not in ACTIONS:
            raise UnknownActionError(self.action)
        seen = set()
        for m in self.matches:
            if m.transient_id in seen:
                raise DuplicateMatchError(f"transient id {m.transient_id} repeated")
            seen.add(m.transient_id)


@dataclass(frozen=True)
class PromptDocument:
    header: str
    frame_ids: tuple[int, ...]
    memory_block: str

    def text(self) -> str:
        ids_line = ("  " + ", ".join(str(i) for i in self.frame_ids)).rstrip()
        return (f"{self.header}\n\n"
                "Below are the FRAME objects and their random IDs:\n"
                f"{ids_line}\n\n"
                f"{self.memory_block}")


DEFAULT_INSTRUCTIONS = """\
[TASK-START]
Your task is object linking and action prediction.

You are given:
 - A MEMORY of previously seen objects, each with a fixed OBJ-ID.
 - A FRAME with current objects, each having a temporary OBJ-ID
   (a random ID drawn over the image).

For each object in the FRAME, decide whether it corresponds
to one MEMORY object.
If it matches, output:
  [MATCH] <frame_random_id> : <memory_obj_id>
If it is a new object, output:
  [MATCH] <frame_random_id> : NEW_ID

After matching all objects, predict the action to take:
  [ACTION] [ACTION]
Available actions are:
  move_forward, stop, turn_left, turn_right"""


def format_prompt(memory: EpisodicMemory, observation: Observation,
                  instructions: str = DEFAULT_INSTRUCTIONS) -> str:
    """Assemble the per-step model prompt: header, frame IDs, memory block."""
    doc = PromptDocument(
        header=instructions,
        frame_ids=tuple(d.transient_id for d in observation.detections),
        memory_block=serialize(memory),
    )
    return doc.text()


_MATCH_RE = re.compile(r"\[MATCH\] (\S+) : (\S+)$")
_CAPTION_RE = re.compile(r'\[CAPTION\] "(.*)"$')
_ACTION_RE = re.compile(r"\[ACTION\] (\S+)$")


def parse_output(text: str) -> StructuredOutput:
    """Parse a model turn; rejects anything outside the three-line-kind grammar."""
    lines = [ln.rstrip() for ln in text.split("\n")]
    while lines and not lines[-1]:
        lines.pop()
    matches: list[MatchDecision] = []
    captions: list[str] = []
    action: str | None = None
    seen_ids: set[int] = set()
    stage = "matches"
    for line in lines:
        if action is not None:
            raise MalformedLineError(f"content after [ACTION] line: {line!r}")
        m = _MATCH_RE.match(line)
        if m:
            if stage != "matches":
                raise MalformedLineError(f"[MATCH] after captions: {line!r}")
            tid_text, target_text = m.groups()
            try:
                tid = int(tid_text)
            except ValueError:
                raise InvalidIdError(f"non-integer transient id {tid_text!r}") from None
            if target_text == "NEW_ID":
                target = None
            else:
                try:
                    target = int(target_text)
                except ValueError:
                    raise InvalidIdError(
                        f"non-integer persistent id {target_text!r}") from None
            if tid in seen_ids:
                raise DuplicateMatchError(f"transient id {tid} repeated")
            seen_ids.add(tid)
            matches.append(MatchDecision(tid, target))
            continue
        c = _CAPTION_RE.match(line)
        if c:
            stage = "captions"
            captions.append(c.group(1))
            continue
        a = _ACTION_RE.match(line)
        if a:
            name = a.group(1)
            if name not in ACTIONS:
                raise UnknownActionError(f"unknown action {name!r}")
            action = name
            continue
        raise MalformedLineError(f"unrecognized line: {line!r}")
    if action is None:
        raise MissingActionError("no [ACTION] line")
    if len(captions) != len(matches):
        raise CaptionCountMismatchError(
            f"{len(captions)} captions for {len(matches)} matches")
    return StructuredOutput(tuple(matches), tuple(captions), action)


def render_output(out: StructuredOutput) -> str:
    """Canonical rendering; refuses outputs that violate the invariants."""
    out.validate()
    lines = []
    for m in out.matches:
        target = "NEW_ID" if m.target is None else str(m.target)
        lines.append(f"[MATCH] {m.transient_id} : {target}")
    for caption in out.captions:
        lines.append(f'[CAPTION] "{caption}"')
    lines.append(f"[ACTION] {out.action}")
    return "\n".join(lines)


_OBJ_ID_RE = re.compile(r"\[OBJ-ID\] (\S+)$")
_HISTORY_LINE_RE = re.compile(r'  (\d+): "(.*)"$')
_POSITION_RE = re.compile(r"\[POSITION\] \[(-?[\d.]+), (-?[\d.]+), (-?[\d.]+)\]$")


def parse_memory(text: str) -> EpisodicMemory:
    """Reconstruct a memory from its serialized scene block."""
    lines = [ln.rstrip() for ln in text.strip().split("\n")]
    if not lines or lines[0] != SCENE_START:
        raise MemoryBlockError(f"expected {SCENE_START} first")
    if lines[-1] != SCENE_END:
        raise MemoryBlockError(f"expected {SCENE_END} last")
    memory = EpisodicMemory()
    body = lines[1:-1]
    i = 0
    while i < len(body):
        if not body[i]:
            i += 1
            continue
        m = _OBJ_ID_RE.match(body[i])
        if not m:
            raise MemoryBlockError(f"expected [OBJ-ID], got {body[i]!r}")
        try:
            pid = int(m.group(1))
        except ValueError:
            raise InvalidIdError(f"non-integer object id {m.group(1)!r}") from None
        if pid in memory:
            raise DuplicateObjectIdError(f"object id {pid} repeated")
        i += 1
        if i >= len(body) or body[i] != "[CAPTION-HISTORY]":
            raise MemoryBlockError("expected [CAPTION-HISTORY]")
        i += 1
        captions: dict[str, int] = {}
        while i < len(body):
            h = _HISTORY_LINE_RE.match(body[i])
            if not h:
                break
            count = int(h.group(1))
            if count < 1:
                raise InvalidCaptionCountError(f"caption count {count} < 1")
            caption = h.group(2)
            if caption in captions:
                raise MemoryBlockError(f"caption repeated in one entry: {caption!r}")
            captions[caption] = count
            i += 1
        if not captions:
            raise MemoryBlockError(f"entry {pid} has no caption history")
        p = _POSITION_RE.match(body[i]) if i < len(body) else None
        if not p:
            raise MemoryBlockError("expected [POSITION] line")
        position = discretize_position(
            (float(p.group(1)), float(p.group(2)), float(p.group(3))))
        i += 1
        memory._entries[pid] = ObjectEntry(
            persistent_id=pid, position=position, captions=captions,
            observation_count=sum(captions.values()))
        memory.next_id = max(memory.next_id, pid + 1)
    return memory
