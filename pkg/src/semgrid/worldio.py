"""Versioned text format for worlds.

One grid row per line ('.' free, '#' obstacle), followed by the agent
start, the vocabulary (including the confusable-category table), and the
object table. The format round-trips exactly: load(save(w)) == w.
"""
from __future__ import annotations

import hashlib
from pathlib import Path

import numpy as np

from .vocabulary import AttributeSet, Vocabulary
from .world import GridWorld, WorldObject

FORMAT_TAG = "semgrid-world v1"


class WorldFormatError(ValueError):
    """Malformed world file."""


def world_to_text(world: GridWorld) -> str:
    lines = [FORMAT_TAG]
    lines.append(f"width {world.width}")
    lines.append(f"height {world.height}")
    lines.append(f"cell_size {world.cell_size!r}")
    lines.append(f"seed {world.rng_seed}")
    lines.append(f"object_height {world.object_height!r}")
    lines.append("[grid]")
    for r in range(world.height):
        lines.append("".join("#" if world.occupancy[r, c] else "."
                             for c in range(world.width)))
    lines.append("[agent]")
    lines.append(f"{world.agent_start[0]} {world.agent_start[1]}")
    vocab = world.vocabulary
    lines.append("[vocabulary]")
    lines.append("categories " + ",".join(vocab.categories))
    lines.append("modifiers " + ",".join(vocab.modifiers))
    lines.append("context " + ",".join(vocab.context_tokens))
    for cat in vocab.categories:
        others = vocab.confusables_for(cat)
        if others:
            lines.append(f"confusable {cat} " + ",".join(others))
    lines.append("[objects]")
    for obj in world.objects:
        x, y, z = obj.center
        attr = obj.attributes
        parts = [str(obj.true_id), repr(x), repr(y), repr(z),
                 repr(obj.footprint_radius), attr.category,
                 ",".join(attr.modifiers) or "-",
                 ",".join(attr.context) or "-"]
        lines.append(" ".join(parts))
    return "\n".join(lines) + "\n"


def world_from_text(text: str) -> GridWorld:
    lines = text.splitlines()
    if not lines or lines[0] != FORMAT_TAG:
        raise WorldFormatError(f"missing format tag {FORMAT_TAG!r}")
    header: dict[str, str] = {}
    i = 1
    while i < len(lines) and not lines[i].startswith("["):
        key, _, value = lines[i].partition(" ")
        header[key] = value
        i += 1
    try:
        width = int(header["width"])
        height = int(header["height"])
        cell_size = float(header["cell_size"])
        seed = int(header["seed"])
        object_height = float(header["object_height"])
    except (KeyError, ValueError) as exc:
        raise WorldFormatError(f"bad header: {exc}") from exc

    if i >= len(lines) or lines[i] != "[grid]":
        raise WorldFormatError("expected [grid] section")
    i += 1
    occ = np.zeros((height, width), dtype=bool)
    for r in range(height):
        row = lines[i + r]
        if len(row) != width or set(row) - {".", "#"}:
            raise WorldFormatError(f"bad grid row {r}")
        occ[r] = [ch == "#" for ch in row]
    i += height

    if lines[i] != "[agent]":
        raise WorldFormatError("expected [agent] section")
    ac, ar = lines[i + 1].split()
    agent_start = (int(ac), int(ar))
    i += 2

    if lines[i] != "[vocabulary]":
        raise WorldFormatError("expected [vocabulary] section")
    i += 1
    categories = modifiers = context = ()
    confusable: dict[str, tuple[str, ...]] = {}
    while i < len(lines) and not lines[i].startswith("["):
        key, _, value = lines[i].partition(" ")
        toks = tuple(t for t in value.split(",") if t)
        if key == "categories":
            categories = toks
        elif key == "modifiers":
            modifiers = toks
        elif key == "context":
            context = toks
        elif key == "confusable":
            cat, _, rest = value.partition(" ")
            confusable[cat] = tuple(t for t in rest.split(",") if t)
        else:
            raise WorldFormatError(f"unknown vocabulary line {key!r}")
        i += 1
    vocabulary = Vocabulary(categories, modifiers, context, confusable)

    if i >= len(lines) or lines[i] != "[objects]":
        raise WorldFormatError("expected [objects] section")
    i += 1
    objects = []
    while i < len(lines) and lines[i].strip():
        parts = lines[i].split(" ")
        if len(parts) != 8:
            raise WorldFormatError(f"bad object line: {lines[i]!r}")
        tid, x, y, z, radius, category, mods, ctx = parts
        objects.append(WorldObject(
            true_id=int(tid),
            center=(float(x), float(y), float(z)),
            footprint_radius=float(radius),
            attributes=AttributeSet(
                category,
                tuple(m for m in mods.split(",") if m and m != "-"),
                tuple(c for c in ctx.split(",") if c and c != "-"),
            ),
        ))
        i += 1
    return GridWorld(width=width, height=height, cell_size=cell_size,
                     occupancy=occ, objects=objects, rng_seed=seed,
                     agent_start=agent_start, object_height=object_height,
                     vocabulary=vocabulary)


def save_world(world: GridWorld, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(world_to_text(world))
    return path


def load_world(path: str | Path) -> GridWorld:
    return world_from_text(Path(path).read_text())


def world_hash(world: GridWorld) -> str:
    return hashlib.sha256(world_to_text(world).encode()).hexdigest()
