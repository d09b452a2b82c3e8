"""Seeded synthetic 2D-grid environment.

Static occupancy grid with objects on free cells, a discrete-heading agent,
cone-of-view visibility with exact grid line-of-sight, BFS path planning,
and explored-map bookkeeping. The world is immutable after construction;
per-episode state (pose, explored map) lives outside it.

Conventions: cells are (col, row) tuples; the world position of a cell
center is ((col + 0.5) * cell_size, (row + 0.5) * cell_size). Headings are
0..3 = +x, +y, -x, -y with turn_left increasing the index.
"""
from __future__ import annotations

import math
import random
from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np

from .vocabulary import DEFAULT_VOCABULARY, AttributeSet, Vocabulary

Cell = tuple[int, int]

ACTIONS = ("move_forward", "stop", "turn_left", "turn_right")

HEADING_VECTORS = ((1, 0), (0, 1), (-1, 0), (0, -1))
HEADING_DEGREES = (0.0, 90.0, 180.0, 270.0)

_ANGLE_EPS = 1e-9


class GenerationError(RuntimeError):
    """World generation could not satisfy the spec within bounded retries."""


@dataclass(frozen=True)
class WorldObject:
    true_id: int
    center: tuple[float, float, float]
    footprint_radius: float
    attributes: AttributeSet


@dataclass(frozen=True)
class AgentPose:
    position: tuple[float, float]
    heading: int

    @property
    def heading_degrees(self) -> float:
        return HEADING_DEGREES[self.heading]


@dataclass(frozen=True)
class Detection:
    """One per-frame observation of an object.

    ``true_id_hidden`` is ground truth reserved for the captioning oracle and
    for evaluation; exploration/association policy code must never read it.
    """

    transient_id: int
    world_position: tuple[float, float, float]
    footprint: tuple[Cell, ...]
    true_id_hidden: int


@dataclass(frozen=True)
class Observation:
    step: int
    detections: tuple[Detection, ...]
    agent_pose: AgentPose


@dataclass(frozen=True)
class SensorConfig:
    fov_degrees: float = 90.0
    max_range_cells: float = 8.0
    transient_id_range: tuple[int, int] = (0, 99)
    position_noise_radius: float = 0.0  # meters, uniform disc


@dataclass(eq=False)
class GridWorld:
    width: int
    height: int
    cell_size: float
    occupancy: np.ndarray  # bool (height, width), True = obstacle
    objects: list[WorldObject]
    rng_seed: int
    agent_start: Cell
    object_height: float = 0.5
    vocabulary: Vocabulary = field(default_factory=lambda: DEFAULT_VOCABULARY)

    def __post_init__(self):
        occ = np.asarray(self.occupancy, dtype=bool)
        if occ.shape != (self.height, self.width):
            raise ValueError("occupancy shape must be (height, width)")
        occ.setflags(write=False)  # static scene: grid frozen after construction
        self.occupancy = occ
        if not self.is_free(self.agent_start):
            raise ValueError("agent start must be a free cell")
        seen_ids = set()
        for obj in self.objects:
            if obj.true_id in seen_ids:
                raise ValueError(f"duplicate object id {obj.true_id}")
            seen_ids.add(obj.true_id)
            if not self.is_free(self.cell_of(obj.center[:2])):
                raise ValueError(f"object {obj.true_id} center not on a free cell")

    def in_bounds(self, cell: Cell) -> bool:
        c, r = cell
        return 0 <= c < self.width and 0 <= r < self.height

    def is_free(self, cell: Cell) -> bool:
        return self.in_bounds(cell) and not self.occupancy[cell[1], cell[0]]

    def cell_center(self, cell: Cell) -> tuple[float, float]:
        return ((cell[0] + 0.5) * self.cell_size, (cell[1] + 0.5) * self.cell_size)

    def cell_of(self, position: tuple[float, float]) -> Cell:
        return (int(math.floor(position[0] / self.cell_size)),
                int(math.floor(position[1] / self.cell_size)))

    def free_cells(self) -> list[Cell]:
        rows, cols = np.nonzero(~self.occupancy)
        return [(int(c), int(r)) for r, c in zip(rows, cols)]

    def start_pose(self, heading: int = 0) -> AgentPose:
        return AgentPose(self.cell_center(self.agent_start), heading)

    def object_by_id(self, true_id: int) -> WorldObject:
        for obj in self.objects:
            if obj.true_id == true_id:
                return obj
        raise KeyError(true_id)


@dataclass(eq=False)
class ExploredMap:
    explored: np.ndarray  # bool (height, width)
    agent_cell: Cell
    fov_cells: frozenset[Cell] = frozenset()

    @classmethod
    def blank(cls, world: GridWorld) -> "ExploredMap":
        return cls(np.zeros((world.height, world.width), dtype=bool),
                   world.agent_start)

    def explored_cells(self) -> set[Cell]:
        rows, cols = np.nonzero(self.explored)
        return {(int(c), int(r)) for r, c in zip(rows, cols)}

    def explored_count(self) -> int:
        return int(self.explored.sum())


def traversed_cells(a: Cell, b: Cell) -> list[Cell]:
    """Cells strictly between the centers of a and b, in traversal order.

    Exact integer supercover on the half-unit lattice. When the segment
    passes exactly through a lattice corner the walk steps diagonally, so
    the two cells touching only that corner are not traversed.
    """
    (ca, ra), (cb, rb) = a, b
    dx, dy = 2 * (cb - ca), 2 * (rb - ra)
    sx = 1 if dx > 0 else -1
    sy = 1 if dy > 0 else -1
    denx, deny = abs(dx), abs(dy)
    # distance from center to the next crossed gridline, in half-units
    ax, ay = 1, 1
    c, r = ca, ra
    cells: list[Cell] = []
    while (c, r) != (cb, rb):
        if denx == 0:
            r += sy
        elif deny == 0:
            c += sx
        else:
            cmp = ax * deny - ay * denx
            if cmp < 0:
                c += sx
                ax += 2
            elif cmp > 0:
                r += sy
                ay += 2
            else:
                c += sx
                r += sy
                ax += 2
                ay += 2
        if (c, r) != (cb, rb):
            cells.append((c, r))
    return cells


def line_of_sight(world: GridWorld, a: Cell, b: Cell) -> bool:
    """True when no obstacle cell lies strictly between the two cell centers."""
    occ = world.occupancy
    return all(not occ[r, c] for c, r in traversed_cells(a, b))


def _angle_offset(pose: AgentPose, target_xy: tuple[float, float]) -> float:
    """Absolute angular offset in degrees between heading and target bearing."""
    dx = target_xy[0] - pose.position[0]
    dy = target_xy[1] - pose.position[1]
    if dx == 0 and dy == 0:
        return 0.0
    bearing = math.degrees(math.atan2(dy, dx))
    return abs((bearing - pose.heading_degrees + 180.0) % 360.0 - 180.0)


def _in_fov(world: GridWorld, pose: AgentPose, target_xy: tuple[float, float],
            sensor: SensorConfig) -> bool:
    dist = math.hypot(target_xy[0] - pose.position[0],
                      target_xy[1] - pose.position[1])
    if dist > sensor.max_range_cells * world.cell_size + _ANGLE_EPS:
        return False
    return _angle_offset(pose, target_xy) <= sensor.fov_degrees / 2.0 + _ANGLE_EPS


def object_visible(world: GridWorld, pose: AgentPose, obj: WorldObject,
                   sensor: SensorConfig) -> bool:
    if not _in_fov(world, pose, obj.center[:2], sensor):
        return False
    return line_of_sight(world, world.cell_of(pose.position),
                         world.cell_of(obj.center[:2]))


def _footprint_cells(world: GridWorld, obj: WorldObject, agent_cell: Cell) -> tuple[Cell, ...]:
    """Visible portion of the object's footprint disc (free cells with clear LOS)."""
    ox, oy = obj.center[:2]
    radius = obj.footprint_radius
    span = int(math.ceil(radius / world.cell_size)) + 1
    center_cell = world.cell_of((ox, oy))
    out = []
    for dc in range(-span, span + 1):
        for dr in range(-span, span + 1):
            cell = (center_cell[0] + dc, center_cell[1] + dr)
            if not world.is_free(cell):
                continue
            cx, cy = world.cell_center(cell)
            if math.hypot(cx - ox, cy - oy) > radius + _ANGLE_EPS:
                continue
            if line_of_sight(world, agent_cell, cell):
                out.append(cell)
    return tuple(sorted(out))


def observe(world: GridWorld, pose: AgentPose, sensor: SensorConfig,
            rng: random.Random, step: int = 0) -> Observation:
    """Detect every object inside the view cone with unobstructed line of sight.

    Transient IDs are drawn without replacement from the configured range,
    fresh every frame; collisions across frames are allowed.
    """
    agent_cell = world.cell_of(pose.position)
    visible = [obj for obj in world.objects
               if object_visible(world, pose, obj, sensor)]
    lo, hi = sensor.transient_id_range
    if len(visible) > hi - lo + 1:
        raise ValueError("transient id range too small for frame")
    ids = rng.sample(range(lo, hi + 1), len(visible))
    detections = []
    for obj, tid in zip(visible, ids):
        x, y, z = obj.center
        if sensor.position_noise_radius > 0:
            r = sensor.position_noise_radius * math.sqrt(rng.random())
            theta = 2.0 * math.pi * rng.random()
            x, y = x + r * math.cos(theta), y + r * math.sin(theta)
        detections.append(Detection(
            transient_id=tid,
            world_position=(x, y, z),
            footprint=_footprint_cells(world, obj, agent_cell),
            true_id_hidden=obj.true_id,
        ))
    return Observation(step=step, detections=tuple(detections), agent_pose=pose)


def step_agent(world: GridWorld, pose: AgentPose, action: str) -> tuple[AgentPose, bool]:
    """Apply one discrete action; forward motion into an obstacle is a collision."""
    if action not in ACTIONS:
        raise ValueError(f"unknown action {action!r}")
    if action == "stop":
        return pose, False
    if action == "turn_left":
        return replace(pose, heading=(pose.heading + 1) % 4), False
    if action == "turn_right":
        return replace(pose, heading=(pose.heading - 1) % 4), False
    cell = world.cell_of(pose.position)
    dc, dr = HEADING_VECTORS[pose.heading]
    target = (cell[0] + dc, cell[1] + dr)
    if not world.is_free(target):
        return pose, True
    return replace(pose, position=world.cell_center(target)), False


def shortest_path(world: GridWorld, start: Cell, goal: Cell) -> list[Cell] | None:
    """Minimal 4-connected free-cell path including both endpoints, or None."""
    if not world.is_free(start):
        raise ValueError("path start must be a free cell")
    if not world.is_free(goal):
        return None
    if start == goal:
        return [start]
    parent: dict[Cell, Cell] = {start: start}
    queue = deque([start])
    while queue:
        cur = queue.popleft()
        for dc, dr in HEADING_VECTORS:
            nxt = (cur[0] + dc, cur[1] + dr)
            if nxt in parent or not world.is_free(nxt):
                continue
            parent[nxt] = cur
            if nxt == goal:
                path = [nxt]
                while path[-1] != start:
                    path.append(parent[path[-1]])
                path.reverse()
                return path
            queue.append(nxt)
    return None


def distance_field(world: GridWorld, start: Cell) -> np.ndarray:
    """BFS cell distances from start over free cells; -1 where unreachable."""
    field_ = np.full((world.height, world.width), -1, dtype=np.int32)
    if not world.is_free(start):
        return field_
    field_[start[1], start[0]] = 0
    queue = deque([start])
    while queue:
        c, r = queue.popleft()
        d = field_[r, c] + 1
        for dc, dr in HEADING_VECTORS:
            nc, nr = c + dc, r + dr
            if world.is_free((nc, nr)) and field_[nr, nc] < 0:
                field_[nr, nc] = d
                queue.append((nc, nr))
    return field_


def is_navigable(world: GridWorld, cell: Cell, safety_margin: float = 0.0) -> bool:
    """Free cell with no obstacle cell center within safety_margin meters."""
    if not world.is_free(cell):
        return False
    if safety_margin <= 0:
        return True
    span = int(math.ceil(safety_margin / world.cell_size))
    cx, cy = world.cell_center(cell)
    for dc in range(-span, span + 1):
        for dr in range(-span, span + 1):
            other = (cell[0] + dc, cell[1] + dr)
            if not world.in_bounds(other) or world.is_free(other):
                continue
            ox, oy = world.cell_center(other)
            if math.hypot(ox - cx, oy - cy) <= safety_margin:
                return False
    return True


def visible_cells(world: GridWorld, pose: AgentPose, sensor: SensorConfig) -> set[Cell]:
    """Cells whose center is inside the view cone with clear line of sight.

    Obstacle cells themselves are visible (you can see a wall); only cells
    strictly between agent and target block.
    """
    agent_cell = world.cell_of(pose.position)
    span = int(math.ceil(sensor.max_range_cells)) + 1
    out = set()
    for dc in range(-span, span + 1):
        for dr in range(-span, span + 1):
            cell = (agent_cell[0] + dc, agent_cell[1] + dr)
            if not world.in_bounds(cell):
                continue
            if not _in_fov(world, pose, world.cell_center(cell), sensor):
                continue
            if line_of_sight(world, agent_cell, cell):
                out.add(cell)
    out.add(agent_cell)
    return out


def update_explored(explored_map: ExploredMap, world: GridWorld, pose: AgentPose,
                    sensor: SensorConfig) -> ExploredMap:
    """Mark currently visible cells explored; the explored set only grows."""
    cells = visible_cells(world, pose, sensor)
    for c, r in cells:
        explored_map.explored[r, c] = True
    explored_map.agent_cell = world.cell_of(pose.position)
    explored_map.fov_cells = frozenset(cells)
    return explored_map


@dataclass(frozen=True)
class WorldSpec:
    width: int = 30
    height: int = 30
    obstacle_density: float = 0.15
    object_count: int = 12
    seed: int = 0
    cell_size: float = 0.5
    object_height: float = 0.5
    footprint_radius: float = 0.5
    min_object_separation: float = 0.0  # meters between object centers
    unique_attributes: bool = True
    modifiers_per_object: tuple[int, int] = (1, 3)
    context_per_object: tuple[int, int] = (0, 2)
    # when set, regenerate until >= 1 object has clear line of sight to the
    # agent start within this many cells (a full turn can always bootstrap)
    ensure_visible_object: float | None = None
    vocabulary: Vocabulary = field(default_factory=lambda: DEFAULT_VOCABULARY)


def _reachable_from(world_free: np.ndarray, start: Cell) -> set[Cell]:
    height, width = world_free.shape
    seen = {start}
    queue = deque([start])
    while queue:
        c, r = queue.popleft()
        for dc, dr in HEADING_VECTORS:
            nc, nr = c + dc, r + dr
            if 0 <= nc < width and 0 <= nr < height and world_free[nr, nc] \
                    and (nc, nr) not in seen:
                seen.add((nc, nr))
                queue.append((nc, nr))
    return seen


def _sample_attributes(spec: WorldSpec, rng: random.Random,
                       used: set[tuple]) -> AttributeSet:
    vocab = spec.vocabulary
    lo_m, hi_m = spec.modifiers_per_object
    lo_c, hi_c = spec.context_per_object
    for _ in range(200):
        category = rng.choice(vocab.categories)
        k = rng.randint(lo_m, min(hi_m, len(vocab.modifiers)))
        modifiers = tuple(rng.sample(vocab.modifiers, k))
        key = (category, frozenset(modifiers))
        if spec.unique_attributes and key in used:
            continue
        used.add(key)
        n_ctx = rng.randint(lo_c, min(hi_c, len(vocab.context_tokens)))
        context = tuple(rng.sample(vocab.context_tokens, n_ctx)) if n_ctx else ()
        return AttributeSet(category, modifiers, context)
    raise GenerationError("could not sample distinct attribute sets")


def generate_world(spec: WorldSpec) -> GridWorld:
    """Reproducibly generate a world: obstacles, agent start, reachable objects.

    All objects are placed on free cells reachable from the agent start;
    placement that cannot be satisfied raises GenerationError.
    """
    if spec.object_count < 0:
        raise ValueError("object_count must be >= 0")
    if not 0 <= spec.obstacle_density < 1:
        raise ValueError("obstacle_density must be in [0, 1)")
    if not spec.vocabulary.categories:
        raise ValueError("vocabulary must be non-empty")
    rng = random.Random(spec.seed)
    min_sep = spec.min_object_separation
    for _ in range(50):
        occ = np.zeros((spec.height, spec.width), dtype=bool)
        for r in range(spec.height):
            for c in range(spec.width):
                occ[r, c] = rng.random() < spec.obstacle_density
        free = ~occ
        free_list = [(c, r) for r in range(spec.height) for c in range(spec.width)
                     if free[r, c]]
        if not free_list:
            continue
        start = rng.choice(free_list)
        reachable = sorted(_reachable_from(free, start))
        if len(reachable) < spec.object_count + 1:
            continue
        candidates = [cell for cell in reachable if cell != start]
        order = rng.sample(candidates, len(candidates))
        placed: list[Cell] = []
        for cell in order:
            if len(placed) == spec.object_count:
                break
            if min_sep > 0:
                x, y = ((cell[0] + 0.5) * spec.cell_size,
                        (cell[1] + 0.5) * spec.cell_size)
                if any(math.hypot(x - (p[0] + 0.5) * spec.cell_size,
                                  y - (p[1] + 0.5) * spec.cell_size) < min_sep
                       for p in placed):
                    continue
            placed.append(cell)
        if len(placed) < spec.object_count:
            continue
        used_attrs: set[tuple] = set()
        objects = []
        for idx, cell in enumerate(placed, start=1):
            x = (cell[0] + 0.5) * spec.cell_size
            y = (cell[1] + 0.5) * spec.cell_size
            objects.append(WorldObject(
                true_id=idx,
                center=(x, y, spec.object_height),
                footprint_radius=spec.footprint_radius,
                attributes=_sample_attributes(spec, rng, used_attrs),
            ))
        world = GridWorld(
            width=spec.width, height=spec.height, cell_size=spec.cell_size,
            occupancy=occ, objects=objects, rng_seed=spec.seed,
            agent_start=start, object_height=spec.object_height,
            vocabulary=spec.vocabulary,
        )
        if spec.ensure_visible_object is not None and spec.object_count > 0:
            reach = spec.ensure_visible_object * spec.cell_size
            sx, sy = world.cell_center(start)
            if not any(
                math.hypot(o.center[0] - sx, o.center[1] - sy) <= reach
                and line_of_sight(world, start, world.cell_of(o.center[:2]))
                for o in objects
            ):
                continue
        return world
    raise GenerationError(
        f"no placement for {spec.object_count} objects after bounded retries")
