"""Disagreement-driven exploration plus frontier and random-goal baselines.

Pipeline per planning round: project per-object disagreement onto the grid,
normalize and threshold the map, cluster it into connected target regions,
then process targets in descending disagreement order. For each target,
candidate viewpoints are sampled on rings around the centroid, filtered by
a navigability margin, subsampled, and ranked by

    score = alpha * disagreement - (1 - alpha) * normalized_travel_cost.

The agent walks ranked viewpoints one by one; arriving aligned at a
viewpoint guarantees exactly one on-goal observation before moving on.
A sliding-window displacement monitor detects stuck navigation and triggers
bounded random recovery; when recovery fails the current target is dropped.

Policies are per-episode state machines advanced one action per call. They
see world geometry, the explored map, their own pose, and the episodic
memory; they never see detections or any transient-to-true identity data.
"""
from __future__ import annotations

import math
import random
from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import ndimage

from .memory import EpisodicMemory, ObjectEntry
from .metrics import pairwise_mean_similarity
from .oracle import Embedder
from .world import (Cell, ExploredMap, GridWorld, AgentPose, HEADING_VECTORS,
                    distance_field, is_navigable, shortest_path)


@dataclass(frozen=True)
class ExplorationConfig:
    alpha: float = 0.7                      # disagreement vs travel-cost weight
    area_min_cells: int = 3                 # A_min, desk-scaled from 100 px
    radii_m: tuple[float, ...] = (0.5, 1.0, 2.0)
    candidates_per_radius: int = 30         # N_r
    viewpoints_min: int = 5                 # N_min
    viewpoints_max: int = 20                # N_max
    stuck_window: int = 5                   # tau_s, steps
    displacement_eps: float = 0.15          # eps_p, meters
    recovery_attempts: int = 5              # N_rec
    disagreement_threshold: float = 0.5     # on the max-normalized map
    safety_margin_m: float = 0.5
    disagreement_radius_m: float = 0.5      # footprint written around each entry
    recovery_radius_cells: float = 2.0
    accumulate: str = "max"                 # "max" | "sum" overlap rule
    # in-place turns before the first planning round; two full rotations give
    # every direction two looks, so caption disagreement can bootstrap
    initial_scan_steps: int = 8

    def __post_init__(self):
        if not 0 <= self.alpha <= 1:
            raise ValueError("alpha must be in [0, 1]")
        if self.viewpoints_min > self.viewpoints_max:
            raise ValueError("viewpoints_min must be <= viewpoints_max")
        if min(self.candidates_per_radius, self.viewpoints_min,
               self.stuck_window, self.recovery_attempts) <= 0:
            raise ValueError("counts must be positive")
        if self.accumulate not in ("max", "sum"):
            raise ValueError("accumulate must be 'max' or 'sum'")


@dataclass(eq=False)
class DisagreementMap:
    scores: np.ndarray  # float (height, width), >= 0, obstacles carry none
    cell_size: float
    skipped_entries: int = 0

    def normalized(self) -> np.ndarray:
        peak = self.scores.max()
        return self.scores / peak if peak > 0 else np.zeros_like(self.scores)


@dataclass(frozen=True)
class TargetRegion:
    cells: frozenset[Cell]
    centroid: tuple[float, float]  # cell coordinates (col, row)
    mean_disagreement: float       # on the normalized map
    area: int


@dataclass(frozen=True)
class Viewpoint:
    position: tuple[float, float]
    heading: int                   # toward the target centroid
    radius_ring: float
    angular_index: int
    target_disagreement: float
    score: float = 0.0


def object_disagreement(entry: ObjectEntry, embedder: Embedder) -> float:
    """Mean pairwise embedding distance over the caption multiset (0 for singletons)."""
    return 1.0 - pairwise_mean_similarity(entry.caption_list(), embedder)


def build_disagreement_map(memory: EpisodicMemory, world: GridWorld,
                           embedder: Embedder,
                           cfg: ExplorationConfig) -> DisagreementMap:
    """Project each entry's disagreement onto free cells around its position."""
    scores = np.zeros((world.height, world.width))
    skipped = 0
    span = int(math.ceil(cfg.disagreement_radius_m / world.cell_size)) + 1
    for entry in memory:
        x, y = entry.position[:2]
        center = world.cell_of((x, y))
        if not world.in_bounds(center):
            skipped += 1
            continue
        value = object_disagreement(entry, embedder)
        if value == 0:
            continue
        for dc in range(-span, span + 1):
            for dr in range(-span, span + 1):
                cell = (center[0] + dc, center[1] + dr)
                if not world.is_free(cell):
                    continue
                cx, cy = world.cell_center(cell)
                if math.hypot(cx - x, cy - y) > cfg.disagreement_radius_m + 1e-9:
                    continue
                if cfg.accumulate == "sum":
                    scores[cell[1], cell[0]] += value
                else:
                    scores[cell[1], cell[0]] = max(scores[cell[1], cell[0]], value)
    return DisagreementMap(scores, world.cell_size, skipped)


def extract_targets(dmap: DisagreementMap, cfg: ExplorationConfig) -> list[TargetRegion]:
    """Threshold the normalized map, cluster, drop small regions, sort by mean."""
    norm = dmap.normalized()
    mask = norm >= cfg.disagreement_threshold
    if cfg.disagreement_threshold <= 0:
        mask &= norm > 0
    if not mask.any():
        return []
    labels, n_labels = ndimage.label(mask)  # default structure is 4-connected
    regions = []
    for lab in range(1, n_labels + 1):
        rows, cols = np.nonzero(labels == lab)
        if len(rows) < cfg.area_min_cells:
            continue
        cells = frozenset((int(c), int(r)) for r, c in zip(rows, cols))
        regions.append(TargetRegion(
            cells=cells,
            centroid=(float(cols.mean()), float(rows.mean())),
            mean_disagreement=float(norm[rows, cols].mean()),
            area=len(rows),
        ))
    regions.sort(key=lambda t: -t.mean_disagreement)
    return regions


def _heading_toward(from_xy: tuple[float, float], to_xy: tuple[float, float]) -> int:
    bearing = math.degrees(math.atan2(to_xy[1] - from_xy[1], to_xy[0] - from_xy[0]))
    return int(round(bearing / 90.0)) % 4


def candidate_viewpoints(world: GridWorld, target: TargetRegion,
                         cfg: ExplorationConfig,
                         rng: random.Random) -> tuple[list[Viewpoint], bool]:
    """Ring-sampled, navigability-filtered viewpoint candidates around a target.

    Returns (viewpoints, degraded): fewer than viewpoints_min survivors are
    returned as-is with the degraded flag set; otherwise a uniform random
    count between viewpoints_min and viewpoints_max is sampled from them.
    """
    cx = (target.centroid[0] + 0.5) * world.cell_size
    cy = (target.centroid[1] + 0.5) * world.cell_size
    survivors: list[Viewpoint] = []
    used_cells: set[Cell] = set()
    for radius in cfg.radii_m:
        for k in range(cfg.candidates_per_radius):
            theta = 2.0 * math.pi * k / cfg.candidates_per_radius
            pos = (cx + radius * math.cos(theta), cy + radius * math.sin(theta))
            cell = world.cell_of(pos)
            if cell in used_cells or not world.in_bounds(cell):
                continue
            if not is_navigable(world, cell, cfg.safety_margin_m):
                continue
            used_cells.add(cell)
            survivors.append(Viewpoint(
                position=pos,
                heading=_heading_toward(pos, (cx, cy)),
                radius_ring=radius,
                angular_index=k,
                target_disagreement=target.mean_disagreement,
            ))
    if len(survivors) < cfg.viewpoints_min:
        return survivors, True
    count = min(rng.randint(cfg.viewpoints_min, cfg.viewpoints_max), len(survivors))
    return rng.sample(survivors, count), False


def rank_viewpoints(viewpoints: list[Viewpoint], agent_pose: AgentPose,
                    cfg: ExplorationConfig, world: GridWorld,
                    dist_field: np.ndarray | None = None) -> list[Viewpoint]:
    """Score and order viewpoints; unreachable ones are dropped.

    Travel cost is the BFS path length, min-max normalized over the batch.
    Ties break on shorter path, then lower angular index. A precomputed
    distance field from the agent cell may be supplied to avoid the BFS.
    """
    if not viewpoints:
        return []
    dist = dist_field if dist_field is not None \
        else distance_field(world, world.cell_of(agent_pose.position))
    costed = []
    for vp in viewpoints:
        c, r = world.cell_of(vp.position)
        d = int(dist[r, c])
        if d >= 0:
            costed.append((vp, d))
    if not costed:
        return []
    costs = [d for _, d in costed]
    lo, hi = min(costs), max(costs)
    span = hi - lo
    scored = []
    for vp, d in costed:
        cost_norm = (d - lo) / span if span > 0 else 0.0
        score = cfg.alpha * vp.target_disagreement - (1.0 - cfg.alpha) * cost_norm
        scored.append((replace(vp, score=score), d))
    scored.sort(key=lambda t: (-t[0].score, t[1], t[0].angular_index))
    return [vp for vp, _ in scored]


def detect_stuck(history: list[tuple[float, float]], cfg: ExplorationConfig) -> bool:
    """True iff displacement from the window-start stayed below eps over tau_s steps."""
    if len(history) < cfg.stuck_window:
        return False
    window = history[-cfg.stuck_window:]
    x0, y0 = window[0]
    max_disp = max(math.hypot(x - x0, y - y0) for x, y in window)
    return max_disp < cfg.displacement_eps


def recover(world: GridWorld, pose: AgentPose, cfg: ExplorationConfig,
            rng: random.Random) -> Cell | None:
    """Draw up to recovery_attempts nearby cells; first free reachable one wins."""
    agent_cell = world.cell_of(pose.position)
    radius = cfg.recovery_radius_cells
    span = int(math.ceil(radius))
    candidates = []
    for dc in range(-span, span + 1):
        for dr in range(-span, span + 1):
            if (dc, dr) == (0, 0) or math.hypot(dc, dr) > radius:
                continue
            cell = (agent_cell[0] + dc, agent_cell[1] + dr)
            if world.in_bounds(cell):
                candidates.append(cell)
    if not candidates:
        return None
    for _ in range(cfg.recovery_attempts):
        cell = rng.choice(candidates)
        if world.is_free(cell) and shortest_path(world, agent_cell, cell) is not None:
            return cell
    return None


@dataclass(frozen=True)
class PolicyState:
    """Per-step snapshot handed to policies.

    Deliberately excludes detections: no policy code path can observe the
    transient-id-to-true-id mapping.
    """
    world: GridWorld
    pose: AgentPose
    memory: EpisodicMemory
    explored: ExploredMap
    step: int


def _turn_or_forward(heading: int, target_heading: int) -> str:
    if heading == target_heading:
        return "move_forward"
    diff = (target_heading - heading) % 4
    return "turn_left" if diff in (1, 2) else "turn_right"


def _bfs_tree(world: GridWorld, start: Cell):
    """One BFS giving distances and packed parent indices for reachable cells."""
    height, width = world.height, world.width
    dist = np.full(height * width, -1, dtype=np.int32)
    parent = np.full(height * width, -1, dtype=np.int32)
    if not world.is_free(start):
        return dist.reshape(height, width), parent
    free = ~world.occupancy.reshape(-1)
    s = start[1] * width + start[0]
    dist[s] = 0
    parent[s] = s
    queue = deque([s])
    while queue:
        cur = queue.popleft()
        d = dist[cur] + 1
        c, r = cur % width, cur // width
        for dc, dr in HEADING_VECTORS:
            nc, nr = c + dc, r + dr
            if 0 <= nc < width and 0 <= nr < height:
                nxt = nr * width + nc
                if free[nxt] and dist[nxt] < 0:
                    dist[nxt] = d
                    parent[nxt] = cur
                    queue.append(nxt)
    return dist.reshape(height, width), parent


def _extract_path(parent: np.ndarray, width: int, start: Cell,
                  goal: Cell) -> list[Cell] | None:
    idx = goal[1] * width + goal[0]
    if parent[idx] < 0:
        return None
    path = [goal]
    s = start[1] * width + start[0]
    while idx != s:
        idx = int(parent[idx])
        path.append((idx % width, idx // width))
    path.reverse()
    return path


class _PathFollower:
    """Emit one turn/forward action per call along a precomputed cell path."""

    def __init__(self, world: GridWorld, path: list[Cell]):
        self.world = world
        self.path = path
        self.idx = 0

    def action(self, pose: AgentPose) -> str | None:
        """Next action, or None once the agent stands on the final cell."""
        cell = self.world.cell_of(pose.position)
        if self.idx + 1 < len(self.path) and self.path[self.idx + 1] == cell:
            self.idx += 1
        if cell != self.path[self.idx]:
            return None  # off path; caller replans
        if self.idx + 1 >= len(self.path):
            return None
        nxt = self.path[self.idx + 1]
        target_heading = HEADING_VECTORS.index(
            (nxt[0] - cell[0], nxt[1] - cell[1]))
        return _turn_or_forward(pose.heading, target_heading)

    def at_goal(self, pose: AgentPose) -> bool:
        return self.world.cell_of(pose.position) == self.path[-1]


class DisagreementPolicy:
    """Replan-when-empty state machine over the disagreement pipeline."""

    def __init__(self, cfg: ExplorationConfig, embedder: Embedder,
                 rng: random.Random):
        self.cfg = cfg
        self.embedder = embedder
        self.rng = rng
        self._scan_left = cfg.initial_scan_steps
        self._round_targets: list[TargetRegion] = []
        self._viewpoints: deque[Viewpoint] = deque()
        self._current_vp: Viewpoint | None = None
        self._follower: _PathFollower | None = None
        self._history: list[tuple[float, float]] = []
        self._recovering = False
        self._legs_this_round = 0
        self._had_round = False
        self._done = False

    def step(self, state: PolicyState) -> str:
        if self._done:
            return "stop"
        if self._scan_left > 0:
            self._scan_left -= 1
            return "turn_left"
        world, pose = state.world, state.pose
        cell = world.cell_of(pose.position)
        for _ in range(64):  # bounded internal transitions
            if self._current_vp is None:
                if not self._start_next_leg(state, cell):
                    self._done = True
                    return "stop"
                continue
            vp_cell = world.cell_of(self._current_vp.position)
            if not self._recovering and cell == vp_cell:
                if pose.heading != self._current_vp.heading:
                    return _turn_or_forward(pose.heading, self._current_vp.heading)
                # aligned arrival: the on-goal observation happened this step
                self._current_vp = None
                continue
            self._history.append(pose.position)
            if detect_stuck(self._history, self.cfg):
                self._history = []
                goal = recover(world, pose, self.cfg, self.rng)
                if goal is None:
                    self._abandon_target()
                    continue
                self._recovering = True
                self._follower = _PathFollower(
                    world, shortest_path(world, cell, goal))
                # fall through to emit the first recovery action
            action = self._follower.action(pose) if self._follower else None
            if action is None:
                if self._recovering:
                    self._recovering = False
                    path = shortest_path(world, cell, vp_cell)
                    if path is None:
                        self._current_vp = None
                        continue
                    self._follower = _PathFollower(world, path)
                    continue
                # off-path or degenerate leg: replan toward the viewpoint
                path = shortest_path(world, cell, vp_cell)
                if path is None or len(path) == 1:
                    self._current_vp = None
                    continue
                self._follower = _PathFollower(world, path)
                continue
            return action
        raise RuntimeError("policy failed to settle on an action")

    def _abandon_target(self) -> None:
        self._viewpoints.clear()
        self._current_vp = None
        self._follower = None
        self._recovering = False

    def _start_next_leg(self, state: PolicyState, cell: Cell) -> bool:
        world = state.world
        dist, parent = _bfs_tree(world, cell)  # shared by ranking and paths
        while True:
            if self._viewpoints:
                vp = self._viewpoints.popleft()
                path = _extract_path(parent, world.width, cell,
                                     world.cell_of(vp.position))
                if path is None:
                    continue
                self._current_vp = vp
                self._follower = _PathFollower(world, path)
                self._history = []
                self._legs_this_round += 1
                return True
            if self._round_targets:
                target = self._round_targets.pop(0)
                vps, _ = candidate_viewpoints(world, target, self.cfg, self.rng)
                self._viewpoints = deque(
                    rank_viewpoints(vps, state.pose, self.cfg, world,
                                    dist_field=dist))
                continue
            # new planning round
            if self._had_round and self._legs_this_round == 0:
                return False  # previous round produced nothing usable
            dmap = build_disagreement_map(state.memory, world, self.embedder, self.cfg)
            targets = extract_targets(dmap, self.cfg)
            if not targets:
                return False
            self._round_targets = targets
            self._had_round = True
            self._legs_this_round = 0


def frontier_cells(world: GridWorld, explored: ExploredMap) -> set[Cell]:
    """Unexplored free cells 4-adjacent to an explored free cell."""
    out = set()
    exp = explored.explored
    for r in range(world.height):
        for c in range(world.width):
            if exp[r, c] or world.occupancy[r, c]:
                continue
            for dc, dr in HEADING_VECTORS:
                nc, nr = c + dc, r + dr
                if world.in_bounds((nc, nr)) and exp[nr, nc] \
                        and not world.occupancy[nr, nc]:
                    out.add((c, r))
                    break
    return out


class FrontierPolicy:
    """Nearest-frontier coverage baseline; stops when no frontier remains."""

    def __init__(self):
        self._follower: _PathFollower | None = None
        self._goal: Cell | None = None
        self._done = False

    def step(self, state: PolicyState) -> str:
        if self._done:
            return "stop"
        world = state.world
        cell = world.cell_of(state.pose.position)
        for _ in range(4):
            goal_gone = (self._goal is None
                         or state.explored.explored[self._goal[1], self._goal[0]]
                         or self._goal == cell)
            if goal_gone:
                if not self._pick_goal(state, cell):
                    self._done = True
                    return "stop"
            action = self._follower.action(state.pose)
            if action is not None:
                return action
            self._goal = None  # arrived or off-path; re-pick
        self._done = True
        return "stop"

    def _pick_goal(self, state: PolicyState, cell: Cell) -> bool:
        world = state.world
        frontier = frontier_cells(world, state.explored)
        if not frontier:
            return False
        dist = distance_field(world, cell)
        best = None
        for c, r in frontier:
            d = int(dist[r, c])
            if d > 0 and (best is None or (d, (c, r)) < best):
                best = (d, (c, r))
        if best is None:
            return False
        self._goal = best[1]
        self._follower = _PathFollower(
            world, shortest_path(world, cell, self._goal))
        return True


class RandomGoalPolicy:
    """Uniform random navigable goals, resampled on arrival; never stops."""

    def __init__(self, rng: random.Random):
        self.rng = rng
        self._follower: _PathFollower | None = None
        self._free: list[Cell] | None = None

    def step(self, state: PolicyState) -> str:
        world = state.world
        cell = world.cell_of(state.pose.position)
        if self._free is None:
            self._free = world.free_cells()
        for _ in range(1000):
            if self._follower is not None:
                action = self._follower.action(state.pose)
                if action is not None:
                    return action
                self._follower = None
            goal = self.rng.choice(self._free)
            if goal == cell:
                continue
            path = shortest_path(world, cell, goal)
            if path is not None:
                self._follower = _PathFollower(world, path)
        raise RuntimeError("could not sample a reachable goal")


def make_policy(name: str, cfg: ExplorationConfig, embedder: Embedder,
                rng: random.Random):
    if name == "disagreement":
        return DisagreementPolicy(cfg, embedder, rng)
    if name == "frontier":
        return FrontierPolicy()
    if name == "random":
        return RandomGoalPolicy(rng)
    raise ValueError(f"unknown policy {name!r}")
