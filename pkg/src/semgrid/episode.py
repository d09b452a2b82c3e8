"""Episode execution: the observe / caption / associate / commit / act loop.

One episode is fully determined by (config, world seed, policy seed). The
log is JSONL: a header with the embedded world text (so evaluation needs no
other file), one record per step carrying pose, detections, prompt text,
structured output, association records, and the serialized memory snapshot,
and a footer with the final memory, pseudo-captions, and metrics. Wall-clock
step times go to a CSV sidecar so the log itself stays byte-reproducible.
"""
from __future__ import annotations

import gc
import json
import random
import time
from dataclasses import dataclass, replace
from pathlib import Path

from .aggregator import ViewRecord, consensus_caption, frequency_baseline, select_informative_views
from .association import apply_matches, associate_heuristic, associate_oracle
from .config import RunConfig, config_hash, config_to_dict, validate_config
from .explorer import PolicyState, make_policy
from .memory import EpisodicMemory, token_count
from .oracle import Embedder, caption_object
from .protocol import StructuredOutput, format_prompt, render_output
from .world import ExploredMap, GridWorld, generate_world, observe, step_agent, update_explored
from .worldio import load_world, world_hash, world_to_text

LOG_FORMAT_TAG = "semgrid-episode v1"


@dataclass(frozen=True)
class EpisodeArtifacts:
    log_path: Path
    timing_path: Path
    policy: str
    world_seed: int
    policy_seed: int


def build_world(config: RunConfig, world_seed: int) -> GridWorld:
    if config.world_file:
        return load_world(config.world_file)
    return generate_world(replace(config.world, seed=world_seed))


def episode_name(config: RunConfig, world_seed: int, policy_seed: int) -> str:
    return f"{config.policy}_{config.association_mode}_w{world_seed}_p{policy_seed}"


def run_episode(config: RunConfig, world_seed: int, policy_seed: int,
                out_dir: str | Path) -> EpisodeArtifacts:
    """Run one seeded episode and write its log plus the timing sidecar."""
    validate_config(config)
    world = build_world(config, world_seed)
    embedder = Embedder(world.vocabulary)
    sensor = config.sensor
    rng_obs = random.Random(f"obs:{world_seed}:{policy_seed}")
    rng_caption = random.Random(f"caption:{world_seed}:{policy_seed}")
    rng_policy = random.Random(f"policy:{world_seed}:{policy_seed}")

    pose = world.start_pose()
    memory = EpisodicMemory()
    registry: dict[int, int] = {}
    explored = ExploredMap.blank(world)
    update_explored(explored, world, pose, sensor)
    policy = make_policy(config.policy, config.exploration, embedder, rng_policy)

    header = {
        "type": "header",
        "format": LOG_FORMAT_TAG,
        "config": config_to_dict(config),
        "config_hash": config_hash(config),
        "policy": config.policy,
        "association_mode": config.association_mode,
        "world_seed": world_seed,
        "policy_seed": policy_seed,
        "world_hash": world_hash(world),
        "world_text": world_to_text(world),
    }
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    name = episode_name(config, world_seed, policy_seed)
    log_path = out_dir / f"{name}.jsonl"
    # records are serialized in-step but written after the loop: file flushes
    # inside the timed region would show up as spurious latency spikes
    log_lines = [json.dumps(header)]

    view_records: dict[int, list[ViewRecord]] = {}
    true_id_votes: dict[int, dict[int, int]] = {}
    step_times = []
    steps_taken = 0

    # cycle collection pauses would dominate worst-case step latency; the
    # loop itself creates no reference cycles, so collect once at the end
    gc_was_enabled = gc.isenabled()
    gc.disable()
    try:
        for step in range(1, config.episode_cap + 1):
            t0 = time.perf_counter()
            obs = observe(world, pose, sensor, rng_obs, step)
            prompt = format_prompt(memory, obs)
            captions = [
                caption_object(world.object_by_id(det.true_id_hidden), pose,
                               config.noise, sensor, world.vocabulary, rng_caption,
                               cell_size=world.cell_size, step=step)
                for det in obs.detections
            ]
            if config.association_mode == "oracle":
                decisions = associate_oracle(obs, memory, registry)
                records = apply_matches(memory, decisions, obs, captions,
                                        registry, step)
            else:
                decisions = associate_heuristic(
                    obs, [c.text for c in captions], memory, config.association,
                    embedder)
                records = apply_matches(memory, decisions, obs, captions, None, step)
            for rec, det in zip(records, obs.detections):
                pid = rec.predicted_persistent_id
                view_records.setdefault(pid, []).append(
                    ViewRecord(step, pose, frozenset(det.footprint)))
                votes = true_id_votes.setdefault(pid, {})
                votes[det.true_id_hidden] = votes.get(det.true_id_hidden, 0) + 1

            action = policy.step(PolicyState(world, pose, memory, explored, step))
            output = StructuredOutput(
                matches=tuple(decisions),
                captions=tuple(c.text for c in captions),
                action=action)
            rendered = render_output(output)
            new_pose, collided = step_agent(world, pose, action)
            update_explored(explored, world, new_pose, sensor)
            serialized = memory.serialize()

            step_record = {
                "type": "step",
                "step": step,
                "pose": {"x": pose.position[0], "y": pose.position[1],
                         "heading": pose.heading},
                "action": action,
                "collided": collided,
                "detections": [
                    {"transient_id": d.transient_id,
                     "position": list(d.world_position),
                     "true_id": d.true_id_hidden,
                     "footprint": [list(c) for c in d.footprint]}
                    for d in obs.detections
                ],
                "captions": [c.text for c in captions],
                "prompt": prompt,
                "output": rendered,
                "association": [
                    {"step": r.step,
                     "transient_id": r.decision.transient_id,
                     "target": r.decision.target,
                     "predicted_pid": r.predicted_persistent_id,
                     "true_id": r.true_object_id}
                    for r in records
                ],
                "memory": serialized,
                "memory_tokens": token_count(serialized),
                "entries": len(memory),
                "distinct_captions": memory.distinct_caption_count(),
                "explored_cells": explored.explored_count(),
            }
            log_lines.append(json.dumps(step_record))
            steps_taken = step
            step_times.append(time.perf_counter() - t0)
            pose = new_pose
            if action == "stop":
                break
    finally:
        if gc_was_enabled:
            gc.enable()
            gc.collect()

    pseudo = []
    for entry in memory:
        pid = entry.persistent_id
        selected = select_informative_views(
            view_records.get(pid, []), config.aggregator.view_budget,
            cell_size=world.cell_size)
        pc = consensus_caption(entry, selected, world.vocabulary,
                               config.aggregator.vote_threshold)
        votes = true_id_votes.get(pid, {})
        majority = max(sorted(votes), key=lambda t: votes[t]) if votes else None
        pseudo.append({
            "persistent_id": pid,
            "true_id": majority,
            "text": pc.text,
            "supporting": pc.supporting_frequencies,
            "views_used": list(pc.views_used),
            "frequency_baseline": frequency_baseline(entry),
        })

    footer = {
        "type": "footer",
        "steps": steps_taken,
        "final_memory": memory.serialize(),
        "pseudo_captions": pseudo,
    }
    log_lines.append(json.dumps(footer))
    with open(log_path, "w") as fh:
        fh.write("\n".join(log_lines) + "\n")
    timing_path = out_dir / f"{name}.timing.csv"
    with open(timing_path, "w") as fh:
        fh.write("step,seconds\n")
        for i, t in enumerate(step_times, start=1):
            fh.write(f"{i},{t:.9f}\n")
    return EpisodeArtifacts(log_path, timing_path, config.policy,
                            world_seed, policy_seed)


def _run_one(args) -> EpisodeArtifacts:
    config, world_seed, policy_seed, out_dir = args
    return run_episode(config, world_seed, policy_seed, out_dir)


def run_config(config: RunConfig, out_dir: str | Path | None = None) -> list[EpisodeArtifacts]:
    """Run every configured seed; episodes are share-nothing and may run in parallel."""
    validate_config(config)
    out = Path(out_dir) if out_dir is not None else Path(config.output_dir)
    jobs = []
    for seed in config.seeds:
        world_seed = config.world_seed if config.world_seed is not None else seed
        jobs.append((config, world_seed, seed, out))
    if config.workers > 1 and len(jobs) > 1:
        import multiprocessing

        with multiprocessing.Pool(config.workers) as pool:
            return pool.map(_run_one, jobs)
    return [_run_one(job) for job in jobs]
