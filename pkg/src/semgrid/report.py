"""Log evaluation and policy comparison.

Every metric is recomputed from the episode JSONL alone; the world text in
the header supplies the vocabulary and ground-truth attributes, so no other
file is needed. Reports are CSV: one row per episode, a per-step series for
plotting, and per-policy medians.
"""
from __future__ import annotations

import csv
import json
import math
import statistics
from dataclasses import dataclass, replace
from pathlib import Path

from .association import AssociationRecord, evaluate_association
from .config import RunConfig
from .episode import EpisodeArtifacts, run_config
from .memory import EpisodicMemory
from .metrics import (InsufficientDataError, UndefinedMetricsError,
                      attribute_f1, caption_consistency, memory_scalability,
                      timing_profile)
from .oracle import Embedder
from .protocol import MatchDecision, parse_memory
from .worldio import world_from_text

NAN = float("nan")


class LogParseError(ValueError):
    """Corrupt or truncated episode log; the message carries the line index."""


@dataclass(frozen=True)
class LogData:
    path: Path
    header: dict
    steps: list[dict]
    footer: dict


def read_log(path: str | Path) -> LogData:
    path = Path(path)
    header = None
    footer = None
    steps = []
    with open(path) as fh:
        for i, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise LogParseError(f"{path}: line {i}: {exc}") from exc
            kind = rec.get("type")
            if kind == "header":
                header = rec
            elif kind == "step":
                steps.append(rec)
            elif kind == "footer":
                footer = rec
            else:
                raise LogParseError(f"{path}: line {i}: unknown record type {kind!r}")
    if header is None or footer is None:
        raise LogParseError(f"{path}: missing header or footer")
    expected = list(range(1, len(steps) + 1))
    if [s["step"] for s in steps] != expected:
        raise LogParseError(f"{path}: step records not contiguous from 1")
    return LogData(path, header, steps, footer)


def _records_from_log(log: LogData) -> list[AssociationRecord]:
    records = []
    for step in log.steps:
        for a in step["association"]:
            records.append(AssociationRecord(
                step=a["step"],
                decision=MatchDecision(a["transient_id"], a["target"]),
                predicted_persistent_id=a["predicted_pid"],
                true_object_id=a["true_id"],
            ))
    return records


def _timing_sidecar(log_path: Path) -> list[float] | None:
    sidecar = log_path.parent / (log_path.stem + ".timing.csv")
    if not sidecar.exists():
        return None
    times = []
    with open(sidecar) as fh:
        next(fh)
        for line in fh:
            times.append(float(line.split(",")[1]))
    return times


def evaluate_log(log: LogData | str | Path) -> dict:
    """One row of metrics recomputed from a single episode log."""
    if not isinstance(log, LogData):
        log = read_log(log)
    world = world_from_text(log.header["world_text"])
    embedder = Embedder(world.vocabulary)

    row: dict = {
        "policy": log.header["policy"],
        "association_mode": log.header["association_mode"],
        "world_seed": log.header["world_seed"],
        "policy_seed": log.header["policy_seed"],
        "steps": log.footer["steps"],
        "objects_total": len(world.objects),
    }

    records = _records_from_log(log)
    row["objects_seen"] = len({r.true_object_id for r in records})
    if records:
        assoc = evaluate_association(records)
        row.update(acc=assoc.acc, f1_match=assoc.f1_match, f1_new=assoc.f1_new,
                   idsw=assoc.idsw, frag=assoc.frag)
    else:
        row.update(acc=NAN, f1_match=NAN, f1_new=NAN, idsw=0, frag=0)

    final_memory: EpisodicMemory = parse_memory(log.footer["final_memory"])
    row["entries"] = len(final_memory)
    per_object = {e.persistent_id: e.caption_list() for e in final_memory}
    try:
        report = caption_consistency(per_object, embedder)
        row.update(mean_cs=report.mean, median_cs=report.median,
                   iqr_cs=report.iqr,
                   mean_disagreement=float(
                       sum(1.0 - v for v in report.per_object.values())
                       / len(report.per_object)))
    except UndefinedMetricsError:
        row.update(mean_cs=NAN, median_cs=NAN, iqr_cs=NAN, mean_disagreement=NAN)

    consensus_scores = []
    baseline_scores = []
    for pc in log.footer["pseudo_captions"]:
        if pc["true_id"] is None:
            continue
        truth = world.object_by_id(pc["true_id"]).attributes
        consensus_scores.append(attribute_f1(pc["text"], truth, world.vocabulary))
        baseline_scores.append(
            attribute_f1(pc["frequency_baseline"], truth, world.vocabulary))
    if consensus_scores:
        row["attr_precision"] = sum(s.precision for s in consensus_scores) / len(consensus_scores)
        row["attr_recall"] = sum(s.recall for s in consensus_scores) / len(consensus_scores)
        row["attr_f1"] = sum(s.f1 for s in consensus_scores) / len(consensus_scores)
        row["freq_attr_f1"] = sum(s.f1 for s in baseline_scores) / len(baseline_scores)
    else:
        row.update(attr_precision=NAN, attr_recall=NAN, attr_f1=NAN, freq_attr_f1=NAN)

    try:
        diag = memory_scalability(
            [s["step"] for s in log.steps],
            [s["memory_tokens"] for s in log.steps],
            [s["entries"] for s in log.steps],
            [s["distinct_captions"] for s in log.steps])
        row.update(scal_corr_objects=diag.corr_tokens_objects,
                   scal_corr_steps_suffix=diag.corr_tokens_steps_suffix,
                   scal_pass=diag.passed,
                   saturation_step=diag.saturation_step)
    except InsufficientDataError:
        row.update(scal_corr_objects=NAN, scal_corr_steps_suffix=NAN,
                   scal_pass=False, saturation_step=-1)

    times = _timing_sidecar(log.path)
    if times:
        row["time_max_over_median"] = timing_profile(times).max_over_median
    else:
        row["time_max_over_median"] = NAN
    row["explored_cells_final"] = log.steps[-1]["explored_cells"] if log.steps else 0
    return row


REPORT_COLUMNS = [
    "policy", "association_mode", "world_seed", "policy_seed", "steps",
    "objects_total", "objects_seen", "entries",
    "acc", "f1_match", "f1_new", "idsw", "frag",
    "mean_cs", "median_cs", "iqr_cs", "mean_disagreement",
    "attr_precision", "attr_recall", "attr_f1", "freq_attr_f1",
    "scal_corr_objects", "scal_corr_steps_suffix", "scal_pass", "saturation_step",
    "time_max_over_median", "explored_cells_final",
]

SERIES_COLUMNS = ["policy", "world_seed", "policy_seed", "step",
                  "memory_tokens", "entries", "distinct_captions",
                  "explored_cells"]


def write_report(rows: list[dict], logs: list[LogData],
                 out_dir: str | Path) -> dict[str, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    report_path = out_dir / "report.csv"
    with open(report_path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=REPORT_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row.get(k) for k in REPORT_COLUMNS})
    series_path = out_dir / "series.csv"
    with open(series_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SERIES_COLUMNS)
        for log in logs:
            for s in log.steps:
                writer.writerow([
                    log.header["policy"], log.header["world_seed"],
                    log.header["policy_seed"], s["step"], s["memory_tokens"],
                    s["entries"], s["distinct_captions"], s["explored_cells"]])
    summary_path = out_dir / "summary.csv"
    _write_summary(rows, summary_path)
    return {"report": report_path, "series": series_path, "summary": summary_path}


_MEDIAN_METRICS = ["steps", "acc", "f1_match", "f1_new", "idsw", "frag",
                   "mean_cs", "iqr_cs", "mean_disagreement", "attr_f1",
                   "freq_attr_f1", "time_max_over_median"]


def _median(values: list[float]) -> float:
    clean = [v for v in values if isinstance(v, (int, float)) and not math.isnan(v)]
    return statistics.median(clean) if clean else NAN


def _write_summary(rows: list[dict], path: Path) -> None:
    policies = sorted({r["policy"] for r in rows})
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["policy", "episodes"] + [f"median_{m}" for m in _MEDIAN_METRICS])
        for policy in policies:
            sub = [r for r in rows if r["policy"] == policy]
            writer.writerow([policy, len(sub)] +
                            [_median([r.get(m, NAN) for r in sub])
                             for m in _MEDIAN_METRICS])


def evaluate_paths(paths: list[str | Path], out_dir: str | Path) -> dict[str, Path]:
    """CLI `eval` entry: recompute metrics for the given logs, write CSVs."""
    logs = [read_log(p) for p in paths]
    rows = [evaluate_log(log) for log in logs]
    return write_report(rows, logs, out_dir)


@dataclass(frozen=True)
class ComparisonResult:
    rows: list[dict]
    medians: dict[str, dict[str, float]]         # policy -> metric -> median
    wins: dict[tuple[str, str], dict[str, int]]  # (a, b) -> metric -> seeds where a beats b
    paths: dict[str, Path]


# metric name -> True when larger is better
_COMPARE_METRICS = {"mean_cs": True, "mean_disagreement": False,
                    "attr_f1": True, "acc": True}


def _beats(a: float, b: float, higher_better: bool) -> bool:
    a_ok = not math.isnan(a)
    b_ok = not math.isnan(b)
    if not a_ok:
        return False
    if not b_ok:
        return True
    return a > b if higher_better else a < b


def compare_policies(config: RunConfig, policies: list[str],
                     out_dir: str | Path | None = None) -> ComparisonResult:
    """Matched-seed runs for each policy, with per-metric medians and win counts."""
    if len(policies) < 2:
        raise ValueError("need at least two policies to compare")
    out = Path(out_dir) if out_dir is not None else Path(config.output_dir)
    artifacts: dict[str, list[EpisodeArtifacts]] = {}
    for policy in policies:
        artifacts[policy] = run_config(replace(config, policy=policy), out)
    rows = []
    by_policy_seed: dict[tuple[str, int], dict] = {}
    logs = []
    for policy, arts in artifacts.items():
        for art in arts:
            log = read_log(art.log_path)
            logs.append(log)
            row = evaluate_log(log)
            rows.append(row)
            by_policy_seed[(policy, art.policy_seed)] = row
    seeds = sorted({art.policy_seed for arts in artifacts.values() for art in arts})
    wins: dict[tuple[str, str], dict[str, int]] = {}
    for a in policies:
        for b in policies:
            if a == b:
                continue
            counts = {m: 0 for m in _COMPARE_METRICS}
            for seed in seeds:
                ra = by_policy_seed.get((a, seed))
                rb = by_policy_seed.get((b, seed))
                if ra is None or rb is None:
                    continue
                for metric, higher in _COMPARE_METRICS.items():
                    if _beats(ra[metric], rb[metric], higher):
                        counts[metric] += 1
            wins[(a, b)] = counts
    medians = {
        policy: {m: _median([r[m] for r in rows if r["policy"] == policy])
                 for m in _MEDIAN_METRICS}
        for policy in policies
    }
    paths = write_report(rows, logs, out)
    comparison_path = out / "comparison.csv"
    with open(comparison_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["policy_a", "policy_b", "metric", "wins", "seeds"])
        for (a, b), counts in wins.items():
            for metric, count in counts.items():
                writer.writerow([a, b, metric, count, len(seeds)])
    paths["comparison"] = comparison_path
    return ComparisonResult(rows, medians, wins, paths)
