"""Campaign runner for the two benchmark task shapes, plus report emission.

Style campaigns rewrite every test item toward every constraint combo under a
fixed per-episode budget and report satisfaction matrices. Discovery
campaigns run seeded walks (or direct recombination baselines) from one start
sequence per combo under a fixed decode budget and report distinct-success
rates against an offline reference set.
"""

from __future__ import annotations

import json
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .attributes import (
    AttributePartition,
    AttributeSpace,
    MultiConstraint,
    combo_constraints,
    satisfies,
    validate_partition,
)
from .editors import Editor, EditRequest
from .errors import ConfigurationError, ContractViolation
from .evaluators import (
    RewardModel,
    ScoredSequence,
    Scorer,
    evaluate,
    evaluate_pair,
    validate_sequence,
)
from .inference import EpisodeConfig, EpisodeResult, StepRecord, run_episode, trace_records
from .seeding import derive_seed
from .stats import levenshtein

logger = logging.getLogger(__name__)

ALL_PAIRS_CAP = 200  # beyond this many successes, all-pairs stats use a stride subsample

GENERATIONS = ("walks", "recombine", "unique-recombine")


@dataclass
class CampaignSpec:
    mode: str  # "style" | "discovery"
    space: AttributeSpace
    partitions: tuple[AttributePartition, ...]
    episode: EpisodeConfig | None
    seed: int
    items: tuple[ScoredSequence, ...] = ()
    start: ScoredSequence | None = None
    reference: frozenset[str] | None = None
    combo_budget: int = 0
    generation: str = "walks"
    bonus_metrics: bool = True
    config_echo: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.mode not in ("style", "discovery"):
            raise ConfigurationError(f"unknown campaign mode {self.mode!r}")
        if len(self.partitions) != self.space.k:
            raise ConfigurationError("one partition per attribute required")
        for partition, spec in zip(self.partitions, self.space.specs):
            validate_partition(partition, spec)
        if self.mode == "style":
            if not self.items:
                raise ConfigurationError("style campaign needs test items")
            if self.episode is None:
                raise ConfigurationError("style campaign needs an episode config")
        else:
            if self.start is None:
                raise ConfigurationError("discovery campaign needs a start sequence")
            if self.combo_budget < 1:
                raise ConfigurationError("discovery campaign needs a per-combo budget")
            if self.generation not in GENERATIONS:
                raise ConfigurationError(f"unknown generation mode {self.generation!r}")
            if self.generation == "walks":
                if self.episode is None:
                    raise ConfigurationError("walk generation needs an episode config")
                if self.episode.strategy not in ("random-walk", "priority-walk"):
                    raise ConfigurationError(
                        "walk generation needs a random-walk or priority-walk strategy"
                    )
                if self.combo_budget % self.episode.hops != 0:
                    raise ConfigurationError(
                        f"per-combo budget {self.combo_budget} is not a whole number "
                        f"of {self.episode.hops}-hop walks"
                    )

    @property
    def combos(self) -> list[MultiConstraint]:
        return combo_constraints(self.partitions)

    def max_editor_calls(self) -> int:
        """The configured decode budget for the whole campaign."""
        n_combos = len(self.combos)
        if self.mode == "style":
            assert self.episode is not None
            return len(self.items) * n_combos * self.episode.budget
        return n_combos * self.combo_budget


@dataclass
class CampaignReport:
    mode: str
    seed: int
    space: AttributeSpace
    partitions: tuple[AttributePartition, ...]
    combo_labels: list[str]
    metrics: dict
    matrices: dict[str, np.ndarray]
    budget: dict
    episodes: list[tuple[str, EpisodeResult]]
    notes: dict = field(default_factory=dict)
    config_echo: dict = field(default_factory=dict)
    workers: int = 1
    runtime_seconds: float = 0.0


def _combo_grid(partitions: Sequence[AttributePartition]) -> tuple[int, int]:
    if len(partitions) != 2:
        raise ConfigurationError("matrix reports need exactly two partitions")
    return len(partitions[0]), len(partitions[1])


def _matrix(values: Sequence[float | None], partitions) -> np.ndarray:
    rows, cols = _combo_grid(partitions)
    grid = np.full((rows, cols), np.nan)
    for idx, value in enumerate(values):
        if value is not None:
            grid[idx // cols, idx % cols] = value
    return grid


def _mean_std(values: Sequence[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=float)
    return float(arr.mean()), float(arr.std())


def _run_tasks(task_fn: Callable, keys: list, workers: int) -> dict:
    """Run keyed tasks, possibly in threads; results keyed for canonical
    reduction so the outcome is independent of completion order."""
    if workers <= 1:
        return {key: task_fn(key) for key in keys}
    results: dict = {}
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for key, value in zip(keys, pool.map(task_fn, keys)):
            results[key] = value
    return results


# ---------------------------------------------------------------------------
# Style campaigns


def run_style_campaign(
    spec: CampaignSpec,
    editor_factory: Callable[[int, int], Editor],
    scorer: Scorer,
    reward_model: RewardModel,
    workers: int = 1,
) -> CampaignReport:
    """One episode per (item, combo); satisfaction rate aggregated per combo.

    ``editor_factory(item_index, combo_index)`` builds the editor for one
    episode. The headline satisfaction rate is the mean and population std
    across combo rates; fluency and similarity are averaged over satisfying
    finals only.
    """
    if spec.mode != "style":
        raise ConfigurationError("not a style campaign spec")
    if spec.bonus_metrics and not (
        reward_model.unary_bonuses and reward_model.pairwise_bonuses
    ):
        raise ConfigurationError(
            "style campaign reports fluency/similarity; the reward model is "
            "missing bonus evaluators (set bonus_metrics=False to skip)"
        )
    started = time.monotonic()
    combos = spec.combos
    keys = [(ci, ii) for ci in range(len(combos)) for ii in range(len(spec.items))]

    def run_one(key: tuple[int, int]):
        ci, ii = key
        episode_id = f"combo{ci:03d}-item{ii:04d}"
        config = replace(spec.episode, seed=derive_seed(spec.seed, "style", ci, ii))
        editor = editor_factory(ii, ci)
        return run_episode(
            editor,
            scorer,
            reward_model,
            spec.items[ii],
            combos[ci],
            config,
            episode_id,
        )

    results = _run_tasks(run_one, keys, workers)

    per_combo_rate: list[float] = []
    per_combo_fluency: list[float | None] = []
    per_combo_similarity: list[float | None] = []
    per_combo_budget: list[int] = []
    episodes: list[tuple[str, EpisodeResult]] = []
    all_fluency: list[float] = []
    all_similarity: list[float] = []
    satisfied_total = 0

    fluency_ev = reward_model.unary_bonuses[0] if reward_model.unary_bonuses else None
    similarity_ev = (
        reward_model.pairwise_bonuses[0] if reward_model.pairwise_bonuses else None
    )

    for ci in range(len(combos)):
        combo_results = [results[(ci, ii)] for ii in range(len(spec.items))]
        for ii, result in enumerate(combo_results):
            episodes.append((f"combo{ci:03d}-item{ii:04d}", result))
        rate = sum(r.satisfied for r in combo_results) / len(combo_results)
        per_combo_rate.append(rate)
        per_combo_budget.append(sum(r.budget_used for r in combo_results))
        satisfied_total += sum(r.satisfied for r in combo_results)
        flu: list[float] = []
        sim: list[float] = []
        for ii, result in enumerate(combo_results):
            if not result.satisfied:
                continue
            if fluency_ev is not None:
                flu.append(evaluate(fluency_ev, result.final.seq, reward_model.cache))
            if similarity_ev is not None:
                sim.append(
                    evaluate_pair(
                        similarity_ev,
                        result.final.seq,
                        spec.items[ii].seq,
                        reward_model.cache,
                    )
                )
        per_combo_fluency.append(sum(flu) / len(flu) if flu else None)
        per_combo_similarity.append(sum(sim) / len(sim) if sim else None)
        all_fluency.extend(flu)
        all_similarity.extend(sim)

    mean_rate, std_rate = _mean_std(per_combo_rate)
    metrics = {
        "episodes": len(keys),
        "items": len(spec.items),
        "satisfied_episodes": satisfied_total,
        "satisfaction": {
            "mean": mean_rate,
            "std": std_rate,
            "per_combo": per_combo_rate,
            "satisfied_per_combo": [
                int(sum(results[(ci, ii)].satisfied for ii in range(len(spec.items))))
                for ci in range(len(combos))
            ],
        },
        "fluency": {
            "mean_over_satisfying": (
                sum(all_fluency) / len(all_fluency) if all_fluency else None
            ),
            "per_combo": per_combo_fluency,
        },
        "similarity": {
            "mean_over_satisfying": (
                sum(all_similarity) / len(all_similarity) if all_similarity else None
            ),
            "per_combo": per_combo_similarity,
        },
    }
    matrices = {
        "satisfaction": _matrix(per_combo_rate, spec.partitions),
        "fluency": _matrix(per_combo_fluency, spec.partitions),
        "similarity": _matrix(per_combo_similarity, spec.partitions),
    }
    budget = _budget_audit(spec, per_combo_budget, [c.label() for c in combos])
    return CampaignReport(
        mode="style",
        seed=spec.seed,
        space=spec.space,
        partitions=spec.partitions,
        combo_labels=[c.label() for c in combos],
        metrics=metrics,
        matrices=matrices,
        budget=budget,
        episodes=episodes,
        config_echo=spec.config_echo,
        workers=workers,
        runtime_seconds=time.monotonic() - started,
    )


def _budget_audit(
    spec: CampaignSpec, per_combo_used: Sequence[int], labels: Sequence[str]
) -> dict:
    used = int(sum(per_combo_used))
    configured = spec.max_editor_calls()
    audit = {
        "configured_max_calls": configured,
        "editor_calls": used,
        "freed_by_early_stop": configured - used,
        "per_combo": {label: int(n) for label, n in zip(labels, per_combo_used)},
    }
    if used > configured and spec.generation != "unique-recombine":
        raise ContractViolation(
            f"budget overrun: {used} editor calls against {configured}"
        )
    return audit


# ---------------------------------------------------------------------------
# Discovery campaigns


def discovery_metrics(
    proposals: Sequence[ScoredSequence],
    constraint: MultiConstraint,
    reference: frozenset[str] | None,
    start: ScoredSequence,
    budget: int,
    invalid: Sequence[str] = (),
) -> dict:
    """Success metrics over one combo's collected proposals.

    Rates divide by the decode budget. Distinctness is by exact sequence;
    ``invalid`` carries proposals that consumed budget but could not be
    scored (they can never satisfy).
    """
    if budget < 1:
        raise ContractViolation("budget must be positive")
    distinct: dict[str, ScoredSequence] = {}
    for proposal in proposals:
        distinct.setdefault(proposal.seq, proposal)
    distinct_invalid = {seq for seq in invalid if seq not in distinct}
    successes = [
        s for s in distinct.values() if satisfies(s.attrs, constraint)
    ]
    total_rate = len(successes) / budget
    unique_rate = None
    if reference is not None:
        unique_rate = sum(1 for s in successes if s.seq not in reference) / budget
    n_proposals = len(proposals) + len(invalid)
    duplicates = n_proposals - len(distinct) - len(distinct_invalid)
    from_start = [levenshtein(s.seq, start.seq) for s in successes]
    sample = successes
    sampled = False
    if len(successes) > ALL_PAIRS_CAP:
        stride = len(successes) / ALL_PAIRS_CAP
        sample = [successes[int(i * stride)] for i in range(ALL_PAIRS_CAP)]
        sampled = True
    all_pairs = [
        levenshtein(sample[i].seq, sample[j].seq)
        for i in range(len(sample))
        for j in range(i + 1, len(sample))
    ]
    return {
        "proposals": n_proposals,
        "distinct": len(distinct) + len(distinct_invalid),
        "duplicates": duplicates,
        "successes": len(successes),
        "total_success": total_rate,
        "unique_success": unique_rate,
        "edit_distance_from_start": _dist_stats(from_start),
        "edit_distance_all_pairs": {**_dist_stats(all_pairs), "subsampled": sampled},
    }


def _dist_stats(values: Sequence[int]) -> dict:
    if not values:
        return {"mean": None, "std": None, "count": 0}
    mean, std = _mean_std(values)
    return {"mean": mean, "std": std, "count": len(values)}


def _direct_generation(
    spec: CampaignSpec,
    editor: Editor,
    scorer: Scorer,
    constraint: MultiConstraint,
    combo_index: int,
) -> EpisodeResult:
    """Pull candidates straight from a (recombination) editor until the decode
    budget is consumed; the Unique variant instead loops until combo_budget
    distinct non-reference valid candidates exist, and only then stops.

    Returns a synthetic episode whose trace holds every decode.
    """
    assert spec.start is not None
    unique_mode = spec.generation == "unique-recombine"
    reference = spec.reference or frozenset()
    episode_id = f"combo{combo_index:03d}-gen"
    trace: list[StepRecord] = []
    seen: set[str] = set()
    unique_valid = 0
    decodes = 0
    step = 0
    batch = 200
    max_decodes = spec.combo_budget if not unique_mode else spec.combo_budget * 50
    while True:
        if unique_mode:
            if unique_valid >= spec.combo_budget:
                break
            if decodes >= max_decodes:
                raise ContractViolation(
                    f"unique-recombine could not reach {spec.combo_budget} distinct "
                    f"non-reference sequences within {max_decodes} decodes"
                )
            want = min(batch, spec.combo_budget - unique_valid)
        else:
            if decodes >= spec.combo_budget:
                break
            want = min(batch, spec.combo_budget - decodes)
        request = EditRequest(
            episode_id=episode_id,
            context=spec.start.context,
            anchor=None,
            current=spec.start,
            target=constraint,
            n_candidates=want,
            seed=derive_seed(spec.seed, "generate", combo_index, step),
        )
        candidates = editor.propose(request)
        if len(candidates) != want:
            raise ContractViolation(
                f"editor returned {len(candidates)} candidates for {want}"
            )
        decodes += want
        for seq in candidates:
            keep = True
            scored = None
            try:
                validate_sequence(seq, spec.start.domain)
                scored = scorer.score(seq, context=spec.start.context)
            except Exception:  # noqa: BLE001 - invalid candidates cost budget
                keep = False
            if unique_mode:
                keep = keep and seq not in reference and seq not in seen
                if keep:
                    seen.add(seq)
                    unique_valid += 1
                else:
                    continue  # discarded decode; not a prediction in this mode
            trace.append(
                StepRecord(
                    step=len(trace),
                    proposal=seq,
                    attrs=scored.attrs if scored is not None else None,
                    reward=None,
                    accepted=scored is not None,
                )
            )
        step += 1
    return EpisodeResult(
        start=spec.start,
        trace=trace,
        final=spec.start,
        satisfied=False,
        budget_used=decodes,
    )


def run_discovery_campaign(
    spec: CampaignSpec,
    editor_factory: Callable[[int], Editor],
    scorer: Scorer,
    reward_model: RewardModel,
    workers: int = 1,
) -> CampaignReport:
    """Per combo: seeded walks (or direct recombination) from the start until
    the decode budget is consumed; every proposal counts as a discovery
    candidate, accepted or not."""
    if spec.mode != "discovery":
        raise ConfigurationError("not a discovery campaign spec")
    started = time.monotonic()
    combos = spec.combos

    def run_combo(ci: int):
        editor = editor_factory(ci)
        episodes: list[tuple[str, EpisodeResult]] = []
        if spec.generation == "walks":
            assert spec.episode is not None
            walks = spec.combo_budget // spec.episode.hops
            for w in range(walks):
                episode_id = f"combo{ci:03d}-walk{w:05d}"
                config = replace(
                    spec.episode, seed=derive_seed(spec.seed, "discovery", ci, w)
                )
                episodes.append(
                    (
                        episode_id,
                        run_episode(
                            editor,
                            scorer,
                            reward_model,
                            spec.start,
                            combos[ci],
                            config,
                            episode_id,
                        ),
                    )
                )
        else:
            episodes.append(
                (
                    f"combo{ci:03d}-gen",
                    _direct_generation(spec, editor, scorer, combos[ci], ci),
                )
            )
        valid: list[ScoredSequence] = []
        invalid: list[str] = []
        for _, result in episodes:
            for record in result.trace:
                if record.attrs is not None:
                    valid.append(
                        ScoredSequence(
                            record.proposal, record.attrs, domain=spec.start.domain
                        )
                    )
                else:
                    invalid.append(record.proposal)
        stats = discovery_metrics(
            valid, combos[ci], spec.reference, spec.start, spec.combo_budget, invalid
        )
        used = sum(result.budget_used for _, result in episodes)
        return episodes, stats, used

    results = _run_tasks(run_combo, list(range(len(combos))), workers)

    episodes: list[tuple[str, EpisodeResult]] = []
    per_combo_stats: list[dict] = []
    per_combo_budget: list[int] = []
    for ci in range(len(combos)):
        combo_episodes, stats, used = results[ci]
        episodes.extend(combo_episodes)
        per_combo_stats.append(stats)
        per_combo_budget.append(used)

    total_rates = [s["total_success"] for s in per_combo_stats]
    unique_rates = [s["unique_success"] for s in per_combo_stats]
    have_reference = spec.reference is not None
    mean_total, std_total = _mean_std(total_rates)
    metrics: dict = {
        "combos": len(combos),
        "combo_budget": spec.combo_budget,
        "total_success": {
            "mean": mean_total,
            "std": std_total,
            "per_combo": total_rates,
            "successes_per_combo": [s["successes"] for s in per_combo_stats],
        },
        "unique_success": None,
        "duplicates": {
            "total": int(sum(s["duplicates"] for s in per_combo_stats)),
            "per_combo": [s["duplicates"] for s in per_combo_stats],
        },
        "edit_distance_from_start": {
            "per_combo": [s["edit_distance_from_start"] for s in per_combo_stats]
        },
        "edit_distance_all_pairs": {
            "per_combo": [s["edit_distance_all_pairs"] for s in per_combo_stats]
        },
    }
    if have_reference:
        mean_unique, std_unique = _mean_std([u for u in unique_rates])
        metrics["unique_success"] = {
            "mean": mean_unique,
            "std": std_unique,
            "per_combo": unique_rates,
        }
    matrices = {
        "total_success": _matrix(total_rates, spec.partitions),
        "duplicates": _matrix(
            [float(s["duplicates"]) for s in per_combo_stats], spec.partitions
        ),
        "edit_distance_from_start_mean": _matrix(
            [s["edit_distance_from_start"]["mean"] for s in per_combo_stats],
            spec.partitions,
        ),
        "edit_distance_all_pairs_mean": _matrix(
            [s["edit_distance_all_pairs"]["mean"] for s in per_combo_stats],
            spec.partitions,
        ),
    }
    if have_reference:
        matrices["unique_success"] = _matrix(unique_rates, spec.partitions)
    budget = _budget_audit(spec, per_combo_budget, [c.label() for c in combos])
    notes = {}
    if spec.generation == "unique-recombine":
        notes["budget_exemption"] = (
            "unique-recombine loops until the configured count of distinct "
            "non-reference sequences exists; decodes may exceed the budget"
        )
    return CampaignReport(
        mode="discovery",
        seed=spec.seed,
        space=spec.space,
        partitions=spec.partitions,
        combo_labels=[c.label() for c in combos],
        metrics=metrics,
        matrices=matrices,
        budget=budget,
        episodes=episodes,
        notes=notes,
        config_echo=spec.config_echo,
        workers=workers,
        runtime_seconds=time.monotonic() - started,
    )


# ---------------------------------------------------------------------------
# Report emission


def _jsonsafe(value):
    if isinstance(value, float) and (math.isnan(value) or math.isinf(value)):
        return None
    if isinstance(value, dict):
        return {k: _jsonsafe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonsafe(v) for v in value]
    if isinstance(value, (np.floating, np.integer)):
        return _jsonsafe(value.item())
    return value


def _format_cell(value: float) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return ""
    return f"{value:.10g}"


def emit_report(report: CampaignReport, out_dir: str | Path) -> list[Path]:
    """Write summary.json, matrix_<metric>.csv, traces.jsonl, audit.json.

    All files except audit.json are byte-deterministic for a given report;
    timestamps are isolated to audit.json.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    summary = {
        "mode": report.mode,
        "seed": report.seed,
        "attributes": [
            {"id": s.id, "v_min": s.v_min, "v_max": s.v_max}
            for s in report.space.specs
        ],
        "partitions": {
            p.attr_id: [[w.start, w.end] for w in p.boundaries]
            for p in report.partitions
        },
        "combo_labels": report.combo_labels,
        "metrics": _jsonsafe(report.metrics),
        "budget": _jsonsafe(report.budget),
        "notes": _jsonsafe(report.notes),
        "config": _jsonsafe(report.config_echo),
    }
    summary_path = out / "summary.json"
    summary_path.write_text(
        json.dumps(summary, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )
    written.append(summary_path)

    row_labels = [w.label() for w in report.partitions[0].boundaries]
    col_labels = [w.label() for w in report.partitions[1].boundaries]
    for name, grid in report.matrices.items():
        path = out / f"matrix_{name}.csv"
        lines = ["," + ",".join(col_labels)]
        for label, row in zip(row_labels, grid):
            lines.append(label + "," + ",".join(_format_cell(v) for v in row))
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        written.append(path)

    traces_path = out / "traces.jsonl"
    with traces_path.open("w", encoding="utf-8") as fh:
        for episode_id, result in report.episodes:
            for row in trace_records(episode_id, result):
                fh.write(json.dumps(_jsonsafe(row), ensure_ascii=False, separators=(",", ":")))
                fh.write("\n")
    written.append(traces_path)

    audit = {
        "created": datetime.now(timezone.utc).isoformat(),
        "runtime_seconds": report.runtime_seconds,
        "workers": report.workers,
        "budget": _jsonsafe(report.budget),
    }
    audit_path = out / "audit.json"
    audit_path.write_text(
        json.dumps(audit, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )
    written.append(audit_path)
    return written
