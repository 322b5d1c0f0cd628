"""Variation pools and trainable edit pairs.

A variation pool holds mutual paraphrases (or mutual protein mutants). Every
ordered pair of distinct members is a trainable edit pair; this module
enumerates them, samples them (uniformly, via transition-space k-NN, or via
per-window member draws), assigns training threshold windows, selects
anchors, annotates rewards and weights, and exports training examples as
JSON Lines.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .attributes import (
    AttributePartition,
    AttributeSpace,
    AttributeSpec,
    MultiConstraint,
    ThresholdWindow,
    combo_constraints,
    ingest_vector,
    satisfaction_score,
    window_of,
)
from .errors import ConfigurationError, ContractViolation
from .evaluators import RewardModel, ScoredSequence

logger = logging.getLogger(__name__)

POOL_FORMAT = "macs-pool"
TRAIN_FORMAT = "macs-train"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class VariationPool:
    """A group of mutually rewritable sequences sharing one attribute space."""

    group_id: str
    members: tuple[ScoredSequence, ...]
    origins: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.origins and len(self.origins) != len(self.members):
            raise ConfigurationError(
                f"pool {self.group_id!r}: {len(self.origins)} origin flags for "
                f"{len(self.members)} members"
            )

    def __len__(self) -> int:
        return len(self.members)

    def origin_of(self, i: int) -> str:
        return self.origins[i] if self.origins else ""


@dataclass(frozen=True)
class EditPair:
    """Ordered (source, target) pair drawn from one pool."""

    source: ScoredSequence
    target: ScoredSequence
    group_id: str


@dataclass
class TrainingExample:
    pair: EditPair
    windows: MultiConstraint
    anchor: ScoredSequence | None
    reward: float
    weight: float
    meta: dict = field(default_factory=dict)


@dataclass(frozen=True)
class SamplerConfig:
    mode: str = "random"  # random | knn | window-uniform
    k: int = 30
    tau: int = 400
    seed: int = 0

    def __post_init__(self) -> None:
        if self.mode not in ("random", "knn", "window-uniform"):
            raise ConfigurationError(f"unknown sampler mode {self.mode!r}")
        if self.k < 1:
            raise ConfigurationError("sampler k must be >= 1")
        if self.tau < 1:
            raise ConfigurationError("sampler tau must be >= 1")


def enumerate_pairs(pool: VariationPool) -> list[EditPair]:
    """All ordered pairs of distinct members: m(m-1) for m distinct members."""
    if len(pool) < 2:
        logger.warning("pool %r has %d member(s); no pairs", pool.group_id, len(pool))
        return []
    pairs = []
    for i, a in enumerate(pool.members):
        for j, b in enumerate(pool.members):
            if i == j or a.digest == b.digest:
                continue
            pairs.append(EditPair(a, b, pool.group_id))
    return pairs


def assign_windows(
    pair: EditPair,
    partitions: Sequence[AttributePartition],
    strategy: str = "target-satisfying",
    rng: np.random.Generator | None = None,
) -> MultiConstraint:
    """Pick the training windows T for a pair.

    target-satisfying: per attribute, the partition window containing the
    target's value. nonneg-gain: per attribute, a seeded uniform choice among
    windows whose satisfaction score does not drop from source to target
    (the target-satisfying window always qualifies, so the set is nonempty).
    """
    space = space_of_partitions(partitions)
    if len(pair.source.attrs) != space.k or len(pair.target.attrs) != space.k:
        raise ContractViolation("pair attributes do not match the partitions")
    windows: list[ThresholdWindow] = []
    if strategy == "target-satisfying":
        for value, partition in zip(pair.target.attrs, partitions):
            windows.append(partition.boundaries[window_of(value, partition)])
    elif strategy == "nonneg-gain":
        if rng is None:
            raise ContractViolation("nonneg-gain window assignment needs an rng")
        for v_src, v_tgt, partition, spec in zip(
            pair.source.attrs, pair.target.attrs, partitions, space.specs
        ):
            eligible = [
                w
                for w in partition.boundaries
                if satisfaction_score(v_tgt, w, spec)
                >= satisfaction_score(v_src, w, spec)
            ]
            windows.append(eligible[int(rng.integers(len(eligible)))])
    else:
        raise ConfigurationError(f"unknown window strategy {strategy!r}")
    return MultiConstraint(tuple(windows))


def sample_anchor(
    pair: EditPair,
    windows: MultiConstraint,
    pool: VariationPool,
    reward_model: RewardModel,
    rng: np.random.Generator,
) -> ScoredSequence:
    """Uniform draw over pool members whose reward against the source is at
    least the target's own reward; the target itself always qualifies, and is
    returned outright if nothing else does."""
    target_reward = reward_model.total(pair.target, pair.source, windows)
    qualifying = [
        m
        for m in pool.members
        if reward_model.total(m, pair.source, windows) >= target_reward
    ]
    if not qualifying:
        return pair.target
    return qualifying[int(rng.integers(len(qualifying)))]


def space_of_partitions(partitions: Sequence[AttributePartition]) -> AttributeSpace:
    """Reconstruct the attribute space a set of partitions tiles."""
    specs = tuple(
        AttributeSpec(p.attr_id, p.boundaries[0].start, p.boundaries[-1].end)
        for p in partitions
    )
    return AttributeSpace(specs)


def combo_key(member: ScoredSequence, partitions: Sequence[AttributePartition]) -> tuple[int, ...]:
    return tuple(window_of(v, p) for v, p in zip(member.attrs, partitions))


def window_weights(
    pools: Sequence[VariationPool],
    partitions: Sequence[AttributePartition],
    tau: int,
) -> dict[tuple[int, ...], float]:
    """Per-combo sampling weights with sparse combos downweighted to n/tau."""
    if tau < 1:
        raise ConfigurationError("tau must be >= 1")
    counts: dict[tuple[int, ...], int] = {}
    for pool in pools:
        for member in pool.members:
            key = combo_key(member, partitions)
            counts[key] = counts.get(key, 0) + 1
    sizes = [len(p) for p in partitions]
    weights: dict[tuple[int, ...], float] = {}
    for key in np.ndindex(*sizes):
        n = counts.get(tuple(int(i) for i in key), 0)
        weights[tuple(int(i) for i in key)] = 1.0 if n >= tau else n / tau
    return weights


class PairIndex:
    """Immutable flat index of all edit pairs with normalized transition vectors.

    Construction is single-threaded; afterwards any number of workers may
    sample concurrently, each with its own generator. Neighbor search is an
    exact vectorized scan over all pairs.
    """

    def __init__(self, pools: Sequence[VariationPool], space: AttributeSpace):
        if not pools:
            raise ConfigurationError("no pools given")
        self.space = space
        self.pools = tuple(pools)
        self.pairs: list[EditPair] = []
        for pool in pools:
            self.pairs.extend(enumerate_pairs(pool))
        if not self.pairs:
            raise ConfigurationError("pools yield no edit pairs")
        lo = np.array([s.v_min for s in space.specs])
        span = np.array([s.span for s in space.specs])
        starts = np.array([list(p.source.attrs) for p in self.pairs])
        ends = np.array([list(p.target.attrs) for p in self.pairs])
        self._matrix = np.hstack([(starts - lo) / span, (ends - lo) / span])
        self._sq_norms = (self._matrix**2).sum(axis=1)
        self._members: list[ScoredSequence] = [
            m for pool in pools for m in pool.members
        ]
        self._member_group: list[str] = [
            pool.group_id for pool in pools for _ in pool.members
        ]

    def __len__(self) -> int:
        return len(self.pairs)

    def _normalize(self, values: Sequence[float]) -> np.ndarray:
        lo = np.array([s.v_min for s in self.space.specs])
        span = np.array([s.span for s in self.space.specs])
        return (np.asarray(values, dtype=float) - lo) / span

    def sample_random(self, rng: np.random.Generator, count: int = 1) -> list[EditPair]:
        """Uniform over all pairs; pools weigh in proportional to pair count."""
        return [self.pairs[int(i)] for i in rng.integers(len(self.pairs), size=count)]

    def _neighbor_rows(self, queries: np.ndarray, k: int) -> list[np.ndarray]:
        """Exact k nearest pair indices per query row, ties broken by index."""
        k_eff = min(k, len(self.pairs))
        if k_eff < k:
            logger.info(
                "only %d pairs available for k=%d; using all pairs", len(self.pairs), k
            )
        rows: list[np.ndarray] = []
        chunk = 256
        for base in range(0, queries.shape[0], chunk):
            block = queries[base : base + chunk]
            d2 = (
                (block**2).sum(axis=1)[:, None]
                + self._sq_norms[None, :]
                - 2.0 * block @ self._matrix.T
            )
            for row in d2:
                kth = np.partition(row, k_eff - 1)[k_eff - 1]
                cand = np.nonzero(row <= kth)[0]
                order = np.lexsort((cand, row[cand]))
                rows.append(cand[order][:k_eff])
        return rows

    def sample_knn(
        self,
        partitions: Sequence[AttributePartition],
        config: SamplerConfig,
        rng: np.random.Generator,
        count: int = 1,
    ) -> list[EditPair]:
        """Transition-space k-NN sampling.

        Per draw: pick a start and an end combo uniformly, pick a uniform
        attribute location inside each window, then choose uniformly among
        the k pairs nearest to the normalized (start, end) query.
        """
        combos = combo_constraints(partitions)
        queries = np.empty((count, 2 * self.space.k))
        picks = np.empty(count)
        for i in range(count):
            start_combo = combos[int(rng.integers(len(combos)))]
            end_combo = combos[int(rng.integers(len(combos)))]
            start_loc = [float(rng.uniform(w.start, w.end)) for w in start_combo.windows]
            end_loc = [float(rng.uniform(w.start, w.end)) for w in end_combo.windows]
            queries[i] = np.concatenate(
                [self._normalize(start_loc), self._normalize(end_loc)]
            )
            picks[i] = rng.random()
        rows = self._neighbor_rows(queries, config.k)
        return [
            self.pairs[int(row[int(u * len(row))])] for row, u in zip(rows, picks)
        ]

    def sample_window_uniform(
        self,
        partitions: Sequence[AttributePartition],
        config: SamplerConfig,
        rng: np.random.Generator,
        count: int = 1,
    ) -> list[EditPair]:
        """Per-window member sampling for pools without group structure.

        Pick a source combo uniformly among populated combos and a target
        combo weighted by the sparse-window weights (n/tau below tau), then
        draw one member uniformly from each side.
        """
        buckets: dict[tuple[int, ...], list[int]] = {}
        for idx, member in enumerate(self._members):
            buckets.setdefault(combo_key(member, partitions), []).append(idx)
        keys = sorted(buckets)
        weights = window_weights(self.pools, partitions, config.tau)
        target_w = np.array([weights[key] for key in keys], dtype=float)
        if target_w.sum() <= 0:
            raise ConfigurationError("no populated combo has positive weight")
        target_w = target_w / target_w.sum()
        out: list[EditPair] = []
        for _ in range(count):
            for _attempt in range(100):
                src_key = keys[int(rng.integers(len(keys)))]
                tgt_key = keys[int(rng.choice(len(keys), p=target_w))]
                src_pick = buckets[src_key][int(rng.integers(len(buckets[src_key])))]
                tgt_pick = buckets[tgt_key][int(rng.integers(len(buckets[tgt_key])))]
                source = self._members[src_pick]
                target = self._members[tgt_pick]
                if source.digest != target.digest:
                    out.append(
                        EditPair(source, target, self._member_group[src_pick])
                    )
                    break
            else:
                raise ContractViolation(
                    "could not draw a distinct (source, target) member pair"
                )
        return out


@dataclass
class PairSampler:
    """A seeded sampling stream over a PairIndex, dispatching on mode."""

    index: PairIndex
    config: SamplerConfig
    partitions: tuple[AttributePartition, ...] | None = None
    rng: np.random.Generator = None  # type: ignore[assignment]

    def __post_init__(self) -> None:
        if self.config.mode in ("knn", "window-uniform") and not self.partitions:
            raise ConfigurationError(f"{self.config.mode} sampling needs partitions")
        if self.rng is None:
            self.rng = np.random.default_rng(self.config.seed)

    def sample(self, count: int = 1) -> list[EditPair]:
        if self.config.mode == "random":
            return self.index.sample_random(self.rng, count)
        if self.config.mode == "knn":
            return self.index.sample_knn(self.partitions, self.config, self.rng, count)
        return self.index.sample_window_uniform(
            self.partitions, self.config, self.rng, count
        )


def sample_random(pools: Sequence[VariationPool], rng: np.random.Generator) -> EditPair:
    """One uniform draw over all enumerable pairs."""
    pairs = [p for pool in pools for p in enumerate_pairs(pool)]
    if not pairs:
        raise ConfigurationError("pools yield no edit pairs")
    return pairs[int(rng.integers(len(pairs)))]


def sample_knn(
    pools_or_index,
    partitions: Sequence[AttributePartition],
    config: SamplerConfig,
    rng: np.random.Generator,
) -> EditPair:
    """One k-NN draw; builds an ephemeral index when handed raw pools."""
    index = (
        pools_or_index
        if isinstance(pools_or_index, PairIndex)
        else PairIndex(pools_or_index, space_of_partitions(partitions))
    )
    return index.sample_knn(partitions, config, rng, count=1)[0]


def dress_pairs(
    pairs: Sequence[EditPair],
    partitions: Sequence[AttributePartition],
    pools: Sequence[VariationPool],
    reward_model: RewardModel,
    rng: np.random.Generator,
    window_strategy: str = "target-satisfying",
    with_anchor: bool = False,
    weight_mode: str = "wbc",
    gamma: float | None = None,
) -> list[TrainingExample]:
    """Dress edit pairs as training examples.

    The reward is recomputed through the reward model (windows assigned per
    ``window_strategy``); the weight equals the reward for wBC export and 1
    for SFT export. ``gamma`` is carried verbatim in meta for downstream
    trainers and has no effect here.
    """
    if weight_mode not in ("wbc", "sft"):
        raise ConfigurationError(f"unknown weight mode {weight_mode!r}")
    pools_by_group = {pool.group_id: pool for pool in pools}
    examples: list[TrainingExample] = []
    for pair in pairs:
        windows = assign_windows(pair, partitions, window_strategy, rng=rng)
        anchor = None
        if with_anchor:
            pool = pools_by_group.get(pair.group_id)
            if pool is None:
                anchor = pair.target
            else:
                anchor = sample_anchor(pair, windows, pool, reward_model, rng)
        reward = reward_model.total(pair.target, pair.source, windows)
        weight = reward if weight_mode == "wbc" else 1.0
        meta: dict = {"group_id": pair.group_id, "window_strategy": window_strategy}
        if gamma is not None:
            meta["gamma"] = gamma
        examples.append(TrainingExample(pair, windows, anchor, reward, weight, meta))
    return examples


def build_examples(
    sampler: PairSampler,
    count: int,
    window_strategy: str = "target-satisfying",
    with_anchor: bool = False,
    weight_mode: str = "wbc",
    reward_model: RewardModel | None = None,
    gamma: float | None = None,
) -> list[TrainingExample]:
    """Sample ``count`` pairs and dress them as training examples."""
    if reward_model is None:
        raise ContractViolation("build_examples needs a reward model")
    partitions = sampler.partitions
    if partitions is None:
        raise ConfigurationError("building examples needs partitions for windows")
    return dress_pairs(
        sampler.sample(count),
        partitions,
        sampler.index.pools,
        reward_model,
        sampler.rng,
        window_strategy=window_strategy,
        with_anchor=with_anchor,
        weight_mode=weight_mode,
        gamma=gamma,
    )


# ---------------------------------------------------------------------------
# Serialization


def _seq_to_json(s: ScoredSequence, space: AttributeSpace) -> dict:
    return {
        "seq": s.seq,
        "attrs": {spec.id: value for spec, value in zip(space.specs, s.attrs)},
    }


def _seq_from_json(doc: dict, space: AttributeSpace, domain: str) -> ScoredSequence:
    try:
        seq = doc["seq"]
        attrs = doc["attrs"]
    except (KeyError, TypeError) as exc:
        raise ConfigurationError(f"malformed sequence record: {doc!r}") from exc
    if set(attrs) != set(space.ids):
        raise ConfigurationError(
            f"attribute keys {sorted(attrs)} do not match space {list(space.ids)}"
        )
    vector = ingest_vector(space, [attrs[a] for a in space.ids], source="import")
    return ScoredSequence(seq, vector, domain=domain)


def _dump_line(doc: dict) -> str:
    return json.dumps(doc, ensure_ascii=False, separators=(",", ":"))


def save_pools(
    pools: Sequence[VariationPool], path: str | Path, space: AttributeSpace
) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        fh.write(_dump_line({"format": POOL_FORMAT, "version": FORMAT_VERSION}) + "\n")
        for pool in pools:
            for i, member in enumerate(pool.members):
                doc = {"group_id": pool.group_id, **_seq_to_json(member, space)}
                doc["origin"] = pool.origin_of(i)
                fh.write(_dump_line(doc) + "\n")


def _read_header(line: str, expected_format: str, path: Path) -> None:
    try:
        header = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: bad header line") from exc
    if header.get("format") != expected_format or header.get("version") != FORMAT_VERSION:
        raise ConfigurationError(
            f"{path}: expected header format={expected_format!r} "
            f"version={FORMAT_VERSION}, got {header!r}"
        )


def load_pools(
    path: str | Path, space: AttributeSpace, domain: str = "text"
) -> list[VariationPool]:
    path = Path(path)
    groups: dict[str, list[ScoredSequence]] = {}
    origins: dict[str, list[str]] = {}
    order: list[str] = []
    with path.open("r", encoding="utf-8") as fh:
        first = fh.readline()
        if not first:
            raise ConfigurationError(f"{path}: empty pool file")
        _read_header(first, POOL_FORMAT, path)
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            try:
                doc = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ConfigurationError(f"{path}:{lineno}: bad JSON") from exc
            if "group_id" not in doc or "origin" not in doc:
                raise ConfigurationError(f"{path}:{lineno}: missing required fields")
            gid = str(doc["group_id"])
            if gid not in groups:
                groups[gid] = []
                origins[gid] = []
                order.append(gid)
            groups[gid].append(_seq_from_json(doc, space, domain))
            origins[gid].append(str(doc["origin"]))
    return [
        VariationPool(gid, tuple(groups[gid]), tuple(origins[gid])) for gid in order
    ]


def save_examples(
    examples: Sequence[TrainingExample], path: str | Path, space: AttributeSpace
) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        fh.write(_dump_line({"format": TRAIN_FORMAT, "version": FORMAT_VERSION}) + "\n")
        for ex in examples:
            doc: dict = {}
            if ex.anchor is not None:
                doc["anchor"] = _seq_to_json(ex.anchor, space)
            doc["source"] = _seq_to_json(ex.pair.source, space)
            doc["target"] = _seq_to_json(ex.pair.target, space)
            doc["windows"] = [
                {"attr_id": w.attr_id, "start": w.start, "end": w.end}
                for w in ex.windows.windows
            ]
            doc["reward"] = ex.reward
            doc["weight"] = ex.weight
            doc["meta"] = ex.meta
            fh.write(_dump_line(doc) + "\n")


def load_examples(
    path: str | Path, space: AttributeSpace, domain: str = "text"
) -> list[TrainingExample]:
    path = Path(path)
    out: list[TrainingExample] = []
    with path.open("r", encoding="utf-8") as fh:
        first = fh.readline()
        if not first:
            raise ConfigurationError(f"{path}: empty training file")
        _read_header(first, TRAIN_FORMAT, path)
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            try:
                doc = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ConfigurationError(f"{path}:{lineno}: bad JSON") from exc
            try:
                source = _seq_from_json(doc["source"], space, domain)
                target = _seq_from_json(doc["target"], space, domain)
                windows = MultiConstraint(
                    tuple(
                        ThresholdWindow(w["attr_id"], float(w["start"]), float(w["end"]))
                        for w in doc["windows"]
                    )
                )
                reward = float(doc["reward"])
                weight = float(doc["weight"])
                meta = dict(doc["meta"])
            except (KeyError, TypeError) as exc:
                raise ConfigurationError(f"{path}:{lineno}: malformed record") from exc
            anchor = (
                _seq_from_json(doc["anchor"], space, domain) if "anchor" in doc else None
            )
            pair = EditPair(source, target, str(meta.get("group_id", "")))
            out.append(TrainingExample(pair, windows, anchor, reward, weight, meta))
    return out


# ---------------------------------------------------------------------------
# Diagnostics


def delta_histogram(
    pairs: Sequence[EditPair], space: AttributeSpace, bins: int = 10
) -> np.ndarray:
    """2D histogram of attribute deltas (target minus source) for a
    two-attribute space, over a fixed [-span, span] grid per attribute."""
    if space.k != 2:
        raise ConfigurationError("delta histogram is defined for two attributes")
    d0 = [p.target.attrs[0] - p.source.attrs[0] for p in pairs]
    d1 = [p.target.attrs[1] - p.source.attrs[1] for p in pairs]
    span0, span1 = space.specs[0].span, space.specs[1].span
    hist, _, _ = np.histogram2d(
        d0,
        d1,
        bins=bins,
        range=[[-span0, span0], [-span1, span1]],
    )
    return hist


def histogram_stats(hist: np.ndarray) -> dict:
    """Occupied-cell count and Shannon entropy (nats) of a count histogram."""
    total = hist.sum()
    occupied = int((hist > 0).sum())
    entropy = 0.0
    if total > 0:
        probs = hist[hist > 0] / total
        entropy = float(-(probs * np.log(probs)).sum())
    return {"cells": occupied, "entropy": entropy, "count": int(total)}
