"""Config documents: schema validation and object assembly.

A single JSON document drives synthesis-backed campaigns and pair tooling.
Unknown keys are rejected everywhere; one top-level seed feeds every derived
stream. Relative pool paths resolve against the config file's directory.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field

import jsonschema

from .attributes import (
    AttributePartition,
    AttributeSpace,
    AttributeSpec,
    combo_constraints,
    satisfies,
)
from .bench import CampaignSpec
from .inference import EpisodeConfig
from .editors import (
    Editor,
    PoolOracleEditor,
    RandomMutationEditor,
    RecombineEditor,
)
from .errors import ConfigurationError
from .evaluators import (
    ConstantEvaluator,
    EvaluationCache,
    Evaluator,
    PairwiseEvaluator,
    ProteinAttrEvaluator,
    ProteinLandscape,
    RewardModel,
    Scorer,
    ScoredSequence,
    ToyComplexityEvaluator,
    ToyFluencyEvaluator,
    ToySentimentEvaluator,
    ToySimilarityEvaluator,
)
from .pairs import VariationPool, load_pools
from .protocol import ExternalEditor, ExternalEvaluator, WorkerPool
from .seeding import derive_seed
from .stats import levenshtein

logger = logging.getLogger(__name__)

_TOY_KINDS = (
    "toy-sentiment",
    "toy-complexity",
    "toy-fluency",
    "toy-similarity",
    "toy-protein",
    "constant",
    "external",
)

CONFIG_SCHEMA: dict = {
    "type": "object",
    "additionalProperties": False,
    "required": ["seed", "domain", "attributes", "evaluators"],
    "properties": {
        "seed": {"type": "integer", "minimum": 0},
        "domain": {"enum": ["text", "protein"]},
        "attributes": {
            "type": "object",
            "additionalProperties": False,
            "required": ["specs", "partitions"],
            "properties": {
                "specs": {
                    "type": "array",
                    "minItems": 1,
                    "items": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["id", "v_min", "v_max"],
                        "properties": {
                            "id": {"type": "string", "minLength": 1},
                            "v_min": {"type": "number"},
                            "v_max": {"type": "number"},
                        },
                    },
                },
                "partitions": {
                    "type": "object",
                    "additionalProperties": {
                        "type": "array",
                        "items": {"type": "number"},
                    },
                },
            },
        },
        "evaluators": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["id", "kind"],
                "properties": {
                    "id": {"type": "string", "minLength": 1},
                    "kind": {"enum": list(_TOY_KINDS)},
                    "role": {"enum": ["attribute", "bonus"]},
                    "params": {"type": "object"},
                },
            },
        },
        "pools": {"type": "array", "items": {"type": "string"}},
        "editor": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {
                    "enum": ["pool-oracle", "random-mutation", "recombine", "external"]
                },
                "p": {"type": "number", "minimum": 0, "maximum": 1},
                "histogram": {
                    "type": "object",
                    "additionalProperties": {"type": "number"},
                },
                "kappa": {"type": "number", "minimum": 0, "maximum": 1},
                "command": {
                    "type": "array",
                    "minItems": 1,
                    "items": {"type": "string"},
                },
                "timeout": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "episode": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "strategy": {
                    "enum": [
                        "best-of-n",
                        "naive-chain",
                        "prioritized",
                        "random-walk",
                        "priority-walk",
                    ]
                },
                "budget": {"type": "integer", "minimum": 0},
                "hops": {"type": "integer", "minimum": 1},
                "beam": {"type": "integer", "minimum": 1},
                "anchor_conditioning": {"type": "boolean"},
            },
        },
        "campaign": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "mode": {"enum": ["style", "discovery"]},
                "max_items": {"type": "integer", "minimum": 1},
                "combo_budget": {"type": "integer", "minimum": 1},
                "generation": {
                    "enum": ["walks", "recombine", "unique-recombine"]
                },
                "bonus_metrics": {"type": "boolean"},
            },
        },
        "pairs": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "mode": {"enum": ["random", "knn", "window-uniform"]},
                "k": {"type": "integer", "minimum": 1},
                "tau": {"type": "integer", "minimum": 1},
                "count": {"type": "integer", "minimum": 1},
                "window_strategy": {"enum": ["target-satisfying", "nonneg-gain"]},
                "weight_mode": {"enum": ["wbc", "sft"]},
                "with_anchor": {"type": "boolean"},
                "gamma": {"type": "number"},
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"dir": {"type": "string", "minLength": 1}},
        },
    },
}


def validate_config(doc: dict) -> None:
    try:
        jsonschema.validate(doc, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigurationError(f"config invalid at {path}: {exc.message}") from exc


def load_config(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigurationError("config root must be an object")
    validate_config(doc)
    doc["__dir__"] = os.path.dirname(os.path.abspath(path))
    return doc


def build_space(doc: dict) -> AttributeSpace:
    specs = tuple(
        AttributeSpec(s["id"], float(s["v_min"]), float(s["v_max"]))
        for s in doc["attributes"]["specs"]
    )
    return AttributeSpace(specs)


def build_partitions(doc: dict, space: AttributeSpace) -> tuple[AttributePartition, ...]:
    edges_by_id = doc["attributes"]["partitions"]
    missing = [sid for sid in space.ids if sid not in edges_by_id]
    if missing:
        raise ConfigurationError(f"partitions missing for attributes: {missing}")
    extra = [sid for sid in edges_by_id if sid not in space.ids]
    if extra:
        raise ConfigurationError(f"partitions given for unknown attributes: {extra}")
    return tuple(
        AttributePartition.from_edges(spec, edges_by_id[spec.id])
        for spec in space.specs
    )


def _check_params(kind: str, params: dict, allowed: set[str], required: set[str]) -> None:
    unknown = set(params) - allowed
    if unknown:
        raise ConfigurationError(f"evaluator kind {kind}: unknown params {sorted(unknown)}")
    missing = required - set(params)
    if missing:
        raise ConfigurationError(f"evaluator kind {kind}: missing params {sorted(missing)}")


@dataclass
class Toolchain:
    """Everything a campaign or pair command needs, built from one config."""

    doc: dict
    seed: int
    domain: str
    space: AttributeSpace
    partitions: tuple[AttributePartition, ...]
    scorer: Scorer
    reward_model: RewardModel
    pools: list[VariationPool]
    worker_pools: list[WorkerPool] = field(default_factory=list)

    def close(self) -> None:
        for pool in self.worker_pools:
            pool.close()
        self.worker_pools.clear()

    def __enter__(self) -> "Toolchain":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def _build_evaluator(
    entry: dict,
    space: AttributeSpace,
    workers: int,
    worker_pools: list[WorkerPool],
) -> Evaluator | PairwiseEvaluator:
    kind = entry["kind"]
    eid = entry["id"]
    params = entry.get("params", {})
    if kind == "toy-sentiment":
        _check_params(kind, params, set(), set())
        return ToySentimentEvaluator(eid)
    if kind == "toy-complexity":
        _check_params(kind, params, set(), set())
        return ToyComplexityEvaluator(eid)
    if kind == "toy-fluency":
        _check_params(kind, params, set(), set())
        return ToyFluencyEvaluator(eid)
    if kind == "toy-similarity":
        _check_params(kind, params, set(), set())
        return ToySimilarityEvaluator(eid)
    if kind == "constant":
        _check_params(kind, params, {"value", "v_min", "v_max"}, {"value"})
        v_min = float(params.get("v_min", 0.0))
        v_max = float(params.get("v_max", 1.0))
        return ConstantEvaluator(eid, AttributeSpec(eid, v_min, v_max), float(params["value"]))
    if kind == "toy-protein":
        allowed = {
            "wild_type",
            "landscape_seed",
            "coupling_count",
            "base",
            "delta_loc",
            "delta_scale",
            "coupling_scale",
        }
        _check_params(kind, params, allowed, {"wild_type", "landscape_seed"})
        try:
            spec = space.spec(eid)
        except Exception as exc:
            raise ConfigurationError(
                f"toy-protein evaluator {eid!r} must match an attribute id"
            ) from exc
        landscape = ProteinLandscape(
            params["wild_type"],
            seed=int(params["landscape_seed"]),
            coupling_count=int(params.get("coupling_count", 8)),
            base=float(params.get("base", 0.0)),
            delta_loc=float(params.get("delta_loc", 0.0)),
            delta_scale=float(params.get("delta_scale", 1.0)),
            coupling_scale=float(params.get("coupling_scale", 0.25)),
        )
        return ProteinAttrEvaluator(eid, spec, landscape)
    if kind == "external":
        _check_params(kind, params, {"command", "timeout", "v_min", "v_max"}, {"command"})
        command = list(params["command"])
        timeout = float(params.get("timeout", 10.0))
        v_min = float(params.get("v_min", 0.0))
        v_max = float(params.get("v_max", 1.0))
        try:
            spec = space.spec(eid)
        except Exception:
            spec = AttributeSpec(eid, v_min, v_max)
        pool = WorkerPool(
            command,
            roles=("evaluator",),
            attr_ids=space.ids,
            size=workers,
            timeout=timeout,
        )
        worker_pools.append(pool)
        return ExternalEvaluator(eid, spec, pool)
    raise ConfigurationError(f"unknown evaluator kind: {kind}")


def build_toolchain(doc: dict, workers: int = 1, seed: int | None = None) -> Toolchain:
    """Assemble the scoring stack and load pools. Closes over worker pools
    spawned for external evaluators; callers own Toolchain.close()."""
    root_seed = int(doc["seed"]) if seed is None else int(seed)
    domain = doc["domain"]
    space = build_space(doc)
    partitions = build_partitions(doc, space)
    worker_pools: list[WorkerPool] = []
    attr_evals: dict[str, Evaluator] = {}
    unary_bonuses: list[Evaluator] = []
    pairwise_bonuses: list[PairwiseEvaluator] = []
    try:
        for entry in doc["evaluators"]:
            role = entry.get("role", "attribute")
            built = _build_evaluator(entry, space, workers, worker_pools)
            if role == "attribute":
                if isinstance(built, PairwiseEvaluator):
                    raise ConfigurationError(
                        f"evaluator {entry['id']!r}: pairwise kinds are bonus-only"
                    )
                if entry["id"] in attr_evals:
                    raise ConfigurationError(f"duplicate evaluator id {entry['id']!r}")
                attr_evals[entry["id"]] = built
            else:
                if isinstance(built, PairwiseEvaluator):
                    pairwise_bonuses.append(built)
                else:
                    unary_bonuses.append(built)
        missing = [sid for sid in space.ids if sid not in attr_evals]
        if missing:
            raise ConfigurationError(f"no attribute evaluator for: {missing}")
        extra = [eid for eid in attr_evals if eid not in space.ids]
        if extra:
            raise ConfigurationError(f"attribute evaluators without attributes: {extra}")
        scorer = Scorer(
            space,
            tuple(attr_evals[sid] for sid in space.ids),
            domain=domain,
        )
        cache = EvaluationCache()
        reward_model = RewardModel(
            space,
            tuple(unary_bonuses),
            tuple(pairwise_bonuses),
            cache=cache,
        )
        pools: list[VariationPool] = []
        base_dir = doc.get("__dir__", os.getcwd())
        for rel in doc.get("pools", []):
            path = rel if os.path.isabs(rel) else os.path.join(base_dir, rel)
            pools.extend(load_pools(path, space))
    except Exception:
        for pool in worker_pools:
            pool.close()
        raise
    return Toolchain(
        doc=doc,
        seed=root_seed,
        domain=domain,
        space=space,
        partitions=partitions,
        scorer=scorer,
        reward_model=reward_model,
        pools=pools,
        worker_pools=worker_pools,
    )


# ---------------------------------------------------------------------------
# Editor wiring


def _reference_members(pools: list[VariationPool]) -> list[ScoredSequence]:
    return [m for pool in pools for m in pool.members]


def _distance_histogram(
    members: list[ScoredSequence], start: ScoredSequence
) -> dict[int, float]:
    counts: dict[int, int] = {}
    for m in members:
        if m.digest == start.digest:
            continue
        d = levenshtein(m.seq, start.seq)
        if d > 0:
            counts[d] = counts.get(d, 0) + 1
    if not counts:
        return {1: 1.0}
    total = sum(counts.values())
    return {d: c / total for d, c in sorted(counts.items())}


def _editor_command(editor_doc: dict) -> tuple[list[str], float]:
    if "command" not in editor_doc:
        raise ConfigurationError("external editor requires a command")
    return list(editor_doc["command"]), float(editor_doc.get("timeout", 10.0))


@dataclass
class EditorPlan:
    """Resolved editor wiring for a campaign run."""

    factory: object
    worker_pool: WorkerPool | None = None

    def close(self) -> None:
        if self.worker_pool is not None:
            self.worker_pool.close()
            self.worker_pool = None


def style_editor_plan(
    toolchain: Toolchain,
    items: list[ScoredSequence],
    item_pools: list[VariationPool],
    workers: int = 1,
) -> EditorPlan:
    """Editor factory for style runs: callable(item_idx, combo_idx) -> Editor."""
    editor_doc = toolchain.doc.get("editor", {"kind": "pool-oracle", "p": 0.9})
    kind = editor_doc["kind"]
    if kind == "pool-oracle":
        p = float(editor_doc.get("p", 0.9))
        space = toolchain.space
        editors = [
            PoolOracleEditor(pool.members, space, p=p) for pool in item_pools
        ]

        def factory(item_idx: int, combo_idx: int) -> Editor:
            return editors[item_idx]

        return EditorPlan(factory=factory)
    if kind == "external":
        command, timeout = _editor_command(editor_doc)
        pool = WorkerPool(
            command,
            roles=("editor",),
            attr_ids=toolchain.space.ids,
            size=workers,
            timeout=timeout,
        )
        editor = ExternalEditor(pool)

        def factory(item_idx: int, combo_idx: int) -> Editor:
            return editor

        return EditorPlan(factory=factory, worker_pool=pool)
    raise ConfigurationError(f"editor kind {kind!r} is not usable for style runs")


def discovery_editor_plan(
    toolchain: Toolchain,
    start: ScoredSequence,
    workers: int = 1,
) -> EditorPlan:
    """Editor factory for discovery runs: callable(combo_idx) -> Editor.

    Mutation histograms and recombination seed sets are taken per target
    combo from the reference members that fall in that combo, falling back
    to the whole reference set when the combo is too thin.
    """
    editor_doc = toolchain.doc.get("editor", {"kind": "random-mutation"})
    kind = editor_doc["kind"]
    members = _reference_members(toolchain.pools)
    combos = combo_constraints(toolchain.partitions)
    by_combo: list[list[ScoredSequence]] = [[] for _ in combos]
    for m in members:
        for ci, combo in enumerate(combos):
            if satisfies(m.attrs, combo):
                by_combo[ci].append(m)
    if kind == "random-mutation":
        if "histogram" in editor_doc:
            fixed = {int(k): float(v) for k, v in editor_doc["histogram"].items()}
            editor = RandomMutationEditor(fixed)

            def factory(combo_idx: int) -> Editor:
                return editor

            return EditorPlan(factory=factory)
        global_hist = _distance_histogram(members, start)
        editors: list[Editor] = []
        for ci in range(len(combos)):
            local = by_combo[ci]
            hist = _distance_histogram(local, start) if len(local) >= 2 else global_hist
            editors.append(RandomMutationEditor(hist))

        def factory(combo_idx: int) -> Editor:
            return editors[combo_idx]

        return EditorPlan(factory=factory)
    if kind == "recombine":
        kappa = float(editor_doc.get("kappa", 0.5))
        fallback = [m.seq for m in members if len(m.seq) == len(start.seq)]
        if len(fallback) < 2:
            raise ConfigurationError("recombine needs at least two reference members")
        editors_by_combo: dict[int, RecombineEditor] = {}

        def factory(combo_idx: int) -> Editor:
            if combo_idx not in editors_by_combo:
                local = [
                    m.seq
                    for m in by_combo[combo_idx]
                    if len(m.seq) == len(start.seq)
                ]
                seed_set = local if len(local) >= 2 else fallback
                editors_by_combo[combo_idx] = RecombineEditor(
                    seed_set,
                    kappa=kappa,
                    seed=derive_seed(toolchain.seed, "editor", combo_idx),
                )
            return editors_by_combo[combo_idx]

        return EditorPlan(factory=factory)
    if kind == "external":
        command, timeout = _editor_command(editor_doc)
        pool = WorkerPool(
            command,
            roles=("editor",),
            attr_ids=toolchain.space.ids,
            size=workers,
            timeout=timeout,
        )
        editor = ExternalEditor(pool)

        def factory(combo_idx: int) -> Editor:
            return editor

        return EditorPlan(factory=factory, worker_pool=pool)
    raise ConfigurationError(f"editor kind {kind!r} is not usable for discovery runs")


# ---------------------------------------------------------------------------
# Campaign assembly


def style_items(
    toolchain: Toolchain, max_items: int | None = None
) -> tuple[list[ScoredSequence], list[VariationPool]]:
    """One test item per group: the member tagged "original" (first member
    otherwise), paired with its own group as the editing pool."""
    items: list[ScoredSequence] = []
    item_pools: list[VariationPool] = []
    for pool in toolchain.pools:
        if not pool.members:
            continue
        item = None
        for member, origin in zip(pool.members, pool.origins):
            if origin == "original":
                item = member
                break
        if item is None:
            item = pool.members[0]
        items.append(item)
        item_pools.append(pool)
        if max_items is not None and len(items) >= max_items:
            break
    if not items:
        raise ConfigurationError("no usable items found in pools")
    return items, item_pools


def discovery_start(toolchain: Toolchain) -> ScoredSequence:
    """The rewrite origin: the member tagged "wild-type", else the first
    member of the first pool."""
    for pool in toolchain.pools:
        for member, origin in zip(pool.members, pool.origins):
            if origin == "wild-type":
                return member
    for pool in toolchain.pools:
        if pool.members:
            return pool.members[0]
    raise ConfigurationError("pools are empty; nothing to start from")


def _episode_kwargs(doc: dict) -> dict:
    episode = dict(doc.get("episode", {}))
    episode.setdefault("strategy", "prioritized")
    episode.setdefault("budget", 5)
    return episode


def build_style_spec(
    toolchain: Toolchain,
    items: list[ScoredSequence],
    overrides: dict | None = None,
) -> CampaignSpec:
    doc = toolchain.doc
    episode = _episode_kwargs(doc)
    campaign = dict(doc.get("campaign", {}))
    overrides = overrides or {}
    if overrides.get("strategy"):
        episode["strategy"] = overrides["strategy"]
    seed = toolchain.seed if overrides.get("seed") is None else int(overrides["seed"])
    echo = {k: v for k, v in doc.items() if k != "__dir__"}
    echo = dict(echo, resolved={"seed": seed, "strategy": episode["strategy"]})
    config = EpisodeConfig(
        strategy=episode["strategy"],
        budget=int(episode.get("budget", 5)),
        hops=int(episode.get("hops", 1)),
        beam=int(episode.get("beam", 1)),
        anchor_conditioning=bool(episode.get("anchor_conditioning", False)),
    )
    return CampaignSpec(
        mode="style",
        seed=seed,
        space=toolchain.space,
        partitions=toolchain.partitions,
        episode=config,
        items=tuple(items),
        bonus_metrics=bool(campaign.get("bonus_metrics", True)),
        config_echo=echo,
    )


def build_discovery_spec(
    toolchain: Toolchain,
    start: ScoredSequence,
    reference: frozenset[str] | None = None,
    overrides: dict | None = None,
) -> CampaignSpec:
    doc = toolchain.doc
    episode = _episode_kwargs(doc)
    campaign = dict(doc.get("campaign", {}))
    overrides = overrides or {}
    if overrides.get("strategy"):
        episode["strategy"] = overrides["strategy"]
    seed = toolchain.seed if overrides.get("seed") is None else int(overrides["seed"])
    if reference is None:
        reference = frozenset(m.seq for m in _reference_members(toolchain.pools))
    echo = {k: v for k, v in doc.items() if k != "__dir__"}
    echo = dict(echo, resolved={"seed": seed, "strategy": episode["strategy"]})
    generation = campaign.get("generation", "walks")
    config = None
    if generation == "walks":
        strategy = episode["strategy"]
        if strategy not in ("random-walk", "priority-walk"):
            strategy = "random-walk"
        hops = max(int(episode.get("hops", 3)), 1)
        config = EpisodeConfig(
            strategy=strategy,
            budget=hops,
            hops=hops,
            beam=int(episode.get("beam", 1)),
        )
    return CampaignSpec(
        mode="discovery",
        seed=seed,
        space=toolchain.space,
        partitions=toolchain.partitions,
        episode=config,
        start=start,
        reference=reference,
        combo_budget=int(campaign.get("combo_budget", 60)),
        generation=generation,
        bonus_metrics=False,
        config_echo=echo,
    )
