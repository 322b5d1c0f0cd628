"""Seeded synthesis of desk-scale task instances.

The style generator builds variation pools whose members are real token
sequences scored by the toy evaluators, so campaign re-scoring reproduces the
pool attributes exactly. Groups are deliberately skewed: most vary a single
attribute (their edit pairs pile up in the central band of the delta-vector
grid), while a handful of two-member groups carry large offsets in both
attributes at once, creating rare transition cells that uniform pair
sampling tends to miss.

The protein generator builds a wild type plus substitution mutants
concentrated near it, scored by two seeded synthetic landscapes.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .attributes import (
    AttributePartition,
    AttributeSpace,
    AttributeSpec,
)
from .errors import ConfigurationError
from .evaluators import (
    AMINO_ACIDS,
    ProteinAttrEvaluator,
    ProteinLandscape,
    Scorer,
    SENTIMENT_LEXICON,
    ToyComplexityEvaluator,
    ToySentimentEvaluator,
)
from .pairs import VariationPool
from .seeding import derive_seed

STYLE_SENTIMENT_EDGES = (1.5, 2.5, 3.5, 4.5)
STYLE_COMPLEXITY_EDGES = (-1.5, -0.5, 0.5, 1.5)
PROTEIN_FLUOR_EDGES = (3.0, 3.4, 3.7)
PROTEIN_DDG_EDGES = (0.0, 0.5, 2.0)

PROTEIN_FLUOR_RANGE = (1.28, 4.12)
PROTEIN_DDG_RANGE = (-5.66, 60.75)
PROTEIN_FLUOR_BASE = 3.72
PROTEIN_DDG_BASE = 0.0

_NEUTRAL_WORDS = [
    "of", "to", "in", "it", "as", "at", "on", "so", "up", "we",
    "the", "and", "for", "was", "but", "our", "its", "had", "has", "all",
    "one", "two", "few", "out", "who", "yet",
    "this", "that", "with", "from", "were", "they", "them", "then", "when",
    "over", "each", "into", "meal", "food", "wine", "dish", "menu", "room",
    "cost", "time",
    "table", "staff", "place", "drink", "salad", "bread", "sauce", "lunch",
    "price", "hotel", "night", "guest", "plate", "spoon",
    "dinner", "waiter", "coffee", "garlic", "cheese", "butter", "flavor",
    "people", "window", "corner",
    "service", "dessert", "evening", "portion", "seafood", "chicken",
    "booking", "kitchen", "weekend",
    "ambience", "calamari", "tiramisu", "focaccia", "espresso", "entrance",
    "interior",
    "breakfast", "croissant", "reception", "courtyard", "furniture",
    "appetizer", "staircase",
    "atmosphere", "restaurant", "experience", "bruschetta", "background",
    "reservation", "celebration", "anniversary", "hospitality", "furnishings",
    "presentation", "refreshments", "arrangements", "appointments",
]


def _by_length(words: Sequence[str]) -> dict[int, list[str]]:
    table: dict[int, list[str]] = {}
    for word in words:
        table.setdefault(len(word), []).append(word)
    return table


_NEUTRAL_BY_LEN = _by_length(_NEUTRAL_WORDS)
_POS_BY_LEN = _by_length([w for w, p in SENTIMENT_LEXICON.items() if p == 1.0])
_NEG_BY_LEN = _by_length([w for w, p in SENTIMENT_LEXICON.items() if p == -1.0])


def style_space() -> AttributeSpace:
    return AttributeSpace(
        (AttributeSpec("sentiment", 1.0, 5.0), AttributeSpec("complexity", -2.0, 2.0))
    )


def style_partitions(space: AttributeSpace) -> tuple[AttributePartition, ...]:
    return (
        AttributePartition.from_edges(space.specs[0], STYLE_SENTIMENT_EDGES),
        AttributePartition.from_edges(space.specs[1], STYLE_COMPLEXITY_EDGES),
    )


def protein_space() -> AttributeSpace:
    return AttributeSpace(
        (
            AttributeSpec("fluorescence", *PROTEIN_FLUOR_RANGE),
            AttributeSpec("ddg", *PROTEIN_DDG_RANGE),
        )
    )


def protein_partitions(space: AttributeSpace) -> tuple[AttributePartition, ...]:
    return (
        AttributePartition.from_edges(space.specs[0], PROTEIN_FLUOR_EDGES),
        AttributePartition.from_edges(space.specs[1], PROTEIN_DDG_EDGES),
    )


def _pick_word(table: dict[int, list[str]], target_len: float, rng: np.random.Generator) -> str:
    lengths = sorted(table)
    best = min(lengths, key=lambda n: (abs(n - target_len), n))
    options = table[best]
    return options[int(rng.integers(len(options)))]


def _compose(
    rng: np.random.Generator,
    mu: float,
    mean_len: float,
    n_tokens: int = 12,
) -> str:
    """Build a token sequence with mean polarity ~mu and mean length ~mean_len.

    Polarity is quantized to counts of full-strength lexicon words; length is
    matched greedily against a running character budget, neutral fillers
    last because they offer the finest length control.
    """
    polar_count = min(n_tokens, round(abs(mu) * n_tokens))
    polar_table = _POS_BY_LEN if mu >= 0 else _NEG_BY_LEN
    tokens: list[str] = []
    chars_left = mean_len * n_tokens
    slots_left = n_tokens
    for _ in range(polar_count):
        word = _pick_word(polar_table, chars_left / slots_left, rng)
        tokens.append(word)
        chars_left -= len(word)
        slots_left -= 1
    for _ in range(n_tokens - polar_count):
        word = _pick_word(_NEUTRAL_BY_LEN, chars_left / slots_left, rng)
        tokens.append(word)
        chars_left -= len(word)
        slots_left -= 1
    order = rng.permutation(len(tokens))
    return " ".join(tokens[int(i)] for i in order)


# Large double-attribute offsets for the rare diagonal groups, as
# (delta_mu, delta_mean_len): sentiment moves by 2*delta_mu, complexity by
# delta_mean_len/2. All twelve land far from the central band of the
# 10x10 delta grid, and their reversed pairs mirror them.
_DIAGONAL_TARGETS = [
    (1.0, 4.0),
    (1.0, -4.0),
    (1.0, 5.6),
    (1.0, -5.6),
    (4.0 / 3.0, 4.0),
    (4.0 / 3.0, -4.0),
    (4.0 / 3.0, 5.6),
    (4.0 / 3.0, -5.6),
    (5.0 / 3.0, 4.0),
    (5.0 / 3.0, -4.0),
    (5.0 / 3.0, 5.6),
    (5.0 / 3.0, -5.6),
]


def synth_style_pools(
    seed: int,
    groups: int = 60,
    members_per_group: int = 26,
    diagonal_groups: int = 12,
) -> list[VariationPool]:
    """Skewed style pools: single-axis groups plus rare diagonal two-member
    groups. Members are scored through the toy evaluators."""
    if groups < 2:
        raise ConfigurationError("need at least two groups")
    if members_per_group < 2:
        raise ConfigurationError("groups need at least two members")
    if diagonal_groups > len(_DIAGONAL_TARGETS):
        raise ConfigurationError(
            f"at most {len(_DIAGONAL_TARGETS)} diagonal groups are defined"
        )
    space = style_space()
    scorer = Scorer(
        space, (ToySentimentEvaluator(), ToyComplexityEvaluator()), domain="text"
    )
    pools: list[VariationPool] = []
    for g in range(groups):
        rng = np.random.default_rng(derive_seed(seed, "synth-style", "group", g))
        texts: list[str] = []
        if g % 2 == 0:
            # Sentiment axis: polarity sweeps, length nearly fixed.
            base_len = float(rng.uniform(4.8, 7.2))
            for i in range(members_per_group):
                mu = -0.85 + 1.7 * i / (members_per_group - 1)
                length = base_len + float(rng.uniform(-0.3, 0.3))
                texts.append(_compose(rng, mu, length))
        else:
            # Complexity axis: length sweeps, polarity nearly fixed.
            for i in range(members_per_group):
                mu = float(rng.integers(0, 2)) * (1.0 / 12.0) * (
                    1.0 if rng.random() < 0.5 else -1.0
                )
                length = 3.1 + 5.9 * i / (members_per_group - 1)
                texts.append(_compose(rng, mu, length))
        members = tuple(scorer.score_batch(_dedupe(texts, rng)))
        origins = ("original",) + ("variation",) * (len(members) - 1)
        pools.append(VariationPool(f"g{g:03d}", members, origins))
    for d in range(diagonal_groups):
        rng = np.random.default_rng(derive_seed(seed, "synth-style", "diagonal", d))
        delta_mu, delta_len = _DIAGONAL_TARGETS[d]
        center_len = 6.0
        text_a = _compose(rng, -delta_mu / 2.0, center_len - delta_len / 2.0)
        text_b = _compose(rng, +delta_mu / 2.0, center_len + delta_len / 2.0)
        members = tuple(scorer.score_batch(_dedupe([text_a, text_b], rng)))
        pools.append(
            VariationPool(f"d{d:03d}", members, ("original", "variation"))
        )
    return pools


def _dedupe(texts: list[str], rng: np.random.Generator) -> list[str]:
    """Group members must be distinct sequences; nudge duplicates by swapping
    in an unused neutral filler."""
    seen: set[str] = set()
    out: list[str] = []
    flat_neutral = [w for words in _NEUTRAL_BY_LEN.values() for w in words]
    for text in texts:
        candidate = text
        guard = 0
        while candidate in seen:
            tokens = candidate.split()
            pos = int(rng.integers(len(tokens)))
            length = len(tokens[pos])
            options = _NEUTRAL_BY_LEN.get(length, flat_neutral)
            tokens[pos] = options[int(rng.integers(len(options)))]
            candidate = " ".join(tokens)
            guard += 1
            if guard > 200:
                raise ConfigurationError("could not generate distinct members")
        seen.add(candidate)
        out.append(candidate)
    return out


def style_config_doc(seed: int, pool_file: str = "pool.jsonl") -> dict:
    return {
        "seed": seed,
        "domain": "text",
        "attributes": {
            "specs": [
                {"id": "sentiment", "v_min": 1.0, "v_max": 5.0},
                {"id": "complexity", "v_min": -2.0, "v_max": 2.0},
            ],
            "partitions": {
                "sentiment": list(STYLE_SENTIMENT_EDGES),
                "complexity": list(STYLE_COMPLEXITY_EDGES),
            },
        },
        "evaluators": [
            {"id": "sentiment", "kind": "toy-sentiment"},
            {"id": "complexity", "kind": "toy-complexity"},
            {"id": "fluency", "kind": "toy-fluency", "role": "bonus"},
            {"id": "similarity", "kind": "toy-similarity", "role": "bonus"},
        ],
        "pools": [pool_file],
        "editor": {"kind": "pool-oracle", "p": 0.9},
        "episode": {"strategy": "prioritized", "budget": 5},
        "campaign": {"mode": "style"},
        "pairs": {"mode": "knn", "k": 30, "tau": 400, "count": 10000},
        "output": {"dir": "report-style"},
    }


# ---------------------------------------------------------------------------
# Protein synthesis


def protein_landscapes(seed: int, wild_type: str) -> tuple[ProteinLandscape, ProteinLandscape]:
    fluor = ProteinLandscape(
        wild_type,
        seed=derive_seed(seed, "landscape", "fluorescence"),
        coupling_count=8,
        base=PROTEIN_FLUOR_BASE,
        delta_loc=-0.22,
        delta_scale=0.30,
        coupling_scale=0.25,
    )
    ddg = ProteinLandscape(
        wild_type,
        seed=derive_seed(seed, "landscape", "ddg"),
        coupling_count=8,
        base=PROTEIN_DDG_BASE,
        delta_loc=0.9,
        delta_scale=1.1,
        coupling_scale=0.5,
    )
    return fluor, ddg


def protein_scorer(seed: int, wild_type: str) -> Scorer:
    space = protein_space()
    fluor, ddg = protein_landscapes(seed, wild_type)
    return Scorer(
        space,
        (
            ProteinAttrEvaluator("fluorescence", space.specs[0], fluor),
            ProteinAttrEvaluator("ddg", space.specs[1], ddg),
        ),
        domain="protein",
    )


def synth_protein_pool(
    seed: int, mutants: int = 600, length: int = 30
) -> tuple[VariationPool, str]:
    """A wild type plus substitution mutants concentrated near it.

    Returns the pool and the wild-type sequence. Mutation counts follow a
    skewed distribution (mostly one to three substitutions)."""
    if length < 2:
        raise ConfigurationError("protein length must be >= 2")
    rng = np.random.default_rng(derive_seed(seed, "synth-protein"))
    letters = list(AMINO_ACIDS)
    wild_type = "".join(
        letters[int(i)] for i in rng.integers(len(letters), size=length)
    )
    scorer = protein_scorer(seed, wild_type)
    seqs: list[str] = [wild_type]
    seen = {wild_type}
    guard = 0
    while len(seqs) < mutants + 1:
        guard += 1
        if guard > mutants * 50:
            raise ConfigurationError("could not generate enough distinct mutants")
        d = 1 + min(int(rng.poisson(2.0)), 9)
        d = min(d, length)
        positions = rng.choice(length, size=d, replace=False)
        candidate = list(wild_type)
        for pos in positions:
            pos = int(pos)
            others = [a for a in AMINO_ACIDS if a != wild_type[pos]]
            candidate[pos] = others[int(rng.integers(len(others)))]
        seq = "".join(candidate)
        if seq in seen:
            continue
        seen.add(seq)
        seqs.append(seq)
    members = tuple(scorer.score_batch(seqs))
    origins = ("wild-type",) + ("mutant",) * (len(members) - 1)
    return VariationPool("wt-neighborhood", members, origins), wild_type


def protein_config_doc(seed: int, wild_type: str, pool_file: str = "pool.jsonl") -> dict:
    def landscape_params(attr: str, base: float, loc: float, scale: float, cscale: float) -> dict:
        return {
            "wild_type": wild_type,
            "landscape_seed": derive_seed(seed, "landscape", attr),
            "coupling_count": 8,
            "base": base,
            "delta_loc": loc,
            "delta_scale": scale,
            "coupling_scale": cscale,
        }

    return {
        "seed": seed,
        "domain": "protein",
        "attributes": {
            "specs": [
                {
                    "id": "fluorescence",
                    "v_min": PROTEIN_FLUOR_RANGE[0],
                    "v_max": PROTEIN_FLUOR_RANGE[1],
                },
                {"id": "ddg", "v_min": PROTEIN_DDG_RANGE[0], "v_max": PROTEIN_DDG_RANGE[1]},
            ],
            "partitions": {
                "fluorescence": list(PROTEIN_FLUOR_EDGES),
                "ddg": list(PROTEIN_DDG_EDGES),
            },
        },
        "evaluators": [
            {
                "id": "fluorescence",
                "kind": "toy-protein",
                "params": landscape_params(
                    "fluorescence", PROTEIN_FLUOR_BASE, -0.22, 0.30, 0.25
                ),
            },
            {
                "id": "ddg",
                "kind": "toy-protein",
                "params": landscape_params("ddg", PROTEIN_DDG_BASE, 0.9, 1.1, 0.5),
            },
        ],
        "pools": [pool_file],
        "editor": {"kind": "random-mutation"},
        "episode": {"strategy": "priority-walk", "budget": 3, "hops": 3},
        "campaign": {"mode": "discovery", "combo_budget": 60, "generation": "walks"},
        "pairs": {"mode": "window-uniform", "k": 30, "tau": 400, "count": 10000},
        "output": {"dir": "report-protein"},
    }
