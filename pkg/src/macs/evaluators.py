"""Attribute evaluators: the contract, deterministic toy implementations for
desk-scale runs, pairwise bonus evaluators, and result caching.

Batch evaluation is the primitive (external regressors are batch-efficient);
single evaluation is a batch of one. Every built-in evaluator is deterministic
and uses fixed-order summation, so identical inputs give bit-identical values.
"""

from __future__ import annotations

import hashlib
import logging
import threading
from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from .attributes import (
    AttributeSpace,
    AttributeSpec,
    AttributeVector,
    MultiConstraint,
    satisfaction_sum,
    satisfies,
    total_reward,
)
from .errors import ConfigurationError, ContractViolation, InputError

logger = logging.getLogger(__name__)

AMINO_ACIDS = "ACDEFGHIKLMNPQRSTVWY"
AA_INDEX = {aa: i for i, aa in enumerate(AMINO_ACIDS)}

UNIT_RANGE = AttributeSpec("unit", 0.0, 1.0)


def sequence_digest(seq: str) -> str:
    """Stable content digest of the raw sequence string (sha256 hex)."""
    return hashlib.sha256(seq.encode("utf-8")).hexdigest()


def validate_sequence(seq: str, domain: str = "text") -> None:
    """Reject sequences the domain cannot score: empty, or bad alphabet."""
    if not seq:
        raise InputError("empty sequence")
    if domain == "protein":
        bad = sorted(set(seq) - set(AMINO_ACIDS))
        if bad:
            raise InputError(f"invalid amino-acid letters {bad!r}")


@dataclass(frozen=True)
class ScoredSequence:
    """A sequence with its cached attribute vector.

    ``context`` carries an optional conditioning string (may be empty) and
    ``domain`` tags the alphabet ("text" or "protein").
    """

    seq: str
    attrs: AttributeVector
    domain: str = "text"
    context: str = ""

    @cached_property
    def digest(self) -> str:
        return sequence_digest(self.seq)


@dataclass(frozen=True)
class EvaluatorSpec:
    """Identity and contract of one evaluator."""

    id: str
    kind: str  # "unary" or "pairwise"
    spec: AttributeSpec
    deterministic: bool = True

    def __post_init__(self) -> None:
        if self.kind not in ("unary", "pairwise"):
            raise ConfigurationError(f"unknown evaluator kind {self.kind!r}")
        if self.kind == "pairwise" and (self.spec.v_min, self.spec.v_max) != (0.0, 1.0):
            raise ConfigurationError(
                f"pairwise evaluator {self.id!r} must report on [0, 1]"
            )


class Evaluator:
    """Unary evaluator: scores a batch of sequences on one attribute."""

    def __init__(self, info: EvaluatorSpec):
        if info.kind != "unary":
            raise ConfigurationError(f"evaluator {info.id!r} is not unary")
        self.info = info

    def score_batch(self, seqs: Sequence[str]) -> list[float]:
        raise NotImplementedError


class PairwiseEvaluator:
    """Pairwise evaluator: scores (a, b) sequence pairs on a [0, 1] range."""

    def __init__(self, info: EvaluatorSpec):
        if info.kind != "pairwise":
            raise ConfigurationError(f"evaluator {info.id!r} is not pairwise")
        self.info = info

    def score_pairs(self, pairs: Sequence[tuple[str, str]]) -> list[float]:
        raise NotImplementedError


class EvaluationCache:
    """Thread-safe map from (evaluator id, sequence digests) to values.

    Values are deterministic, so concurrent writers colliding on a key are
    benign: last write wins with an identical value.
    """

    def __init__(self) -> None:
        self._data: dict[tuple, float] = {}
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._data)

    def get(self, key: tuple) -> float | None:
        with self._lock:
            return self._data.get(key)

    def put(self, key: tuple, value: float) -> None:
        with self._lock:
            self._data[key] = value


def _clamp_logged(spec: AttributeSpec, value: float, evaluator_id: str) -> float:
    clamped = spec.clamp(float(value))
    if clamped != value:
        logger.debug(
            "evaluator %s: clamped %r into [%g, %g]",
            evaluator_id,
            value,
            spec.v_min,
            spec.v_max,
        )
    return clamped


def evaluate_batch(
    evaluator: Evaluator, seqs: Sequence[str], cache: EvaluationCache | None = None
) -> list[float]:
    """Score a batch, going through the cache for deterministic evaluators.

    Returned values are clamped to the evaluator's declared range; the clamp
    happens before caching so cached and fresh paths agree bit-for-bit.
    """
    info = evaluator.info
    results: list[float | None] = [None] * len(seqs)
    miss_idx: list[int] = []
    for i, seq in enumerate(seqs):
        if not seq:
            raise InputError("empty sequence")
        if cache is not None and info.deterministic:
            hit = cache.get((info.id, sequence_digest(seq)))
            if hit is not None:
                results[i] = hit
                continue
        miss_idx.append(i)
    if miss_idx:
        raw = evaluator.score_batch([seqs[i] for i in miss_idx])
        if len(raw) != len(miss_idx):
            raise ContractViolation(
                f"evaluator {info.id!r} returned {len(raw)} values for "
                f"{len(miss_idx)} sequences"
            )
        for i, value in zip(miss_idx, raw):
            value = _clamp_logged(info.spec, value, info.id)
            results[i] = value
            if cache is not None and info.deterministic:
                cache.put((info.id, sequence_digest(seqs[i])), value)
    return [float(v) for v in results]  # type: ignore[arg-type]


def evaluate(evaluator: Evaluator, seq: str, cache: EvaluationCache | None = None) -> float:
    return evaluate_batch(evaluator, [seq], cache)[0]


def evaluate_pair(
    evaluator: PairwiseEvaluator,
    a: str,
    b: str,
    cache: EvaluationCache | None = None,
) -> float:
    info = evaluator.info
    if not a or not b:
        raise InputError("empty sequence")
    key = (info.id, sequence_digest(a), sequence_digest(b))
    if cache is not None and info.deterministic:
        hit = cache.get(key)
        if hit is not None:
            return hit
    value = _clamp_logged(info.spec, evaluator.score_pairs([(a, b)])[0], info.id)
    if cache is not None and info.deterministic:
        cache.put(key, value)
    return value


def external_evaluate(worker, attr_id: str, sequences: Sequence[str]) -> list[float]:
    """Score a batch through an external worker connection.

    ``worker`` is any client exposing ``evaluate(attr_id, sequences)`` (see
    the wire protocol module). Values come back order-preserving; range
    clamping is applied by the evaluate wrappers above when the worker is
    wrapped as an evaluator.
    """
    if not sequences:
        return []
    return worker.evaluate(attr_id, list(sequences))


# ---------------------------------------------------------------------------
# Toy text evaluators


# Polarity lexicon for the toy sentiment evaluator. Word lengths are spread
# within each polarity band so sentiment edits also move the complexity
# evaluator, the way real paraphrases would.
SENTIMENT_LEXICON: dict[str, float] = {
    "good": 1.0,
    "great": 1.0,
    "superb": 1.0,
    "excellent": 1.0,
    "wonderful": 1.0,
    "magnificent": 1.0,
    "fine": 0.5,
    "nice": 0.5,
    "decent": 0.5,
    "pleasant": 0.5,
    "agreeable": 0.5,
    "bad": -1.0,
    "awful": -1.0,
    "horrid": -1.0,
    "terrible": -1.0,
    "atrocious": -1.0,
    "poor": -0.5,
    "weak": -0.5,
    "bland": -0.5,
    "mediocre": -0.5,
    "lackluster": -0.5,
}


def _tokens(seq: str) -> list[str]:
    toks = seq.split()
    if not toks:
        raise InputError("sequence has no tokens")
    return toks


def toy_sentiment(seq: str) -> float:
    """Mean lexicon polarity over all tokens, mapped to [1, 5] as 3 + 2*mu.

    Tokens absent from the lexicon contribute polarity 0.
    """
    toks = _tokens(seq)
    mu = sum(SENTIMENT_LEXICON.get(t.lower(), 0.0) for t in toks) / len(toks)
    return 3.0 + 2.0 * mu


def toy_complexity(seq: str) -> float:
    """Mean token length affinely mapped to [-2, 2].

    Mean length 2 maps to -2 and mean length 10 to 2; outside values clamp.
    """
    toks = _tokens(seq)
    mean_len = sum(len(t) for t in toks) / len(toks)
    value = -2.0 + 4.0 * (mean_len - 2.0) / 8.0
    return min(max(value, -2.0), 2.0)


def toy_similarity(a: str, b: str) -> float:
    """Token-multiset Jaccard similarity in [0, 1]."""
    ca, cb = Counter(_tokens(a)), Counter(_tokens(b))
    inter = sum((ca & cb).values())
    union = sum((ca | cb).values())
    return inter / union


def toy_fluency(seq: str) -> float:
    """Distinct-token ratio in [0, 1], a stand-in unary fluency bonus.

    Degenerate repetition scores low, varied phrasing scores high.
    """
    toks = _tokens(seq)
    return len(set(toks)) / len(toks)


class ToySentimentEvaluator(Evaluator):
    def __init__(self, id: str = "sentiment"):
        super().__init__(EvaluatorSpec(id, "unary", AttributeSpec(id, 1.0, 5.0)))

    def score_batch(self, seqs: Sequence[str]) -> list[float]:
        return [toy_sentiment(s) for s in seqs]


class ToyComplexityEvaluator(Evaluator):
    def __init__(self, id: str = "complexity"):
        super().__init__(EvaluatorSpec(id, "unary", AttributeSpec(id, -2.0, 2.0)))

    def score_batch(self, seqs: Sequence[str]) -> list[float]:
        return [toy_complexity(s) for s in seqs]


class ToyFluencyEvaluator(Evaluator):
    def __init__(self, id: str = "fluency"):
        super().__init__(EvaluatorSpec(id, "unary", AttributeSpec(id, 0.0, 1.0)))

    def score_batch(self, seqs: Sequence[str]) -> list[float]:
        return [toy_fluency(s) for s in seqs]


class ToySimilarityEvaluator(PairwiseEvaluator):
    def __init__(self, id: str = "similarity"):
        super().__init__(EvaluatorSpec(id, "pairwise", AttributeSpec(id, 0.0, 1.0)))

    def score_pairs(self, pairs: Sequence[tuple[str, str]]) -> list[float]:
        return [toy_similarity(a, b) for a, b in pairs]


class ConstantEvaluator(Evaluator):
    """Fixture evaluator returning one constant for every sequence."""

    def __init__(self, id: str, spec: AttributeSpec, value: float):
        super().__init__(EvaluatorSpec(id, "unary", spec))
        self.value = float(value)

    def score_batch(self, seqs: Sequence[str]) -> list[float]:
        return [self.value for _ in seqs]


class TableEvaluator(Evaluator):
    """Fixture evaluator scoring by exact sequence lookup.

    Sequences absent from the table raise InputError, which the inference
    layer treats as an invalid (budget-consuming, unaccepted) proposal."""

    def __init__(self, id: str, spec: AttributeSpec, table: dict[str, float]):
        super().__init__(EvaluatorSpec(id, "unary", spec))
        self.table = dict(table)

    def score_batch(self, seqs: Sequence[str]) -> list[float]:
        try:
            return [float(self.table[s]) for s in seqs]
        except KeyError as exc:
            raise InputError(f"sequence not in table: {exc.args[0]!r}") from exc


# ---------------------------------------------------------------------------
# Synthetic protein landscape


class ProteinLandscape:
    """Deterministic synthetic landscape over fixed-length protein sequences.

    value(seq) = base + sum over positions of M[pos][aa] + coupling terms.
    The substitution table M is zeroed at the wild-type letters, so the
    wild type sits exactly at ``base`` and a single substitution moves the
    value by exactly its table entry. Each coupling holds two per-letter
    tables, also zeroed at wild type, contributing g_p[aa_p] * g_q[aa_q];
    a coupling therefore fires only when both of its positions are mutated.
    """

    def __init__(
        self,
        wild_type: str,
        seed: int,
        coupling_count: int = 0,
        base: float = 0.0,
        delta_loc: float = 0.0,
        delta_scale: float = 1.0,
        coupling_scale: float = 0.5,
    ):
        validate_sequence(wild_type, "protein")
        if coupling_count and len(wild_type) < 2:
            raise ConfigurationError("couplings need at least two positions")
        self.wild_type = wild_type
        self.base = float(base)
        rng = np.random.default_rng(seed)
        length = len(wild_type)
        table = rng.normal(delta_loc, delta_scale, size=(length, len(AMINO_ACIDS)))
        for pos, aa in enumerate(wild_type):
            table[pos, AA_INDEX[aa]] = 0.0
        self.table = table
        couplings: list[tuple[int, int, np.ndarray, np.ndarray]] = []
        for _ in range(coupling_count):
            p, q = sorted(int(x) for x in rng.choice(length, size=2, replace=False))
            g_p = rng.normal(0.0, coupling_scale, size=len(AMINO_ACIDS))
            g_q = rng.normal(0.0, coupling_scale, size=len(AMINO_ACIDS))
            g_p[AA_INDEX[wild_type[p]]] = 0.0
            g_q[AA_INDEX[wild_type[q]]] = 0.0
            couplings.append((p, q, g_p, g_q))
        self.couplings = couplings

    def value(self, seq: str) -> float:
        validate_sequence(seq, "protein")
        if len(seq) != len(self.wild_type):
            raise InputError(
                f"expected length {len(self.wild_type)}, got {len(seq)}"
            )
        total = self.base
        # Wild-type entries are exactly zero, so summing only the mutated
        # positions keeps the arithmetic identical while staying fast.
        for pos, aa in enumerate(seq):
            if aa != self.wild_type[pos]:
                total += float(self.table[pos, AA_INDEX[aa]])
        for p, q, g_p, g_q in self.couplings:
            total += float(g_p[AA_INDEX[seq[p]]]) * float(g_q[AA_INDEX[seq[q]]])
        return total


def toy_protein_attr(seq: str, landscape: ProteinLandscape) -> float:
    """Raw landscape value for ``seq``; range clamping happens evaluator-side."""
    return landscape.value(seq)


class ProteinAttrEvaluator(Evaluator):
    def __init__(self, id: str, spec: AttributeSpec, landscape: ProteinLandscape):
        super().__init__(EvaluatorSpec(id, "unary", spec))
        self.landscape = landscape

    def score_batch(self, seqs: Sequence[str]) -> list[float]:
        return [self.landscape.value(s) for s in seqs]


# ---------------------------------------------------------------------------
# Scoring and reward assembly


@dataclass
class Scorer:
    """Turns raw sequences into ScoredSequences via per-attribute evaluators."""

    space: AttributeSpace
    evaluators: tuple[Evaluator, ...]
    cache: EvaluationCache | None = None
    domain: str = "text"

    def __post_init__(self) -> None:
        ids = tuple(e.info.id for e in self.evaluators)
        if ids != self.space.ids:
            raise ConfigurationError(
                f"evaluator ids {ids} do not match attribute order {self.space.ids}"
            )

    def score(self, seq: str, context: str = "") -> ScoredSequence:
        return self.score_batch([seq], context)[0]

    def score_batch(self, seqs: Sequence[str], context: str = "") -> list[ScoredSequence]:
        for seq in seqs:
            validate_sequence(seq, self.domain)
        columns = [evaluate_batch(e, seqs, self.cache) for e in self.evaluators]
        out = []
        for i, seq in enumerate(seqs):
            attrs = AttributeVector(tuple(col[i] for col in columns))
            out.append(ScoredSequence(seq, attrs, domain=self.domain, context=context))
        return out


@dataclass
class RewardModel:
    """Assembles the total reward with optional bonus components.

    Bonuses enter as raw scores in [0, 1]: each unary bonus is evaluated on
    the new sequence, each pairwise bonus on (new, reference). The reference
    for rewards and pairwise bonuses is whatever ``old`` the caller passes;
    multi-step strategies always pass the episode start.
    """

    space: AttributeSpace
    unary_bonuses: tuple[Evaluator, ...] = ()
    pairwise_bonuses: tuple[PairwiseEvaluator, ...] = ()
    cache: EvaluationCache | None = field(default=None, repr=False)

    def bonuses(self, new: ScoredSequence, old: ScoredSequence) -> list[float]:
        values = [evaluate(ev, new.seq, self.cache) for ev in self.unary_bonuses]
        values += [
            evaluate_pair(ev, new.seq, old.seq, self.cache)
            for ev in self.pairwise_bonuses
        ]
        return values

    def total(
        self, new: ScoredSequence, old: ScoredSequence, constraint: MultiConstraint
    ) -> float:
        return total_reward(
            new.attrs, old.attrs, constraint, self.space, self.bonuses(new, old)
        )

    def satisfaction_sum(self, s: ScoredSequence, constraint: MultiConstraint) -> float:
        return satisfaction_sum(s.attrs, constraint, self.space)

    def satisfies(self, s: ScoredSequence, constraint: MultiConstraint) -> bool:
        return satisfies(s.attrs, constraint)
