"""The editor contract and built-in baseline editors.

An editor proposes rewrites of the current sequence given an optional
context, the current attribute location, and the target constraint. The
built-ins here are model-free baselines: a pool oracle standing in for a
trained rewriter, random substitution mutations driven by a reference
edit-distance histogram, and per-position parent recombination.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .attributes import AttributeSpace, MultiConstraint, satisfaction_sum
from .errors import ConfigurationError, ContractViolation
from .evaluators import AMINO_ACIDS, ScoredSequence
from .pairs import VariationPool

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EditRequest:
    """One editing call: everything an editor may condition on."""

    episode_id: str
    context: str
    anchor: ScoredSequence | None
    current: ScoredSequence
    target: MultiConstraint
    n_candidates: int
    seed: int

    def __post_init__(self) -> None:
        if self.n_candidates < 1:
            raise ContractViolation("n_candidates must be >= 1")


@dataclass(frozen=True)
class EditorConfig:
    """Declarative editor description used by the config layer."""

    kind: str  # pool-oracle | random-mutation | recombine | external
    p: float = 1.0
    histogram: tuple[tuple[int, float], ...] = ()
    kappa: float = 0.5
    command: tuple[str, ...] = ()
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in ("pool-oracle", "random-mutation", "recombine", "external"):
            raise ConfigurationError(f"unknown editor kind {self.kind!r}")
        if not 0.0 <= self.p <= 1.0:
            raise ConfigurationError("oracle improvement probability p must be in [0,1]")
        if not 0.0 <= self.kappa <= 1.0:
            raise ConfigurationError("recombination rate kappa must be in [0,1]")
        if self.histogram:
            total = sum(w for _, w in self.histogram)
            if not math.isclose(total, 1.0, rel_tol=0, abs_tol=1e-9):
                raise ConfigurationError(f"histogram weights sum to {total}, not 1")
            if any(d < 0 or w < 0 for d, w in self.histogram):
                raise ConfigurationError("histogram entries must be non-negative")


class Editor:
    """Editor interface; see ``propose``."""

    name = "editor"

    def propose(self, request: EditRequest) -> list[str]:
        """Return exactly ``request.n_candidates`` candidate sequences."""
        raise NotImplementedError


class PoolOracleEditor(Editor):
    """Draws proposals from a fixed pool, preferring members that improve the
    satisfaction-score sum over the current sequence with probability p.

    A stand-in for a trained rewriter: p controls how often it behaves like
    an informed editor versus a uniform paraphraser.
    """

    name = "pool-oracle"

    def __init__(self, members: Sequence[ScoredSequence], space: AttributeSpace, p: float):
        if not members:
            raise ConfigurationError("pool oracle needs at least one member")
        if not 0.0 <= p <= 1.0:
            raise ConfigurationError("p must be in [0,1]")
        self.members = tuple(members)
        self.space = space
        self.p = p
        self._sums: dict[MultiConstraint, np.ndarray] = {}

    def _sums_for(self, constraint: MultiConstraint) -> np.ndarray:
        cached = self._sums.get(constraint)
        if cached is None:
            cached = np.array(
                [satisfaction_sum(m.attrs, constraint, self.space) for m in self.members]
            )
            self._sums[constraint] = cached
        return cached

    def propose(self, request: EditRequest) -> list[str]:
        rng = np.random.default_rng(request.seed)
        sums = self._sums_for(request.target)
        current_sum = satisfaction_sum(
            request.current.attrs, request.target, self.space
        )
        improving = np.nonzero(sums > current_sum)[0]
        out = []
        for _ in range(request.n_candidates):
            if improving.size and rng.random() < self.p:
                pick = int(improving[int(rng.integers(improving.size))])
            else:
                pick = int(rng.integers(len(self.members)))
            out.append(self.members[pick].seq)
        return out


def pool_oracle_propose(
    pool: VariationPool,
    request: EditRequest,
    p: float,
    space: AttributeSpace,
) -> list[str]:
    return PoolOracleEditor(pool.members, space, p).propose(request)


class RandomMutationEditor(Editor):
    """Substitution mutations with the edit count drawn from a histogram.

    The histogram is typically the edit-distance-from-start distribution of
    a reference sequence set. Each candidate substitutes d distinct uniform
    positions with uniform non-identical letters, preserving length.
    """

    name = "random-mutation"

    def __init__(
        self, histogram: dict[int, float] | Sequence[tuple[int, float]], alphabet: str = AMINO_ACIDS
    ):
        items = sorted(dict(histogram).items())
        if not items:
            raise ConfigurationError("empty mutation histogram")
        total = sum(w for _, w in items)
        if not math.isclose(total, 1.0, rel_tol=0, abs_tol=1e-9):
            raise ConfigurationError(f"histogram weights sum to {total}, not 1")
        if any(d < 0 or w < 0 for d, w in items):
            raise ConfigurationError("histogram entries must be non-negative")
        if len(alphabet) < 2:
            raise ConfigurationError("alphabet needs at least two letters")
        self.distances = np.array([d for d, _ in items], dtype=int)
        self.weights = np.array([w for _, w in items], dtype=float)
        self.alphabet = alphabet

    def propose(self, request: EditRequest) -> list[str]:
        rng = np.random.default_rng(request.seed)
        seq = request.current.seq
        out = []
        for _ in range(request.n_candidates):
            d = int(self.distances[int(rng.choice(len(self.distances), p=self.weights))])
            d = min(d, len(seq))
            positions = rng.choice(len(seq), size=d, replace=False)
            letters = list(seq)
            for pos in positions:
                pos = int(pos)
                others = [a for a in self.alphabet if a != seq[pos]]
                letters[pos] = others[int(rng.integers(len(others)))]
            out.append("".join(letters))
        return out


def random_mutation_propose(
    reference_histogram: dict[int, float], request: EditRequest, alphabet: str = AMINO_ACIDS
) -> list[str]:
    return RandomMutationEditor(reference_histogram, alphabet).propose(request)


def recombine_propose(
    parent_a: str, parent_b: str, kappa: float, rng: np.random.Generator
) -> tuple[str, str]:
    """Swap letters between two equal-length parents position-wise at rate kappa.

    Offspring one takes parent_b's letter wherever the coin fires, parent_a's
    elsewhere; offspring two is the exact complement, so together they
    conserve the per-position letter multiset.
    """
    if len(parent_a) != len(parent_b):
        raise ContractViolation(
            f"parents differ in length ({len(parent_a)} vs {len(parent_b)})"
        )
    if not 0.0 <= kappa <= 1.0:
        raise ConfigurationError("kappa must be in [0,1]")
    swap = rng.random(len(parent_a)) < kappa
    off1 = "".join(b if s else a for a, b, s in zip(parent_a, parent_b, swap))
    off2 = "".join(a if s else b for a, b, s in zip(parent_a, parent_b, swap))
    return off1, off2


class RecombineEditor(Editor):
    """Recombines parents drawn from a seeded shuffle of a seed set.

    The parent stream is stateful: parents are consumed two at a time from a
    shuffled copy of the seed set, reshuffling when exhausted. Outputs are
    deterministic given the construction seed and the sequence of calls.
    """

    name = "recombine"

    def __init__(self, seed_set: Sequence[str], kappa: float, seed: int):
        if len(seed_set) < 2:
            raise ConfigurationError("recombination needs at least two seed sequences")
        lengths = {len(s) for s in seed_set}
        if len(lengths) != 1:
            raise ConfigurationError("seed sequences must share one length")
        if not 0.0 <= kappa <= 1.0:
            raise ConfigurationError("kappa must be in [0,1]")
        self.seed_set = tuple(seed_set)
        self.kappa = kappa
        self._rng = np.random.default_rng(seed)
        self._order: list[int] = []
        self._pending: list[str] = []

    def _next_parents(self) -> tuple[str, str]:
        if len(self._order) < 2:
            self._order = [int(i) for i in self._rng.permutation(len(self.seed_set))]
        a = self.seed_set[self._order.pop(0)]
        b = self.seed_set[self._order.pop(0)]
        return a, b

    def propose(self, request: EditRequest) -> list[str]:
        out: list[str] = []
        while len(out) < request.n_candidates:
            if self._pending:
                out.append(self._pending.pop(0))
                continue
            a, b = self._next_parents()
            off1, off2 = recombine_propose(a, b, self.kappa, self._rng)
            out.append(off1)
            self._pending.append(off2)
        return out


class ScriptedEditor(Editor):
    """Fixture editor replaying a fixed list of candidate sequences."""

    name = "scripted"

    def __init__(self, candidates: Sequence[str], cycle: bool = True):
        if not candidates:
            raise ConfigurationError("scripted editor needs candidates")
        self.candidates = list(candidates)
        self.cycle = cycle
        self._cursor = 0

    def propose(self, request: EditRequest) -> list[str]:
        out = []
        for _ in range(request.n_candidates):
            if self._cursor >= len(self.candidates):
                if not self.cycle:
                    raise ContractViolation("scripted editor exhausted")
                self._cursor = 0
            out.append(self.candidates[self._cursor])
            self._cursor += 1
        return out


class RecordingEditor(Editor):
    """Wraps another editor, recording every request (for plumbing tests)."""

    name = "recording"

    def __init__(self, inner: Editor):
        self.inner = inner
        self.requests: list[EditRequest] = []

    def propose(self, request: EditRequest) -> list[str]:
        self.requests.append(request)
        return self.inner.propose(request)
