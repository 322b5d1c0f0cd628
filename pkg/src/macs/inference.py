"""Multi-step inference strategies under exact budget accounting.

Every strategy drives an editor through scored proposals and reports a full
trace. Rewards in a trace are always computed against the episode start
(including the pairwise similarity bonus), matching the retention rule
R(y_i+1, y_0, C, T) > R(y_i, y_0, C, T). One proposal costs one unit of
budget, whether or not it is valid, accepted, or a duplicate.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

from .attributes import AttributeVector, MultiConstraint, satisfies
from .editors import Editor, EditRequest
from .errors import ConfigurationError, ContractViolation, InputError
from .evaluators import RewardModel, ScoredSequence, Scorer, validate_sequence
from .seeding import derive_seed

logger = logging.getLogger(__name__)

STRATEGIES = ("best-of-n", "naive-chain", "prioritized", "random-walk", "priority-walk")


@dataclass(frozen=True)
class EpisodeConfig:
    strategy: str
    budget: int
    hops: int = 1
    beam: int = 1
    anchor_conditioning: bool = False
    seed: int = 0

    def __post_init__(self) -> None:
        if self.strategy not in STRATEGIES:
            raise ConfigurationError(f"unknown strategy {self.strategy!r}")
        if self.budget < 1:
            raise ConfigurationError("budget must be >= 1")
        if self.hops < 1:
            raise ConfigurationError("hops must be >= 1")
        if self.beam < 1:
            raise ConfigurationError("beam must be >= 1")
        if self.strategy in ("random-walk", "priority-walk") and self.hops > self.budget:
            raise ConfigurationError("walk hops exceed the episode budget")


@dataclass(frozen=True)
class StepRecord:
    step: int
    proposal: str
    attrs: AttributeVector | None
    reward: float | None
    accepted: bool


@dataclass
class EpisodeResult:
    start: ScoredSequence
    trace: list[StepRecord]
    final: ScoredSequence
    satisfied: bool
    budget_used: int


class _Session:
    """Shared bookkeeping for one episode: requests, scoring, the trace."""

    def __init__(
        self,
        editor: Editor,
        scorer: Scorer,
        reward_model: RewardModel,
        start: ScoredSequence,
        constraint: MultiConstraint,
        anchor_conditioning: bool,
        seed: int,
        episode_id: str,
    ):
        self.editor = editor
        self.scorer = scorer
        self.reward_model = reward_model
        self.start = start
        self.constraint = constraint
        self.anchor = start if anchor_conditioning else None
        self.seed = seed
        self.episode_id = episode_id
        self.trace: list[StepRecord] = []
        self.budget_used = 0

    def request(self, current: ScoredSequence, step: int, n: int = 1) -> list[str]:
        req = EditRequest(
            episode_id=self.episode_id,
            context=self.start.context,
            anchor=self.anchor,
            current=current,
            target=self.constraint,
            n_candidates=n,
            seed=derive_seed(self.seed, "step", step),
        )
        candidates = self.editor.propose(req)
        if len(candidates) != n:
            raise ContractViolation(
                f"editor returned {len(candidates)} candidates for n_candidates={n}"
            )
        self.budget_used += n
        return candidates

    def score(self, seq: str) -> tuple[ScoredSequence | None, float | None]:
        """Score one candidate; invalid candidates come back as (None, None)."""
        try:
            validate_sequence(seq, self.start.domain)
            scored = self.scorer.score(seq, context=self.start.context)
        except InputError as exc:
            logger.debug("dropped invalid candidate in %s: %s", self.episode_id, exc)
            return None, None
        reward = self.reward_model.total(scored, self.start, self.constraint)
        return scored, reward

    def record(
        self,
        step: int,
        proposal: str,
        scored: ScoredSequence | None,
        reward: float | None,
        accepted: bool,
    ) -> None:
        attrs = scored.attrs if scored is not None else None
        self.trace.append(StepRecord(step, proposal, attrs, reward, accepted))

    def result(self, final: ScoredSequence) -> EpisodeResult:
        return EpisodeResult(
            start=self.start,
            trace=self.trace,
            final=final,
            satisfied=satisfies(final.attrs, self.constraint),
            budget_used=self.budget_used,
        )


def best_of_n(
    editor: Editor,
    scorer: Scorer,
    reward_model: RewardModel,
    start: ScoredSequence,
    constraint: MultiConstraint,
    n: int,
    *,
    anchor_conditioning: bool = False,
    seed: int = 0,
    episode_id: str = "",
) -> EpisodeResult:
    """N independent proposals from the start; the final is the highest-reward
    valid candidate, ties going to the earliest proposal."""
    session = _Session(
        editor, scorer, reward_model, start, constraint, anchor_conditioning, seed, episode_id
    )
    if n < 1:
        return session.result(start)
    candidates = session.request(start, step=0, n=n)
    best: ScoredSequence | None = None
    best_reward = float("-inf")
    best_step = -1
    scored_rows = []
    for i, seq in enumerate(candidates):
        scored, reward = session.score(seq)
        scored_rows.append((i, seq, scored, reward))
        if scored is not None and reward > best_reward:
            best, best_reward, best_step = scored, reward, i
    for i, seq, scored, reward in scored_rows:
        session.record(i, seq, scored, reward, accepted=(i == best_step))
    return session.result(best if best is not None else start)


def naive_chain(
    editor: Editor,
    scorer: Scorer,
    reward_model: RewardModel,
    start: ScoredSequence,
    constraint: MultiConstraint,
    steps: int,
    *,
    anchor_conditioning: bool = False,
    seed: int = 0,
    episode_id: str = "",
) -> EpisodeResult:
    """Unconditional sequential editing: every valid proposal becomes the next
    state; the final is the last state. The trace is fully scored for
    reporting, but scores never influence control flow and there is no early
    stop."""
    session = _Session(
        editor, scorer, reward_model, start, constraint, anchor_conditioning, seed, episode_id
    )
    state = start
    for step in range(steps):
        (seq,) = session.request(state, step, 1)
        scored, reward = session.score(seq)
        session.record(step, seq, scored, reward, accepted=scored is not None)
        if scored is not None:
            state = scored
    return session.result(state)


def prioritized(
    editor: Editor,
    scorer: Scorer,
    reward_model: RewardModel,
    start: ScoredSequence,
    constraint: MultiConstraint,
    budget: int,
    *,
    beam: int = 1,
    anchor_conditioning: bool = False,
    seed: int = 0,
    episode_id: str = "",
) -> EpisodeResult:
    """Strict-improvement priority-queue editing.

    The queue is seeded with the start; each iteration pops the highest-reward
    state, requests one proposal from it, pushes the proposal only if its
    reward against the start strictly exceeds the popped state's reward, then
    re-pushes the popped state and truncates the queue to beam+1 entries.
    Stops when the budget is spent or the queue maximum satisfies the
    constraint. Reward ties rank by earlier insertion.
    """
    if beam < 1:
        raise ConfigurationError("beam must be >= 1")
    session = _Session(
        editor, scorer, reward_model, start, constraint, anchor_conditioning, seed, episode_id
    )
    start_reward = reward_model.total(start, start, constraint)
    # Entries: (reward, insertion index, state). Max = highest reward, then
    # earliest insertion.
    entries: list[tuple[float, int, ScoredSequence]] = [(start_reward, 0, start)]
    counter = 1

    def best_entry() -> tuple[float, int, ScoredSequence]:
        return max(entries, key=lambda e: (e[0], -e[1]))

    if satisfies(start.attrs, constraint):
        return session.result(start)
    step = 0
    while session.budget_used < budget:
        popped = best_entry()
        entries.remove(popped)
        (seq,) = session.request(popped[2], step, 1)
        scored, reward = session.score(seq)
        accepted = scored is not None and reward > popped[0]
        session.record(step, seq, scored, reward, accepted)
        step += 1
        if accepted:
            entries.append((reward, counter, scored))
            counter += 1
        entries.append(popped)
        entries.sort(key=lambda e: (-e[0], e[1]))
        del entries[beam + 1 :]
        if satisfies(best_entry()[2].attrs, constraint):
            break
    return session.result(best_entry()[2])


def random_walk(
    editor: Editor,
    scorer: Scorer,
    reward_model: RewardModel,
    start: ScoredSequence,
    constraint: MultiConstraint,
    hops: int,
    *,
    anchor_conditioning: bool = False,
    seed: int = 0,
    episode_id: str = "",
) -> EpisodeResult:
    """Unconditional hops from the start; consumes exactly ``hops`` budget and
    never stops early. Every proposal lands in the trace as a discovery
    candidate."""
    session = _Session(
        editor, scorer, reward_model, start, constraint, anchor_conditioning, seed, episode_id
    )
    state = start
    for hop in range(hops):
        (seq,) = session.request(state, hop, 1)
        scored, reward = session.score(seq)
        session.record(hop, seq, scored, reward, accepted=scored is not None)
        if scored is not None:
            state = scored
    return session.result(state)


def priority_walk(
    editor: Editor,
    scorer: Scorer,
    reward_model: RewardModel,
    start: ScoredSequence,
    constraint: MultiConstraint,
    hops: int,
    *,
    anchor_conditioning: bool = False,
    seed: int = 0,
    episode_id: str = "",
) -> EpisodeResult:
    """Hops that only move when the reward against the start strictly
    improves; a rejected hop retries from the unchanged state at the next hop
    with a freshly derived seed. Consumes exactly ``hops`` budget; rejected
    proposals still land in the trace as discovery candidates."""
    session = _Session(
        editor, scorer, reward_model, start, constraint, anchor_conditioning, seed, episode_id
    )
    state = start
    state_reward = reward_model.total(start, start, constraint)
    for hop in range(hops):
        (seq,) = session.request(state, hop, 1)
        scored, reward = session.score(seq)
        accepted = scored is not None and reward > state_reward
        session.record(hop, seq, scored, reward, accepted)
        if accepted:
            state, state_reward = scored, reward
    return session.result(state)


def run_episode(
    editor: Editor,
    scorer: Scorer,
    reward_model: RewardModel,
    start: ScoredSequence,
    constraint: MultiConstraint,
    config: EpisodeConfig,
    episode_id: str = "",
) -> EpisodeResult:
    """Dispatch one episode per the config."""
    common = dict(
        anchor_conditioning=config.anchor_conditioning,
        seed=config.seed,
        episode_id=episode_id,
    )
    if config.strategy == "best-of-n":
        return best_of_n(
            editor, scorer, reward_model, start, constraint, config.budget, **common
        )
    if config.strategy == "naive-chain":
        return naive_chain(
            editor, scorer, reward_model, start, constraint, config.budget, **common
        )
    if config.strategy == "prioritized":
        return prioritized(
            editor,
            scorer,
            reward_model,
            start,
            constraint,
            config.budget,
            beam=config.beam,
            **common,
        )
    if config.strategy == "random-walk":
        return random_walk(
            editor, scorer, reward_model, start, constraint, config.hops, **common
        )
    return priority_walk(
        editor, scorer, reward_model, start, constraint, config.hops, **common
    )


def trace_records(episode_id: str, result: EpisodeResult) -> list[dict]:
    """Serializable audit records, one per step, in trace order."""
    from .evaluators import sequence_digest

    rows = []
    for record in result.trace:
        rows.append(
            {
                "episode_id": episode_id,
                "step": record.step,
                "proposal_digest": sequence_digest(record.proposal),
                "attrs": list(record.attrs) if record.attrs is not None else None,
                "reward": record.reward,
                "accepted": record.accepted,
            }
        )
    return rows
