"""Inference strategies: budgets, acceptance rules, traces, dispatch."""

from __future__ import annotations

import pytest

from macs.attributes import MultiConstraint, ThresholdWindow
from macs.editors import RecordingEditor, ScriptedEditor
from macs.errors import ConfigurationError, ContractViolation
from macs.evaluators import sequence_digest
from macs.inference import (
    EpisodeConfig,
    best_of_n,
    naive_chain,
    prioritized,
    priority_walk,
    random_walk,
    run_episode,
    trace_records,
)
from macs.seeding import derive_seed

from conftest import bare_reward_model, scored, table_scorer

CONSTRAINT = MultiConstraint(
    (
        ThresholdWindow("sentiment", 2.5, 3.5),
        ThresholdWindow("complexity", -0.5, 0.5),
    )
)

# rewards against "start" under CONSTRAINT (no bonus evaluators):
#   start 1.0, a 7/3, b 3.0 (satisfies), c -1.0, d 3.0 (satisfies)
TABLE = {
    "start": (1.75, -1.25),
    "a": (2.0, 0.0),
    "b": (3.0, 0.0),
    "c": (1.0, -2.0),
    "d": (2.5, -0.5),
}
R_START = 1.0
R_A = (2 * (2 / 3) - 0.5) + (2 * 1.0 - 0.5)
R_B = 3.0


@pytest.fixture
def harness(style_space):
    scorer = table_scorer(style_space, TABLE)
    rm = bare_reward_model(style_space)
    start = scored(style_space, "start", 1.75, -1.25)
    return scorer, rm, start


class TestNaiveChain:
    def test_every_valid_proposal_becomes_state(self, harness):
        scorer, rm, start = harness
        editor = RecordingEditor(ScriptedEditor(["a", "zz", "b", "c"]))
        result = naive_chain(editor, scorer, rm, start, CONSTRAINT, 4)
        assert result.final.seq == "c"
        assert result.budget_used == 4
        assert not result.satisfied
        assert [r.accepted for r in result.trace] == [True, False, True, True]
        assert [r.reward for r in result.trace] == [
            pytest.approx(R_A),
            None,
            pytest.approx(R_B),
            pytest.approx(-1.0),
        ]
        # invalid proposal leaves the state unchanged
        assert [req.current.seq for req in editor.requests] == ["start", "a", "a", "b"]

    def test_no_early_stop_even_when_satisfied(self, harness):
        scorer, rm, start = harness
        editor = ScriptedEditor(["b", "c"])
        result = naive_chain(editor, scorer, rm, start, CONSTRAINT, 2)
        assert result.final.seq == "c"
        assert result.budget_used == 2


class TestPrioritized:
    def test_hand_worked_episode(self, harness):
        scorer, rm, start = harness
        editor = RecordingEditor(ScriptedEditor(["a", "c", "b"]))
        result = prioritized(editor, scorer, rm, start, CONSTRAINT, 5)
        assert result.final.seq == "b"
        assert result.satisfied
        # early stop on satisfaction: 3 of 5 proposals spent
        assert result.budget_used == 3
        assert [r.accepted for r in result.trace] == [True, False, True]
        # the rejected proposal is retried from the queue maximum, not from c
        assert [req.current.seq for req in editor.requests] == ["start", "a", "a"]

    def test_accepted_rewards_strictly_increase(self, harness):
        scorer, rm, start = harness
        editor = ScriptedEditor(["c", "a", "c", "d", "b"])
        result = prioritized(editor, scorer, rm, start, CONSTRAINT, 5)
        accepted = [r.reward for r in result.trace if r.accepted]
        assert accepted == sorted(accepted)
        assert len(set(accepted)) == len(accepted)

    def test_satisfied_start_costs_nothing(self, style_space, harness):
        scorer, rm, _ = harness
        happy = scored(style_space, "b", 3.0, 0.0)
        editor = RecordingEditor(ScriptedEditor(["a"]))
        result = prioritized(editor, scorer, rm, happy, CONSTRAINT, 5)
        assert result.final.seq == "b"
        assert result.satisfied
        assert result.budget_used == 0
        assert result.trace == []
        assert editor.requests == []

    def test_final_is_queue_maximum_without_early_stop(self, harness):
        scorer, rm, start = harness
        # never reaches a satisfying state; budget runs out
        editor = ScriptedEditor(["a", "c", "c"])
        result = prioritized(editor, scorer, rm, start, CONSTRAINT, 3)
        assert result.final.seq == "a"
        assert not result.satisfied
        assert result.budget_used == 3

    def test_beam_validation(self, harness):
        scorer, rm, start = harness
        with pytest.raises(ConfigurationError):
            prioritized(ScriptedEditor(["a"]), scorer, rm, start, CONSTRAINT, 1, beam=0)


class TestBestOfN:
    def test_single_batched_request(self, harness):
        scorer, rm, start = harness
        editor = RecordingEditor(ScriptedEditor(["a", "zz", "b", "d", "c"]))
        result = best_of_n(editor, scorer, rm, start, CONSTRAINT, 5)
        assert len(editor.requests) == 1
        assert editor.requests[0].n_candidates == 5
        assert editor.requests[0].current.seq == "start"
        assert result.budget_used == 5
        # b and d tie at reward 3.0; the earlier proposal wins
        assert result.final.seq == "b"
        assert [r.accepted for r in result.trace] == [False, False, True, False, False]
        assert result.satisfied

    def test_all_invalid_returns_start(self, harness):
        scorer, rm, start = harness
        result = best_of_n(ScriptedEditor(["zz", "yy"]), scorer, rm, start, CONSTRAINT, 2)
        assert result.final.seq == "start"
        assert not result.satisfied
        assert all(not r.accepted for r in result.trace)
        assert all(r.reward is None for r in result.trace)

    def test_zero_budget_spends_nothing(self, harness):
        scorer, rm, start = harness
        result = best_of_n(ScriptedEditor(["a"]), scorer, rm, start, CONSTRAINT, 0)
        assert result.final.seq == "start"
        assert result.budget_used == 0
        assert result.trace == []


class TestWalks:
    def test_random_walk_consumes_exact_hops(self, harness):
        scorer, rm, start = harness
        editor = RecordingEditor(ScriptedEditor(["a", "zz", "c"]))
        result = random_walk(editor, scorer, rm, start, CONSTRAINT, 3)
        assert result.budget_used == 3
        assert result.final.seq == "c"
        assert [r.accepted for r in result.trace] == [True, False, True]
        assert [req.current.seq for req in editor.requests] == ["start", "a", "a"]

    def test_random_walk_ignores_reward(self, harness):
        scorer, rm, start = harness
        # moves to c despite the reward drop
        result = random_walk(ScriptedEditor(["b", "c"]), scorer, rm, start, CONSTRAINT, 2)
        assert result.final.seq == "c"

    def test_priority_walk_moves_only_on_strict_improvement(self, harness):
        scorer, rm, start = harness
        editor = RecordingEditor(ScriptedEditor(["a", "c", "b", "d"]))
        result = priority_walk(editor, scorer, rm, start, CONSTRAINT, 4)
        assert result.final.seq == "b"
        assert result.budget_used == 4
        # d ties b at 3.0: not a strict improvement, so it is rejected
        assert [r.accepted for r in result.trace] == [True, False, True, False]
        assert [req.current.seq for req in editor.requests] == ["start", "a", "a", "b"]


class TestSessionPlumbing:
    def test_step_seeds_derive_from_episode_seed(self, harness):
        scorer, rm, start = harness
        editor = RecordingEditor(ScriptedEditor(["a", "b", "c"]))
        naive_chain(editor, scorer, rm, start, CONSTRAINT, 3, seed=99)
        assert [req.seed for req in editor.requests] == [
            derive_seed(99, "step", i) for i in range(3)
        ]

    def test_episode_id_and_context_forwarded(self, style_space, harness):
        scorer, rm, _ = harness
        start = scored(style_space, "start", 1.75, -1.25, context="warm tone")
        editor = RecordingEditor(ScriptedEditor(["a"]))
        naive_chain(editor, scorer, rm, start, CONSTRAINT, 1, episode_id="ep-7")
        (req,) = editor.requests
        assert req.episode_id == "ep-7"
        assert req.context == "warm tone"

    def test_anchor_conditioning_toggle(self, harness):
        scorer, rm, start = harness
        on = RecordingEditor(ScriptedEditor(["a", "b"]))
        naive_chain(on, scorer, rm, start, CONSTRAINT, 2, anchor_conditioning=True)
        assert all(req.anchor is not None for req in on.requests)
        assert all(req.anchor.seq == "start" for req in on.requests)
        off = RecordingEditor(ScriptedEditor(["a", "b"]))
        naive_chain(off, scorer, rm, start, CONSTRAINT, 2)
        assert all(req.anchor is None for req in off.requests)

    def test_candidate_count_mismatch_is_a_contract_violation(self, harness):
        scorer, rm, start = harness

        class Short(ScriptedEditor):
            def propose(self, request):
                return []

        with pytest.raises(ContractViolation):
            naive_chain(Short(["a"]), scorer, rm, start, CONSTRAINT, 1)


class TestRunEpisode:
    @pytest.mark.parametrize(
        "strategy,script",
        [
            ("best-of-n", ["a", "b", "c"]),
            ("naive-chain", ["a", "b", "c"]),
            ("prioritized", ["a", "c", "b"]),
        ],
    )
    def test_budget_strategies_dispatch(self, harness, strategy, script):
        scorer, rm, start = harness
        config = EpisodeConfig(strategy=strategy, budget=3, seed=5)
        via_config = run_episode(
            ScriptedEditor(script), scorer, rm, start, CONSTRAINT, config
        )
        direct_fn = {
            "best-of-n": best_of_n,
            "naive-chain": naive_chain,
            "prioritized": prioritized,
        }[strategy]
        direct = direct_fn(
            ScriptedEditor(script), scorer, rm, start, CONSTRAINT, 3, seed=5
        )
        assert via_config.final.seq == direct.final.seq
        assert via_config.budget_used == direct.budget_used
        assert via_config.trace == direct.trace

    @pytest.mark.parametrize("strategy", ["random-walk", "priority-walk"])
    def test_walk_strategies_use_hops(self, harness, strategy):
        scorer, rm, start = harness
        config = EpisodeConfig(strategy=strategy, budget=10, hops=2, seed=1)
        result = run_episode(
            ScriptedEditor(["a", "b"]), scorer, rm, start, CONSTRAINT, config
        )
        assert result.budget_used == 2

    def test_config_validation(self):
        with pytest.raises(ConfigurationError):
            EpisodeConfig(strategy="hill-climb", budget=1)
        with pytest.raises(ConfigurationError):
            EpisodeConfig(strategy="prioritized", budget=0)
        with pytest.raises(ConfigurationError):
            EpisodeConfig(strategy="prioritized", budget=1, hops=0)
        with pytest.raises(ConfigurationError):
            EpisodeConfig(strategy="prioritized", budget=1, beam=0)
        with pytest.raises(ConfigurationError):
            EpisodeConfig(strategy="random-walk", budget=2, hops=3)
        # hops may exceed budget for non-walk strategies
        EpisodeConfig(strategy="prioritized", budget=2, hops=3)


class TestTraceRecords:
    def test_rows_carry_digests_and_attrs(self, harness):
        scorer, rm, start = harness
        result = naive_chain(
            ScriptedEditor(["a", "zz"]), scorer, rm, start, CONSTRAINT, 2
        )
        rows = trace_records("ep-1", result)
        assert [row["step"] for row in rows] == [0, 1]
        assert all(row["episode_id"] == "ep-1" for row in rows)
        assert rows[0]["proposal_digest"] == sequence_digest("a")
        assert rows[0]["attrs"] == [2.0, 0.0]
        assert rows[0]["reward"] == pytest.approx(R_A)
        assert rows[0]["accepted"] is True
        assert rows[1]["attrs"] is None
        assert rows[1]["reward"] is None
        assert rows[1]["accepted"] is False
