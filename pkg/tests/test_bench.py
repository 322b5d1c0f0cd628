"""Campaign runner: budgets, metrics aggregation, report emission."""

from __future__ import annotations

import json

import numpy as np
import pytest

from macs.attributes import AttributePartition, combo_constraints
from macs.bench import (
    ALL_PAIRS_CAP,
    CampaignSpec,
    _matrix,
    discovery_metrics,
    emit_report,
    run_discovery_campaign,
    run_style_campaign,
)
from macs.editors import Editor, RecordingEditor, ScriptedEditor
from macs.errors import ConfigurationError, ContractViolation
from macs.inference import EpisodeConfig
from macs.seeding import derive_seed

from conftest import bare_reward_model, bonus_reward_model, scored, table_scorer


@pytest.fixture
def coarse_partitions(style_space):
    # 2x2 grid: sentiment split at 2.5, complexity split at 0
    return (
        AttributePartition.from_edges(style_space.specs[0], (2.5,)),
        AttributePartition.from_edges(style_space.specs[1], (0.0,)),
    )


@pytest.fixture
def full_partitions(style_space):
    # single full-range window per attribute: exactly one combo
    return (
        AttributePartition.from_edges(style_space.specs[0], ()),
        AttributePartition.from_edges(style_space.specs[1], ()),
    )


CENTERS = [(1.75, -1.0), (1.75, 1.0), (3.75, -1.0), (3.75, 1.0)]
ITEMS = [("the zero", 1.2, -1.8), ("the one", 4.6, 0.5), ("the two", 1.2, -1.8)]


def style_fixture(style_space, coarse_partitions, record=False):
    """3 items x 4 combos, prioritized budget 3.

    Items 0 and 2 start satisfied in combo 0, item 1 in combo 3. For items 0
    and 1 the editor proposes the combo center suffixed with the item's own
    tokens (so the similarity bonus cannot block acceptance); item 2 only
    proposes an unscorable sequence and never satisfies anything new.
    """
    table = {seq: (s, c) for seq, s, c in ITEMS}
    for seq, _, _ in ITEMS[:2]:
        for ci, center in enumerate(CENTERS):
            table[f"{seq} c{ci}"] = center
    scorer = table_scorer(style_space, table)
    rm = bonus_reward_model(style_space)
    items = tuple(scored(style_space, seq, s, c) for seq, s, c in ITEMS)
    spec = CampaignSpec(
        mode="style",
        space=style_space,
        partitions=coarse_partitions,
        episode=EpisodeConfig(strategy="prioritized", budget=3),
        seed=77,
        items=items,
        config_echo={"note": "fixture"},
    )
    recorders: dict[tuple[int, int], RecordingEditor] = {}

    def factory(ii: int, ci: int) -> Editor:
        if ii == 2:
            editor: Editor = ScriptedEditor(["qq qq"])
        else:
            editor = ScriptedEditor([f"{ITEMS[ii][0]} c{ci}"])
        if record:
            editor = RecordingEditor(editor)
            recorders[(ii, ci)] = editor
        return editor

    return spec, factory, scorer, rm, recorders


class TestCampaignSpecValidation:
    def test_max_editor_calls(self, style_space, coarse_partitions, full_partitions):
        items = tuple(scored(style_space, f"i{k}", 3.0, 0.0) for k in range(7))
        style = CampaignSpec(
            mode="style",
            space=style_space,
            partitions=coarse_partitions,
            episode=EpisodeConfig(strategy="prioritized", budget=5),
            seed=0,
            items=items,
        )
        assert style.max_editor_calls() == 7 * 4 * 5
        discovery = CampaignSpec(
            mode="discovery",
            space=style_space,
            partitions=full_partitions,
            episode=EpisodeConfig(strategy="random-walk", budget=3, hops=3),
            seed=0,
            start=scored(style_space, "st", 3.0, 0.0),
            combo_budget=60,
        )
        assert discovery.max_editor_calls() == 1 * 60

    def test_validation_errors(self, style_space, coarse_partitions):
        item = scored(style_space, "i", 3.0, 0.0)
        episode = EpisodeConfig(strategy="prioritized", budget=3)
        with pytest.raises(ConfigurationError):
            CampaignSpec(
                mode="sweep",
                space=style_space,
                partitions=coarse_partitions,
                episode=episode,
                seed=0,
                items=(item,),
            )
        with pytest.raises(ConfigurationError):
            CampaignSpec(
                mode="style",
                space=style_space,
                partitions=coarse_partitions[:1],
                episode=episode,
                seed=0,
                items=(item,),
            )
        with pytest.raises(ConfigurationError):
            CampaignSpec(
                mode="style",
                space=style_space,
                partitions=coarse_partitions,
                episode=episode,
                seed=0,
            )
        with pytest.raises(ConfigurationError):
            CampaignSpec(
                mode="style",
                space=style_space,
                partitions=coarse_partitions,
                episode=None,
                seed=0,
                items=(item,),
            )

    def test_discovery_validation(self, style_space, full_partitions):
        start = scored(style_space, "st", 3.0, 0.0)
        base = dict(
            mode="discovery",
            space=style_space,
            partitions=full_partitions,
            seed=0,
            start=start,
        )
        with pytest.raises(ConfigurationError):
            CampaignSpec(episode=None, combo_budget=0, **base)
        with pytest.raises(ConfigurationError):
            CampaignSpec(episode=None, combo_budget=5, generation="beam", **base)
        with pytest.raises(ConfigurationError):
            # walks need a walk strategy
            CampaignSpec(
                episode=EpisodeConfig(strategy="prioritized", budget=3),
                combo_budget=6,
                **base,
            )
        with pytest.raises(ConfigurationError):
            # budget must be a whole number of walks
            CampaignSpec(
                episode=EpisodeConfig(strategy="random-walk", budget=3, hops=3),
                combo_budget=7,
                **base,
            )
        with pytest.raises(ConfigurationError):
            CampaignSpec(episode=None, combo_budget=5, start=None, **{
                k: v for k, v in base.items() if k != "start"
            })


class TestStyleCampaign:
    def test_metrics_and_budget_audit(self, style_space, coarse_partitions):
        spec, factory, scorer, rm, _ = style_fixture(style_space, coarse_partitions)
        report = run_style_campaign(spec, factory, scorer, rm)
        sat = report.metrics["satisfaction"]
        assert sat["per_combo"] == pytest.approx([1.0, 2 / 3, 2 / 3, 2 / 3])
        assert sat["satisfied_per_combo"] == [3, 2, 2, 2]
        assert sat["mean"] == pytest.approx(0.75)
        assert report.metrics["episodes"] == 12
        assert report.metrics["items"] == 3
        assert report.metrics["satisfied_episodes"] == 9
        assert report.budget["configured_max_calls"] == 3 * 4 * 3
        assert report.budget["editor_calls"] == 15
        assert report.budget["freed_by_early_stop"] == 21
        assert list(report.budget["per_combo"].values()) == [1, 5, 5, 4]
        assert report.combo_labels == [
            "1..2.5;-2..0",
            "1..2.5;0..2",
            "2.5..5;-2..0",
            "2.5..5;0..2",
        ]

    def test_bonus_aggregation_over_satisfying_finals(
        self, style_space, coarse_partitions
    ):
        spec, factory, scorer, rm, _ = style_fixture(style_space, coarse_partitions)
        report = run_style_campaign(spec, factory, scorer, rm)
        # every sequence in play has all-distinct tokens
        assert report.metrics["fluency"]["mean_over_satisfying"] == pytest.approx(1.0)
        assert report.metrics["fluency"]["per_combo"] == pytest.approx([1.0] * 4)
        sim = report.metrics["similarity"]
        assert sim["per_combo"] == pytest.approx([8 / 9, 2 / 3, 2 / 3, 5 / 6])
        assert sim["mean_over_satisfying"] == pytest.approx(7 / 9)

    def test_satisfaction_matrix_is_row_major(self, style_space, coarse_partitions):
        spec, factory, scorer, rm, _ = style_fixture(style_space, coarse_partitions)
        report = run_style_campaign(spec, factory, scorer, rm)
        np.testing.assert_allclose(
            report.matrices["satisfaction"],
            [[1.0, 2 / 3], [2 / 3, 2 / 3]],
        )

    def test_episode_ids_and_seed_derivation(self, style_space, coarse_partitions):
        spec, factory, scorer, rm, recorders = style_fixture(
            style_space, coarse_partitions, record=True
        )
        report = run_style_campaign(spec, factory, scorer, rm)
        assert [eid for eid, _ in report.episodes[:4]] == [
            "combo000-item0000",
            "combo000-item0001",
            "combo000-item0002",
            "combo001-item0000",
        ]
        # item 0, combo 1 spends budget; its first request derives from the
        # campaign seed through the (style, combo, item) chain
        requests = recorders[(0, 1)].requests
        episode_seed = derive_seed(77, "style", 1, 0)
        assert requests[0].seed == derive_seed(episode_seed, "step", 0)
        assert requests[0].episode_id == "combo001-item0000"

    def test_bonus_gate_requires_bonus_evaluators(self, style_space, coarse_partitions):
        spec, factory, scorer, _, _ = style_fixture(style_space, coarse_partitions)
        with pytest.raises(ConfigurationError):
            run_style_campaign(spec, factory, scorer, bare_reward_model(style_space))

    def test_bonus_metrics_can_be_disabled(self, style_space, coarse_partitions):
        spec, factory, scorer, _, _ = style_fixture(style_space, coarse_partitions)
        spec.bonus_metrics = False
        report = run_style_campaign(spec, factory, scorer, bare_reward_model(style_space))
        assert report.metrics["fluency"]["mean_over_satisfying"] is None
        assert report.metrics["fluency"]["per_combo"] == [None] * 4

    def test_workers_do_not_change_results(self, style_space, coarse_partitions):
        reports = []
        for workers in (1, 4):
            spec, factory, scorer, rm, _ = style_fixture(style_space, coarse_partitions)
            reports.append(run_style_campaign(spec, factory, scorer, rm, workers=workers))
        assert reports[0].metrics == reports[1].metrics
        assert reports[0].budget == reports[1].budget
        traces = [
            [(eid, r.trace) for eid, r in rep.episodes] for rep in reports
        ]
        assert traces[0] == traces[1]

    def test_mode_mismatch_rejected(self, style_space, full_partitions):
        spec = CampaignSpec(
            mode="discovery",
            space=style_space,
            partitions=full_partitions,
            episode=EpisodeConfig(strategy="random-walk", budget=3, hops=3),
            seed=0,
            start=scored(style_space, "st", 3.0, 0.0),
            combo_budget=6,
        )
        with pytest.raises(ConfigurationError):
            run_style_campaign(
                spec,
                lambda ii, ci: ScriptedEditor(["x"]),
                table_scorer(style_space, {}),
                bare_reward_model(style_space),
            )


class TestDiscoveryMetrics:
    def test_hand_worked_rates(self, style_space, full_partitions):
        constraint = combo_constraints(full_partitions)[0]
        s1 = scored(style_space, "s1", 3.0, 0.0)
        s2 = scored(style_space, "s2", 3.0, 0.0)
        s3 = scored(style_space, "s3", 3.0, 0.0)
        start = scored(style_space, "st", 3.0, 0.0)
        stats = discovery_metrics(
            [s1, s1, s2, s3],
            constraint,
            frozenset({"s1"}),
            start,
            budget=10,
            invalid=["!!", "!!"],
        )
        assert stats["proposals"] == 6
        assert stats["distinct"] == 4
        assert stats["duplicates"] == 2
        assert stats["successes"] == 3
        assert stats["total_success"] == pytest.approx(0.3)
        assert stats["unique_success"] == pytest.approx(0.2)
        assert stats["edit_distance_from_start"]["count"] == 3
        assert stats["edit_distance_all_pairs"]["count"] == 3
        assert stats["edit_distance_all_pairs"]["subsampled"] is False

    def test_no_reference_means_no_unique_rate(self, style_space, full_partitions):
        constraint = combo_constraints(full_partitions)[0]
        stats = discovery_metrics(
            [scored(style_space, "s1", 3.0, 0.0)],
            constraint,
            None,
            scored(style_space, "st", 3.0, 0.0),
            budget=10,
        )
        assert stats["unique_success"] is None

    def test_budget_validation(self, style_space, full_partitions):
        constraint = combo_constraints(full_partitions)[0]
        with pytest.raises(ContractViolation):
            discovery_metrics([], constraint, None, scored(style_space, "st", 3, 0), 0)

    def test_all_pairs_subsampling_beyond_cap(self, style_space, full_partitions):
        constraint = combo_constraints(full_partitions)[0]
        proposals = [
            scored(style_space, f"s{i}", 3.0, 0.0) for i in range(ALL_PAIRS_CAP + 50)
        ]
        stats = discovery_metrics(
            proposals, constraint, None, scored(style_space, "st", 3.0, 0.0), 500
        )
        assert stats["edit_distance_all_pairs"]["subsampled"] is True
        assert (
            stats["edit_distance_all_pairs"]["count"]
            == ALL_PAIRS_CAP * (ALL_PAIRS_CAP - 1) // 2
        )


def discovery_spec(style_space, full_partitions, **overrides):
    base = dict(
        mode="discovery",
        space=style_space,
        partitions=full_partitions,
        episode=EpisodeConfig(strategy="random-walk", budget=3, hops=3),
        seed=55,
        start=scored(style_space, "st", 1.75, -1.25),
        reference=frozenset({"AA"}),
        combo_budget=6,
        generation="walks",
        bonus_metrics=False,
    )
    base.update(overrides)
    return CampaignSpec(**base)


DISCOVERY_TABLE = {"st": (1.75, -1.25), "AA": (3.0, 0.0), "AB": (1.0, -2.0)}


class TestDiscoveryCampaign:
    def test_walk_generation_metrics(self, style_space, full_partitions):
        spec = discovery_spec(style_space, full_partitions)
        scorer = table_scorer(style_space, DISCOVERY_TABLE)
        report = run_discovery_campaign(
            spec,
            lambda ci: ScriptedEditor(["AA", "AB", "zz"]),
            scorer,
            bare_reward_model(style_space),
        )
        assert [eid for eid, _ in report.episodes] == [
            "combo000-walk00000",
            "combo000-walk00001",
        ]
        assert all(r.budget_used == 3 for _, r in report.episodes)
        total = report.metrics["total_success"]
        assert total["successes_per_combo"] == [2]
        assert total["mean"] == pytest.approx(2 / 6)
        assert report.metrics["unique_success"]["mean"] == pytest.approx(1 / 6)
        assert report.metrics["duplicates"]["total"] == 3
        assert report.metrics["combos"] == 1
        assert report.metrics["combo_budget"] == 6
        assert report.budget["configured_max_calls"] == 6
        assert report.budget["editor_calls"] == 6
        assert report.budget["freed_by_early_stop"] == 0
        from_start = report.metrics["edit_distance_from_start"]["per_combo"][0]
        assert from_start == {"mean": 2.0, "std": 0.0, "count": 2}
        all_pairs = report.metrics["edit_distance_all_pairs"]["per_combo"][0]
        assert all_pairs["mean"] == 1.0 and all_pairs["count"] == 1
        assert report.notes == {}

    def test_walk_seeds_derive_per_walk(self, style_space, full_partitions):
        spec = discovery_spec(style_space, full_partitions)
        scorer = table_scorer(style_space, DISCOVERY_TABLE)
        recorder = RecordingEditor(ScriptedEditor(["AA", "AB", "zz"]))
        run_discovery_campaign(
            spec, lambda ci: recorder, scorer, bare_reward_model(style_space)
        )
        assert len(recorder.requests) == 6
        for walk in range(2):
            walk_seed = derive_seed(55, "discovery", 0, walk)
            for hop in range(3):
                req = recorder.requests[walk * 3 + hop]
                assert req.seed == derive_seed(walk_seed, "step", hop)

    def test_direct_generation_consumes_exact_budget(self, style_space, full_partitions):
        spec = discovery_spec(
            style_space, full_partitions, generation="recombine", episode=None
        )
        scorer = table_scorer(style_space, DISCOVERY_TABLE)
        report = run_discovery_campaign(
            spec,
            lambda ci: ScriptedEditor(["AA", "AB"]),
            scorer,
            bare_reward_model(style_space),
        )
        assert report.budget["editor_calls"] == 6
        assert report.metrics["duplicates"]["total"] == 4
        assert report.metrics["total_success"]["successes_per_combo"] == [2]
        (episode_id, result) = report.episodes[0]
        assert episode_id == "combo000-gen"
        assert len(result.trace) == 6

    def test_unique_generation_loops_past_budget(self, style_space, full_partitions):
        table = {f"u{i}": (3.0, 0.0) for i in range(300)}
        table["st"] = (1.75, -1.25)
        scorer = table_scorer(style_space, table)
        spec = discovery_spec(
            style_space,
            full_partitions,
            generation="unique-recombine",
            episode=None,
            combo_budget=100,
            reference=frozenset(f"u{i}" for i in range(50)),
        )

        class NamedEditor(Editor):
            def __init__(self):
                self.n = 0

            def propose(self, request):
                out = [f"u{self.n + i}" for i in range(request.n_candidates)]
                self.n += request.n_candidates
                return out

        report = run_discovery_campaign(
            spec, lambda ci: NamedEditor(), scorer, bare_reward_model(style_space)
        )
        # 100 decodes yield 50 non-reference sequences; 50 more finish the job
        assert report.budget["editor_calls"] == 150
        assert report.budget["configured_max_calls"] == 100
        assert report.budget["freed_by_early_stop"] == -50
        assert "budget_exemption" in report.notes
        total = report.metrics["total_success"]
        assert total["successes_per_combo"] == [100]
        assert total["mean"] == pytest.approx(1.0)
        assert report.metrics["unique_success"]["mean"] == pytest.approx(1.0)
        assert report.metrics["duplicates"]["total"] == 0
        (_, result) = report.episodes[0]
        seqs = [r.proposal for r in result.trace]
        assert len(seqs) == len(set(seqs)) == 100
        assert not set(seqs) & spec.reference

    def test_unique_generation_guard_trips(self, style_space, full_partitions):
        scorer = table_scorer(style_space, {"same": (3.0, 0.0), "st": (1.75, -1.25)})
        spec = discovery_spec(
            style_space,
            full_partitions,
            generation="unique-recombine",
            episode=None,
            combo_budget=4,
            reference=frozenset(),
        )

        class SameEditor(Editor):
            def propose(self, request):
                return ["same"] * request.n_candidates

        with pytest.raises(ContractViolation):
            run_discovery_campaign(
                spec, lambda ci: SameEditor(), scorer, bare_reward_model(style_space)
            )


class TestEmitReport:
    def style_report(self, style_space, coarse_partitions):
        spec, factory, scorer, rm, _ = style_fixture(style_space, coarse_partitions)
        return run_style_campaign(spec, factory, scorer, rm)

    def test_files_and_summary_key_order(self, tmp_path, style_space, coarse_partitions):
        report = self.style_report(style_space, coarse_partitions)
        written = emit_report(report, tmp_path)
        assert sorted(p.name for p in written) == [
            "audit.json",
            "matrix_fluency.csv",
            "matrix_satisfaction.csv",
            "matrix_similarity.csv",
            "summary.json",
            "traces.jsonl",
        ]
        summary = json.loads((tmp_path / "summary.json").read_text(encoding="utf-8"))
        assert list(summary.keys()) == [
            "mode",
            "seed",
            "attributes",
            "partitions",
            "combo_labels",
            "metrics",
            "budget",
            "notes",
            "config",
        ]
        assert summary["mode"] == "style"
        assert summary["seed"] == 77
        assert summary["config"] == {"note": "fixture"}
        assert summary["attributes"][0] == {"id": "sentiment", "v_min": 1.0, "v_max": 5.0}
        assert summary["partitions"]["complexity"] == [[-2.0, 0.0], [0.0, 2.0]]

    def test_deterministic_bytes_except_audit(
        self, tmp_path, style_space, coarse_partitions
    ):
        report = self.style_report(style_space, coarse_partitions)
        emit_report(report, tmp_path / "a")
        emit_report(report, tmp_path / "b")
        for name in (
            "summary.json",
            "matrix_satisfaction.csv",
            "matrix_fluency.csv",
            "matrix_similarity.csv",
            "traces.jsonl",
        ):
            assert (tmp_path / "a" / name).read_bytes() == (
                tmp_path / "b" / name
            ).read_bytes()
        audit = json.loads((tmp_path / "a" / "audit.json").read_text(encoding="utf-8"))
        assert set(audit.keys()) == {"created", "runtime_seconds", "workers", "budget"}

    def test_matrix_csv_layout(self, tmp_path, style_space, coarse_partitions):
        report = self.style_report(style_space, coarse_partitions)
        emit_report(report, tmp_path)
        lines = (tmp_path / "matrix_satisfaction.csv").read_text(
            encoding="utf-8"
        ).splitlines()
        assert lines[0] == ",-2..0,0..2"
        assert lines[1] == "1..2.5,1,0.6666666667"
        assert lines[2] == "2.5..5,0.6666666667,0.6666666667"

    def test_nan_cells_render_empty(self, tmp_path, style_space, coarse_partitions):
        table = {"bad": (1.2, -1.8)}
        scorer = table_scorer(style_space, table)
        spec = CampaignSpec(
            mode="style",
            space=style_space,
            partitions=coarse_partitions,
            episode=EpisodeConfig(strategy="prioritized", budget=1),
            seed=1,
            items=(scored(style_space, "bad", 1.2, -1.8),),
            bonus_metrics=False,
        )
        report = run_style_campaign(
            spec,
            lambda ii, ci: ScriptedEditor(["qq qq"]),
            scorer,
            bare_reward_model(style_space),
        )
        emit_report(report, tmp_path)
        lines = (tmp_path / "matrix_fluency.csv").read_text(encoding="utf-8").splitlines()
        assert lines[1] == "1..2.5,,"
        assert lines[2] == "2.5..5,,"
        summary = json.loads((tmp_path / "summary.json").read_text(encoding="utf-8"))
        assert summary["metrics"]["fluency"]["per_combo"] == [None] * 4

    def test_traces_are_compact_jsonl(self, tmp_path, style_space, coarse_partitions):
        report = self.style_report(style_space, coarse_partitions)
        emit_report(report, tmp_path)
        content = (tmp_path / "traces.jsonl").read_text(encoding="utf-8")
        lines = content.splitlines()
        assert len(lines) == 15  # one row per editor call
        row = json.loads(lines[0])
        assert set(row.keys()) == {
            "episode_id",
            "step",
            "proposal_digest",
            "attrs",
            "reward",
            "accepted",
        }
        assert '": ' not in content and '", "' not in content

    def test_matrix_helper_is_row_major(self, style_space):
        partitions = (
            AttributePartition.from_edges(style_space.specs[0], (2.5,)),
            AttributePartition.from_edges(style_space.specs[1], (-0.5, 0.5)),
        )
        grid = _matrix([0.0, 1.0, 2.0, 3.0, None, 5.0], partitions)
        np.testing.assert_allclose(grid[0], [0.0, 1.0, 2.0])
        np.testing.assert_allclose(grid[1][:1], [3.0])
        assert np.isnan(grid[1][1])
        assert grid[1][2] == 5.0
        with pytest.raises(ConfigurationError):
            _matrix([0.0], partitions[:1])
