"""Shared fixtures: tiny attribute spaces and table-backed scoring stacks."""

from __future__ import annotations

import pytest

from macs.attributes import (
    AttributePartition,
    AttributeSpace,
    AttributeSpec,
    AttributeVector,
)
from macs.evaluators import (
    EvaluationCache,
    RewardModel,
    ScoredSequence,
    Scorer,
    TableEvaluator,
    ToyFluencyEvaluator,
    ToySimilarityEvaluator,
)


@pytest.fixture
def style_space() -> AttributeSpace:
    return AttributeSpace(
        (AttributeSpec("sentiment", 1.0, 5.0), AttributeSpec("complexity", -2.0, 2.0))
    )


@pytest.fixture
def style_partitions(style_space) -> tuple[AttributePartition, ...]:
    return (
        AttributePartition.from_edges(style_space.specs[0], (1.5, 2.5, 3.5, 4.5)),
        AttributePartition.from_edges(style_space.specs[1], (-1.5, -0.5, 0.5, 1.5)),
    )


def table_scorer(
    space: AttributeSpace, table: dict[str, tuple[float, ...]], domain: str = "text"
) -> Scorer:
    """Scorer whose evaluators look attribute values up in a fixed table."""
    evaluators = tuple(
        TableEvaluator(
            spec.id, spec, {seq: values[i] for seq, values in table.items()}
        )
        for i, spec in enumerate(space.specs)
    )
    return Scorer(space, evaluators, domain=domain)


def scored(
    space: AttributeSpace, seq: str, *values: float, context: str = ""
) -> ScoredSequence:
    return ScoredSequence(
        seq, AttributeVector(tuple(float(v) for v in values)), context=context
    )


def bare_reward_model(space: AttributeSpace) -> RewardModel:
    return RewardModel(space, (), (), cache=EvaluationCache())


def bonus_reward_model(space: AttributeSpace) -> RewardModel:
    return RewardModel(
        space,
        (ToyFluencyEvaluator(),),
        (ToySimilarityEvaluator(),),
        cache=EvaluationCache(),
    )
