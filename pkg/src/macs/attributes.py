"""Attribute spaces, threshold windows, and the constraint-satisfaction reward.

An attribute is a unit-free scalar confined to a finite range. A constraint
assigns each attribute a closed threshold window inside that range. The
satisfaction score of a value is 1 inside its window and ramps linearly down
to 0 at the range extremes; the per-attribute reward for rewriting a sequence
is the new score plus the change in score, ``2*f(new) - f(old)``. The total
reward sums the per-attribute rewards and any bonus components, which enter
as raw scores in [0, 1] with no change term.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import ConfigurationError, ContractViolation

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AttributeSpec:
    """One attribute axis with its finite value range."""

    id: str
    v_min: float
    v_max: float

    def __post_init__(self) -> None:
        if not self.id:
            raise ConfigurationError("attribute id must be nonempty")
        if not self.v_min < self.v_max:
            raise ConfigurationError(
                f"attribute {self.id!r}: need v_min < v_max, got "
                f"[{self.v_min}, {self.v_max}]"
            )

    @property
    def span(self) -> float:
        return self.v_max - self.v_min

    def contains(self, value: float) -> bool:
        return self.v_min <= value <= self.v_max

    def clamp(self, value: float) -> float:
        return min(max(value, self.v_min), self.v_max)


@dataclass(frozen=True)
class ThresholdWindow:
    """A closed target interval for one attribute.

    Open-ended windows are represented clamped to the range end they abut,
    e.g. "below 3.0" over [1.28, 4.12] is stored as (1.28, 3.0).
    """

    attr_id: str
    start: float
    end: float

    def __post_init__(self) -> None:
        if not self.attr_id:
            raise ConfigurationError("window attr_id must be nonempty")
        if self.start > self.end:
            raise ConfigurationError(
                f"window for {self.attr_id!r}: start {self.start} > end {self.end}"
            )

    def contains(self, value: float) -> bool:
        return self.start <= value <= self.end

    def label(self) -> str:
        return f"{self.start:g}..{self.end:g}"


def validate_window(window: ThresholdWindow, spec: AttributeSpec) -> None:
    """Check that ``window`` targets ``spec`` and sits inside its range."""
    if window.attr_id != spec.id:
        raise ContractViolation(
            f"window targets attribute {window.attr_id!r}, expected {spec.id!r}"
        )
    if window.start < spec.v_min or window.end > spec.v_max:
        raise ConfigurationError(
            f"window {window.label()} exceeds range [{spec.v_min}, {spec.v_max}] "
            f"of attribute {spec.id!r}"
        )


@dataclass(frozen=True)
class AttributeSpace:
    """An ordered set of attributes; the order is canonical everywhere."""

    specs: tuple[AttributeSpec, ...]

    def __post_init__(self) -> None:
        if not self.specs:
            raise ConfigurationError("attribute space must declare at least one attribute")
        ids = [s.id for s in self.specs]
        if len(set(ids)) != len(ids):
            raise ConfigurationError(f"duplicate attribute ids: {ids}")

    @property
    def k(self) -> int:
        return len(self.specs)

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(s.id for s in self.specs)

    def spec(self, attr_id: str) -> AttributeSpec:
        for s in self.specs:
            if s.id == attr_id:
                return s
        raise ConfigurationError(f"unknown attribute {attr_id!r}")

    def index_of(self, attr_id: str) -> int:
        for i, s in enumerate(self.specs):
            if s.id == attr_id:
                return i
        raise ConfigurationError(f"unknown attribute {attr_id!r}")


@dataclass(frozen=True)
class AttributeVector:
    """Attribute values for one sequence, ordered per the space."""

    values: tuple[float, ...]

    def __len__(self) -> int:
        return len(self.values)

    def __iter__(self):
        return iter(self.values)

    def __getitem__(self, i: int) -> float:
        return self.values[i]


def ingest_vector(
    space: AttributeSpace, values: Sequence[float], source: str = ""
) -> AttributeVector:
    """Build an AttributeVector, clamping out-of-range values into the space.

    Clamps are logged; they are expected from external evaluators whose raw
    outputs may overshoot the declared range.
    """
    if len(values) != space.k:
        raise ContractViolation(
            f"expected {space.k} attribute values, got {len(values)}"
        )
    out = []
    for spec, value in zip(space.specs, values):
        clamped = spec.clamp(float(value))
        if clamped != value:
            logger.debug(
                "clamped %s value %r to %r%s",
                spec.id,
                value,
                clamped,
                f" ({source})" if source else "",
            )
        out.append(clamped)
    return AttributeVector(tuple(out))


@dataclass(frozen=True)
class MultiConstraint:
    """One threshold window per attribute, in the space's canonical order."""

    windows: tuple[ThresholdWindow, ...]

    def __post_init__(self) -> None:
        if not self.windows:
            raise ConfigurationError("constraint must contain at least one window")

    @property
    def k(self) -> int:
        return len(self.windows)

    def label(self) -> str:
        return ";".join(w.label() for w in self.windows)


def validate_constraint(constraint: MultiConstraint, space: AttributeSpace) -> None:
    if constraint.k != space.k:
        raise ContractViolation(
            f"constraint has {constraint.k} windows for a {space.k}-attribute space"
        )
    for window, spec in zip(constraint.windows, space.specs):
        validate_window(window, spec)


@dataclass(frozen=True)
class AttributePartition:
    """Contiguous windows tiling one attribute's range."""

    attr_id: str
    boundaries: tuple[ThresholdWindow, ...]

    def __post_init__(self) -> None:
        if not self.boundaries:
            raise ConfigurationError("partition must contain at least one window")
        for w in self.boundaries:
            if w.attr_id != self.attr_id:
                raise ConfigurationError(
                    f"partition for {self.attr_id!r} holds a window for {w.attr_id!r}"
                )
        for lo, hi in itertools.pairwise(self.boundaries):
            if lo.end != hi.start:
                raise ConfigurationError(
                    f"partition for {self.attr_id!r} is not contiguous at "
                    f"{lo.label()} / {hi.label()}"
                )

    def __len__(self) -> int:
        return len(self.boundaries)

    @classmethod
    def from_edges(cls, spec: AttributeSpec, edges: Iterable[float]) -> "AttributePartition":
        """Build a partition of ``spec``'s range from interior edge values."""
        cuts = [spec.v_min, *edges, spec.v_max]
        for lo, hi in itertools.pairwise(cuts):
            if not lo < hi:
                raise ConfigurationError(
                    f"partition edges for {spec.id!r} must be strictly increasing "
                    f"within ({spec.v_min}, {spec.v_max}); got {list(edges)}"
                )
        windows = tuple(
            ThresholdWindow(spec.id, lo, hi) for lo, hi in itertools.pairwise(cuts)
        )
        return cls(spec.id, windows)


def validate_partition(partition: AttributePartition, spec: AttributeSpec) -> None:
    """Check that ``partition`` covers ``spec``'s range exactly."""
    if partition.attr_id != spec.id:
        raise ContractViolation(
            f"partition targets {partition.attr_id!r}, expected {spec.id!r}"
        )
    first, last = partition.boundaries[0], partition.boundaries[-1]
    if first.start != spec.v_min or last.end != spec.v_max:
        raise ConfigurationError(
            f"partition for {spec.id!r} covers [{first.start}, {last.end}], "
            f"range is [{spec.v_min}, {spec.v_max}]"
        )
    for w in partition.boundaries:
        validate_window(w, spec)


def combo_constraints(
    partitions: Sequence[AttributePartition],
) -> list[MultiConstraint]:
    """Cross-product of partition windows, row-major in partition order."""
    if not partitions:
        raise ConfigurationError("need at least one partition")
    return [
        MultiConstraint(tuple(windows))
        for windows in itertools.product(*(p.boundaries for p in partitions))
    ]


def _attrs_of(x) -> AttributeVector:
    attrs = getattr(x, "attrs", x)
    if not isinstance(attrs, AttributeVector):
        raise ContractViolation(f"expected an AttributeVector or scored sequence, got {type(x)!r}")
    return attrs


def satisfaction_score(value: float, window: ThresholdWindow, spec: AttributeSpec) -> float:
    """Piecewise linear satisfaction of ``value`` for ``window``.

    1.0 on the closed window; below it, a linear ramp from 0 at v_min up to 1
    at the window start; above it, symmetric. The middle branch is checked
    first so windows clamped to a range end never evaluate their unreachable
    ramp (whose denominator would be zero).
    """
    validate_window(window, spec)
    if not spec.contains(value):
        raise ContractViolation(
            f"value {value} outside range [{spec.v_min}, {spec.v_max}] "
            f"of attribute {spec.id!r}"
        )
    if window.start <= value <= window.end:
        return 1.0
    if value < window.start:
        return (value - spec.v_min) / (window.start - spec.v_min)
    return (spec.v_max - value) / (spec.v_max - window.end)


def attribute_reward(
    new_value: float, old_value: float, window: ThresholdWindow, spec: AttributeSpec
) -> float:
    """Satisfaction of the new value plus the change in satisfaction."""
    f_new = satisfaction_score(new_value, window, spec)
    f_old = satisfaction_score(old_value, window, spec)
    return 2.0 * f_new - f_old


def total_reward(
    new,
    old,
    constraint: MultiConstraint,
    space: AttributeSpace,
    bonuses: Sequence[float] = (),
) -> float:
    """Sum of per-attribute rewards plus raw bonus scores.

    ``new`` and ``old`` may be AttributeVectors or anything carrying an
    ``attrs`` vector (e.g. a scored sequence). Bounded in
    [-k, 2k + len(bonuses)].
    """
    new_attrs = _attrs_of(new)
    old_attrs = _attrs_of(old)
    if len(new_attrs) != space.k or len(old_attrs) != space.k:
        raise ContractViolation(
            f"attribute vectors ({len(new_attrs)}, {len(old_attrs)}) do not match "
            f"a {space.k}-attribute space"
        )
    validate_constraint(constraint, space)
    reward = 0.0
    for value_new, value_old, window, spec in zip(
        new_attrs, old_attrs, constraint.windows, space.specs
    ):
        reward += attribute_reward(value_new, value_old, window, spec)
    for bonus in bonuses:
        reward += bonus
    return reward


def satisfaction_sum(attrs, constraint: MultiConstraint, space: AttributeSpace) -> float:
    """Sum of per-attribute satisfaction scores, the argmax-equivalent of
    total_reward for a fixed old sequence and no bonuses."""
    vector = _attrs_of(attrs)
    if len(vector) != space.k:
        raise ContractViolation(
            f"attribute vector of length {len(vector)} for a {space.k}-attribute space"
        )
    validate_constraint(constraint, space)
    return sum(
        satisfaction_score(value, window, spec)
        for value, window, spec in zip(vector, constraint.windows, space.specs)
    )


def satisfies(attrs, constraint: MultiConstraint) -> bool:
    """True iff every attribute value lies inclusively within its window."""
    vector = _attrs_of(attrs)
    if len(vector) != constraint.k:
        raise ContractViolation(
            f"attribute vector of length {len(vector)} against {constraint.k} windows"
        )
    return all(w.contains(v) for v, w in zip(vector, constraint.windows))


def window_of(value: float, partition: AttributePartition) -> int:
    """Index of the partition window containing ``value``.

    Values on a shared interior boundary belong to the lower-index window.
    """
    first, last = partition.boundaries[0], partition.boundaries[-1]
    if value < first.start or value > last.end:
        raise ContractViolation(
            f"value {value} outside partition range [{first.start}, {last.end}] "
            f"of attribute {partition.attr_id!r}"
        )
    for i, w in enumerate(partition.boundaries):
        if w.contains(value):
            return i
    raise ContractViolation(f"no window contains {value}; partition is malformed")
