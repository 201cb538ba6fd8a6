# -*- coding: UTF-8 -*-

from __future__ import annotations

from abc import ABC, abstractmethod
from enum import Enum
from typing import NamedTuple

from .constants import RED_DEFAULTS, DROP_TAIL
from .descriptors import (
    ImmutableFractionVar,
    ImmutablePositiveVar,
)
from .exceptions import AqmError, ArgumentError, PhaseError, ScenarioError
from .mixins import Record
from .registry import VariantRegistry


class RedVariant(Enum):
    RED1 = "RED1"
    RED2 = "RED2"
    RED3 = "RED3"
    RED4 = "RED4"
    RED5 = "RED5"

    @classmethod
    def parse(cls, value) -> RedVariant:
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().upper())
        except ValueError:
            raise ScenarioError(
                "variant",
                f"must be one of ({', '.join(item.value for item in cls)}) not '{value}'!"
            ) from None


class Phase(Enum):
    BEFORE_DECISION = "before_decision"
    AFTER_ACCEPT = "after_accept"


class Outcome(Enum):
    ACCEPT = "accept"
    RANDOM_DROP = "random_drop"
    FORCED_DROP = "forced_drop"


class DropDecision(NamedTuple):
    outcome: Outcome
    p_a_used: float

    @property
    def dropped(self) -> bool:
        return self.outcome is not Outcome.ACCEPT


ACCEPT_BELOW_MIN = DropDecision(Outcome.ACCEPT, 0.0)
FORCED = DropDecision(Outcome.FORCED_DROP, 1.0)


class RedParams(Record):
    """
    RED configuration; all sizes in bytes.

    **Keyword arguments:**
        ``w_q``, ``min_th``, ``max_th``, ``max_p``, ``capacity``, ``M``
            Missing ones take the values of `constants.RED_DEFAULTS`.
    """

    w_q: float = ImmutableFractionVar()
    min_th: float = ImmutablePositiveVar()
    max_th: float = ImmutablePositiveVar()
    max_p: float = ImmutableFractionVar()
    capacity: float = ImmutablePositiveVar()
    M: float = ImmutablePositiveVar()

    @classmethod
    def drop_tail(cls, capacity: float = RED_DEFAULTS["capacity"], M: float = RED_DEFAULTS["M"]) -> RedParams:
        """Degenerate configuration reducing the queue to a plain FIFO."""
        return cls(min_th=capacity, max_th=capacity, capacity=capacity, M=M)

    def __init__(self, **kwargs):
        self.w_q = kwargs.pop("w_q", RED_DEFAULTS["w_q"])
        self.min_th = kwargs.pop("min_th", RED_DEFAULTS["min_th"])
        self.max_th = kwargs.pop("max_th", RED_DEFAULTS["max_th"])
        self.max_p = kwargs.pop("max_p", RED_DEFAULTS["max_p"])
        self.capacity = kwargs.pop("capacity", RED_DEFAULTS["capacity"])
        self.M = kwargs.pop("M", RED_DEFAULTS["M"])

        if len(kwargs) > 0:
            raise ArgumentError(
                f"Failed to resolve parameters ({', '.join(map(repr, kwargs))}) for RedParams!"
            )

        if self.min_th > self.max_th:
            raise ScenarioError("min_th", f"must not exceed max_th ({self.min_th} > {self.max_th})!")
        if self.max_th > self.capacity:
            raise ScenarioError("max_th", f"must not exceed capacity ({self.max_th} > {self.capacity})!")

    @property
    def is_drop_tail(self) -> bool:
        return self.min_th == self.max_th == self.capacity


class VariantRules(ABC):
    """
    Per-variant steps of the drop pipeline for an arrival of `L` bytes:

        (1) count update          RED1-3 before the decision, RED4/5 after accept
        (2) p_b = max_p * (avg - min_th) / (max_th - min_th)
        (3) p_b <- p_b * L / M    RED2 only (`weight_temp`)
        (4) p_a = w * p_b / (1 - count * p_b), w from `numerator`
        (5) count += `count_step` if accepted (RED4, RED5)
    """

    tag: str = None
    count_phase: Phase = Phase.BEFORE_DECISION

    def weight_temp(self, p_b: float, L: float, M: float) -> float:
        return p_b

    @abstractmethod
    def numerator(self, p_b: float, L: float, M: float) -> float:
        raise NotImplementedError

    def count_step(self, L: float, M: float) -> float:
        return 1.0


@VariantRegistry.register("RED1")
class Red1Rules(VariantRules):
    """Packet-mode RED."""

    def numerator(self, p_b: float, L: float, M: float) -> float:
        return p_b


@VariantRegistry.register("RED2")
class Red2Rules(VariantRules):
    """Byte-mode RED: the temporary probability scales with L/M."""

    def weight_temp(self, p_b: float, L: float, M: float) -> float:
        return size_weight_temp(p_b, L, M)

    def numerator(self, p_b: float, L: float, M: float) -> float:
        return p_b


@VariantRegistry.register("RED3")
class Red3Rules(VariantRules):
    """The final probability scales with L/M; count stays per packet."""

    def numerator(self, p_b: float, L: float, M: float) -> float:
        return p_b * L / M


@VariantRegistry.register("RED4")
class Red4Rules(VariantRules):
    """Like RED3 but count accumulates L/M of each accepted packet."""
    count_phase = Phase.AFTER_ACCEPT

    def numerator(self, p_b: float, L: float, M: float) -> float:
        return p_b * L / M

    def count_step(self, L: float, M: float) -> float:
        return L / M


@VariantRegistry.register("RED5")
class Red5Rules(VariantRules):
    """Squared size weighting on both p_a and count."""
    count_phase = Phase.AFTER_ACCEPT

    def numerator(self, p_b: float, L: float, M: float) -> float:
        ratio = L / M
        return p_b * ratio * ratio

    def count_step(self, L: float, M: float) -> float:
        ratio = L / M
        return ratio * ratio


class RedState(object):
    """
    Mutable RED state of one queue.

    `credit` holds the unit increment owed by the last accepted arrival
    of a before-decision variant; it joins `count` at the next arrival.
    """

    __slots__ = ("variant", "rules", "avg", "count", "credit")

    def __init__(self, variant: RedVariant = RedVariant.RED1, avg: float = 0.0, count: float = 0.0):
        self.variant: RedVariant = RedVariant.parse(variant)
        self.rules: VariantRules = VariantRegistry.get(self.variant.value)
        self.avg: float = float(avg)
        self.count: float = float(count)
        self.credit: float = 0.0

    def reset_count(self):
        self.count = 0.0
        self.credit = 0.0

    def __repr__(self) -> str:
        return (
            f"RedState(variant={self.variant.value}, avg={self.avg!r}, "
            f"count={self.count!r}, credit={self.credit!r})"
        )


def update_average(state: RedState, params: RedParams, q: float) -> float:
    """avg <- (1 - w_q) * avg + w_q * q"""
    if q < 0:
        raise AqmError(f"Queue size cannot be negative ({q})!")
    w_q = params.w_q
    state.avg = (1.0 - w_q) * state.avg + w_q * q
    return state.avg


def temp_drop_prob(state: RedState, params: RedParams) -> float:
    """Temporary drop probability p_b, clamped to [0, max_p]."""
    span = params.max_th - params.min_th
    if span <= 0:
        return params.max_p if state.avg >= params.max_th else 0.0
    p_b = params.max_p * (state.avg - params.min_th) / span
    if p_b < 0.0:
        return 0.0
    if p_b > params.max_p:
        return params.max_p
    return p_b


def size_weight_temp(p_b: float, L: float, M: float) -> float:
    """p_b * L / M"""
    if not 0 < L <= M:
        raise AqmError(f"Packet length must lie in (0, {M}] not {L}!")
    return p_b * L / M


def final_drop_prob(state: RedState, params: RedParams, p_b: float, L: float) -> float:
    """
    Final drop probability p_a of the state's variant.

    For RED2 `p_b` is expected already size-weighted (step 3).
    A non-positive denominator or a value above 1 means a certain drop.
    """
    denominator = 1.0 - state.count * p_b
    if denominator <= 0.0:
        return 1.0
    p_a = state.rules.numerator(p_b, L, params.M) / denominator
    return 1.0 if p_a > 1.0 else p_a


def update_count(state: RedState, L: float, M: float, phase: Phase):
    """
    Advance `count` in the variant's own phase.

    :raise PhaseError: If `phase` is not the variant's count phase.
    """
    rules = state.rules
    if phase is not rules.count_phase:
        raise PhaseError(
            f"{state.variant.value} updates count in phase "
            f"'{rules.count_phase.value}' not '{phase.value}'!"
        )
    if phase is Phase.BEFORE_DECISION:
        state.count += state.credit
        state.credit = 0.0
    else:
        state.count += rules.count_step(L, M)


def region_drop_prob(state: RedState, params: RedParams, p_b: float, L: float) -> float:
    """Steps (1), (3) and (4) for an arrival inside the probabilistic region."""
    rules = state.rules
    if rules.count_phase is Phase.BEFORE_DECISION:
        update_count(state, L, params.M, Phase.BEFORE_DECISION)
    return final_drop_prob(state, params, rules.weight_temp(p_b, L, params.M), L)


def settle_count(state: RedState, params: RedParams, L: float, dropped: bool):
    """Count bookkeeping once the decision is known."""
    if dropped:
        state.reset_count()
    elif state.rules.count_phase is Phase.AFTER_ACCEPT:
        update_count(state, L, params.M, Phase.AFTER_ACCEPT)
    else:
        state.credit = state.rules.count_step(L, params.M)


def on_arrival(state: RedState, params: RedParams, L: float, q_now: float, u: float) -> DropDecision:
    """
    Judge one arriving packet of `L` bytes against a queue holding `q_now`
    bytes, using the uniform draw `u`.
    """
    if not 0 < L <= params.M:
        raise AqmError(f"Packet length must lie in (0, {params.M}] not {L}!")

    avg = update_average(state, params, q_now)

    if q_now + L > params.capacity:
        state.reset_count()
        return FORCED

    if avg < params.min_th:
        state.reset_count()
        return ACCEPT_BELOW_MIN

    if avg >= params.max_th:
        state.reset_count()
        return FORCED

    p_a = region_drop_prob(state, params, temp_drop_prob(state, params), L)
    dropped = u < p_a
    settle_count(state, params, L, dropped)
    if dropped:
        return DropDecision(Outcome.RANDOM_DROP, p_a)
    return DropDecision(Outcome.ACCEPT, p_a)


def variant_names() -> list:
    """Registered variant tags plus the drop-tail baseline."""
    return VariantRegistry.tags() + [DROP_TAIL]
