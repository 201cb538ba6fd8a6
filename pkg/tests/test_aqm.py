# -*- coding: UTF-8 -*-

import numpy as np
import pytest

from redsim.aqm import (
    Outcome,
    Phase,
    RedParams,
    RedState,
    RedVariant,
    final_drop_prob,
    on_arrival,
    region_drop_prob,
    settle_count,
    size_weight_temp,
    temp_drop_prob,
    update_average,
    update_count,
    variant_names,
)
from redsim.exceptions import (
    AqmError,
    ArgumentError,
    DuplicateKeyError,
    IllegalOperation,
    MissingKeyError,
    PhaseError,
    RegistryKeyError,
    ScenarioError,
)
from redsim.registry import VariantRegistry
from redsim.simkernel import RandomStream

PARAMS = RedParams()


def test_defaults():
    assert PARAMS.w_q == 0.002
    assert (PARAMS.min_th, PARAMS.max_th, PARAMS.capacity, PARAMS.M) == (30000.0, 90000.0, 180000.0, 1500.0)
    assert PARAMS.max_p == 0.1
    assert not PARAMS.is_drop_tail


def test_params_validation():
    with pytest.raises(ScenarioError) as error:
        RedParams(min_th=100000)
    assert error.value.field == "min_th"
    with pytest.raises(ScenarioError):
        RedParams(max_th=200000)
    with pytest.raises(ScenarioError) as error:
        RedParams(w_q=0)
    assert error.value.field == "w_q"
    with pytest.raises(ScenarioError):
        RedParams(max_p=1.5)
    with pytest.raises(ArgumentError):
        RedParams(wq=0.1)


def test_params_are_immutable():
    params = RedParams()
    with pytest.raises(IllegalOperation):
        params.w_q = 0.1
    with pytest.raises(IllegalOperation):
        del params.M


def test_drop_tail_params():
    params = RedParams.drop_tail()
    assert params.is_drop_tail
    assert params.min_th == params.max_th == params.capacity == 180000.0


def test_update_average():
    state = RedState()
    assert update_average(state, PARAMS, 1000) == pytest.approx(2.0)
    assert update_average(state, PARAMS, 1000) == pytest.approx(2.0 * 0.998 + 2.0)
    with pytest.raises(AqmError):
        update_average(state, PARAMS, -1)


@pytest.mark.parametrize("avg, expected", [
    (0.0, 0.0),
    (30000.0, 0.0),
    (60000.0, 0.05),
    (90000.0, 0.1),
    (150000.0, 0.1),
])
def test_temp_drop_prob(avg, expected):
    assert temp_drop_prob(RedState(avg=avg), PARAMS) == pytest.approx(expected)


def test_size_weight_temp():
    assert size_weight_temp(0.1, 750, 1500) == pytest.approx(0.05)
    with pytest.raises(AqmError):
        size_weight_temp(0.1, 0, 1500)
    with pytest.raises(AqmError):
        size_weight_temp(0.1, 1501, 1500)


def test_final_drop_prob_red1():
    state = RedState(RedVariant.RED1)
    assert final_drop_prob(state, PARAMS, 0.1, 1500) == pytest.approx(0.1)
    state.count = 5
    assert final_drop_prob(state, PARAMS, 0.1, 1500) == pytest.approx(0.2)
    state.count = 10
    assert final_drop_prob(state, PARAMS, 0.1, 1500) == 1.0
    state.count = 12
    assert final_drop_prob(state, PARAMS, 0.1, 1500) == 1.0


def test_final_drop_prob_size_weighted():
    assert final_drop_prob(RedState("RED3"), PARAMS, 0.1, 750) == pytest.approx(0.05)
    assert final_drop_prob(RedState("RED4"), PARAMS, 0.1, 750) == pytest.approx(0.05)
    assert final_drop_prob(RedState("RED5"), PARAMS, 0.1, 750) == pytest.approx(0.025)
    state = RedState("RED5", count=4)
    assert final_drop_prob(state, PARAMS, 0.1, 375) == pytest.approx(0.1 / 16 / 0.6)


def test_count_phase_is_enforced():
    with pytest.raises(PhaseError):
        update_count(RedState("RED1"), 1500, 1500, Phase.AFTER_ACCEPT)
    with pytest.raises(PhaseError):
        update_count(RedState("RED4"), 1500, 1500, Phase.BEFORE_DECISION)
    state = RedState("RED5")
    update_count(state, 750, 1500, Phase.AFTER_ACCEPT)
    assert state.count == pytest.approx(0.25)


def test_red1_hazards_along_the_no_drop_path():
    state = RedState("RED1")
    hazards = []
    for _ in range(4):
        hazards.append(region_drop_prob(state, PARAMS, 0.1, 1500))
        settle_count(state, PARAMS, 1500, dropped=False)
    assert hazards == pytest.approx([0.1, 0.1 / 0.9, 0.1 / 0.8, 0.1 / 0.7])


def test_red4_count_accumulates_size_weights():
    state = RedState("RED4")
    first = region_drop_prob(state, PARAMS, 0.1, 1500)
    settle_count(state, PARAMS, 1500, dropped=False)
    second = region_drop_prob(state, PARAMS, 0.1, 750)
    settle_count(state, PARAMS, 750, dropped=False)
    assert first == pytest.approx(0.1)
    assert second == pytest.approx(0.05 / 0.9)
    assert state.count == pytest.approx(1.5)


def test_drop_resets_count():
    state = RedState("RED1")
    for _ in range(3):
        region_drop_prob(state, PARAMS, 0.1, 1500)
        settle_count(state, PARAMS, 1500, dropped=False)
    settle_count(state, PARAMS, 1500, dropped=True)
    assert state.count == 0.0
    assert region_drop_prob(state, PARAMS, 0.1, 1500) == pytest.approx(0.1)


def test_accept_below_min_threshold():
    state = RedState("RED1", count=3)
    decision = on_arrival(state, PARAMS, 1500, 10000, 0.0)
    assert decision.outcome is Outcome.ACCEPT
    assert not decision.dropped
    assert state.count == 0.0


def test_forced_drop_above_max_threshold():
    state = RedState("RED2", avg=95000.0)
    decision = on_arrival(state, PARAMS, 1500, 95000, 0.999)
    assert decision.outcome is Outcome.FORCED_DROP
    assert decision.p_a_used == 1.0


def test_overflow_is_forced_even_below_min_threshold():
    state = RedState("RED1")
    decision = on_arrival(state, PARAMS, 1500, 179000, 0.999)
    assert decision.outcome is Outcome.FORCED_DROP
    assert on_arrival(RedState("RED1"), PARAMS, 1000, 179000, 0.999).outcome is Outcome.ACCEPT


def test_random_drop_inside_region():
    state = RedState("RED1", avg=60000.0)
    assert on_arrival(state, PARAMS, 1500, 60000, 0.0).outcome is Outcome.RANDOM_DROP
    state = RedState("RED1", avg=60000.0)
    decision = on_arrival(state, PARAMS, 1500, 60000, 0.999)
    assert decision.outcome is Outcome.ACCEPT
    assert decision.p_a_used == pytest.approx(0.05)


def test_packet_longer_than_M_is_rejected():
    with pytest.raises(AqmError):
        on_arrival(RedState(), PARAMS, 1501, 0, 0.5)


def test_drop_tail_never_drops_at_random():
    params = RedParams.drop_tail(capacity=30000)
    state = RedState("RED1")
    stream = RandomStream(1)
    q = 0
    outcomes = set()
    for _ in range(20000):
        decision = on_arrival(state, params, 1500, q, stream.next_uniform())
        outcomes.add(decision.outcome)
        if decision.outcome is Outcome.ACCEPT:
            q += 1500
        if stream.next_uniform() < 0.45 and q > 0:
            q -= 1500
    assert Outcome.RANDOM_DROP not in outcomes
    assert Outcome.FORCED_DROP in outcomes


def test_all_variants_agree_when_every_packet_has_size_M():
    params = RedParams(w_q=0.5, min_th=20000, max_th=80000, capacity=120000, M=1500)
    rng = np.random.default_rng(17)
    queue = rng.uniform(0, 100000, 100000).tolist()
    draws = RandomStream(99)
    uniforms = [draws.next_uniform() for _ in queue]

    traces = {}
    for variant in RedVariant:
        state = RedState(variant)
        traces[variant] = [
            on_arrival(state, params, 1500, q, u).outcome
            for q, u in zip(queue, uniforms)
        ]

    reference = traces[RedVariant.RED1]
    assert Outcome.RANDOM_DROP in reference
    for variant, trace in traces.items():
        assert trace == reference, variant


def test_variant_parse():
    assert RedVariant.parse("red3") is RedVariant.RED3
    assert RedVariant.parse(RedVariant.RED5) is RedVariant.RED5
    with pytest.raises(ScenarioError):
        RedVariant.parse("RED9")


def test_registry():
    assert variant_names() == ["RED1", "RED2", "RED3", "RED4", "RED5", "DROPTAIL"]
    with pytest.raises(DuplicateKeyError):
        VariantRegistry.register("RED1")(object)
    with pytest.raises(MissingKeyError):
        VariantRegistry.get("RED9")
    with pytest.raises(RegistryKeyError):
        VariantRegistry.register("red6")(object)
    assert "RED6" not in VariantRegistry.tags()
    rules = VariantRegistry.get("RED4")
    assert rules.tag == "RED4"
    assert rules is VariantRegistry.get("RED4")
