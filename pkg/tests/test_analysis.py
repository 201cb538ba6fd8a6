# -*- coding: UTF-8 -*-

from math import floor

import numpy as np
import pytest

from redsim.analysis import (
    DropLawInput,
    GoodputModel,
    Pmf,
    closed_form_pmf,
    drop_size_shares,
    exhaustive_interdrop,
    fairness_required_p,
    goodput_bound,
    hazard_sequence,
    pmf_distance,
    red1_interdrop_pmf,
    red4_interdrop_pmf,
    red5_interdrop_pmf,
    sample_interdrop,
)
from redsim.exceptions import AnalysisError
from redsim.simkernel import RandomStream

SIZES = [375.0, 750.0, 1500.0]


def random_instances(seed: int, count: int = 100):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        p_b = float(rng.uniform(0.01, 0.5))
        length = int(rng.integers(1, 12))
        sizes = [float(size) for size in rng.choice(SIZES, size=length)]
        yield p_b, sizes


@pytest.mark.parametrize("p_b", [0.5, 0.3, 0.1, 0.02])
def test_red1_law_is_uniform(p_b):
    pmf = red1_interdrop_pmf(p_b)
    full = floor(1 / p_b + 1e-9)
    for n in range(1, full + 1):
        assert pmf.mass(n) == pytest.approx(p_b)
    assert pmf.total() == pytest.approx(1.0, abs=1e-9)
    assert max(n for n, _ in pmf) <= full + 1


@pytest.mark.parametrize("p_b", [0.5, 0.3, 0.1, 0.02])
def test_red1_exhaustive_oracle_matches(p_b):
    exact = exhaustive_interdrop("RED1", p_b, [1500.0], 1500.0)
    assert red1_interdrop_pmf(p_b).max_abs_difference(exact) < 1e-12


@pytest.mark.parametrize("p_b", [0.5, 0.3, 0.1, 0.02])
def test_red1_monte_carlo_is_close(p_b):
    stream = RandomStream(1000 + int(p_b * 100))
    empirical = sample_interdrop("RED1", p_b, [1500.0], 1500.0, stream, 10 ** 6)
    assert pmf_distance(empirical, red1_interdrop_pmf(p_b)) < 0.005


def test_red4_closed_form_matches_oracle_on_random_instances():
    for p_b, sizes in random_instances(4):
        law = DropLawInput(p_b, sizes, 1500.0)
        exact = exhaustive_interdrop("RED4", p_b, sizes, 1500.0)
        assert red4_interdrop_pmf(law).max_abs_difference(exact) < 1e-12, (p_b, sizes)


def test_red5_closed_form_matches_oracle_on_random_instances():
    for p_b, sizes in random_instances(5):
        law = DropLawInput(p_b, sizes, 1500.0)
        exact = exhaustive_interdrop("RED5", p_b, sizes, 1500.0)
        assert red5_interdrop_pmf(law).max_abs_difference(exact) < 1e-12, (p_b, sizes)


def test_red4_example_masses():
    law = DropLawInput(0.1, [1500, 750, 375], 1500)
    pmf = red4_interdrop_pmf(law)
    assert pmf.mass(1) == pytest.approx(0.1)
    assert pmf.mass(2) == pytest.approx(0.05)
    assert pmf.mass(3) == pytest.approx(0.025)
    assert pmf.total() == pytest.approx(1.0, abs=1e-9)


def test_red5_masses_follow_squared_weights():
    pmf = red5_interdrop_pmf(DropLawInput(0.1, [1500, 750, 375], 1500))
    assert pmf.mass(1) == pytest.approx(0.1)
    assert pmf.mass(2) == pytest.approx(0.025)
    assert pmf.mass(3) == pytest.approx(0.00625)


def test_equal_sizes_reduce_every_law_to_the_uniform_one():
    uniform = red1_interdrop_pmf(0.1)
    law = DropLawInput(0.1, [1500.0], 1500.0)
    for variant in ("RED4", "RED5"):
        assert closed_form_pmf(variant, law).max_abs_difference(uniform) < 1e-12
    for variant in ("RED2", "RED3"):
        exact = exhaustive_interdrop(variant, 0.1, [1500.0], 1500.0)
        assert exact.max_abs_difference(uniform) < 1e-12


def test_no_closed_form_for_red2_and_red3():
    law = DropLawInput(0.1, SIZES, 1500.0)
    for variant in ("RED2", "RED3"):
        with pytest.raises(AnalysisError):
            closed_form_pmf(variant, law)


def test_finite_sequence_must_close_the_law():
    law = DropLawInput(0.1, [375.0, 375.0], 1500.0, periodic=False)
    with pytest.raises(AnalysisError):
        red4_interdrop_pmf(law)


def test_law_input_validation():
    with pytest.raises(AnalysisError):
        DropLawInput(0.0, SIZES, 1500)
    with pytest.raises(AnalysisError):
        DropLawInput(1.0, SIZES, 1500)
    with pytest.raises(AnalysisError):
        DropLawInput(0.1, [], 1500)
    with pytest.raises(AnalysisError):
        DropLawInput(0.1, [3000], 1500)


def test_hazard_sequence_ends_with_a_certain_drop():
    hazards = hazard_sequence("RED1", 0.25, [1500.0], 1500.0, horizon=100)
    assert hazards == pytest.approx([0.25, 1 / 3, 0.5, 1.0])


def test_monte_carlo_does_not_depend_on_workers_or_batching_threads():
    serial = sample_interdrop("RED5", 0.1, SIZES, 1500.0, RandomStream(3), 50000, batch=8192)
    threaded = sample_interdrop("RED5", 0.1, SIZES, 1500.0, RandomStream(3), 50000, batch=8192, workers=4)
    assert serial.support == threaded.support


def test_monte_carlo_red5_close_to_closed_form():
    empirical = sample_interdrop("RED5", 0.1, SIZES, 1500.0, RandomStream(9), 200000)
    closed = red5_interdrop_pmf(DropLawInput(0.1, SIZES, 1500.0))
    assert pmf_distance(empirical, closed) < 5 / np.sqrt(200000)


def test_sampler_needs_at_least_one_sample():
    with pytest.raises(AnalysisError):
        sample_interdrop("RED1", 0.1, [1500.0], 1500.0, RandomStream(1), 0)


def test_uniform_law_drops_sizes_in_proportion_to_their_share_of_arrivals():
    pmf = red1_interdrop_pmf(0.1)
    shares = drop_size_shares(pmf, [1500.0, 750.0])
    assert shares[1500.0] == pytest.approx(0.5)
    assert shares[750.0] == pytest.approx(0.5)


def test_red4_drops_bytes_uniformly():
    sizes = [1500.0, 750.0, 375.0]
    # 1/p_b spans exactly ten size cycles
    pmf = red4_interdrop_pmf(DropLawInput(1 / 17.5, sizes, 1500.0))
    shares = drop_size_shares(pmf, sizes)
    assert shares[1500.0] / shares[750.0] == pytest.approx(2.0)
    assert shares[750.0] / shares[375.0] == pytest.approx(2.0)


def test_pmf_rejects_invalid_support():
    with pytest.raises(AnalysisError):
        Pmf({0: 1.0})
    with pytest.raises(AnalysisError):
        Pmf({1: -0.1})
    assert Pmf([(1, 0.25), (1, 0.25), (3, 0.5)]).mean() == pytest.approx(2.0)


def test_goodput_bound():
    assert goodput_bound(GoodputModel(1500, 0.1, 0.01, 1.0)) == pytest.approx(150000.0)
    with pytest.raises(AnalysisError):
        goodput_bound(GoodputModel(1500, 0.1, 0.0))
    with pytest.raises(AnalysisError):
        GoodputModel(-1, 0.1, 0.01)
    with pytest.raises(AnalysisError):
        GoodputModel(1500, 0.0, 0.01)


def test_fairness_required_p():
    assert fairness_required_p(1500, 375, 0.016) == 0.016 / 16
    assert fairness_required_p(1500, 750, 0.04) == pytest.approx(0.01)
    assert fairness_required_p(1000, 1000, 0.03) == 0.03
    with pytest.raises(AnalysisError):
        fairness_required_p(1500, 0, 0.01)


def test_fairness_matches_observed_loss_direction():
    # large-delay loss of the 1500 B group was 1.73 %, of the 375 B group 0.10 %
    required = fairness_required_p(1500, 375, 0.0173)
    assert required == pytest.approx(0.0173 / 16)
    assert required < 0.0173
    assert 0.0010 / required == pytest.approx(0.92, abs=0.1)
