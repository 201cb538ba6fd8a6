# -*- coding: UTF-8 -*-

import sys
from os.path import abspath, dirname, join

import pytest

sys.path.insert(0, join(dirname(dirname(abspath(__file__))), "src"))

from redsim.netsim import Scenario  # noqa: E402

SMALL_SCENARIO_TEXT = """\
# six flows on a 10 Mbit/s bottleneck
[topology]
groups = 2@1500, 2@750, 2@375
bottleneck_rate = 10e6
bottleneck_delay = 0.015

[red]
variant = RED1

[run]
name = small
duration = 20
warmup = 5
drain = 5
seed = 3
"""


@pytest.fixture
def small_scenario_file(tmp_path):
    path = tmp_path / "small.scn"
    path.write_text(SMALL_SCENARIO_TEXT, encoding="UTF-8")
    return path


def small_scenario(**kwargs) -> Scenario:
    values = dict(
        name="small",
        groups="2@1500, 2@750, 2@375",
        bottleneck_rate=10e6,
        bottleneck_delay=0.015,
        duration=20.0,
        warmup=5.0,
        drain=5.0,
        seed=3,
    )
    values.update(kwargs)
    return Scenario(**values)
