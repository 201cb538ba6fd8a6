# -*- coding: UTF-8 -*-

# environment override for every output directory:
OUTPUT_DIR_ENV: str = "REDSIM_OUTPUT_DIR"

VARIANTS: list = [
    "RED1",
    "RED2",
    "RED3",
    "RED4",
    "RED5",
]

# plain FIFO baseline (min_th = max_th = capacity):
DROP_TAIL: str = "DROPTAIL"

# 20 B IP + 20 B TCP, no options:
HEADER_BYTES: int = 40
ACK_BYTES: int = 40

TIMER_GRANULARITY: float = 0.2
INITIAL_RTO: float = 1.0
MAX_RTO: float = 60.0
INITIAL_SSTHRESH_SEGMENTS: int = 64
RECEIVER_WINDOW_SEGMENTS: int = 2 ** 16
DUP_ACK_THRESHOLD: int = 3
MAX_SACK_BLOCKS: int = 3

# ledger time bin (seconds):
LEDGER_BIN: float = 0.1

RED_DEFAULTS: dict = {
    "variant": "RED1",
    "w_q": 0.002,
    "min_th": 30000,
    "max_th": 90000,
    "max_p": 0.1,
    "capacity": 180000,
    "M": 1500,
}

TOPOLOGY_DEFAULTS: dict = {
    "groups": "20@1500, 20@750, 20@375",
    "bottleneck_rate": 30e6,
    "bottleneck_delay": 0.015,
    "access_rate": 100e6,
    "access_delay_jitter": 0.001,
    "start_jitter": 1.0,
}

RUN_DEFAULTS: dict = {
    "name": "scenario",
    "duration": 200.0,
    "warmup": 20.0,
    "drain": 5.0,
    "seed": 1,
}

OUTPUT_DEFAULTS: dict = {
    "directory": "results",
    "trace_queue": False,
    "trace_interval": 0.1,
    "trace_flows": False,
}

DELAY_PROFILES: dict = {
    "low": 0.015,
    "high": 0.080,
}

METRICS_CSV_HEADER: list = [
    "scenario_id",
    "seed",
    "variant",
    "delay_profile",
    "group_mtu",
    "plr",
    "plr_forced",
    "goodput_bps",
    "pkts_sent",
    "pkts_dropped",
]

ORACLE_CSV_HEADER: list = [
    "variant",
    "n",
    "closed_form_mass",
    "oracle_mass",
    "empirical_mass",
]

QUEUE_TRACE_HEADER: list = ["time", "q_bytes", "avg_bytes"]

FLOW_TRACE_HEADER: list = ["time", "flow_id", "kind"]
