# -*- coding: UTF-8 -*-

from __future__ import annotations

from csv import writer
from io import StringIO
from math import ceil
from typing import Dict, Iterable, List, NamedTuple, Optional, Sequence, Tuple

from .constants import LEDGER_BIN, METRICS_CSV_HEADER
from .exceptions import ConservationError, MetricsError
from .mixins import Record
from .utils import align_columns, fixed, mbps, percent

Window = Tuple[float, float]

# (group_id, mtu):
RowKey = Tuple[int, int]


class FlowLedger(object):
    """
    Bottleneck data-packet accounting of one flow.

    `pkts_sent` counts data segments handed to the access link; every one of
    them ends up either in `pkts_dropped` or in `pkts_delivered`. Counters
    are kept as run totals and in bins of `LEDGER_BIN` seconds, so any
    bin-aligned window can be measured after the run.
    """

    __slots__ = (
        "flow_id", "group_id", "mtu", "bin_width",
        "pkts_sent", "pkts_arrived", "pkts_dropped", "pkts_forced", "pkts_delivered",
        "unique_bytes_acked",
        "arrivals", "drops", "forced", "acked_bytes", "records",
    )

    def __init__(self, flow_id: int, group_id: int, mtu: int, horizon: float, **kwargs):
        self.flow_id = flow_id
        self.group_id = group_id
        self.mtu = mtu
        self.bin_width: float = kwargs.pop("bin_width", LEDGER_BIN)

        self.pkts_sent: int = 0
        self.pkts_arrived: int = 0
        self.pkts_dropped: int = 0
        self.pkts_forced: int = 0
        self.pkts_delivered: int = 0
        self.unique_bytes_acked: int = 0

        bins = int(ceil(horizon / self.bin_width)) + 1
        self.arrivals: List[int] = [0] * bins
        self.drops: List[int] = [0] * bins
        self.forced: List[int] = [0] * bins
        self.acked_bytes: List[int] = [0] * bins

        # (time, kind) tuples, only when tracing:
        self.records: Optional[List[Tuple[float, str]]] = [] if kwargs.pop("trace", False) else None

    def _bin(self, t: float) -> int:
        idx = int(t / self.bin_width)
        last = len(self.arrivals) - 1
        return idx if idx < last else last

    def on_sent(self, t: float):
        self.pkts_sent += 1
        if self.records is not None:
            self.records.append((t, "sent"))

    def on_arrival(self, t: float):
        self.pkts_arrived += 1
        self.arrivals[self._bin(t)] += 1

    def on_drop(self, t: float, forced: bool):
        idx = self._bin(t)
        self.pkts_dropped += 1
        self.drops[idx] += 1
        if forced:
            self.pkts_forced += 1
            self.forced[idx] += 1
        if self.records is not None:
            self.records.append((t, "forced_drop" if forced else "random_drop"))

    def on_delivered(self, t: float):
        self.pkts_delivered += 1
        if self.records is not None:
            self.records.append((t, "delivered"))

    def on_acked(self, t: float, new_bytes: int):
        if new_bytes <= 0:
            raise MetricsError(f"Flow {self.flow_id}: acked bytes must advance, got {new_bytes}!")
        self.unique_bytes_acked += new_bytes
        self.acked_bytes[self._bin(t)] += new_bytes
        if self.records is not None:
            self.records.append((t, "acked"))

    @property
    def in_flight(self) -> int:
        return self.pkts_sent - self.pkts_dropped - self.pkts_delivered

    def window_slice(self, window: Window) -> slice:
        t0, t1 = window
        if not 0 <= t0 < t1:
            raise MetricsError(f"Invalid measurement window [{t0}, {t1}]!")
        return slice(self._aligned(t0), self._aligned(t1))

    def _aligned(self, t: float) -> int:
        ratio = t / self.bin_width
        idx = int(round(ratio))
        if abs(ratio - idx) > 1e-6:
            raise MetricsError(
                f"Window edge {t} is not aligned to the {self.bin_width} s ledger bins!"
            )
        return idx


class QueueTrace(object):
    """Bottleneck queue samples `(time, q_bytes, avg_bytes)`."""

    def __init__(self):
        self.samples: List[Tuple[float, float, float]] = []

    def __len__(self) -> int:
        return len(self.samples)

    def record(self, t: float, q_bytes: float, avg_bytes: float):
        if self.samples and t <= self.samples[-1][0]:
            raise MetricsError(f"Queue trace times must increase ({t} after {self.samples[-1][0]})!")
        self.samples.append((t, q_bytes, avg_bytes))


class GroupInfo(NamedTuple):
    group_id: int
    mtu: int
    flow_ids: Tuple[int, ...]


class RunResult(object):
    """Everything a finished run leaves behind for reporting."""

    def __init__(self, **kwargs):
        self.scenario_id: str = kwargs.pop("scenario_id")
        self.seed: int = kwargs.pop("seed")
        self.variant: str = kwargs.pop("variant")
        self.delay_profile: str = kwargs.pop("delay_profile")
        self.groups: List[GroupInfo] = kwargs.pop("groups")
        self.ledgers: List[FlowLedger] = kwargs.pop("ledgers")
        self.window: Window = kwargs.pop("window")
        self.horizon: float = kwargs.pop("horizon")
        self.bottleneck_rate: float = kwargs.pop("bottleneck_rate")
        self.queue_trace: QueueTrace = kwargs.pop("queue_trace", QueueTrace())
        self.events: int = kwargs.pop("events", 0)

    def group_ledgers(self, group: GroupInfo) -> List[FlowLedger]:
        return [self.ledgers[flow_id] for flow_id in group.flow_ids]


class GroupStats(Record):

    def __init__(self, group_id: int, mtu: int, **kwargs):
        self.group_id = group_id
        self.mtu = mtu
        self.plr: float = kwargs.pop("plr")
        self.plr_forced: float = kwargs.pop("plr_forced")
        self.goodput: float = kwargs.pop("goodput")
        self.jain: float = kwargs.pop("jain")
        self.pkts_sent: int = kwargs.pop("pkts_sent")
        self.pkts_dropped: int = kwargs.pop("pkts_dropped")


def _window_sum(ledgers: Iterable[FlowLedger], field: str, window: Window) -> int:
    total = 0
    for ledger in ledgers:
        total += sum(getattr(ledger, field)[ledger.window_slice(window)])
    return total


def plr(ledgers: Sequence[FlowLedger], window: Window) -> float:
    """
    Dropped over arrived bottleneck data packets of the given flows, both
    counted by arrival time inside `window`.

    :raise MetricsError: If no packet arrived inside the window.
    """
    arrived = _window_sum(ledgers, "arrivals", window)
    if arrived == 0:
        raise MetricsError(f"PLR is undefined: no arrivals in window {list(window)}!")
    return _window_sum(ledgers, "drops", window) / arrived


def plr_forced(ledgers: Sequence[FlowLedger], window: Window) -> float:
    """Share of arrivals lost to forced drops (above max_th or overflow)."""
    arrived = _window_sum(ledgers, "arrivals", window)
    if arrived == 0:
        raise MetricsError(f"PLR is undefined: no arrivals in window {list(window)}!")
    return _window_sum(ledgers, "forced", window) / arrived


def goodput(ledgers: Sequence[FlowLedger], window: Window) -> float:
    """Unique payload bits cumulatively acknowledged per second of `window`."""
    t0, t1 = window
    return 8.0 * _window_sum(ledgers, "acked_bytes", window) / (t1 - t0)


def jain_index(values: Sequence[float]) -> float:
    """(sum x)^2 / (n * sum x^2); 1 for a perfectly even split."""
    squares = sum(value * value for value in values)
    if squares == 0:
        return 0.0
    total = sum(values)
    return total * total / (len(values) * squares)


def flow_jain(result: RunResult, window: Window = None) -> float:
    """Jain index over the goodputs of every flow of the run."""
    window = result.window if window is None else window
    return jain_index([goodput([ledger], window) for ledger in result.ledgers])


def group_stats(result: RunResult, window: Window = None) -> List[GroupStats]:
    window = result.window if window is None else window
    stats = []
    for group in result.groups:
        ledgers = result.group_ledgers(group)
        stats.append(
            GroupStats(
                group.group_id,
                group.mtu,
                plr=plr(ledgers, window),
                plr_forced=plr_forced(ledgers, window),
                goodput=goodput(ledgers, window),
                jain=jain_index([goodput([ledger], window) for ledger in ledgers]),
                pkts_sent=_window_sum(ledgers, "arrivals", window),
                pkts_dropped=_window_sum(ledgers, "drops", window),
            )
        )
    return stats


def audit_conservation(ledgers: Iterable[FlowLedger]):
    """
    :raise ConservationError: If any flow has packets neither delivered nor
        dropped.
    """
    broken = [ledger for ledger in ledgers if ledger.in_flight != 0]
    if broken:
        details = ", ".join(
            f"flow {ledger.flow_id}: sent={ledger.pkts_sent} delivered={ledger.pkts_delivered} "
            f"dropped={ledger.pkts_dropped}"
            for ledger in broken[:5]
        )
        raise ConservationError(f"{len(broken)} flow(s) do not balance after drain ({details})!")


def metrics_rows(result: RunResult) -> List[List[str]]:
    """Rows of the per-run metrics CSV, in `METRICS_CSV_HEADER` order."""
    rows = []
    for stats in group_stats(result):
        rows.append([
            result.scenario_id,
            str(result.seed),
            result.variant,
            result.delay_profile,
            str(stats.mtu),
            fixed(stats.plr, 6),
            fixed(stats.plr_forced, 6),
            fixed(stats.goodput, 1),
            str(stats.pkts_sent),
            str(stats.pkts_dropped),
        ])
    return rows


def to_csv(header: Sequence[str], rows: Iterable[Sequence[str]]) -> str:
    buffer = StringIO()
    csv = writer(buffer, lineterminator="\n")
    csv.writerow(header)
    csv.writerows(rows)
    return buffer.getvalue()


def metrics_csv(results: Iterable[RunResult]) -> str:
    return to_csv(
        METRICS_CSV_HEADER,
        [row for result in results for row in metrics_rows(result)]
    )


def queue_trace_rows(trace: QueueTrace) -> List[List[str]]:
    return [[fixed(t, 6), fixed(q, 1), fixed(avg, 3)] for t, q, avg in trace.samples]


def flow_trace_rows(ledgers: Iterable[FlowLedger]) -> List[List[str]]:
    records = [
        (t, ledger.flow_id, kind)
        for ledger in ledgers if ledger.records is not None
        for t, kind in ledger.records
    ]
    records.sort(key=lambda record: (record[0], record[1]))
    return [[fixed(t, 6), str(flow_id), kind] for t, flow_id, kind in records]


class SummaryTable(object):
    """
    Loss, goodput and fairness per MTU group (rows) and variant (columns),
    one section per delay profile. Rows are keyed by group, so two groups
    sharing an MTU keep separate rows.
    """

    def __init__(self, results: Sequence[RunResult]):
        if len(results) == 0:
            raise MetricsError("Cannot summarize an empty set of runs!")

        self.profiles: List[str] = list(dict.fromkeys(result.delay_profile for result in results))
        self.variants: List[str] = list(dict.fromkeys(result.variant for result in results))
        self.rows: List[RowKey] = list(dict.fromkeys(
            (group.group_id, group.mtu) for result in results for group in result.groups
        ))
        self.bottleneck_rate: float = results[0].bottleneck_rate

        mtus = [mtu for _, mtu in self.rows]
        self._labels: Dict[RowKey, str] = {
            (group_id, mtu): f"MTU {mtu}" if mtus.count(mtu) == 1 else f"MTU {mtu} (group {group_id})"
            for group_id, mtu in self.rows
        }

        self._cells: Dict[Tuple[str, str], Dict[RowKey, GroupStats]] = {}
        self._fairness: Dict[Tuple[str, str], float] = {}
        for result in results:
            key = (result.delay_profile, result.variant)
            if key in self._cells:
                raise MetricsError(f"Duplicate run for delay profile '{key[0]}' and variant '{key[1]}'!")
            self._cells[key] = {(stats.group_id, stats.mtu): stats for stats in group_stats(result)}
            self._fairness[key] = flow_jain(result)

    def label(self, row: RowKey) -> str:
        return self._labels[row]

    def stats(self, profile: str, variant: str) -> Dict[RowKey, GroupStats]:
        return self._cells.get((profile, variant), {})

    def goodput_sum(self, profile: str, variant: str) -> Optional[float]:
        cell = self.stats(profile, variant)
        if not cell:
            return None
        return sum(stats.goodput for stats in cell.values())

    def jain_all(self, profile: str, variant: str) -> Optional[float]:
        return self._fairness.get((profile, variant))

    def _value(self, profile: str, variant: str, row: RowKey, metric: str) -> Optional[float]:
        stats = self.stats(profile, variant).get(row)
        return None if stats is None else getattr(stats, metric)

    def as_csv(self) -> str:
        digits = {"plr": 6, "goodput": 1, "jain": 6}
        rows = []
        for profile in self.profiles:
            for metric in ("plr", "goodput", "jain"):
                for row in self.rows:
                    values = [self._value(profile, variant, row, metric) for variant in self.variants]
                    rows.append(
                        [profile, metric, str(row[0]), str(row[1])] +
                        ["" if value is None else fixed(value, digits[metric]) for value in values]
                    )
                if metric == "goodput":
                    sums = [self.goodput_sum(profile, variant) for variant in self.variants]
                    rows.append(
                        [profile, metric, "", "sum"] + ["" if value is None else fixed(value, 1) for value in sums]
                    )
            fairness = [self.jain_all(profile, variant) for variant in self.variants]
            rows.append(
                [profile, "jain", "", "all"] + ["" if value is None else fixed(value, 6) for value in fairness]
            )
        return to_csv(["delay_profile", "metric", "group_id", "group_mtu"] + self.variants, rows)

    def as_text(self) -> str:
        blocks = []
        for profile in self.profiles:
            rows = [[f"Delay profile {profile}"] + self.variants]
            for title, metric, render in (
                    ("PLR (%)", "plr", percent),
                    ("Goodput (Mbit/s)", "goodput", mbps),
                    ("Jain index", "jain", lambda value: fixed(value, 3))):
                rows.append([title])
                for row in self.rows:
                    values = [self._value(profile, variant, row, metric) for variant in self.variants]
                    rows.append([self.label(row)] + ["-" if value is None else render(value) for value in values])
                if metric == "goodput":
                    sums = [self.goodput_sum(profile, variant) for variant in self.variants]
                    rows.append(["Sum"] + ["-" if value is None else mbps(value) for value in sums])
            fairness = [self.jain_all(profile, variant) for variant in self.variants]
            rows.append(["All flows"] + ["-" if value is None else fixed(value, 3) for value in fairness])
            blocks.append(align_columns(rows))
        return "\n".join(blocks)


def summary_table(results: Sequence[RunResult]) -> SummaryTable:
    return SummaryTable(results)
