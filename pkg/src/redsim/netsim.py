# -*- coding: UTF-8 -*-

from __future__ import annotations

from collections import deque
from typing import List, Optional, Sequence, Union

from logpie import get_logger, Logger

from .aqm import Outcome, RedParams, RedState, RedVariant, on_arrival
from .constants import DROP_TAIL, LEDGER_BIN, OUTPUT_DEFAULTS, RED_DEFAULTS, RUN_DEFAULTS, TOPOLOGY_DEFAULTS
from .descriptors import (
    ImmutableCountVar,
    ImmutableNonNegativeVar,
    ImmutablePositiveVar,
    ImmutableStringVar,
    ImmutableBoolVar,
    ImmutableVar,
)
from .exceptions import ArgumentError, ScenarioError, TopologyError, TransportError
from .metrics import (
    FlowLedger,
    GroupInfo,
    QueueTrace,
    RunResult,
    audit_conservation,
    flow_jain,
    group_stats,
)
from .mixins import Record
from .simkernel import EventEngine, RandomStream
from .transport import AckPacket, Segment, TcpFlow, TcpReceiver, mss_for_mtu
from .utils import fixed, mbps, percent

Packet = Union[Segment, AckPacket]


class Link(Record):
    """Rate in bit/s, propagation delay in seconds; FIFO."""

    rate: float = ImmutablePositiveVar()
    prop_delay: float = ImmutableNonNegativeVar()

    def __init__(self, rate: float, prop_delay: float):
        self.rate = rate
        self.prop_delay = prop_delay

    def serialization(self, wire_len: int) -> float:
        return wire_len * 8.0 / self.rate


class Group(Record):
    """`flow_count` bulk senders sharing one path MTU."""

    flow_count: int = ImmutableCountVar(1)
    mtu: int = ImmutableCountVar(1)

    def __init__(self, flow_count: int, mtu: int):
        self.flow_count = flow_count
        self.mtu = mtu
        try:
            mss_for_mtu(self.mtu)
        except TransportError as error:
            raise ScenarioError("groups", str(error)) from None

    @classmethod
    def parse(cls, text: str) -> Group:
        """`count@mtu`, e.g. `20@1500`."""
        count, sep, mtu = text.strip().partition("@")
        if not sep:
            raise ScenarioError("groups", f"expected 'count@mtu' not '{text.strip()}'!")
        try:
            return cls(int(count), int(mtu))
        except ValueError:
            raise ScenarioError("groups", f"expected integers in 'count@mtu' not '{text.strip()}'!") from None

    def __str__(self) -> str:
        return f"{self.flow_count}@{self.mtu}"


def parse_groups(text: str) -> List[Group]:
    items = [item for item in text.split(",") if item.strip()]
    if not items:
        raise ScenarioError("groups", "at least one 'count@mtu' group is required!")
    return [Group.parse(item) for item in items]


def delay_label(delay: float) -> str:
    return f"{delay * 1000:g}ms"


class Scenario(Record):
    """
    A fully resolved simulation setup.

    **Keyword arguments:**
        Any field below; missing ones take the reference defaults from
        `constants`.
    """

    name: str = ImmutableStringVar()
    groups: List[Group] = ImmutableVar()
    bottleneck_rate: float = ImmutablePositiveVar()
    bottleneck_delay: float = ImmutablePositiveVar()
    access_rate: float = ImmutablePositiveVar()
    access_delay_jitter: float = ImmutableNonNegativeVar()
    start_jitter: float = ImmutableNonNegativeVar()
    variant: str = ImmutableStringVar()
    red_params: RedParams = ImmutableVar()
    duration: float = ImmutablePositiveVar()
    warmup: float = ImmutableNonNegativeVar()
    drain: float = ImmutablePositiveVar()
    seed: int = ImmutableCountVar(0)
    trace_queue: bool = ImmutableBoolVar()
    trace_interval: float = ImmutablePositiveVar()
    trace_flows: bool = ImmutableBoolVar()

    def __init__(self, **kwargs):
        self.name = kwargs.pop("name", RUN_DEFAULTS["name"])

        groups = kwargs.pop("groups", TOPOLOGY_DEFAULTS["groups"])
        self.groups = parse_groups(groups) if isinstance(groups, str) else list(groups)
        if len(self.groups) == 0:
            raise ScenarioError("groups", "at least one group with at least one flow is required!")

        self.bottleneck_rate = kwargs.pop("bottleneck_rate", TOPOLOGY_DEFAULTS["bottleneck_rate"])
        self.bottleneck_delay = kwargs.pop("bottleneck_delay", TOPOLOGY_DEFAULTS["bottleneck_delay"])
        self.access_rate = kwargs.pop("access_rate", TOPOLOGY_DEFAULTS["access_rate"])
        self.access_delay_jitter = kwargs.pop("access_delay_jitter", TOPOLOGY_DEFAULTS["access_delay_jitter"])
        self.start_jitter = kwargs.pop("start_jitter", TOPOLOGY_DEFAULTS["start_jitter"])

        variant = str(kwargs.pop("variant", RED_DEFAULTS["variant"])).strip().upper()
        if variant != DROP_TAIL:
            variant = RedVariant.parse(variant).value
        self.variant = variant

        red_params = kwargs.pop("red_params", None) or RedParams()
        if variant == DROP_TAIL and not red_params.is_drop_tail:
            red_params = RedParams.drop_tail(red_params.capacity, red_params.M)
        self.red_params = red_params

        self.duration = kwargs.pop("duration", RUN_DEFAULTS["duration"])
        self.warmup = kwargs.pop("warmup", RUN_DEFAULTS["warmup"])
        self.drain = kwargs.pop("drain", RUN_DEFAULTS["drain"])
        self.seed = kwargs.pop("seed", RUN_DEFAULTS["seed"])
        self.trace_queue = kwargs.pop("trace_queue", OUTPUT_DEFAULTS["trace_queue"])
        self.trace_interval = kwargs.pop("trace_interval", OUTPUT_DEFAULTS["trace_interval"])
        self.trace_flows = kwargs.pop("trace_flows", OUTPUT_DEFAULTS["trace_flows"])

        if len(kwargs) > 0:
            raise ArgumentError(
                f"Failed to resolve parameters ({', '.join(map(repr, kwargs))}) for Scenario!"
            )

        if not self.warmup < self.duration:
            raise ScenarioError("warmup", f"must be shorter than duration ({self.warmup} >= {self.duration})!")
        for field in ("warmup", "duration"):
            value = getattr(self, field)
            ratio = value / LEDGER_BIN
            if abs(ratio - round(ratio)) > 1e-6:
                raise ScenarioError(field, f"must be a multiple of the {LEDGER_BIN} s ledger bin, not {value}!")

        largest = max(group.mtu for group in self.groups)
        if largest > self.red_params.M:
            raise ScenarioError("M", f"must cover the largest group MTU ({largest} > {self.red_params.M})!")

    @property
    def flow_count(self) -> int:
        return sum(group.flow_count for group in self.groups)

    @property
    def delay_profile(self) -> str:
        return delay_label(self.bottleneck_delay)

    @property
    def window(self) -> tuple:
        return self.warmup, self.duration

    def _render(self, key, value):
        if key == "groups":
            return ", ".join(str(group) for group in value)
        return super(Scenario, self)._render(key, value)


class RouterQueue(object):
    """Byte-counted FIFO in front of a link, guarded by RED."""

    def __init__(self, variant: Union[RedVariant, str], params: RedParams, link: Link):
        self.red_state = RedState(RedVariant.RED1 if variant == DROP_TAIL else variant)
        self.red_params = params
        self.link = link
        self.fifo: deque = deque()
        self.bytes_queued: int = 0
        self.busy: bool = False

    def __len__(self) -> int:
        return len(self.fifo)

    def offer(self, pkt: Segment, u: float):
        """Run the drop decision; enqueue on accept."""
        decision = on_arrival(self.red_state, self.red_params, pkt.wire_len, self.bytes_queued, u)
        if decision.outcome is Outcome.ACCEPT:
            self.fifo.append(pkt)
            self.bytes_queued += pkt.wire_len
        return decision

    def head(self) -> Segment:
        return self.fifo[0]

    def pop(self) -> Segment:
        pkt = self.fifo.popleft()
        self.bytes_queued -= pkt.wire_len
        return pkt


class AccessPath(object):
    """Per-flow access links on both sides plus the timer bookkeeping."""

    __slots__ = ("jitter", "up_free", "down_free", "reverse_delay", "timer_at", "timer_gen")

    def __init__(self, jitter: float, bottleneck_delay: float):
        self.jitter = jitter
        self.up_free: float = 0.0
        self.down_free: float = 0.0
        self.reverse_delay: float = bottleneck_delay + 2.0 * jitter
        self.timer_at: Optional[float] = None
        self.timer_gen: int = 0


class Simulation(object):
    """
    One instance of a scenario; single-threaded.

    Dumbbell: per-flow access links into R1, the RED-managed R1->R2
    bottleneck, per-flow links out of R2 and a delay-only, lossless
    reverse path for the acks.
    """

    def __init__(self, scenario: Scenario, **kwargs):
        self._log: Logger = kwargs.pop(
            "logger",
            get_logger("redsim", state="off")
        )

        self.scenario = scenario
        self.engine = EventEngine(logger=self._log)
        self.horizon: float = scenario.duration + scenario.drain

        root = RandomStream(scenario.seed)
        self._aqm_stream = root.spawn("aqm")

        self.bottleneck = Link(scenario.bottleneck_rate, scenario.bottleneck_delay)
        self.access = Link(scenario.access_rate, 0.0)
        self.queue = RouterQueue(scenario.variant, scenario.red_params, self.bottleneck)
        self.queue_trace = QueueTrace()

        # seconds on the wire per byte:
        self._bottleneck_spb: float = self.bottleneck.serialization(1)
        self._access_spb: float = self.access.serialization(1)
        self._schedule = self.engine.schedule

        self.flows: List[TcpFlow] = []
        self.receivers: List[TcpReceiver] = []
        self.ledgers: List[FlowLedger] = []
        self.paths: List[AccessPath] = []
        self.start_times: List[float] = []
        self.groups: List[GroupInfo] = []

        for group_id, group in enumerate(scenario.groups):
            flow_ids = []
            for _ in range(group.flow_count):
                flow_id = len(self.flows)
                stream = root.spawn(f"flow-{flow_id}")
                jitter = stream.uniform(0.0, scenario.access_delay_jitter)
                self.start_times.append(stream.uniform(0.0, scenario.start_jitter))
                self.flows.append(TcpFlow(flow_id, group.mtu, group_id))
                self.receivers.append(TcpReceiver(flow_id))
                self.ledgers.append(
                    FlowLedger(flow_id, group_id, group.mtu, self.horizon, trace=scenario.trace_flows)
                )
                self.paths.append(AccessPath(jitter, scenario.bottleneck_delay))
                flow_ids.append(flow_id)
            self.groups.append(GroupInfo(group_id, group.mtu, tuple(flow_ids)))

        self._log.info(
            f"Built topology '{scenario.name}': {len(self.flows)} flows in "
            f"{len(self.groups)} groups, {scenario.variant}, "
            f"{mbps(scenario.bottleneck_rate)} Mbit/s, {scenario.delay_profile}."
        )

    def run(self) -> RunResult:
        """Run sources until `duration`, drain, audit and report."""
        scenario = self.scenario
        engine = self.engine

        for flow_id, start in enumerate(self.start_times):
            engine.schedule(start, self._start_flow, flow_id)
        engine.schedule(scenario.duration, self._stop_sources)
        if scenario.trace_queue:
            engine.schedule(0.0, self._sample_queue, 0)

        events = engine.run_until(self.horizon)

        try:
            self._audit()
        except Exception as error:
            self._log.error(f"Run '{scenario.name}' failed its conservation audit!", exc_info=error)
            raise

        result = RunResult(
            scenario_id=scenario.name,
            seed=scenario.seed,
            variant=scenario.variant,
            delay_profile=scenario.delay_profile,
            groups=self.groups,
            ledgers=self.ledgers,
            window=scenario.window,
            horizon=self.horizon,
            bottleneck_rate=scenario.bottleneck_rate,
            queue_trace=self.queue_trace,
            events=events,
        )
        for stats in group_stats(result):
            self._log.info(
                f"Run '{scenario.name}' group {stats.group_id} (MTU {stats.mtu}): PLR {percent(stats.plr)}%, "
                f"goodput {mbps(stats.goodput)} Mbit/s, Jain {fixed(stats.jain, 3)}."
            )
        self._log.info(f"Run '{scenario.name}' Jain index over all flows: {fixed(flow_jain(result), 3)}.")
        return result

    def _audit(self):
        if len(self.queue) != 0:
            raise TopologyError(
                f"{len(self.queue)} packet(s) still queued at the bottleneck after "
                f"{fixed(self.scenario.drain, 3)} s of drain!"
            )
        audit_conservation(self.ledgers)

    def _start_flow(self, flow_id: int):
        now = self.engine.now
        self._send(flow_id, self.flows[flow_id].on_app_start(now), now)
        self._arm_timer(flow_id)

    def _stop_sources(self):
        for flow in self.flows:
            flow.stop()

    def _sample_queue(self, index: int):
        state = self.queue.red_state
        self.queue_trace.record(self.engine.now, self.queue.bytes_queued, state.avg)
        next_at = (index + 1) * self.scenario.trace_interval
        if next_at <= self.scenario.duration:
            self.engine.schedule(next_at, self._sample_queue, index + 1)

    def _send(self, flow_id: int, segments: Sequence[Segment], now: float):
        if not segments:
            return
        path = self.paths[flow_id]
        on_sent = self.ledgers[flow_id].on_sent
        schedule, forward, spb = self._schedule, self.forward, self._access_spb
        up_free, jitter = path.up_free, path.jitter
        for segment in segments:
            on_sent(now)
            up_free = (now if now > up_free else up_free) + segment.wire_len * spb
            schedule(up_free + jitter, forward, segment)
        path.up_free = up_free

    def forward(self, pkt: Segment):
        """A data packet reaches R1 and meets the RED queue."""
        now = self.engine.now
        ledger = self.ledgers[pkt.flow_id]
        ledger.on_arrival(now)

        queue = self.queue
        outcome = queue.offer(pkt, self._aqm_stream.next_uniform()).outcome
        if outcome is not Outcome.ACCEPT:
            ledger.on_drop(now, outcome is Outcome.FORCED_DROP)
            return

        if not queue.busy:
            self._start_service(now)

    def _start_service(self, now: float):
        queue = self.queue
        queue.busy = True
        self._schedule(now + queue.head().wire_len * self._bottleneck_spb, self._on_departure)

    def _on_departure(self):
        now = self.engine.now
        queue = self.queue
        pkt = queue.pop()
        queue.busy = False

        path = self.paths[pkt.flow_id]
        at_r2 = now + self.bottleneck.prop_delay
        down_free = path.down_free
        path.down_free = (at_r2 if at_r2 > down_free else down_free) + pkt.wire_len * self._access_spb
        self._schedule(path.down_free + path.jitter, self.deliver, pkt)

        if queue.fifo:
            self._start_service(now)

    def deliver(self, pkt: Packet):
        """
        Hand a packet to its endpoint.

        :raise TopologyError: For unknown flows or packet kinds.
        """
        flow_id = pkt.flow_id
        if not 0 <= flow_id < len(self.flows):
            raise TopologyError(f"Cannot deliver a packet of unknown flow {flow_id}!")

        now = self.engine.now

        kind = type(pkt)
        if kind is Segment:
            self.ledgers[flow_id].on_delivered(now)
            ack = self.receivers[flow_id].on_segment_received(pkt)
            self._schedule(now + self.paths[flow_id].reverse_delay, self.deliver, ack)

        elif kind is AckPacket:
            flow = self.flows[flow_id]
            before = flow.cum_acked
            segments = flow.on_ack(pkt, now)
            if flow.cum_acked > before:
                self.ledgers[flow_id].on_acked(now, flow.cum_acked - before)
            self._send(flow_id, segments, now)
            self._arm_timer(flow_id)

        else:
            raise TopologyError(f"Cannot deliver object of type '{type(pkt).__name__}'!")

    def _arm_timer(self, flow_id: int):
        """Keep one check event at or before the flow's deadline."""
        deadline = self.flows[flow_id].timer_deadline
        if deadline is None:
            return
        path = self.paths[flow_id]
        if path.timer_at is not None and path.timer_at <= deadline:
            return
        path.timer_gen += 1
        path.timer_at = deadline
        self.engine.schedule(deadline, self._on_timer, flow_id, path.timer_gen)

    def _on_timer(self, flow_id: int, generation: int):
        path = self.paths[flow_id]
        if generation != path.timer_gen:
            return
        path.timer_at = None

        flow = self.flows[flow_id]
        deadline = flow.timer_deadline
        if deadline is None:
            return

        now = self.engine.now
        if now < deadline:
            self._arm_timer(flow_id)
            return

        self._send(flow_id, flow.on_timeout(now), now)
        self._arm_timer(flow_id)


def build_topology(scenario: Scenario, **kwargs) -> Simulation:
    """
    Wire a simulation instance for `scenario`.

    **Keyword arguments:**
        ``logger``: Logger
            A `logpie` logger; silent by default.
    """
    return Simulation(scenario, **kwargs)


def run_scenario(scenario: Scenario, **kwargs) -> RunResult:
    return build_topology(scenario, **kwargs).run()
