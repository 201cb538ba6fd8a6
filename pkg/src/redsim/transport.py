# -*- coding: UTF-8 -*-

from __future__ import annotations

from bisect import bisect_left, bisect_right
from math import ceil
from typing import List, NamedTuple, Optional, Tuple

from .constants import (
    ACK_BYTES,
    DUP_ACK_THRESHOLD,
    HEADER_BYTES,
    INITIAL_RTO,
    INITIAL_SSTHRESH_SEGMENTS,
    MAX_RTO,
    MAX_SACK_BLOCKS,
    RECEIVER_WINDOW_SEGMENTS,
    TIMER_GRANULARITY,
)
from .exceptions import TransportError

Range = Tuple[int, int]


class Segment(NamedTuple):
    flow_id: int
    seq_start: int
    seq_end: int
    wire_len: int
    is_retransmit: bool


class AckPacket(NamedTuple):
    flow_id: int
    cum_ack: int
    sack_blocks: Tuple[Range, ...]
    wire_len: int = ACK_BYTES


def mss_for_mtu(mtu: int) -> int:
    """Payload carried by a full-size segment on a path of the given MTU."""
    mss = mtu - HEADER_BYTES
    if mss <= 0:
        raise TransportError(f"MTU {mtu} leaves no room for payload after {HEADER_BYTES} B of headers!")
    return mss


def ceil_to_granularity(seconds: float, granularity: float = TIMER_GRANULARITY) -> float:
    """Round up to the timer grid, tolerating float noise at grid points."""
    ticks = max(1, ceil(seconds / granularity - 1e-9))
    return ticks * granularity


class RangeSet(object):
    """Sorted, disjoint, merged half-open byte ranges."""

    __slots__ = ("_starts", "_ends")

    def __init__(self):
        self._starts: List[int] = []
        self._ends: List[int] = []

    def __len__(self) -> int:
        return len(self._starts)

    def __bool__(self) -> bool:
        return len(self._starts) > 0

    def __iter__(self):
        return iter(zip(self._starts, self._ends))

    def add(self, start: int, end: int) -> Range:
        """Insert `[start, end)` and return the merged range now holding it."""
        starts, ends = self._starts, self._ends
        lo = bisect_left(ends, start)
        hi = bisect_right(starts, end)
        if lo < hi:
            start = min(start, starts[lo])
            end = max(end, ends[hi - 1])
        starts[lo:hi] = [start]
        ends[lo:hi] = [end]
        return start, end

    def covers(self, start: int, end: int) -> bool:
        idx = bisect_right(self._starts, start) - 1
        return idx >= 0 and self._ends[idx] >= end

    def trim_below(self, seq: int):
        """Forget everything below `seq`."""
        starts, ends = self._starts, self._ends
        idx = bisect_right(ends, seq)
        del starts[:idx]
        del ends[:idx]
        if starts and starts[0] < seq:
            starts[0] = seq

    def absorb_from(self, seq: int) -> int:
        """
        Remove the range touching `seq` (if any) and return the new
        contiguous edge.
        """
        starts, ends = self._starts, self._ends
        while starts and starts[0] <= seq:
            seq = max(seq, ends[0])
            del starts[0]
            del ends[0]
        return seq

    @property
    def highest(self) -> int:
        return self._ends[-1] if self._ends else 0

    def ranges(self) -> List[Range]:
        return list(zip(self._starts, self._ends))


class TcpFlow(object):
    """
    Greedy SACK/Reno sender.

    Sequence numbers count payload bytes from 0 and every segment carries
    one full MSS, so segment boundaries are multiples of `mss`. `cwnd` and
    `ssthresh` are in bytes; `highest_sent` is the highest byte ever sent
    and `snd_nxt` the next byte the send loop will look at (it drops back
    to `cum_acked` after a timeout).

    Methods return the segments to put on the wire. The caller owns the
    clock and the timer event and reads `timer_deadline` after every call.
    """

    def __init__(self, flow_id: int, mtu: int, group_id: int = 0):
        self.flow_id: int = flow_id
        self.group_id: int = group_id
        self.mtu: int = mtu
        self.mss: int = mss_for_mtu(mtu)

        self.cwnd: float = float(self.mss)
        self.ssthresh: float = float(INITIAL_SSTHRESH_SEGMENTS * self.mss)
        self.rwnd: float = float(RECEIVER_WINDOW_SEGMENTS * self.mss)

        self.cum_acked: int = 0
        self.highest_sent: int = 0
        self.snd_nxt: int = 0
        self.sack_scoreboard = RangeSet()
        self.dup_ack_count: int = 0
        self.in_fast_recovery: bool = False
        self.recover: int = 0
        self._retransmitted: set = set()

        self.rto: float = INITIAL_RTO
        self.srtt: Optional[float] = None
        self.rttvar: Optional[float] = None
        self.timer_deadline: Optional[float] = None
        self._timed_end: Optional[int] = None
        self._timed_at: float = 0.0

        self.started: bool = False
        self.stopped: bool = False
        self.timeouts: int = 0
        self.fast_retransmits: int = 0

    def __repr__(self) -> str:
        return (
            f"TcpFlow(id={self.flow_id}, mss={self.mss}, cwnd={self.cwnd:.1f}, "
            f"ssthresh={self.ssthresh:.1f}, una={self.cum_acked}, nxt={self.snd_nxt})"
        )

    @property
    def flight_size(self) -> int:
        return self.snd_nxt - self.cum_acked

    @property
    def outstanding(self) -> bool:
        return self.highest_sent > self.cum_acked

    def on_app_start(self, now: float) -> List[Segment]:
        """Open the connection with a one-segment window."""
        if self.started:
            raise TransportError(f"Flow {self.flow_id} was already started!")
        self.started = True
        self.cwnd = float(self.mss)
        self.ssthresh = float(INITIAL_SSTHRESH_SEGMENTS * self.mss)
        return self._transmit(now)

    def stop(self):
        """Stop sending anything, retransmissions included."""
        self.stopped = True
        self.timer_deadline = None

    def on_ack(self, ack: AckPacket, now: float) -> List[Segment]:
        """
        Process one acknowledgment.

        :raise TransportError: If the ack belongs to another flow or
            acknowledges bytes that were never sent.
        """
        if ack.flow_id != self.flow_id:
            raise TransportError(f"Flow {self.flow_id} received an ack of flow {ack.flow_id}!")
        if ack.cum_ack > self.highest_sent:
            raise TransportError(
                f"Flow {self.flow_id} got an ack for byte {ack.cum_ack} "
                f"but only sent up to {self.highest_sent}!"
            )

        for start, end in ack.sack_blocks:
            if end > self.highest_sent:
                raise TransportError(
                    f"Flow {self.flow_id} got a SACK block up to {end} "
                    f"but only sent up to {self.highest_sent}!"
                )
            if end > ack.cum_ack:
                self.sack_scoreboard.add(max(start, ack.cum_ack), end)

        out: List[Segment] = []

        if ack.cum_ack > self.cum_acked:
            self._on_new_ack(ack.cum_ack, now, out)
        elif ack.cum_ack == self.cum_acked and self.outstanding:
            self._on_dup_ack(now, out)

        if self.stopped:
            return []

        out.extend(self._transmit(now))
        return out

    def _on_new_ack(self, cum_ack: int, now: float, out: List[Segment]):
        acked = cum_ack - self.cum_acked
        self.cum_acked = cum_ack
        if self.snd_nxt < cum_ack:
            self.snd_nxt = cum_ack
        self.sack_scoreboard.trim_below(cum_ack)
        self._retransmitted = {seq for seq in self._retransmitted if seq >= cum_ack}
        self.dup_ack_count = 0

        if self._timed_end is not None and cum_ack >= self._timed_end:
            self._sample_rtt(now - self._timed_at)
            self._timed_end = None

        if self.in_fast_recovery:
            if cum_ack >= self.recover:
                self.in_fast_recovery = False
                self.cwnd = self.ssthresh
                self._retransmitted.clear()
            elif not self.stopped:
                self._retransmit_hole(now, out)
        else:
            segments = acked // self.mss
            for _ in range(segments):
                if self.cwnd < self.ssthresh:
                    self.cwnd += self.mss
                else:
                    self.cwnd += self.mss * self.mss / self.cwnd

        if self.stopped:
            return
        if self.outstanding:
            self.timer_deadline = now + self.rto
        else:
            self.timer_deadline = None

    def _on_dup_ack(self, now: float, out: List[Segment]):
        self.dup_ack_count += 1
        if self.stopped:
            return

        if self.in_fast_recovery:
            self.cwnd += self.mss
            self._retransmit_hole(now, out)
        elif self.dup_ack_count == DUP_ACK_THRESHOLD and self.cum_acked >= self.recover:
            # below `recover` the dup acks echo our own go-back retransmissions
            self.fast_retransmits += 1
            self.ssthresh = max(self.flight_size / 2.0, 2.0 * self.mss)
            self.recover = self.highest_sent
            self.in_fast_recovery = True
            self._retransmitted.clear()
            self._retransmit_hole(now, out)
            self.cwnd = self.ssthresh + DUP_ACK_THRESHOLD * self.mss
            self.timer_deadline = now + self.rto

    def _next_hole(self) -> Optional[int]:
        """Earliest unsacked, not yet retransmitted segment below the SACK edge."""
        mss = self.mss
        candidate = self.cum_acked
        for start, end in self.sack_scoreboard:
            while candidate < start:
                if candidate not in self._retransmitted:
                    return candidate
                candidate += mss
            if candidate < end:
                candidate = end
        if not self.sack_scoreboard and candidate not in self._retransmitted:
            # plain dup acks without SACK information: resend the head
            return candidate if candidate < self.highest_sent else None
        return None

    def _retransmit_hole(self, now: float, out: List[Segment]):
        seq = self._next_hole()
        if seq is None:
            return
        self._retransmitted.add(seq)
        out.append(self._segment(seq, retransmit=True, now=now))

    def on_timeout(self, now: float) -> List[Segment]:
        """Retransmission timer expired: collapse to one segment and go back."""
        if self.stopped:
            self.timer_deadline = None
            return []
        if not self.outstanding:
            self.timer_deadline = None
            return []

        self.timeouts += 1
        self.ssthresh = max(self.flight_size / 2.0, 2.0 * self.mss)
        self.cwnd = float(self.mss)
        self.recover = self.highest_sent
        self.in_fast_recovery = False
        self.dup_ack_count = 0
        self._retransmitted.clear()
        self._timed_end = None
        self.rto = min(self.rto * 2.0, MAX_RTO)
        self.snd_nxt = self.cum_acked

        out = self._transmit(now)
        self.timer_deadline = now + self.rto
        return out

    def compute_rto(self) -> float:
        """Jacobson estimate on the timer grid, floored at one tick."""
        if self.srtt is None:
            return INITIAL_RTO
        rto = ceil_to_granularity(self.srtt + 4.0 * self.rttvar)
        return min(rto, MAX_RTO)

    def _sample_rtt(self, sample: float):
        if self.srtt is None:
            self.srtt = sample
            self.rttvar = sample / 2.0
        else:
            self.rttvar = 0.75 * self.rttvar + 0.25 * abs(self.srtt - sample)
            self.srtt = 0.875 * self.srtt + 0.125 * sample
        self.rto = self.compute_rto()

    def _segment(self, seq: int, retransmit: bool, now: float) -> Segment:
        end = seq + self.mss
        if retransmit:
            if self._timed_end is not None and seq < self._timed_end:
                self._timed_end = None
        elif self._timed_end is None:
            self._timed_end = end
            self._timed_at = now
        if end > self.highest_sent:
            self.highest_sent = end
        return Segment(self.flow_id, seq, end, self.mss + HEADER_BYTES, retransmit)

    def _transmit(self, now: float) -> List[Segment]:
        """Send what the window allows, skipping sacked segments."""
        out: List[Segment] = []
        if self.stopped:
            return out

        mss = self.mss
        window = min(self.cwnd, self.rwnd)
        while self.snd_nxt - self.cum_acked + mss <= window:
            seq = self.snd_nxt
            self.snd_nxt = seq + mss
            if seq < self.highest_sent:
                if self.sack_scoreboard.covers(seq, seq + mss):
                    continue
                out.append(self._segment(seq, retransmit=True, now=now))
            else:
                out.append(self._segment(seq, retransmit=False, now=now))

        if out and self.timer_deadline is None:
            self.timer_deadline = now + self.rto
        return out


class TcpReceiver(object):
    """Cumulative + SACK acknowledger; one ack per received segment."""

    def __init__(self, flow_id: int):
        self.flow_id: int = flow_id
        self.rcv_nxt: int = 0
        self.out_of_order = RangeSet()
        self.duplicates: int = 0

    @property
    def delivered_bytes(self) -> int:
        return self.rcv_nxt

    def on_segment_received(self, seg: Segment) -> AckPacket:
        if seg.flow_id != self.flow_id:
            raise TransportError(f"Receiver {self.flow_id} got a segment of flow {seg.flow_id}!")

        latest: Optional[Range] = None

        if seg.seq_end <= self.rcv_nxt or self.out_of_order.covers(seg.seq_start, seg.seq_end):
            self.duplicates += 1
        elif seg.seq_start <= self.rcv_nxt:
            self.rcv_nxt = self.out_of_order.absorb_from(seg.seq_end)
        else:
            latest = self.out_of_order.add(seg.seq_start, seg.seq_end)

        return AckPacket(self.flow_id, self.rcv_nxt, self._sack_blocks(latest))

    def _sack_blocks(self, latest: Optional[Range]) -> Tuple[Range, ...]:
        """The block holding the newest segment first, then the lowest others."""
        if not self.out_of_order:
            return ()
        blocks: List[Range] = [latest] if latest is not None else []
        for block in self.out_of_order:
            if len(blocks) == MAX_SACK_BLOCKS:
                break
            if block != latest:
                blocks.append(block)
        return tuple(blocks)
