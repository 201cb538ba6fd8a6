# -*- coding: UTF-8 -*-

import pytest

from redsim.exceptions import TransportError
from redsim.simkernel import RandomStream
from redsim.transport import (
    AckPacket,
    RangeSet,
    Segment,
    TcpFlow,
    TcpReceiver,
    ceil_to_granularity,
    mss_for_mtu,
)

MSS = 1460


def segment(k: int, retransmit: bool = False) -> Segment:
    return Segment(0, k * MSS, (k + 1) * MSS, MSS + 40, retransmit)


def test_mss_for_mtu():
    assert mss_for_mtu(1500) == 1460
    assert mss_for_mtu(375) == 335
    with pytest.raises(TransportError):
        mss_for_mtu(40)


def test_ceil_to_granularity():
    assert ceil_to_granularity(0.3) == pytest.approx(0.4)
    assert ceil_to_granularity(0.4) == pytest.approx(0.4)
    assert ceil_to_granularity(0.01) == pytest.approx(0.2)
    assert ceil_to_granularity(1.05) == pytest.approx(1.2)


def test_range_set_merges():
    ranges = RangeSet()
    ranges.add(0, 10)
    ranges.add(20, 30)
    assert ranges.ranges() == [(0, 10), (20, 30)]
    assert ranges.add(10, 20) == (0, 30)
    assert ranges.ranges() == [(0, 30)]
    assert ranges.covers(5, 25)
    assert not ranges.covers(25, 35)


def test_range_set_trim_and_absorb():
    ranges = RangeSet()
    ranges.add(10, 20)
    ranges.add(30, 40)
    ranges.trim_below(15)
    assert ranges.ranges() == [(15, 20), (30, 40)]
    assert ranges.absorb_from(15) == 20
    assert ranges.ranges() == [(30, 40)]
    assert ranges.absorb_from(25) == 25
    assert ranges.highest == 40


def test_start_sends_one_segment_and_arms_timer():
    flow = TcpFlow(0, 1500)
    out = flow.on_app_start(0.0)
    assert out == [segment(0)]
    assert flow.timer_deadline == pytest.approx(1.0)
    with pytest.raises(TransportError):
        flow.on_app_start(0.0)


def test_slow_start_doubles_the_window():
    flow = TcpFlow(0, 1500)
    flow.on_app_start(0.0)
    out = flow.on_ack(AckPacket(0, MSS, ()), 0.1)
    assert flow.cwnd == 2 * MSS
    assert out == [segment(1), segment(2)]


def test_congestion_avoidance_grows_by_one_mss_per_window():
    flow = TcpFlow(0, 1500)
    flow.on_app_start(0.0)
    flow.ssthresh = MSS
    flow.on_ack(AckPacket(0, MSS, ()), 0.1)
    assert flow.cwnd == pytest.approx(2 * MSS)
    flow.on_ack(AckPacket(0, 2 * MSS, ()), 0.2)
    assert flow.cwnd == pytest.approx(2 * MSS + MSS / 2)


def test_first_rtt_sample_sets_rto_on_the_grid():
    flow = TcpFlow(0, 1500)
    flow.on_app_start(0.0)
    flow.on_ack(AckPacket(0, MSS, ()), 0.1)
    assert flow.srtt == pytest.approx(0.1)
    assert flow.rttvar == pytest.approx(0.05)
    assert flow.rto == pytest.approx(0.4)


def test_small_rtt_rto_floors_at_one_tick():
    flow = TcpFlow(0, 1500)
    flow.on_app_start(0.0)
    flow.on_ack(AckPacket(0, MSS, ()), 0.02)
    assert flow.rto == pytest.approx(0.2)


def test_timeout_goes_back_and_backs_off():
    flow = TcpFlow(0, 1500)
    flow.on_app_start(0.0)
    out = flow.on_timeout(1.0)
    assert out == [segment(0, retransmit=True)]
    assert flow.timeouts == 1
    assert flow.rto == pytest.approx(2.0)
    assert flow.timer_deadline == pytest.approx(3.0)
    assert flow.cwnd == MSS
    assert flow.ssthresh == 2 * MSS

    for _ in range(10):
        flow.on_timeout(flow.timer_deadline)
    assert flow.rto == 60.0


def test_retransmitted_segment_gives_no_rtt_sample():
    flow = TcpFlow(0, 1500)
    flow.on_app_start(0.0)
    flow.on_timeout(1.0)
    flow.on_ack(AckPacket(0, MSS, ()), 1.3)
    assert flow.srtt is None
    assert flow.rto == pytest.approx(2.0)


def open_window(flow: TcpFlow, receiver: TcpReceiver) -> list:
    """Deliver the first segment and let the window open to ten segments."""
    first = flow.on_app_start(0.0)
    flow.cwnd = 9 * MSS
    ack = receiver.on_segment_received(first[0])
    return flow.on_ack(ack, 0.05)


def test_three_dup_acks_trigger_fast_retransmit():
    flow, receiver = TcpFlow(0, 1500), TcpReceiver(0)
    burst = open_window(flow, receiver)
    assert burst == [segment(k) for k in range(1, 11)]

    outputs = [flow.on_ack(receiver.on_segment_received(seg), 0.1) for seg in burst[1:4]]
    assert outputs[0] == [] and outputs[1] == []
    assert outputs[2] == [segment(1, retransmit=True)]
    assert flow.fast_retransmits == 1
    assert flow.in_fast_recovery
    assert flow.ssthresh == pytest.approx(5 * MSS)
    assert flow.cwnd == pytest.approx(8 * MSS)


def test_recovery_exit_deflates_to_ssthresh():
    flow, receiver = TcpFlow(0, 1500), TcpReceiver(0)
    burst = open_window(flow, receiver)
    for seg in burst[1:]:
        flow.on_ack(receiver.on_segment_received(seg), 0.1)
    assert flow.in_fast_recovery

    ack = receiver.on_segment_received(segment(1, retransmit=True))
    assert ack.cum_ack == 11 * MSS
    flow.on_ack(ack, 0.2)
    assert not flow.in_fast_recovery
    assert flow.cwnd == pytest.approx(flow.ssthresh)
    assert flow.dup_ack_count == 0


def test_ack_validation():
    flow = TcpFlow(0, 1500)
    flow.on_app_start(0.0)
    with pytest.raises(TransportError):
        flow.on_ack(AckPacket(1, MSS, ()), 0.1)
    with pytest.raises(TransportError):
        flow.on_ack(AckPacket(0, 5 * MSS, ()), 0.1)
    with pytest.raises(TransportError):
        flow.on_ack(AckPacket(0, 0, ((MSS, 3 * MSS),)), 0.1)


def test_stopped_flow_sends_nothing():
    flow = TcpFlow(0, 1500)
    flow.on_app_start(0.0)
    flow.stop()
    assert flow.on_ack(AckPacket(0, MSS, ()), 0.1) == []
    assert flow.on_timeout(5.0) == []
    assert flow.timer_deadline is None


def test_receiver_in_order_and_sack_blocks():
    receiver = TcpReceiver(0)
    assert receiver.on_segment_received(segment(0)) == AckPacket(0, MSS, ())
    assert receiver.on_segment_received(segment(2)).sack_blocks == ((2 * MSS, 3 * MSS),)
    ack = receiver.on_segment_received(segment(4))
    assert ack.cum_ack == MSS
    assert ack.sack_blocks == ((4 * MSS, 5 * MSS), (2 * MSS, 3 * MSS))
    assert receiver.on_segment_received(segment(3)).sack_blocks == ((2 * MSS, 5 * MSS),)
    ack = receiver.on_segment_received(segment(1))
    assert ack == AckPacket(0, 5 * MSS, ())
    assert receiver.delivered_bytes == 5 * MSS


def test_receiver_counts_duplicates_and_caps_blocks():
    receiver = TcpReceiver(0)
    for k in (2, 4, 6, 8):
        receiver.on_segment_received(segment(k))
    ack = receiver.on_segment_received(segment(10))
    assert len(ack.sack_blocks) == 3
    assert ack.sack_blocks[0] == (10 * MSS, 11 * MSS)
    receiver.on_segment_received(segment(4))
    assert receiver.duplicates == 1
    with pytest.raises(TransportError):
        receiver.on_segment_received(Segment(1, 0, MSS, 1500, False))


def test_fast_retransmit_restarts_the_timer():
    flow, receiver = TcpFlow(0, 1500), TcpReceiver(0)
    burst = open_window(flow, receiver)
    assert flow.rto == pytest.approx(0.2)
    assert flow.timer_deadline == pytest.approx(0.25)

    for seg in burst[1:4]:
        flow.on_ack(receiver.on_segment_received(seg), 0.2)
    assert flow.fast_retransmits == 1
    assert flow.timer_deadline == pytest.approx(0.4)


def test_go_back_duplicates_do_not_halve_the_window_again():
    flow, receiver = TcpFlow(0, 1500), TcpReceiver(0)
    burst = open_window(flow, receiver)

    # segment 1 is lost and the timer fires before the rest arrive
    assert flow.on_timeout(0.3) == [segment(1, retransmit=True)]
    assert flow.ssthresh == pytest.approx(5 * MSS)

    for seg in burst[1:]:
        assert flow.on_ack(receiver.on_segment_received(seg), 0.35) == []
    assert flow.dup_ack_count == 9
    assert flow.fast_retransmits == 0
    assert flow.ssthresh == pytest.approx(5 * MSS)

    out = flow.on_ack(receiver.on_segment_received(segment(1, retransmit=True)), 0.4)
    assert flow.cum_acked == 11 * MSS
    assert out and all(seg.seq_start >= 11 * MSS and not seg.is_retransmit for seg in out)


def test_every_hole_of_a_window_is_resent_on_consecutive_dup_acks():
    flow, receiver = TcpFlow(0, 1500), TcpReceiver(0)
    burst = open_window(flow, receiver)
    lost = {3, 5, 7}

    outputs = {}
    for seg in burst:
        k = seg.seq_start // MSS
        if k not in lost:
            outputs[k] = flow.on_ack(receiver.on_segment_received(seg), 0.1)
    assert outputs[4] == [] and outputs[6] == []
    assert outputs[8] == [segment(3, retransmit=True)]
    assert outputs[9] == [segment(5, retransmit=True)]
    assert outputs[10] == [segment(7, retransmit=True)]
    assert flow.fast_retransmits == 1

    for k in sorted(lost):
        flow.on_ack(receiver.on_segment_received(segment(k, retransmit=True)), 0.2)
    assert flow.cum_acked == 11 * MSS
    assert receiver.duplicates == 0
    assert flow.timeouts == 0


def run_lossy(flow: TcpFlow, receiver: TcpReceiver, lose, rounds: int, rtt: float = 0.1) -> TcpFlow:
    """
    One round trip per round: what is sent in a round reaches the receiver
    (unless `lose` says otherwise) and is acknowledged before the next one.
    """
    pending = flow.on_app_start(0.0)
    for idx in range(1, rounds + 1):
        now = idx * rtt
        sent, pending = pending, []
        for seg in sent:
            if not lose(seg):
                pending.extend(flow.on_ack(receiver.on_segment_received(seg), now))
        if not pending:
            pending = flow.on_timeout(now)
    return flow


def test_cwnd_is_a_sawtooth_under_periodic_loss():
    flow, receiver = TcpFlow(0, 1500), TcpReceiver(0)
    first_copies = set()

    def lose(seg: Segment) -> bool:
        k = seg.seq_start // MSS
        if k % 100 == 50 and k not in first_copies:
            first_copies.add(k)
            return True
        return False

    epochs = [[]]
    pending = flow.on_app_start(0.0)
    now = 0.0
    while flow.cum_acked < 1000 * MSS:
        seg = pending.pop(0)
        now += 0.001
        if lose(seg):
            continue
        before, recoveries = flow.cum_acked, flow.fast_retransmits
        pending.extend(flow.on_ack(receiver.on_segment_received(seg), now))
        if flow.fast_retransmits > recoveries:
            epochs.append([])
        if flow.cum_acked > before and not flow.in_fast_recovery:
            epochs[-1].append(flow.cwnd)

    assert flow.timeouts == 0
    assert flow.fast_retransmits == len(first_copies) >= 9
    assert len(epochs) == flow.fast_retransmits + 1
    for previous, epoch in zip(epochs, epochs[1:]):
        assert all(a < b for a, b in zip(epoch, epoch[1:]))
        assert epoch[0] <= previous[-1] / 2.0 + 1e-9


@pytest.mark.parametrize("p", [0.005, 0.02])
def test_larger_segments_win_under_equal_random_loss(p):
    draws = RandomStream(11).spawn(f"loss-{p}")
    goodputs = []
    for mtu in (1500, 750, 375):
        flow = run_lossy(TcpFlow(0, mtu), TcpReceiver(0), lambda seg: draws.next_uniform() < p, rounds=3000)
        goodputs.append(8.0 * flow.cum_acked / (3000 * 0.1))
    assert goodputs[0] > goodputs[1] > goodputs[2]
