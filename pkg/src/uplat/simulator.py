"""Discrete-event model of the periodic-traffic TDD uplink.

Pipeline per packet: periodic arrival (with jitter) into a single RLC
queue -> FIFO service into granted slots, one segment per slot -> per
segment an independent HARQ process with up to ``max_harq_attempts``
attempts -> gNB decode -> reassembly when the last segment decodes ->
one core-network hop.

Slot allocation, in priority order at every uplink-capable slot:

1. A pending retransmission whose HARQ round-trip has elapsed.
2. The head new-data segment, if the slot is grant-class -- or any
   uplink slot once the segment has been bumped (see below).

When a retransmission (or an already-bumped segment) occupies a grant
slot that the head new-data segment was ready for, that segment is
marked *bumped* and may overflow into plain uplink slots.  This mirrors
a scheduler giving a backlogged flow extra opportunities and keeps the
queue from drifting when grants are fully subscribed.

Timestamps: a segment is taken from the queue (and its attempt "send"
stamped) one preparation time before its slot starts; the decode
completes one tx/decode latency after the slot starts.  The attempt at
the attempt cap always decodes: journeys never end in RLC loss here.

Determinism: one PRNG seeded from the config draws, in order, all
arrival jitters, then all core-hop delays, then HARQ outcomes in slot
order.  Identical config and seed give byte-identical traces.

Per packet with M segments and L total attempts the stream holds
``4 + M + 2*L`` events (ARRIVAL, SERVICE, M SEGMENT_TAKEN, L tx/decode
pairs, RLC_REASSEMBLED, CORE_DEPARTURE).
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass

from .config import ExperimentConfig, TddConfig
from .decompose import decompose
from .errors import UnknownGrantError
from .trace import (
    DelayDecomposition,
    EventKind,
    HarqAttempt,
    Layer,
    Node,
    PacketJourney,
    SegmentRecord,
    TraceEvent,
)


def tbs_lookup(prbs: int, mcs: int, table: dict[tuple[int, int], int]) -> int:
    """Transport block size in bytes for one granted slot."""
    try:
        return table[(prbs, mcs)]
    except KeyError:
        raise UnknownGrantError(f"no TBS entry for prbs={prbs}, mcs={mcs}") from None


def segment_packet(size_bytes: int, tbs_bytes: int) -> list[int]:
    """Split a packet into per-slot segment sizes.

    All segments but the last fill the TBS; sizes sum to the packet size.
    """
    if size_bytes <= 0 or tbs_bytes <= 0:
        raise ValueError("sizes must be positive")
    full, rest = divmod(size_bytes, tbs_bytes)
    sizes = [tbs_bytes] * full
    if rest:
        sizes.append(rest)
    return sizes


def _next_tagged_slot(after: int, tagged: tuple[int, ...], period: int) -> int:
    """Smallest slot index >= after whose pattern position is tagged."""
    base = after - after % period
    rel = after - base
    for idx in tagged:
        if idx >= rel:
            return base + idx
    return base + period + tagged[0]


def next_grant_slot(t_ns: int, tdd: TddConfig) -> tuple[int, int, int]:
    """Earliest grant-class slot serviceable for data arriving at ``t_ns``.

    Service may begin one preparation time before the slot starts, so the
    returned slot is the first with ``slot_start - preparation >= t``.
    Returns (frame_no, slot_no, slot_start_ns).  Load is not modeled here;
    this is the empty-queue alignment helper.
    """
    slot_dur = tdd.slot_duration_ns
    earliest_start = t_ns + tdd.preparation_time_ns
    s0 = -(-earliest_start // slot_dur)  # ceil division
    s = _next_tagged_slot(s0, tdd.grant_indices(), len(tdd.pattern))
    return s // tdd.slots_per_frame, s % tdd.slots_per_frame, s * slot_dur


@dataclass
class _PendingSegment:
    packet: int
    index: int  # 1-based
    size: int
    bumped: bool = False


@dataclass
class _PendingRetx:
    ready_slot: int
    packet: int
    seg: int  # 0-based
    mem_loc: int
    harq_id: int
    attempt_no: int


class SimulationResult:
    """Event stream plus ground truth for every packet."""

    def __init__(
        self,
        events: list[TraceEvent],
        truth: list[tuple[PacketJourney, DelayDecomposition]],
    ):
        self.events = events
        self.truth = truth

    @property
    def journeys(self) -> list[PacketJourney]:
        return [j for j, _ in self.truth]

    @property
    def decompositions(self) -> list[DelayDecomposition]:
        return [d for _, d in self.truth]


def simulate(config: ExperimentConfig) -> SimulationResult:
    config.validate()
    tdd, radio, traffic, core = config.tdd, config.radio, config.traffic, config.core
    slot_dur = tdd.slot_duration_ns
    prep = tdd.preparation_time_ns
    spf = tdd.slots_per_frame
    period = len(tdd.pattern)
    uplink_idx = tdd.uplink_indices()
    grant_set = frozenset(tdd.grant_indices())
    tbs = tbs_lookup(radio.grant_prbs, radio.mcs_index, radio.tbs_table)
    p_fail = radio.harq_fail_prob
    l_max = radio.max_harq_attempts
    rtt = radio.harq_rtt_slots
    txdec = radio.tx_decode_latency_ns

    n = traffic.packet_count
    pkt_size = config.rlc_packet_bytes()
    seg_sizes = segment_packet(pkt_size, tbs)
    n_segs = len(seg_sizes)

    rng = random.Random(config.rng_seed)
    jit = traffic.arrival_jitter_ns
    arrivals: list[tuple[int, int]] = []
    for k in range(n):
        t = k * traffic.period_ns + traffic.arrival_offset_ns
        if jit:
            t += rng.randint(-jit, jit)
        arrivals.append((max(t, 0), k))
    arrivals.sort()
    core_draws = [
        core.base_delay_ns + (rng.randint(-core.jitter_ns, core.jitter_ns)
                              if core.jitter_ns else 0)
        for _ in range(n)
    ]

    events: list[TraceEvent] = []
    truth: list[tuple[PacketJourney, DelayDecomposition] | None] = [None] * n

    # Per-packet scratch state, indexed by packet id.
    arrival_ts = [0] * n
    first_take = [0] * n
    seg_attempts: list[list[list[HarqAttempt]]] = [
        [[] for _ in range(n_segs)] for _ in range(n)
    ]
    remaining = [n_segs] * n
    max_decode = [0] * n

    pending: deque[_PendingSegment] = deque()
    retxq: deque[_PendingRetx] = deque()
    queue_bytes = 0
    next_mem = 1
    next_harq = 0
    ai = 0
    completed = 0

    def emit_attempt(pkt: int, seg: int, mem: int, hq: int, attempt: int, s: int):
        take_ts = s * slot_dur - prep
        frame, slot_no = divmod(s, spf)
        events.append(TraceEvent(
            node=Node.UE, layer=Layer.HARQ, kind=EventKind.HARQ_TX_ATTEMPT,
            ts_ns=take_ts, mem_loc=mem, harq_id=hq, frame_no=frame,
            slot_no=slot_no, mcs_index=radio.mcs_index, prbs=radio.grant_prbs,
            tbs_bytes=tbs, attempt_no=attempt,
        ))
        ok = attempt >= l_max or rng.random() >= p_fail
        decode_ts = s * slot_dur + txdec
        events.append(TraceEvent(
            node=Node.GNB, layer=Layer.HARQ, kind=EventKind.HARQ_DECODE_ATTEMPT,
            ts_ns=decode_ts, harq_id=hq, frame_no=frame, slot_no=slot_no,
            attempt_no=attempt, decode_ok=ok,
        ))
        seg_attempts[pkt][seg].append(HarqAttempt(take_ts, decode_ts, ok))
        if ok:
            finish_segment(pkt, decode_ts)
        else:
            retxq.append(_PendingRetx(s + rtt, pkt, seg, mem, hq, attempt + 1))

    def finish_segment(pkt: int, decode_ts: int):
        nonlocal completed
        remaining[pkt] -= 1
        if decode_ts > max_decode[pkt]:
            max_decode[pkt] = decode_ts
        if remaining[pkt]:
            return
        t_dr = max_decode[pkt]
        events.append(TraceEvent(
            node=Node.GNB, layer=Layer.RLC, kind=EventKind.RLC_REASSEMBLED,
            ts_ns=t_dr, sn=pkt,
        ))
        t_dc = t_dr + core_draws[pkt]
        events.append(TraceEvent(
            node=Node.CORE, layer=Layer.N3, kind=EventKind.CORE_DEPARTURE,
            ts_ns=t_dc, sn=pkt,
        ))
        journey = PacketJourney(
            packet_id=pkt,
            sn=pkt,
            radio_arrival_ns=arrival_ts[pkt],
            radio_service_ns=first_take[pkt],
            segments=tuple(
                SegmentRecord(m + 1, seg_sizes[m], tuple(seg_attempts[pkt][m]))
                for m in range(n_segs)
            ),
            radio_departure_ns=t_dr,
            core_departure_ns=t_dc,
            size_bytes=pkt_size,
            arrival_frame_no=arrival_ts[pkt] // tdd.frame_duration_ns,
            arrival_slot_no=(arrival_ts[pkt] % tdd.frame_duration_ns) // slot_dur,
        )
        truth[pkt] = (journey, decompose(journey))
        completed += 1

    s = -1
    while completed < n:
        s = _next_tagged_slot(s + 1, uplink_idx, period)
        take_ts = s * slot_dur - prep
        while ai < n and arrivals[ai][0] <= take_ts:
            t_a, pkt = arrivals[ai]
            events.append(TraceEvent(
                node=Node.UE, layer=Layer.RLC, kind=EventKind.ARRIVAL,
                ts_ns=t_a, sn=pkt, size_bytes=pkt_size,
                queue_len_bytes=queue_bytes,
            ))
            arrival_ts[pkt] = t_a
            queue_bytes += pkt_size
            for m in range(n_segs):
                pending.append(_PendingSegment(pkt, m + 1, seg_sizes[m]))
            ai += 1

        is_grant = (s % period) in grant_set
        displacing = False
        if retxq and retxq[0].ready_slot <= s:
            r = retxq.popleft()
            emit_attempt(r.packet, r.seg, r.mem_loc, r.harq_id, r.attempt_no, s)
            displacing = True
        elif pending and (is_grant or pending[0].bumped):
            item = pending.popleft()
            displacing = item.bumped
            pkt, m, segsz = item.packet, item.index, item.size
            mem = next_mem
            next_mem += 1
            hq = next_harq
            next_harq = (next_harq + 1) % 16
            if m == 1:
                events.append(TraceEvent(
                    node=Node.UE, layer=Layer.MAC, kind=EventKind.SERVICE,
                    ts_ns=take_ts, sn=pkt,
                ))
                first_take[pkt] = take_ts
            events.append(TraceEvent(
                node=Node.UE, layer=Layer.MAC, kind=EventKind.SEGMENT_TAKEN,
                ts_ns=take_ts, sn=pkt, mem_loc=mem, size_bytes=segsz,
            ))
            queue_bytes -= segsz
            emit_attempt(pkt, m - 1, mem, hq, 1, s)
        else:
            continue

        # A grant slot consumed over the head of the new-data queue bumps
        # that segment into the overflow class.
        if is_grant and displacing and pending:
            pending[0].bumped = True

    events.sort(key=lambda ev: ev.ts_ns)
    return SimulationResult(events, [t for t in truth if t is not None])
