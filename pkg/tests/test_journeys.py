import dataclasses

import pytest

from uplat.config import TddConfig
from uplat.errors import (
    AmbiguousMatchError,
    NoMatchError,
    UnsortableStreamError,
)
from uplat.journeys import AnomalyKind, build_journeys, match_decode
from uplat.simulator import simulate
from uplat.trace import EventKind, Layer, Node, TraceEvent

from conftest import mini_config

MS = 1_000_000


def _tx(ts, mem, harq, frame, slot, attempt=1):
    return TraceEvent(Node.UE, Layer.HARQ, EventKind.HARQ_TX_ATTEMPT, ts,
                      mem_loc=mem, harq_id=harq, frame_no=frame, slot_no=slot,
                      mcs_index=23, prbs=10, tbs_bytes=792, attempt_no=attempt)


def _decode(ts, harq, frame, slot, ok=True, attempt=1):
    return TraceEvent(Node.GNB, Layer.HARQ, EventKind.HARQ_DECODE_ATTEMPT, ts,
                      harq_id=harq, frame_no=frame, slot_no=slot,
                      attempt_no=attempt, decode_ok=ok)


def _packet_events(sn, t0, mem, harq, frame, slot):
    """A minimal complete single-segment packet starting at t0."""
    take = t0 + 500_000
    dec = take + 2 * MS
    return [
        TraceEvent(Node.UE, Layer.RLC, EventKind.ARRIVAL, t0, sn=sn,
                   size_bytes=531, queue_len_bytes=0),
        TraceEvent(Node.UE, Layer.MAC, EventKind.SERVICE, take, sn=sn),
        TraceEvent(Node.UE, Layer.MAC, EventKind.SEGMENT_TAKEN, take, sn=sn,
                   mem_loc=mem, size_bytes=531),
        _tx(take, mem, harq, frame, slot),
        _decode(dec, harq, frame, slot),
        TraceEvent(Node.GNB, Layer.RLC, EventKind.RLC_REASSEMBLED, dec, sn=sn),
        TraceEvent(Node.CORE, Layer.N3, EventKind.CORE_DEPARTURE, dec + 300_000,
                   sn=sn),
    ]


# -- match_decode -----------------------------------------------------------

def test_match_decode_unique_key_consumes():
    attempt = _tx(0, mem=1, harq=2, frame=10, slot=8)
    pool = [_decode(2 * MS, 2, 10, 8), _decode(2 * MS, 3, 10, 8)]
    hit = match_decode(attempt, pool)
    assert hit.harq_id == 2
    assert len(pool) == 1  # consumed


def test_match_decode_no_match():
    with pytest.raises(NoMatchError):
        match_decode(_tx(0, 1, 2, 10, 8), [_decode(1, 2, 11, 8)])


def test_match_decode_duplicate_keys_ambiguous():
    pool = [_decode(1, 2, 10, 8), _decode(2, 2, 10, 8)]
    with pytest.raises(AmbiguousMatchError):
        match_decode(_tx(0, 1, 2, 10, 8), pool)
    assert len(pool) == 2  # nothing consumed on failure


# -- oracle equivalence ------------------------------------------------------

@pytest.mark.parametrize("kwargs", [
    dict(packet_count=300, grant_prbs=10, harq_fail_prob=0.0, seed=1),
    dict(packet_count=300, grant_prbs=5, harq_fail_prob=0.05,
         arrival_jitter_ns=750_000, core_jitter_ns=100_000, seed=2),
    dict(packet_count=300, grant_prbs=5, harq_fail_prob=0.3,
         arrival_jitter_ns=750_000, seed=3),
    dict(packet_count=300, grant_prbs=10, harq_fail_prob=0.2,
         pattern="DDDDDDDUUU", arrival_jitter_ns=750_000, seed=4),
])
def test_builder_reproduces_ground_truth(kwargs):
    cfg = mini_config(**kwargs)
    result = simulate(cfg)
    journeys, anomalies = build_journeys(result.events, tdd=cfg.tdd)
    assert anomalies == []
    assert journeys == result.journeys


def test_empty_stream():
    assert build_journeys([]) == ([], [])


# -- robustness --------------------------------------------------------------

def test_missing_core_departure_single_anomaly(small_run):
    cfg, result = small_run
    base_journeys, _ = build_journeys(result.events, tdd=cfg.tdd)
    events = [e for e in result.events
              if not (e.kind is EventKind.CORE_DEPARTURE and e.sn == 5)]
    journeys, anomalies = build_journeys(events, tdd=cfg.tdd)
    assert len(anomalies) == 1
    assert anomalies[0].kind is AnomalyKind.INCOMPLETE_PACKET
    assert anomalies[0].sn == 5
    assert journeys == [j for j in base_journeys if j.sn != 5]


def _sn_of_event(ev, mem_to_sn, key_to_sn):
    if ev.sn is not None:
        return ev.sn
    if ev.kind is EventKind.HARQ_TX_ATTEMPT:
        return mem_to_sn[ev.mem_loc]
    return key_to_sn[(ev.harq_id, ev.frame_no, ev.slot_no)]


def test_every_single_deletion_yields_one_anomaly(small_run):
    cfg, result = small_run
    events = result.events
    mem_to_sn = {e.mem_loc: e.sn for e in events
                 if e.kind is EventKind.SEGMENT_TAKEN}
    key_to_sn = {(e.harq_id, e.frame_no, e.slot_no): mem_to_sn[e.mem_loc]
                 for e in events if e.kind is EventKind.HARQ_TX_ATTEMPT}
    base_journeys, base_anoms = build_journeys(events, tdd=cfg.tdd)
    assert base_anoms == []
    base_by_sn = {j.sn: j for j in base_journeys}

    for i in range(len(events)):
        affected = _sn_of_event(events[i], mem_to_sn, key_to_sn)
        journeys, anomalies = build_journeys(events[:i] + events[i + 1:],
                                             tdd=cfg.tdd)
        assert len(anomalies) == 1, (
            f"deleting event {i} ({events[i].kind}) gave "
            f"{[a.detail for a in anomalies]}"
        )
        others = [j for j in journeys if j.sn != affected]
        assert others == [j for sn, j in sorted(base_by_sn.items())
                          if sn != affected]


def test_out_of_order_within_window_is_resorted(small_run):
    cfg, result = small_run
    events = list(result.events)
    # swap adjacent events whose stamps differ by less than the window;
    # the stable re-sort restores the true order
    positions = [i for i in range(len(events) - 1)
                 if 0 < events[i + 1].ts_ns - events[i].ts_ns < 1 * MS]
    picked = positions[:10:2]  # non-adjacent swap sites
    assert picked
    for i in picked:
        events[i], events[i + 1] = events[i + 1], events[i]
    journeys, anomalies = build_journeys(events, tdd=cfg.tdd)
    assert anomalies == []
    assert journeys == result.journeys


def test_out_of_order_beyond_window_raises(small_run):
    cfg, result = small_run
    events = list(result.events)
    stream = [events[-1]] + events[:-1]  # a very late event arrives first
    with pytest.raises(UnsortableStreamError):
        build_journeys(stream, tdd=cfg.tdd)


def test_no_invented_timestamps(small_run):
    cfg, result = small_run
    journeys, _ = build_journeys(result.events, tdd=cfg.tdd)
    stamps = {e.ts_ns for e in result.events}
    for j in journeys:
        assert {j.radio_arrival_ns, j.radio_service_ns,
                j.radio_departure_ns, j.core_departure_ns} <= stamps
        for seg in j.segments:
            for att in seg.attempts:
                assert att.tx_ns in stamps and att.decode_ns in stamps


# -- mem_loc reuse -----------------------------------------------------------

def test_memloc_reuse_after_release_is_clean():
    # packet 0 completes (its final decode releases mem 1), then packet 1
    # reuses the same handle
    stream = _packet_events(0, 0, mem=1, harq=0, frame=0, slot=9)
    stream += _packet_events(1, 10 * MS, mem=1, harq=0, frame=1, slot=9)
    journeys, anomalies = build_journeys(stream)
    assert anomalies == []
    assert [j.sn for j in journeys] == [0, 1]


def test_memloc_reuse_before_release_flags_anomaly():
    p0 = _packet_events(0, 0, mem=1, harq=0, frame=0, slot=9)
    p1 = _packet_events(1, 1 * MS, mem=1, harq=1, frame=0, slot=19)
    stream = sorted(p0[:4] + p1 + p0[4:], key=lambda e: e.ts_ns)
    _, anomalies = build_journeys(stream)
    assert any(a.kind is AnomalyKind.MEMLOC_REUSE for a in anomalies)


# -- sn-less segment attribution ---------------------------------------------

def test_fifo_attribution_without_sn_on_segments():
    cfg = mini_config(packet_count=50, grant_prbs=5, arrival_jitter_ns=750_000,
                      seed=6)
    result = simulate(cfg)
    stripped = [
        dataclasses.replace(e, sn=None)
        if e.kind is EventKind.SEGMENT_TAKEN else e
        for e in result.events
    ]
    journeys, anomalies = build_journeys(stripped, tdd=cfg.tdd)
    assert anomalies == []
    assert journeys == result.journeys


def test_builder_fills_frame_fields_from_tdd():
    cfg = mini_config(packet_count=5, arrival_jitter_ns=750_000, seed=8)
    result = simulate(cfg)
    journeys, _ = build_journeys(result.events, tdd=cfg.tdd)
    for j, (tj, _) in zip(journeys, result.truth):
        assert (j.arrival_frame_no, j.arrival_slot_no) == \
            (tj.arrival_frame_no, tj.arrival_slot_no)
