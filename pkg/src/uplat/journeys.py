"""Reconstruct packet journeys from a raw event stream.

Correlation happens in three stages, mirroring how the information is
captured: the sequence number ties arrival/service/reassembly/departure
records to a packet; the memory handle ties MAC segment-taken records to
the HARQ transmission attempts that carried them; and the
(HARQ id, frame, slot) triple ties each UE transmission attempt to the
gNB decode attempt for the same air interface occasion.

A packet is complete once its ARRIVAL, SERVICE, all segments (with every
attempt decode-matched and the final decode successful, sizes covering
the packet), RLC_REASSEMBLED and CORE_DEPARTURE have been seen.
Packets with any missing or inconsistent piece are reported as exactly
one anomaly each, never silently dropped.  Unattributable leftovers
(attempt groups for unknown memory handles, unmatched decodes) are
folded into the anomaly of the packet whose time window contains them
when one exists, otherwise reported on their own.

Memory handles are released when their segment's final decode matches,
so handle reuse in a live capture correlates correctly; reuse before
release is flagged.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable

from .config import TddConfig
from .errors import (
    AmbiguousMatchError,
    InvalidJourneyError,
    NoMatchError,
    UnsortableStreamError,
)
from .trace import (
    EventKind,
    HarqAttempt,
    PacketJourney,
    SegmentRecord,
    TraceEvent,
)

RESORT_WINDOW_NS = 1_000_000


class AnomalyKind(str, Enum):
    INCOMPLETE_PACKET = "INCOMPLETE_PACKET"
    AMBIGUOUS_MATCH = "AMBIGUOUS_MATCH"
    ORPHAN_SEGMENT = "ORPHAN_SEGMENT"
    ORPHAN_DECODE = "ORPHAN_DECODE"
    MEMLOC_REUSE = "MEMLOC_REUSE"


@dataclass(frozen=True)
class Anomaly:
    kind: AnomalyKind
    sn: int | None
    mem_loc: int | None
    detail: str


def _decode_key(ev: TraceEvent) -> tuple[int, int, int]:
    return (ev.harq_id, ev.frame_no, ev.slot_no)


def match_decode(attempt: TraceEvent, decodes: list[TraceEvent]) -> TraceEvent:
    """Find and consume the unique decode event for a transmission attempt.

    Raises NoMatchError when nothing shares the attempt's
    (harq_id, frame_no, slot_no) key, AmbiguousMatchError when more than
    one decode does.
    """
    key = _decode_key(attempt)
    hits = [
        d
        for d in decodes
        if d.kind is EventKind.HARQ_DECODE_ATTEMPT and _decode_key(d) == key
    ]
    if not hits:
        raise NoMatchError(f"no decode for attempt key {key}")
    if len(hits) > 1:
        raise AmbiguousMatchError(f"{len(hits)} decodes share key {key}")
    decodes.remove(hits[0])
    return hits[0]


@dataclass
class _Segment:
    mem_loc: int
    sn: int | None
    size: int | None
    take_ts: int | None
    paired: list[HarqAttempt] = field(default_factory=list)
    unpaired_tx: list[TraceEvent] = field(default_factory=list)

    def span(self) -> tuple[int, int] | None:
        stamps = [a.tx_ns for a in self.paired] + [a.decode_ns for a in self.paired]
        stamps += [e.ts_ns for e in self.unpaired_tx]
        if self.take_ts is not None:
            stamps.append(self.take_ts)
        if not stamps:
            return None
        return min(stamps), max(stamps)


@dataclass
class _Packet:
    sn: int
    arrival: TraceEvent | None = None
    service: TraceEvent | None = None
    segments: list[_Segment] = field(default_factory=list)
    reassembled: TraceEvent | None = None
    core_departure: TraceEvent | None = None
    defects: list[str] = field(default_factory=list)
    min_ts: int | None = None
    max_ts: int | None = None

    def touch(self, ts: int) -> None:
        self.min_ts = ts if self.min_ts is None else min(self.min_ts, ts)
        self.max_ts = ts if self.max_ts is None else max(self.max_ts, ts)


class JourneyBuilder:
    """Sequential correlation state machine over a time-ordered stream."""

    def __init__(self, tdd: TddConfig | None = None):
        self.tdd = tdd or TddConfig()
        self.open: dict[int, _Packet] = {}
        self.registry: dict[int, _Segment] = {}  # live mem_loc -> segment
        self.pending_attempts: dict[tuple[int, int, int],
                                    list[tuple[_Segment, TraceEvent]]] = {}
        self.orphan_segments: dict[int, _Segment] = {}
        self.orphan_decodes: list[TraceEvent] = []
        self.journeys: list[PacketJourney] = []
        self.closed_anomalous: list[tuple[_Packet, Anomaly]] = []
        self.extra_anomalies: list[Anomaly] = []

    # -- event ingestion ------------------------------------------------

    def feed(self, ev: TraceEvent) -> None:
        handler = self._HANDLERS.get(ev.kind)
        if handler:
            handler(self, ev)

    def _unregister_pending(self, seg: _Segment, tx: TraceEvent) -> None:
        key = _decode_key(tx)
        entry = self.pending_attempts.get(key)
        if entry is None:
            return
        entry[:] = [item for item in entry if item[1] is not tx]
        if not entry:
            del self.pending_attempts[key]

    def _packet(self, sn: int, ts: int) -> _Packet:
        ps = self.open.get(sn)
        if ps is None:
            ps = _Packet(sn)
            self.open[sn] = ps
        ps.touch(ts)
        return ps

    def _on_arrival(self, ev: TraceEvent) -> None:
        ps = self._packet(ev.sn, ev.ts_ns)
        if ps.arrival is not None:
            ps.defects.append("duplicate ARRIVAL")
        ps.arrival = ev

    def _on_service(self, ev: TraceEvent) -> None:
        ps = self._packet(ev.sn, ev.ts_ns)
        if ps.service is not None:
            ps.defects.append("duplicate SERVICE")
        ps.service = ev

    def _on_segment_taken(self, ev: TraceEvent) -> None:
        sn = ev.sn if ev.sn is not None else self._fifo_sn(ev)
        live = self.registry.get(ev.mem_loc)
        if live is not None:
            self.extra_anomalies.append(Anomaly(
                AnomalyKind.MEMLOC_REUSE, sn, ev.mem_loc,
                f"mem_loc {ev.mem_loc} reused before release "
                f"(still held for sn={live.sn})",
            ))
        seg = _Segment(ev.mem_loc, sn, ev.size_bytes, ev.ts_ns)
        self.registry[ev.mem_loc] = seg
        if sn is not None:
            ps = self._packet(sn, ev.ts_ns)
            ps.segments.append(seg)
        else:
            self.orphan_segments[ev.mem_loc] = seg

    def _fifo_sn(self, ev: TraceEvent) -> int | None:
        # Single-flow FIFO attribution for captures that cannot tag
        # segments with the sequence number: the oldest open packet whose
        # size is not yet covered is the one being segmented.
        for sn, ps in self.open.items():
            if ps.arrival is None or ps.reassembled is not None:
                continue
            taken = sum(s.size or 0 for s in ps.segments)
            if taken < ps.arrival.size_bytes:
                return sn
        return None

    def _on_tx_attempt(self, ev: TraceEvent) -> None:
        seg = self.registry.get(ev.mem_loc)
        if seg is None:
            seg = self.orphan_segments.get(ev.mem_loc)
            if seg is None:
                seg = _Segment(ev.mem_loc, None, None, None)
                self.orphan_segments[ev.mem_loc] = seg
        elif seg.sn is not None and seg.sn in self.open:
            self.open[seg.sn].touch(ev.ts_ns)
        seg.unpaired_tx.append(ev)
        self.pending_attempts.setdefault(_decode_key(ev), []).append((seg, ev))

    def _on_decode(self, ev: TraceEvent) -> None:
        key = _decode_key(ev)
        entry = self.pending_attempts.get(key)
        if not entry:
            self.orphan_decodes.append(ev)
            return
        if len(entry) > 1:
            for seg, _tx in entry:
                if seg.sn is not None and seg.sn in self.open:
                    self.open[seg.sn].defects.append(
                        f"ambiguous decode key {key}"
                    )
            return
        seg, tx = entry[0]
        del self.pending_attempts[key]
        seg.unpaired_tx.remove(tx)
        seg.paired.append(HarqAttempt(tx.ts_ns, ev.ts_ns, ev.decode_ok))
        if seg.sn is not None and seg.sn in self.open:
            self.open[seg.sn].touch(ev.ts_ns)
        if ev.decode_ok and self.registry.get(seg.mem_loc) is seg:
            del self.registry[seg.mem_loc]

    def _on_reassembled(self, ev: TraceEvent) -> None:
        ps = self._packet(ev.sn, ev.ts_ns)
        if ps.reassembled is not None:
            ps.defects.append("duplicate RLC_REASSEMBLED")
        ps.reassembled = ev

    def _on_core_departure(self, ev: TraceEvent) -> None:
        ps = self._packet(ev.sn, ev.ts_ns)
        if ps.core_departure is not None:
            ps.defects.append("duplicate CORE_DEPARTURE")
        ps.core_departure = ev
        self._close(ps)
        del self.open[ps.sn]

    _HANDLERS = {
        EventKind.ARRIVAL: _on_arrival,
        EventKind.SERVICE: _on_service,
        EventKind.SEGMENT_TAKEN: _on_segment_taken,
        EventKind.HARQ_TX_ATTEMPT: _on_tx_attempt,
        EventKind.HARQ_DECODE_ATTEMPT: _on_decode,
        EventKind.RLC_REASSEMBLED: _on_reassembled,
        EventKind.CORE_DEPARTURE: _on_core_departure,
    }

    # -- packet closure ---------------------------------------------------

    def _close(self, ps: _Packet) -> None:
        defects = ps.defects
        for seg in ps.segments:
            for tx in list(seg.unpaired_tx):
                self._unregister_pending(seg, tx)
                try:
                    dec = match_decode(tx, self.orphan_decodes)
                except NoMatchError:
                    defects.append(
                        f"attempt {_decode_key(tx)} has no decode"
                    )
                    continue
                except AmbiguousMatchError as exc:
                    defects.append(str(exc))
                    continue
                seg.unpaired_tx.remove(tx)
                seg.paired.append(HarqAttempt(tx.ts_ns, dec.ts_ns, dec.decode_ok))
            if self.registry.get(seg.mem_loc) is seg:
                del self.registry[seg.mem_loc]
            seg.paired.sort(key=lambda a: a.tx_ns)
        if ps.arrival is None:
            defects.append("missing ARRIVAL")
        if ps.service is None:
            defects.append("missing SERVICE")
        if ps.reassembled is None:
            defects.append("missing RLC_REASSEMBLED")
        if ps.core_departure is None:
            defects.append("missing CORE_DEPARTURE")
        if not ps.segments:
            defects.append("no segments")

        journey = None
        if not defects:
            journey = self._assemble(ps)
            if journey is not None:
                try:
                    journey.validate()
                except InvalidJourneyError as exc:
                    defects.append(str(exc))
                    journey = None

        if defects:
            kind = AnomalyKind.INCOMPLETE_PACKET
            if any("ambiguous" in d for d in defects):
                kind = AnomalyKind.AMBIGUOUS_MATCH
            anomaly = Anomaly(kind, ps.sn, None, "; ".join(defects))
            self.closed_anomalous.append((ps, anomaly))
        else:
            self.journeys.append(journey)

    def _assemble(self, ps: _Packet) -> PacketJourney | None:
        segments = []
        for i, seg in enumerate(ps.segments):
            if not seg.paired or seg.size is None:
                ps.defects.append(f"segment {i + 1} incomplete")
                return None
            segments.append(
                SegmentRecord(i + 1, seg.size, tuple(seg.paired))
            )
        arrival_ns = ps.arrival.ts_ns
        frame_dur = self.tdd.frame_duration_ns
        return PacketJourney(
            packet_id=ps.sn,
            sn=ps.sn,
            radio_arrival_ns=arrival_ns,
            radio_service_ns=ps.segments[0].take_ts,
            segments=tuple(segments),
            radio_departure_ns=ps.reassembled.ts_ns,
            core_departure_ns=ps.core_departure.ts_ns,
            size_bytes=ps.arrival.size_bytes,
            arrival_frame_no=arrival_ns // frame_dur,
            arrival_slot_no=(arrival_ns % frame_dur) // self.tdd.slot_duration_ns,
        )

    # -- finalization -----------------------------------------------------

    def finish(self) -> tuple[list[PacketJourney], list[Anomaly]]:
        for sn in list(self.open):
            self._close(self.open.pop(sn))

        anomalies: list[Anomaly] = list(self.extra_anomalies)
        folded: list[tuple[_Packet, list[str]]] = [
            (ps, []) for ps, _ in self.closed_anomalous
        ]

        def fold(span: tuple[int, int], note: str) -> bool:
            for ps, notes in folded:
                if ps.min_ts is None:
                    continue
                if ps.min_ts <= span[0] and span[1] <= ps.max_ts:
                    notes.append(note)
                    return True
            return False

        for mem_loc, seg in self.orphan_segments.items():
            for tx in list(seg.unpaired_tx):
                try:
                    dec = match_decode(tx, self.orphan_decodes)
                except (NoMatchError, AmbiguousMatchError):
                    continue
                seg.unpaired_tx.remove(tx)
                seg.paired.append(HarqAttempt(tx.ts_ns, dec.ts_ns, dec.decode_ok))
            span = seg.span()
            note = (
                f"unattributed segment mem_loc={mem_loc} "
                f"({len(seg.paired) + len(seg.unpaired_tx)} attempts)"
            )
            if span is None or not fold(span, note):
                anomalies.append(
                    Anomaly(AnomalyKind.ORPHAN_SEGMENT, None, mem_loc, note)
                )

        for dec in self.orphan_decodes:
            note = f"unmatched decode key {_decode_key(dec)}"
            if not fold((dec.ts_ns, dec.ts_ns), note):
                anomalies.append(
                    Anomaly(AnomalyKind.ORPHAN_DECODE, None, None, note)
                )

        for (ps, base), (_, notes) in zip(self.closed_anomalous, folded):
            detail = base.detail
            if notes:
                detail = "; ".join([detail] + notes)
            anomalies.append(Anomaly(base.kind, base.sn, base.mem_loc, detail))

        self.journeys.sort(key=lambda j: (j.radio_arrival_ns, j.sn))
        return self.journeys, anomalies


def build_journeys(
    events: Iterable[TraceEvent],
    *,
    tdd: TddConfig | None = None,
    resort_window_ns: int = RESORT_WINDOW_NS,
) -> tuple[list[PacketJourney], list[Anomaly]]:
    """Correlate an event stream into journeys plus anomalies.

    The stream must be time-ordered up to ``resort_window_ns`` of local
    reordering (emitters flush asynchronously); anything worse raises
    UnsortableStreamError.
    """
    batch = list(events)
    high = None
    for ev in batch:
        if high is not None and ev.ts_ns < high - resort_window_ns:
            raise UnsortableStreamError(
                f"event at {ev.ts_ns} ns is {high - ev.ts_ns} ns out of order"
            )
        if high is None or ev.ts_ns > high:
            high = ev.ts_ns
    batch.sort(key=lambda ev: ev.ts_ns)  # stable: keeps tie order

    builder = JourneyBuilder(tdd)
    for ev in batch:
        builder.feed(ev)
    return builder.finish()
