"""Domain types and the line-oriented trace format.

A trace file is UTF-8 text, one event per line, each line a JSON object.
Key order on input is not significant; the serializer always emits the
canonical order below, so ``serialize(parse(line))`` is a normal form.
All timestamps are integer nanoseconds on one shared epoch (the capture
hosts are assumed clock-synchronized).

Example line::

    {"node":"UE","layer":"HARQ","kind":"HARQ_TX_ATTEMPT","ts_ns":4000000,
     "mem_loc":17,"frame_no":0,"slot_no":9,"harq_id":3,"attempt_no":1,
     "mcs_index":23,"prbs":10,"tbs_bytes":792}
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields
from enum import Enum
from typing import IO, Iterable, Iterator

from .errors import (
    DomainError,
    InvalidJourneyError,
    MalformedLineError,
    MissingKeyError,
)


class Node(str, Enum):
    UE = "UE"
    GNB = "GNB"
    CORE = "CORE"
    APP_CLIENT = "APP_CLIENT"
    APP_SERVER = "APP_SERVER"


class Layer(str, Enum):
    APP = "APP"
    PDCP = "PDCP"
    RLC = "RLC"
    MAC = "MAC"
    HARQ = "HARQ"
    N3 = "N3"


class EventKind(str, Enum):
    ARRIVAL = "ARRIVAL"
    SERVICE = "SERVICE"
    SEGMENT_TAKEN = "SEGMENT_TAKEN"
    HARQ_TX_ATTEMPT = "HARQ_TX_ATTEMPT"
    HARQ_DECODE_ATTEMPT = "HARQ_DECODE_ATTEMPT"
    RLC_REASSEMBLED = "RLC_REASSEMBLED"
    CORE_DEPARTURE = "CORE_DEPARTURE"


# Keys that must be present for each event kind.  SEGMENT_TAKEN may carry
# an sn but does not have to (past that point the stack only sees byte
# chunks; correlation continues via mem_loc).
MANDATORY_KEYS: dict[EventKind, tuple[str, ...]] = {
    EventKind.ARRIVAL: ("sn", "size_bytes", "queue_len_bytes"),
    EventKind.SERVICE: ("sn",),
    EventKind.SEGMENT_TAKEN: ("mem_loc", "size_bytes"),
    EventKind.HARQ_TX_ATTEMPT: (
        "mem_loc",
        "harq_id",
        "frame_no",
        "slot_no",
        "mcs_index",
        "prbs",
        "tbs_bytes",
        "attempt_no",
    ),
    EventKind.HARQ_DECODE_ATTEMPT: (
        "harq_id",
        "frame_no",
        "slot_no",
        "attempt_no",
        "decode_ok",
    ),
    EventKind.RLC_REASSEMBLED: ("sn",),
    EventKind.CORE_DEPARTURE: ("sn",),
}

_INT_KEYS = (
    "sn",
    "mem_loc",
    "size_bytes",
    "frame_no",
    "slot_no",
    "harq_id",
    "attempt_no",
    "mcs_index",
    "prbs",
    "tbs_bytes",
    "queue_len_bytes",
)

# Canonical serialization order.
_CANONICAL_ORDER = (
    "node", "layer", "kind", "ts_ns",
    "sn", "mem_loc", "size_bytes", "frame_no", "slot_no", "harq_id",
    "attempt_no", "decode_ok", "mcs_index", "prbs", "tbs_bytes",
    "queue_len_bytes",
)

_KNOWN_KEYS = frozenset(_CANONICAL_ORDER)


@dataclass(frozen=True, slots=True)
class TraceEvent:
    """One timestamped measurement point with its correlation keys.

    Invalid combinations are unconstructible: the constructor enforces
    kind-mandatory keys and field domains.
    """

    node: Node
    layer: Layer
    kind: EventKind
    ts_ns: int
    sn: int | None = None
    mem_loc: int | None = None
    size_bytes: int | None = None
    frame_no: int | None = None
    slot_no: int | None = None
    harq_id: int | None = None
    attempt_no: int | None = None
    decode_ok: bool | None = None
    mcs_index: int | None = None
    prbs: int | None = None
    tbs_bytes: int | None = None
    queue_len_bytes: int | None = None

    def __post_init__(self):
        if self.ts_ns < 0:
            raise DomainError(f"negative timestamp {self.ts_ns}")
        for key in MANDATORY_KEYS[self.kind]:
            if getattr(self, key) is None:
                raise MissingKeyError(f"{self.kind.value} requires '{key}'")
        for key in ("size_bytes", "tbs_bytes", "prbs"):
            v = getattr(self, key)
            if v is not None and v <= 0:
                raise DomainError(f"{key} must be positive, got {v}")
        for key in ("sn", "mem_loc", "frame_no", "slot_no", "harq_id",
                    "mcs_index", "queue_len_bytes"):
            v = getattr(self, key)
            if v is not None and v < 0:
                raise DomainError(f"{key} must be non-negative, got {v}")
        if self.attempt_no is not None and self.attempt_no < 1:
            raise DomainError(f"attempt_no must be >= 1, got {self.attempt_no}")


def parse_event_line(line: str, *, slots_per_frame: int | None = None) -> TraceEvent:
    """Parse one trace line into a TraceEvent.

    ``slots_per_frame``, when given, additionally range-checks slot_no
    against the frame structure.
    """
    try:
        raw = json.loads(line)
    except json.JSONDecodeError as exc:
        raise MalformedLineError(f"not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise MalformedLineError("record is not an object")
    unknown = set(raw) - _KNOWN_KEYS
    if unknown:
        raise MalformedLineError(f"unknown keys {sorted(unknown)}")
    for key in ("node", "layer", "kind", "ts_ns"):
        if key not in raw:
            raise MissingKeyError(f"record lacks '{key}'")
    try:
        node = Node(raw["node"])
        layer = Layer(raw["layer"])
        kind = EventKind(raw["kind"])
    except ValueError as exc:
        raise MalformedLineError(str(exc)) from None

    values: dict[str, object] = {}
    for key in ("ts_ns",) + _INT_KEYS:
        if key in raw:
            v = raw[key]
            if not isinstance(v, int) or isinstance(v, bool):
                raise MalformedLineError(f"'{key}' must be an integer, got {v!r}")
            values[key] = v
    if "decode_ok" in raw:
        if not isinstance(raw["decode_ok"], bool):
            raise MalformedLineError("'decode_ok' must be a boolean")
        values["decode_ok"] = raw["decode_ok"]

    event = TraceEvent(node=node, layer=layer, kind=kind, **values)
    if slots_per_frame is not None and event.slot_no is not None:
        if event.slot_no >= slots_per_frame:
            raise DomainError(
                f"slot_no {event.slot_no} out of range for "
                f"{slots_per_frame} slots per frame"
            )
    return event


def serialize_event_line(event: TraceEvent) -> str:
    """Render an event in the canonical single-line form."""
    out: dict[str, object] = {}
    for key in _CANONICAL_ORDER:
        v = getattr(event, key)
        if v is None:
            continue
        out[key] = v.value if isinstance(v, Enum) else v
    return json.dumps(out, separators=(",", ":"))


def iter_events(lines: Iterable[str]) -> Iterator[TraceEvent]:
    for line in lines:
        line = line.strip()
        if line:
            yield parse_event_line(line)


def read_trace(path_or_file: str | IO[str]) -> list[TraceEvent]:
    if isinstance(path_or_file, str):
        with open(path_or_file, encoding="utf-8") as fh:
            return list(iter_events(fh))
    return list(iter_events(path_or_file))


def write_trace(events: Iterable[TraceEvent], path_or_file: str | IO[str]) -> None:
    if isinstance(path_or_file, str):
        with open(path_or_file, "w", encoding="utf-8") as fh:
            write_trace(events, fh)
        return
    for ev in events:
        path_or_file.write(serialize_event_line(ev))
        path_or_file.write("\n")


@dataclass(frozen=True, slots=True)
class HarqAttempt:
    """One transmission attempt of one segment: send and decode instants."""

    tx_ns: int
    decode_ns: int
    decode_ok: bool


@dataclass(frozen=True, slots=True)
class SegmentRecord:
    """A segment's size and its ordered HARQ attempt history."""

    segment_index: int  # 1-based
    size_bytes: int
    attempts: tuple[HarqAttempt, ...]

    def validate(self) -> None:
        if self.segment_index < 1:
            raise InvalidJourneyError("segment_index must be >= 1")
        if self.size_bytes <= 0:
            raise InvalidJourneyError("segment size must be positive")
        if not self.attempts:
            raise InvalidJourneyError("segment has no attempts")
        prev_tx = -1
        for att in self.attempts:
            if att.tx_ns >= att.decode_ns:
                raise InvalidJourneyError("attempt tx must precede decode")
            if att.tx_ns <= prev_tx:
                raise InvalidJourneyError("attempts must be ordered by tx time")
            prev_tx = att.tx_ns


@dataclass(frozen=True, slots=True)
class PacketJourney:
    """All reconstructed timestamps of one packet's uplink traverse."""

    packet_id: int
    sn: int
    radio_arrival_ns: int
    radio_service_ns: int
    segments: tuple[SegmentRecord, ...]
    radio_departure_ns: int
    core_departure_ns: int
    size_bytes: int
    arrival_frame_no: int
    arrival_slot_no: int
    app_send_ns: int | None = None

    def validate(self) -> None:
        """Raise InvalidJourneyError unless every journey invariant holds."""
        if not self.segments:
            raise InvalidJourneyError(f"sn={self.sn}: journey has no segments")
        for seg in self.segments:
            seg.validate()
            if not seg.attempts[-1].decode_ok:
                raise InvalidJourneyError(
                    f"sn={self.sn}: segment {seg.segment_index} never decoded"
                )
        if not (
            self.radio_arrival_ns
            <= self.radio_service_ns
            <= self.radio_departure_ns
            <= self.core_departure_ns
        ):
            raise InvalidJourneyError(f"sn={self.sn}: timestamp ordering broken")
        first_tx = min(seg.attempts[0].tx_ns for seg in self.segments)
        if first_tx != self.radio_service_ns:
            raise InvalidJourneyError(
                f"sn={self.sn}: service time does not match earliest attempt"
            )
        last_decode = max(seg.attempts[-1].decode_ns for seg in self.segments)
        if last_decode != self.radio_departure_ns:
            raise InvalidJourneyError(
                f"sn={self.sn}: departure does not match last decode"
            )
        if sum(seg.size_bytes for seg in self.segments) < self.size_bytes:
            raise InvalidJourneyError(f"sn={self.sn}: segments smaller than packet")


@dataclass(frozen=True, slots=True)
class DelayDecomposition:
    """Additive split of one packet's end-to-end delay (integer ns).

    Two identities hold exactly:
    ``y_e2e = y_core + y_queue + y_link`` and
    ``y_link = y_tx + y_seg + y_retx``.
    """

    y_e2e_ns: int
    y_core_ns: int
    y_queue_ns: int
    y_link_ns: int
    y_tx_ns: int
    y_seg_ns: int
    y_retx_ns: int
    m_star: int

    def __post_init__(self):
        if self.y_e2e_ns != self.y_core_ns + self.y_queue_ns + self.y_link_ns:
            raise DomainError("e2e sum identity violated")
        if self.y_link_ns != self.y_tx_ns + self.y_seg_ns + self.y_retx_ns:
            raise DomainError("link sum identity violated")
        for f in fields(self):
            if f.name != "m_star" and getattr(self, f.name) < 0:
                raise DomainError(f"{f.name} negative")
        if self.m_star < 1:
            raise DomainError("m_star must be >= 1")


def journey_to_dict(journey: PacketJourney) -> dict:
    return {
        "packet_id": journey.packet_id,
        "sn": journey.sn,
        "app_send_ns": journey.app_send_ns,
        "radio_arrival_ns": journey.radio_arrival_ns,
        "radio_service_ns": journey.radio_service_ns,
        "radio_departure_ns": journey.radio_departure_ns,
        "core_departure_ns": journey.core_departure_ns,
        "size_bytes": journey.size_bytes,
        "arrival_frame_no": journey.arrival_frame_no,
        "arrival_slot_no": journey.arrival_slot_no,
        "segments": [
            {
                "segment_index": seg.segment_index,
                "size_bytes": seg.size_bytes,
                "attempts": [
                    {
                        "tx_ns": att.tx_ns,
                        "decode_ns": att.decode_ns,
                        "decode_ok": att.decode_ok,
                    }
                    for att in seg.attempts
                ],
            }
            for seg in journey.segments
        ],
    }


def journey_from_dict(raw: dict) -> PacketJourney:
    segments = tuple(
        SegmentRecord(
            segment_index=seg["segment_index"],
            size_bytes=seg["size_bytes"],
            attempts=tuple(
                HarqAttempt(a["tx_ns"], a["decode_ns"], a["decode_ok"])
                for a in seg["attempts"]
            ),
        )
        for seg in raw["segments"]
    )
    return PacketJourney(
        packet_id=raw["packet_id"],
        sn=raw["sn"],
        app_send_ns=raw.get("app_send_ns"),
        radio_arrival_ns=raw["radio_arrival_ns"],
        radio_service_ns=raw["radio_service_ns"],
        segments=segments,
        radio_departure_ns=raw["radio_departure_ns"],
        core_departure_ns=raw["core_departure_ns"],
        size_bytes=raw["size_bytes"],
        arrival_frame_no=raw["arrival_frame_no"],
        arrival_slot_no=raw["arrival_slot_no"],
    )


def journey_to_json_line(journey: PacketJourney) -> str:
    return json.dumps(journey_to_dict(journey), separators=(",", ":"))


def parse_journey_line(line: str) -> PacketJourney:
    try:
        raw = json.loads(line)
    except json.JSONDecodeError as exc:
        raise MalformedLineError(f"not valid JSON: {exc}") from None
    try:
        return journey_from_dict(raw)
    except (KeyError, TypeError) as exc:
        raise MalformedLineError(f"bad journey record: {exc}") from None


def decomposition_to_dict(decomp: DelayDecomposition) -> dict:
    return {
        "y_e2e_ns": decomp.y_e2e_ns,
        "y_core_ns": decomp.y_core_ns,
        "y_queue_ns": decomp.y_queue_ns,
        "y_link_ns": decomp.y_link_ns,
        "y_tx_ns": decomp.y_tx_ns,
        "y_seg_ns": decomp.y_seg_ns,
        "y_retx_ns": decomp.y_retx_ns,
        "m_star": decomp.m_star,
    }


def decomposition_from_dict(raw: dict) -> DelayDecomposition:
    return DelayDecomposition(
        y_e2e_ns=raw["y_e2e_ns"],
        y_core_ns=raw["y_core_ns"],
        y_queue_ns=raw["y_queue_ns"],
        y_link_ns=raw["y_link_ns"],
        y_tx_ns=raw["y_tx_ns"],
        y_seg_ns=raw["y_seg_ns"],
        y_retx_ns=raw["y_retx_ns"],
        m_star=raw["m_star"],
    )
