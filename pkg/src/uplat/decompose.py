"""Per-packet delay decomposition.

The end-to-end delay splits additively into core, queuing and link parts;
the link part splits again into transmission, segmentation and
retransmission.  The link split is anchored on the segment with the
largest service delay (first attempt send to final decode), called m*:

* transmission = m*'s first-attempt decode minus its first-attempt send,
* retransmission = m*'s final decode minus its first decode,
* segmentation = whatever of the link delay remains.

All arithmetic is integer nanoseconds, so both sum identities are exact.
"""

from __future__ import annotations

import csv
from typing import IO, Iterable

from .trace import (
    DelayDecomposition,
    PacketJourney,
    SegmentRecord,
    decomposition_to_dict,
)


def segment_service_delay(seg: SegmentRecord) -> int:
    """Final decode minus first attempt send, in ns."""
    return seg.attempts[-1].decode_ns - seg.attempts[0].tx_ns


def select_m_star(journey: PacketJourney) -> int:
    """Index (1-based) of the segment with the maximum service delay.

    Ties break toward the lowest index.
    """
    best_index = journey.segments[0].segment_index
    best_delay = segment_service_delay(journey.segments[0])
    for seg in journey.segments[1:]:
        delay = segment_service_delay(seg)
        if delay > best_delay:
            best_delay = delay
            best_index = seg.segment_index
    return best_index


def decompose(journey: PacketJourney) -> DelayDecomposition:
    """Compute the exact additive decomposition of one journey.

    Raises InvalidJourneyError if the journey breaks its ordering or
    consistency invariants; components are never silently clamped.
    """
    journey.validate()
    m_star = select_m_star(journey)
    star = next(s for s in journey.segments if s.segment_index == m_star)

    y_queue = journey.radio_service_ns - journey.radio_arrival_ns
    y_link = journey.radio_departure_ns - journey.radio_service_ns
    y_core = journey.core_departure_ns - journey.radio_departure_ns
    y_tx = star.attempts[0].decode_ns - star.attempts[0].tx_ns
    y_retx = star.attempts[-1].decode_ns - star.attempts[0].decode_ns
    y_seg = y_link - y_tx - y_retx
    y_e2e = journey.core_departure_ns - journey.radio_arrival_ns

    return DelayDecomposition(
        y_e2e_ns=y_e2e,
        y_core_ns=y_core,
        y_queue_ns=y_queue,
        y_link_ns=y_link,
        y_tx_ns=y_tx,
        y_seg_ns=y_seg,
        y_retx_ns=y_retx,
        m_star=m_star,
    )


def app_ingress_ns(journey: PacketJourney) -> int | None:
    """Client-stack time before radio arrival, when the app timestamp exists.

    Reported separately; it is not part of the decomposition sum.
    """
    if journey.app_send_ns is None:
        return None
    return journey.radio_arrival_ns - journey.app_send_ns


CSV_COLUMNS = (
    "packet_id",
    "y_e2e",
    "y_core",
    "y_queue",
    "y_tx",
    "y_seg",
    "y_retx",
    "m_star",
    "arrival_frame_no",
    "arrival_slot_no",
)


def write_decompositions_csv(
    pairs: Iterable[tuple[PacketJourney, DelayDecomposition]],
    fh: IO[str],
) -> None:
    writer = csv.writer(fh)
    writer.writerow(CSV_COLUMNS)
    for journey, d in pairs:
        writer.writerow(
            (
                journey.packet_id,
                d.y_e2e_ns,
                d.y_core_ns,
                d.y_queue_ns,
                d.y_tx_ns,
                d.y_seg_ns,
                d.y_retx_ns,
                d.m_star,
                journey.arrival_frame_no,
                journey.arrival_slot_no,
            )
        )


def decomposition_record(
    journey: PacketJourney, decomp: DelayDecomposition
) -> dict:
    """JSON-friendly record pairing identity fields with the split."""
    rec = {"packet_id": journey.packet_id, "sn": journey.sn}
    rec.update(decomposition_to_dict(decomp))
    ingress = app_ingress_ns(journey)
    if ingress is not None:
        rec["app_ingress_ns"] = ingress
    return rec
