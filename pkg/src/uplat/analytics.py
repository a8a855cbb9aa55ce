"""Statistical layer: tail curves, violation probabilities, component
contributions, frame-relative timing histograms and the arrival-offset
sweep.

The empirical CCDF is evaluated at every distinct sample value with no
binning; reliability targets down at 1e-4 need the raw tail.  Violation
counting uses strict inequality throughout (a delay exactly equal to the
target does not violate it).

Contribution shares come in two flavors because they answer different
questions: the mean of per-packet ratios (how much of a violating
packet's delay the component explains on average) and the ratio of sums
(the component's share of the aggregate delay mass).  Both are reported
and labeled; per-packet ratios always sum to one because the components
partition the end-to-end delay exactly.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .config import ExperimentConfig, TddConfig
from .errors import EmptyInputError, NoViolationsError
from .trace import DelayDecomposition, PacketJourney

COMPONENTS = ("core", "queue", "tx", "seg", "retx")

_FIELDS = {
    "core": "y_core_ns",
    "queue": "y_queue_ns",
    "tx": "y_tx_ns",
    "seg": "y_seg_ns",
    "retx": "y_retx_ns",
}


@dataclass(frozen=True)
class CcdfCurve:
    points: tuple[tuple[int, float], ...]  # (delay_ns, P(delay > x))
    sample_count: int

    def value_at(self, x: int) -> float:
        """P(sample > x), exact from the stored step curve."""
        values = [d for d, _ in self.points]
        idx = bisect.bisect_right(values, x) - 1
        if idx < 0:
            return 1.0
        return self.points[idx][1]


def ccdf(delays: Sequence[int]) -> CcdfCurve:
    """Empirical complementary CDF at every distinct sample value."""
    if len(delays) == 0:
        raise EmptyInputError("ccdf of an empty sample set")
    arr = np.sort(np.asarray(delays, dtype=np.int64))
    values, counts = np.unique(arr, return_counts=True)
    n = arr.size
    exceed = n - np.cumsum(counts)  # samples strictly greater than value
    points = tuple(
        (int(v), float(e) / n) for v, e in zip(values, exceed)
    )
    return CcdfCurve(points, n)


def dvp(delays: Sequence[int], tau_ns: int) -> float:
    """Fraction of samples strictly greater than the target."""
    if len(delays) == 0:
        raise EmptyInputError("dvp of an empty sample set")
    arr = np.asarray(delays, dtype=np.int64)
    return float(np.count_nonzero(arr > tau_ns)) / arr.size


@dataclass(frozen=True)
class ContributionReport:
    tau_ns: int | None  # None = unconditional (all packets)
    mean_of_ratios: dict[str, float]
    ratio_of_sums: dict[str, float]
    violating_count: int


def conditional_contribution(
    decomps: Sequence[DelayDecomposition], tau_ns: int | None
) -> ContributionReport:
    """Per-component contribution among packets whose delay exceeds tau.

    ``tau_ns=None`` aggregates over all packets instead of conditioning.
    """
    if len(decomps) == 0:
        raise EmptyInputError("contribution of an empty sample set")
    if tau_ns is None:
        violating = list(decomps)
    else:
        violating = [d for d in decomps if d.y_e2e_ns > tau_ns]
        if not violating:
            raise NoViolationsError(f"no delays exceed {tau_ns} ns")

    mean_ratios: dict[str, float] = {}
    sums: dict[str, int] = {}
    total = sum(d.y_e2e_ns for d in violating)
    for name in COMPONENTS:
        f = _FIELDS[name]
        mean_ratios[name] = float(
            np.mean([getattr(d, f) / d.y_e2e_ns for d in violating])
        )
        sums[name] = sum(getattr(d, f) for d in violating)
    ratio_sums = {
        name: (sums[name] / total if total else 0.0) for name in COMPONENTS
    }
    return ContributionReport(tau_ns, mean_ratios, ratio_sums, len(violating))


@dataclass(frozen=True)
class FrameRelativeHistogram:
    kind: str  # arrival | service | departure
    bin_width_ns: int
    counts: tuple[int, ...]
    overflow_count: int
    sample_count: int
    frames_spanned: int = 3


_HIST_STAMPS = {
    "arrival": lambda j: j.radio_arrival_ns,
    "service": lambda j: j.radio_service_ns,
    "departure": lambda j: j.radio_departure_ns,
}


def frame_relative_histogram(
    journeys: Sequence[PacketJourney],
    kind: str,
    tdd: TddConfig,
    frames: int = 3,
) -> FrameRelativeHistogram:
    """Histogram of a per-packet instant, relative to the start of the
    frame the packet arrived in, binned at slot granularity over a few
    consecutive frames.  Later instants land in the overflow bucket.
    """
    if kind not in _HIST_STAMPS:
        raise ValueError(f"kind must be one of {sorted(_HIST_STAMPS)}")
    stamp = _HIST_STAMPS[kind]
    width = tdd.slot_duration_ns
    nbins = frames * tdd.slots_per_frame
    counts = [0] * nbins
    overflow = 0
    for j in journeys:
        rel = stamp(j) - j.arrival_frame_no * tdd.frame_duration_ns
        b = rel // width
        if b < nbins:
            counts[b] += 1
        else:
            overflow += 1
    return FrameRelativeHistogram(
        kind, width, tuple(counts), overflow, len(journeys), frames
    )


def departure_slot_distribution(
    journeys: Sequence[PacketJourney], tdd: TddConfig
) -> tuple[float, ...]:
    """Empirical probability of the radio departure landing in each slot
    index of the frame."""
    spf = tdd.slots_per_frame
    counts = [0] * spf
    for j in journeys:
        slot = (j.radio_departure_ns // tdd.slot_duration_ns) % spf
        counts[slot] += 1
    n = len(journeys)
    if n == 0:
        return tuple(0.0 for _ in range(spf))
    return tuple(c / n for c in counts)


@dataclass(frozen=True)
class OffsetSweepRow:
    offset_ns: int
    mean_queue_delay_ns: float
    mean_e2e_ns: float
    dvp_at_targets: dict[int, float]


@dataclass(frozen=True)
class OffsetSweepResult:
    rows: tuple[OffsetSweepRow, ...]
    theta_star_ns: int


def offset_sweep(
    base: ExperimentConfig,
    offsets: Sequence[int],
    targets_ns: Sequence[int] = (),
) -> OffsetSweepResult:
    """Re-simulate per arrival offset (same seed) and pick the offset that
    minimizes mean queuing delay; ties go to the smallest offset."""
    from .simulator import simulate  # local import to avoid a cycle

    rows = []
    for off in offsets:
        cfg = replace(base, traffic=replace(base.traffic, arrival_offset_ns=off))
        result = simulate(cfg)
        decomps = result.decompositions
        e2e = [d.y_e2e_ns for d in decomps]
        rows.append(OffsetSweepRow(
            offset_ns=off,
            mean_queue_delay_ns=float(np.mean([d.y_queue_ns for d in decomps])),
            mean_e2e_ns=float(np.mean(e2e)),
            dvp_at_targets={tau: dvp(e2e, tau) for tau in targets_ns},
        ))
    best = min(rows, key=lambda r: (r.mean_queue_delay_ns, r.offset_ns))
    return OffsetSweepResult(tuple(rows), best.offset_ns)
