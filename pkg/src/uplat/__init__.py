"""Uplink latency toolkit: simulate a TDD uplink data plane, correlate
its traces into per-packet journeys, decompose end-to-end delays into
additive components, and analyze the tails."""

__version__ = "0.1.0"

from .config import (  # noqa: F401
    CoreConfig,
    ExperimentConfig,
    RadioConfig,
    TddConfig,
    TrafficConfig,
    preset,
)
from .decompose import decompose, select_m_star, segment_service_delay  # noqa: F401
from .journeys import Anomaly, AnomalyKind, build_journeys, match_decode  # noqa: F401
from .simulator import next_grant_slot, segment_packet, simulate, tbs_lookup  # noqa: F401
from .trace import (  # noqa: F401
    DelayDecomposition,
    EventKind,
    HarqAttempt,
    Layer,
    Node,
    PacketJourney,
    SegmentRecord,
    TraceEvent,
    parse_event_line,
    serialize_event_line,
)
