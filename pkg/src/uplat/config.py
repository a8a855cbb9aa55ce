"""Experiment configuration.

The TDD pattern is a repeating string over {D, U, G}:

* ``D`` — downlink slot, never carries this flow.
* ``G`` — uplink slot carrying the periodic grant: new segments are
  transmitted here (retransmissions may use it too, with priority).
* ``U`` — uplink slot available to HARQ retransmissions and to segments
  that got bumped off a grant slot, but not to fresh on-time data.

A pattern with no ``G`` treats every ``U`` slot as granted.  The default
``DDDUDDDDDG`` gives one grant every half pattern-period (5 ms with
0.5 ms slots), so a packet split into two segments pays one full grant
interval of segmentation delay, and a failed attempt can retry roughly
2 ms later on the mid-period ``U`` slot.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

from .errors import ConfigError

DEFAULT_TBS_TABLE: dict[tuple[int, int], int] = {
    (5, 23): 396,
    (10, 23): 792,
}


@dataclass(frozen=True)
class TddConfig:
    frame_duration_ns: int = 10_000_000
    slots_per_frame: int = 20
    pattern: str = "DDDUDDDDDG"
    preparation_time_ns: int = 500_000

    @property
    def slot_duration_ns(self) -> int:
        return self.frame_duration_ns // self.slots_per_frame

    @property
    def pattern_period_ns(self) -> int:
        return len(self.pattern) * self.slot_duration_ns

    def uplink_indices(self) -> tuple[int, ...]:
        return tuple(i for i, c in enumerate(self.pattern) if c in "UG")

    def grant_indices(self) -> tuple[int, ...]:
        granted = tuple(i for i, c in enumerate(self.pattern) if c == "G")
        return granted or self.uplink_indices()

    def validate(self) -> None:
        if self.frame_duration_ns <= 0 or self.slots_per_frame <= 0:
            raise ConfigError("frame duration and slots per frame must be positive")
        if self.frame_duration_ns % self.slots_per_frame:
            raise ConfigError("slots must divide the frame evenly")
        if not self.pattern or set(self.pattern) - set("DUG"):
            raise ConfigError(f"pattern must be over D/U/G, got {self.pattern!r}")
        if self.slots_per_frame % len(self.pattern):
            raise ConfigError("pattern length must divide slots_per_frame")
        if not self.uplink_indices():
            raise ConfigError("pattern needs at least one uplink slot")
        if not (0 < self.preparation_time_ns < self.pattern_period_ns):
            raise ConfigError("preparation time must fit inside one pattern period")


@dataclass(frozen=True)
class RadioConfig:
    grant_prbs: int = 10
    mcs_index: int = 23
    tbs_table: dict[tuple[int, int], int] = field(
        default_factory=lambda: dict(DEFAULT_TBS_TABLE)
    )
    harq_fail_prob: float = 0.01
    max_harq_attempts: int = 4
    harq_rtt_slots: int = 4
    tx_decode_latency_ns: int = 1_000_000
    header_overhead_bytes: int = 31

    def validate(self) -> None:
        if self.grant_prbs <= 0:
            raise ConfigError("grant_prbs must be positive")
        if not 0.0 <= self.harq_fail_prob < 1.0:
            raise ConfigError("harq_fail_prob must be in [0, 1)")
        if self.max_harq_attempts < 1:
            raise ConfigError("max_harq_attempts must be >= 1")
        if self.harq_rtt_slots < 1:
            raise ConfigError("harq_rtt_slots must be >= 1")
        if self.tx_decode_latency_ns <= 0:
            raise ConfigError("tx_decode_latency_ns must be positive")
        if self.header_overhead_bytes < 0:
            raise ConfigError("header overhead must be non-negative")


@dataclass(frozen=True)
class TrafficConfig:
    payload_bytes: int = 500
    period_ns: int = 10_000_000
    arrival_offset_ns: int = 4_500_000
    arrival_jitter_ns: int = 750_000
    packet_count: int = 120_000

    def validate(self) -> None:
        if self.payload_bytes <= 0:
            raise ConfigError("payload must be positive")
        if self.period_ns <= 0:
            raise ConfigError("period must be positive")
        if not 0 <= self.arrival_offset_ns < self.period_ns:
            raise ConfigError("arrival offset must lie in [0, period)")
        if self.arrival_jitter_ns < 0:
            raise ConfigError("jitter must be non-negative")
        if self.packet_count < 0:
            raise ConfigError("packet_count must be non-negative")


@dataclass(frozen=True)
class CoreConfig:
    base_delay_ns: int = 300_000
    jitter_ns: int = 100_000

    def validate(self) -> None:
        if self.base_delay_ns < 0:
            raise ConfigError("core base delay must be non-negative")
        if not 0 <= self.jitter_ns <= self.base_delay_ns:
            # jitter is a uniform half-width; keeping it under the base
            # keeps the core component non-negative.
            raise ConfigError("core jitter must be in [0, base_delay]")


@dataclass(frozen=True)
class ExperimentConfig:
    tdd: TddConfig = field(default_factory=TddConfig)
    radio: RadioConfig = field(default_factory=RadioConfig)
    traffic: TrafficConfig = field(default_factory=TrafficConfig)
    core: CoreConfig = field(default_factory=CoreConfig)
    rng_seed: int = 7

    def validate(self) -> None:
        self.tdd.validate()
        self.radio.validate()
        self.traffic.validate()
        self.core.validate()
        key = (self.radio.grant_prbs, self.radio.mcs_index)
        if key not in self.radio.tbs_table:
            raise ConfigError(f"tbs_table has no entry for (prbs, mcs)={key}")
        # A retry must not be scheduled before its failed decode completes.
        min_rtt_ns = self.tdd.preparation_time_ns + self.radio.tx_decode_latency_ns
        if self.radio.harq_rtt_slots * self.tdd.slot_duration_ns < min_rtt_ns:
            raise ConfigError(
                "harq_rtt_slots too small: retry would precede decode feedback"
            )

    def rlc_packet_bytes(self) -> int:
        return self.traffic.payload_bytes + self.radio.header_overhead_bytes

    def with_overrides(self, **kw) -> "ExperimentConfig":
        """Return a copy with flat overrides applied.

        Accepted keys: grant_prbs, arrival_offset_ns, harq_fail_prob,
        harq_rtt_slots, packet_count, rng_seed.
        """
        cfg = self
        radio_kw = {k: v for k, v in kw.items()
                    if k in ("grant_prbs", "harq_fail_prob", "harq_rtt_slots")}
        traffic_kw = {k: v for k, v in kw.items()
                      if k in ("arrival_offset_ns", "packet_count")}
        rest = set(kw) - set(radio_kw) - set(traffic_kw) - {"rng_seed"}
        if rest:
            raise ConfigError(f"unknown overrides {sorted(rest)}")
        if radio_kw:
            cfg = replace(cfg, radio=replace(cfg.radio, **radio_kw))
        if traffic_kw:
            cfg = replace(cfg, traffic=replace(cfg.traffic, **traffic_kw))
        if "rng_seed" in kw:
            cfg = replace(cfg, rng_seed=kw["rng_seed"])
        return cfg

    def to_dict(self) -> dict:
        return {
            "tdd": {
                "frame_duration_ns": self.tdd.frame_duration_ns,
                "slots_per_frame": self.tdd.slots_per_frame,
                "pattern": self.tdd.pattern,
                "preparation_time_ns": self.tdd.preparation_time_ns,
            },
            "radio": {
                "grant_prbs": self.radio.grant_prbs,
                "mcs_index": self.radio.mcs_index,
                "tbs_table": [
                    [prbs, mcs, tbs]
                    for (prbs, mcs), tbs in sorted(self.radio.tbs_table.items())
                ],
                "harq_fail_prob": self.radio.harq_fail_prob,
                "max_harq_attempts": self.radio.max_harq_attempts,
                "harq_rtt_slots": self.radio.harq_rtt_slots,
                "tx_decode_latency_ns": self.radio.tx_decode_latency_ns,
                "header_overhead_bytes": self.radio.header_overhead_bytes,
            },
            "traffic": {
                "payload_bytes": self.traffic.payload_bytes,
                "period_ns": self.traffic.period_ns,
                "arrival_offset_ns": self.traffic.arrival_offset_ns,
                "arrival_jitter_ns": self.traffic.arrival_jitter_ns,
                "packet_count": self.traffic.packet_count,
            },
            "core": {
                "base_delay_ns": self.core.base_delay_ns,
                "jitter_ns": self.core.jitter_ns,
            },
            "rng_seed": self.rng_seed,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        try:
            tdd = TddConfig(**raw.get("tdd", {}))
            radio_raw = dict(raw.get("radio", {}))
            if "tbs_table" in radio_raw:
                radio_raw["tbs_table"] = {
                    (int(p), int(m)): int(t) for p, m, t in radio_raw["tbs_table"]
                }
            radio = RadioConfig(**radio_raw)
            traffic = TrafficConfig(**raw.get("traffic", {}))
            core = CoreConfig(**raw.get("core", {}))
        except TypeError as exc:
            raise ConfigError(f"bad config document: {exc}") from None
        cfg = cls(tdd=tdd, radio=radio, traffic=traffic, core=core,
                  rng_seed=raw.get("rng_seed", 7))
        cfg.validate()
        return cfg


def load_config(path: str) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    return ExperimentConfig.from_dict(raw)


def save_config(config: ExperimentConfig, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(config.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


# The three canned experiments: (a) narrow grant that forces two segments
# per packet, (b) wide grant that fits the whole packet, (c) wide grant
# plus the sweep-optimal arrival offset.
PRESET_NAMES = ("a", "b", "c")


def preset(name: str) -> ExperimentConfig:
    if name == "a":
        return ExperimentConfig(radio=RadioConfig(grant_prbs=5))
    if name == "b":
        return ExperimentConfig(radio=RadioConfig(grant_prbs=10))
    if name == "c":
        return ExperimentConfig(
            radio=RadioConfig(grant_prbs=10),
            traffic=TrafficConfig(arrival_offset_ns=3_000_000),
        )
    raise ConfigError(f"unknown preset {name!r} (expected one of {PRESET_NAMES})")
