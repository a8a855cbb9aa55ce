import dataclasses

import pytest

from uplat.config import (
    CoreConfig,
    ExperimentConfig,
    RadioConfig,
    TddConfig,
    TrafficConfig,
)


def mini_config(
    packet_count=50,
    grant_prbs=10,
    harq_fail_prob=0.0,
    arrival_offset_ns=4_000_000,
    arrival_jitter_ns=0,
    seed=1,
    pattern=None,
    harq_rtt_slots=4,
    max_harq_attempts=4,
    core_jitter_ns=0,
):
    """A small, fully pinned experiment for unit tests."""
    tdd = TddConfig() if pattern is None else dataclasses.replace(
        TddConfig(), pattern=pattern
    )
    return ExperimentConfig(
        tdd=tdd,
        radio=RadioConfig(
            grant_prbs=grant_prbs,
            harq_fail_prob=harq_fail_prob,
            harq_rtt_slots=harq_rtt_slots,
            max_harq_attempts=max_harq_attempts,
        ),
        traffic=TrafficConfig(
            packet_count=packet_count,
            arrival_offset_ns=arrival_offset_ns,
            arrival_jitter_ns=arrival_jitter_ns,
        ),
        core=CoreConfig(jitter_ns=core_jitter_ns),
        rng_seed=seed,
    )


@pytest.fixture
def small_run():
    from uplat.simulator import simulate

    cfg = mini_config(packet_count=40, harq_fail_prob=0.3, arrival_jitter_ns=750_000,
                      core_jitter_ns=100_000, seed=11)
    return cfg, simulate(cfg)
