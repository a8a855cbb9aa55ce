import dataclasses

import pytest

from uplat.config import (
    ExperimentConfig,
    RadioConfig,
    TddConfig,
    TrafficConfig,
    load_config,
    preset,
    save_config,
)
from uplat.errors import ConfigError


def test_defaults_validate():
    ExperimentConfig().validate()
    for name in "abc":
        preset(name).validate()


def test_preset_knobs():
    assert preset("a").radio.grant_prbs == 5
    assert preset("b").radio.grant_prbs == 10
    c = preset("c")
    assert c.radio.grant_prbs == 10
    assert c.traffic.arrival_offset_ns == 3_000_000


def test_unknown_preset():
    with pytest.raises(ConfigError):
        preset("z")


@pytest.mark.parametrize("pattern", ["", "DX", "DDDD", "DDDDDDDDDD"])
def test_bad_patterns(pattern):
    # empty / bad alphabet / not dividing 20 evenly is caught; a pattern
    # with no uplink slot at all is also rejected
    cfg = dataclasses.replace(TddConfig(), pattern=pattern)
    with pytest.raises(ConfigError):
        cfg.validate()


def test_grant_indices_fall_back_to_uplink():
    tdd = dataclasses.replace(TddConfig(), pattern="DDDDDDDUUU")
    assert tdd.grant_indices() == (7, 8, 9)
    assert TddConfig().grant_indices() == (9,)
    assert TddConfig().uplink_indices() == (3, 9)


def test_offset_must_fit_period():
    cfg = ExperimentConfig(traffic=TrafficConfig(arrival_offset_ns=10_000_000))
    with pytest.raises(ConfigError):
        cfg.validate()


def test_tbs_table_must_cover_grant():
    cfg = ExperimentConfig(radio=RadioConfig(grant_prbs=7))
    with pytest.raises(ConfigError):
        cfg.validate()


def test_harq_rtt_causality():
    cfg = ExperimentConfig(radio=RadioConfig(harq_rtt_slots=2))
    with pytest.raises(ConfigError):
        cfg.validate()


def test_overrides():
    cfg = preset("b").with_overrides(
        grant_prbs=5, arrival_offset_ns=1_000_000, harq_fail_prob=0.1,
        packet_count=10, rng_seed=42,
    )
    assert cfg.radio.grant_prbs == 5
    assert cfg.traffic.arrival_offset_ns == 1_000_000
    assert cfg.traffic.packet_count == 10
    assert cfg.rng_seed == 42
    with pytest.raises(ConfigError):
        cfg.with_overrides(nope=1)


def test_config_file_round_trip(tmp_path):
    cfg = preset("a").with_overrides(packet_count=123, rng_seed=9)
    path = tmp_path / "cfg.json"
    save_config(cfg, str(path))
    assert load_config(str(path)) == cfg


def test_bad_config_file(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(str(path))
    path.write_text('{"radio": {"bogus_field": 1}}')
    with pytest.raises(ConfigError):
        load_config(str(path))
