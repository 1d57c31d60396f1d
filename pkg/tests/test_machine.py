"""Machine config file format tests."""

import pytest

from conformal5x.machine import (MACHINE_HEADER, ConfigError, MachineConfig,
                                 parse_machine, render_machine)


def test_roundtrip_defaults():
    cfg = MachineConfig()
    assert parse_machine(render_machine(cfg)) == cfg


def test_roundtrip_custom():
    cfg = MachineConfig(u_max=45.0, pivot_z=12.5, print_speed=900.0)
    assert parse_machine(render_machine(cfg)) == cfg


def test_missing_keys_keep_defaults():
    cfg = parse_machine(f"{MACHINE_HEADER}\nprint_speed 1500\n")
    assert cfg.print_speed == 1500.0
    assert cfg.travel_speed == MachineConfig().travel_speed


def test_comments_and_blanks_ignored():
    text = f"# a comment\n\n{MACHINE_HEADER}\n# another\nu_max 60\n\n"
    assert parse_machine(text).u_max == 60.0


def test_unknown_key_rejected():
    with pytest.raises(ConfigError, match="unknown machine config key"):
        parse_machine(f"{MACHINE_HEADER}\nwarp_speed 9\n")


def test_duplicate_key_rejected():
    with pytest.raises(ConfigError, match="duplicate"):
        parse_machine(f"{MACHINE_HEADER}\nu_max 45\nu_max 60\n")


def test_bad_number_rejected():
    with pytest.raises(ConfigError, match="not a number"):
        parse_machine(f"{MACHINE_HEADER}\nu_max fast\n")


def test_missing_header_rejected():
    with pytest.raises(ConfigError, match="header"):
        parse_machine("u_max 45\n")


def test_malformed_line_rejected():
    with pytest.raises(ConfigError, match="expected"):
        parse_machine(f"{MACHINE_HEADER}\nu_max\n")


def test_semantic_validation():
    with pytest.raises(ConfigError, match="x_min"):
        parse_machine(f"{MACHINE_HEADER}\nx_min 10\nx_max -10\n")
    with pytest.raises(ConfigError, match="nozzle_cone_half_angle"):
        parse_machine(f"{MACHINE_HEADER}\nnozzle_cone_half_angle 95\n")


def test_speed_limits_mapping():
    cfg = MachineConfig()
    limits = cfg.speed_limits()
    assert set(limits) == {"x", "y", "z", "u", "v", "e"}
    assert limits["v"] == cfg.max_speed_v


def test_pivot_geometry():
    cfg = MachineConfig(pivot_x=1.0, pivot_y=2.0, pivot_z=3.0)
    assert cfg.pivot().pivot_point.tolist() == [1.0, 2.0, 3.0]
