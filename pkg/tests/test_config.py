import pytest

from relaychain.config import ConfigError, SimConfig, WorldConfig, dump_config, load_config, valid_keys


def test_defaults_are_valid():
    cfg = SimConfig()
    assert cfg.world.home_pos is not None and cfg.world.sink_pos is not None
    assert cfg.r_min < cfg.r_max <= cfg.world.comm_range


def test_dump_load_round_trip(tmp_path):
    cfg = SimConfig().with_overrides({"world.comm_range": 0.85, "odneat.decay": 0.0125, "controller.kind": "odneat",
                                      "run.wall_clock_budget": 12.5, "world.width": 2, "world.height": 5})
    path = tmp_path / "c.ini"
    path.write_text(dump_config(cfg))
    assert load_config(path) == cfg


def test_defaults_round_trip(tmp_path):
    path = tmp_path / "c.ini"
    path.write_text(dump_config(SimConfig()))
    assert load_config(path) == SimConfig()


def test_bare_keys_and_string_values():
    cfg = SimConfig().with_overrides({"n_robots": "15", "stop_on_connection": "no"})
    assert cfg.world.n_robots == 15 and cfg.run.stop_on_connection is False


def test_corners_follow_arena_size():
    cfg = SimConfig().with_overrides({"world.width": 2.0, "world.height": 5.0})
    # the arena is centred on the origin; corners sit 0.3 m in from both walls
    assert cfg.world.home_pos == pytest.approx((-0.7, -2.2))
    assert cfg.world.sink_pos == pytest.approx((0.7, 2.2))


@pytest.mark.parametrize("overrides", [
    {"world.n_robots": 0},
    {"world.comm_range": -1.0},
    {"world.width": "wide"},
    {"controller.kind": "teleport"},
    {"nope": 1},
    {"world.home_pos": (9.0, 9.0)},
])
def test_invalid_overrides(overrides):
    with pytest.raises(ConfigError):
        SimConfig().with_overrides(overrides)


def test_unknown_section(tmp_path):
    path = tmp_path / "c.ini"
    path.write_text("[physics]\ng = 9.8\n")
    with pytest.raises(ConfigError, match="valid sections"):
        load_config(path)


def test_malformed_file(tmp_path):
    path = tmp_path / "c.ini"
    path.write_text("width = 3\n")
    with pytest.raises(ConfigError):
        load_config(path)


def test_valid_keys_cover_sections():
    keys = valid_keys()
    assert "world.comm_range" in keys and "neat.c3" in keys and "run.stop_on_connection" in keys
    assert len(keys) == len(set(keys))


def test_world_config_validation():
    with pytest.raises(ConfigError):
        WorldConfig(dt=0.0)
