import pytest

from ridesim.config import SimConfig, config_from_mapping, dump_config, parse_config, parse_config_text
from ridesim.errors import ConfigError
from ridesim.pricing import DEFAULT_VEHICLE_TYPES


def test_defaults():
    c = SimConfig()
    assert (c.rows, c.cols, c.cell_size) == (43, 44, 0.8)
    assert c.delta_t == 1.0 and c.idle_threshold == 10.0 and c.radius_km == 5.0
    assert c.duty_hours == 21.0
    assert c.label == "(D, RS, PS, DARM)"


def test_parse_sections_and_alias():
    c = parse_config_text("""
[grid]
rows = 20
cols = 20   # inline comment
[pricing]
lambda = 0.2
pricing = off
""")
    assert (c.rows, c.cols, c.lam, c.pricing) == (20, 20, 0.2, False)


def test_unknown_key():
    with pytest.raises(ConfigError, match="unknown config key"):
        parse_config_text("speeed = 3")


def test_duplicate_key():
    with pytest.raises(ConfigError):
        parse_config_text("[a]\nrows = 3\n[b]\nrows = 4\n")


@pytest.mark.parametrize("text", ["rows = 0", "cell_size = 0", "discount = 1.0", "lambda = 0",
                                  "duty_hours = 25", "speed = -1", "steps = nan", "rows = x",
                                  "pricing = maybe", "profile = resnet"])
def test_rejects_bad_values(text):
    with pytest.raises(ConfigError):
        parse_config_text(text)


def test_vehicle_types_round_trip():
    c = SimConfig()
    again = parse_config_text(dump_config(c))
    assert again == c
    assert again.vehicle_types == DEFAULT_VEHICLE_TYPES


def test_vehicle_types_parse_errors():
    with pytest.raises(ConfigError):
        config_from_mapping({"vehicle_types": "1:4:14"})
    with pytest.raises(ConfigError):
        config_from_mapping({"vehicle_types": "1:4:0:1:1:1"})


def test_missing_file():
    with pytest.raises(ConfigError):
        parse_config("/nonexistent/ridesim.ini")


def test_csv_scenario_needs_trips():
    with pytest.raises(ConfigError):
        SimConfig(scenario="csv")
