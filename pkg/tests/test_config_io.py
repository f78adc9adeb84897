import numpy as np
import pytest
import yaml
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from spdchom.config import SimulationConfig, config_from_dict, desk_scale, load_config
from spdchom.grid import ConfigurationError
from spdchom.io import OutputError, check_writable, read_array, read_csv, write_array, write_csv, write_json


def test_defaults_match_reference_parameters():
    c = SimulationConfig()
    assert c.grid.shape == (128, 128, 128)
    assert (c.grid.dx, c.grid.dt) == (7.8e-3, 2.3)
    assert (c.pump.sigma_x, c.pump.sigma_t, c.pump.wavelength) == (0.1, 42.0, 354.7)
    assert (c.crystal.g, c.crystal.length, c.crystal.width) == (4.2, 0.8, 1.0)
    assert (c.interferometer.filter_center, c.interferometer.filter_sigma) == (709.4, 0.2)
    assert (c.ensemble.n_realizations, c.ensemble.n_characterization) == (100, 1000)
    assert c.noise.seed == c.ensemble.base_seed


def test_yaml_round_trip(tmp_path):
    c = SimulationConfig().with_section("scan", parameter="tilt_grid", values=((1.0, 2.0), (3.0, 4.0)))
    p = tmp_path / "c.yaml"
    p.write_text(c.to_yaml())
    back = load_config(p)
    assert back == c
    assert back.hash == c.hash


def test_hash_changes_with_seed():
    a = SimulationConfig()
    assert a.with_section("ensemble", base_seed=1).hash != a.hash


def test_desk_scale_halves_grid_and_keeps_steps():
    d = desk_scale()
    assert d.grid.shape == (64, 64, 64)
    assert d.grid.dx == SimulationConfig().grid.dx
    assert d.ensemble.n_realizations == d.ensemble.n_characterization == 100


@pytest.mark.parametrize("data", [
    {"bogus": {}},
    {"grid": {"n_x": 100}},
    {"pump": {"colour": 1}},
    {"noise": {"seed": 3}},
    {"scan": {"parameter": "angle"}},
    {"scan": {"parameter": "tilt_grid", "values": [1.0, 2.0]}},
    {"ensemble": {"n_realizations": 1}},
    {"mirror_axis": "left"},
    {"pump": {"wavelength": 400.0}},
])
def test_invalid_configs_rejected(data):
    with pytest.raises(ConfigurationError):
        config_from_dict(data)


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigurationError):
        load_config(tmp_path / "missing.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text("grid: [unclosed")
    with pytest.raises(ConfigurationError):
        load_config(bad)


def test_partial_config_fills_defaults():
    c = config_from_dict(yaml.safe_load("grid: {n_x: 64}\nensemble: {base_seed: 7}\n"))
    assert c.grid.n_x == 64 and c.grid.n_y == 128
    assert c.noise.seed == 7


@settings(max_examples=25, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 4), st.integers(1, 5)),
              elements=st.floats(allow_nan=False, allow_infinity=False)),
       st.booleans())
def test_array_round_trip(tmp_path_factory, a, as_complex):
    d = tmp_path_factory.mktemp("arr")
    arr = a + 1j * a[::-1] if as_complex else a
    write_array(d / "x", arr, {"x": np.arange(a.shape[0]) * 0.1}, {"x": "mm"}, "abc", {"note": "t"})
    back, hdr = read_array(d / "x")
    np.testing.assert_array_equal(back, arr)
    assert hdr["config_hash"] == "abc" and hdr["units_x"] == "mm" and hdr["note"] == "t"
    np.testing.assert_array_equal(hdr["axes"]["x"], np.arange(a.shape[0]) * 0.1)
    raw = (d / "x.bin").read_bytes()
    assert len(raw) == arr.size * 8 * (2 if as_complex else 1)
    assert np.frombuffer(raw, "<f8")[0] == (arr.real.ravel()[0] if as_complex else arr.ravel()[0])


def test_csv_floats_round_trip_exactly(tmp_path):
    v = 0.1 + 0.2
    write_csv(tmp_path / "t.csv", ["a", "b"], [["x", v]])
    rows = read_csv(tmp_path / "t.csv")
    assert float(rows[0]["b"]) == v


def test_write_errors_are_output_errors(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(OutputError):
        write_array(blocker / "x", np.zeros(2))
    with pytest.raises(OutputError):
        write_csv(blocker / "t.csv", ["a"], [])
    with pytest.raises(OutputError):
        write_json(blocker / "m.json", {})
    with pytest.raises(OutputError):
        check_writable(blocker / "sub")
    assert isinstance(OutputError("x"), OSError)
