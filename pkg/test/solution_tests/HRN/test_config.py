import math
import os
from dataclasses import replace

import numpy as np
import pytest

from lib.solutions.errors import ConfigError
from lib.solutions.HRN.config import SimConfig, config_hash, load_config, serialize_config

MINIMAL = """\
# smallest accepted file
[grid]
points = 16

[time]
T = 0.1
dt = 0.01

[galerkin]
j = 4
n = 2

[fluid]
mu = 0.1
"""


def write(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_minimal_file_gets_defaults(tmp_path):
    config = load_config(write(tmp_path, MINIMAL))
    assert config == SimConfig(points=16, T=0.1, dt=0.01, j=4, mu=0.1, n=2)
    assert config.kappa == 1.0
    assert config.box_length == 2 * math.pi
    assert config.steps == 10
    assert config.grid.shape == (16, 16)


def test_round_trip(tmp_path):
    text = MINIMAL + '\n[initial]\nvelocity = "taylor_green"\ndensity = vacuum_disk\ncenter = 3.0, 3.5\n'
    config = load_config(write(tmp_path, text))
    again = load_config(write(tmp_path, serialize_config(config), "canonical.cfg"))
    assert again == config
    assert config_hash(again) == config_hash(config)


def test_hash_follows_the_content(tmp_path):
    config = load_config(write(tmp_path, MINIMAL))
    assert config_hash(config) != config_hash(replace(config, seed=1))


@pytest.mark.parametrize(
    "addition,key,line",
    [
        ("viscoity = 0.2\n", "viscoity", 15),  # unknown key, misspelt viscosity
        ("kappa = -1\n", "kappa", 15),  # out of range
        ("mu = 0.3\n", "mu", 15),  # duplicate
        ("kappa = fast\n", "kappa", 15),  # not a number
    ],
)
def test_errors_name_key_and_line(tmp_path, addition, key, line):
    with pytest.raises(ConfigError) as error:
        load_config(write(tmp_path, MINIMAL + addition))
    assert error.value.key == key
    assert error.value.line == line
    assert f"key '{key}'" in str(error.value)


def test_missing_required_key(tmp_path):
    with pytest.raises(ConfigError, match="'mu'"):
        load_config(write(tmp_path, MINIMAL.replace("mu = 0.1\n", "")))


@pytest.mark.parametrize(
    "old,new,key",
    [
        ("dt = 0.01", "dt = 0.2", "dt"),  # longer than the horizon
        ("dt = 0.01", "dt = 0.03", "dt"),  # not a whole number of steps
        ("j = 4", "j = 500", "j"),  # beyond the grid capacity
        ("n = 2", "n = 8", "n"),  # mollifier narrower than the grid
        ("points = 16", "points = 15", "points"),
    ],
)
def test_inconsistent_values(tmp_path, old, new, key):
    with pytest.raises(ConfigError) as error:
        load_config(write(tmp_path, MINIMAL.replace(old, new)))
    assert error.value.key == key


def test_zero_horizon_is_accepted(tmp_path):
    config = load_config(write(tmp_path, MINIMAL.replace("T = 0.1", "T = 0")))
    assert config.T == 0.0 and config.steps == 0


def test_negative_horizon_is_rejected(tmp_path):
    with pytest.raises(ConfigError) as error:
        load_config(write(tmp_path, MINIMAL.replace("T = 0.1", "T = -0.1")))
    assert error.value.key == "T"


def test_calibration_epsilon(tmp_path):
    config = load_config(write(tmp_path, MINIMAL + "\n[stability]\ncalibration_epsilon = 0.05\n"))
    assert config.calibration_epsilon == 0.05
    assert SimConfig(points=16, T=0.1, dt=0.01, j=4, mu=0.1).calibration_epsilon == 1e-2


def test_key_outside_a_section(tmp_path):
    with pytest.raises(ConfigError, match="line 1"):
        load_config(write(tmp_path, "points = 16\n" + MINIMAL))


def test_missing_forcing_file(tmp_path):
    text = MINIMAL + "\n[forcing]\nkind = file\npath = missing.npy\n"
    with pytest.raises(ConfigError, match="does not exist"):
        load_config(write(tmp_path, text))


def test_relative_forcing_path_is_resolved(tmp_path):
    np.save(tmp_path / "shear.npy", np.zeros((2, 16, 16)))
    config = load_config(write(tmp_path, MINIMAL + "\n[forcing]\nkind = file\npath = shear.npy\n"))
    assert config.forcing_path == str(tmp_path / "shear.npy")
    assert config.fluid_params().forcing.kind == "file"


def test_unreadable_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(str(tmp_path / "absent.cfg"))


def test_initial_data_from_config(tmp_path):
    text = MINIMAL.replace("points = 16", "points = 32") + "\n[initial]\ndensity = vacuum_strip\nM = 2.0\n"
    init = load_config(write(tmp_path, text)).initial_data()
    assert init.rho0.minimum == 0.0 and init.rho0.maximum == 2.0
    assert init.n == 2


SHIPPED = os.path.abspath(os.path.join(os.path.dirname(__file__), "..", "..", "..", "config"))


@pytest.mark.parametrize("name", sorted(os.listdir(SHIPPED)))
def test_shipped_configs_load(name):
    config = load_config(os.path.join(SHIPPED, name))
    assert config.T > 0


def test_sweep_base_has_no_vacuum():
    init = load_config(os.path.join(SHIPPED, "sweep.cfg")).initial_data()
    assert init.rho0.minimum > 0.0
    assert init.rho0.minimum == init.rho0.maximum


def test_stability_calibrates_apart_from_the_default_sizes():
    config = load_config(os.path.join(SHIPPED, "stability.cfg"))
    assert config.gronwall_constant is None
    assert config.calibration_epsilon not in (1e-3, 1e-4)
