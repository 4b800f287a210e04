import copy
import json
from pathlib import Path

import pytest

from polwire import config as C
from polwire.errors import ConfigError
from polwire.model import photon_energy

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

BASE = {
    "geometry": {"Lx_nm": 1000.0, "Ly_nm": 200.0, "Lz_nm": 400.0, "epsilon": 3.0, "m_max": 20},
    "matter": {"N_M": 100, "a_nm": 10.0, "sigma_a_nm": 1.0, "E_M_eV": 2.0, "sigma_M_eV": 0.02, "Omega_R_eV": 0.1},
    "seed": 7,
    "generator_id": "PCG64",
    "wavepacket": {"sigma_x_nm": 40.0, "qbar0_invnm": 0.0},
    "run": {"t_max_fs": 100.0, "dt_fs": 5.0, "n_edge": 5},
}


def doc(**patch):
    d = copy.deepcopy(BASE)
    for path, value in patch.items():
        keys = path.split("__")
        node = d
        for k in keys[:-1]:
            node = node[k]
        if value is None:
            del node[keys[-1]]
        else:
            node[keys[-1]] = value
    return d


def test_valid_config_and_defaults():
    cfg = C.from_dict(BASE)
    assert cfg.matter.N_M == 100 and cfg.geometry.n_modes == 41
    assert cfg.run.fit_window == 500.0 and cfg.run.bin_width == 500.0
    assert cfg.x0 == 500.0
    assert cfg.formats == ("csv",)


@pytest.mark.parametrize(
    "patch,path",
    [
        ({"matter__N_M": "100"}, "matter.N_M"),
        ({"matter__N_M": 2.5}, "matter.N_M"),
        ({"geometry__Ly_nm": -1.0}, "geometry.Ly_nm"),
        ({"wavepacket__sigma_x_nm": None}, "wavepacket"),
        ({"run__extra_key": 1}, "run"),
        ({"generator_id": "lcg"}, "generator_id"),
        ({"seed": -1}, "seed"),
        ({"geometry__epsilon": 0.5}, "geometry.epsilon"),
    ],
)
def test_schema_errors_carry_key_path(patch, path):
    with pytest.raises(ConfigError) as err:
        C.from_dict(doc(**patch))
    assert err.value.path == path


def test_length_mismatch_has_corrective_message():
    with pytest.raises(ConfigError) as err:
        C.from_dict(doc(geometry__Lx_nm=1200.0))
    assert err.value.path == "geometry.Lx_nm"
    assert "set Lx_nm to 1000" in str(err.value)


def test_edge_width_bound():
    with pytest.raises(ConfigError) as err:
        C.from_dict(doc(run__n_edge=50))
    assert err.value.path == "run.n_edge"


def test_load_reports_file_problems(tmp_path):
    with pytest.raises(ConfigError):
        C.load(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{ not json")
    with pytest.raises(ConfigError) as err:
        C.load(bad)
    assert "line 1" in str(err.value)


def test_round_trip_and_digest():
    cfg = C.from_dict(BASE)
    again = C.from_dict(C.to_dict(cfg))
    assert again == cfg
    assert again.digest() == cfg.digest()
    assert C.from_dict(doc(seed=8)).digest() != cfg.digest()


def test_sweep_axes():
    cfg = C.from_dict(BASE)
    assert C.apply_axis(cfg, "sigma_M", 0.05).matter.sigma_M == 0.05
    assert C.apply_axis(cfg, "sigma_M_ratio", 0.4).matter.sigma_M == pytest.approx(0.04)
    assert C.apply_axis(cfg, "Omega_R", 0.2).matter.Omega_R == 0.2
    assert C.apply_axis(cfg, "sigma_x", 80.0).wavepacket.sigma_x == 80.0
    assert C.apply_axis(cfg, "qbar0", 0.01).wavepacket.qbar0 == 0.01
    detuned = C.apply_axis(cfg, "detuning", 0.1)
    assert float(photon_energy(cfg.geometry, 0.0)) - detuned.matter.E_M == pytest.approx(0.1)
    with pytest.raises(ConfigError):
        C.apply_axis(cfg, "temperature", 1.0)


@pytest.mark.parametrize("path", sorted(CONFIGS.rglob("*.json")), ids=lambda p: f"{p.parent.name}/{p.name}")
def test_shipped_configs_validate(path):
    cfg = C.load(path)
    assert json.loads(path.read_text())["seed"] == cfg.seed
