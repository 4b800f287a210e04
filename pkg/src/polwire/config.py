"""JSON run configuration: schema validation and conversion to domain types.

All units are part of the key names. Validation errors carry the dotted
path of the offending key.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import jsonschema

from .dynamics import WavepacketSpec
from .errors import ConfigError
from .model import CavityGeometry, MatterSpec, check_consistency, photon_energy

_POS = {"type": "number", "exclusiveMinimum": 0}
_NONNEG = {"type": "number", "minimum": 0}


def _obj(props, required=None):
    return {
        "type": "object",
        "properties": props,
        "required": list(props) if required is None else required,
        "additionalProperties": False,
    }


MODEL_SCHEMA_PROPS = {
    "geometry": _obj(
        {
            "Lx_nm": _POS,
            "Ly_nm": _POS,
            "Lz_nm": _POS,
            "epsilon": {"type": "number", "minimum": 1},
            "m_max": {"type": "integer", "minimum": 0},
        }
    ),
    "matter": _obj(
        {
            "N_M": {"type": "integer", "minimum": 1},
            "a_nm": _POS,
            "sigma_a_nm": _NONNEG,
            "E_M_eV": _POS,
            "sigma_M_eV": _NONNEG,
            "Omega_R_eV": _NONNEG,
        }
    ),
    "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
    "generator_id": {"type": "string", "enum": ["PCG64", "PCG64DXSM", "Philox", "SFC64", "MT19937"]},
}

SWEEP_AXES = ("sigma_M", "sigma_M_ratio", "Omega_R", "sigma_x", "qbar0", "detuning")

RUN_SCHEMA = _obj(
    {
        **MODEL_SCHEMA_PROPS,
        "wavepacket": _obj(
            {"sigma_x_nm": _POS, "qbar0_invnm": {"type": "number"}, "x0_nm": _POS},
            required=["sigma_x_nm", "qbar0_invnm"],
        ),
        "run": _obj(
            {
                "t_max_fs": _NONNEG,
                "dt_fs": _POS,
                "fit_window_fs": _POS,
                "bin_width_nm": _POS,
                "n_edge": {"type": "integer", "minimum": 0},
                "profile_times_fs": {"type": "array", "items": _NONNEG},
            },
            required=["t_max_fs", "dt_fs"],
        ),
        "output": _obj(
            {
                "directory": {"type": "string"},
                "formats": {"type": "array", "items": {"enum": ["csv", "json"]}},
            },
            required=[],
        ),
        "sweep": _obj(
            {
                "axis": {"enum": list(SWEEP_AXES)},
                "values": {"type": "array", "items": {"type": "number"}, "minItems": 1},
                "n_realizations": {"type": "integer", "minimum": 1},
                "base_seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
            },
            required=["axis", "values"],
        ),
        "signatures": _obj(
            {
                "disorder_ratios": {"type": "array", "items": _NONNEG, "minItems": 1},
                "n_realizations": {"type": "integer", "minimum": 1},
                "threshold": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "q_window_invnm": _NONNEG,
                "rabi_t_max_fs": _POS,
                "rabi_dt_fs": _POS,
            },
            required=[],
        ),
    },
    required=["geometry", "matter", "seed", "generator_id", "wavepacket", "run"],
)


@dataclass(frozen=True)
class RunSettings:
    t_max: float
    dt: float = 5.0
    fit_window: float = 500.0
    bin_width: float = 500.0
    n_edge: int = 100
    profile_times: tuple = ()


@dataclass(frozen=True)
class SignatureSettings:
    disorder_ratios: tuple = (0.0, 0.2, 0.4, 1.0)
    n_realizations: int = 25
    threshold: float = 0.10
    q_window: Optional[float] = None  # default: half a grid spacing (q = 0 only)
    rabi_t_max: float = 1000.0
    rabi_dt: float = 1.0


@dataclass(frozen=True)
class RunConfig:
    geometry: CavityGeometry
    matter: MatterSpec
    seed: int
    generator_id: str
    wavepacket: WavepacketSpec
    run: RunSettings
    output_dir: str = "out"
    formats: tuple = ("csv",)
    sweep: Optional[dict] = None
    signatures: SignatureSettings = field(default_factory=SignatureSettings)
    raw: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def x0(self):
        return self.wavepacket.center(self.geometry)

    def digest(self):
        """SHA-256 of the canonical JSON form of the configuration."""
        blob = json.dumps(to_dict(self), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _error_path(err):
    return ".".join(str(p) for p in err.absolute_path) or "<root>"


def validate(doc):
    validator = jsonschema.Draft7Validator(RUN_SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        err = errors[0]
        raise ConfigError(err.message, _error_path(err))


def from_dict(doc):
    validate(doc)
    g, m, w, r = doc["geometry"], doc["matter"], doc["wavepacket"], doc["run"]
    try:
        geom = CavityGeometry(g["Lx_nm"], g["Ly_nm"], g["Lz_nm"], g["epsilon"], g["m_max"])
        matter = MatterSpec(
            m["N_M"], m["a_nm"], m["sigma_a_nm"], m["E_M_eV"], m["sigma_M_eV"], m["Omega_R_eV"]
        )
    except ConfigError as exc:
        section = "geometry" if exc.path in {"L_x", "L_y", "L_z", "epsilon", "m_max"} else "matter"
        raise ConfigError(str(exc), f"{section}.{exc.path}") from None
    check_consistency(matter, geom)
    wp = WavepacketSpec(w["sigma_x_nm"], w["qbar0_invnm"], w.get("x0_nm"))
    run = RunSettings(
        t_max=r["t_max_fs"],
        dt=r["dt_fs"],
        fit_window=r.get("fit_window_fs", 500.0),
        bin_width=r.get("bin_width_nm", 500.0),
        n_edge=r.get("n_edge", 100),
        profile_times=tuple(r.get("profile_times_fs", ())),
    )
    if not run.n_edge < matter.N_M / 2:
        raise ConfigError(f"must be < N_M/2 = {matter.N_M / 2:g}", "run.n_edge")
    out = doc.get("output", {})
    sig = doc.get("signatures", {})
    signatures = SignatureSettings(
        disorder_ratios=tuple(sig.get("disorder_ratios", SignatureSettings.disorder_ratios)),
        n_realizations=sig.get("n_realizations", SignatureSettings.n_realizations),
        threshold=sig.get("threshold", SignatureSettings.threshold),
        q_window=sig.get("q_window_invnm"),
        rabi_t_max=sig.get("rabi_t_max_fs", SignatureSettings.rabi_t_max),
        rabi_dt=sig.get("rabi_dt_fs", SignatureSettings.rabi_dt),
    )
    return RunConfig(
        geometry=geom,
        matter=matter,
        seed=doc["seed"],
        generator_id=doc["generator_id"],
        wavepacket=wp,
        run=run,
        output_dir=out.get("directory", "out"),
        formats=tuple(out.get("formats", ("csv",))),
        sweep=doc.get("sweep"),
        signatures=signatures,
        raw=doc,
    )


def load(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", str(path)) from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}", str(path)) from exc
    return from_dict(doc)


def to_dict(cfg: RunConfig):
    g, m, w, r, s = cfg.geometry, cfg.matter, cfg.wavepacket, cfg.run, cfg.signatures
    doc = {
        "geometry": {"Lx_nm": g.L_x, "Ly_nm": g.L_y, "Lz_nm": g.L_z, "epsilon": g.epsilon, "m_max": g.m_max},
        "matter": {
            "N_M": m.N_M,
            "a_nm": m.a,
            "sigma_a_nm": m.sigma_a,
            "E_M_eV": m.E_M,
            "sigma_M_eV": m.sigma_M,
            "Omega_R_eV": m.Omega_R,
        },
        "seed": cfg.seed,
        "generator_id": cfg.generator_id,
        "wavepacket": {"sigma_x_nm": w.sigma_x, "qbar0_invnm": w.qbar0},
        "run": {
            "t_max_fs": r.t_max,
            "dt_fs": r.dt,
            "fit_window_fs": r.fit_window,
            "bin_width_nm": r.bin_width,
            "n_edge": r.n_edge,
            "profile_times_fs": list(r.profile_times),
        },
        "output": {"directory": cfg.output_dir, "formats": list(cfg.formats)},
        "signatures": {
            "disorder_ratios": list(s.disorder_ratios),
            "n_realizations": s.n_realizations,
            "threshold": s.threshold,
            "rabi_t_max_fs": s.rabi_t_max,
            "rabi_dt_fs": s.rabi_dt,
        },
    }
    if w.x0 is not None:
        doc["wavepacket"]["x0_nm"] = w.x0
    if s.q_window is not None:
        doc["signatures"]["q_window_invnm"] = s.q_window
    if cfg.sweep is not None:
        doc["sweep"] = dict(cfg.sweep)
    return doc


def apply_axis(cfg: RunConfig, axis, value):
    """Return a copy of ``cfg`` with one sweep parameter set to ``value``."""
    m, w = cfg.matter, cfg.wavepacket
    value = float(value)
    if axis == "sigma_M":
        return replace(cfg, matter=replace(m, sigma_M=value))
    if axis == "sigma_M_ratio":
        return replace(cfg, matter=replace(m, sigma_M=value * m.Omega_R))
    if axis == "Omega_R":
        return replace(cfg, matter=replace(m, Omega_R=value))
    if axis == "sigma_x":
        return replace(cfg, wavepacket=replace(w, sigma_x=value))
    if axis == "qbar0":
        return replace(cfg, wavepacket=replace(w, qbar0=value))
    if axis == "detuning":
        hw0 = float(photon_energy(cfg.geometry, 0.0))
        return replace(cfg, matter=replace(m, E_M=hw0 - value))
    raise ConfigError(f"unknown sweep axis {axis!r}", "sweep.axis")
