"""Sectioned key-value configuration for reproducible runs.

Keys carry explicit units in their names (``*_over_2pi_hz`` for rates
given as ordinary frequencies, ``*_rad`` for angles); internally
everything is converted to angular frequencies.  Loading validates every
block against the domain invariants and reports *all* violations, not
just the first.  ``serialize_config`` produces a canonical form whose
load/serialize round trip is idempotent.
"""

from __future__ import annotations

import configparser
import io
import math
from dataclasses import dataclass

import numpy as np

from .core import MechanicalMode, OpticalMode, SystemParams
from .instrument import Scenario
from .noise import (
    AbsorptiveNoiseModel,
    BathModel,
    DetectionChain,
    ExtraModeNoise,
    LaserNoiseModel,
)

__all__ = ["ConfigError", "GridSpec", "ScenarioConfig", "load_config", "serialize_config", "default_config_text"]

TWO_PI = 2 * math.pi

# section -> {key: (required, default)}
_SCHEMA = {
    "system": {
        "omega_o_over_2pi_hz": (False, 194.67e12),
        "kappa_over_2pi_hz": (True, None),
        "eta_kappa": (True, None),
        "omega_m0_over_2pi_hz": (True, None),
        "gamma_i_over_2pi_hz": (True, None),
        "g0_over_2pi_hz": (True, None),
        "delta_over_kappa": (True, None),
        "n_c": (True, None),
    },
    "noise": {
        "t_b0_k": (True, None),
        "c0_k_per_photon": (False, 0.0),
        "lump_omega_over_2pi_hz": (False, 0.0),
        "lump_q": (False, 100.0),
        "lump_g0_over_2pi_hz": (False, 0.0),
        "s_omega_omega_rad2_hz": (False, 0.0),
        "absorptive_amp_per_photon": (False, 0.0),
    },
    "detection": {
        "eta_cp": (True, None),
        "eta_12": (False, 1.0),
        "eta_23": (True, None),
        "eta_3h": (True, None),
        "eta_hd": (True, None),
        "dark_ratio_db": (False, math.inf),
        "gain_slope_per_volt": (False, -0.0096),
    },
    "grid": {
        "f_max_hz": (False, 40.4e6),
        "n_fine": (False, 50000),
        "out_f_start_hz": (False, 80e3),
        "out_f_step_hz": (False, 80e3),
        "out_n_points": (False, 501),
        "rbw_hz": (False, 300e3),
        "theta_lock_min_rad": (False, -math.pi / 2),
        "theta_lock_max_rad": (False, math.pi / 2),
        "n_theta_lock": (False, 61),
    },
    "run": {
        "seed": (False, 12345),
        "theta_lock_rad": (False, 0.0),
        "sde_duration_s": (False, 0.0),
        "sde_dt_s": (False, 0.0),
    },
    "fit": {
        "thermometry_csv": (False, ""),
        "locksweep_csv": (False, ""),
    },
}

_INT_KEYS = {"n_fine", "out_n_points", "n_theta_lock", "seed"}
_STR_KEYS = {"thermometry_csv", "locksweep_csv"}


class ConfigError(ValueError):
    """Carries the full list of violations found while loading."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("config invalid:\n" + "\n".join(f"  - {p}" for p in self.problems))


@dataclass(frozen=True)
class GridSpec:
    f_max_hz: float
    n_fine: int
    out_f_start_hz: float
    out_f_step_hz: float
    out_n_points: int
    rbw_hz: float
    theta_lock_min_rad: float
    theta_lock_max_rad: float
    n_theta_lock: int

    def fine_freqs(self):
        df = self.f_max_hz / self.n_fine
        return np.linspace(df, self.f_max_hz, self.n_fine)

    def out_freqs(self):
        return self.out_f_start_hz + self.out_f_step_hz * np.arange(self.out_n_points)

    def theta_locks(self):
        return np.linspace(self.theta_lock_min_rad, self.theta_lock_max_rad, self.n_theta_lock)


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: Scenario
    grid: GridSpec
    seed: int
    theta_lock_rad: float
    sde_duration_s: float
    sde_dt_s: float
    fit_paths: dict
    raw: dict

    @property
    def system(self) -> SystemParams:
        return self.scenario.system


def _parse_sections(text):
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError([f"parse error: {exc}"]) from None
    return {s: dict(parser.items(s)) for s in parser.sections()}


def _collect_values(sections):
    problems = []
    values = {}
    for section in sections:
        if section not in _SCHEMA:
            problems.append(f"unknown section [{section}]")
    for section, schema in _SCHEMA.items():
        got = sections.get(section, {})
        for key in got:
            if key not in schema:
                problems.append(f"unknown key {section}.{key}")
        out = {}
        for key, (required, default) in schema.items():
            if key in got:
                if key in _STR_KEYS:
                    out[key] = got[key]
                    continue
                try:
                    out[key] = int(got[key]) if key in _INT_KEYS else float(got[key])
                except ValueError:
                    problems.append(f"{section}.{key}: not a number ({got[key]!r})")
            elif required:
                problems.append(f"missing required key {section}.{key}")
            else:
                out[key] = default
        values[section] = out
    return values, problems


def _build(values, problems):
    sys_v, noise_v, det_v, grid_v, run_v = (
        values["system"], values["noise"], values["detection"], values["grid"], values["run"]
    )
    scenario = None
    grid = None
    if not problems:
        try:
            kappa = TWO_PI * sys_v["kappa_over_2pi_hz"]
            optical = OpticalMode(
                omega_o=TWO_PI * sys_v["omega_o_over_2pi_hz"],
                kappa=kappa,
                kappa_e=sys_v["eta_kappa"] * kappa,
            )
            mech = MechanicalMode(
                omega_m0=TWO_PI * sys_v["omega_m0_over_2pi_hz"],
                gamma_i=TWO_PI * sys_v["gamma_i_over_2pi_hz"],
                g0=TWO_PI * sys_v["g0_over_2pi_hz"],
            )
            system = SystemParams.build(
                optical, mech, delta=sys_v["delta_over_kappa"] * kappa, n_c=sys_v["n_c"]
            )
        except ValueError as exc:
            problems.append(f"system: {exc}")
            system = None
        bath = lump = laser = absorptive = chain = None
        try:
            bath = BathModel(t_b0=noise_v["t_b0_k"], c0=noise_v["c0_k_per_photon"])
        except ValueError as exc:
            problems.append(f"noise.bath: {exc}")
        if noise_v["lump_g0_over_2pi_hz"] > 0:
            try:
                lump = ExtraModeNoise(
                    omega_lump=TWO_PI * noise_v["lump_omega_over_2pi_hz"],
                    q_lump=noise_v["lump_q"],
                    g0_lump=TWO_PI * noise_v["lump_g0_over_2pi_hz"],
                )
            except ValueError as exc:
                problems.append(f"noise.lump: {exc}")
        if noise_v["s_omega_omega_rad2_hz"] > 0:
            laser = LaserNoiseModel(s_omega_omega=noise_v["s_omega_omega_rad2_hz"])
        if noise_v["absorptive_amp_per_photon"] > 0:
            absorptive = AbsorptiveNoiseModel(amp_coeff=noise_v["absorptive_amp_per_photon"])
        try:
            chain = DetectionChain(
                eta_cp=det_v["eta_cp"], eta_12=det_v["eta_12"], eta_23=det_v["eta_23"],
                eta_3h=det_v["eta_3h"], eta_hd=det_v["eta_hd"],
                dark_ratio_db=det_v["dark_ratio_db"],
                gain_slope_volt=det_v["gain_slope_per_volt"],
            )
        except ValueError as exc:
            problems.append(f"detection: {exc}")
        try:
            grid = GridSpec(**grid_v)
            if grid.out_f_start_hz <= 0 or grid.out_f_step_hz <= 0 or grid.rbw_hz <= 0:
                problems.append("grid: output grid and rbw must be positive")
            out_max = grid.out_f_start_hz + grid.out_f_step_hz * (grid.out_n_points - 1)
            if out_max > grid.f_max_hz:
                problems.append("grid: output grid exceeds the fine span")
        except (TypeError, ValueError) as exc:
            problems.append(f"grid: {exc}")
        if not problems and system is not None:
            scenario = Scenario(
                system=system, bath=bath, lump=lump, laser=laser,
                absorptive=absorptive, chain=chain,
            )
    if problems:
        raise ConfigError(problems)
    return ScenarioConfig(
        scenario=scenario,
        grid=grid,
        seed=run_v["seed"],
        theta_lock_rad=run_v["theta_lock_rad"],
        sde_duration_s=run_v["sde_duration_s"],
        sde_dt_s=run_v["sde_dt_s"],
        fit_paths=dict(values["fit"]),
        raw=values,
    )


def load_config_text(text, overrides=None) -> ScenarioConfig:
    sections = _parse_sections(text)
    values, problems = _collect_values(sections)
    for (section, key), val in (overrides or {}).items():
        if section in values and key in _SCHEMA.get(section, {}):
            if key in _STR_KEYS:
                values[section][key] = str(val)
            else:
                values[section][key] = int(val) if key in _INT_KEYS else float(val)
        else:
            problems.append(f"unknown override {section}.{key}")
    return _build(values, problems)


def load_config(path, overrides=None) -> ScenarioConfig:
    """Load and fully validate a config file; raises ConfigError listing
    every missing key, unknown key, and invariant violation found."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError([f"cannot read {path}: {exc}"]) from None
    return load_config_text(text, overrides=overrides)


def serialize_config(cfg: ScenarioConfig) -> str:
    """Canonical text form: schema order, one key per line, %.12g floats."""
    buf = io.StringIO()
    for section, schema in _SCHEMA.items():
        buf.write(f"[{section}]\n")
        for key in schema:
            val = cfg.raw[section][key]
            if key in _STR_KEYS:
                buf.write(f"{key} = {val}\n")
            elif key in _INT_KEYS:
                buf.write(f"{key} = {int(val)}\n")
            else:
                buf.write(f"{key} = {float(val):.12g}\n")
        buf.write("\n")
    return buf.getvalue()


def default_config_text() -> str:
    """Shipped defaults: the device and acquisition settings of record."""
    return """\
[system]
omega_o_over_2pi_hz = 194.67e12
kappa_over_2pi_hz = 3.42e9
eta_kappa = 0.55
omega_m0_over_2pi_hz = 28e6
gamma_i_over_2pi_hz = 172
g0_over_2pi_hz = 750e3
delta_over_kappa = 0.044
n_c = 790

[noise]
t_b0_k = 16
c0_k_per_photon = 3.2e-4
lump_omega_over_2pi_hz = 50e6
lump_q = 100
lump_g0_over_2pi_hz = 100e3
s_omega_omega_rad2_hz = 6e3
absorptive_amp_per_photon = 1.5e-4

[detection]
eta_cp = 0.90
eta_12 = 0.85
eta_23 = 0.88
eta_3h = 0.92
eta_hd = 0.66
dark_ratio_db = 10.4
gain_slope_per_volt = -0.0096

[grid]
f_max_hz = 40.4e6
n_fine = 50000
out_f_start_hz = 80e3
out_f_step_hz = 80e3
out_n_points = 501
rbw_hz = 300e3
theta_lock_min_rad = -1.5707963267948966
theta_lock_max_rad = 1.5707963267948966
n_theta_lock = 61

[run]
seed = 12345
theta_lock_rad = 0.0
"""
