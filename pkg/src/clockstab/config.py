"""Run configuration: INI file plus command-line overrides.

Example::

    [laser]
    preset = cL

    [schedule]
    t_ramsey = 0.3, 0.6, 1.0
    t_dead = 0.5

    [ensemble]
    n_atoms = 2000
    state = css

    [run]
    seeds = 0, 1, 2, 3, 4
    n_cycles = 800000

Every key is optional; unknown sections and keys are rejected with the
line they appear on.  Overrides use ``section.key`` names and win over
the file.
"""
from __future__ import annotations

import configparser
import math
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from .core import ClockSchedule, ServoConfig
from .errors import ClockStabError, ConfigError
from .noise_model import (NU0_SR, PRESET_NAMES, AllanCoefficients, LaserNoiseSpec, preset,
                          psd_from_allan, scale_noise)
from .spin_states import EnsembleSpec, optimal_mu

JOBS_ENV = "CLOCKSTAB_JOBS"

SCHEMA = {
    "laser": {"preset", "h_minus2", "h_minus1", "h0", "sigma_white", "sigma_flicker", "sigma_rw",
              "nu0", "scale", "components"},
    "schedule": {"t_ramsey", "t_dead", "t_ramsey_points", "t_ramsey_min", "t_ramsey_max"},
    "ensemble": {"n_atoms", "state", "mu"},
    "servo": {"g", "g2", "servo_kind"},
    "run": {"n_cycles", "seeds", "jobs"},
    "optimize": {"presets", "t_dead", "t_max"},
    "fringe": {"n_atoms", "threshold", "escape"},
    "validate": {"n_cycles", "n_seeds"},
}

NOISE_COMPONENTS = ("white", "flicker", "rw")


@dataclass(frozen=True)
class RunConfig:
    laser_name: str
    laser: LaserNoiseSpec
    t_ramsey: tuple
    t_dead: float
    n_atoms: int
    state: str
    mu: float
    servo: ServoConfig
    n_cycles: int = 800_000
    seeds: tuple = (0,)
    jobs: int = 1
    optimize_presets: tuple = PRESET_NAMES
    optimize_t_dead: tuple = (0.1,)
    optimize_t_max: tuple = ()
    fringe_n_atoms: tuple = (10, 100, 1000)
    fringe_threshold: float = 1e6
    fringe_escape: str = "auto"
    validate_n_cycles: int = 20_000
    validate_n_seeds: int = 20
    raw: dict = field(default_factory=dict, compare=False)

    @property
    def ensemble(self) -> EnsembleSpec:
        return EnsembleSpec(self.n_atoms, self.mu)

    def schedule(self, t_ramsey: float | None = None) -> ClockSchedule:
        return ClockSchedule(self.t_ramsey[0] if t_ramsey is None else t_ramsey, self.t_dead)

    def to_dict(self) -> dict:
        """Resolved values, JSON-serialisable, for output provenance."""
        return {
            "laser": {"name": self.laser_name, "h_minus2": self.laser.h_minus2,
                      "h_minus1": self.laser.h_minus1, "h0": self.laser.h0, "nu0": self.laser.nu0},
            "schedule": {"t_ramsey": list(self.t_ramsey), "t_dead": self.t_dead},
            "ensemble": {"n_atoms": self.n_atoms, "state": self.state, "mu": self.mu},
            "servo": asdict(self.servo),
            "run": {"n_cycles": self.n_cycles, "seeds": list(self.seeds), "jobs": self.jobs},
            "optimize": {"presets": list(self.optimize_presets), "t_dead": list(self.optimize_t_dead),
                         "t_max": list(self.optimize_t_max)},
            "fringe": {"n_atoms": list(self.fringe_n_atoms), "threshold": self.fringe_threshold,
                       "escape": self.fringe_escape},
            "validate": {"n_cycles": self.validate_n_cycles, "n_seeds": self.validate_n_seeds},
        }


def _line_of(text: str, section: str, key: str | None) -> int | None:
    current = None
    for i, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if s.startswith("[") and s.endswith("]"):
            current = s[1:-1].strip()
            if key is None and current == section:
                return i
        elif current == section and key is not None and "=" in s:
            if s.split("=", 1)[0].strip().lower() == key:
                return i
    return None


def read_config_file(path) -> dict[str, dict[str, str]]:
    """Parse an INI file into {section: {key: raw string}} and check names."""
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";",))
    try:
        cp.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    out = {}
    for sec in cp.sections():
        if sec not in SCHEMA:
            raise ConfigError(f"{path}:{_line_of(text, sec, None)}: unknown section [{sec}]")
        for key, value in cp.items(sec):
            if key not in SCHEMA[sec]:
                raise ConfigError(f"{path}:{_line_of(text, sec, key)}: unknown key '{key}' in [{sec}]")
            out.setdefault(sec, {})[key] = value
    return out


def apply_overrides(raw: dict, overrides: dict[str, str]) -> dict:
    """Merge ``{'section.key': value}`` into a raw config; flags win."""
    merged = {sec: dict(vals) for sec, vals in raw.items()}
    for name, value in overrides.items():
        if value is None:
            continue
        sec, _, key = name.partition(".")
        if sec not in SCHEMA or key not in SCHEMA[sec]:
            raise ConfigError(f"unknown setting '{name}'")
        merged.setdefault(sec, {})[key] = str(value)
    return merged


def _float(raw, sec, key, default):
    try:
        v = raw.get(sec, {}).get(key)
        return default if v is None else float(v)
    except ValueError:
        raise ConfigError(f"[{sec}] {key}: expected a number, got {raw[sec][key]!r}") from None


def _int(raw, sec, key, default):
    v = _float(raw, sec, key, default)
    if v is None or (isinstance(v, float) and v != int(v)):
        raise ConfigError(f"[{sec}] {key}: expected an integer, got {raw[sec][key]!r}")
    return int(v)


def _list(raw, sec, key, default, conv=float):
    v = raw.get(sec, {}).get(key)
    if v is None:
        return tuple(default)
    items = [s.strip() for s in v.replace(";", ",").split(",") if s.strip()]
    try:
        return tuple(conv(s) if conv is not int else int(float(s)) for s in items)
    except ValueError:
        raise ConfigError(f"[{sec}] {key}: cannot parse list {v!r}") from None


def _resolve_laser(raw) -> tuple[str, LaserNoiseSpec]:
    sec = raw.get("laser", {})
    nu0 = _float(raw, "laser", "nu0", NU0_SR)
    h_keys = {"h_minus2", "h_minus1", "h0"} & sec.keys()
    s_keys = {"sigma_white", "sigma_flicker", "sigma_rw"} & sec.keys()
    given = [bool(h_keys), bool(s_keys), "preset" in sec]
    if sum(given) > 1:
        raise ConfigError("[laser]: give exactly one of preset, h_* coefficients or sigma_* coefficients")
    if h_keys:
        name = "custom"
        spec = LaserNoiseSpec(_float(raw, "laser", "h_minus2", 0.0), _float(raw, "laser", "h_minus1", 0.0),
                              _float(raw, "laser", "h0", 0.0), nu0)
    elif s_keys:
        name = "custom"
        spec = psd_from_allan(AllanCoefficients(_float(raw, "laser", "sigma_white", 0.0),
                                                _float(raw, "laser", "sigma_flicker", 0.0),
                                                _float(raw, "laser", "sigma_rw", 0.0)), nu0)
    else:
        name = sec.get("preset", "cL").strip()
        if name not in PRESET_NAMES:
            raise ConfigError(f"[laser] preset: unknown laser {name!r}; choose from {', '.join(PRESET_NAMES)}")
        spec = preset(name, nu0)
    comps = _list(raw, "laser", "components", NOISE_COMPONENTS, str)
    bad = set(comps) - set(NOISE_COMPONENTS)
    if bad:
        raise ConfigError(f"[laser] components: unknown noise types {sorted(bad)}")
    if set(comps) != set(NOISE_COMPONENTS):
        parts = spec.components()
        spec = LaserNoiseSpec(parts["rw"].h_minus2 if "rw" in comps and "rw" in parts else 0.0,
                              parts["flicker"].h_minus1 if "flicker" in comps and "flicker" in parts else 0.0,
                              parts["white"].h0 if "white" in comps and "white" in parts else 0.0, spec.nu0)
        name = f"{name}[{'+'.join(comps)}]"
    scale = _float(raw, "laser", "scale", 1.0)
    if scale != 1.0:
        spec = scale_noise(spec, scale)
        name = f"{name}x{scale:g}"
    return name, spec


def _resolve_t_ramsey(raw) -> tuple:
    sec = raw.get("schedule", {})
    if "t_ramsey" in sec:
        return _list(raw, "schedule", "t_ramsey", ())
    if {"t_ramsey_min", "t_ramsey_max", "t_ramsey_points"} & sec.keys():
        lo = _float(raw, "schedule", "t_ramsey_min", 0.01)
        hi = _float(raw, "schedule", "t_ramsey_max", 10.0)
        n = _int(raw, "schedule", "t_ramsey_points", 60)
        if not (0 < lo < hi) or n < 1:
            raise ConfigError("[schedule]: need 0 < t_ramsey_min < t_ramsey_max and t_ramsey_points >= 1")
        return tuple(float(t) for t in np.geomspace(lo, hi, n))
    return (1.0,)


def default_jobs() -> int:
    v = os.environ.get(JOBS_ENV)
    if not v:
        return 1
    try:
        return int(v)
    except ValueError:
        raise ConfigError(f"{JOBS_ENV} must be an integer, got {v!r}") from None


def resolve(raw: dict) -> RunConfig:
    """Turn raw strings into validated module inputs."""
    try:
        name, spec = _resolve_laser(raw)
        t_ramsey = _resolve_t_ramsey(raw)
        if not t_ramsey:
            raise ConfigError("[schedule] t_ramsey: empty list")
        t_dead = _float(raw, "schedule", "t_dead", 0.5)
        for t in t_ramsey:
            ClockSchedule(t, t_dead)

        n_atoms = _int(raw, "ensemble", "n_atoms", 1000)
        state = raw.get("ensemble", {}).get("state", "css").strip().lower()
        if state not in ("css", "sss"):
            raise ConfigError(f"[ensemble] state: expected css or sss, got {state!r}")
        mu_raw = raw.get("ensemble", {}).get("mu", "auto").strip().lower()
        if state == "css":
            mu = 0.0
        elif mu_raw == "auto":
            mu = optimal_mu(n_atoms)
        else:
            mu = _float(raw, "ensemble", "mu", 0.0)
        EnsembleSpec(n_atoms, mu)

        servo = ServoConfig(
            g=_float(raw, "servo", "g", 0.4),
            g2=_float(raw, "servo", "g2", 0.04),
            servo_kind=raw.get("servo", {}).get("servo_kind", "double_integrator").strip(),
        )
        jobs = _int(raw, "run", "jobs", default_jobs())
        if jobs == 0:
            raise ConfigError("[run] jobs: must be nonzero")
        n_cycles = _int(raw, "run", "n_cycles", 800_000)
        if n_cycles < 1000:
            raise ConfigError("[run] n_cycles: need at least 1000 cycles")
        seeds = _list(raw, "run", "seeds", (0,), int)

        presets = _list(raw, "optimize", "presets", PRESET_NAMES, str)
        bad = [p for p in presets if p not in PRESET_NAMES]
        if bad:
            raise ConfigError(f"[optimize] presets: unknown lasers {bad}")
        opt_td = _list(raw, "optimize", "t_dead", (0.1,))
        if any(not (t > 0 and math.isfinite(t)) for t in opt_td):
            raise ConfigError("[optimize] t_dead: dead times must be positive")
        t_max = _list(raw, "optimize", "t_max", ())

        fringe_n = _list(raw, "fringe", "n_atoms", (10, 100, 1000), int)
        if any(n < 1 for n in fringe_n):
            raise ConfigError("[fringe] n_atoms: atom numbers must be >= 1")
        escape = raw.get("fringe", {}).get("escape", "auto").strip().lower()
        if escape not in ("auto", "pi", "pi/2"):
            raise ConfigError(f"[fringe] escape: expected auto, pi or pi/2, got {escape!r}")

        return RunConfig(
            laser_name=name, laser=spec, t_ramsey=t_ramsey, t_dead=t_dead, n_atoms=n_atoms,
            state=state, mu=mu, servo=servo, n_cycles=n_cycles, seeds=seeds, jobs=jobs,
            optimize_presets=presets, optimize_t_dead=opt_td, optimize_t_max=t_max,
            fringe_n_atoms=fringe_n, fringe_threshold=_float(raw, "fringe", "threshold", 1e6),
            fringe_escape=escape, validate_n_cycles=_int(raw, "validate", "n_cycles", 20_000),
            validate_n_seeds=_int(raw, "validate", "n_seeds", 20), raw=raw,
        )
    except ConfigError:
        raise
    except (ClockStabError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load(path=None, overrides: dict | None = None) -> RunConfig:
    raw = read_config_file(path) if path else {}
    return resolve(apply_overrides(raw, overrides or {}))
