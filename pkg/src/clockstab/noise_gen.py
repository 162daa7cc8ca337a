"""Synthetic per-cycle laser frequency noise.

Each clock cycle is split into a Ramsey interval and a dead interval and the
generator returns the mean fractional frequency of the free-running laser in
each interval.  The three power-law components are produced independently
and summed:

* white FM: independent Gaussians with variance h0 / (2 dt);
* random-walk FM: Brownian frequency with diffusion 2 pi^2 h_-2, whose
  interval means are drawn jointly with the end-point values;
* flicker FM: a sum of damped random walks (Ornstein-Uhlenbeck processes)
  with geometrically spaced damping rates.  Equal stationary variance
  v = h_-1 ln(rate_base) per stage gives S_y(f) ~ h_-1 / f between the
  slowest and fastest rate.

Interval means of both Brownian and OU processes are sampled exactly, so the
two unequal sub-interval lengths need no finer time grid.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

from .allan import overlapping_adev
from .core import ClockSchedule
from .errors import DomainError
from .noise_model import LaserNoiseSpec, allan_from_psd

_SUBSTREAMS = ("white", "rw", "flicker")


@dataclass(frozen=True)
class FlickerGeneratorConfig:
    """Layout of the damped-random-walk bank.

    ``per_stage_amplitude`` is the standard deviation of one stage in units
    of sqrt(h_-1); sqrt(ln rate_base) reproduces the target flicker level.
    """

    n_stages: int
    rate_min: float
    rate_base: float = 2.0
    per_stage_amplitude: float | None = None

    def __post_init__(self):
        if self.n_stages < 1:
            raise DomainError("need at least one flicker stage")
        if not self.rate_base > 1:
            raise DomainError("rate_base must exceed 1")
        if self.per_stage_amplitude is None:
            object.__setattr__(self, "per_stage_amplitude", math.sqrt(math.log(self.rate_base)))

    @property
    def rates(self) -> np.ndarray:
        return self.rate_min * self.rate_base ** np.arange(self.n_stages)

    @classmethod
    def for_duration(cls, dt_min: float, total: float, rate_base: float = 2.0,
                     low_margin: float = 100.0, high_margin: float = 20.0):
        """Cover Fourier frequencies from well below 1/total to well above 1/dt_min."""
        rate_min = 1.0 / (low_margin * total)
        rate_max = 2 * math.pi * high_margin / dt_min
        n = int(math.ceil(math.log(rate_max / rate_min) / math.log(rate_base))) + 1
        return cls(n_stages=n, rate_min=rate_min, rate_base=rate_base)


@dataclass(frozen=True)
class NoiseTrace:
    """Interval-mean fractional frequencies, shape (n_cycles, 2).

    Column 0 is the Ramsey window, column 1 the dead time that follows it.
    """

    durations: tuple[float, float]
    values: np.ndarray
    seed: int | None = None
    flicker: FlickerGeneratorConfig | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.values.ndim != 2 or self.values.shape[1] != 2:
            raise DomainError("trace values must have shape (n_cycles, 2)")
        if not np.all(np.isfinite(self.values)):
            raise DomainError("trace contains non-finite values")

    @property
    def n_cycles(self) -> int:
        return self.values.shape[0]

    @property
    def ramsey(self) -> np.ndarray:
        return self.values[:, 0]

    @property
    def dead(self) -> np.ndarray:
        return self.values[:, 1]

    def cycle_means(self) -> np.ndarray:
        t_r, t_d = self.durations
        return (self.values[:, 0] * t_r + self.values[:, 1] * t_d) / (t_r + t_d)

    def __add__(self, other: "NoiseTrace") -> "NoiseTrace":
        if other.durations != self.durations:
            raise DomainError("cannot add traces with different schedules")
        return NoiseTrace(self.durations, self.values + other.values, self.seed, self.flicker)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["# seed", self.seed, "t_ramsey", self.durations[0], "t_dead", self.durations[1]])
            w.writerow(["cycle", "ramsey_mean", "dead_mean"])
            for k, (a, b) in enumerate(self.values):
                w.writerow([k, f"{a:.17e}", f"{b:.17e}"])


def _ou_interval_coeffs(rate: float, var: float, h: float):
    """Exact one-interval transition of x(t) and of its integral over h.

    Returns (a, b, var_x, var_int, cov) for
    x1 = a x0 + e_x,  int_0^h x dt = b x0 + e_i.  ``rate = 0`` is Brownian
    motion with diffusion ``var`` per unit time.
    """
    if rate == 0.0:
        return 1.0, h, var * h, var * h**3 / 3, var * h**2 / 2
    x = rate * h
    om = -math.expm1(-x)
    om2 = -math.expm1(-2 * x)
    if x < 1e-3:
        f = x**3 / 3 - x**4 / 4 + 7 * x**5 / 60
    else:
        f = x - 2 * om + om2 / 2
    return math.exp(-x), om / rate, var * om2, 2 * var * f / rate**2, var * om**2 / rate


def _correlated_pair(rng, n, var_x, var_i, cov):
    z = rng.standard_normal((n, 2))
    sx = math.sqrt(var_x)
    l21 = cov / sx
    l22 = math.sqrt(max(var_i - l21 * l21, 0.0))
    return sx * z[:, 0], l21 * z[:, 0] + l22 * z[:, 1]


def _linear_process_means(rate, var, durations, n, rng, return_states=False):
    """Interval means of an OU (rate > 0, stationary variance ``var``) or
    Brownian (rate = 0, diffusion ``var``) process over alternating intervals."""
    t_r, t_d = durations
    a_r, b_r, vx_r, vi_r, c_r = _ou_interval_coeffs(rate, var, t_r)
    ex_r, ei_r = _correlated_pair(rng, n, vx_r, vi_r, c_r)
    if t_d > 0:
        a_d, b_d, vx_d, vi_d, c_d = _ou_interval_coeffs(rate, var, t_d)
        ex_d, ei_d = _correlated_pair(rng, n, vx_d, vi_d, c_d)
    else:
        a_d, b_d, ex_d, ei_d = 1.0, 0.0, np.zeros(n), np.zeros(n)

    x0 = rng.standard_normal() * math.sqrt(var) if rate > 0 else 0.0
    # state at the start of each cycle: x_{k+1} = a_d (a_r x_k + ex_r) + ex_d
    phi = a_r * a_d
    drive = a_d * ex_r + ex_d
    after, _ = lfilter([1.0], [1.0, -phi], drive, zi=[phi * x0])
    starts = np.empty(n)
    starts[0] = x0
    starts[1:] = after[:-1]
    mid = a_r * starts + ex_r
    out = np.empty((n, 2))
    out[:, 0] = (b_r * starts + ei_r) / t_r
    out[:, 1] = (b_d * mid + ei_d) / t_d if t_d > 0 else 0.0
    if return_states:
        return out, np.concatenate([starts, after[-1:]])
    return out


def _component_streams(seed):
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return dict(zip(_SUBSTREAMS, ss.spawn(len(_SUBSTREAMS))))


def generate_components(spec: LaserNoiseSpec, schedule: ClockSchedule, n_cycles: int, seed=None,
                        flicker: FlickerGeneratorConfig | None = None) -> dict[str, np.ndarray]:
    """The three noise components separately, each of shape (n_cycles, 2)."""
    if n_cycles < 1:
        raise DomainError("n_cycles must be >= 1")
    if schedule.t_dead <= 0:
        raise DomainError("dead-time sub-interval has zero duration")
    durations = (schedule.t_ramsey, schedule.t_dead)
    streams = _component_streams(seed)
    out = {}

    rng = np.random.default_rng(streams["white"])
    z = rng.standard_normal((n_cycles, 2))
    out["white"] = z * np.sqrt(spec.h0 / (2 * np.asarray(durations)))

    rng = np.random.default_rng(streams["rw"])
    rw = _linear_process_means(0.0, 1.0, durations, n_cycles, rng)
    out["rw"] = rw * math.sqrt(2 * math.pi**2 * spec.h_minus2)

    if flicker is None:
        flicker = FlickerGeneratorConfig.for_duration(min(durations), n_cycles * schedule.t_cycle)
    stage_seeds = streams["flicker"].spawn(flicker.n_stages)
    acc = np.zeros((n_cycles, 2))
    for rate, ss in zip(flicker.rates, stage_seeds):
        acc += _linear_process_means(float(rate), 1.0, durations, n_cycles, np.random.default_rng(ss))
    out["flicker"] = acc * flicker.per_stage_amplitude * math.sqrt(spec.h_minus1)
    return out


def generate_trace(spec: LaserNoiseSpec, schedule: ClockSchedule, n_cycles: int, seed=None,
                   flicker: FlickerGeneratorConfig | None = None) -> NoiseTrace:
    """Free-running laser noise for ``n_cycles`` cycles; deterministic in ``seed``."""
    if flicker is None and schedule.t_dead > 0:
        flicker = FlickerGeneratorConfig.for_duration(schedule.t_dead if schedule.t_dead < schedule.t_ramsey
                                                      else schedule.t_ramsey, n_cycles * schedule.t_cycle)
    comps = generate_components(spec, schedule, n_cycles, seed, flicker)
    values = comps["white"] + comps["rw"] + comps["flicker"]
    return NoiseTrace((schedule.t_ramsey, schedule.t_dead), values,
                      seed if isinstance(seed, (int, np.integer)) else None, flicker)


@dataclass(frozen=True)
class GeneratorReport:
    taus: np.ndarray
    target: np.ndarray
    estimated: np.ndarray
    rel_error: np.ndarray
    max_rel_error: float
    slope: float
    flicker: FlickerGeneratorConfig


def validate_generator(spec: LaserNoiseSpec, schedule: ClockSchedule, n_cycles: int, n_seeds: int = 20,
                       taus_cycles=None, seed: int = 0) -> GeneratorReport:
    """Compare the ensemble ADEV of generated traces with :func:`allan_from_psd`.

    The ensemble estimate is the square root of the seed-averaged Allan
    variance of the full-cycle means; ``slope`` is the log-log slope of the
    estimate over the tau grid.
    """
    if n_seeds < 10:
        raise DomainError("validation needs at least 10 seeds")
    if taus_cycles is None:
        top = max(1, n_cycles // 10)
        taus_cycles = np.unique(np.geomspace(1, top, 12).astype(int))
    taus_cycles = np.asarray(taus_cycles, dtype=int)
    t_c = schedule.t_cycle
    children = np.random.SeedSequence(seed).spawn(n_seeds)
    acc = np.zeros(len(taus_cycles))
    flicker = None
    for ss in children:
        tr = generate_trace(spec, schedule, n_cycles, ss)
        flicker = tr.flicker
        series = overlapping_adev(tr.cycle_means(), t_c, taus_cycles * t_c)
        acc += series.adev**2
    est = np.sqrt(acc / n_seeds)
    taus = taus_cycles * t_c
    target = np.asarray(allan_from_psd(spec, taus))
    rel = est / target - 1
    slope = float(np.polyfit(np.log(taus), np.log(est), 1)[0]) if len(taus) > 1 else float("nan")
    return GeneratorReport(taus, target, est, rel, float(np.max(np.abs(rel))), slope, flicker)
