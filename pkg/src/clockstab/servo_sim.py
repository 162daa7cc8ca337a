"""Monte-Carlo simulation of the closed clock servo loop.

Per cycle k the loop

1. accumulates the differential phase phi_k = 2 pi nu0 T_R (y_k - p_{k-1})
   from the Ramsey-window mean y_k of the free-running laser,
2. draws a projective measurement of the atoms,
3. forms the linear estimate phi_hat = M / kappa (slope of the fringe at 0),
4. updates the frequency correction with a single or double integrator.

The stabilised frequency of a cycle is the time average of laser minus
correction over Ramsey and dead interval.  The correction is updated at the
end of the Ramsey window, so the dead interval already sees p_k.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .allan import AllanSeries, default_fit_window, fit_prefactor, overlapping_adev
from .core import ClockSchedule, ServoConfig
from .errors import DomainError, NumericFault
from .noise_gen import NoiseTrace, generate_trace
from .noise_model import LaserNoiseSpec
from .spin_states import EnsembleSpec, SpinMoments, oat_moments

GAUSSIAN_MIN_ATOMS = 20


@dataclass
class LoopState:
    correction: float = 0.0
    integral_estimate: float = 0.0
    cycle_index: int = 0


@dataclass
class SimRunResult:
    stabilized_freq_trace: np.ndarray
    hop_count: int
    prefactor_sigma1s: float
    seed: int | None
    phases: np.ndarray = field(repr=False)
    allan: AllanSeries | None = field(default=None, repr=False)
    hop_storm: bool = False
    final_state: LoopState | None = None

    @property
    def n_cycles(self) -> int:
        return self.stabilized_freq_trace.size


def _sampler(ensemble: EnsembleSpec, moments: SpinMoments, rng, noiseless=False):
    """Return f(phi) -> normalised signal in [-1, 1] for this ensemble."""
    n = ensemble.n_atoms
    kappa = moments.contrast
    sin, cos = math.sin, math.cos
    if noiseless:
        return lambda phi: kappa * sin(phi)
    if not ensemble.is_squeezed:
        binomial = rng.binomial

        def css(phi):
            return (2 * binomial(n, 0.5 * (1 + sin(phi))) - n) / n

        return css
    if n < GAUSSIAN_MIN_ATOMS:
        raise DomainError(f"Gaussian measurement model needs N >= {GAUSSIAN_MIN_ATOMS}, got {n}")
    dx = math.sqrt(moments.var_sx_rel)
    dy = math.sqrt(moments.var_sy_rel)
    normal = rng.standard_normal

    def sss(phi):
        z1, z2 = normal(2)
        m = kappa * ((1 + dx * z1) * sin(phi) + dy * z2 * cos(phi))
        return min(1.0, max(-1.0, m))

    return sss


def sample_measurement(ensemble: EnsembleSpec, moments: SpinMoments, phi: float, rng) -> float:
    """One normalised Ramsey measurement at differential phase phi.

    Coherent states: (2k - N)/N with k ~ Binomial(N, (1 + sin phi)/2).
    Squeezed states (N >= 20): Gaussian model
    kappa [(1 + dS_x/<S_x> z1) sin phi + dS_y/<S_x> z2 cos phi], clipped to [-1, 1].
    """
    return _sampler(ensemble, moments, rng)(phi)


def detect_fringe_hops(phase_history) -> int:
    """Count excursions |phi| > pi; an episode ends once |phi| < pi/2 again."""
    phi = np.abs(np.asarray(phase_history, dtype=float))
    over = phi > math.pi
    under = phi < math.pi / 2
    events = np.flatnonzero(over | under)
    hops, armed = 0, True
    for i in events:
        if armed and over[i]:
            hops += 1
            armed = False
        elif not armed and under[i]:
            armed = True
    return hops


def inject_drift(trace: NoiseTrace, rate: float) -> NoiseTrace:
    """Add a linear fractional-frequency ramp ``rate`` (1/s) to a trace."""
    t_r, t_d = trace.durations
    start = np.arange(trace.n_cycles) * (t_r + t_d)
    ramp = np.column_stack([start + t_r / 2, start + t_r + t_d / 2]) * rate
    return NoiseTrace(trace.durations, trace.values + ramp, trace.seed, trace.flicker)


def run_loop(spec: LaserNoiseSpec | None, schedule: ClockSchedule, ensemble: EnsembleSpec,
             servo: ServoConfig = ServoConfig(), n_cycles: int = 800_000, seed: int | None = 0, *,
             trace: NoiseTrace | None = None, noiseless: bool = False, drift: float = 0.0,
             fit_window: tuple[float, float] | None = None, nu0: float | None = None) -> SimRunResult:
    """Simulate ``n_cycles`` of the locked clock.

    ``spec=None`` runs with a noise-free laser; a precomputed ``trace`` can be
    supplied instead of generating one.  ``noiseless`` replaces the atomic
    measurement by its expectation value.  The result is a deterministic
    function of the arguments and ``seed``.
    """
    if n_cycles < 1000:
        raise DomainError("need at least 1000 cycles")
    ss = np.random.SeedSequence(seed)
    noise_ss, meas_ss = ss.spawn(2)
    if nu0 is None:
        nu0 = spec.nu0 if spec is not None else 429.228e12

    if trace is None:
        if spec is None:
            trace_vals = np.zeros((n_cycles, 2))
            trace = NoiseTrace((schedule.t_ramsey, schedule.t_dead), trace_vals, seed)
        else:
            trace = generate_trace(spec, schedule, n_cycles, noise_ss)
    elif trace.n_cycles < n_cycles:
        raise DomainError("supplied trace is shorter than n_cycles")
    if drift:
        trace = inject_drift(trace, drift)

    moments = oat_moments(ensemble)
    measure = _sampler(ensemble, moments, np.random.default_rng(meas_ss), noiseless)
    kappa = moments.contrast

    t_r, t_d = schedule.t_ramsey, schedule.t_dead
    t_c = schedule.t_cycle
    omega_t = 2 * math.pi * nu0 * t_r
    g, g2 = servo.g, servo.g2 if servo.servo_kind == "double_integrator" else 0.0
    y_r = trace.ramsey[:n_cycles].tolist()
    y_d = trace.dead[:n_cycles].tolist()

    stab = [0.0] * n_cycles
    phases = [0.0] * n_cycles
    p = 0.0
    acc = 0.0
    for k in range(n_cycles):
        delta = y_r[k] - p
        phi = omega_t * delta
        phases[k] = phi
        est = measure(phi) / kappa
        acc += est
        p = p + (g * est + g2 * acc) / omega_t
        stab[k] = (delta * t_r + (y_d[k] - p) * t_d) / t_c

    stab = np.asarray(stab)
    phases = np.asarray(phases)
    if not np.all(np.isfinite(stab)):
        raise NumericFault("non-finite value in stabilised trace")

    hops = detect_fringe_hops(phases)
    storm = hops > n_cycles / 10
    if storm:
        warnings.warn(f"hop storm: {hops} fringe hops in {n_cycles} cycles", stacklevel=2)

    if fit_window is None:
        lo, hi = default_fit_window(n_cycles, t_c)
        fit_window = (min(lo, hi / 8), hi)
    # 12 log-spaced averaging times across the window (the default grid of fit_taus)
    ms = np.unique(np.rint(np.geomspace(fit_window[0], fit_window[1], 12) / t_c).astype(np.int64))
    taus = ms[ms * 3 <= n_cycles] * t_c
    series = overlapping_adev(stab, t_c, taus)
    prefactor = fit_prefactor(series, fit_window)
    state = LoopState(correction=p, integral_estimate=acc, cycle_index=n_cycles)
    return SimRunResult(stab, hops, prefactor, seed, phases, series, storm, state)
