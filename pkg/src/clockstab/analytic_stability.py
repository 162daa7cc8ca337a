"""Closed-form instability budget of a Ramsey clock at tau = 1 s.

Three contributions are combined in quadrature: quantum projection noise,
the Dick effect (aliased laser noise during dead time) and the coherence
time limit (CTL), the cubic-order phase-diffusion term of the perturbative
servo-loop solution.  Headline numbers are the prefactor of the asymptotic
1/sqrt(tau) behaviour.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .core import ClockSchedule, ServoConfig
from .errors import ConvergenceError, DomainError
from .noise_model import LaserNoiseSpec, NoiseExponent, coherence_time
from .spin_states import EnsembleSpec, SpinMoments, oat_moments

__all__ = [
    "ClockSchedule",
    "StabilityBudget",
    "sigma_qpn",
    "sigma_dick",
    "dick_sum_bruteforce",
    "v_phi",
    "v_phi_components",
    "ctl_terms",
    "budget",
    "budget_sweep",
]

DICK_RTOL = 1e-6
DICK_MAX_TERMS = 1 << 27


@dataclass(frozen=True)
class StabilityBudget:
    t_ramsey: float
    sigma_qpn: float
    sigma_dick: float
    sigma_ctl: float
    sigma_total: float
    v_phi: float
    v0: float
    v1: float
    c: float

    def as_row(self) -> dict:
        return {
            "T_R": self.t_ramsey,
            "sigma_qpn": self.sigma_qpn,
            "sigma_dick": self.sigma_dick,
            "sigma_ctl": self.sigma_ctl,
            "sigma_total": self.sigma_total,
        }


def _check_tau(tau):
    if not tau > 0:
        raise DomainError(f"tau must be positive, got {tau}")


def sigma_qpn(moments: SpinMoments, schedule: ClockSchedule, nu0: float, tau: float = 1.0) -> float:
    """Projection-noise-limited Allan deviation of an ideal servo."""
    _check_tau(tau)
    return (
        math.sqrt(schedule.t_cycle / tau)
        * moments.xi
        / math.sqrt(moments.n_atoms)
        / (2 * math.pi * nu0 * schedule.t_ramsey)
    )


def _dick_terms(h, t_cycle, duty, k):
    f = k / t_cycle
    psd = h[0] / f**2 + h[1] / f + h[2]
    return psd * np.sin(np.pi * k * duty) ** 2 / (np.pi * k) ** 2


def dick_sum_bruteforce(spec: LaserNoiseSpec, schedule: ClockSchedule, k_max: int,
                        chunk: int = 1 << 20) -> float:
    """Sum_{k<=k_max} S(k/T_C) sin^2(pi k d)/(pi k)^2 term by term.

    Chunks are summed pairwise by numpy and combined with ``math.fsum``.
    """
    if k_max < 1:
        raise DomainError("k_max must be >= 1")
    h = spec.coefficients
    parts = []
    for start in range(1, k_max + 1, chunk):
        k = np.arange(start, min(start + chunk, k_max + 1), dtype=float)
        parts.append(float(np.sum(_dick_terms(h, schedule.t_cycle, schedule.duty, k))))
    return math.fsum(parts)


def _dick_sum_adaptive(spec: LaserNoiseSpec, schedule: ClockSchedule) -> float:
    # White part in closed form: sum sin^2(pi k d)/(pi k)^2 = d(1-d)/2.
    d = schedule.duty
    white = spec.h0 * d * (1 - d) / 2
    if spec.h_minus2 == 0 and spec.h_minus1 == 0:
        return white

    t_c = schedule.t_cycle
    coloured = (spec.h_minus2, spec.h_minus1, 0.0)
    sin_d = math.sin(math.pi * min(d, 1 - d))
    parts, k_lo, k_hi = [], 1, 4096
    while True:
        k = np.arange(k_lo, k_hi + 1, dtype=float)
        parts.append(float(np.sum(_dick_terms(coloured, t_c, d, k))))
        big_k = k_hi + 0.5
        # tail with sin^2 replaced by its mean 1/2, integrated from K + 1/2
        tail = (coloured[0] * t_c**2 / (3 * big_k**3) + coloured[1] * t_c / (2 * big_k**2)) / (2 * math.pi**2)
        total = white + math.fsum(parts) + tail
        # error of that replacement: Abel summation bounds the cos(2 pi k d)
        # part by a_K / (2 sin(pi d)); the integral step adds at most a_K / 2
        f_end = k_hi / t_c
        a_k = (coloured[0] / f_end**2 + coloured[1] / f_end) / (math.pi * k_hi) ** 2
        err = a_k * (0.5 / sin_d + 0.5) if sin_d > 0 else math.inf
        if err <= 0.1 * DICK_RTOL * total:
            return total
        if k_hi >= DICK_MAX_TERMS:
            raise ConvergenceError(f"Dick sum not converged with {DICK_MAX_TERMS} terms (duty {d:.3g})")
        # grow geometrically, but never hold more than 2^20 terms at once
        k_lo, k_hi = k_hi + 1, min(k_hi + min(3 * k_hi, 1 << 20), DICK_MAX_TERMS)


def sigma_dick(spec: LaserNoiseSpec, schedule: ClockSchedule, tau: float = 1.0,
               k_max: int | None = None) -> float:
    """Dick-effect Allan deviation for Ramsey interrogation with short pulses.

    With ``k_max=None`` the white-FM part is summed in closed form and the
    coloured part is truncated adaptively to 1e-6 relative accuracy; an
    explicit ``k_max`` sums every term directly up to that index.
    """
    _check_tau(tau)
    if schedule.t_dead == 0:
        return 0.0
    if k_max is None:
        s = _dick_sum_adaptive(spec, schedule)
    else:
        s = dick_sum_bruteforce(spec, schedule, int(k_max))
    return math.sqrt(s / tau) * schedule.t_cycle / schedule.t_ramsey


@lru_cache(maxsize=256)
def _component_coherence_times(spec: LaserNoiseSpec) -> tuple:
    return tuple((name, coherence_time(sub)) for name, sub in spec.components().items())


def v_phi_components(spec: LaserNoiseSpec, t_ramsey: float) -> dict[str, float]:
    """Per-noise-type laser phase variance chi (T_R/Z_type)^(2+gamma), rad^2.

    Z_type is the coherence time of the single-type sub-spectrum.
    """
    if not t_ramsey > 0:
        raise DomainError("Ramsey time must be positive")
    out = {}
    for name, z in _component_coherence_times(spec):
        ex = NoiseExponent.for_type(name)
        out[name] = ex.chi * (t_ramsey / z) ** (2 + ex.gamma)
    return out


def v_phi(spec: LaserNoiseSpec, t_ramsey: float) -> float:
    """Total laser phase variance per Ramsey period; independent types add."""
    return math.fsum(v_phi_components(spec, t_ramsey).values())


def ctl_terms(moments: SpinMoments, v_phi: float, g: float) -> tuple[float, float, float]:
    """Return (V0, V1, c) of the measurement-plus-diffusion variance.

    V0 carries every term containing a spin variance (it reduces to xi^2/N
    for short Ramsey times); V1 is the N-independent cubic term.
    """
    if v_phi < 0:
        raise DomainError("V_phi must be >= 0")
    if not 0 < g < 2:
        raise DomainError("gain must lie in (0, 2)")
    c = g * moments.mean_sx / moments.n_atoms
    vy, vx = moments.var_sy_rel, moments.var_sx_rel
    v0 = vy + vx * v_phi + 3 * (1 - c) ** 2 / 8 * vy * v_phi**2
    v1 = (1 / 6 - c / 2 + 4 * c**2 / 9) * v_phi**3
    return v0, v1, c


def budget(spec: LaserNoiseSpec, schedule: ClockSchedule, ensemble: EnsembleSpec | SpinMoments,
           servo: ServoConfig = ServoConfig(), tau: float = 1.0) -> StabilityBudget:
    """Full budget sigma_total = sqrt(qpn^2 + dick^2 + ctl^2) at one operating point."""
    _check_tau(tau)
    moments = ensemble if isinstance(ensemble, SpinMoments) else oat_moments(ensemble)
    vphi = v_phi(spec, schedule.t_ramsey)
    v0, v1, c = ctl_terms(moments, vphi, servo.g)
    scale = schedule.t_cycle / tau / (2 * math.pi * spec.nu0 * schedule.t_ramsey) ** 2
    q2, c2 = v0 * scale, v1 * scale
    dick = sigma_dick(spec, schedule, tau)
    return StabilityBudget(
        t_ramsey=schedule.t_ramsey,
        sigma_qpn=math.sqrt(q2),
        sigma_dick=dick,
        sigma_ctl=math.sqrt(c2),
        sigma_total=math.sqrt(q2 + dick**2 + c2),
        v_phi=vphi,
        v0=v0,
        v1=v1,
        c=c,
    )


def budget_sweep(spec, t_dead, ensemble, servo=ServoConfig(), t_ramsey_grid=None, tau=1.0):
    """Budgets over a Ramsey-time grid (default: 60 log-spaced points, 10 ms to 2Z)."""
    if t_ramsey_grid is None:
        z = coherence_time(spec)
        t_ramsey_grid = np.logspace(-2, math.log10(2 * z), 60)
    moments = ensemble if isinstance(ensemble, SpinMoments) else oat_moments(ensemble)
    return [budget(spec, ClockSchedule(float(t), t_dead), moments, servo, tau) for t in t_ramsey_grid]
