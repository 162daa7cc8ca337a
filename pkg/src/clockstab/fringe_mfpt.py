"""Fringe-hop onset from the mean first passage time of the locked phase.

The stabilised Ramsey phase is modelled as a diffusion in cycle units,

    dphi = -q sin(phi) dk + sqrt(B(phi)) dW_k,   B(phi) = r + s cos^2(phi),

and a fringe hop is its escape from (-a, a).  With

    psi(x) = exp(int_0^x 2A/B),

the mean escape time from phi = 0 is

    T = 2 int_0^a dx / psi(x) int_0^x psi(y) / B(y) dy

(the symmetric form of the double integral over (-a, a)).  T easily
exceeds the double range, so everything is computed as log T.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .analytic_stability import v_phi, v_phi_components
from .core import ClockSchedule, ServoConfig
from .errors import ConvergenceError, DomainError
from .noise_model import LaserNoiseSpec, coherence_time
from .spin_states import EnsembleSpec, SpinMoments, oat_moments

DEFAULT_THRESHOLD = 1e6
LOW_CONFIDENCE_ATOMS = 3
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)


@dataclass(frozen=True)
class MfptParams:
    """Drift, diffusion and escape interval, in rad and cycles."""

    q: float
    r: float
    s: float
    a: float = math.pi

    def __post_init__(self):
        for name in ("q", "r", "s", "a"):
            if not math.isfinite(getattr(self, name)):
                raise DomainError(f"{name} must be finite")
        if not self.r > 0:
            raise DomainError(f"diffusion floor r must be > 0, got {self.r}")
        if not self.r + min(self.s, 0.0) > 0:
            raise DomainError("B(phi) = r + s cos^2 phi must stay positive")
        if not 0 < self.a <= math.pi:
            raise DomainError(f"escape half-width must lie in (0, pi], got {self.a}")

    def diffusion(self, x):
        return self.r + self.s * np.cos(x) ** 2


def _arctan_ratio(w):
    """arctan(sqrt(w))/sqrt(w), continued to w < 0 as artanh(sqrt(-w))/sqrt(-w)."""
    w = np.asarray(w, dtype=float)
    out = np.empty_like(w)
    small = np.abs(w) < 1e-4
    ws = w[small]
    out[small] = 1 - ws / 3 + ws**2 / 5 - ws**3 / 7
    pos = (w > 0) & ~small
    rp = np.sqrt(w[pos])
    out[pos] = np.arctan(rp) / rp
    neg = (w < 0) & ~small
    rn = np.sqrt(-w[neg])
    out[neg] = np.arctanh(rn) / rn
    return out


def log_psi(x, params: MfptParams):
    """log psi(x) = (2q/r) [cos x G(e cos^2 x) - G(e)], e = s/r, G(w) = arctan(sqrt w)/sqrt w."""
    x = np.asarray(x, dtype=float)
    e = params.s / params.r
    c = np.cos(x)
    val = 2 * params.q / params.r * (c * _arctan_ratio(e * c * c) - _arctan_ratio(np.array(e)))
    return val if val.ndim else float(val)


def psi(x, params: MfptParams):
    """Potential factor psi(x) = exp(int_0^x 2A/B); psi(0) = 1 and psi is even."""
    return np.exp(log_psi(x, params))


def _log_mfpt_panels(params: MfptParams, n_panels: int) -> float:
    t, w = _GL_NODES, _GL_WEIGHTS
    edges = np.linspace(0.0, params.a, n_panels + 1)
    left, h = edges[:-1], np.diff(edges)

    # outer nodes, shape (P, n)
    x = left[:, None] + h[:, None] * (t + 1) / 2

    def inner_integrand(y):
        return np.exp(log_psi(y, params)) / params.diffusion(y)

    full = (inner_integrand(x) * w).sum(axis=1) * h / 2
    before = np.concatenate([[0.0], np.cumsum(full)[:-1]])
    # partial panel from left edge to each outer node, shape (P, n, n)
    span = x - left[:, None]
    y = left[:, None, None] + span[:, :, None] * (t + 1) / 2
    partial = (inner_integrand(y) * w).sum(axis=2) * span / 2
    inner = before[:, None] + partial

    with np.errstate(divide="ignore"):
        terms = -log_psi(x, params) + np.log(inner) + np.log(w * h[:, None] / 2)
    return math.log(2.0) + float(logsumexp(terms))


def log_mfpt(params: MfptParams, rtol: float = 1e-8, max_panels: int = 4096) -> float:
    """Natural log of the mean escape time in cycles.

    Composite 16-point Gauss-Legendre panels with the inner integral
    accumulated panel by panel; the panel count doubles until log T changes
    by less than ``rtol`` (a relative tolerance on T itself).
    """
    n = 4
    prev = _log_mfpt_panels(params, n)
    while n < max_panels:
        n *= 2
        cur = _log_mfpt_panels(params, n)
        if abs(cur - prev) < rtol:
            return cur
        prev = cur
    raise ConvergenceError(f"escape-time quadrature not converged with {max_panels} panels")


def mfpt(params: MfptParams, rtol: float = 1e-8) -> float:
    """Mean first escape time from (-a, a) starting at 0, in cycles (may be inf)."""
    lt = log_mfpt(params, rtol)
    return math.exp(lt) if lt < 709 else math.inf


def dominant_noise_type(spec: LaserNoiseSpec, t_ramsey: float) -> str:
    comps = v_phi_components(spec, t_ramsey)
    return max(comps, key=comps.get)


def default_escape_half_width(spec: LaserNoiseSpec) -> float:
    """pi, or pi/2 when random-walk FM dominates the phase variance at T_R = Z."""
    return math.pi / 2 if dominant_noise_type(spec, coherence_time(spec)) == "rw" else math.pi


def mfpt_params(spec: LaserNoiseSpec, schedule: ClockSchedule, ensemble: EnsembleSpec | SpinMoments,
                servo: ServoConfig = ServoConfig(), a: float | None = None) -> MfptParams:
    """q = g kappa, r = V_phi + g^2 kappa^2 var_x, s = g^2 kappa^2 (var_y - var_x)."""
    moments = ensemble if isinstance(ensemble, SpinMoments) else oat_moments(ensemble)
    kappa = moments.contrast
    gk2 = (servo.g * kappa) ** 2
    if a is None:
        a = default_escape_half_width(spec)
    return MfptParams(
        q=servo.g * kappa,
        r=v_phi(spec, schedule.t_ramsey) + gk2 * moments.var_sx_rel,
        s=gk2 * (moments.var_sy_rel - moments.var_sx_rel),
        a=a,
    )


def guide_flicker(n_atoms, z: float):
    """Empirical safe Ramsey time (0.4 - 0.15 N^(-1/3)) Z for flicker-dominated noise."""
    return (0.4 - 0.15 * np.asarray(n_atoms, dtype=float) ** (-1 / 3)) * z


def guide_rw(n_atoms, z: float):
    """Empirical safe Ramsey time (0.4 - 0.25 N^(-1/3)) Z for random-walk noise."""
    return (0.4 - 0.25 * np.asarray(n_atoms, dtype=float) ** (-1 / 3)) * z


@dataclass(frozen=True)
class FringeHopResult:
    t_fringe_hop: float
    z: float
    n_atoms: int
    escape_half_width: float
    log_mfpt_at_onset: float
    degenerate: bool = False
    low_confidence: bool = False

    @property
    def ratio_to_z(self) -> float:
        return self.t_fringe_hop / self.z


def t_fringe_hop(spec: LaserNoiseSpec, ensemble: EnsembleSpec, servo: ServoConfig = ServoConfig(),
                 threshold_cycles: float = DEFAULT_THRESHOLD, a: float | None = None,
                 resolution: float = 1e-3) -> FringeHopResult:
    """Largest T_R in (0, 2Z] whose mean escape time still reaches ``threshold_cycles``.

    Bisection on log T_mfpt(T_R) - log(threshold) to ``resolution`` Z.  If
    even T_R = resolution Z escapes too fast the result is flagged
    ``degenerate``; if 2Z is still safe, 2Z is returned.
    """
    if not threshold_cycles > 1:
        raise DomainError("threshold must exceed one cycle")
    z = coherence_time(spec)
    moments = oat_moments(ensemble)
    if a is None:
        a = default_escape_half_width(spec)
    log_thr = math.log(threshold_cycles)

    def excess(t):
        return log_mfpt(mfpt_params(spec, ClockSchedule(t), moments, servo, a)) - log_thr

    low_conf = ensemble.n_atoms <= LOW_CONFIDENCE_ATOMS
    lo, hi = resolution * z, 2 * z
    e_hi = excess(hi)
    if e_hi >= 0:
        return FringeHopResult(hi, z, ensemble.n_atoms, a, e_hi + log_thr, False, low_conf)
    # bisect from the top so the badly conditioned small-T_R end is only
    # evaluated when nothing larger is safe
    e_lo = None
    while hi - lo > resolution * z:
        mid = 0.5 * (lo + hi)
        e = excess(mid)
        if e >= 0:
            lo, e_lo = mid, e
        else:
            hi = mid
    if e_lo is None:
        e_lo = excess(lo)
        if e_lo < 0:
            return FringeHopResult(lo, z, ensemble.n_atoms, a, e_lo + log_thr, True, True)
    return FringeHopResult(lo, z, ensemble.n_atoms, a, e_lo + log_thr, False, low_conf)


def escape_time_monte_carlo(params: MfptParams, n_walks: int, seed=None, max_steps: int = 10**7) -> float:
    """Mean escape time of the discretely sampled diffusion, for q = 0 and s = 0.

    Steps are Gaussian with variance r; a Brownian-bridge crossing test
    between samples removes the discretisation bias, so the estimate targets
    the continuous process.
    """
    if params.q != 0 or params.s != 0:
        raise DomainError("Monte-Carlo oracle covers free diffusion only (q = s = 0)")
    rng = np.random.default_rng(seed)
    a, r = params.a, params.r
    x = np.zeros(n_walks)
    alive = np.ones(n_walks, dtype=bool)
    times = np.zeros(n_walks)
    sd = math.sqrt(r)
    for k in range(1, max_steps + 1):
        idx = np.flatnonzero(alive)
        if idx.size == 0:
            break
        x0 = x[idx]
        x1 = x0 + sd * rng.standard_normal(idx.size)
        inside = np.abs(x1) < a
        p_up = np.where(inside, np.exp(-2 * (a - x0) * (a - x1) / r), 1.0)
        p_dn = np.where(inside, np.exp(-2 * (a + x0) * (a + x1) / r), 1.0)
        crossed = rng.random(idx.size) < 1 - (1 - p_up) * (1 - p_dn)
        gone = idx[crossed]
        times[gone] = k - 0.5
        alive[gone] = False
        x[idx] = x1
    if alive.any():
        raise ConvergenceError("some walks did not escape within max_steps")
    return float(times.mean())
