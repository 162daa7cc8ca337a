"""Power-law description of free-running clock-laser noise.

The fractional-frequency noise of the local oscillator is modelled by the
single-sided power spectral density

    S_y(f) = h_-2 f^-2 + h_-1 f^-1 + h_0

(random-walk FM, flicker FM and white FM).  The three terms map onto the
usual Allan-deviation contributions

    sigma^2(tau) = h_0 / (2 tau) + 2 ln2 h_-1 + (2 pi^2 / 3) h_-2 tau.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import brentq

from .errors import ConvergenceError, DomainError

#: 87Sr clock transition frequency in Hz.
NU0_SR = 429.228e12

LN2 = math.log(2.0)
_RW_FACTOR = 2.0 * math.pi**2 / 3.0

#: Reference h-set of the record laboratory laser (h_-2 [Hz], h_-1, h_0 [1/Hz]).
CL_H_COEFFICIENTS = (2.4e-37, 1.7e-33, 1.3e-33)

#: Tabulated (sigma_W, sigma_FF, sigma_RW, Z[s]) for the four reference lasers.
TABLE_LASERS = {
    "tL": (5.2e-17, 1.0e-16, 2.6e-18, 3.6),
    "cL": (2.5e-17, 4.9e-17, 1.3e-18, 7.5),
    "pL1": (5.2e-18, 1.0e-17, 2.6e-19, 36.5),
    "pL2": (1.6e-18, 3.0e-18, 7.8e-20, 118.8),
}
PRESET_NAMES = tuple(TABLE_LASERS)


@dataclass(frozen=True)
class LaserNoiseSpec:
    """Three-term power-law PSD of the free-running laser."""

    h_minus2: float = 0.0
    h_minus1: float = 0.0
    h0: float = 0.0
    nu0: float = NU0_SR

    def __post_init__(self):
        hs = (self.h_minus2, self.h_minus1, self.h0)
        if any(not math.isfinite(h) or h < 0 for h in hs):
            raise DomainError(f"h coefficients must be finite and >= 0, got {hs}")
        if not any(h > 0 for h in hs):
            raise DomainError("at least one h coefficient must be positive")
        if not (math.isfinite(self.nu0) and self.nu0 > 0):
            raise DomainError(f"nu0 must be positive, got {self.nu0}")

    @property
    def coefficients(self) -> tuple[float, float, float]:
        return (self.h_minus2, self.h_minus1, self.h0)

    def components(self) -> dict[str, "LaserNoiseSpec"]:
        """Split into single-type sub-spectra keyed 'white', 'flicker', 'rw'."""
        out = {}
        if self.h0 > 0:
            out["white"] = LaserNoiseSpec(h0=self.h0, nu0=self.nu0)
        if self.h_minus1 > 0:
            out["flicker"] = LaserNoiseSpec(h_minus1=self.h_minus1, nu0=self.nu0)
        if self.h_minus2 > 0:
            out["rw"] = LaserNoiseSpec(h_minus2=self.h_minus2, nu0=self.nu0)
        return out


@dataclass(frozen=True)
class AllanCoefficients:
    """Allan-deviation contributions at tau = 1 s."""

    sigma_w: float = 0.0
    sigma_ff: float = 0.0
    sigma_rw: float = 0.0

    def __post_init__(self):
        vals = (self.sigma_w, self.sigma_ff, self.sigma_rw)
        if any(not math.isfinite(v) or v < 0 for v in vals):
            raise DomainError(f"Allan coefficients must be >= 0, got {vals}")


@dataclass(frozen=True)
class NoiseExponent:
    """Index gamma of sigma_LO^2(tau) ~ tau^gamma and its V_phi prefactor."""

    gamma: int

    def __post_init__(self):
        if self.gamma not in _CHI:
            raise DomainError(f"gamma must be one of -1, 0, 1, got {self.gamma}")

    @property
    def chi(self) -> float:
        return _CHI[self.gamma]

    @classmethod
    def for_type(cls, noise_type: str) -> "NoiseExponent":
        return cls(_GAMMA_OF_TYPE[noise_type])


_CHI = {-1: 1.0, 0: 1.7, 1: 2.0}
_GAMMA_OF_TYPE = {"white": -1, "flicker": 0, "rw": 1}


def psd_eval(spec: LaserNoiseSpec, f):
    """Single-sided fractional-frequency PSD in 1/Hz at Fourier frequency f."""
    f_arr = np.asarray(f, dtype=float)
    if np.any(f_arr <= 0):
        raise DomainError("PSD is only defined for f > 0")
    out = spec.h_minus2 / f_arr**2 + spec.h_minus1 / f_arr + spec.h0
    return float(out) if out.ndim == 0 else out


def allan_from_psd(spec: LaserNoiseSpec, tau):
    """Free-running Allan deviation at averaging time tau."""
    t = np.asarray(tau, dtype=float)
    if np.any(t <= 0):
        raise DomainError("tau must be positive")
    var = spec.h0 / (2 * t) + 2 * LN2 * spec.h_minus1 + _RW_FACTOR * spec.h_minus2 * t
    out = np.sqrt(var)
    return float(out) if out.ndim == 0 else out


def allan_coefficients(spec: LaserNoiseSpec) -> AllanCoefficients:
    """Decompose a spec into its white / flicker / random-walk ADEV at 1 s."""
    return AllanCoefficients(
        sigma_w=math.sqrt(spec.h0 / 2),
        sigma_ff=math.sqrt(2 * LN2 * spec.h_minus1),
        sigma_rw=math.sqrt(_RW_FACTOR * spec.h_minus2),
    )


def psd_from_allan(coeffs: AllanCoefficients, nu0: float = NU0_SR) -> LaserNoiseSpec:
    """Inverse of :func:`allan_coefficients`."""
    return LaserNoiseSpec(
        h_minus2=coeffs.sigma_rw**2 / _RW_FACTOR,
        h_minus1=coeffs.sigma_ff**2 / (2 * LN2),
        h0=2 * coeffs.sigma_w**2,
        nu0=nu0,
    )


def coherence_time(spec: LaserNoiseSpec, bracket=(1e-6, 1e9)) -> float:
    """Laser coherence time Z, defined by sigma_LO(Z) * 2 pi nu0 * Z = 1 rad.

    The left-hand side is strictly increasing in Z for every admissible
    power-law spectrum, so a bracketing root search in log Z is used.
    """
    omega0 = 2 * math.pi * spec.nu0

    def objective(log_z):
        z = math.exp(log_z)
        return math.log(allan_from_psd(spec, z) * omega0 * z)

    lo, hi = (math.log(b) for b in bracket)
    f_lo, f_hi = objective(lo), objective(hi)
    if not (f_lo < 0 < f_hi):
        raise ConvergenceError(f"coherence time not bracketed in {bracket} s")
    log_z = brentq(objective, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=500)
    z = math.exp(log_z)
    if abs(allan_from_psd(spec, z) * omega0 * z - 1.0) > 1e-10:
        raise ConvergenceError("coherence time residual above 1e-10")
    return z


def scale_noise(spec: LaserNoiseSpec, factor: float) -> LaserNoiseSpec:
    """Scale the whole spectral density so every ADEV component scales by factor."""
    if not factor > 0:
        raise DomainError(f"scale factor must be positive, got {factor}")
    f2 = factor * factor
    return replace(
        spec,
        h_minus2=spec.h_minus2 * f2,
        h_minus1=spec.h_minus1 * f2,
        h0=spec.h0 * f2,
    )


def preset(name: str, nu0: float = NU0_SR) -> LaserNoiseSpec:
    """One of the four reference lasers 'tL', 'cL', 'pL1', 'pL2'.

    All presets share the spectral shape of the record laboratory laser
    (:data:`CL_H_COEFFICIENTS`); every other laser is that spectrum scaled so
    its flicker floor equals the tabulated sigma_FF.
    """
    try:
        sigma_ff = TABLE_LASERS[name][1]
    except KeyError:
        raise KeyError(f"unknown laser preset {name!r}; choose from {PRESET_NAMES}") from None
    base = LaserNoiseSpec(*CL_H_COEFFICIENTS, nu0=nu0)
    if name == "cL":
        return base
    return scale_noise(base, sigma_ff / allan_coefficients(base).sigma_ff)
