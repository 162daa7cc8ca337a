"""Collective-spin statistics of coherent and one-axis-twisted states.

Closed-form moments follow Kitagawa & Ueda for the state
exp(-i mu/2 S_z^2)|CSS along x>, with the anti-squeezed quadrature rotated
so the reduced variance lies along the measured direction y.  All powers
cos^n are evaluated in log space because they underflow for N >~ 1e4.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import binom

from .errors import DegenerateStateError, DomainError, ResourceError

DICKE_MAX_ATOMS = 2048
_CONTRAST_FLOOR = 1e-12


@dataclass(frozen=True)
class EnsembleSpec:
    n_atoms: int
    mu: float = 0.0

    def __post_init__(self):
        if int(self.n_atoms) != self.n_atoms or self.n_atoms < 1:
            raise DomainError(f"n_atoms must be an integer >= 1, got {self.n_atoms}")
        object.__setattr__(self, "n_atoms", int(self.n_atoms))
        if not (0.0 <= self.mu <= math.pi):
            raise DomainError(f"mu must lie in [0, pi], got {self.mu}")

    @property
    def is_squeezed(self) -> bool:
        return self.mu > 0

    @classmethod
    def coherent(cls, n_atoms: int) -> "EnsembleSpec":
        return cls(n_atoms, 0.0)

    @classmethod
    def squeezed(cls, n_atoms: int) -> "EnsembleSpec":
        """Squeezed ensemble at :func:`optimal_mu`."""
        return cls(n_atoms, optimal_mu(n_atoms))


@dataclass(frozen=True)
class SpinMoments:
    """Moments needed by the clock model.

    ``var_sy_rel`` and ``var_sx_rel`` are the variances normalised by
    <S_x>^2; ``contrast`` is <S_x>/S with S = N/2 and ``xi`` the Wineland
    parameter sqrt(N) dS_y/<S_x>.
    """

    n_atoms: int
    mean_sx: float
    var_sy_rel: float
    var_sx_rel: float
    contrast: float
    xi: float

    @property
    def xi2(self) -> float:
        return self.xi**2


def _moments(n, mean_sx, var_sy_rel, var_sx_rel):
    return SpinMoments(
        n_atoms=n,
        mean_sx=mean_sx,
        var_sy_rel=var_sy_rel,
        var_sx_rel=var_sx_rel,
        contrast=mean_sx / (n / 2),
        xi=math.sqrt(n * var_sy_rel),
    )


def _log_cos(x):
    # log(cos x) accurate for small x, where cos x rounds towards 1
    return math.log1p(-2 * math.sin(x / 2) ** 2)


def oat_moments(spec: EnsembleSpec) -> SpinMoments:
    """Closed-form moments of the one-axis-twisted state (mu = 0 gives the CSS)."""
    n, mu = spec.n_atoms, spec.mu
    if mu == 0.0 or n == 1:
        return _moments(n, n / 2, 1.0 / n, 0.0)

    log_ch = _log_cos(mu / 2)
    if (n - 1) * log_ch <= math.log(_CONTRAST_FLOOR):
        raise DegenerateStateError(f"contrast underflow at N={n}, mu={mu}")
    log_c2 = (2 * n - 2) * log_ch  # log cos^{2N-2}(mu/2)

    cos_mu = math.cos(mu)
    if cos_mu > 0:
        a = -math.expm1((n - 2) * _log_cos(mu))
    elif cos_mu == 0:
        a = 1.0 if n > 2 else 0.0
    else:
        a = 1.0 - math.copysign(math.exp((n - 2) * math.log(-cos_mu)), (-1.0) ** (n - 2))
    b = 4 * math.sin(mu / 2) * math.exp((n - 2) * log_ch)

    root = math.hypot(a, b)
    # a - sqrt(a^2 + b^2), written without cancellation
    diff = -(b * b) / (a + root) if (a + root) > 0 else 0.0

    inv_c2 = math.exp(-log_c2)
    var_sy_rel = (1 + 0.25 * (n - 1) * diff) * inv_c2 / n
    var_sx_rel = (n * -math.expm1(log_c2) - 0.5 * (n - 1) * a) * inv_c2 / n
    mean_sx = 0.5 * n * math.exp((n - 1) * log_ch)
    return _moments(n, mean_sx, var_sy_rel, var_sx_rel)


def optimal_mu(n_atoms: int) -> float:
    """Squeezing strength 1.1 N^(-2/3) used for squeezed ensembles."""
    if n_atoms < 2:
        raise DomainError("squeezing needs at least two atoms")
    return 1.1 * n_atoms ** (-2.0 / 3.0)


@dataclass(frozen=True)
class DickeStatistics:
    """Raw output of the state-vector computation."""

    mean: np.ndarray        # (<S_x>, <S_y>, <S_z>)
    covariance: np.ndarray  # symmetrised covariance, 3x3
    squeezed_axis: np.ndarray  # unit vector in the y-z plane of minimal variance
    cross_correlation: float   # <S_x S_n + S_n S_x>/2 - <S_x><S_n> along that axis


def dicke_statistics(spec: EnsembleSpec) -> DickeStatistics:
    """Exact moments from the (N+1)-dimensional symmetric subspace."""
    n = spec.n_atoms
    if n > DICKE_MAX_ATOMS:
        raise ResourceError(f"Dicke-space oracle limited to N <= {DICKE_MAX_ATOMS}")
    s = n / 2
    k = np.arange(n + 1)
    m = k - s
    weights = binom.pmf(k, n, 0.5)
    psi = np.sqrt(weights / math.fsum(weights)) * np.exp(-0.5j * spec.mu * m**2)

    # S_+ |S,m> = sqrt(S(S+1) - m(m+1)) |S,m+1>
    up = np.sqrt(s * (s + 1) - m[:-1] * (m[:-1] + 1))
    splus = np.zeros_like(psi)
    splus[1:] = up * psi[:-1]
    sminus = np.zeros_like(psi)
    sminus[:-1] = up * psi[1:]
    vecs = ((splus + sminus) / 2, (splus - sminus) / 2j, m * psi)

    mean = np.array([np.vdot(psi, v).real for v in vecs])
    second = np.array([[np.vdot(va, vb).real for vb in vecs] for va in vecs])
    cov = second - np.outer(mean, mean)

    evals, evecs = np.linalg.eigh(cov[1:, 1:])
    axis = np.concatenate([[0.0], evecs[:, 0]])
    cross = float(cov[0] @ axis)
    return DickeStatistics(mean, cov, axis, cross)


def dicke_oracle(spec: EnsembleSpec) -> SpinMoments:
    """Ground-truth :class:`SpinMoments` by direct state-vector summation."""
    stats = dicke_statistics(spec)
    n = spec.n_atoms
    mean_sx = stats.mean[0]
    if mean_sx <= _CONTRAST_FLOOR * n / 2:
        raise DegenerateStateError(f"contrast underflow at N={n}, mu={spec.mu}")
    mean_sx = float(mean_sx)
    var_sy = float(stats.squeezed_axis @ stats.covariance @ stats.squeezed_axis)
    var_sx = float(stats.covariance[0, 0])
    return _moments(n, mean_sx, var_sy / mean_sx**2, max(var_sx, 0.0) / mean_sx**2)
