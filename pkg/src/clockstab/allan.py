"""Overlapping Allan deviation of per-cycle frequency data and 1/sqrt(tau) fits."""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class AllanSeries:
    taus: np.ndarray
    adev: np.ndarray
    n_samples_per_tau: np.ndarray

    def __post_init__(self):
        if len(self.taus) > 1 and np.any(np.diff(self.taus) <= 0):
            raise DomainError("taus must be strictly increasing")

    def to_csv(self, path, header_comment: str | None = None) -> None:
        with open(path, "w", newline="") as fh:
            if header_comment:
                for line in header_comment.splitlines():
                    fh.write(f"# {line}\n")
            w = csv.writer(fh)
            w.writerow(["tau", "adev", "n"])
            for t, a, n in zip(self.taus, self.adev, self.n_samples_per_tau):
                w.writerow([f"{t:.17e}", f"{a:.17e}", int(n)])


def octave_taus(n_cycles: int, t_cycle: float) -> np.ndarray:
    """Averaging times 2^j T_C that leave at least three samples."""
    m = 2 ** np.arange(int(math.log2(max(n_cycles // 3, 1))) + 1)
    return m * t_cycle


def overlapping_adev(trace, t_cycle: float, taus=None) -> AllanSeries:
    """Overlapping Allan deviation of fractional-frequency samples spaced by t_cycle.

    Each tau is rounded to an integer multiple m of t_cycle.  Averaging
    factors with fewer than 3m samples available are dropped with a warning.
    """
    y = np.asarray(trace, dtype=float)
    n = y.size
    if taus is None:
        taus = octave_taus(n, t_cycle)
    ms = np.rint(np.asarray(taus, dtype=float) / t_cycle).astype(np.int64)
    if np.any(ms < 1):
        raise DomainError("every tau must be at least one cycle")
    ms = np.unique(ms)

    # phase in units of cycle-averaged frequency
    x = np.concatenate([[0.0], np.cumsum(y - y.mean())])
    kept, adev, counts = [], [], []
    for m in ms:
        if n < 3 * m:
            warnings.warn(f"tau = {m * t_cycle:g} s needs {3 * m} samples, have {n}; omitted",
                          stacklevel=2)
            continue
        d = x[2 * m:] - 2 * x[m:-m] + x[: -2 * m]
        kept.append(m)
        adev.append(math.sqrt(np.mean(d * d) / (2.0 * m * m)))
        counts.append(d.size)
    ms = np.asarray(kept, dtype=np.int64)
    return AllanSeries(ms * t_cycle, np.asarray(adev), np.asarray(counts, dtype=np.int64))


def default_fit_window(n_cycles: int, t_cycle: float) -> tuple[float, float]:
    """[1e3 T_C, n T_C / 10]: past the servo transient, short of the noisy tail."""
    return 1e3 * t_cycle, n_cycles * t_cycle / 10


def fit_prefactor(series: AllanSeries, fit_window: tuple[float, float]) -> float:
    """sigma_y(1 s) from a least-squares fit of log sigma = log a - log(tau)/2."""
    lo, hi = fit_window
    sel = (series.taus >= lo * (1 - 1e-12)) & (series.taus <= hi * (1 + 1e-12))
    if np.count_nonzero(sel) < 3:
        raise DomainError(f"fit window {fit_window} holds fewer than 3 tau points")
    a = series.adev[sel]
    if np.any(a <= 0):
        return 0.0 if np.all(a == 0) else float(np.exp(np.mean(np.log(a[a > 0] * np.sqrt(series.taus[sel][a > 0])))))
    return float(np.exp(np.mean(np.log(a) + 0.5 * np.log(series.taus[sel]))))


def fit_taus(n_cycles: int, t_cycle: float, points: int = 12) -> np.ndarray:
    """Log-spaced tau grid spanning the default fit window."""
    lo, hi = default_fit_window(n_cycles, t_cycle)
    ms = np.unique(np.rint(np.geomspace(lo / t_cycle, hi / t_cycle, points)).astype(np.int64))
    return ms * t_cycle
