"""Operating points derived from the analytic budget.

* ``sigma_min``: the Ramsey time T_R* where Dick and CTL contributions are
  equal, and their common value.  It bounds sigma_total from below for any
  atom number.
* ``n_min``: the smallest atom number whose projection noise at T_R* is
  below sigma_min.
* ``n_min_capped``: the same when T_R is limited to ``t_max`` and the
  comparison is against the Dick term at ``t_max``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed
from scipy.optimize import brentq, minimize_scalar

from .analytic_stability import budget, sigma_dick
from .core import ClockSchedule, ServoConfig
from .errors import ClockStabError, ConvergenceError, DomainError
from .fringe_mfpt import t_fringe_hop
from .noise_model import LaserNoiseSpec, coherence_time
from .spin_states import EnsembleSpec, oat_moments, optimal_mu

TR_SEARCH_CAP = 1e3
REFERENCE_ENSEMBLE = EnsembleSpec(1000)


@dataclass(frozen=True)
class SigmaMin:
    t_ramsey: float
    sigma: float


@dataclass(frozen=True)
class OperatingPoint:
    t_ramsey_opt: float
    sigma_at_opt: float
    limiting_tradeoff: str
    fringe_safe: bool | None
    sigma_qpn: float = float("nan")
    sigma_dick: float = float("nan")
    sigma_ctl: float = float("nan")


def _ensemble(n: int, squeezed: bool) -> EnsembleSpec:
    return EnsembleSpec.squeezed(n) if squeezed else EnsembleSpec(n)


def sigma_min(spec: LaserNoiseSpec, t_dead: float, servo: ServoConfig = ServoConfig(),
              ensemble: EnsembleSpec = REFERENCE_ENSEMBLE) -> SigmaMin:
    """Crossing of sigma_Dick (falling) and sigma_CTL (rising) in T_R.

    The CTL term uses the contrast and gain of ``ensemble``; the default is
    a coherent state, for which it does not depend on N.
    """
    if not t_dead > 0:
        raise DomainError("sigma_min needs a positive dead time")
    moments = oat_moments(ensemble)

    def gap(t):
        b = budget(spec, ClockSchedule(t, t_dead), moments, servo)
        return math.log(b.sigma_dick) - math.log(b.sigma_ctl)

    hi = min(TR_SEARCH_CAP, 5 * coherence_time(spec))
    lo = hi * 1e-6
    if gap(lo) <= 0 or gap(hi) >= 0:
        raise ConvergenceError("no Dick/CTL crossing in the search interval")
    t = brentq(gap, lo, hi, xtol=1e-12 * hi, rtol=1e-12)
    b = budget(spec, ClockSchedule(t, t_dead), moments, servo)
    return SigmaMin(t, math.sqrt(b.sigma_dick * b.sigma_ctl))


def _first_n(predicate, n_start: int) -> int:
    """Smallest integer n >= n_start with predicate(n), for monotone predicates."""
    if predicate(n_start):
        return n_start
    lo, hi = n_start, 2 * n_start
    while not predicate(hi):
        lo, hi = hi, 2 * hi
        if hi > 1 << 40:
            raise ConvergenceError("atom-number search diverged")
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if predicate(mid):
            hi = mid
        else:
            lo = mid
    return hi


def _qpn_below(spec, schedule, servo, squeezed, target):
    def ok(n):
        return budget(spec, schedule, _ensemble(n, squeezed), servo).sigma_qpn <= target
    return ok


def n_min(spec: LaserNoiseSpec, t_dead: float, servo: ServoConfig = ServoConfig(),
          squeezed: bool = False) -> int:
    """Smallest N whose projection noise at T_R* does not exceed sigma_min.

    Squeezed candidates use the variance-minimising twisting strength for
    each N.
    """
    sm = sigma_min(spec, t_dead, servo)
    schedule = ClockSchedule(sm.t_ramsey, t_dead)
    return _first_n(_qpn_below(spec, schedule, servo, squeezed, sm.sigma), 2 if squeezed else 1)


def n_min_capped(spec: LaserNoiseSpec, t_dead: float, t_max: float, servo: ServoConfig = ServoConfig(),
                 squeezed: bool = False) -> int:
    """Critical atom number when Ramsey times are limited to ``t_max``."""
    if not t_max > 0:
        raise DomainError("t_max must be positive")
    sm = sigma_min(spec, t_dead, servo)
    if sm.t_ramsey <= t_max:
        return n_min(spec, t_dead, servo, squeezed)
    schedule = ClockSchedule(t_max, t_dead)
    target = sigma_dick(spec, schedule)
    return _first_n(_qpn_below(spec, schedule, servo, squeezed, target), 2 if squeezed else 1)


def optimize_tr(spec: LaserNoiseSpec, t_dead: float, ensemble: EnsembleSpec,
                servo: ServoConfig = ServoConfig(), check_fringe: bool = True,
                grid_points: int = 80) -> OperatingPoint:
    """Minimise sigma_total over T_R: log grid over [1e-3 Z, 2Z], then a bounded refinement."""
    z = coherence_time(spec)
    moments = oat_moments(ensemble)

    def log_total(log_t):
        return math.log(budget(spec, ClockSchedule(math.exp(log_t), t_dead), moments, servo).sigma_total)

    grid = np.linspace(math.log(1e-3 * z), math.log(2 * z), grid_points)
    vals = [log_total(x) for x in grid]
    i = int(np.argmin(vals))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    res = minimize_scalar(log_total, bounds=(lo, hi), method="bounded", options={"xatol": 1e-10})
    t_opt = math.exp(res.x) if res.fun <= vals[i] else math.exp(grid[i])
    b = budget(spec, ClockSchedule(t_opt, t_dead), moments, servo)
    tradeoff = "qpn_ctl" if b.sigma_qpn >= b.sigma_dick else "dick_ctl"
    safe = None
    if check_fringe:
        safe = t_opt < t_fringe_hop(spec, ensemble, servo).t_fringe_hop
    return OperatingPoint(t_opt, b.sigma_total, tradeoff, safe, b.sigma_qpn, b.sigma_dick, b.sigma_ctl)


@dataclass
class SweepRow:
    laser: str
    t_dead: float
    n_atoms: int
    squeezed: bool
    mode: str
    t_ramsey_opt: float = float("nan")
    sigma_opt: float = float("nan")
    sigma_qpn: float = float("nan")
    sigma_dick: float = float("nan")
    sigma_ctl: float = float("nan")
    limiting_tradeoff: str = ""
    prefactors: list = field(default_factory=list)
    seeds: list = field(default_factory=list)
    error: str = ""

    @property
    def prefactor_mean(self) -> float:
        return float(np.mean(self.prefactors)) if self.prefactors else float("nan")

    @property
    def prefactor_sem(self) -> float:
        n = len(self.prefactors)
        return float(np.std(self.prefactors, ddof=1) / math.sqrt(n)) if n > 1 else float("nan")


def _sweep_cell(name, spec, t_dead, n, squeezed, mode, servo, seeds, n_cycles):
    row = SweepRow(name, t_dead, n, squeezed, mode)
    try:
        ens = _ensemble(n, squeezed)
        op = optimize_tr(spec, t_dead, ens, servo, check_fringe=False)
        row.t_ramsey_opt, row.sigma_opt = op.t_ramsey_opt, op.sigma_at_opt
        row.sigma_qpn, row.sigma_dick, row.sigma_ctl = op.sigma_qpn, op.sigma_dick, op.sigma_ctl
        row.limiting_tradeoff = op.limiting_tradeoff
        if mode == "simulate":
            from .servo_sim import run_loop
            for s in seeds:
                r = run_loop(spec, ClockSchedule(op.t_ramsey_opt, t_dead), ens, servo, n_cycles, s)
                row.prefactors.append(r.prefactor_sigma1s)
                row.seeds.append(s)
    except (ClockStabError, ValueError, ArithmeticError) as exc:
        row.error = f"{type(exc).__name__}: {exc}"
    return row


def sweep(spec_grid, t_dead_grid, n_grid, mode: str = "analytic", squeezed: bool = False,
          servo: ServoConfig = ServoConfig(), seeds=(0,), n_cycles: int = 800_000,
          jobs: int = 1) -> list[SweepRow]:
    """Optimal operating point for every (laser, T_D, N) cell.

    ``spec_grid`` maps labels to noise specs.  Rows come back in grid order
    whatever ``jobs`` is; a failing cell records its error and the sweep
    continues.
    """
    if mode not in ("analytic", "simulate"):
        raise DomainError(f"unknown sweep mode {mode!r}")
    cells = [(name, spec, float(td), int(n)) for name, spec in dict(spec_grid).items()
             for td in t_dead_grid for n in n_grid]
    if not cells:
        return []
    work = (delayed(_sweep_cell)(name, spec, td, n, squeezed, mode, servo, list(seeds), n_cycles)
            for name, spec, td, n in cells)
    return list(Parallel(n_jobs=jobs)(work))
