"""Acceptance criteria, one test per criterion, each printing a PASS/FAIL line.

Simulation-heavy criteria (4 and 5) take a few minutes on one core.
"""
import math
import time

import numpy as np
import pytest

from clockstab.analytic_stability import budget, dick_sum_bruteforce, sigma_dick
from clockstab.core import ClockSchedule, ServoConfig
from clockstab.fringe_mfpt import (MfptParams, escape_time_monte_carlo, guide_flicker, guide_rw,
                                   mfpt, t_fringe_hop)
from clockstab.allan import overlapping_adev
from clockstab.noise_gen import validate_generator
from clockstab.noise_model import LaserNoiseSpec, PRESET_NAMES, coherence_time, preset
from clockstab.optimizer import n_min, n_min_capped, sigma_min
from clockstab.servo_sim import run_loop
from clockstab.spin_states import EnsembleSpec, dicke_oracle, oat_moments, optimal_mu

N_CYCLES = 800_000
SEEDS = range(5)
T_DEAD_SIM = 0.5


def test_coherence_times(acceptance):
    expected = {"tL": 3.6, "cL": 7.5, "pL1": 36.5, "pL2": 118.8}
    start = time.perf_counter()
    z = {name: coherence_time(preset(name)) for name in expected}
    elapsed = time.perf_counter() - start
    worst = max(abs(z[k] / v - 1) for k, v in expected.items())
    detail = ", ".join(f"{k} {z[k]:.2f} s" for k in expected)
    acceptance("1 coherence times", worst <= 0.01 and elapsed < 1,
               f"{detail}; worst {worst:.2%}, {elapsed:.3f} s")


def test_critical_atom_numbers(acceptance):
    spec = preset("cL")
    start = time.perf_counter()
    got = {
        "N_min": n_min(spec, 0.1),
        "capped 0.1 s": n_min_capped(spec, 0.1, 0.1),
        "capped 1 s": n_min_capped(spec, 0.1, 1.0),
    }
    at_least_3 = {t: n_min_capped(spec, 0.1, t) for t in (3.0, 5.0, 30.0)}
    elapsed = time.perf_counter() - start
    want = {"N_min": 1244, "capped 0.1 s": 3504, "capped 1 s": 1475}
    worst = max(abs(got[k] / v - 1) for k, v in want.items())
    ok = worst <= 0.02 and all(v == got["N_min"] for v in at_least_3.values()) and elapsed < 60
    detail = ", ".join(f"{k} {got[k]} (ref {want[k]})" for k in want)
    acceptance("2 critical atom numbers", ok,
               f"{detail}; T_max >= 3 s gives {sorted(set(at_least_3.values()))}; {elapsed:.1f} s")


def test_universal_scaling(acceptance):
    start = time.perf_counter()
    ratios = np.geomspace(1e-2, 1, 9)
    x, y = [], []
    for name in PRESET_NAMES:
        spec = preset(name)
        z = coherence_time(spec)
        for r in ratios:
            x.append(r)
            y.append(math.sqrt(z) * sigma_min(spec, r * z).sigma)
    slope, intercept = np.polyfit(np.log(x), np.log(y), 1)
    amp = math.exp(intercept)
    elapsed = time.perf_counter() - start
    ok = abs(slope - 0.7) <= 0.05 and abs(amp / 3.0e-16 - 1) <= 0.2 and elapsed < 300
    acceptance("3 universal scaling", ok, f"exponent {slope:.3f}, amplitude {amp:.3e}, {elapsed:.1f} s")


def _prefactors(spec, schedule, ensemble, servo=ServoConfig(), seeds=SEEDS, n_cycles=N_CYCLES):
    runs = [run_loop(spec, schedule, ensemble, servo, n_cycles, s) for s in seeds]
    return np.array([r.prefactor_sigma1s for r in runs]), sum(r.hop_count for r in runs)


@pytest.mark.slow
def test_simulation_matches_budget(acceptance):
    spec = preset("cL")
    start = time.perf_counter()
    lines, worst = [], 0.0
    for n in (10, 2000):
        ens = EnsembleSpec(n)
        onset = t_fringe_hop(spec, ens).t_fringe_hop
        grid = [t for t in (0.3, 0.6, 1.0, 1.5, 2.0) if t <= onset]
        for t_r in grid:
            schedule = ClockSchedule(t_r, T_DEAD_SIM)
            pre, hops = _prefactors(spec, schedule, ens)
            ratio = pre.mean() / budget(spec, schedule, ens).sigma_total
            worst = max(worst, abs(ratio - 1))
            lines.append(f"N={n} T_R={t_r} ratio {ratio:.3f} hops {hops}")
    elapsed = time.perf_counter() - start
    acceptance("4 simulation vs analytic", worst <= 0.15 and elapsed < 3600,
               f"worst deviation {worst:.1%}; " + "; ".join(lines) + f"; {elapsed:.0f} s")


def test_onset_guides(acceptance):
    cl = preset("cL")
    flicker = LaserNoiseSpec(h_minus1=cl.h_minus1)
    rw = LaserNoiseSpec(h_minus2=cl.h_minus2)
    lines, worst = [], 1.0
    for label, spec, guide in (("flicker", flicker, guide_flicker), ("rw", rw, guide_rw)):
        z = coherence_time(spec)
        for n in (10, 100, 1000):
            t = t_fringe_hop(spec, EnsembleSpec(n)).t_fringe_hop
            ratio = t / float(guide(n, z))
            worst = max(worst, ratio, 1 / ratio)
            lines.append(f"{label} N={n} {ratio:.2f}")
    acceptance("5a onset vs guide", worst <= 1.5, f"worst factor {worst:.2f}; " + ", ".join(lines))


@pytest.mark.slow
def test_simulated_blow_up_near_onset(acceptance):
    # the blow-up point is the first T_R (scanning upward) whose run hops or whose
    # prefactor exceeds twice the analytic budget
    spec = LaserNoiseSpec(h_minus1=preset("cL").h_minus1)
    lines, worst = [], 1.0
    for n in (10, 100, 1000):
        ens = EnsembleSpec(n)
        onset = t_fringe_hop(spec, ens).t_fringe_hop
        blow_up = math.inf
        for f in (0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0, 2.5):
            schedule = ClockSchedule(f * onset, T_DEAD_SIM)
            r = run_loop(spec, schedule, ens, n_cycles=N_CYCLES, seed=7)
            if r.hop_count > 0 or r.prefactor_sigma1s > 2 * budget(spec, schedule, ens).sigma_total:
                blow_up = f * onset
                break
        ratio = blow_up / onset
        worst = max(worst, ratio, 1 / ratio)
        lines.append(f"N={n} onset {onset:.2f} s, blow-up {blow_up:.2f} s")
    acceptance("5b simulated blow-up", worst <= 2, f"worst factor {worst:.2f}; " + "; ".join(lines))


def test_oracle_dick_white(acceptance):
    worst = 0.0
    for duty in (0.1, 0.25, 0.5, 0.9):
        spec = LaserNoiseSpec(h0=1e-33)
        schedule = ClockSchedule(duty, 1 - duty)
        closed = spec.h0 * duty * (1 - duty) / 2
        # brute-force series with its analytic tail 1/(2 pi^2 k_max)
        brute = dick_sum_bruteforce(spec, schedule, 10**7) + spec.h0 / (2 * math.pi**2 * 10**7)
        worst = max(worst, abs(brute / closed - 1), abs(sigma_dick(spec, schedule) ** 2 * duty**2 / closed - 1))
    acceptance("6a Dick white-FM identity", worst <= 1e-6, f"worst relative error {worst:.1e}")


def test_oracle_oat_moments(acceptance):
    worst = 0.0
    for n in (2, 3, 10, 64, 257, 1000, 2048):
        for scale in (0.0, 0.3, 1.0, 3.0):
            spec = EnsembleSpec(n, scale * optimal_mu(n))
            got, want = oat_moments(spec), dicke_oracle(spec)
            for f in ("mean_sx", "var_sy_rel", "var_sx_rel", "contrast", "xi"):
                a, b = getattr(got, f), getattr(want, f)
                worst = max(worst, abs(a - b) / max(abs(b), 1e-3))
    acceptance("6b OAT vs Dicke oracle", worst <= 1e-9, f"worst relative error {worst:.1e}")


def test_oracle_noise_generator(acceptance):
    cl = preset("cL")
    pure = {"white": LaserNoiseSpec(h0=cl.h0), "flicker": LaserNoiseSpec(h_minus1=cl.h_minus1),
            "rw": LaserNoiseSpec(h_minus2=cl.h_minus2)}
    errs = {k: validate_generator(s, ClockSchedule(0.5, 0.5), 20_000, n_seeds=20).max_rel_error
            for k, s in pure.items()}
    detail = ", ".join(f"{k} {v:.1%}" for k, v in errs.items())
    acceptance("6c generator ADEV", max(errs.values()) <= 0.10, f"max deviation per type: {detail}")


def test_oracle_allan_white(acceptance):
    rng = np.random.default_rng(0)
    sigma0, tau0 = 2e-16, 1.5
    s = overlapping_adev(sigma0 * rng.standard_normal(100_000), tau0, tau0 * np.array([1, 4, 16, 64, 256]))
    worst = float(np.max(np.abs(s.adev / (sigma0 * np.sqrt(tau0 / s.taus)) - 1)))
    acceptance("6d Allan estimator", worst <= 0.05, f"worst deviation {worst:.1%}")


def test_oracle_mfpt_monte_carlo(acceptance):
    p = MfptParams(0.0, 0.0025, 0.0, 1.0)
    est = escape_time_monte_carlo(p, 20_000, seed=1)
    dev = abs(est / mfpt(p) - 1)
    acceptance("6e MFPT vs Monte Carlo", dev <= 0.02, f"quadrature {mfpt(p):.1f}, simulated {est:.1f} cycles")


def test_oracle_squeezing_slope(acceptance):
    ns = np.geomspace(1e2, 1e5, 16).astype(int)
    xi2 = [oat_moments(EnsembleSpec.squeezed(int(n))).xi2 for n in ns]
    slope = np.polyfit(np.log(ns), np.log(xi2), 1)[0]
    acceptance("6f squeezing slope", abs(slope + 2 / 3) <= 0.1, f"slope {slope:.3f}")


def test_servo_properties(acceptance):
    start = time.perf_counter()
    rate = 1e-18
    offsets = {}
    for kind in ("double_integrator", "single_integrator"):
        r = run_loop(None, ClockSchedule(1.0, 0.0), EnsembleSpec(1000), ServoConfig(servo_kind=kind),
                     n_cycles=5000, seed=0, noiseless=True, drift=rate)
        offsets[kind] = r.stabilized_freq_trace[-2000:].mean()
    cl = preset("cL")
    s = ClockSchedule(0.8, 0.4)
    a = run_loop(cl, s, EnsembleSpec(500), n_cycles=20_000, seed=42)
    b = run_loop(cl, s, EnsembleSpec(500), n_cycles=20_000, seed=42)
    same = np.array_equal(a.stabilized_freq_trace, b.stabilized_freq_trace)
    elapsed = time.perf_counter() - start
    single, double = abs(offsets["single_integrator"]), abs(offsets["double_integrator"])
    ok = single > 1e-18 and double < 1e-6 * single and same and elapsed < 60
    acceptance("7 servo properties", ok,
               f"drift residual double {double:.1e}, single {single:.1e}; reproducible {same}; {elapsed:.1f} s")


@pytest.mark.slow
def test_secondary_gain_insensitive(acceptance):
    spec = preset("cL")
    schedule = ClockSchedule(1.0, T_DEAD_SIM)
    ens = EnsembleSpec(2000)
    analytic = budget(spec, schedule, ens).sigma_total
    ratios = {}
    for g2 in (0.02, 0.08):
        pre, _ = _prefactors(spec, schedule, ens, ServoConfig(g2=g2), seeds=range(3))
        ratios[g2] = pre.mean() / analytic
    worst = max(abs(v - 1) for v in ratios.values())
    acceptance("4+ secondary gain g2 in [0.02, 0.08]", worst <= 0.15,
               ", ".join(f"g2={k} ratio {v:.3f}" for k, v in ratios.items()))
