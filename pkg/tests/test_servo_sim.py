import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from clockstab.analytic_stability import budget, sigma_qpn
from clockstab.core import ClockSchedule, ServoConfig
from clockstab.errors import DomainError
from clockstab.fringe_mfpt import mfpt, mfpt_params
from clockstab.noise_gen import NoiseTrace, generate_trace
from clockstab.noise_model import NU0_SR, LaserNoiseSpec, coherence_time
from clockstab.servo_sim import detect_fringe_hops, inject_drift, run_loop, sample_measurement
from clockstab.spin_states import EnsembleSpec, oat_moments

N_SAMPLES = 100_000


def draws(ensemble, phi, seed=0, n=N_SAMPLES):
    rng = np.random.default_rng(seed)
    m = oat_moments(ensemble)
    return np.array([sample_measurement(ensemble, m, phi, rng) for _ in range(n)])


def chi2_z(sample, variance):
    """Standardised chi-square statistic of the sample variance."""
    k = sample.size - 1
    return (k * sample.var(ddof=1) / variance - k) / math.sqrt(2 * k)


def test_css_measurement_at_zero_phase():
    n = 50
    x = draws(EnsembleSpec(n), 0.0)
    assert abs(x.mean()) < 3 * math.sqrt(1 / n / x.size)
    assert abs(chi2_z(x, 1 / n)) < 3


def test_css_measurement_at_quarter_fringe():
    x = draws(EnsembleSpec(37), math.pi / 2, n=1000)
    assert np.all(x == 1.0)


def test_sss_measurement_variance():
    ens = EnsembleSpec.squeezed(100)
    m = oat_moments(ens)
    x = draws(ens, 0.0)
    assert x.var() == pytest.approx(m.contrast**2 * m.var_sy_rel, rel=0.05)
    assert x.mean() == pytest.approx(0.0, abs=3 * x.std() / math.sqrt(x.size))


@given(st.floats(-10, 10))
def test_measurement_in_range(phi):
    rng = np.random.default_rng(1)
    for ens in (EnsembleSpec(3), EnsembleSpec.squeezed(20)):
        v = sample_measurement(ens, oat_moments(ens), phi, rng)
        assert -1.0 <= v <= 1.0


def test_gaussian_model_needs_twenty_atoms():
    ens = EnsembleSpec(10, 0.1)
    with pytest.raises(DomainError):
        sample_measurement(ens, oat_moments(ens), 0.0, np.random.default_rng())


def test_hop_detection_examples():
    assert detect_fringe_hops(np.full(100, 0.05) * np.sin(np.arange(100))) == 0
    assert detect_fringe_hops(np.linspace(0, 4, 50)) == 1
    # lingering near pi without coming back below pi/2 stays one episode
    assert detect_fringe_hops([0, 3.2, 3.0, 3.3, 2.0, 3.5]) == 1
    assert detect_fringe_hops([0, 3.2, 1.0, -3.3, 0.1]) == 2


@given(st.lists(st.floats(-10, 10), max_size=200))
def test_hop_count_bounded_by_exceedances(phases):
    n_over = sum(abs(p) > math.pi for p in phases)
    assert 0 <= detect_fringe_hops(phases) <= n_over


def test_null_loop_stays_at_zero():
    r = run_loop(None, ClockSchedule(1.0, 0.5), EnsembleSpec(1000), n_cycles=2000, seed=0, noiseless=True)
    assert np.all(r.stabilized_freq_trace == 0)
    assert np.all(r.phases == 0)
    assert r.final_state.correction == 0.0
    assert r.prefactor_sigma1s == 0.0


def _drift_offsets(t_dead, rate=1e-18):
    out = {}
    for kind in ("double_integrator", "single_integrator"):
        r = run_loop(None, ClockSchedule(1.0, t_dead), EnsembleSpec(1000), ServoConfig(servo_kind=kind),
                     n_cycles=5000, seed=0, noiseless=True, drift=rate)
        out[kind] = r.stabilized_freq_trace[-2000:].mean()
    return out


def test_double_integrator_removes_drift():
    off = _drift_offsets(0.0)
    assert abs(off["single_integrator"]) > 1e-18
    assert abs(off["double_integrator"]) < 1e-6 * abs(off["single_integrator"])


def test_drift_residual_with_dead_time():
    # the correction is constant during the dead time, which leaves -rate * T_D / 2
    off = _drift_offsets(0.5)
    assert off["double_integrator"] == pytest.approx(-1e-18 * 0.5 / 2, rel=1e-6)
    assert abs(off["single_integrator"]) > 10 * abs(off["double_integrator"])


def test_random_walk_noise_single_vs_double():
    rw = LaserNoiseSpec(h_minus2=2.4e-36)
    s = ClockSchedule(1.0, 0.5)
    pre = {kind: np.mean([run_loop(rw, s, EnsembleSpec(1000), ServoConfig(servo_kind=kind),
                                   n_cycles=100_000, seed=k).prefactor_sigma1s for k in range(2)])
           for kind in ("double_integrator", "single_integrator")}
    assert np.isfinite(pre["double_integrator"]) and pre["double_integrator"] > 0
    assert pre["single_integrator"] > 1.3 * pre["double_integrator"]


def test_bitwise_reproducible(cl):
    s = ClockSchedule(0.8, 0.4)
    a = run_loop(cl, s, EnsembleSpec(500), n_cycles=5000, seed=42)
    b = run_loop(cl, s, EnsembleSpec(500), n_cycles=5000, seed=42)
    c = run_loop(cl, s, EnsembleSpec(500), n_cycles=5000, seed=43)
    assert np.array_equal(a.stabilized_freq_trace, b.stabilized_freq_trace)
    assert a.prefactor_sigma1s == b.prefactor_sigma1s and a.hop_count == b.hop_count
    assert not np.array_equal(a.stabilized_freq_trace, c.stabilized_freq_trace)


def test_squeezed_run_reproducible(cl):
    s = ClockSchedule(0.8, 0.4)
    a = run_loop(cl, s, EnsembleSpec.squeezed(200), n_cycles=3000, seed=1)
    b = run_loop(cl, s, EnsembleSpec.squeezed(200), n_cycles=3000, seed=1)
    assert np.array_equal(a.stabilized_freq_trace, b.stabilized_freq_trace)


def test_large_ensemble_projection_noise_limit():
    s = ClockSchedule(1.0, 0.0)
    r = run_loop(None, s, EnsembleSpec(10**6), n_cycles=100_000, seed=9)
    assert np.abs(r.stabilized_freq_trace).max() < 1e-17
    expected = sigma_qpn(oat_moments(EnsembleSpec(10**6)), s, NU0_SR)
    assert r.prefactor_sigma1s == pytest.approx(expected, rel=0.05)


def test_trace_override_and_length_check(cl):
    s = ClockSchedule(1.0, 0.5)
    tr = generate_trace(cl, s, 3000, seed=5)
    r = run_loop(cl, s, EnsembleSpec(100), n_cycles=2000, seed=1, trace=tr)
    assert r.n_cycles == 2000
    with pytest.raises(DomainError):
        run_loop(cl, s, EnsembleSpec(100), n_cycles=4000, seed=1, trace=tr)


def test_inject_drift_ramp():
    tr = NoiseTrace((1.0, 3.0), np.zeros((3, 2)))
    d = inject_drift(tr, 2.0)
    # interval midpoints: 0.5, 2.5, then +4 s per cycle
    assert np.allclose(d.values, 2.0 * np.array([[0.5, 2.5], [4.5, 6.5], [8.5, 10.5]]))


def test_hop_storm_flagged():
    # Ramsey phases +4, 0, -4, 0 rad repeated: every other cycle leaves (-pi, pi)
    n = 2000
    omega_t = 2 * math.pi * NU0_SR * 1.0
    pattern = np.array([4.0, 0.0, -4.0, 0.0]) / omega_t
    vals = np.column_stack([np.tile(pattern, n // 4), np.zeros(n)])
    tr = NoiseTrace((1.0, 0.5), vals)
    with pytest.warns(UserWarning, match="hop storm"):
        r = run_loop(None, ClockSchedule(1.0, 0.5), EnsembleSpec(100), ServoConfig(servo_kind="single_integrator"),
                     n_cycles=n, seed=0, trace=tr, noiseless=True)
    assert r.hop_storm and r.hop_count == n // 2


def test_minimum_cycles():
    with pytest.raises(DomainError):
        run_loop(None, ClockSchedule(1.0), EnsembleSpec(10), n_cycles=999)


def test_hop_probability_consistent_with_escape_time(cl):
    # T_R = Z / 2: the escape-time model predicts a hop within 1e6 cycles with
    # near certainty; the fraction of short runs that already hopped is a
    # lower bound on the simulated probability
    z = coherence_time(cl)
    s = ClockSchedule(0.5 * z, 0.5)
    p_model = -math.expm1(-1e6 / mfpt(mfpt_params(cl, s, EnsembleSpec(100))))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        hopped = [run_loop(cl, s, EnsembleSpec(100), n_cycles=20_000, seed=k).hop_count > 0 for k in range(10)]
    p_sim = np.mean(hopped)
    assert p_model / 3 <= p_sim <= min(1.0, 3 * p_model)
