import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from clockstab.allan import (AllanSeries, default_fit_window, fit_prefactor, fit_taus, octave_taus,
                             overlapping_adev)
from clockstab.analytic_stability import sigma_qpn
from clockstab.core import ClockSchedule
from clockstab.errors import DomainError
from clockstab.noise_model import NU0_SR
from clockstab.servo_sim import run_loop
from clockstab.spin_states import EnsembleSpec, oat_moments


def naive_overlapping_avar(y, m):
    """Direct evaluation: averages over every window of m samples."""
    means = [sum(y[i:i + m]) / m for i in range(len(y) - m + 1)]
    diffs = [(means[i + m] - means[i]) ** 2 for i in range(len(means) - m)]
    return sum(diffs) / (2 * len(diffs))


def test_constant_trace_has_zero_deviation():
    s = overlapping_adev(np.full(1000, 3e-16), 1.0, [1, 2, 8, 64])
    assert np.all(s.adev == 0)


def test_white_fm_closed_form():
    rng = np.random.default_rng(0)
    sigma0, tau0 = 2e-16, 1.5
    y = sigma0 * rng.standard_normal(100_000)
    s = overlapping_adev(y, tau0, tau0 * np.array([1, 4, 16, 64, 256]))
    assert np.allclose(s.adev, sigma0 * np.sqrt(tau0 / s.taus), rtol=0.05)


def test_alternating_trace_hand_evaluated():
    # y = +a, -a, +a, -a: both differences at m = 1 are 2a, so sigma^2 = (2a)^2 / 2
    a = 1e-15
    s = overlapping_adev([a, -a, a, -a], 1.0, [1])
    assert s.adev[0] == pytest.approx(math.sqrt(2) * a, rel=1e-12)


@given(arrays(np.float64, st.integers(3, 40), elements=st.floats(-1, 1)))
def test_m1_equals_non_overlapping_two_sample(y):
    s = overlapping_adev(y, 1.0, [1])
    d = np.diff(y)
    assert s.adev[0] ** 2 == pytest.approx(np.mean(d * d) / 2, rel=1e-9, abs=1e-12)


@given(arrays(np.float64, st.integers(6, 60), elements=st.floats(-1, 1)), st.integers(1, 5))
def test_matches_direct_window_average(y, m):
    if len(y) < 3 * m:
        return
    s = overlapping_adev(y, 1.0, [m])
    assert s.adev[0] ** 2 == pytest.approx(naive_overlapping_avar(list(y), m), rel=1e-7, abs=1e-12)


def test_insufficient_data_omitted_with_warning():
    with pytest.warns(UserWarning):
        s = overlapping_adev(np.ones(10), 1.0, [1, 2, 4])
    assert list(s.taus) == [1.0, 2.0]


def test_octave_taus_leave_three_samples():
    t = octave_taus(100, 2.0)
    assert t[0] == 2.0 and t[-1] / 2.0 * 3 <= 100


def test_fit_prefactor_exact_series():
    taus = np.geomspace(1e3, 1e5, 9)
    s = AllanSeries(taus, 3.3e-17 / np.sqrt(taus), np.ones(9, dtype=int))
    assert fit_prefactor(s, (1e3, 1e5)) == pytest.approx(3.3e-17, rel=1e-12)


def test_fit_needs_three_points():
    s = AllanSeries(np.array([1.0, 2.0, 4.0]), np.ones(3), np.ones(3, dtype=int))
    with pytest.raises(DomainError):
        fit_prefactor(s, (1.5, 4.0))


def test_prefactor_invariant_under_window_start_white():
    rng = np.random.default_rng(1)
    y = 1e-16 * rng.standard_normal(1_000_000)
    s = overlapping_adev(y, 1.0, np.unique(np.geomspace(1e3, 1e5, 30).astype(int)))
    a = fit_prefactor(s, (1e3, 1e5))
    b = fit_prefactor(s, (2e3, 1e5))
    assert b == pytest.approx(a, rel=0.01)


def test_qpn_only_simulation_matches_projection_noise():
    schedule = ClockSchedule(1.0, 0.0)
    r = run_loop(None, schedule, EnsembleSpec(1000), n_cycles=200_000, seed=2)
    expected = sigma_qpn(oat_moments(EnsembleSpec(1000)), schedule, NU0_SR)
    assert r.prefactor_sigma1s == pytest.approx(expected, rel=0.05)


def test_prefactor_stable_to_window_start_in_simulation(cl):
    r = run_loop(cl, ClockSchedule(1.0, 0.5), EnsembleSpec(1000), n_cycles=200_000, seed=3)
    t_c = 1.5
    taus = np.unique(np.rint(np.geomspace(5e3, 2e4, 12)) * t_c)
    s = overlapping_adev(r.stabilized_freq_trace, t_c, taus)
    a = fit_prefactor(s, (5e3 * t_c, 2e4 * t_c))
    b = fit_prefactor(s, (1e4 * t_c, 2e4 * t_c))
    assert b == pytest.approx(a, rel=0.03)


def test_default_window_and_fit_taus():
    lo, hi = default_fit_window(800_000, 1.5)
    assert (lo, hi) == (1500.0, 120_000.0)
    t = fit_taus(800_000, 1.5)
    assert t[0] == pytest.approx(lo) and t[-1] == pytest.approx(hi) and len(t) == 12


def test_series_csv(tmp_path):
    s = AllanSeries(np.array([1.0, 2.0]), np.array([1e-16, 7e-17]), np.array([9, 7]))
    p = tmp_path / "a.csv"
    s.to_csv(p, header_comment="seed 3")
    lines = p.read_text().splitlines()
    assert lines[0] == "# seed 3" and lines[1] == "tau,adev,n"
    assert float(lines[3].split(",")[1]) == 7e-17


def test_series_rejects_unsorted_taus():
    with pytest.raises(DomainError):
        AllanSeries(np.array([2.0, 1.0]), np.ones(2), np.ones(2, dtype=int))
