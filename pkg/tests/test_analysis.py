import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dtcsim.analysis import (
    N1E_CAP,
    AnalysisError,
    CorrelationSeries,
    coherence,
    even_odd_window_average,
    fit_exponential_decay,
    fourier_spectrum,
    order_parameter,
    two_point_correlation,
    windowed_magnitude,
)
from dtcsim.engine import FloquetProtocol, TrajectoryRecord, prepare_product_state, run_floquet
from dtcsim.model import ProductState


def _record(sz, sx=None, sy=None):
    n = np.arange(len(sz))
    return TrajectoryRecord(n, np.asarray(sz, float), sx, sy, FloquetProtocol(0, 0, len(sz) - 1), None, "")


def series(values):
    values = np.asarray(values, dtype=float)
    return CorrelationSeries(np.arange(values.size), values)


# ---------------------------------------------------------------- correlation & coherence


def test_two_point_correlation_small_example():
    tr = _record([[1, -1], [-1, 1], [0.5, 0.5]])
    chi = two_point_correlation(tr)
    assert np.allclose(chi.values, [1.0, -1.0, 0.0])


def test_two_point_correlation_needs_cycle_zero():
    tr = _record([[1.0], [1.0]])
    tr.cycles = np.array([1, 2])
    with pytest.raises(AnalysisError):
        two_point_correlation(tr)


def test_coherence_small_example():
    sx = np.array([[0.6, 0.0]])
    sy = np.array([[0.8, 0.0]])
    assert coherence(_record([[0, 0]], sx, sy)) == pytest.approx([0.5])
    with pytest.raises(AnalysisError):
        coherence(_record([[0, 0]]))


@settings(max_examples=30, deadline=None)
@given(st.floats(0, 2 * math.pi))
def test_coherence_invariant_under_global_z_rotation(phi):
    rng = np.random.default_rng(1)
    sx, sy = rng.uniform(-0.7, 0.7, (2, 5, 3))
    c, s = math.cos(phi), math.sin(phi)
    a = coherence(_record(np.zeros((5, 3)), sx, sy))
    b = coherence(_record(np.zeros((5, 3)), c * sx - s * sy, s * sx + c * sy))
    assert np.allclose(a, b, atol=1e-12)


# ---------------------------------------------------------------- spectrum


def test_alternating_series_peaks_at_half():
    spec = fourier_spectrum((-1.0) ** np.arange(101))
    assert spec.peak_frequency == 0.5
    assert spec.peak_height == pytest.approx(1.0, abs=0.02)


def test_alternating_even_length_is_exact():
    spec = fourier_spectrum((-1.0) ** np.arange(100))
    assert spec.peak_frequency == 0.5
    assert spec.peak_height == pytest.approx(1.0, abs=1e-12)


def test_pure_tone_amplitude():
    n = np.arange(200)
    spec = fourier_spectrum(0.7 * np.cos(2 * math.pi * 0.25 * n))
    assert spec.peak_frequency == 0.25
    assert spec.peak_height == pytest.approx(0.7, abs=1e-12)


def test_hann_window_keeps_peak_location():
    n = np.arange(101)
    spec = fourier_spectrum(0.5 * (-1.0) ** n, window="hann")
    # the Nyquist line leaks into its doubled one-sided neighbour
    assert abs(spec.peak_frequency - 0.5) <= spec.bin_width * (1 + 1e-9)
    assert spec.magnitude[-1] == pytest.approx(0.5, abs=1e-12)
    with pytest.raises(AnalysisError):
        fourier_spectrum(n, window="kaiser")


@pytest.mark.parametrize("M", [16, 17, 101])
def test_parseval(M):
    x = np.random.default_rng(M).normal(size=M)
    spec = fourier_spectrum(x)
    assert spec.power.sum() == pytest.approx(np.sum(x**2), rel=1e-10)


def test_frequency_grid_includes_half():
    spec = fourier_spectrum(np.ones(101))
    assert spec.frequencies[-1] == 0.5
    assert spec.bin_width == pytest.approx(1 / 102)


def test_white_noise_has_no_spurious_peak():
    # 1000-trial calibration: the largest peak of U[-0.1, 0.1] noise over 101 samples
    rng = np.random.default_rng(0)
    heights = [fourier_spectrum(rng.uniform(-0.1, 0.1, 101)).peak_height for _ in range(1000)]
    assert max(heights) < 0.15


def test_spectrum_rejects_short_series():
    with pytest.raises(AnalysisError):
        fourier_spectrum([1.0, 2.0, 3.0])


# ---------------------------------------------------------------- even/odd windows


def test_even_odd_windows_of_alternating_series():
    starts, ev, od = even_odd_window_average((-1.0) ** np.arange(101), 10)
    assert starts.tolist() == list(range(0, 91, 10))
    assert np.allclose(ev, 1.0) and np.allclose(od, -1.0)


def test_even_odd_windows_of_constant_series():
    starts, ev, od = even_odd_window_average(np.full(50, 0.3), 10, stride=5)
    assert starts.tolist() == list(range(0, 40, 5))
    assert np.allclose(ev, 0.3) and np.allclose(od, 0.3)


def test_windowed_magnitude_of_decaying_alternation():
    n = np.arange(801)
    x = 0.5 * (-1.0) ** n * np.exp(-n / 100)
    starts, mag = windowed_magnitude(CorrelationSeries(n, x), 10)
    # window mean of a slowly varying envelope is within a few percent of its start value
    for N, m in zip(starts, mag):
        inside = np.arange(N, N + 11)
        assert m == pytest.approx(np.mean(0.5 * np.exp(-inside / 100)), rel=0.01)
        assert m == pytest.approx(0.5 * math.exp(-N / 100), rel=0.05)


def test_even_odd_window_needs_enough_samples():
    with pytest.raises(AnalysisError):
        even_odd_window_average(np.ones(5), 10)
    with pytest.raises(AnalysisError):
        even_odd_window_average(np.ones(50), 0)


def test_even_odd_with_explicit_cycles():
    cycles = np.arange(100, 121)
    starts, ev, od = even_odd_window_average((-1.0) ** cycles, 10, cycles=cycles)
    assert starts.tolist() == [100, 110]
    assert np.allclose(ev, 1.0) and np.allclose(od, -1.0)


# ---------------------------------------------------------------- decay fit


def test_decay_fit_recovers_exact_samples():
    n = np.arange(0, 800, 10, dtype=float)
    fit = fit_exponential_decay(n, 0.76 * np.exp(-n / 472))
    assert fit.A == pytest.approx(0.76, rel=1e-6)
    assert fit.N_1e == pytest.approx(472, rel=1e-6)
    assert not fit.diverged


def test_decay_fit_fixed_point():
    # fitting the fitted curve returns the same parameters
    rng = np.random.default_rng(3)
    n = np.arange(0, 500, 10, dtype=float)
    y = 0.8 * np.exp(-n / 200) * (1 + 0.05 * rng.standard_normal(n.size))
    first = fit_exponential_decay(n, y)
    again = fit_exponential_decay(n, first.A * np.exp(-n / first.N_1e))
    assert again.A == pytest.approx(first.A, rel=1e-9)
    assert again.N_1e == pytest.approx(first.N_1e, rel=1e-9)


def test_decay_fit_constant_series_diverges():
    n = np.arange(0, 100, 10, dtype=float)
    fit = fit_exponential_decay(n, np.full(n.size, 0.5))
    assert fit.diverged and fit.N_1e == N1E_CAP
    assert fit.A == pytest.approx(0.5)


def test_decay_fit_input_validation():
    with pytest.raises(AnalysisError):
        fit_exponential_decay([0, 1], [1.0, 0.5])
    with pytest.raises(AnalysisError):
        fit_exponential_decay([0, 1, 2], [1.0, 0.0, 0.5])


def _grid_decay(n, y):
    """Brute-force least squares: scan the rate, solve A in closed form."""
    best = None
    for k in np.linspace(1e-4, 2e-2, 20000):
        e = np.exp(-k * n)
        A = (y @ e) / (e @ e)
        r = np.sum((y - A * e) ** 2)
        if best is None or r < best[0]:
            best = (r, A, k)
    return best[1], 1 / best[2]


def test_decay_fit_noisy_agrees_with_grid_oracle_and_error_bars():
    rng = np.random.default_rng(8)
    n = np.arange(0, 800, 10, dtype=float)
    truth = 0.76 * np.exp(-n / 472)
    sigma = 0.01
    estimates, stderrs = [], []
    for trial in range(1000):
        y = truth + sigma * rng.standard_normal(n.size)
        fit = fit_exponential_decay(n, y)
        estimates.append(fit.N_1e)
        stderrs.append(fit.stderr[1])
        if trial < 5:
            A_g, N_g = _grid_decay(n, y)
            assert fit.A == pytest.approx(A_g, rel=1e-3)
            assert fit.N_1e == pytest.approx(N_g, rel=2e-3)
    estimates = np.array(estimates)
    # reported standard errors describe the scatter, and the estimate is unbiased
    assert np.std(estimates) == pytest.approx(np.median(stderrs), rel=0.15)
    assert abs(estimates.mean() - 472) < 3 * np.std(estimates) / math.sqrt(estimates.size) + 1.0


# ---------------------------------------------------------------- order parameter


def test_order_parameter_examples():
    n = np.arange(101)
    assert order_parameter(series((-1.0) ** n)) == pytest.approx(1.0)
    assert order_parameter(series(0.5 * (-1.0) ** n)) == pytest.approx(1.0)
    assert order_parameter(series(0.5 * (-1.0) ** n), normalize=False) == pytest.approx(0.5)
    assert order_parameter(series(np.ones(101))) < 0.02
    assert order_parameter(series(np.zeros(101))) == 0.0


def test_order_parameter_needs_consecutive_cycles():
    with pytest.raises(AnalysisError):
        order_parameter(series(np.ones(20)))
    with pytest.raises(AnalysisError):
        order_parameter(CorrelationSeries(np.arange(0, 200, 2), np.ones(100)))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=32, max_size=120))
def test_order_parameter_is_bounded(values):
    assert 0.0 <= order_parameter(series(values)) <= 1.0


def test_order_parameter_of_real_trajectory(chain9):
    tr = run_floquet(prepare_product_state(ProductState.from_bitstring("0" * 9)), chain9,
                     FloquetProtocol(5e-3, math.pi, 64))
    assert order_parameter(two_point_correlation(tr)) == pytest.approx(1.0, abs=1e-9)
