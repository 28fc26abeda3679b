"""Order diagnostics computed from recorded trajectories."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import OptimizeWarning, curve_fit

from .engine import TrajectoryRecord

# decay constants beyond this are reported as divergent (no measurable decay)
N1E_CAP = 1e12


class AnalysisError(ValueError):
    pass


@dataclass(frozen=True)
class CorrelationSeries:
    cycles: np.ndarray
    values: np.ndarray

    @property
    def initial(self) -> float:
        if self.cycles.size == 0 or self.cycles[0] != 0:
            raise AnalysisError("series has no cycle-0 value")
        return float(self.values[0])


@dataclass(frozen=True)
class SpectralResult:
    """One-sided amplitude spectrum on f = k / P, k = 0..P/2 (P even, zero-padded).

    ``magnitude`` is scaled so a unit tone has height 1 (including the
    f = 0.5 alternation); ``power`` holds the per-bin share of the windowed
    time-domain energy, so ``power.sum() == sum((x * w) ** 2)``.
    """

    frequencies: np.ndarray
    magnitude: np.ndarray
    power: np.ndarray
    peak_frequency: float
    peak_height: float

    @property
    def bin_width(self) -> float:
        return float(self.frequencies[1] - self.frequencies[0])


@dataclass(frozen=True)
class DecayFit:
    A: float
    N_1e: float
    covariance: np.ndarray  # over (A, N_1e)
    diverged: bool = False

    @property
    def stderr(self) -> tuple[float, float]:
        return float(math.sqrt(max(self.covariance[0, 0], 0.0))), float(
            math.sqrt(max(self.covariance[1, 1], 0.0))
        )


def two_point_correlation(trajectory: TrajectoryRecord) -> CorrelationSeries:
    """chi(n) = (1/L) sum_j <sz_j(n)> <sz_j(0)> for every recorded cycle."""
    if trajectory.cycles.size == 0 or trajectory.cycles[0] != 0:
        raise AnalysisError("trajectory lacks a cycle-0 record")
    z0 = trajectory.sz[0]
    return CorrelationSeries(trajectory.cycles.copy(), trajectory.sz @ z0 / trajectory.L)


def coherence(trajectory: TrajectoryRecord) -> np.ndarray:
    if trajectory.sx is None or trajectory.sy is None:
        raise AnalysisError("trajectory was recorded without x/y expectations")
    return np.mean(np.hypot(trajectory.sx, trajectory.sy), axis=1)


def fourier_spectrum(series: Sequence[float] | CorrelationSeries, window: str | None = None) -> SpectralResult:
    """Spectrum of ``series``; the peak is searched over f > 0.

    With a Hann window a line at f = 0.5 can leak into the neighbouring bin,
    whose one-sided weight is doubled.
    """
    x = np.asarray(series.values if isinstance(series, CorrelationSeries) else series, dtype=float)
    M = x.size
    if M < 4:
        raise AnalysisError(f"series too short for a spectrum ({M} < 4 samples)")
    if window is None or window == "none":
        w = np.ones(M)
    elif window.lower() == "hann":
        w = np.hanning(M)
    else:
        raise AnalysisError(f"unknown window {window!r}")
    P = M + (M % 2)
    X = np.fft.rfft(x * w, n=P)
    S = w.sum()
    scale = np.full(X.size, 2.0)
    scale[0] = 1.0
    scale[-1] = 1.0
    magnitude = scale * np.abs(X) / S
    power = np.abs(X) ** 2 * scale / P
    freqs = np.arange(X.size) / P
    k = 1 + int(np.argmax(magnitude[1:]))
    return SpectralResult(freqs, magnitude, power, float(freqs[k]), float(magnitude[k]))


def even_odd_window_average(
    series: Sequence[float] | CorrelationSeries,
    window_width: int = 10,
    stride: int | None = None,
    cycles: Sequence[int] | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Mean over even and over odd cycles in each window [N, N + window_width].

    Returns ``(starts, even_mean, odd_mean)``. Windows start every ``stride``
    cycles (default ``window_width``) and must fit inside the series.
    """
    if isinstance(series, CorrelationSeries):
        n, x = series.cycles, series.values
    else:
        x = np.asarray(series, dtype=float)
        n = np.arange(x.size) if cycles is None else np.asarray(cycles)
    if window_width < 1:
        raise AnalysisError("window width must be >= 1")
    stride = window_width if stride is None else stride
    if n.size == 0 or n[-1] - n[0] < window_width:
        raise AnalysisError("series is not longer than the window")
    starts, even, odd = [], [], []
    for N in range(int(n[0]), int(n[-1]) - window_width + 1, stride):
        sel = (n >= N) & (n <= N + window_width)
        ev = sel & (n % 2 == 0)
        od = sel & (n % 2 == 1)
        if not ev.any() or not od.any():
            continue
        starts.append(N)
        even.append(x[ev].mean())
        odd.append(x[od].mean())
    return np.asarray(starts), np.asarray(even), np.asarray(odd)


def windowed_magnitude(series: CorrelationSeries, window_width: int = 10, stride: int | None = None):
    """|chi| per window as (even - odd) / 2, the quantity the decay fit consumes."""
    starts, ev, od = even_odd_window_average(series, window_width, stride)
    return starts, 0.5 * (ev - od)


def _decay(n, A, k):
    return A * np.exp(-k * n)


def fit_exponential_decay(n: Sequence[float], values: Sequence[float]) -> DecayFit:
    """Fit ``A exp(-n / N_1e)``: log-linear seed, then nonlinear least squares.

    The model is refined in terms of the rate ``1/N_1e`` so zero decay is
    reachable; a non-positive rate (or N_1e above ``N1E_CAP``) is flagged as
    divergent and N_1e is reported as the cap.
    """
    n = np.asarray(n, dtype=float)
    y = np.asarray(values, dtype=float)
    if n.size != y.size or n.size < 3:
        raise AnalysisError("need at least 3 (n, value) points")
    if np.any(y <= 0) or not np.all(np.isfinite(y)):
        raise AnalysisError("decay fit needs strictly positive finite values")
    slope, intercept = np.polyfit(n, np.log(y), 1)
    p0 = (math.exp(intercept), -slope)
    try:
        with warnings.catch_warnings():
            # an undetermined covariance is handled below
            warnings.simplefilter("ignore", OptimizeWarning)
            popt, pcov = curve_fit(_decay, n, y, p0=p0, xtol=1e-14, ftol=1e-14, gtol=1e-14, maxfev=10000)
    except RuntimeError:
        popt, pcov = np.asarray(p0), np.full((2, 2), np.inf)
    A, k = float(popt[0]), float(popt[1])
    if not np.all(np.isfinite(pcov)):
        pcov = np.full((2, 2), np.inf)
    if k <= 1.0 / N1E_CAP:
        return DecayFit(A, N1E_CAP, np.array([[pcov[0, 0], np.inf], [np.inf, np.inf]]), diverged=True)
    # delta-method transform from (A, k) to (A, 1/k)
    jac = np.array([[1.0, 0.0], [0.0, -1.0 / k**2]])
    return DecayFit(A, 1.0 / k, jac @ pcov @ jac.T)


def order_parameter(series: CorrelationSeries, normalize: bool = True) -> float:
    """Height of the f = 0.5 line of chi over the second half of the run.

    With ``normalize`` the height is divided by chi(0), so any state whose
    correlation alternates perfectly scores 1. The result is clipped to [0, 1].
    """
    n, x = series.cycles, series.values
    if n.size < 32 or n[-1] < 31:
        raise AnalysisError("order parameter needs at least 32 cycles")
    if not np.array_equal(n, np.arange(n[0], n[0] + n.size)):
        raise AnalysisError("order parameter needs consecutively recorded cycles")
    tail = n >= n[-1] / 2
    xt, nt = x[tail], n[tail]
    height = abs(float(np.mean(np.where(nt % 2 == 0, xt, -xt))))
    if normalize:
        ref = abs(series.initial)
        if ref == 0.0:
            return 0.0
        height /= ref
    return float(min(max(height, 0.0), 1.0))
