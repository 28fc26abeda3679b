"""Figure-level protocols built on the engine: DTC points, scans, sweeps, long runs.

Noise seeds are derived from a master seed with a counter-based split,
``SeedSequence(master_seed, spawn_key=(..., shot))``, so every ensemble member
is reproducible on its own and cells can be evaluated in any order.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.optimize import brentq

from .analysis import (
    AnalysisError,
    CorrelationSeries,
    DecayFit,
    SpectralResult,
    even_odd_window_average,
    fit_exponential_decay,
    fourier_spectrum,
    order_parameter,
    windowed_magnitude,
)
from .config import StatesConfig, SystemConfig
from .engine import FloquetProtocol, prepare_product_state, run_floquet
from .model import (
    ProductState,
    SpinSystem,
    energy_density,
    mean_abs_coupling_by_distance,
    neel,
    polarized,
    resonance_gap,
    sample_disordered_chain,
)


class BudgetExceeded(RuntimeError):
    def __init__(self, estimate: float, budget: float):
        self.estimate = estimate
        self.budget = budget
        super().__init__(
            f"estimated {estimate:.3g} amplitude updates exceeds the budget of {budget:.3g}"
        )


def shot_seed(master_seed: int, *key: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(master_seed, spawn_key=tuple(int(k) for k in key))


def _map(fn: Callable, tasks: Sequence, workers: int = 1) -> list:
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks))


def estimate_cost(cells: int, shots: int, cycles: int, L: int) -> float:
    """Amplitude updates: cells x shots x cycles x 2**L."""
    return float(cells) * shots * cycles * 2.0**L


# ---------------------------------------------------------------- systems & states


def screen_seed(cfg: SystemConfig, realization: int = 0) -> int:
    """Seed with the largest resonance gap among the configured screening window."""
    if cfg.screen_seeds <= 0:
        return cfg.seed + realization
    start = cfg.seed + realization * cfg.screen_seeds
    best_seed, best_gap = start, -1.0
    for seed in range(start, start + cfg.screen_seeds):
        gap = resonance_gap(
            sample_disordered_chain(seed, cfg.L, cfg.J0_hz, cfg.alpha, cfg.disorder_strength,
                                    0.0, cfg.sign_probability)
        )
        if gap > best_gap:
            best_seed, best_gap = seed, gap
    return best_seed


def build_system(cfg: SystemConfig, realization: int = 0) -> SpinSystem:
    if cfg.source == "explicit":
        return SpinSystem.from_dict(cfg.explicit)
    if cfg.source == "file":
        with open(cfg.path) as fh:
            return SpinSystem.loads(fh.read())
    seed = screen_seed(cfg, realization)
    return sample_disordered_chain(
        seed, cfg.L, cfg.J0_hz, cfg.alpha, cfg.disorder_strength, cfg.h_scale_hz,
        cfg.sign_probability, cfg.B_hz,
    )


def clean_counterpart(cfg: SystemConfig) -> SpinSystem:
    """Disorder-free chain with the same distance-averaged couplings and h = 0."""
    return sample_disordered_chain(0, cfg.L, cfg.J0_hz, cfg.alpha, 0.0, 0.0, 1.0, cfg.B_hz)


def resolve_states(cfg: StatesConfig, L: int) -> list[tuple[str, ProductState]]:
    out: list[tuple[str, ProductState]] = []
    seen: set[str] = set()
    for entry in cfg.bitstrings:
        name = entry.strip().lower()
        bits = polarized(L) if name == "polarized" else neel(L) if name == "neel" else entry
        state = ProductState.from_bitstring(bits)
        if state.L != L:
            raise ValueError(f"initial state {entry!r} has {state.L} sites, chain has {L}")
        label = state.label()
        if label not in seen:
            seen.add(label)
            out.append((label, state))
    if cfg.all_bitstrings:
        for b in range(2**L):
            label = "".join(str((b >> j) & 1) for j in range(L))
            if label not in seen:
                seen.add(label)
                out.append((label, ProductState.from_bitstring(label)))
    rng = np.random.default_rng(cfg.random_seed)
    added = 0
    while added < cfg.random_count:
        if len(seen) >= 2**L:
            raise ValueError("random_count exceeds the number of distinct bitstrings")
        label = "".join(str(b) for b in rng.integers(0, 2, L))
        if label in seen:
            continue
        seen.add(label)
        out.append((label, ProductState.from_bitstring(label)))
        added += 1
    for p in cfg.tilted_polar_pi:
        out.append((f"tilted_{p!r}pi", ProductState.tilted(L, p * math.pi)))
    return out


def average_nn_coupling(system: SpinSystem) -> float:
    return mean_abs_coupling_by_distance(system)[0][1]


# ---------------------------------------------------------------- DTC point


@dataclass
class DTCPointResult:
    label: str
    cycles: np.ndarray
    chi_mean: np.ndarray
    chi_stderr: np.ndarray
    sz_mean: np.ndarray
    sx_mean: np.ndarray | None
    sy_mean: np.ndarray | None
    spectrum: SpectralResult | None
    order_parameter: float | None
    shots: int
    protocol: FloquetProtocol

    @property
    def series(self) -> CorrelationSeries:
        return CorrelationSeries(self.cycles, self.chi_mean)

    @property
    def coherence(self) -> np.ndarray | None:
        """C from the shot-averaged transverse expectations."""
        if self.sx_mean is None:
            return None
        return np.mean(np.hypot(self.sx_mean, self.sy_mean), axis=1)


def _one_shot(task):
    system, state, protocol, seed, record = task
    tr = run_floquet(prepare_product_state(state), system, protocol, seed=seed, record_cycles=record)
    chi = tr.sz @ tr.sz[0] / tr.L
    return tr.cycles, chi, tr.sz, tr.sx, tr.sy


def run_dtc_point(
    system: SpinSystem,
    state: ProductState,
    protocol: FloquetProtocol,
    shots: int = 1,
    master_seed: int = 0,
    key: Sequence[int] = (),
    workers: int = 1,
    label: str | None = None,
    record_cycles: Iterable[int] | None = None,
) -> DTCPointResult:
    """Shot-averaged chi (mean and standard error), per-site <sz> map and spectrum."""
    if shots < 1:
        raise ValueError("shots must be >= 1")
    record = None if record_cycles is None else list(record_cycles)
    n_runs = 1 if protocol.is_noiseless else shots
    tasks = [(system, state, protocol, shot_seed(master_seed, *key, s), record) for s in range(n_runs)]
    results = _map(_one_shot, tasks, workers)
    cycles = results[0][0]
    chis = np.stack([r[1] for r in results])
    chi_mean = chis.mean(axis=0)
    # a noiseless ensemble is one run repeated, with zero spread
    chi_stderr = chis.std(axis=0, ddof=1) / math.sqrt(n_runs) if n_runs > 1 else np.zeros_like(chi_mean)
    sz = np.mean([r[2] for r in results], axis=0)
    sx = np.mean([r[3] for r in results], axis=0) if protocol.record_xy else None
    sy = np.mean([r[4] for r in results], axis=0) if protocol.record_xy else None
    series = CorrelationSeries(cycles, chi_mean)
    consecutive = np.array_equal(cycles, np.arange(cycles.size))
    spectrum = fourier_spectrum(series) if consecutive and cycles.size >= 4 else None
    try:
        op = order_parameter(series)
    except AnalysisError:
        op = None
    return DTCPointResult(
        label=label or state.label(),
        cycles=cycles,
        chi_mean=chi_mean,
        chi_stderr=chi_stderr,
        sz_mean=sz,
        sx_mean=sx,
        sy_mean=sy,
        spectrum=spectrum,
        order_parameter=op,
        shots=shots,
        protocol=protocol,
    )


# ---------------------------------------------------------------- phase scan


@dataclass
class ScanResult:
    thetas: np.ndarray
    taus: np.ndarray
    order: np.ndarray  # (n_theta, n_tau)
    peak_frequency: np.ndarray
    monotone_in_tau: list[bool]
    rising_with_tau: list[bool]
    master_seed: int
    shots: int

    def rows(self):
        for i, th in enumerate(self.thetas):
            for k, tau in enumerate(self.taus):
                yield th, tau, self.order[i, k], self.peak_frequency[i, k]


def _scan_cell(task):
    system, state, protocol, shots, master_seed, key = task
    res = run_dtc_point(system, state, protocol, shots, master_seed, key)
    peak = res.spectrum.peak_frequency if res.spectrum is not None else math.nan
    return res.order_parameter, peak


def phase_scan(
    system: SpinSystem,
    state: ProductState,
    thetas: Sequence[float],
    taus: Sequence[float],
    base: FloquetProtocol,
    shots: int = 1,
    master_seed: int = 0,
    max_amplitude_updates: float = math.inf,
    workers: int = 1,
) -> ScanResult:
    """Order parameter on the (theta, tau) grid.

    Each cell draws its noise from ``(master_seed, i_theta, i_tau, shot)`` so
    the values do not depend on evaluation order.
    """
    thetas = np.asarray(thetas, dtype=float)
    taus = np.asarray(taus, dtype=float)
    cost = estimate_cost(thetas.size * taus.size, shots, base.cycles, system.L)
    if cost > max_amplitude_updates:
        raise BudgetExceeded(cost, max_amplitude_updates)
    tasks = [
        (system, state, replace(base, theta=float(th), tau=float(tau)), shots, master_seed, (i, k))
        for i, th in enumerate(thetas)
        for k, tau in enumerate(taus)
    ]
    out = _map(_scan_cell, tasks, workers)
    order = np.array([o[0] for o in out], dtype=float).reshape(thetas.size, taus.size)
    peaks = np.array([o[1] for o in out], dtype=float).reshape(thetas.size, taus.size)
    idx = np.argsort(taus)
    monotone = [bool(np.all(np.diff(row[idx]) >= 0)) for row in order]
    rising = [bool(row[idx][-1] > row[idx][0]) for row in order]
    return ScanResult(thetas, taus, order, peaks, monotone, rising, master_seed, shots)


# ---------------------------------------------------------------- initial-state sweep


@dataclass
class SweepEntry:
    label: str
    state: ProductState
    energy_density: float | None
    point: DTCPointResult
    starts: np.ndarray
    even: np.ndarray
    odd: np.ndarray
    fit: DecayFit | None

    @property
    def magnitude(self) -> np.ndarray:
        return 0.5 * (self.even - self.odd)


def _fit_windows(starts: np.ndarray, magnitude: np.ndarray) -> DecayFit | None:
    keep = magnitude > 0
    if keep.sum() < 3:
        return None
    try:
        return fit_exponential_decay(starts[keep], magnitude[keep])
    except AnalysisError:
        return None


def initial_state_sweep(
    system: SpinSystem,
    states: Sequence[tuple[str, ProductState]],
    protocol: FloquetProtocol,
    J0: float | None = None,
    shots: int = 1,
    master_seed: int = 0,
    window_width: int = 10,
    workers: int = 1,
) -> list[SweepEntry]:
    """Trajectory, even/odd windows, decay fit and energy density per state, sorted by energy.

    Non-positive windowed magnitudes (fully decayed, noise-dominated) are left
    out of the fit. ``J0`` defaults to the mean nearest-neighbour |J|.
    """
    J0 = average_nn_coupling(system) if J0 is None else J0
    entries = []
    for idx, (label, state) in enumerate(states):
        point = run_dtc_point(system, state, protocol, shots, master_seed, (idx,), workers, label)
        starts, ev, od = even_odd_window_average(point.series, window_width)
        fit = _fit_windows(starts, 0.5 * (ev - od))
        eps = energy_density(system, state, J0) if state.is_bitstring else None
        entries.append(SweepEntry(label, state, eps, point, starts, ev, od, fit))
    entries.sort(key=lambda e: (math.inf if e.energy_density is None else e.energy_density, e.label))
    return entries


def decay_constant(
    system: SpinSystem,
    state: ProductState,
    protocol: FloquetProtocol,
    shots: int,
    master_seed: int = 0,
    window_width: int = 10,
    workers: int = 1,
) -> DecayFit | None:
    point = run_dtc_point(system, state, protocol, shots, master_seed, (0,), workers)
    return _fit_windows(*windowed_magnitude(point.series, window_width))


def calibrate_dephasing(
    system: SpinSystem,
    state: ProductState,
    protocol: FloquetProtocol,
    target_n1e: float,
    shots: int = 16,
    master_seed: int = 0,
    window_width: int = 10,
    bracket: tuple[float, float] = (0.01, 20.0),
    rtol: float = 1e-3,
    workers: int = 1,
) -> tuple[float, DecayFit]:
    """Dephasing rate (Hz) for which ``state`` decays with ``N_1e == target_n1e``.

    Root-finds on log(rate) with common random numbers across evaluations,
    so the objective is a deterministic function of the rate.
    """

    def n1e(rate: float) -> float:
        fit = decay_constant(system, state, replace(protocol, dephasing_rate=rate),
                             shots, master_seed, window_width, workers)
        if fit is None:
            return 1.0  # fully decayed
        return fit.N_1e

    def objective(log_rate: float) -> float:
        return math.log(n1e(math.exp(log_rate))) - math.log(target_n1e)

    lo, hi = (math.log(b) for b in bracket)
    f_lo, f_hi = objective(lo), objective(hi)
    if f_lo * f_hi > 0:
        raise ValueError(
            f"target N_1e={target_n1e} not bracketed by dephasing rates {bracket} "
            f"(N_1e spans {math.exp(f_lo) * target_n1e:.4g} .. {math.exp(f_hi) * target_n1e:.4g})"
        )
    log_rate = brentq(objective, lo, hi, xtol=rtol)
    rate = math.exp(log_rate)
    fit = decay_constant(system, state, replace(protocol, dephasing_rate=rate),
                         shots, master_seed, window_width, workers)
    return rate, fit


# ---------------------------------------------------------------- long-time stability


def window_split(series: CorrelationSeries, end: int, width: int) -> float:
    """Mean chi over even minus mean over odd cycles in [end - width, end]."""
    n, x = series.cycles, series.values
    sel = (n >= end - width) & (n <= end)
    ev, od = sel & (n % 2 == 0), sel & (n % 2 == 1)
    if not ev.any() or not od.any():
        raise AnalysisError(f"no even/odd samples recorded in [{end - width}, {end}]")
    return float(x[ev].mean() - x[od].mean())


def longtime_schedule(cycles: int, record_every: int, final_window: int, reference_cycle: int) -> list[int]:
    sched = {0, cycles}
    sched.update(range(record_every, cycles + 1, record_every))
    sched.update(range(max(reference_cycle - final_window, 0), reference_cycle + 1))
    sched.update(range(max(cycles - final_window, 0), cycles + 1))
    return sorted(sched)


@dataclass
class LongtimeRow:
    label: str
    split_reference: float
    split_final: float
    min_coarse_abs_chi: float
    passed: bool


@dataclass
class LongtimeResult:
    cycles: int
    reference_cycle: int
    min_split: float
    rows: list[LongtimeRow]
    series: dict[str, CorrelationSeries] = field(repr=False, default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    @property
    def min_final_split(self) -> float:
        return min(r.split_final for r in self.rows)


def _longtime_one(task):
    system, label, state, protocol, schedule = task
    tr = run_floquet(prepare_product_state(state), system, protocol, record_cycles=schedule)
    return label, CorrelationSeries(tr.cycles, tr.sz @ tr.sz[0] / tr.L)


def mbl_longtime_check(
    system: SpinSystem,
    states: Sequence[tuple[str, ProductState]],
    protocol: FloquetProtocol,
    cycles: int = 1_000_000,
    record_every: int = 1000,
    final_window: int = 20,
    reference_cycle: int = 1000,
    min_split: float = 0.5,
    workers: int = 1,
) -> LongtimeResult:
    """Noiseless run to ``cycles``; each state must keep its even/odd split.

    A state passes when its final-window split exceeds both ``min_split`` and
    half of its split at ``reference_cycle``.
    """
    if not protocol.is_noiseless:
        raise ValueError("the long-time check is defined for the noiseless protocol")
    schedule = longtime_schedule(cycles, record_every, final_window, reference_cycle)
    proto = replace(protocol, cycles=cycles, record_xy=False)
    tasks = [(system, label, state, proto, schedule) for label, state in states]
    rows, series = [], {}
    for label, chi in _map(_longtime_one, tasks, workers):
        ref = window_split(chi, reference_cycle, final_window)
        fin = window_split(chi, cycles, final_window)
        coarse = chi.values[(chi.cycles % record_every == 0)]
        ok = fin > min_split and fin > 0.5 * ref
        rows.append(LongtimeRow(label, ref, fin, float(np.abs(coarse).min()), bool(ok)))
        series[label] = chi
    return LongtimeResult(cycles, reference_cycle, min_split, rows, series)


@dataclass
class DecayCheckRow:
    label: str
    min_abs_chi: float
    first_below: int | None


def clean_chain_check(
    system: SpinSystem,
    protocol: FloquetProtocol,
    states: Sequence[tuple[str, ProductState]] | None = None,
    threshold: float = 0.1,
    window_width: int = 10,
) -> list[DecayCheckRow]:
    """Windowed |chi| per state over ``protocol.cycles``; ``states=None`` means every bitstring."""
    if states is None:
        L = system.L
        states = [
            (lab, ProductState.from_bitstring(lab))
            for lab in ("".join(str((b >> j) & 1) for j in range(L)) for b in range(2**L))
        ]
    rows = []
    for label, state in states:
        tr = run_floquet(prepare_product_state(state), system, protocol)
        series = CorrelationSeries(tr.cycles, tr.sz @ tr.sz[0] / tr.L)
        starts, mag = windowed_magnitude(series, window_width)
        mag = np.abs(mag)
        below = np.flatnonzero(mag < threshold)
        rows.append(DecayCheckRow(label, float(mag.min()), int(starts[below[0]]) if below.size else None))
    return rows


# ---------------------------------------------------------------- isolation & tomography


@dataclass
class IsolationResult:
    cycles: np.ndarray
    time_s: np.ndarray
    sx_interacting: np.ndarray
    sx_free: np.ndarray
    coherence_interacting: np.ndarray
    coherence_free: np.ndarray


def isolation_experiment(
    system: SpinSystem,
    tau: float,
    cycles: int,
    theta: float = math.pi,
    sites: Sequence[int] | None = None,
) -> IsolationResult:
    """|+...+> under the pi-pulse sequence with couplings on and off; t = 2 tau N."""
    sub = system if sites is None else system.subsystem(sites)
    state = prepare_product_state(ProductState.plus(sub.L))
    on = run_floquet(state, sub, FloquetProtocol(tau, theta, cycles, record_xy=True))
    off = run_floquet(state, sub, FloquetProtocol(tau, theta, cycles, interactions_enabled=False, record_xy=True))
    return IsolationResult(
        cycles=on.cycles,
        time_s=2.0 * tau * on.cycles,
        sx_interacting=on.sx,
        sx_free=off.sx,
        coherence_interacting=np.mean(np.hypot(on.sx, on.sy), axis=1),
        coherence_free=np.mean(np.hypot(off.sx, off.sy), axis=1),
    )


@dataclass
class TomographyResult:
    point: DTCPointResult
    chi: np.ndarray
    coherence: np.ndarray
    order_parameter: float | None
    coherence_crossing: int | None  # first cycle with C below C(0)/e


def tomography_run(
    system: SpinSystem,
    protocol: FloquetProtocol,
    polar: float = math.pi / 4,
    shots: int = 1,
    master_seed: int = 0,
    workers: int = 1,
) -> TomographyResult:
    """Tilted product state with full x/y/z records: chi persists while C collapses."""
    proto = replace(protocol, record_xy=True)
    state = ProductState.tilted(system.L, polar)
    point = run_dtc_point(system, state, proto, shots, master_seed, (0,), workers, label="tilted")
    C = point.coherence
    below = np.flatnonzero(C < C[0] / math.e) if C[0] > 0 else np.array([], dtype=int)
    crossing = int(point.cycles[below[0]]) if below.size else None
    return TomographyResult(point, point.chi_mean, C, point.order_parameter, crossing)
