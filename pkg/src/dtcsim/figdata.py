"""Per-panel CSV files (one per figure panel) for external plotting tools.

Column contracts:

- ``fig1d.csv``: ``d, mean_abs_J_hz, fit_J_hz``
- ``fig2b.csv``: ``t_ms, site, sx_interacting, sx_free``
- ``fig3a.csv``: ``theta_pi, tau_ms, order_parameter, peak_frequency``
- ``fig3b.csv``/``fig4b.csv``: ``N, chi_mean, chi_stderr``
- ``fig3c.csv``/``fig4c.csv``: ``f, magnitude``
- ``fig3de.csv``/``fig4a.csv``: ``site, cycle, sz``
- ``fig3fg.csv``: ``N, chi_mean, coherence``
- ``fig4d.csv``: ``label, N, even_mean, odd_mean``
- ``fig4e.csv``: ``index, bitstring, energy_density, measured``
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Sequence

import numpy as np

from .experiments import DTCPointResult, IsolationResult, ScanResult, SweepEntry, TomographyResult
from .model import PowerLawFit, SpinSystem, all_energy_densities
from .records import Manifest, write_csv


def _emit(manifest: Manifest, name: str, header, rows) -> Path:
    return manifest.add(write_csv(manifest.out_dir / name, header, rows))


def emit_coupling_profile(manifest: Manifest, means: Sequence[tuple[int, float]], fit: PowerLawFit, name="fig1d.csv"):
    rows = ((d, m, fit.J0 / d**fit.alpha) for d, m in means)
    return _emit(manifest, name, ["d", "mean_abs_J_hz", "fit_J_hz"], rows)


def emit_isolation(manifest: Manifest, res: IsolationResult, name="fig2b.csv"):
    def rows():
        for r, t in enumerate(res.time_s):
            for j in range(res.sx_interacting.shape[1]):
                yield t * 1e3, j, res.sx_interacting[r, j], res.sx_free[r, j]

    return _emit(manifest, name, ["t_ms", "site", "sx_interacting", "sx_free"], rows())


def emit_scan(manifest: Manifest, scan: ScanResult, name="fig3a.csv"):
    rows = ((th / math.pi, tau * 1e3, op, pf) for th, tau, op, pf in scan.rows())
    return _emit(manifest, name, ["theta_pi", "tau_ms", "order_parameter", "peak_frequency"], rows)


def emit_correlation(manifest: Manifest, point: DTCPointResult, name="fig3b.csv"):
    rows = zip(point.cycles, point.chi_mean, point.chi_stderr)
    return _emit(manifest, name, ["N", "chi_mean", "chi_stderr"], rows)


def emit_spectrum(manifest: Manifest, point: DTCPointResult, name="fig3c.csv"):
    if point.spectrum is None:
        raise ValueError("no spectrum available (cycles were not recorded consecutively)")
    rows = zip(point.spectrum.frequencies, point.spectrum.magnitude)
    return _emit(manifest, name, ["f", "magnitude"], rows)


def emit_site_map(manifest: Manifest, point: DTCPointResult, name="fig3de.csv"):
    def rows():
        for j in range(point.sz_mean.shape[1]):
            for r, n in enumerate(point.cycles):
                yield j, n, point.sz_mean[r, j]

    return _emit(manifest, name, ["site", "cycle", "sz"], rows())


def emit_tomography(manifest: Manifest, tomo: TomographyResult, name="fig3fg.csv"):
    rows = zip(tomo.point.cycles, tomo.chi, tomo.coherence)
    return _emit(manifest, name, ["N", "chi_mean", "coherence"], rows)


def emit_sweep(manifest: Manifest, entries: Sequence[SweepEntry], name="fig4d.csv"):
    def rows():
        for e in entries:
            for N, ev, od in zip(e.starts, e.even, e.odd):
                yield e.label, N, ev, od

    return _emit(manifest, name, ["label", "N", "even_mean", "odd_mean"], rows())


def emit_energy_landscape(manifest: Manifest, system: SpinSystem, J0: float, measured: Sequence[str], name="fig4e.csv"):
    eps = all_energy_densities(system, J0)
    L = system.L
    measured = set(measured)

    def rows():
        for b, e in enumerate(eps):
            bits = "".join(str((b >> j) & 1) for j in range(L))
            yield b, bits, e, bits in measured

    return _emit(manifest, name, ["index", "bitstring", "energy_density", "measured"], rows())


def emit_fits(manifest: Manifest, entries: Sequence[SweepEntry], name="fits.csv"):
    def rows():
        for e in entries:
            if e.fit is None:
                yield e.label, e.energy_density, None, None, None, None, None
            else:
                sa, sn = e.fit.stderr
                yield e.label, e.energy_density, e.fit.A, e.fit.N_1e, sa, sn, e.fit.diverged

    header = ["label", "energy_density", "A", "N_1e", "A_stderr", "N_1e_stderr", "diverged"]
    return _emit(manifest, name, header, rows())


def emit_spectrum_table(manifest: Manifest, freqs: np.ndarray, magnitude: np.ndarray, power: np.ndarray,
                        name="spectrum.csv"):
    return _emit(manifest, name, ["f", "magnitude", "power"], zip(freqs, magnitude, power))
