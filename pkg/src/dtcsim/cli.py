"""Command-line front end.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
The output directory defaults to ``$DTCSIM_OUTPUT_DIR`` or ``./dtcsim-out``.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, experiments as ex, figdata
from .analysis import fit_exponential_decay, fourier_spectrum
from .config import ConfigError, ExperimentConfig
from .engine import FloquetProtocol, TrajectoryRecord
from .model import (
    ClusterSpec,
    dipolar_couplings,
    fit_power_law,
    mean_abs_coupling_by_distance,
    neel,
    select_chain,
)
from .records import Manifest, read_csv, write_csv, write_json, write_trajectory

log = logging.getLogger("dtcsim")

CONFIG_COMMANDS = ("simulate", "scan", "sweep-states", "isolate", "tomography", "longtime", "select-chain")
COMMANDS = CONFIG_COMMANDS + ("fit", "spectrum")
SINGLE_CELL = ("simulate", "sweep-states", "tomography", "longtime")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dtcsim", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"dtcsim {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="{" + ",".join(COMMANDS) + "}")

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required, help="JSON run configuration")
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", type=int, help="override ensemble.master_seed")
        p.add_argument("--workers", type=int, help="override the worker count")
        p.add_argument("--dry-run", action="store_true", help="print resolved config and cost, run nothing")
        p.add_argument("-v", "--verbose", action="store_true")

    for name in CONFIG_COMMANDS:
        common(sub.add_parser(name))
    p = sub.add_parser("fit", help="power-law fit of coupling statistics, or exponential decay fit")
    common(p, config_required=False)
    p.add_argument("--input", help="CSV with (d, mean) or (N, value) columns")
    p.add_argument("--kind", choices=("power-law", "decay"), default="power-law")
    p = sub.add_parser("spectrum", help="Fourier spectrum of a correlation series")
    common(p, config_required=False)
    p.add_argument("--input", required=True, help="CSV whose second column is the series")
    p.add_argument("--window", choices=("none", "hann"), default="none")
    return parser


def _output_dir(args) -> Path:
    return Path(args.out or os.environ.get("DTCSIM_OUTPUT_DIR") or "dtcsim-out")


def _load_config(args) -> ExperimentConfig:
    try:
        text = Path(args.config).read_text()
    except OSError as exc:
        raise ConfigError("<document>", f"cannot read {args.config}: {exc.strerror}") from None
    cfg = ExperimentConfig.loads(text)
    if args.seed is not None:
        cfg.ensemble.master_seed = args.seed
    if args.workers is not None:
        cfg.workers = args.workers
    return cfg.validate()


def _protocol(cfg: ExperimentConfig, theta_pi: float, tau_ms: float, **overrides) -> FloquetProtocol:
    p = cfg.protocol
    proto = FloquetProtocol(
        tau=tau_ms * 1e-3,
        theta=theta_pi * math.pi,
        cycles=p.cycles,
        rotation_noise_sigma=p.rotation_noise_pi * math.pi,
        dephasing_rate=p.dephasing_rate_hz,
        interactions_enabled=p.interactions,
        record_xy=p.record_xy,
    )
    return replace(proto, **overrides) if overrides else proto


def _single(values, field: str):
    if len(values) != 1:
        raise ConfigError(field, f"this command needs exactly one value, got {len(values)}")
    return values[0]


def _states(cfg: ExperimentConfig, L: int):
    try:
        return ex.resolve_states(cfg.states, L)
    except ValueError as exc:
        raise ConfigError("states", str(exc)) from None


def _cost(cfg: ExperimentConfig, command: str, L: int) -> float:
    p = cfg.protocol
    shots = cfg.ensemble.shots
    if command == "scan":
        return ex.estimate_cost(len(p.theta_pi) * len(p.tau_ms), shots, p.cycles, L)
    n_states = len(cfg.states.bitstrings) + cfg.states.random_count + len(cfg.states.tilted_polar_pi)
    if cfg.states.all_bitstrings:
        n_states = 2**L + len(cfg.states.tilted_polar_pi)
    if command == "sweep-states":
        return ex.estimate_cost(n_states, shots, p.cycles, L)
    if command == "longtime":
        n = n_states - len(cfg.states.tilted_polar_pi)
        return ex.estimate_cost(n, 1, cfg.longtime.cycles, L)
    if command == "isolate":
        return ex.estimate_cost(2, 1, cfg.isolation.cycles, len(cfg.isolation.sites))
    if command == "select-chain":
        return 0.0
    return ex.estimate_cost(1, shots, p.cycles, L)


# ---------------------------------------------------------------- commands


def cmd_simulate(cfg, out, manifest, system):
    theta = _single(cfg.protocol.theta_pi, "protocol.theta_pi")
    tau = _single(cfg.protocol.tau_ms, "protocol.tau_ms")
    label, state = _single(_states(cfg, system.L), "states")
    proto = _protocol(cfg, theta, tau)
    point = ex.run_dtc_point(system, state, proto, cfg.ensemble.shots, cfg.ensemble.master_seed,
                             workers=cfg.workers, label=label)
    figdata.emit_correlation(manifest, point)
    figdata.emit_spectrum(manifest, point)
    figdata.emit_site_map(manifest, point)
    record = _mean_record(point, system)
    for path in write_trajectory(record, out / "trajectory.csv",
                                 extra={"ensemble_mean_over_shots": point.shots, "state": label}):
        manifest.add(path)
    manifest.summary = {
        "state": label,
        "order_parameter": point.order_parameter,
        "peak_frequency": point.spectrum.peak_frequency if point.spectrum else None,
        "peak_height": point.spectrum.peak_height if point.spectrum else None,
    }


def _mean_record(point, system):
    return TrajectoryRecord(point.cycles, point.sz_mean, point.sx_mean, point.sy_mean,
                            point.protocol, None, system.digest())


def cmd_scan(cfg, out, manifest, system):
    label, state = _states(cfg, system.L)[0]
    base = _protocol(cfg, cfg.protocol.theta_pi[0], cfg.protocol.tau_ms[0])
    scan = ex.phase_scan(
        system, state,
        [t * math.pi for t in cfg.protocol.theta_pi],
        [t * 1e-3 for t in cfg.protocol.tau_ms],
        base, cfg.ensemble.shots, cfg.ensemble.master_seed, cfg.max_amplitude_updates, cfg.workers,
    )
    figdata.emit_scan(manifest, scan)
    manifest.summary = {
        "state": label,
        "monotone_in_tau": dict(zip((repr(t) for t in cfg.protocol.theta_pi), scan.monotone_in_tau)),
        "rising_with_tau": dict(zip((repr(t) for t in cfg.protocol.theta_pi), scan.rising_with_tau)),
    }


def cmd_sweep(cfg, out, manifest, system):
    theta = _single(cfg.protocol.theta_pi, "protocol.theta_pi")
    tau = _single(cfg.protocol.tau_ms, "protocol.tau_ms")
    states = _states(cfg, system.L)
    proto = _protocol(cfg, theta, tau)
    summary = {}
    if cfg.sweep.target_n1e is not None:
        rate, _ = ex.calibrate_dephasing(system, states[0][1], proto, cfg.sweep.target_n1e,
                                         cfg.ensemble.shots, cfg.ensemble.master_seed,
                                         cfg.sweep.window_width, workers=cfg.workers)
        proto = replace(proto, dephasing_rate=rate)
        summary["calibrated_dephasing_rate_hz"] = rate
    J0 = ex.average_nn_coupling(system)
    entries = ex.initial_state_sweep(system, states, proto, J0, cfg.ensemble.shots,
                                     cfg.ensemble.master_seed, cfg.sweep.window_width, cfg.workers)
    figdata.emit_sweep(manifest, entries)
    figdata.emit_fits(manifest, entries)
    figdata.emit_energy_landscape(manifest, system, J0, [e.label for e in entries])
    focus = next((e for e in entries if e.label == neel(system.L)), entries[0])
    figdata.emit_site_map(manifest, focus.point, "fig4a.csv")
    figdata.emit_correlation(manifest, focus.point, "fig4b.csv")
    figdata.emit_spectrum(manifest, focus.point, "fig4c.csv")
    summary["J0_hz"] = J0
    summary["focus_state"] = focus.label
    manifest.summary = summary


def cmd_isolate(cfg, out, manifest, system):
    iso = cfg.isolation
    res = ex.isolation_experiment(system, iso.tau_ms * 1e-3, iso.cycles, sites=iso.sites)
    figdata.emit_isolation(manifest, res)
    manifest.summary = {
        "min_coherence_interacting": float(res.coherence_interacting.min()),
        "max_dev_free": float(np.abs(res.sx_free - 1.0).max()),
    }


def cmd_tomography(cfg, out, manifest, system):
    theta = _single(cfg.protocol.theta_pi, "protocol.theta_pi")
    tau = _single(cfg.protocol.tau_ms, "protocol.tau_ms")
    polar = cfg.states.tilted_polar_pi[0] if cfg.states.tilted_polar_pi else 0.25
    tomo = ex.tomography_run(system, _protocol(cfg, theta, tau), polar * math.pi,
                             cfg.ensemble.shots, cfg.ensemble.master_seed, cfg.workers)
    figdata.emit_tomography(manifest, tomo)
    manifest.summary = {"order_parameter": tomo.order_parameter, "coherence_crossing": tomo.coherence_crossing}


def cmd_longtime(cfg, out, manifest, system):
    theta = _single(cfg.protocol.theta_pi, "protocol.theta_pi")
    tau = _single(cfg.protocol.tau_ms, "protocol.tau_ms")
    states = [(lab, st) for lab, st in _states(cfg, system.L) if st.is_bitstring]
    if not states:
        raise ConfigError("states", "longtime needs at least one bitstring state")
    lt = cfg.longtime
    proto = _protocol(cfg, theta, tau, rotation_noise_sigma=0.0, dephasing_rate=0.0)
    res = ex.mbl_longtime_check(system, states, proto, lt.cycles, lt.record_every, lt.final_window,
                                lt.reference_cycle, lt.min_split, cfg.workers)
    header = ["label", "split_reference", "split_final", "min_coarse_abs_chi", "passed"]
    rows = ((r.label, r.split_reference, r.split_final, r.min_coarse_abs_chi, r.passed) for r in res.rows)
    manifest.add(write_csv(out / "longtime.csv", header, rows))

    def series_rows():
        for label, chi in res.series.items():
            for n, v in zip(chi.cycles, chi.values):
                yield label, n, v

    manifest.add(write_csv(out / "longtime_series.csv", ["label", "N", "chi"], series_rows()))
    manifest.summary = {"passed": res.passed, "min_final_split": res.min_final_split}


def cmd_select_chain(cfg, out, manifest, system=None):
    ch = cfg.chain
    if ch.couplings_hz is not None:
        J = np.asarray(ch.couplings_hz, dtype=float)
        if J.ndim != 2 or J.shape[0] != J.shape[1]:
            raise ConfigError("chain.couplings_hz", "must be a square matrix")
    else:
        rng = np.random.default_rng(ch.cluster_seed)
        pos = rng.uniform(0, ch.box_nm, (ch.cluster_size, 3))
        J = dipolar_couplings(ClusterSpec(pos, ch.prefactor_hz_nm3))
        write_json(out / "cluster.json", {"positions_nm": pos, "couplings_hz": J})
        manifest.add(out / "cluster.json")
    if ch.length > J.shape[0]:
        raise ConfigError("chain.length", f"exceeds cluster size {J.shape[0]}")
    path = select_chain(J, ch.length)
    manifest.add(write_csv(out / "chain.csv", ["position", "spin"], enumerate(path)))
    sub = J[np.ix_(path, path)]
    means = mean_abs_coupling_by_distance(sub)
    manifest.summary = {"chain": path}
    if all(m > 0 for _, m in means) and len(means) >= 2:
        fit = fit_power_law(means)
        figdata.emit_coupling_profile(manifest, means, fit)
        manifest.summary.update({"J0_hz": fit.J0, "alpha": fit.alpha})


def cmd_fit(args, cfg, out, manifest):
    if args.input:
        header, rows = read_csv(Path(args.input))
        data = np.array([[float(r[0]), float(r[1])] for r in rows])
        if args.kind == "decay":
            fit = fit_exponential_decay(data[:, 0], data[:, 1])
            cov = fit.covariance
            manifest.add(write_csv(out / "decay_fit.csv",
                                   ["A", "N_1e", "cov_A_A", "cov_A_N", "cov_N_N", "diverged"],
                                   [(fit.A, fit.N_1e, cov[0, 0], cov[0, 1], cov[1, 1], fit.diverged)]))
            manifest.summary = {"A": fit.A, "N_1e": fit.N_1e, "diverged": fit.diverged}
            return
        means = [(d, m) for d, m in data]
    else:
        # ensemble average over disorder realizations
        per = []
        for r in range(cfg.ensemble.realizations):
            per.append([m for _, m in mean_abs_coupling_by_distance(ex.build_system(cfg.system, r))])
        avg = np.mean(per, axis=0)
        means = [(d + 1, m) for d, m in enumerate(avg)]
    fit = fit_power_law(means)
    figdata.emit_coupling_profile(manifest, means, fit)
    manifest.add(write_csv(out / "power_law_fit.csv", ["J0_hz", "alpha", "residual"],
                           [(fit.J0, fit.alpha, fit.residual)]))
    manifest.summary = {"J0_hz": fit.J0, "alpha": fit.alpha}


def cmd_spectrum(args, out, manifest):
    header, rows = read_csv(Path(args.input))
    lower = [h.lower() for h in header]
    col = next((lower.index(c) for c in ("chi", "chi_mean", "value") if c in lower), 1 if len(header) > 1 else 0)
    series = np.array([float(r[col]) for r in rows])
    spec = fourier_spectrum(series, window=args.window)
    figdata.emit_spectrum_table(manifest, spec.frequencies, spec.magnitude, spec.power)
    manifest.summary = {"peak_frequency": spec.peak_frequency, "peak_height": spec.peak_height}


# ---------------------------------------------------------------- dispatch


def run(args) -> int:
    out = _output_dir(args)
    cfg = _load_config(args) if args.config else None
    if args.command in CONFIG_COMMANDS and cfg is None:
        raise ConfigError("--config", "required")
    if args.command == "fit" and cfg is None and not args.input:
        raise ConfigError("--config", "fit needs --config or --input")

    system = None
    if cfg is not None and args.command not in ("select-chain", "fit"):
        try:
            system = ex.build_system(cfg.system)
        except (OSError, KeyError, ValueError) as exc:
            raise ConfigError("system", str(exc)) from None

    if system is not None and args.command in SINGLE_CELL:
        _single(cfg.protocol.theta_pi, "protocol.theta_pi")
        _single(cfg.protocol.tau_ms, "protocol.tau_ms")
        states = _states(cfg, system.L)
        if args.command == "simulate":
            _single(states, "states")

    if args.dry_run:
        L = system.L if system is not None else (cfg.system.L if cfg else 0)
        doc = {"command": args.command, "config": cfg.to_dict() if cfg else None,
               "cost_amplitude_updates": _cost(cfg, args.command, L) if cfg else 0.0}
        if system is not None:
            doc["system"] = system.to_dict()
        print(json.dumps(doc, indent=2, sort_keys=True))
        return 0

    out.mkdir(parents=True, exist_ok=True)
    seeds = {"master_seed": cfg.ensemble.master_seed} if cfg else {}
    manifest = Manifest(out, args.command, cfg.to_dict() if cfg else {"input": args.input}, seeds)
    if system is not None:
        manifest.system_hash = system.digest()
        manifest.add(write_json(out / "system.json", system.to_dict()))
        cost = _cost(cfg, args.command, system.L)
        if args.command != "scan" and cost > cfg.max_amplitude_updates:
            raise ex.BudgetExceeded(cost, cfg.max_amplitude_updates)

    handlers = {
        "simulate": cmd_simulate,
        "scan": cmd_scan,
        "sweep-states": cmd_sweep,
        "isolate": cmd_isolate,
        "tomography": cmd_tomography,
        "longtime": cmd_longtime,
        "select-chain": cmd_select_chain,
    }
    if args.command in handlers:
        handlers[args.command](cfg, out, manifest, system)
    elif args.command == "fit":
        cmd_fit(args, cfg, out, manifest)
    else:
        cmd_spectrum(args, out, manifest)
    manifest.write()
    log.info("wrote %d files to %s", len(manifest.files) + 1, out)
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits 2 on usage errors
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return run(args)
    except ConfigError as exc:
        print(f"dtcsim: config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - report and map to exit code 1
        log.debug("failure", exc_info=True)
        print(f"dtcsim: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
