import json
import subprocess
import sys

import numpy as np
import pytest

from dtcsim.cli import main
from dtcsim.records import read_columns, read_csv, write_csv

SMALL = {
    "protocol": {"theta_pi": [0.95], "tau_ms": [5.0], "cycles": 40},
    "ensemble": {"shots": 2, "master_seed": 5},
}


def write_config(path, doc):
    path.write_text(json.dumps(doc))
    return str(path)


def files(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir())}


def test_simulate_is_byte_identical_on_rerun(tmp_path):
    cfg = write_config(tmp_path / "c.json", SMALL)
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "a")]) == 0
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "b")]) == 0
    a, b = files(tmp_path / "a"), files(tmp_path / "b")
    assert set(a) == {"fig3b.csv", "fig3c.csv", "fig3de.csv", "trajectory.csv", "trajectory.meta.json",
                      "system.json", "manifest.json"}
    assert a == b


def test_seed_override_changes_output(tmp_path):
    cfg = write_config(tmp_path / "c.json", SMALL)
    main(["simulate", "--config", cfg, "--out", str(tmp_path / "a")])
    main(["simulate", "--config", cfg, "--out", str(tmp_path / "b"), "--seed", "6"])
    assert (tmp_path / "a" / "fig3b.csv").read_bytes() != (tmp_path / "b" / "fig3b.csv").read_bytes()


def test_trajectory_columns(tmp_path):
    cfg = write_config(tmp_path / "c.json", SMALL)
    main(["simulate", "--config", cfg, "--out", str(tmp_path)])
    header, rows = read_csv(tmp_path / "trajectory.csv")
    assert header == ["cycle", "site", "sx", "sy", "sz"]
    assert len(rows) == 41 * 9


def test_negative_tau_is_a_config_error(tmp_path, capsys):
    doc = {"protocol": {"tau_ms": [-1.0]}}
    rc = main(["simulate", "--config", write_config(tmp_path / "c.json", doc), "--out", str(tmp_path / "o")])
    assert rc == 2
    assert "protocol.tau_ms[0]" in capsys.readouterr().err
    assert not (tmp_path / "o").exists()


def test_missing_config_file(tmp_path, capsys):
    assert main(["simulate", "--config", str(tmp_path / "nope.json")]) == 2


def test_usage_errors_exit_2():
    with pytest.raises(SystemExit) as info:
        main(["frobnicate"])
    assert info.value.code == 2
    with pytest.raises(SystemExit) as info:
        main(["simulate"])
    assert info.value.code == 2


def test_simulate_needs_a_single_cell(tmp_path, capsys):
    doc = {"protocol": {"tau_ms": [1.0, 5.0], "cycles": 10}}
    assert main(["simulate", "--config", write_config(tmp_path / "c.json", doc), "--out", str(tmp_path / "o")]) == 2
    assert "protocol.tau_ms" in capsys.readouterr().err
    assert not (tmp_path / "o").exists()


def test_budget_exceeded_exits_1(tmp_path, capsys):
    doc = dict(SMALL, max_amplitude_updates=10.0)
    assert main(["simulate", "--config", write_config(tmp_path / "c.json", doc), "--out", str(tmp_path / "o")]) == 1
    assert "budget" in capsys.readouterr().err


def test_dry_run_writes_nothing(tmp_path, capsys):
    cfg = write_config(tmp_path / "c.json", SMALL)
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "o"), "--dry-run"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["cost_amplitude_updates"] == 2 * 40 * 512
    assert doc["system"]["L"] == 9
    assert not (tmp_path / "o").exists()


def test_output_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("DTCSIM_OUTPUT_DIR", str(tmp_path / "env"))
    assert main(["simulate", "--config", write_config(tmp_path / "c.json", SMALL)]) == 0
    assert (tmp_path / "env" / "manifest.json").exists()


def test_scan_columns(tmp_path):
    doc = {"protocol": {"theta_pi": [0.9, 1.0], "tau_ms": [0.0, 5.0], "cycles": 40}, "ensemble": {"shots": 1}}
    assert main(["scan", "--config", write_config(tmp_path / "c.json", doc), "--out", str(tmp_path)]) == 0
    header, rows = read_csv(tmp_path / "fig3a.csv")
    assert header == ["theta_pi", "tau_ms", "order_parameter", "peak_frequency"]
    assert len(rows) == 4


def test_sweep_states_energy_landscape(tmp_path):
    doc = {"protocol": {"cycles": 60, "rotation_noise_pi": 0.0},
           "states": {"bitstrings": ["polarized", "neel"], "random_count": 2}, "ensemble": {"shots": 1}}
    assert main(["sweep-states", "--config", write_config(tmp_path / "c.json", doc), "--out", str(tmp_path)]) == 0
    header, rows = read_csv(tmp_path / "fig4e.csv")
    assert header == ["index", "bitstring", "energy_density", "measured"]
    assert len(rows) == 512
    assert sum(r[3] == "1" for r in rows) == 4
    for name in ("fig4a.csv", "fig4b.csv", "fig4c.csv", "fig4d.csv", "fits.csv"):
        assert (tmp_path / name).exists()


def test_isolate_and_tomography(tmp_path):
    cfg = write_config(tmp_path / "c.json", {"isolation": {"cycles": 10},
                                             "protocol": {"cycles": 40}, "ensemble": {"shots": 2}})
    assert main(["isolate", "--config", cfg, "--out", str(tmp_path / "i")]) == 0
    sx_free, = read_columns(tmp_path / "i" / "fig2b.csv", "sx_free")
    assert np.allclose(sx_free, 1.0)
    assert main(["tomography", "--config", cfg, "--out", str(tmp_path / "t")]) == 0
    header, rows = read_csv(tmp_path / "t" / "fig3fg.csv")
    assert header == ["N", "chi_mean", "coherence"] and len(rows) == 41


def test_longtime_small(tmp_path):
    doc = {"longtime": {"cycles": 500, "record_every": 100, "reference_cycle": 100},
           "states": {"bitstrings": ["polarized", "neel"]}}
    assert main(["longtime", "--config", write_config(tmp_path / "c.json", doc), "--out", str(tmp_path)]) == 0
    header, rows = read_csv(tmp_path / "longtime.csv")
    assert [r[0] for r in rows] == ["000000000", "010101010"]
    assert all(r[4] == "1" for r in rows)


def test_select_chain_explicit(tmp_path):
    J = np.full((4, 4), 0.1)
    np.fill_diagonal(J, 0)
    for a, b in [(2, 0), (0, 3), (3, 1)]:
        J[a, b] = J[b, a] = 5.0
    doc = {"chain": {"couplings_hz": J.tolist(), "length": 4}}
    assert main(["select-chain", "--config", write_config(tmp_path / "c.json", doc), "--out", str(tmp_path)]) == 0
    _, rows = read_csv(tmp_path / "chain.csv")
    assert [int(r[1]) for r in rows] == [1, 3, 0, 2]


def test_fit_inputs(tmp_path):
    write_csv(tmp_path / "d.csv", ["d", "mean"], [(d, 6.7 / d**2.5) for d in range(1, 9)])
    assert main(["fit", "--input", str(tmp_path / "d.csv"), "--out", str(tmp_path / "p")]) == 0
    J0, alpha = read_columns(tmp_path / "p" / "power_law_fit.csv", "J0_hz", "alpha")
    assert J0[0] == pytest.approx(6.7) and alpha[0] == pytest.approx(2.5)
    n = np.arange(0, 500, 10)
    write_csv(tmp_path / "e.csv", ["N", "value"], zip(n, 0.76 * np.exp(-n / 472)))
    assert main(["fit", "--input", str(tmp_path / "e.csv"), "--kind", "decay", "--out", str(tmp_path / "q")]) == 0
    A, N1e = read_columns(tmp_path / "q" / "decay_fit.csv", "A", "N_1e")
    assert A[0] == pytest.approx(0.76, rel=1e-6) and N1e[0] == pytest.approx(472, rel=1e-6)


def test_fit_needs_input_or_config(tmp_path):
    assert main(["fit", "--out", str(tmp_path / "o")]) == 2
    assert not (tmp_path / "o").exists()


def test_spectrum_of_alternating_series(tmp_path):
    write_csv(tmp_path / "chi.csv", ["N", "chi"], [(n, (-1) ** n) for n in range(101)])
    assert main(["spectrum", "--input", str(tmp_path / "chi.csv"), "--out", str(tmp_path / "s")]) == 0
    summary = json.loads((tmp_path / "s" / "manifest.json").read_text())["summary"]
    assert summary["peak_frequency"] == 0.5
    header, _ = read_csv(tmp_path / "s" / "spectrum.csv")
    assert header == ["f", "magnitude", "power"]


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "dtcsim", "--version"], capture_output=True, text=True)
    assert out.returncode == 0 and out.stdout.startswith("dtcsim ")
