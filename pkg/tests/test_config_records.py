import math

import numpy as np
import pytest

from dtcsim.config import ConfigError, ExperimentConfig
from dtcsim.engine import FloquetProtocol, prepare_product_state, run_floquet
from dtcsim.model import ProductState
from dtcsim.records import Manifest, fmt, read_columns, read_trajectory, sha256_file, write_csv, write_trajectory


def test_defaults_validate():
    cfg = ExperimentConfig().validate()
    assert cfg.system.L == 9 and cfg.protocol.theta_pi == [0.95]


def test_round_trip():
    cfg = ExperimentConfig.from_dict({"protocol": {"tau_ms": [1.0, 5.0], "cycles": 50},
                                      "states": {"random_count": 3}})
    assert ExperimentConfig.loads(cfg.dumps()) == cfg


def test_integral_float_accepted_for_int():
    assert ExperimentConfig.from_dict({"protocol": {"cycles": 100.0}}).protocol.cycles == 100


@pytest.mark.parametrize(
    "doc, field",
    [
        ({"protocol": {"tau_ms": [-1.0]}}, "protocol.tau_ms[0]"),
        ({"protocol": {"cycles": "many"}}, "protocol.cycles"),
        ({"protocol": {"cycles": 1.5}}, "protocol.cycles"),
        ({"protocol": {"bogus": 1}}, "protocol.bogus"),
        ({"nonsense": {}}, "nonsense"),
        ({"system": {"disorder_strength": 1.0}}, "system.disorder_strength"),
        ({"system": {"source": "explicit"}}, "system.explicit"),
        ({"ensemble": {"shots": 0}}, "ensemble.shots"),
        ({"protocol": {"interactions": 1}}, "protocol.interactions"),
        ({"longtime": {"reference_cycle": 10, "final_window": 20}}, "longtime.reference_cycle"),
    ],
)
def test_errors_name_the_field(doc, field):
    with pytest.raises(ConfigError) as info:
        ExperimentConfig.from_dict(doc)
    assert info.value.field == field
    assert field in str(info.value)


def test_syntax_error_reports_line():
    with pytest.raises(ConfigError) as info:
        ExperimentConfig.loads('{\n  "protocol": {\n    "cycles": ,\n  }\n}')
    assert info.value.line == 3


def test_fmt():
    assert fmt(0.1) == "0.1"
    assert fmt(np.float64(1 / 3)) == repr(1 / 3)
    assert fmt(True) == "1" and fmt(np.bool_(False)) == "0"
    assert fmt(None) == ""
    assert fmt(np.int64(7)) == "7"


def test_csv_floats_round_trip_exactly(tmp_path):
    vals = np.random.default_rng(0).normal(size=20)
    p = write_csv(tmp_path / "x.csv", ["i", "v"], enumerate(vals))
    (back,) = read_columns(p, "v")
    assert np.array_equal(back, vals)
    with pytest.raises(KeyError):
        read_columns(p, "w")


def test_trajectory_round_trip(tmp_path, chain9):
    tr = run_floquet(prepare_product_state(ProductState.from_bitstring("0" * 9)), chain9,
                     FloquetProtocol(5e-3, 0.95 * math.pi, 10), seed=1)
    path, meta = write_trajectory(tr, tmp_path / "t.csv")
    back = read_trajectory(path)
    assert np.array_equal(back["cycles"], tr.cycles)
    assert np.array_equal(back["sz"], tr.sz)
    assert meta.name == "t.meta.json"
    assert '"system_hash": "%s"' % chain9.digest() in meta.read_text()


def test_manifest_lists_checksums(tmp_path):
    m = Manifest(tmp_path, "simulate", {"a": 1}, {"master_seed": 0})
    p = m.add(write_csv(tmp_path / "x.csv", ["a"], [[1]]))
    doc = m.write().read_text()
    assert sha256_file(p) in doc and '"x.csv"' in doc
