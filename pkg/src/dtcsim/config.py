"""Run configuration: a JSON document with units spelled out in the key names."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any


class ConfigError(ValueError):
    """Invalid configuration; ``field`` is the dotted path of the offending key."""

    def __init__(self, field: str, message: str, line: int | None = None):
        self.field = field
        self.line = line
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}{field}: {message}")


def _require(cond: bool, path: str, message: str) -> None:
    if not cond:
        raise ConfigError(path, message)


@dataclass
class SystemConfig:
    source: str = "sampled"  # sampled | explicit | file
    L: int = 9
    J0_hz: float = 6.7
    alpha: float = 2.5
    disorder_strength: float = 0.9
    sign_probability: float = 0.5
    h_scale_hz: float = 5.0
    B_hz: float = 0.0
    seed: int = 0
    # >0: use the seed in [seed, seed + screen_seeds) with the largest resonance gap
    screen_seeds: int = 2000
    explicit: dict | None = None
    path: str | None = None

    def validate(self, prefix: str = "system") -> None:
        _require(self.source in ("sampled", "explicit", "file"), f"{prefix}.source",
                 f"must be sampled, explicit or file, got {self.source!r}")
        if self.source == "sampled":
            _require(self.L >= 2, f"{prefix}.L", "must be >= 2")
            _require(self.L <= 24, f"{prefix}.L", "must be <= 24")
            _require(self.J0_hz > 0, f"{prefix}.J0_hz", "must be > 0")
            _require(self.alpha > 0, f"{prefix}.alpha", "must be > 0")
            _require(0 <= self.disorder_strength < 1, f"{prefix}.disorder_strength", "must lie in [0, 1)")
            _require(0 <= self.sign_probability <= 1, f"{prefix}.sign_probability", "must lie in [0, 1]")
            _require(self.h_scale_hz >= 0, f"{prefix}.h_scale_hz", "must be >= 0")
            _require(self.screen_seeds >= 0, f"{prefix}.screen_seeds", "must be >= 0")
        elif self.source == "explicit":
            _require(isinstance(self.explicit, dict), f"{prefix}.explicit", "required for source=explicit")
        else:
            _require(bool(self.path), f"{prefix}.path", "required for source=file")


@dataclass
class ProtocolConfig:
    theta_pi: list[float] = field(default_factory=lambda: [0.95])
    tau_ms: list[float] = field(default_factory=lambda: [5.0])
    cycles: int = 100
    rotation_noise_pi: float = 0.01
    dephasing_rate_hz: float = 0.0
    interactions: bool = True
    record_xy: bool = False

    def validate(self, prefix: str = "protocol") -> None:
        _require(len(self.theta_pi) > 0, f"{prefix}.theta_pi", "must be non-empty")
        _require(len(self.tau_ms) > 0, f"{prefix}.tau_ms", "must be non-empty")
        for i, t in enumerate(self.tau_ms):
            _require(math.isfinite(t) and t >= 0, f"{prefix}.tau_ms[{i}]", f"must be >= 0, got {t}")
        for i, t in enumerate(self.theta_pi):
            _require(math.isfinite(t), f"{prefix}.theta_pi[{i}]", "must be finite")
        _require(self.cycles >= 0, f"{prefix}.cycles", "must be >= 0")
        _require(self.rotation_noise_pi >= 0, f"{prefix}.rotation_noise_pi", "must be >= 0")
        _require(self.dephasing_rate_hz >= 0, f"{prefix}.dephasing_rate_hz", "must be >= 0")


@dataclass
class StatesConfig:
    # bitstrings, or the names "polarized" / "neel"
    bitstrings: list[str] = field(default_factory=lambda: ["polarized"])
    tilted_polar_pi: list[float] = field(default_factory=list)
    random_count: int = 0
    random_seed: int = 0
    all_bitstrings: bool = False

    def validate(self, prefix: str = "states") -> None:
        _require(self.random_count >= 0, f"{prefix}.random_count", "must be >= 0")
        _require(
            self.all_bitstrings or len(self.bitstrings) + len(self.tilted_polar_pi) + self.random_count > 0,
            prefix, "at least one initial state is required",
        )
        for i, p in enumerate(self.tilted_polar_pi):
            _require(0 <= p <= 1, f"{prefix}.tilted_polar_pi[{i}]", "must lie in [0, 1]")


@dataclass
class EnsembleConfig:
    shots: int = 32
    realizations: int = 1
    master_seed: int = 0

    def validate(self, prefix: str = "ensemble") -> None:
        _require(self.shots >= 1, f"{prefix}.shots", "must be >= 1")
        _require(self.realizations >= 1, f"{prefix}.realizations", "must be >= 1")


@dataclass
class SweepConfig:
    window_width: int = 10
    # when set, dephasing_rate_hz is replaced by the rate giving this N_1e for the first state
    target_n1e: float | None = None

    def validate(self, prefix: str = "sweep") -> None:
        _require(self.window_width >= 1, f"{prefix}.window_width", "must be >= 1")
        _require(self.target_n1e is None or self.target_n1e > 0, f"{prefix}.target_n1e", "must be > 0")


@dataclass
class LongtimeConfig:
    cycles: int = 1_000_000
    record_every: int = 1000
    final_window: int = 20
    reference_cycle: int = 1000
    min_split: float = 0.5

    def validate(self, prefix: str = "longtime") -> None:
        _require(self.cycles >= 1, f"{prefix}.cycles", "must be >= 1")
        _require(self.record_every >= 1, f"{prefix}.record_every", "must be >= 1")
        _require(self.final_window >= 2, f"{prefix}.final_window", "must be >= 2")
        _require(self.final_window <= self.reference_cycle <= self.cycles,
                 f"{prefix}.reference_cycle", "must lie in [final_window, cycles]")


@dataclass
class IsolationConfig:
    sites: list[int] = field(default_factory=lambda: [0, 1, 2, 3])
    tau_ms: float = 3.5
    cycles: int = 60

    def validate(self, prefix: str = "isolation") -> None:
        _require(len(self.sites) >= 1, f"{prefix}.sites", "must be non-empty")
        _require(self.tau_ms >= 0, f"{prefix}.tau_ms", "must be >= 0")
        _require(self.cycles >= 0, f"{prefix}.cycles", "must be >= 0")


@dataclass
class ChainConfig:
    """Chain selection input: an explicit coupling matrix or a random dipolar cluster."""

    couplings_hz: list[list[float]] | None = None
    cluster_size: int = 12
    cluster_seed: int = 0
    box_nm: float = 2.0
    prefactor_hz_nm3: float = 1200.0
    length: int = 9

    def validate(self, prefix: str = "chain") -> None:
        _require(self.length >= 2, f"{prefix}.length", "must be >= 2")
        if self.couplings_hz is None:
            _require(self.cluster_size >= self.length, f"{prefix}.cluster_size", "must be >= length")
            _require(self.box_nm > 0, f"{prefix}.box_nm", "must be > 0")


@dataclass
class ExperimentConfig:
    system: SystemConfig = field(default_factory=SystemConfig)
    protocol: ProtocolConfig = field(default_factory=ProtocolConfig)
    states: StatesConfig = field(default_factory=StatesConfig)
    ensemble: EnsembleConfig = field(default_factory=EnsembleConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    longtime: LongtimeConfig = field(default_factory=LongtimeConfig)
    isolation: IsolationConfig = field(default_factory=IsolationConfig)
    chain: ChainConfig = field(default_factory=ChainConfig)
    max_amplitude_updates: float = 1e12
    workers: int = 1

    def validate(self) -> "ExperimentConfig":
        for f in fields(self):
            value = getattr(self, f.name)
            if hasattr(value, "validate"):
                value.validate(f.name)
        _require(self.max_amplitude_updates > 0, "max_amplitude_updates", "must be > 0")
        _require(self.workers >= 1, "workers", "must be >= 1")
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        return _build(cls, data, "").validate()

    @classmethod
    def loads(cls, text: str) -> "ExperimentConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError("<document>", exc.msg, line=exc.lineno) from None
        if not isinstance(data, dict):
            raise ConfigError("<document>", "top level must be an object")
        return cls.from_dict(data)

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        return cls.loads(Path(path).read_text())


_NESTED = {
    "system": SystemConfig,
    "protocol": ProtocolConfig,
    "states": StatesConfig,
    "ensemble": EnsembleConfig,
    "sweep": SweepConfig,
    "longtime": LongtimeConfig,
    "isolation": IsolationConfig,
    "chain": ChainConfig,
}


def _coerce(value: Any, annotation: str, path: str) -> Any:
    kind = annotation.replace(" ", "")
    optional = kind.endswith("|None")
    if optional:
        if value is None:
            return None
        kind = kind[: -len("|None")]
    if kind == "bool":
        _require(isinstance(value, bool), path, f"expected true/false, got {value!r}")
        return value
    if kind == "int":
        _require(isinstance(value, int) and not isinstance(value, bool)
                 or isinstance(value, float) and value.is_integer(), path, f"expected an integer, got {value!r}")
        return int(value)
    if kind == "float":
        _require(isinstance(value, (int, float)) and not isinstance(value, bool), path,
                 f"expected a number, got {value!r}")
        return float(value)
    if kind == "str":
        _require(isinstance(value, str), path, f"expected a string, got {value!r}")
        return value
    if kind.startswith("list["):
        _require(isinstance(value, list), path, f"expected a list, got {value!r}")
        inner = kind[5:-1]
        return [_coerce(v, inner, f"{path}[{i}]") for i, v in enumerate(value)]
    if kind == "dict":
        _require(isinstance(value, dict), path, f"expected an object, got {value!r}")
        return value
    return value


def _build(cls, data: dict, prefix: str):
    if not isinstance(data, dict):
        raise ConfigError(prefix or "<document>", "expected an object")
    known = {f.name: f for f in fields(cls)}
    kwargs = {}
    for key, value in data.items():
        path = f"{prefix}.{key}" if prefix else key
        if key not in known:
            raise ConfigError(path, "unknown key")
        if not prefix and key in _NESTED:
            kwargs[key] = _build(_NESTED[key], value, key)
        else:
            kwargs[key] = _coerce(value, str(known[key].type), path)
    return cls(**kwargs)
