"""CSV and JSON writers with exact float round-trip, plus the run manifest."""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from . import __version__
from .engine import TrajectoryRecord


def fmt(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])
    return path


def read_csv(path: Path) -> tuple[list[str], list[list[str]]]:
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader)]
        return header, [row for row in reader if row]


def read_columns(path: Path, *names: str) -> list[np.ndarray]:
    header, rows = read_csv(path)
    out = []
    for name in names:
        if name not in header:
            raise KeyError(f"{path}: missing column {name!r} (have {header})")
        i = header.index(name)
        out.append(np.array([float(r[i]) for r in rows]))
    return out


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, float) and not np.isfinite(obj):
        return repr(obj)
    return obj


def write_json(path: Path, data: Any) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(data), indent=2, sort_keys=True) + "\n")
    return path


def sha256_file(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_trajectory(record: TrajectoryRecord, path: Path, extra: dict | None = None) -> tuple[Path, Path]:
    """Write ``cycle, site, sx, sy, sz`` rows and a ``.meta.json`` sidecar.

    x/y columns are empty when the trajectory was recorded without them.
    """
    path = Path(path)

    def rows():
        for r, n in enumerate(record.cycles):
            for j in range(record.L):
                sx = record.sx[r, j] if record.sx is not None else None
                sy = record.sy[r, j] if record.sy is not None else None
                yield (n, j, sx, sy, record.sz[r, j])

    write_csv(path, ["cycle", "site", "sx", "sy", "sz"], rows())
    meta = {
        "protocol": record.protocol.to_dict(),
        "system_hash": record.system_digest,
        "seed": record.seed,
        "code_version": __version__,
    }
    if extra:
        meta.update(extra)
    sidecar = write_json(path.with_suffix(".meta.json"), meta)
    return path, sidecar


def read_trajectory(path: Path) -> dict[str, np.ndarray]:
    header, rows = read_csv(path)
    cycles = np.array(sorted({int(r[0]) for r in rows}))
    L = max(int(r[1]) for r in rows) + 1
    sz = np.zeros((cycles.size, L))
    pos = {c: i for i, c in enumerate(cycles)}
    for r in rows:
        sz[pos[int(r[0])], int(r[1])] = float(r[4])
    return {"cycles": cycles, "sz": sz}


class Manifest:
    """Collects written outputs with their checksums; rendered as ``manifest.json``."""

    def __init__(self, out_dir: Path, command: str, config: dict | None, seeds: dict | None = None):
        self.out_dir = Path(out_dir)
        self.command = command
        self.config = config
        self.seeds = seeds or {}
        self.system_hash: str | None = None
        self.files: dict[str, str] = {}
        self.summary: dict[str, Any] = {}

    def add(self, path: Path) -> Path:
        path = Path(path)
        self.files[str(path.relative_to(self.out_dir))] = sha256_file(path)
        return path

    def write(self) -> Path:
        doc = {
            "command": self.command,
            "code_version": __version__,
            "config": self.config,
            "seeds": self.seeds,
            "system_hash": self.system_hash,
            "outputs": dict(sorted(self.files.items())),
            "summary": self.summary,
        }
        return write_json(self.out_dir / "manifest.json", doc)
