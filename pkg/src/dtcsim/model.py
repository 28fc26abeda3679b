"""Spin-chain definitions, synthetic coupling generators and coupling statistics.

All frequencies are stored in Hz. Site ``j`` of a bitstring is spin ``j``;
``0`` (or ``u``) means up (s = +1) and ``1`` (or ``d``) means down (s = -1).
"""

from __future__ import annotations

import hashlib
import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class DegenerateGeometryError(ValueError):
    """Two spins of a cluster sit at the same position."""


@dataclass(frozen=True, eq=False)
class SpinSystem:
    """Static Ising parameters: global field, on-site shifts and couplings (Hz)."""

    L: int
    B: float
    h: np.ndarray
    J: np.ndarray

    def __post_init__(self) -> None:
        if int(self.L) < 1:
            raise ValueError(f"L must be >= 1, got {self.L}")
        h = np.asarray(self.h, dtype=float).reshape(-1)
        J = np.asarray(self.J, dtype=float)
        if h.shape != (self.L,):
            raise ValueError(f"h must have length {self.L}, got shape {h.shape}")
        if J.shape != (self.L, self.L):
            raise ValueError(f"J must be {self.L}x{self.L}, got shape {J.shape}")
        if not (np.all(np.isfinite(h)) and np.all(np.isfinite(J)) and math.isfinite(self.B)):
            raise ValueError("all system parameters must be finite")
        if not np.array_equal(J, J.T):
            raise ValueError("coupling matrix must be symmetric")
        if np.any(np.diag(J) != 0.0):
            raise ValueError("coupling matrix must have zero diagonal")
        h.setflags(write=False)
        J = J.copy()
        J.setflags(write=False)
        object.__setattr__(self, "L", int(self.L))
        object.__setattr__(self, "B", float(self.B))
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "J", J)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SpinSystem):
            return NotImplemented
        return (
            self.L == other.L
            and self.B == other.B
            and np.array_equal(self.h, other.h)
            and np.array_equal(self.J, other.J)
        )

    __hash__ = None  # type: ignore[assignment]

    def without_interactions(self) -> "SpinSystem":
        return SpinSystem(self.L, self.B, self.h, np.zeros_like(self.J))

    def subsystem(self, sites: Sequence[int]) -> "SpinSystem":
        idx = np.asarray(list(sites), dtype=int)
        return SpinSystem(len(idx), self.B, self.h[idx], self.J[np.ix_(idx, idx)])

    def to_dict(self) -> dict:
        iu = np.triu_indices(self.L, k=1)
        return {
            "L": self.L,
            "B_hz": self.B,
            "h_hz": [float(x) for x in self.h],
            "J_hz": [float(x) for x in self.J[iu]],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SpinSystem":
        L = int(data["L"])
        upper = np.asarray(data["J_hz"], dtype=float)
        if upper.shape != (L * (L - 1) // 2,):
            raise ValueError(
                f"J_hz must hold {L * (L - 1) // 2} upper-triangle entries, got {upper.size}"
            )
        J = np.zeros((L, L))
        J[np.triu_indices(L, k=1)] = upper
        J = J + J.T
        return cls(L, float(data.get("B_hz", 0.0)), np.asarray(data["h_hz"], dtype=float), J)

    def dumps(self) -> str:
        # json writes floats with repr(), i.e. shortest exact round-trip form
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def loads(cls, text: str) -> "SpinSystem":
        return cls.from_dict(json.loads(text))

    def digest(self) -> str:
        """SHA-256 of the canonical serialization, used as the system hash."""
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()


@dataclass(frozen=True)
class ClusterSpec:
    """Spin positions (nm) and the dipolar prefactor C (Hz nm^3)."""

    positions: np.ndarray
    prefactor: float
    axis: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))

    def __post_init__(self) -> None:
        pos = np.asarray(self.positions, dtype=float)
        if pos.ndim != 2 or pos.shape[1] != 3:
            raise ValueError(f"positions must have shape (M, 3), got {pos.shape}")
        axis = np.asarray(self.axis, dtype=float)
        norm = np.linalg.norm(axis)
        if axis.shape != (3,) or norm == 0:
            raise ValueError("quantization axis must be a nonzero 3-vector")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "axis", axis / norm)


@dataclass(frozen=True)
class PowerLawFit:
    J0: float
    alpha: float
    residual: float


@dataclass(frozen=True)
class ProductState:
    """Per-site Bloch angles (polar, azimuth) of a product state.

    Use :meth:`from_bitstring`, :meth:`tilted` or :meth:`plus` for the usual
    shorthands.
    """

    polar: tuple[float, ...]
    azimuth: tuple[float, ...]

    def __post_init__(self) -> None:
        polar = tuple(float(p) for p in self.polar)
        azimuth = tuple(float(a) % (2 * math.pi) for a in self.azimuth)
        if len(polar) != len(azimuth) or not polar:
            raise ValueError("polar and azimuth must be non-empty and of equal length")
        for p in polar:
            if not 0.0 <= p <= math.pi:
                raise ValueError(f"polar angle {p} outside [0, pi]")
        object.__setattr__(self, "polar", polar)
        object.__setattr__(self, "azimuth", azimuth)

    @property
    def L(self) -> int:
        return len(self.polar)

    @classmethod
    def from_bitstring(cls, bits: str | Sequence[int]) -> "ProductState":
        spins = parse_bitstring(bits)
        return cls(tuple(math.pi * b for b in spins), (0.0,) * len(spins))

    @classmethod
    def tilted(cls, L: int, polar: float, azimuth: float = 0.0) -> "ProductState":
        return cls((polar,) * L, (azimuth,) * L)

    @classmethod
    def plus(cls, L: int) -> "ProductState":
        return cls.tilted(L, math.pi / 2)

    @property
    def is_bitstring(self) -> bool:
        return all(p == 0.0 or p == math.pi for p in self.polar)

    def bits(self) -> tuple[int, ...]:
        if not self.is_bitstring:
            raise ValueError("state is not a z-basis bitstring")
        return tuple(0 if p == 0.0 else 1 for p in self.polar)

    def label(self) -> str:
        if self.is_bitstring:
            return "".join(str(b) for b in self.bits())
        return "product"


def parse_bitstring(bits: str | Sequence[int]) -> tuple[int, ...]:
    """Parse ``"0101"``, ``"udud"`` or ``"↑↓↑↓"`` (or an int sequence) into 0/1 tuples."""
    if isinstance(bits, str):
        table = {"0": 0, "u": 0, "↑": 0, "1": 1, "d": 1, "↓": 1}
        try:
            out = tuple(table[c] for c in bits.strip().lower())
        except KeyError as exc:
            raise ValueError(f"invalid bitstring character {exc.args[0]!r} in {bits!r}") from None
    else:
        out = tuple(int(b) for b in bits)
        if any(b not in (0, 1) for b in out):
            raise ValueError(f"bitstring entries must be 0 or 1, got {bits!r}")
    if not out:
        raise ValueError("empty bitstring")
    return out


def polarized(L: int) -> str:
    return "0" * L


def neel(L: int) -> str:
    return "".join("01"[j % 2] for j in range(L))


def dipolar_couplings(cluster: ClusterSpec) -> np.ndarray:
    """Secular dipolar zz couplings ``C (1 - 3 cos^2 theta) / r^3`` for every pair."""
    pos = cluster.positions
    M = pos.shape[0]
    if M < 2:
        raise ValueError("a cluster needs at least two spins")
    diff = pos[:, None, :] - pos[None, :, :]
    r = np.linalg.norm(diff, axis=-1)
    off = ~np.eye(M, dtype=bool)
    if np.any(r[off] == 0.0):
        j, k = np.argwhere((r == 0.0) & off)[0]
        raise DegenerateGeometryError(f"spins {j} and {k} share a position")
    J = np.zeros((M, M))
    cos_t = (diff[off] @ cluster.axis) / r[off]
    J[off] = cluster.prefactor * (1.0 - 3.0 * cos_t**2) / r[off] ** 3
    # average the two evaluations so symmetry is exact in floating point
    return 0.5 * (J + J.T)


def sample_disordered_chain(
    seed: int,
    L: int,
    J0: float,
    alpha: float,
    disorder_strength: float,
    h_scale: float,
    sign_probability: float = 0.5,
    B: float = 0.0,
) -> SpinSystem:
    """Draw a random long-range Ising chain with power-law mean couplings.

    Each pair gets ``J_jk = s_jk * J0 / |j-k|**alpha * (1 + delta_jk)`` where
    ``delta_jk ~ U[-disorder_strength, disorder_strength]`` and ``s_jk = +1``
    with probability ``sign_probability``. On-site shifts are ``U[-h_scale, h_scale]``.
    ``disorder_strength=0, sign_probability=1`` gives the clean comparison chain.
    """
    if L < 2:
        raise ValueError(f"L must be >= 2, got {L}")
    if not J0 > 0 or not alpha > 0:
        raise ValueError("J0 and alpha must be positive")
    if not 0.0 <= disorder_strength < 1.0:
        raise ValueError(f"disorder_strength must lie in [0, 1), got {disorder_strength}")
    if not 0.0 <= sign_probability <= 1.0:
        raise ValueError(f"sign_probability must lie in [0, 1], got {sign_probability}")
    if h_scale < 0:
        raise ValueError("h_scale must be non-negative")
    rng = np.random.default_rng(seed)
    j, k = np.triu_indices(L, k=1)
    npair = j.size
    delta = rng.uniform(-disorder_strength, disorder_strength, npair)
    signs = np.where(rng.random(npair) < sign_probability, 1.0, -1.0)
    h = rng.uniform(-h_scale, h_scale, L)
    J = np.zeros((L, L))
    J[j, k] = signs * (J0 / (k - j).astype(float) ** alpha) * (1.0 + delta)
    J = J + J.T
    return SpinSystem(L, B, h, J)


def mean_abs_coupling_by_distance(system: SpinSystem | np.ndarray) -> list[tuple[int, float]]:
    J = system.J if isinstance(system, SpinSystem) else np.asarray(system, dtype=float)
    L = J.shape[0]
    if L < 2:
        raise ValueError("need at least two sites")
    return [(d, float(np.mean(np.abs(np.diagonal(J, offset=d))))) for d in range(1, L)]


def fit_power_law(distance_means: Sequence[tuple[float, float]]) -> PowerLawFit:
    """Least-squares fit of ``J0 / d**alpha`` in log-log space (closed form)."""
    data = np.asarray(distance_means, dtype=float)
    if data.ndim != 2 or data.shape[0] < 2:
        raise ValueError("need at least two (distance, mean) entries")
    d, m = data[:, 0], data[:, 1]
    if np.any(m <= 0) or np.any(d <= 0):
        raise ValueError("power-law fit needs strictly positive distances and means")
    x, y = np.log(d), np.log(m)
    xm, ym = x.mean(), y.mean()
    sxx = np.sum((x - xm) ** 2)
    if sxx == 0:
        raise ValueError("need at least two distinct distances")
    slope = np.sum((x - xm) * (y - ym)) / sxx
    intercept = ym - slope * xm
    resid = y - (intercept + slope * x)
    return PowerLawFit(float(np.exp(intercept)), float(-slope), float(np.sum(resid**2)))


def _chain_key(path: Sequence[int], W: np.ndarray) -> tuple:
    consecutive = min(W[a, b] for a, b in zip(path, path[1:]))
    return (-consecutive, _leak(path, W), tuple(path))


def _leak(path: Sequence[int], W: np.ndarray) -> float:
    """Largest |J| from a chain member to anything that is not its chain neighbour."""
    M = W.shape[0]
    worst = 0.0
    for pos, m in enumerate(path):
        nbrs = set()
        if pos > 0:
            nbrs.add(path[pos - 1])
        if pos < len(path) - 1:
            nbrs.add(path[pos + 1])
        for x in range(M):
            if x != m and x not in nbrs and W[m, x] > worst:
                worst = W[m, x]
    return float(worst)


def _canonical(path: Sequence[int]) -> tuple[int, ...]:
    path = tuple(path)
    return path if path[0] < path[-1] else path[::-1]


def select_chain(couplings: np.ndarray, L: int) -> list[int]:
    """Pick the L-spin path whose weakest consecutive coupling is strongest.

    Ties are broken by the smallest leakage (largest coupling from a member to
    a non-neighbouring member or to an off-chain spin), then lexicographically
    on the path written with ``path[0] < path[-1]``. Branch and bound over
    simple paths; both objectives have monotone bounds along a growing path.
    """
    W = np.abs(np.asarray(couplings, dtype=float))
    M = W.shape[0]
    if W.shape != (M, M):
        raise ValueError("coupling matrix must be square")
    if L > M:
        raise ValueError(f"chain length {L} exceeds cluster size {M}")
    if L < 2:
        raise ValueError("chain length must be >= 2")

    best: list = [None]  # best key tuple

    order = [sorted((x for x in range(M) if x != a), key=lambda x: (-W[a, x], x)) for a in range(M)]

    def bound_leak(path: list[int]) -> float:
        # every member except the tail already has its final neighbourhood
        worst = 0.0
        for pos in range(len(path) - 1):
            m = path[pos]
            allowed = {path[pos - 1]} if pos > 0 else set()
            allowed.add(path[pos + 1])
            for x in range(M):
                if x != m and x not in allowed and W[m, x] > worst:
                    worst = W[m, x]
        return worst

    def dfs(path: list[int], in_path: set[int], cur_min: float) -> None:
        if len(path) == L:
            if path[0] > path[-1]:
                return
            key = (-cur_min, _leak(path, W), tuple(path))
            if best[0] is None or key < best[0]:
                best[0] = key
            return
        tail = path[-1]
        for nxt in order[tail]:
            if nxt in in_path:
                continue
            new_min = min(cur_min, W[tail, nxt])
            if best[0] is not None:
                if -new_min > best[0][0]:
                    break  # neighbours are sorted by weight; the rest are worse
                path.append(nxt)
                in_path.add(nxt)
                if -new_min == best[0][0] and bound_leak(path) > best[0][1]:
                    path.pop()
                    in_path.discard(nxt)
                    continue
            else:
                path.append(nxt)
                in_path.add(nxt)
            dfs(path, in_path, new_min)
            path.pop()
            in_path.discard(nxt)

    for start in range(M):
        dfs([start], {start}, math.inf)
    return list(best[0][2])


def select_chain_exhaustive(couplings: np.ndarray, L: int) -> list[int]:
    """Reference enumeration of every simple path; exponential, for testing."""
    W = np.abs(np.asarray(couplings, dtype=float))
    M = W.shape[0]
    if L > M:
        raise ValueError(f"chain length {L} exceeds cluster size {M}")
    keys = (
        _chain_key(p, W)
        for p in itertools.permutations(range(M), L)
        if p[0] < p[-1]
    )
    return list(min(keys)[2])


def energy_density(system: SpinSystem, state: ProductState | str | Sequence[int], J0: float) -> float:
    """Ising-only effective energy per site in units of ``J0``.

    On-site fields drop out of the leading-order effective Hamiltonian under
    the period-doubled pi-pulse toggling, so only ``sum_{j<k} J_jk m_j m_k`` is kept.
    """
    if not J0 > 0:
        raise ValueError("J0 must be positive")
    if isinstance(state, ProductState):
        bits = state.bits()
    else:
        bits = parse_bitstring(state)
    if len(bits) != system.L:
        raise ValueError(f"state has {len(bits)} sites, system has {system.L}")
    m = 1.0 - 2.0 * np.asarray(bits, dtype=float)
    return float(0.5 * m @ system.J @ m / (J0 * system.L))


def all_energy_densities(system: SpinSystem, J0: float) -> np.ndarray:
    """Energy density of every bitstring, indexed like the state vector (bit j = site j)."""
    L = system.L
    idx = np.arange(2**L)
    s = 1.0 - 2.0 * ((idx[:, None] >> np.arange(L)) & 1)
    return 0.5 * np.einsum("bj,jk,bk->b", s, system.J, s) / (J0 * L)


def resonance_gap(system: SpinSystem) -> float:
    """Smallest Ising field ``|sum_k J_jk m_k|`` any spin can feel, over all configurations.

    Flipping spin ``j`` costs twice this field. A near-zero gap means some
    bitstring has a spin whose neighbours cancel, which the slightly imperfect
    pi pulse then rotates freely.
    """
    L = system.L
    if L < 2:
        raise ValueError("need at least two sites")
    m = 1.0 - 2.0 * ((np.arange(2 ** (L - 1))[:, None] >> np.arange(L - 1)) & 1)
    gap = math.inf
    for j in range(L):
        others = [k for k in range(L) if k != j]
        gap = min(gap, float(np.abs(m @ system.J[j, others]).min()))
    return gap
