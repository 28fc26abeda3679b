"""Exact state-vector evolution under the symmetrized Floquet drive.

One cycle is ``U_int(tau) . U_x(theta) . U_int(tau)`` with instantaneous
global x-rotations. Phases are ``2*pi * frequency[Hz] * time[s]``.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np
from scipy.linalg import expm

from . import _kernels
from .model import ProductState, SpinSystem

MAX_DENSE_L = 6
TWO_PI = 2.0 * math.pi
NORM_RESET = 1e-12


class DimensionError(ValueError):
    pass


@dataclass
class QuantumState:
    """2**L complex amplitudes; index bit j is spin j, 0 meaning up."""

    amplitudes: np.ndarray
    L: int

    def __post_init__(self) -> None:
        self.amplitudes = np.ascontiguousarray(self.amplitudes, dtype=np.complex128)
        if self.amplitudes.shape != (2**self.L,):
            raise DimensionError(
                f"expected {2**self.L} amplitudes for L={self.L}, got {self.amplitudes.shape}"
            )

    def copy(self) -> "QuantumState":
        return QuantumState(self.amplitudes.copy(), self.L)

    def norm_sq(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)


@dataclass(frozen=True)
class FloquetProtocol:
    tau: float
    theta: float
    cycles: int
    rotation_noise_sigma: float = 0.0
    dephasing_rate: float = 0.0
    interactions_enabled: bool = True
    record_xy: bool = False

    def __post_init__(self) -> None:
        if not self.tau >= 0:
            raise ValueError(f"tau must be >= 0, got {self.tau}")
        if int(self.cycles) != self.cycles or self.cycles < 0:
            raise ValueError(f"cycles must be a non-negative integer, got {self.cycles}")
        if not self.rotation_noise_sigma >= 0 or not self.dephasing_rate >= 0:
            raise ValueError("noise parameters must be >= 0")
        object.__setattr__(self, "cycles", int(self.cycles))

    @property
    def dephasing_sigma(self) -> float:
        """Per-spin z-phase standard deviation (rad) applied after each half-cycle."""
        return TWO_PI * math.sqrt(self.dephasing_rate * self.tau)

    @property
    def is_noiseless(self) -> bool:
        return self.rotation_noise_sigma == 0 and self.dephasing_rate == 0

    def to_dict(self) -> dict:
        return {
            "tau_s": self.tau,
            "theta_rad": self.theta,
            "cycles": self.cycles,
            "rotation_noise_sigma_rad": self.rotation_noise_sigma,
            "dephasing_rate_hz": self.dephasing_rate,
            "interactions_enabled": self.interactions_enabled,
            "record_xy": self.record_xy,
        }


@dataclass
class TrajectoryRecord:
    """Per-site expectations at the recorded cycles (row i is ``cycles[i]``)."""

    cycles: np.ndarray
    sz: np.ndarray
    sx: np.ndarray | None
    sy: np.ndarray | None
    protocol: FloquetProtocol
    seed: int | None
    system_digest: str
    wall_time: float = 0.0
    final_state: QuantumState | None = None
    states: np.ndarray | None = field(default=None, repr=False)

    @property
    def L(self) -> int:
        return self.sz.shape[1]

    def index_of(self, cycle: int) -> int:
        hits = np.flatnonzero(self.cycles == cycle)
        if hits.size == 0:
            raise KeyError(f"cycle {cycle} was not recorded")
        return int(hits[0])


def prepare_product_state(spec: ProductState) -> QuantumState:
    """Tensor product of ``cos(p/2)|up> + exp(i a) sin(p/2)|down>`` over sites."""
    psi = np.ones(1, dtype=np.complex128)
    # site 0 is the least significant bit, so it is the innermost kron factor
    for polar, az in zip(spec.polar, spec.azimuth):
        c = 0.0 if polar == math.pi else math.cos(polar / 2)  # exact basis states for bitstrings
        site = np.array([c, np.exp(1j * az) * math.sin(polar / 2)])
        psi = np.kron(site, psi)
    return QuantumState(psi, spec.L)


def spin_signs(L: int) -> np.ndarray:
    """(2**L, L) array of s_j = +1/-1 for every basis index."""
    idx = np.arange(2**L)
    return 1.0 - 2.0 * ((idx[:, None] >> np.arange(L)) & 1)


def diagonal_energies(system: SpinSystem, interactions: bool = True) -> np.ndarray:
    """E(b) = sum_j (B + h_j) s_j + sum_{j<k} J_jk s_j s_k in Hz for every basis state."""
    s = spin_signs(system.L)
    E = s @ (system.B + system.h)
    if interactions:
        E = E + 0.5 * np.einsum("bj,jk,bk->b", s, system.J, s)
    return E


def _check(state: QuantumState, L: int) -> None:
    if state.L != L:
        raise DimensionError(f"state has L={state.L}, expected {L}")


def apply_diagonal_evolution(
    state: QuantumState, system: SpinSystem, t: float, interactions: bool = True
) -> QuantumState:
    _check(state, system.L)
    if t < 0:
        raise ValueError("evolution time must be >= 0")
    factor = np.exp(-1j * TWO_PI * t * diagonal_energies(system, interactions))
    _kernels.diag_mul(state.amplitudes, factor)
    return state


def apply_x_rotation(state: QuantumState, angles: Sequence[float] | float) -> QuantumState:
    """Apply ``exp(-i angle_j sigma^x_j / 2)`` on every site (scalar means global)."""
    a = np.broadcast_to(np.asarray(angles, dtype=float), (state.L,)) if np.ndim(angles) == 0 \
        else np.asarray(angles, dtype=float)
    if a.shape != (state.L,):
        raise DimensionError(f"need {state.L} angles, got {a.shape}")
    _kernels.rx_sites(state.amplitudes, state.L, np.cos(a / 2), np.sin(a / 2))
    return state


def apply_z_dephasing(state: QuantumState, phases: Sequence[float]) -> QuantumState:
    """One stochastic realization: ``exp(-i sum_j phi_j s_j / 2)``."""
    p = np.asarray(phases, dtype=float)
    if p.shape != (state.L,):
        raise DimensionError(f"need {state.L} phases, got {p.shape}")
    _kernels.z_phases(state.amplitudes, state.L, p)
    return state


def measure_local_observables(state: QuantumState) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return per-site (<sx>, <sy>, <sz>) without touching the state."""
    L = state.L
    sx, sy, sz = np.empty(L), np.empty(L), np.empty(L)
    _kernels.measure(state.amplitudes, L, sx, sy, sz)
    return sx, sy, sz


def _renormalize(state: QuantumState) -> None:
    # roundoff drift over ~1e6 cycles reaches 1e-10; the kernels are unitary otherwise
    norm = state.norm_sq()
    if abs(norm - 1.0) > NORM_RESET:
        state.amplitudes /= math.sqrt(norm)


def _record_schedule(cycles: int, record_cycles: Iterable[int] | None) -> np.ndarray:
    if record_cycles is None:
        return np.arange(cycles + 1)
    sched = np.unique(np.asarray(list(record_cycles), dtype=np.int64))
    if sched.size and (sched[0] < 0 or sched[-1] > cycles):
        raise ValueError(f"record cycles must lie in [0, {cycles}]")
    return sched


def run_floquet(
    state: QuantumState,
    system: SpinSystem,
    protocol: FloquetProtocol,
    seed: int | np.random.SeedSequence | None = None,
    record_cycles: Iterable[int] | None = None,
    keep_states: bool = False,
) -> TrajectoryRecord:
    """Evolve a copy of ``state`` through ``protocol.cycles`` Floquet cycles.

    Observables are recorded at every cycle by default, or only at the cycle
    indices in ``record_cycles`` (0 = before the first cycle). Rotation jitter
    and dephasing phases come from two independent streams spawned from
    ``seed``, so the noise realization does not depend on the recording
    cadence.
    """
    L = system.L
    _check(state, L)
    psi = state.copy()
    schedule = _record_schedule(protocol.cycles, record_cycles)

    half = np.exp(-1j * TWO_PI * protocol.tau * diagonal_energies(system, protocol.interactions_enabled))
    seq = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    rot_rng, deph_rng = (np.random.default_rng(s) for s in seq.spawn(2))
    use_dephase = protocol.dephasing_rate > 0 and protocol.tau > 0
    deph_sigma = protocol.dephasing_sigma
    empty_deph = np.zeros((0, 2, L))

    nrec = schedule.size
    sz = np.empty((nrec, L))
    sx = np.empty((nrec, L)) if protocol.record_xy else None
    sy = np.empty((nrec, L)) if protocol.record_xy else None
    states = np.empty((nrec, 2**L), dtype=np.complex128) if keep_states else None
    bx, by, bz = np.empty(L), np.empty(L), np.empty(L)

    start = time.perf_counter()
    done = 0
    for r, target in enumerate(schedule):
        while done < target:
            k = int(min(target - done, 4096))
            thetas = np.full(k, float(protocol.theta))
            if protocol.rotation_noise_sigma > 0:
                thetas += protocol.rotation_noise_sigma * rot_rng.standard_normal(k)
            if use_dephase:
                deph = deph_sigma * deph_rng.standard_normal((k, 2, L))
            else:
                deph = empty_deph
            _kernels.floquet_cycles(psi.amplitudes, L, half, thetas, deph, use_dephase)
            done += k
            _renormalize(psi)
        _kernels.measure(psi.amplitudes, L, bx, by, bz)
        sz[r] = bz
        if sx is not None:
            sx[r] = bx
            sy[r] = by
        if states is not None:
            states[r] = psi.amplitudes
    if done < protocol.cycles:
        # evolve through unrecorded trailing cycles so final_state matches the protocol
        rest = protocol.cycles - done
        thetas = np.full(rest, float(protocol.theta))
        if protocol.rotation_noise_sigma > 0:
            thetas += protocol.rotation_noise_sigma * rot_rng.standard_normal(rest)
        deph = deph_sigma * deph_rng.standard_normal((rest, 2, L)) if use_dephase else empty_deph
        _kernels.floquet_cycles(psi.amplitudes, L, half, thetas, deph, use_dephase)
        _renormalize(psi)

    norm = psi.norm_sq()
    if abs(norm - 1.0) > 1e-10:
        raise FloatingPointError(f"state norm drifted to {norm!r}")

    return TrajectoryRecord(
        cycles=schedule,
        sz=sz,
        sx=sx,
        sy=sy,
        protocol=protocol,
        seed=seed if isinstance(seed, (int, np.integer)) or seed is None else None,
        system_digest=system.digest(),
        wall_time=time.perf_counter() - start,
        final_state=psi,
        states=states,
    )


def _pauli_on_site(op: np.ndarray, j: int, L: int) -> np.ndarray:
    # kron ordering puts site L-1 leftmost so index bit j is site j
    out = np.ones((1, 1), dtype=np.complex128)
    for site in reversed(range(L)):
        out = np.kron(out, op if site == j else np.eye(2))
    return out


def dense_oracle_step(system: SpinSystem, tau: float, theta: float, interactions: bool = True) -> np.ndarray:
    """Dense ``U_int(tau) U_x(theta) U_int(tau)`` built by matrix exponentiation.

    Independent of the kernels above; intended for verification only.
    """
    L = system.L
    if L > MAX_DENSE_L:
        raise DimensionError(f"dense oracle limited to L <= {MAX_DENSE_L}, got {L}")
    X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
    Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)
    Zs = [_pauli_on_site(Z, j, L) for j in range(L)]
    H = sum((system.B + system.h[j]) * Zs[j] for j in range(L))
    if interactions:
        for j in range(L):
            for k in range(j + 1, L):
                H = H + system.J[j, k] * (Zs[j] @ Zs[k])
    Xsum = sum(_pauli_on_site(X, j, L) for j in range(L))
    U_int = expm(-1j * TWO_PI * tau * H)
    U_x = expm(-0.5j * theta * Xsum)
    return U_int @ U_x @ U_int


def with_cycles(protocol: FloquetProtocol, cycles: int) -> FloquetProtocol:
    return replace(protocol, cycles=cycles)
