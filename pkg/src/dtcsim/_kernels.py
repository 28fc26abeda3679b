"""Numba kernels acting in place on a 2**L complex state vector.

Index bit j holds spin j (0 = up). Single-site gates are butterflies on the
pairs (i, i | 1 << j) with bit j of i clear.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def diag_mul(psi, factor):
    for i in range(psi.shape[0]):
        psi[i] *= factor[i]


@njit(cache=True)
def rx_sites(psi, L, c, s):
    # exp(-i a sigma_x / 2) = [[c, -i s], [-i s, c]] with c = cos(a/2), s = sin(a/2)
    n = psi.shape[0]
    for j in range(L):
        cj = c[j]
        ms = -1j * s[j]
        step = 1 << j
        for base in range(0, n, 2 * step):
            for i in range(base, base + step):
                a = psi[i]
                b = psi[i + step]
                psi[i] = cj * a + ms * b
                psi[i + step] = ms * a + cj * b


@njit(cache=True)
def z_phases(psi, L, phases):
    # exp(-i sum_j phi_j s_j / 2), s_j = +1 for bit clear
    n = psi.shape[0]
    for i in range(n):
        acc = 0.0
        for j in range(L):
            if (i >> j) & 1:
                acc -= phases[j]
            else:
                acc += phases[j]
        psi[i] *= np.cos(0.5 * acc) - 1j * np.sin(0.5 * acc)


@njit(cache=True)
def measure(psi, L, sx, sy, sz):
    n = psi.shape[0]
    for j in range(L):
        sx[j] = 0.0
        sy[j] = 0.0
        sz[j] = 0.0
    for i in range(n):
        p = psi[i].real * psi[i].real + psi[i].imag * psi[i].imag
        for j in range(L):
            if (i >> j) & 1:
                sz[j] -= p
            else:
                sz[j] += p
                cross = np.conj(psi[i]) * psi[i | (1 << j)]
                sx[j] += 2.0 * cross.real
                sy[j] += 2.0 * cross.imag


@njit(cache=True)
def floquet_cycles(psi, L, half_factor, thetas, dephase, use_dephase):
    """Apply len(thetas) cycles of D(tau) Rx(theta_n) D(tau), optionally dephasing after each D."""
    c = np.empty(L)
    s = np.empty(L)
    for n in range(thetas.shape[0]):
        diag_mul(psi, half_factor)
        if use_dephase:
            z_phases(psi, L, dephase[n, 0])
        ch = np.cos(0.5 * thetas[n])
        sh = np.sin(0.5 * thetas[n])
        for j in range(L):
            c[j] = ch
            s[j] = sh
        rx_sites(psi, L, c, s)
        diag_mul(psi, half_factor)
        if use_dephase:
            z_phases(psi, L, dephase[n, 1])
