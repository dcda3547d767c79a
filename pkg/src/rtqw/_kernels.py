"""Numba kernels for the per-sample Monte Carlo hot path (d = 1 only).

Each sample evolves its own windowed state; the active window grows by the
jump range per step, so early steps touch only a few sites.  Samples are
independent, which keeps the parallel loop deterministic: every output row
depends only on its own input row.
"""

from __future__ import annotations

import numpy as np
from numba import njit, prange


@njit(cache=True, parallel=True)
def moments_1d(coin_idx, coin_mats, jumps, phi0, out):
    """Accumulate per-sample (E[X], E[X^2], norm^2) into out (S, 3)."""
    S, n = coin_idx.shape
    m = coin_mats.shape[1]
    rho = 0
    for t in range(m):
        a = abs(jumps[t])
        if a > rho:
            rho = a
    L = 2 * rho * n + 1
    for s in prange(S):
        psi = np.zeros((m, L), dtype=np.complex128)
        tmp = np.zeros((m, L), dtype=np.complex128)
        c0 = rho * n
        for t in range(m):
            psi[t, c0] = phi0[t]
        lo = c0
        hi = c0 + 1
        for step in range(n):
            C = coin_mats[coin_idx[s, step]]
            nlo = lo - rho
            nhi = hi + rho
            for t in range(m):
                for x in range(nlo, nhi):
                    tmp[t, x] = 0.0
            for t in range(m):
                sh = jumps[t]
                for x in range(lo, hi):
                    acc = 0.0 + 0.0j
                    for u in range(m):
                        acc += C[t, u] * psi[u, x]
                    tmp[t, x + sh] += acc
            swap = psi
            psi = tmp
            tmp = swap
            lo = nlo
            hi = nhi
        ex = 0.0
        ex2 = 0.0
        nrm = 0.0
        for x in range(lo, hi):
            w = 0.0
            for t in range(m):
                w += psi[t, x].real ** 2 + psi[t, x].imag ** 2
            k = x - c0
            ex += w * k
            ex2 += w * k * k
            nrm += w
        out[s, 0] = ex
        out[s, 1] = ex2
        out[s, 2] = nrm


@njit(cache=True, parallel=True)
def weights_1d(coin_idx, coin_mats, jumps, phi0, out):
    """Per-sample position weights into out (S, 2*rho*n + 1), origin centred."""
    S, n = coin_idx.shape
    m = coin_mats.shape[1]
    rho = 0
    for t in range(m):
        a = abs(jumps[t])
        if a > rho:
            rho = a
    L = 2 * rho * n + 1
    for s in prange(S):
        psi = np.zeros((m, L), dtype=np.complex128)
        tmp = np.zeros((m, L), dtype=np.complex128)
        c0 = rho * n
        for t in range(m):
            psi[t, c0] = phi0[t]
        lo = c0
        hi = c0 + 1
        for step in range(n):
            C = coin_mats[coin_idx[s, step]]
            nlo = lo - rho
            nhi = hi + rho
            for t in range(m):
                for x in range(nlo, nhi):
                    tmp[t, x] = 0.0
            for t in range(m):
                sh = jumps[t]
                for x in range(lo, hi):
                    acc = 0.0 + 0.0j
                    for u in range(m):
                        acc += C[t, u] * psi[u, x]
                    tmp[t, x + sh] += acc
            swap = psi
            psi = tmp
            tmp = swap
            lo = nlo
            hi = nhi
        for x in range(L):
            w = 0.0
            for t in range(m):
                w += psi[t, x].real ** 2 + psi[t, x].imag ** 2
            out[s, x] = w
