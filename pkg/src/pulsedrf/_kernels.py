"""Compiled inner loops for propagation in Liouville space.

Every kernel is deterministic in its output regardless of the numba thread
count: parallel loops only write disjoint slices, and reductions happen in a
fixed serial order.
"""

import numba as nb
import numpy as np


@nb.njit(cache=True, inline="always")
def _matvec(m, v, out):
    for i in range(4):
        acc = 0j
        for j in range(4):
            acc += m[i, j] * v[j]
        out[i] = acc


@nb.njit(cache=True)
def evolve_lattice(steps, tail, substeps, a_tail, v0, n_lattice):
    """Propagate ``v0`` and return its value at every lattice point.

    ``steps[k]`` maps fine step ``k -> k+1``; once lattice index ``a_tail`` is
    reached the constant one-lattice-step map ``tail`` is used.
    """
    out = np.empty((n_lattice, 4), dtype=np.complex128)
    v = v0.copy()
    tmp = np.empty(4, dtype=np.complex128)
    out[0] = v
    for a in range(1, n_lattice):
        if a - 1 < a_tail:
            k0 = (a - 1) * substeps
            for k in range(k0, k0 + substeps):
                _matvec(steps[k], v, tmp)
                v[:] = tmp
        else:
            _matvec(tail, v, tmp)
            v[:] = tmp
        out[a] = v
    return out


@nb.njit(cache=True, parallel=True)
def regression_rows_full(steps, tail, substeps, a_tail, starts, init, n_tau):
    """Full correlation rows ``g[r, j] = tr(s- B_r(tau_j))``.

    Row ``r`` starts at lattice index ``starts[r]`` with Liouville vector
    ``init[r]``.
    """
    n_rows = starts.shape[0]
    g = np.empty((n_rows, n_tau), dtype=np.complex128)
    for r in nb.prange(n_rows):
        v = init[r].copy()
        tmp = np.empty(4, dtype=np.complex128)
        g[r, 0] = v[1]
        a = starts[r]
        for j in range(1, n_tau):
            if a < a_tail:
                k0 = a * substeps
                for k in range(k0, k0 + substeps):
                    _matvec(steps[k], v, tmp)
                    v[:] = tmp
            else:
                _matvec(tail, v, tmp)
                v[:] = tmp
            a += 1
            g[r, j] = v[1]
    return g


@nb.njit(cache=True, parallel=True)
def regression_rows_pretail(steps, substeps, a_tail, starts, init, n_tau):
    """Propagate rows that start before the constant tail up to its start.

    Returns ``(g, entry)`` where ``g[r, j]`` holds the correlation for
    ``j < a_tail - starts[r]`` (zero elsewhere) and ``entry[r]`` is the
    Liouville vector on reaching the tail (or at ``n_tau - 1``).
    """
    n_rows = starts.shape[0]
    width = 1
    for r in range(n_rows):
        w = min(a_tail - starts[r], n_tau)
        if w > width:
            width = w
    g = np.zeros((n_rows, width), dtype=np.complex128)
    entry = np.empty((n_rows, 4), dtype=np.complex128)
    for r in nb.prange(n_rows):
        v = init[r].copy()
        tmp = np.empty(4, dtype=np.complex128)
        a = starts[r]
        stop = min(a_tail - a, n_tau - 1)
        for j in range(stop):
            g[r, j] = v[1]
            k0 = a * substeps
            for k in range(k0, k0 + substeps):
                _matvec(steps[k], v, tmp)
                v[:] = tmp
            a += 1
        entry[r] = v
    return g, entry


@nb.njit(cache=True)
def tail_accumulate(tail, inject, n_tau):
    """Run the pooled tail state ``S_{j+1} = M S_j + inject[j+1]``.

    Returns ``tr(s- S_j)`` for every ``j``.
    """
    out = np.empty(n_tau, dtype=np.complex128)
    s = inject[0].copy()
    tmp = np.empty(4, dtype=np.complex128)
    out[0] = s[1]
    for j in range(1, n_tau):
        _matvec(tail, s, tmp)
        for i in range(4):
            s[i] = tmp[i] + inject[j, i]
        out[j] = s[1]
    return out


@nb.njit(cache=True, parallel=True)
def weighted_cross_correlation(x, starts, weights, s, n_tau):
    """``c[j] = sum_r weights[r] * x[r] * s[starts[r] + j]``, serial over ``r``."""
    c = np.empty(n_tau, dtype=np.complex128)
    n_rows = starts.shape[0]
    for j in nb.prange(n_tau):
        acc = 0j
        for r in range(n_rows):
            acc += weights[r] * x[r] * s[starts[r] + j]
        c[j] = acc
    return c


@nb.njit(cache=True, parallel=True)
def cos_sin_sums(tau0, step, n, nodes, even, odd):
    """``sum_k even_k cos(w_k t) - i sum_k odd_k sin(w_k t)`` on ``t = tau0 + step*m``.

    Phases advance by recurrence, resynchronised every 64 points.
    """
    out = np.empty(n, dtype=np.complex128)
    n_blocks = (n + 63) // 64
    for b in nb.prange(n_blocks):
        m0 = b * 64
        m1 = min(m0 + 64, n)
        acc = np.zeros(m1 - m0, dtype=np.complex128)
        for k in range(nodes.shape[0]):
            w = nodes[k]
            z = np.exp(1j * w * (tau0 + step * m0))
            dz = np.exp(1j * w * step)
            ek = even[k]
            ok = odd[k]
            for m in range(m1 - m0):
                acc[m] += ek * z.real - 1j * ok * z.imag
                z *= dz
        out[m0:m1] = acc
    return out
