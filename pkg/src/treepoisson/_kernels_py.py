"""Pure-Python/numpy implementation of the tree recursions.

Same contract as the compiled ``_kernels`` module.  The sweeps vectorize over
spectral parameters; the vertex loops stay in Python.
"""
import numpy as np


def zeta_sweeps(parent, child_ptr, child_idx, weight_up, diag, frontier, gammas, sigma):
    # fmin skips NaN denominators downstream of an exact pole, like the compiled `a < lo`
    with np.errstate(divide="ignore", invalid="ignore"):
        return _zeta_sweeps(parent, child_ptr, child_idx, weight_up, diag, frontier, gammas, sigma)


def _zeta_sweeps(parent, child_ptr, child_idx, weight_up, diag, frontier, gammas, sigma):
    n = len(parent)
    gammas = np.asarray(gammas, dtype=np.complex128)
    sigma = np.asarray(sigma, dtype=np.complex128)
    m = len(gammas)
    down = np.zeros((n, m), dtype=np.complex128)
    up = np.zeros((n, m), dtype=np.complex128)
    g = np.zeros((n, m), dtype=np.complex128)
    lo = np.full(m, np.inf)
    kids = [child_idx[child_ptr[i]:child_ptr[i + 1]] for i in range(n)]

    for i in range(n - 1, -1, -1):
        s = diag[i] - gammas
        if frontier[i]:
            s = s + sigma
        for c in kids[i]:
            s = s + weight_up[c] * down[c]
        if i > 0:
            lo = np.fmin(lo, np.abs(s))
            down[i] = -weight_up[i] / s

    for i in range(n):
        base = diag[i] - gammas
        if frontier[i]:
            base = base + sigma
        if i > 0:
            base = base + weight_up[i] * up[i]
        tot = base
        for c in kids[i]:
            tot = tot + weight_up[c] * down[c]
        lo = np.fmin(lo, np.abs(tot))
        g[i] = 1.0 / tot
        for c in kids[i]:
            s = base
            for c2 in kids[i]:
                if c2 != c:
                    s = s + weight_up[c2] * down[c2]
            lo = np.fmin(lo, np.abs(s))
            up[c] = -weight_up[c] / s

    return (np.ascontiguousarray(down.T), np.ascontiguousarray(up.T),
            np.ascontiguousarray(g.T), lo)


def green_matrix(parent, subtree_end, down, g):
    n = len(parent)
    G = np.zeros((n, n), dtype=np.complex128)
    for t in range(n):
        G[t, t] = g[t]
        end = subtree_end[t]
        if t > 0:
            p = parent[t]
            G[:t, t] = down[t] * G[:t, p]
            G[end:, t] = down[t] * G[end:, p]
        for s in range(t + 1, end):
            G[s, t] = down[s] * G[parent[s], t]
    return G
