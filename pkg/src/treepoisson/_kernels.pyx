# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled tree recursions.

Vertices are indexed in DFS preorder (parent before child, subtree contiguous).
Both routines mirror ``_kernels_py`` exactly; that module is the reference.
"""
import numpy as np
from libc.math cimport hypot, INFINITY
from libc.stdint cimport int64_t, uint8_t


def zeta_sweeps(const int64_t[::1] parent, const int64_t[::1] child_ptr,
                const int64_t[::1] child_idx, const double[::1] weight_up,
                const double[::1] diag, const uint8_t[::1] frontier,
                const double complex[::1] gammas, const double complex[::1] sigma):
    """Leaf-inward then root-outward sweeps for every spectral parameter.

    Returns ``down, up, g, min_denominator`` where, for vertex i with parent p,
    ``down[e, i]`` is zeta_p(i), ``up[e, i]`` is zeta_i(p) and ``g[e, i]`` is
    G(i, i).  ``sigma[e]`` is the tail contribution added at frontier vertices.
    """
    cdef Py_ssize_t n = parent.shape[0]
    cdef Py_ssize_t m = gammas.shape[0]
    down_a = np.zeros((m, n), dtype=np.complex128)
    up_a = np.zeros((m, n), dtype=np.complex128)
    g_a = np.zeros((m, n), dtype=np.complex128)
    mind_a = np.full(m, INFINITY)
    cdef double complex[:, ::1] down = down_a
    cdef double complex[:, ::1] up = up_a
    cdef double complex[:, ::1] g = g_a
    cdef double[::1] mind = mind_a
    cdef Py_ssize_t e, i, k, kk, c, c2
    cdef double complex gam, sig, s, base, tot
    cdef double a, lo
    with nogil:
        for e in range(m):
            gam = gammas[e]
            sig = sigma[e]
            lo = INFINITY
            for i in range(n - 1, -1, -1):
                s = diag[i] - gam
                if frontier[i]:
                    s = s + sig
                for k in range(child_ptr[i], child_ptr[i + 1]):
                    c = child_idx[k]
                    s = s + weight_up[c] * down[e, c]
                if i > 0:
                    a = hypot(s.real, s.imag)
                    if a < lo:
                        lo = a
                    down[e, i] = -weight_up[i] / s
            for i in range(n):
                base = diag[i] - gam
                if frontier[i]:
                    base = base + sig
                if i > 0:
                    base = base + weight_up[i] * up[e, i]
                tot = base
                for k in range(child_ptr[i], child_ptr[i + 1]):
                    c = child_idx[k]
                    tot = tot + weight_up[c] * down[e, c]
                a = hypot(tot.real, tot.imag)
                if a < lo:
                    lo = a
                g[e, i] = 1.0 / tot
                for k in range(child_ptr[i], child_ptr[i + 1]):
                    c = child_idx[k]
                    s = base
                    for kk in range(child_ptr[i], child_ptr[i + 1]):
                        c2 = child_idx[kk]
                        if c2 != c:
                            s = s + weight_up[c2] * down[e, c2]
                    a = hypot(s.real, s.imag)
                    if a < lo:
                        lo = a
                    up[e, c] = -weight_up[c] / s
            mind[e] = lo
    return down_a, up_a, g_a, mind_a


def green_matrix(const int64_t[::1] parent, const int64_t[::1] subtree_end,
                 const double complex[::1] down, const double complex[::1] g):
    """All Green entries G(s, t) of the stored core from one zeta field.

    Column t is built from column parent(t) outside the subtree of t, and
    row-wise from the parent of s inside it.
    """
    cdef Py_ssize_t n = parent.shape[0]
    out = np.zeros((n, n), dtype=np.complex128)
    cdef double complex[:, ::1] G = out
    cdef Py_ssize_t s, t, p, end
    cdef double complex d
    with nogil:
        for t in range(n):
            G[t, t] = g[t]
            end = subtree_end[t]
            if t > 0:
                p = parent[t]
                d = down[t]
                for s in range(t):
                    G[s, t] = d * G[s, p]
                for s in range(end, n):
                    G[s, t] = d * G[s, p]
            for s in range(t + 1, end):
                G[s, t] = down[s] * G[parent[s], t]
    return out
