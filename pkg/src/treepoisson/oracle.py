"""Brute-force dense linear algebra on finite truncations.

Everything here is independent of the zeta recursion: resolvent entries come
from LU solves and functions of H from a full symmetric eigendecomposition.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg

from .tree import Address, DirectedEdge, TreeModel, format_address

MAX_DENSE_SOLVE = 8000
MAX_DENSE_EIGH = 3000
REFINEMENT_STEPS = 3


@dataclass(frozen=True)
class DenseTruncation:
    """H restricted to the ball of given radius; vertices outside are simply dropped."""

    radius: int
    matrix: np.ndarray
    vertices: tuple
    index: dict = field(repr=False)

    def row(self, v: Address) -> int:
        try:
            return self.index[tuple(v)]
        except KeyError:
            raise KeyError(f"vertex {format_address(v)} outside the truncation") from None

    @cached_property
    def eigh(self):
        if len(self.vertices) > MAX_DENSE_EIGH:
            raise ValueError(f"ball of {len(self.vertices)} vertices is too large to diagonalize")
        return np.linalg.eigh(self.matrix)


def truncate(model: TreeModel, radius: int) -> DenseTruncation:
    """Dense matrix of H on the ball of ``radius`` around the origin (tail unfolded)."""
    verts = model.ball(radius)
    if len(verts) > MAX_DENSE_SOLVE:
        raise ValueError(f"ball of radius {radius} has {len(verts)} vertices; too large")
    index = {a: i for i, a in enumerate(verts)}
    H = np.zeros((len(verts), len(verts)))
    for a, i in index.items():
        H[i, i] = model.diag(a)
        if a:
            j = index[a[:-1]]
            H[i, j] = H[j, i] = model.edge_weight(a[:-1], a)
    return DenseTruncation(radius, H, tuple(verts), index)


def finite_truncation(model: TreeModel) -> DenseTruncation:
    """The whole stored core of a tail-free model."""
    if model.tail is not None:
        raise ValueError("model has a tail; use truncate() with a radius")
    return truncate(model, int(model.depth.max()))


def _check_gamma(gamma) -> complex:
    gamma = complex(gamma)
    if not gamma.imag > 0:
        raise ValueError("dense resolvent needs Im gamma > 0")
    return gamma


def _refined_solve(M: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """LU solve of ``M x = rhs`` plus a few steps of iterative refinement.

    Residuals are accumulated in extended precision over the nonzeros of M, so
    small entries of the solution come out with full relative accuracy rather
    than only relative to the largest entry.
    """
    lu = scipy.linalg.lu_factor(M)
    x = scipy.linalg.lu_solve(lu, rhs)
    rows, cols = np.nonzero(M)
    vals = M[rows, cols].astype(np.clongdouble)
    b = rhs.astype(np.clongdouble)
    for _ in range(REFINEMENT_STEPS):
        xe = x.astype(np.clongdouble)
        r = b.copy()
        np.subtract.at(r, rows, vals.reshape((-1,) + (1,) * (x.ndim - 1)) * xe[cols])
        x = x + scipy.linalg.lu_solve(lu, r.astype(np.complex128))
    return x


def dense_resolvent(trunc: DenseTruncation, gamma) -> np.ndarray:
    """Full inverse of (H - gamma) on the truncation."""
    gamma = _check_gamma(gamma)
    n = len(trunc.vertices)
    return _refined_solve(trunc.matrix - gamma * np.eye(n), np.eye(n, dtype=complex))


def dense_resolvent_entry(trunc: DenseTruncation, v: Address, w: Address, gamma) -> complex:
    gamma = _check_gamma(gamma)
    n = len(trunc.vertices)
    rhs = np.zeros(n, dtype=complex)
    rhs[trunc.row(w)] = 1.0
    x = _refined_solve(trunc.matrix - gamma * np.eye(n), rhs)
    return complex(x[trunc.row(v)])


def _kept_rows(trunc: DenseTruncation, remove: DirectedEdge) -> list:
    a, b = tuple(remove.source), tuple(remove.target)
    # the branch through b: vertices of the truncation whose arc to a passes b
    if len(b) == len(a) + 1 and b[:-1] == a:
        drop = {u for u in trunc.vertices if u[:len(b)] == b}
    elif len(a) == len(b) + 1 and a[:-1] == b:
        drop = {u for u in trunc.vertices if u[:len(a)] != a}
    else:
        raise ValueError("removed edge endpoints are not adjacent")
    return [i for i, u in enumerate(trunc.vertices) if u not in drop]


def restricted_dense_resolvent(trunc: DenseTruncation, remove: DirectedEdge,
                               v: Address, w: Address, gamma) -> complex:
    """Entry of the resolvent of H on the component kept after cutting ``remove``."""
    gamma = _check_gamma(gamma)
    rows = _kept_rows(trunc, remove)
    pos = {trunc.vertices[r]: k for k, r in enumerate(rows)}
    for x in (v, w):
        if tuple(x) not in pos:
            raise ValueError(f"vertex {format_address(x)} lies in the removed branch")
    sub = trunc.matrix[np.ix_(rows, rows)] - gamma * np.eye(len(rows))
    rhs = np.zeros(len(rows), dtype=complex)
    rhs[pos[tuple(w)]] = 1.0
    return complex(_refined_solve(sub, rhs)[pos[tuple(v)]])


def dense_function_entry(trunc: DenseTruncation, F, v: Address, w: Address) -> complex:
    """F(H)(v, w) = sum_k F(lambda_k) phi_k(v) phi_k(w) on the truncation."""
    lam, phi = trunc.eigh
    i, j = trunc.row(v), trunc.row(w)
    return complex(np.sum(np.asarray(F(lam)) * phi[i] * phi[j]))


def dense_function_matrix(trunc: DenseTruncation, F) -> np.ndarray:
    lam, phi = trunc.eigh
    return (phi * np.asarray(F(lam))) @ phi.T


def effective_core_resolvent(model: TreeModel, gamma) -> np.ndarray:
    """Exact Green matrix on the stored core, tails folded in as self-energies.

    The tail below a frontier vertex acts on the core only through its
    closed-form Schur complement, so this is exact for any admissible gamma,
    including E + i0 (pass ``complex(E, 0)``).
    """
    gamma = complex(gamma)
    n = len(model)
    A = np.zeros((n, n), dtype=complex)
    A[np.arange(n), np.arange(n)] = model.diagonal - gamma
    for p, c, w in model.iter_edges():
        A[p, c] = A[c, p] = w
    if model.tail is not None:
        t = model.tail
        # restricted Green function g of a tail branch: q t^2 g^2 + (gamma - V0) g + 1 = 0
        roots = np.roots([t.branching * t.weight ** 2, gamma - t.potential, 1.0])
        g = roots[np.argmax(roots.imag)]
        if not g.imag > 0:
            raise ValueError("energy outside the tail band")
        for f in t.frontier:
            A[f, f] -= t.branching * t.weight ** 2 * g
    elif gamma.imag <= 0:
        raise ValueError("tail-free model needs Im gamma > 0")
    return _refined_solve(A, np.eye(n, dtype=complex))


def closed_walks(trunc: DenseTruncation, v: Address, k: int) -> int:
    """Number of closed walks of length ``k`` at ``v`` (exact for unit weights, k <= 2*radius)."""
    H = trunc.matrix.copy()
    np.fill_diagonal(H, 0.0)
    x = np.zeros(len(trunc.vertices))
    x[trunc.row(v)] = 1.0
    for _ in range(k):
        x = H @ x
    return int(round(x[trunc.row(v)]))
