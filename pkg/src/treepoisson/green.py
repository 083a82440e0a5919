"""Green functions of H on a tree via the zeta recursion.

Notation follows the usual tree conventions: for adjacent ``v``, ``w``,
``zeta_w(v) = -p_v(w) G^(v|w)(v, v)`` is (minus) the Green function at ``v``
of the tree with the branch through ``w`` cut off, scaled by the edge weight.
With ``G(v, v) = -1 / (2 m_v)`` every Green entry is a product of zetas along
an arc.

A :class:`ZetaField` holds one sweep of these values over the stored core,
either for a single spectral parameter or, in batch mode, for an array of
them (accessors then return arrays).  Tail vertices are unfolded lazily.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from . import kernels
from .tree import Address, DirectedEdge, TreeModel, arc_between, format_address

POLE_THRESHOLD = 1e-12
RESIDUAL_TOL = 1e-10


class PoleError(ValueError):
    """A boundary evaluation came within the pole threshold of a singularity."""


@dataclass(frozen=True)
class SpectralParameter:
    """gamma = E + i*eta; ``eta == 0`` means the boundary value E + i0."""

    energy: float
    eta: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.energy) and np.isfinite(self.eta)):
            raise ValueError("spectral parameter must be finite")
        if self.eta < 0:
            raise ValueError("eta must be >= 0 (upper half-plane or E + i0)")

    @property
    def boundary(self) -> bool:
        return self.eta == 0

    @property
    def gamma(self) -> complex:
        return complex(self.energy, self.eta)

    @classmethod
    def parse(cls, text: str) -> "SpectralParameter":
        """Parse ``"E+etai"`` (``"0+1i"``, ``"-0.5+0.1i"``, ``"0.3"``)."""
        t = text.strip().replace(" ", "").replace("i", "j")
        try:
            z = complex(t)
        except ValueError as exc:
            raise ValueError(f"cannot parse spectral parameter {text!r}") from exc
        return cls(z.real, z.imag)

    def __str__(self):
        return f"{self.energy!r}+{self.eta!r}i"

    def check(self, model: TreeModel) -> None:
        """Raise unless the parameter is admissible for ``model``."""
        if not self.boundary:
            return
        if model.tail is None:
            raise ValueError("boundary parameter E+i0 needs a model with a homogeneous tail")
        lo, hi = model.tail.band
        if not (lo < self.energy < hi):
            raise ValueError(f"E={self.energy} is outside the open tail band ({lo}, {hi})")


def as_parameter(p) -> SpectralParameter:
    if isinstance(p, SpectralParameter):
        return p
    if isinstance(p, str):
        return SpectralParameter.parse(p)
    z = complex(p)
    return SpectralParameter(z.real, z.imag)


def _homogeneous_y(q, v0, t, gammas, boundary):
    """Solution y (Im y < 0) of q t^2 y^2 + (V0 - gamma) y + 1 = 0, vectorized.

    y is minus the restricted Green function at the root of a q-ary tail
    branch; the tail zeta is ``t * y``.
    """
    gammas = np.asarray(gammas, dtype=np.complex128)
    a = q * t * t
    x = gammas - v0
    if boundary:
        e = x.real
        return (e - 1j * np.sqrt(4 * a - e * e)) / (2 * a)
    disc = np.sqrt(x * x - 4 * a)
    # larger-magnitude root first, the other from the product 1/a
    r1 = np.where(np.abs(x + disc) >= np.abs(x - disc), x + disc, x - disc) / (2 * a)
    r2 = 1.0 / (a * r1)
    return np.where(r1.imag < 0, r1, r2)


def zeta_homogeneous(branching: int, tail_potential: float, tail_weight: float,
                     parameter) -> complex:
    """Closed-form zeta on every outward edge of a homogeneous q-ary tail.

    Solves ``q zeta^2 + (V0 - gamma) zeta + 1 = 0`` (weight 1; in general
    ``q t zeta^2 + (V0 - gamma) zeta + t = 0``) on the branch with
    ``Im(zeta / t) < 0``.  At E + i0 the limit branch
    ``((E - V0) - i sqrt(4 q t^2 - (E - V0)^2)) / (2 q t)`` is used, which
    requires E strictly inside the band.
    """
    par = as_parameter(parameter)
    q, t = int(branching), float(tail_weight)
    if q < 1:
        raise ValueError("branching must be >= 1")
    if t == 0:
        raise ValueError("tail weight must be nonzero")
    if par.boundary:
        half = 2 * abs(t) * np.sqrt(q)
        if not abs(par.energy - tail_potential) < half:
            raise ValueError(f"E={par.energy} is outside the open band of the tail")
    y = _homogeneous_y(q, tail_potential, t, [par.gamma], par.boundary)[0]
    return complex(t * y)


class ZetaField:
    """Zeta values, diagonal Green function and m on a model for fixed gamma.

    ``zeta(v, w)`` is zeta_w(v); ``down(v)`` is zeta_{parent}(v) and ``up(v)``
    is zeta_v(parent).  In batch mode every accessor returns an array over the
    parameters.
    """

    def __init__(self, model: TreeModel, parameters: Sequence[SpectralParameter],
                 down, up, g, y, min_denominator, batch: bool):
        self.model = model
        self.parameters = tuple(parameters)
        self.batch = batch
        self.gammas = np.array([p.gamma for p in self.parameters], dtype=np.complex128)
        self.etas = self.gammas.imag.copy()
        self.boundary = bool(self.parameters[0].boundary)
        self._down, self._up, self._g = down, up, g
        self._y = y
        self.min_denominator = min_denominator
        self._tail_up_cache = {}
        for a in (down, up, g):
            a.setflags(write=False)

    @property
    def parameter(self) -> SpectralParameter:
        if self.batch:
            raise AttributeError("batch field has several parameters")
        return self.parameters[0]

    def _out(self, arr):
        return arr if self.batch else complex(arr[0])

    # -- tail unfolding ----------------------------------------------------
    def _tail_up(self, f: int, k: int) -> np.ndarray:
        key = (f, k)
        hit = self._tail_up_cache.get(key)
        if hit is not None:
            return hit
        tail = self.model.tail
        q, t = tail.branching, tail.weight
        rest = (q - 1) * t * t * self._y
        if k == 1:
            den = self.model.diagonal[f] - self.gammas + rest
            if f != 0:
                den = den + self.model.weight_up[f] * self._up[:, f]
        else:
            den = tail.potential - self.gammas + rest + t * self._tail_up(f, k - 1)
        self._gate(den)
        val = -t / den
        val.setflags(write=False)
        self._tail_up_cache[key] = val
        return val

    def _gate(self, den):
        if self.boundary and np.min(np.abs(den)) < POLE_THRESHOLD:
            raise PoleError("boundary evaluation hit a near-pole denominator in the tail")

    # -- accessors -----------------------------------------------------------
    def down(self, v: Address):
        """zeta_{parent(v)}(v): at v, with the branch toward the origin removed."""
        v = tuple(v)
        if not v:
            raise ValueError("the origin has no parent")
        i, k = self.model.locate(v)
        if k == 0:
            return self._out(self._down[:, i])
        return self._out(self.model.tail.weight * self._y)

    def up(self, v: Address):
        """zeta_v(parent(v)): at the parent of v, with the branch through v removed."""
        v = tuple(v)
        if not v:
            raise ValueError("the origin has no parent")
        i, k = self.model.locate(v)
        if k == 0:
            return self._out(self._up[:, i])
        return self._out(self._tail_up(i, k))

    def zeta(self, v: Address, w: Address):
        """zeta_w(v) for adjacent v, w."""
        v, w = tuple(v), tuple(w)
        if len(v) == len(w) + 1 and v[:-1] == w:
            return self.down(v)
        if len(w) == len(v) + 1 and w[:-1] == v:
            return self.up(w)
        raise ValueError(f"{format_address(v)} and {format_address(w)} are not adjacent")

    def zeta_edge(self, edge: DirectedEdge):
        return self.zeta(edge.source, edge.target)

    def g_diag(self, v: Address):
        """G(v, v; gamma)."""
        v = tuple(v)
        i, k = self.model.locate(v)
        if k == 0:
            return self._out(self._g[:, i])
        tail = self.model.tail
        q, t = tail.branching, tail.weight
        den = tail.potential - self.gammas + q * t * t * self._y + t * self._tail_up(i, k)
        self._gate(den)
        return self._out(1.0 / den)

    def m(self, v: Address):
        """m_v with G(v, v) = -1 / (2 m_v)."""
        g = self.g_diag(v)
        return -1.0 / (2.0 * g)

    def core_arrays(self):
        """Read-only ``(down, up, g)`` arrays of shape (parameters, stored vertices)."""
        return self._down, self._up, self._g


def _tail_sigma(model: TreeModel, gammas: np.ndarray, boundary: bool):
    if model.tail is None:
        return np.zeros(len(gammas), dtype=np.complex128), np.zeros(len(gammas), dtype=np.complex128)
    tail = model.tail
    y = _homogeneous_y(tail.branching, tail.potential, tail.weight, gammas, boundary)
    return tail.branching * tail.weight ** 2 * y, y


def _sweep(model: TreeModel, params: Sequence[SpectralParameter]):
    gammas = np.array([p.gamma for p in params], dtype=np.complex128)
    boundary = params[0].boundary
    sigma, y = _tail_sigma(model, gammas, boundary)
    down, up, g, mind = kernels.zeta_sweeps(
        model.parent, model.child_ptr, model.child_idx, model.weight_up,
        model.diagonal, model.frontier_mask, gammas, sigma)
    return down, up, g, y, mind


def compute_zeta_field(model: TreeModel, parameter) -> ZetaField:
    """Zeta field of ``model`` at one spectral parameter.

    Raises :class:`PoleError` when a boundary evaluation meets a denominator
    smaller than ``POLE_THRESHOLD``.
    """
    par = as_parameter(parameter)
    par.check(model)
    down, up, g, y, mind = _sweep(model, [par])
    if par.boundary and mind[0] < POLE_THRESHOLD:
        raise PoleError(f"E={par.energy}: denominator {mind[0]:.3g} below pole threshold")
    return ZetaField(model, [par], down, up, g, y, mind, batch=False)


def compute_zeta_batch(model: TreeModel, energies, eta: float = 0.0) -> ZetaField:
    """Zeta fields at many energies with a common eta, as one batch field.

    No pole gate is applied here; inspect ``field.min_denominator``.
    """
    energies = np.atleast_1d(np.asarray(energies, dtype=float))
    params = [SpectralParameter(float(e), eta) for e in energies]
    for p in params:
        p.check(model)
    down, up, g, y, mind = _sweep(model, params)
    return ZetaField(model, params, down, up, g, y, mind, batch=True)


def green_pair(model: TreeModel, v: Address, w: Address, field: ZetaField):
    """G(v, w; gamma) as the zeta product along [v, w] times G(w, w)."""
    arc = arc_between(model, v, w)
    val = field.g_diag(arc[-1])
    for a, b in zip(arc[:-1], arc[1:]):
        val = val * field.zeta(a, b)
    return val


def green_matrix(model: TreeModel, field: ZetaField) -> np.ndarray:
    """All Green entries between stored vertices, indexed like ``model.addresses``."""
    if field.batch:
        raise ValueError("green_matrix needs a single-parameter field")
    down, _, g = field.core_arrays()
    return kernels.green_matrix(model.parent, model.subtree_end, down[0], g[0])


def green_restricted(model: TreeModel, remove: DirectedEdge, v0: Address, vk: Address,
                     field: ZetaField):
    """G^(a|b)(v0, a) for ``remove = (a|b)``, as minus the zeta product along [v0, a, b].

    One endpoint must be the cut vertex ``a``; the other must lie on the kept
    side.
    """
    a, b = tuple(remove.source), tuple(remove.target)
    v0, vk = tuple(v0), tuple(vk)
    if vk != a:
        if v0 != a:
            raise ValueError("one endpoint must be the cut vertex of the removed edge")
        v0, vk = vk, v0
    arc = arc_between(model, v0, a)
    if b in arc:
        raise ValueError("endpoints are separated by the removed edge")
    path = arc + [b]
    val = -1.0
    for x, y in zip(path[:-1], path[1:]):
        val = val * field.zeta(x, y)
    return val / model.edge_weight(a, b)


def psi(model: TreeModel, v: Address, w: Address, parameter=None,
        field: Optional[ZetaField] = None):
    """Psi_{gamma,v}(w) = Im G(v, w; gamma) / pi."""
    if field is None:
        field = compute_zeta_field(model, parameter)
    val = green_pair(model, v, w, field)
    return np.imag(val) / np.pi if field.batch else val.imag / np.pi


# -- identity suite -------------------------------------------------------------
IDENTITIES = (
    "green3_a", "green3_b", "multigreen2", "multigreen3", "multigreen4_a",
    "multigreen4_b", "mv_a", "mv_b", "greensym", "sumzeta", "idpsi",
)


@dataclass
class IdentityReport:
    parameter: SpectralParameter
    samples: int
    residuals: dict = field(default_factory=dict)
    skipped: dict = field(default_factory=dict)

    @property
    def max_residual(self) -> float:
        return max(self.residuals.values())

    def passed(self, tol: float = RESIDUAL_TOL) -> bool:
        return all(r < tol for r in self.residuals.values())

    def as_dict(self) -> dict:
        return {"gamma": str(self.parameter), "samples": self.samples,
                "residuals": dict(self.residuals), "skipped": dict(self.skipped)}


def _random_path(model: TreeModel, rng, max_len: int) -> list:
    adj = [list(map(int, c)) for c in model.children]
    for i in range(1, len(model)):
        adj[i].append(int(model.parent[i]))
    start = int(rng.integers(len(model)))
    length = int(rng.integers(1, max_len + 1))
    path = [start]
    while len(path) <= length:
        opts = [u for u in adj[path[-1]] if len(path) < 2 or u != path[-2]]
        if not opts:
            break
        path.append(int(opts[rng.integers(len(opts))]))
    return [model.addresses[i] for i in path]


def identity_suite(model: TreeModel, parameter, samples: int = 50, seed: int = 0,
                   field: Optional[ZetaField] = None) -> IdentityReport:
    """Maximum absolute residual of each zeta/Green identity on random vertices and paths.

    Green entries come from the all-pairs column recursion, restricted Green
    functions from independent sweeps on the cut trees, so each residual
    compares two different computations.  Paths stay in the stored core.
    """
    par = as_parameter(parameter)
    if field is None:
        field = compute_zeta_field(model, par)
    rng = np.random.default_rng(seed)
    gam, eta = par.gamma, par.eta
    G = green_matrix(model, field)
    ix = model.index
    res = {k: 0.0 for k in IDENTITIES}
    skipped = {k: 0 for k in IDENTITIES}

    def bump(key, val):
        res[key] = max(res[key], float(abs(val)))

    def Gv(a, b):
        return G[ix[a], ix[b]]

    for _ in range(samples):
        v = model.addresses[int(rng.integers(len(model)))]
        nbrs = model.neighbors(v)
        V = model.diag(v)
        terms = {u: model.edge_weight(v, u) * field.zeta(u, v) for u in nbrs}
        m_v = field.m(v)
        bump("green3_a", gam - (V + sum(terms.values()) + 2 * m_v))
        if nbrs:
            w = nbrs[int(rng.integers(len(nbrs)))]
            p = model.edge_weight(v, w)
            z_wv, z_vw = field.zeta(v, w), field.zeta(w, v)
            rest = sum(t for u, t in terms.items() if u != w)
            bump("green3_b", gam - (V + rest + p / z_wv))
            bump("mv_a", z_wv - field.m(w) / m_v * z_vw)
            bump("mv_b", p * (1 / z_wv - z_vw) - 2 * m_v)
            lhs = sum(abs(model.edge_weight(v, u) * field.zeta(u, v).imag) for u in nbrs if u != w)
            bump("sumzeta", lhs - (abs(p * z_wv.imag) / abs(z_wv) ** 2 - eta))
        else:
            for k in ("green3_b", "mv_a", "mv_b", "sumzeta"):
                skipped[k] += 1

        path = _random_path(model, rng, 6)
        if len(path) < 2:
            for k in ("multigreen2", "multigreen3", "multigreen4_a", "multigreen4_b",
                      "greensym", "idpsi"):
                skipped[k] += 1
            continue
        v0, v1, vk, vk1 = path[0], path[1], path[-1], path[-2]
        prod = 1.0
        for a, b in zip(path[:-1], path[1:]):
            prod = prod * field.zeta(a, b)
        bump("multigreen2", Gv(v0, vk) - (-prod / (2 * field.m(vk))))
        bump("multigreen3", max(abs(Gv(v0, vk) - field.zeta(v0, v1) * Gv(v1, vk)),
                                abs(Gv(v0, vk) - field.zeta(vk, vk1) * Gv(v0, vk1))))
        bump("greensym", Gv(v0, vk) - Gv(vk, v0))
        psi_k = Gv(v0, vk).imag / np.pi
        psi_k1 = Gv(v0, vk1).imag / np.pi
        z = field.zeta(vk, vk1)
        bump("idpsi", psi_k - z * psi_k1 - z.imag / np.pi * np.conj(Gv(v0, vk1)))

        # multigreen4 (a): cut beyond vk
        beyond = [u for u in model.neighbors(vk) if u != vk1 and model.is_stored(u)]
        sub_val = None
        if beyond:
            nxt = beyond[int(rng.integers(len(beyond)))]
            sub_val = _restricted_by_cut(model, par, DirectedEdge(vk, nxt), v0, vk)
        if sub_val is None:
            skipped["multigreen4_a"] += 1
        else:
            bump("multigreen4_a", sub_val - green_restricted(model, DirectedEdge(vk, nxt), v0, vk, field))
        # multigreen4 (b): cut (v1|v0), evaluate G^(v1|v0)(v1, vk)
        sub_val = _restricted_by_cut(model, par, DirectedEdge(v1, v0), v1, vk)
        if sub_val is None:
            skipped["multigreen4_b"] += 1
        else:
            prod_b = -1.0
            for a, b in zip(path[:-1], path[1:]):
                prod_b = prod_b * field.zeta(b, a)
            bump("multigreen4_b", sub_val - prod_b / model.edge_weight(v1, v0))

    return IdentityReport(par, samples, res, skipped)


def _restricted_by_cut(model: TreeModel, par: SpectralParameter, edge: DirectedEdge,
                       x: Address, y: Address):
    """G^(edge)(x, y) from a fresh sweep on the cut tree, or None if unavailable."""
    sub = model.without_branch(edge)
    if par.boundary and sub.tail is None:
        return None
    try:
        f = compute_zeta_field(sub, par)
    except PoleError:
        return None
    sx, sy = sub.address(model.name(x)), sub.address(model.name(y))
    return green_pair(sub, sx, sy, f)
