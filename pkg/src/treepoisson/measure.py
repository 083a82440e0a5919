"""Finitely additive measures on the cylinder algebra of the tree boundary.

Two kinds are built here: the measure representing an eigenfunction as a
Poisson integral, and the nonnegative spectral boundary measure nu_E that
factorizes Psi_{E,v}(w) through Poisson kernels.  Integrals against them are
always finite sums over the cylinders at one depth, on which the kernels are
constant.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Union

import numpy as np

from .green import ZetaField, compute_zeta_field, green_pair, SpectralParameter
from .poisson import PoissonTable
from .tree import Address, TreeModel, format_address, parse_address

EIGEN_GATE = 1e-8


@dataclass
class CylinderMeasure:
    """Cylinder masses down to ``depth``; deeper masses come from ``rule`` on demand."""

    total: complex
    assignments: dict
    kind: str
    depth: int
    rule: Optional[Callable] = field(default=None, repr=False, compare=False)

    def value(self, base: Optional[Address]):
        """Mass of the cylinder over ``base`` (``None`` or ``()`` for the whole boundary)."""
        if base is None or len(base) == 0:
            return self.total
        base = tuple(base)
        hit = self.assignments.get(base)
        if hit is not None:
            return hit
        if self.rule is None:
            raise KeyError(f"no mass stored for {format_address(base)} and no rule to compute it")
        return self.rule(base)

    def additivity_residual(self, model: TreeModel, depth: Optional[int] = None) -> float:
        """max |nu(T_u) - sum nu(T_{u+})| over vertices above ``depth``."""
        depth = self.depth if depth is None else depth
        worst = 0.0
        for u in model.ball(depth - 1):
            s = sum((self.value(c) for c in model.children_of(u)), 0.0)
            worst = max(worst, float(np.max(np.abs(self.value(u) - s))))
        return worst

    def to_json(self) -> str:
        return json.dumps({
            "kind": self.kind,
            "depth": self.depth,
            "total": [float(np.real(self.total)), float(np.imag(self.total))],
            "cylinders": [[format_address(a), float(np.real(z)), float(np.imag(z))]
                          for a, z in sorted(self.assignments.items())],
        })

    @classmethod
    def from_json(cls, text: str) -> "CylinderMeasure":
        d = json.loads(text)
        return cls(
            total=complex(*d["total"]),
            assignments={parse_address(a): complex(re, im) for a, re, im in d["cylinders"]},
            kind=d["kind"],
            depth=int(d["depth"]),
        )


def _evaluator(f):
    if callable(f):
        return f
    return lambda v: f[tuple(v)]


def eigen_residual(model: TreeModel, field: ZetaField, f, radius: int) -> float:
    """max over the ball of |(H f)(v) - gamma f(v)|."""
    fv = _evaluator(f)
    gam = complex(field.gammas[0])
    worst = 0.0
    for v in model.ball(radius):
        hf = model.diag(v) * fv(v)
        for w in model.neighbors(v):
            hf += model.edge_weight(v, w) * fv(w)
        worst = max(worst, abs(hf - gam * fv(v)))
    return worst


class _OriginGreen:
    """G(o, u) along outward paths, memoized."""

    def __init__(self, field: ZetaField):
        self.field = field
        self._cache = {(): field.g_diag(())}

    def __call__(self, u: Address):
        hit = self._cache.get(u)
        if hit is None:
            hit = self(u[:-1]) * self.field.down(u)
            self._cache[u] = hit
        return hit


def nu_from_eigenfunction(model: TreeModel, field: ZetaField, f, depth: int,
                          gate: float = EIGEN_GATE) -> CylinderMeasure:
    """Measure nu with f(v) = integral of P_{gamma,xi}(v) d nu(xi).

    ``f`` is a callable or mapping on vertices and must solve H f = gamma f on
    the ball of radius ``depth`` (it is read on radius ``depth + 1``).
    Cylinder masses are nu(T_{u+}) = -p_u(u+) G(o,u) (f(u+) - zeta_u(u+) f(u)).
    """
    if field.batch:
        raise ValueError("nu_from_eigenfunction needs a single-parameter field")
    fv = _evaluator(f)
    res = eigen_residual(model, field, fv, depth)
    if not res < gate:
        raise ValueError(f"f is not an eigenfunction: residual {res:.3g} >= {gate:g}")
    g_o = _OriginGreen(field)

    def rule(up: Address):
        u = up[:-1]
        return -model.edge_weight(u, up) * g_o(u) * (fv(up) - field.down(up) * fv(u))

    masses = {s: rule(s) for s in model.ball(depth) if s}
    return CylinderMeasure(complex(fv(())), masses, "eigenfunction", depth, rule)


def reconstruct(model: TreeModel, field: ZetaField, measure: CylinderMeasure,
                v: Address, depth: int):
    """Poisson integral of ``measure`` at ``v`` as a sum over cylinders at ``depth``."""
    v = tuple(v)
    if depth <= len(v):
        raise ValueError("cylinder depth must exceed |v|")
    table = PoissonTable(field)
    return sum((table.cylinder(s, v) * measure.value(s) for s in model.shell(depth)), 0.0)


class SpectralBoundary:
    """nu_E and the boundary kernels for one energy, or a batch of energies."""

    def __init__(self, field: ZetaField):
        if not field.boundary:
            raise ValueError("nu_E needs boundary parameters E + i0")
        self.field = field
        self.model = field.model
        self.kernels = PoissonTable(field)
        self._g_origin = _OriginGreen(field)

    def nu(self, s: Address):
        s = tuple(s)
        if not s:
            return self.total()
        u = s[:-1]
        p = abs(self.model.edge_weight(u, s))
        return p * np.abs(self._g_origin(u)) ** 2 * np.abs(np.imag(self.field.down(s))) / np.pi

    def total(self):
        return np.imag(self.field.g_diag(())) / np.pi

    def psi(self, v: Address, w: Address, depth: int):
        """sum over cylinders at ``depth`` of conj(P(v)) P(w) nu_E."""
        if depth <= max(len(v), len(w)):
            raise ValueError("cylinder depth must exceed max(|v|, |w|)")
        k = self.kernels
        return sum((np.conj(k.cylinder(s, v)) * k.cylinder(s, w) * self.nu(s)
                    for s in self.model.shell(depth)), 0.0)


def _boundary_field(model: TreeModel, E: float, field: Optional[ZetaField]) -> ZetaField:
    if field is None:
        return compute_zeta_field(model, SpectralParameter(float(E), 0.0))
    if not field.boundary:
        raise ValueError("field must be evaluated at E + i0")
    return field


def nu_E_cylinder(model: TreeModel, E: float, u_plus: Address,
                  field: Optional[ZetaField] = None) -> float:
    """nu_E(T_{u+}) = |p_u(u+)| |G(o,u;E+i0)|^2 |Im zeta_u(u+)| / pi."""
    u_plus = tuple(u_plus)
    if not u_plus:
        raise ValueError("u_plus must differ from the origin")
    return float(SpectralBoundary(_boundary_field(model, E, field)).nu(u_plus))


def spectral_measure(model: TreeModel, E: float, depth: int,
                     field: Optional[ZetaField] = None) -> CylinderMeasure:
    sb = SpectralBoundary(_boundary_field(model, E, field))
    masses = {s: complex(sb.nu(s)) for s in model.ball(depth) if s}
    return CylinderMeasure(complex(sb.total()), masses, "spectral", depth,
                           lambda s: complex(sb.nu(s)))


def psi_via_boundary(model: TreeModel, E: float, v: Address, w: Address, depth: int,
                     field: Optional[ZetaField] = None):
    """Psi_{E,v}(w) as the boundary integral of conj(P(v)) P(w) against nu_E."""
    sb = SpectralBoundary(_boundary_field(model, E, field))
    return complex(sb.psi(tuple(v), tuple(w), depth))
