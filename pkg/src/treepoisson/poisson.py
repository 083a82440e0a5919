"""Poisson kernel P_{gamma,xi}(v) = G(v ^ xi, v) / G(o, v ^ xi).

Evaluated through the zeta product: outward factors zeta_{v_j}(v_{j+1}) from
the confluence vertex to v, divided by the factors zeta_{v_{j+1}}(v_j) from
the origin to the confluence vertex.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .green import ZetaField, green_pair
from .tree import Address, RayAddress, TreeModel, confluence, format_address


@dataclass(frozen=True)
class PoissonEvaluation:
    value: complex
    confluence_vertex: Address
    toward_factors: tuple
    against_factors: tuple


def _prod(xs, start=1.0):
    out = start
    for x in xs:
        out = out * x
    return out


def poisson_eval(model: TreeModel, field: ZetaField, xi: RayAddress, v: Address) -> PoissonEvaluation:
    v = tuple(v)
    c = confluence(model, v, xi)
    against = tuple(field.up(c[:j]) for j in range(1, len(c) + 1))
    toward = tuple(field.down(v[:j]) for j in range(len(c) + 1, len(v) + 1))
    return PoissonEvaluation(_prod(toward) / _prod(against), c, toward, against)


class PoissonTable:
    """Memoized kernel values for one field.

    ``cylinder(s, v)`` is the kernel for any boundary point of the cylinder over
    ``s``; it is well defined once ``|s| > |v|``.
    """

    def __init__(self, field: ZetaField):
        self.field = field
        self._against = {(): 1.0}
        self._toward = {}

    def against(self, c: Address):
        hit = self._against.get(c)
        if hit is None:
            hit = self.against(c[:-1]) * self.field.up(c)
            self._against[c] = hit
        return hit

    def toward(self, c: Address, v: Address):
        if len(v) == len(c):
            return 1.0
        key = (c, v)
        hit = self._toward.get(key)
        if hit is None:
            hit = self.toward(c, v[:-1]) * self.field.down(v)
            self._toward[key] = hit
        return hit

    def value(self, c: Address, v: Address):
        return self.toward(c, v) / self.against(c)

    def cylinder(self, s: Address, v: Address):
        s, v = tuple(s), tuple(v)
        if len(s) <= len(v):
            raise ValueError("cylinder base must be deeper than the evaluation vertex")
        n = 0
        for a, b in zip(s, v):
            if a != b:
                break
            n += 1
        return self.value(v[:n], v)

    def ray(self, xi: RayAddress, v: Address):
        v = tuple(v)
        return self.value(confluence(self.field.model, v, xi), v)


def poisson_step(model: TreeModel, field: ZetaField, xi: RayAddress, u: Address,
                 u_plus: Address, base):
    """P(u_plus) from P(u) = ``base`` across one outward edge."""
    u, u_plus = tuple(u), tuple(u_plus)
    if len(u_plus) != len(u) + 1 or u_plus[:-1] != u or not model.contains(u_plus):
        raise ValueError(f"{format_address(u_plus)} is not a forward neighbor of {format_address(u)}")
    if xi.vertex_at(model, len(u_plus)) == u_plus:
        return base / field.up(u_plus)
    return field.down(u_plus) * base


@dataclass
class LimitReport:
    vertex: Address
    confluence_vertex: Address
    kernel: complex
    rows: list

    @property
    def max_deviation(self) -> float:
        return max(r["deviation"] for r in self.rows)


def poisson_limit_check(model: TreeModel, field: ZetaField, xi: RayAddress, v: Address,
                        depths: Iterable[int]) -> LimitReport:
    """Compare G(u, v) / G(o, u) for u on the ray at ``depths`` with the kernel."""
    v = tuple(v)
    ev = poisson_eval(model, field, xi, v)
    w = ev.confluence_vertex
    rows = []
    for d in depths:
        if d < len(w):
            raise ValueError(f"depth {d} is not past the confluence vertex {format_address(w)}")
        u = xi.vertex_at(model, d)
        if len(u) != d:
            raise ValueError(f"ray terminates at depth {len(u)} < {d}")
        ratio = green_pair(model, u, v, field) / green_pair(model, (), u, field)
        rows.append({"depth": d, "vertex": u, "ratio": ratio,
                     "deviation": float(np.max(np.abs(ratio - ev.value)))})
    return LimitReport(v, w, ev.value, rows)


def eigen_check(model: TreeModel, field: ZetaField, xi: RayAddress, region: Iterable[Address]) -> float:
    """max over ``region`` of |(H P)(v) - gamma P(v)|."""
    region = [tuple(v) for v in region]
    end = xi.terminal_depth(model)
    if end is not None:
        stop = xi.vertex_at(model, end)
        if stop in region:
            raise ValueError(f"region contains the terminal vertex {format_address(stop)} of a finite ray")
    table = PoissonTable(field)
    gam = field.gammas if field.batch else complex(field.gammas[0])
    worst = 0.0
    for v in region:
        hp = model.diag(v) * table.ray(xi, v)
        for w in model.neighbors(v):
            hp = hp + model.edge_weight(v, w) * table.ray(xi, w)
        worst = max(worst, float(np.max(np.abs(hp - gam * table.ray(xi, v)))))
    return worst
