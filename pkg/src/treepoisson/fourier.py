"""Spectral expansion of functions of H through boundary Fourier transforms.

Energy integrals use composite Gauss-Legendre quadrature on panels whose edges
cluster like sin toward the ends of the window, where the density has
square-root behavior.  Boundary integrals are exact finite sums over the
cylinders at one depth.  Each panel is evaluated as one batch of zeta sweeps,
and panels are reduced in a fixed order so results do not depend on the
thread count.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from .green import POLE_THRESHOLD, PoleError, compute_zeta_batch, green_pair
from .measure import SpectralBoundary
from .oracle import MAX_DENSE_EIGH, dense_function_entry, finite_truncation, truncate
from .tree import Address, RayAddress, TreeModel, format_address

MAX_REFINEMENTS = 3
DEFAULT_ORACLE_RADIUS = 14


# -- energy windows ---------------------------------------------------------------
@dataclass(frozen=True)
class EnergyWindow:
    """Integration over ``[a + margin, b - margin]`` with ``panels`` x ``nodes`` points.

    ``margin`` defaults to ``1e-6 * (b - a)``.
    """

    a: float
    b: float
    margin: Optional[float] = None
    panels: int = 64
    nodes: int = 16

    def __post_init__(self):
        if not self.b > self.a:
            raise ValueError("window needs a < b")
        if self.panels < 1 or self.nodes < 1:
            raise ValueError("panels and nodes must be positive")
        if self.margin is not None and self.margin < 0:
            raise ValueError("margin must be nonnegative")
        if not self.lo < self.hi:
            raise ValueError("margin leaves an empty interval")

    @classmethod
    def full_band(cls, model: TreeModel, panels: int = 64, nodes: int = 16) -> "EnergyWindow":
        if model.tail is None:
            raise ValueError("model has no tail, hence no absolutely continuous band")
        a, b = model.tail.band
        return cls(a, b, 1e-6 * (b - a), panels, nodes)

    @property
    def delta(self) -> float:
        return 1e-6 * (self.b - self.a) if self.margin is None else self.margin

    @property
    def lo(self) -> float:
        return self.a + self.delta

    @property
    def hi(self) -> float:
        return self.b - self.delta

    def check(self, model: TreeModel) -> None:
        if model.tail is None:
            raise ValueError("model has no tail, hence no absolutely continuous band")
        a, b = model.tail.band
        if not (a < self.lo and self.hi < b):
            raise ValueError(f"window [{self.lo}, {self.hi}] is not strictly inside the band [{a}, {b}]")

    def clip(self, c: float, d: float) -> "EnergyWindow":
        lo, hi = max(self.lo, c), min(self.hi, d)
        if not lo < hi:
            raise ValueError(f"[{c}, {d}] does not meet the window")
        return EnergyWindow(lo, hi, 0.0, self.panels, self.nodes)

    def panel_edges(self) -> np.ndarray:
        c, h = 0.5 * (self.lo + self.hi), 0.5 * (self.hi - self.lo)
        t = np.linspace(-1.0, 1.0, self.panels + 1)
        edges = c + h * np.sin(0.5 * np.pi * t)
        edges[0], edges[-1] = self.lo, self.hi
        return edges

    def describe(self) -> dict:
        return {"panels": self.panels, "nodes": self.nodes}


def _gauss_panel(lo: float, hi: float, nodes: int):
    x, w = np.polynomial.legendre.leggauss(nodes)
    half = 0.5 * (hi - lo)
    return lo + half * (x + 1.0), half * w


# -- test functions ----------------------------------------------------------------
@dataclass(frozen=True)
class TestFunction:
    """Symbol F evaluated on energies: ``one``, ``poly``, ``indicator`` or ``tabulated``."""

    __test__ = False  # not a pytest class

    kind: str
    coefficients: tuple = ()
    interval: tuple = ()
    table: tuple = ()

    def __post_init__(self):
        if self.kind not in ("one", "poly", "indicator", "tabulated"):
            raise ValueError(f"unknown test function kind {self.kind!r}")
        if self.kind == "poly" and not self.coefficients:
            raise ValueError("polynomial needs coefficients")
        if self.kind == "indicator" and not (len(self.interval) == 2 and self.interval[0] < self.interval[1]):
            raise ValueError("indicator needs an interval a < b")
        if self.kind == "tabulated":
            xs = np.asarray(self.table[0], dtype=float) if self.table else np.empty(0)
            if len(xs) < 2 or np.any(np.diff(xs) <= 0):
                raise ValueError("tabulated symbol needs increasing abscissae")

    @classmethod
    def one(cls) -> "TestFunction":
        return cls("one")

    @classmethod
    def poly(cls, coefficients: Sequence[complex]) -> "TestFunction":
        return cls("poly", coefficients=tuple(complex(c) for c in coefficients))

    @classmethod
    def monomial(cls, k: int) -> "TestFunction":
        return cls.poly([0.0] * k + [1.0])

    @classmethod
    def indicator(cls, a: float, b: float) -> "TestFunction":
        return cls("indicator", interval=(float(a), float(b)))

    @classmethod
    def tabulated(cls, energies, values) -> "TestFunction":
        return cls("tabulated", table=(tuple(map(float, energies)), tuple(map(complex, values))))

    @classmethod
    def parse(cls, text: str) -> "TestFunction":
        """``one``, ``poly:c0,c1,...`` or ``indicator:a,b``."""
        kind, _, rest = text.strip().partition(":")
        if kind == "one" and not rest:
            return cls.one()
        if kind == "poly":
            return cls.poly([complex(c.strip().replace("i", "j")) for c in rest.split(",")])
        if kind == "indicator":
            a, b = (float(x) for x in rest.split(","))
            return cls.indicator(a, b)
        raise ValueError(f"cannot parse test function {text!r}")

    def __call__(self, E):
        E = np.asarray(E, dtype=float)
        if self.kind == "one":
            return np.ones_like(E, dtype=complex)
        if self.kind == "poly":
            return np.polynomial.polynomial.polyval(E, np.array(self.coefficients))
        if self.kind == "indicator":
            a, b = self.interval
            return ((E >= a) & (E <= b)).astype(complex)
        xs = np.array(self.table[0])
        ys = np.array(self.table[1])
        return np.interp(E, xs, ys.real, 0.0, 0.0) + 1j * np.interp(E, xs, ys.imag, 0.0, 0.0)

    def conj(self) -> "TestFunction":
        if self.kind == "poly":
            return TestFunction.poly([c.conjugate() for c in self.coefficients])
        if self.kind == "tabulated":
            return TestFunction.tabulated(self.table[0], [v.conjugate() for v in self.table[1]])
        return self

    def abs2(self) -> "TestFunction":
        """|F|^2 as a test function (exact for polynomials)."""
        if self.kind == "poly":
            c = np.array(self.coefficients)
            return TestFunction.poly(np.polynomial.polynomial.polymul(c, c.conj()))
        if self.kind == "tabulated":
            return TestFunction.tabulated(self.table[0], [abs(v) ** 2 for v in self.table[1]])
        return self

    @property
    def degree(self) -> Optional[int]:
        if self.kind == "one":
            return 0
        if self.kind == "poly":
            return len(self.coefficients) - 1
        return None

    def window_for(self, window: EnergyWindow) -> EnergyWindow:
        if self.kind == "indicator":
            return window.clip(*self.interval)
        return window

    def __str__(self):
        if self.kind == "poly":
            return "poly:" + ",".join(repr(c) for c in self.coefficients)
        if self.kind == "indicator":
            return f"indicator:{self.interval[0]!r},{self.interval[1]!r}"
        return self.kind


# -- finite vectors ----------------------------------------------------------------
def as_vector(model: TreeModel, f: Mapping) -> dict:
    """Normalize a finitely supported vector to ``{address: complex}`` on the stored core."""
    out = {}
    for v, val in f.items():
        v = tuple(v)
        if not model.is_stored(v):
            raise ValueError(f"support vertex {format_address(v)} is not in the stored core")
        out[v] = out.get(v, 0.0) + complex(val)
    return out


def _support_depth(vertices) -> int:
    return max((len(v) for v in vertices), default=0)


def cylinder_depth(*vertex_sets, depth: Optional[int] = None) -> int:
    """Smallest depth with cylinder-constant kernels, or ``depth`` after checking it."""
    need = max((_support_depth(s) for s in vertex_sets), default=0) + 1
    if depth is None:
        return need
    if depth < need:
        raise ValueError(f"cylinder depth {depth} below the minimum {need}")
    return depth


# -- quadrature driver ------------------------------------------------------------
def _panel_values(model: TreeModel, lo: float, hi: float, nodes: int,
                  integrand: Callable, level: int):
    E, w = _gauss_panel(lo, hi, nodes)
    try:
        field = compute_zeta_batch(model, E)
        if np.min(field.min_denominator) < POLE_THRESHOLD:
            raise PoleError("near-pole denominator")
        vals = np.asarray(integrand(field, E))
    except PoleError:
        if level >= MAX_REFINEMENTS:
            raise PoleError(f"quadrature nodes in [{lo}, {hi}] keep hitting poles after "
                            f"{MAX_REFINEMENTS} refinements") from None
        mid = 0.5 * (lo + hi)
        return (_panel_values(model, lo, mid, nodes, integrand, level + 1)
                + _panel_values(model, mid, hi, nodes, integrand, level + 1))
    return np.tensordot(w, vals, axes=(0, 0))


def integrate(model: TreeModel, window: EnergyWindow, integrand: Callable,
              threads: int = 1):
    """Sum over panels of the Gauss rule applied to ``integrand(field, E)``.

    ``integrand`` receives a batch zeta field at the panel nodes and returns an
    array whose first axis runs over the nodes.
    """
    window.check(model)
    edges = window.panel_edges()
    jobs = list(zip(edges[:-1], edges[1:]))

    def run(job):
        return _panel_values(model, job[0], job[1], window.nodes, integrand, 0)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, jobs))
    else:
        parts = [run(j) for j in jobs]
    total = parts[0]
    for p in parts[1:]:
        total = total + p
    return total


# -- Fourier transform ------------------------------------------------------------
def fourier_coeff(model: TreeModel, E: float, xi: RayAddress, f: Mapping) -> complex:
    """f^_xi(E) = sum_w conj(P_{E,xi}(w)) f(w)."""
    from .green import SpectralParameter, compute_zeta_field
    from .poisson import PoissonTable

    f = as_vector(model, f)
    xi.validate(model)
    table = PoissonTable(compute_zeta_field(model, SpectralParameter(float(E), 0.0)))
    return complex(sum((np.conj(table.ray(xi, w)) * c for w, c in f.items()), 0.0))


def _hat(kernels, s, f: dict):
    return sum((np.conj(kernels.cylinder(s, w)) * c for w, c in f.items()), 0.0)


# -- kernel entries ---------------------------------------------------------------
@dataclass(frozen=True)
class KernelReport:
    value: complex
    boundary_value: complex
    depth: int
    quadrature: dict

    @property
    def discrepancy(self) -> float:
        return abs(self.value - self.boundary_value)


def kernel_report(model: TreeModel, F: TestFunction, v: Address, w: Address,
                  window: EnergyWindow, depth: Optional[int] = None,
                  threads: int = 1) -> KernelReport:
    """F(H)(v, w) by integrating F Psi_{E,v}(w) and, separately, F times the boundary sum."""
    v, w = tuple(v), tuple(w)
    depth = cylinder_depth([v, w], depth=depth)
    win = F.window_for(window)

    def integrand(field, E):
        direct = np.imag(green_pair(model, v, w, field)) / np.pi
        boundary = SpectralBoundary(field).psi(v, w, depth)
        return F(E)[:, None] * np.stack([direct, boundary], axis=1)

    direct, boundary = integrate(model, win, integrand, threads)
    return KernelReport(complex(direct), complex(boundary), depth, win.describe())


def kernel_entry(model: TreeModel, F: TestFunction, v: Address, w: Address,
                 window: EnergyWindow, threads: int = 1) -> complex:
    """Quadrature of the integral of F(E) Psi_{E,v}(w) over the window."""
    v, w = tuple(v), tuple(w)

    def integrand(field, E):
        return F(E) * np.imag(green_pair(model, v, w, field)) / np.pi

    return complex(integrate(model, F.window_for(window), integrand, threads))


def apply_function(model: TreeModel, F: TestFunction, f: Mapping, v: Address,
                   window: EnergyWindow, depth: Optional[int] = None,
                   threads: int = 1) -> complex:
    """[F(H) f](v) as an energy integral of boundary sums of P(v) <P, f> nu_E."""
    f = as_vector(model, f)
    v = tuple(v)
    depth = cylinder_depth([v], f, depth=depth)
    shell = model.shell(depth)

    def integrand(field, E):
        sb = SpectralBoundary(field)
        k = sb.kernels
        acc = sum((k.cylinder(s, v) * _hat(k, s, f) * sb.nu(s) for s in shell), 0.0)
        return F(E) * acc

    return complex(integrate(model, F.window_for(window), integrand, threads))


def _pairs(model: TreeModel, K: Mapping) -> dict:
    out = {}
    for (w, v), val in K.items():
        w, v = tuple(w), tuple(v)
        for x in (w, v):
            if not model.is_stored(x):
                raise ValueError(f"kernel vertex {format_address(x)} is not in the stored core")
        out[(w, v)] = out.get((w, v), 0.0) + complex(val)
    return out


def trace_functional(model: TreeModel, F: TestFunction, K: Mapping, window: EnergyWindow,
                     depth: Optional[int] = None, threads: int = 1) -> complex:
    """tr[F(H) K] with ``K[(w, v)]`` the kernel entries, as an energy-boundary integral.

    The boundary integrand is <P, K P> = sum conj(P(w)) K(w, v) P(v).
    """
    K = _pairs(model, K)
    depth = cylinder_depth([x for pair in K for x in pair], depth=depth)
    shell = model.shell(depth)

    def integrand(field, E):
        sb = SpectralBoundary(field)
        k = sb.kernels
        acc = 0.0
        for s in shell:
            form = sum((np.conj(k.cylinder(s, w)) * c * k.cylinder(s, v)
                        for (w, v), c in K.items()), 0.0)
            acc = acc + form * sb.nu(s)
        return F(E) * acc

    return complex(integrate(model, F.window_for(window), integrand, threads))


def trace_by_kernel(model: TreeModel, F: TestFunction, K: Mapping, window: EnergyWindow,
                    threads: int = 1) -> complex:
    """sum over (w, v) of K(w, v) F(H)(v, w), each entry from ``kernel_entry``."""
    K = _pairs(model, K)
    keys = list(K)

    def integrand(field, E):
        cols = [np.imag(green_pair(model, v, w, field)) / np.pi for (w, v) in keys]
        return F(E) * (np.stack(cols, axis=1) @ np.array([K[k] for k in keys]))

    return complex(integrate(model, F.window_for(window), integrand, threads))


@dataclass(frozen=True)
class CheckReport:
    lhs: complex
    rhs: complex
    quadrature: dict
    depth: int
    radius: Optional[int] = None

    @property
    def abs_err(self) -> float:
        return abs(self.lhs - self.rhs)

    @property
    def rel_err(self) -> float:
        scale = max(abs(self.lhs), abs(self.rhs))
        return self.abs_err / scale if scale > 0 else 0.0

    def as_dict(self) -> dict:
        d = {"lhs": self.lhs, "rhs": self.rhs, "abs_err": self.abs_err, "rel_err": self.rel_err,
             "quadrature": dict(self.quadrature), "depth": self.depth}
        if self.radius is not None:
            d["radius"] = self.radius
        return d


def hs_norm_check(model: TreeModel, F: TestFunction, K: Mapping, window: EnergyWindow,
                  depth: Optional[int] = None, threads: int = 1) -> CheckReport:
    """||F(H) K||_HS^2 two ways.

    ``lhs`` integrates |F|^2 ||K* P||^2 against nu_E; ``rhs`` integrates |F|^2
    times the quadratic form of Psi_E in the columns of K.
    """
    K = _pairs(model, K)
    depth = cylinder_depth([x for pair in K for x in pair], depth=depth)
    shell = model.shell(depth)
    win = F.window_for(window)
    cols = sorted({v for (_, v) in K})
    rows = sorted({w for (w, _) in K})
    Kmat = np.array([[K.get((w, v), 0.0) for v in cols] for w in rows])

    def boundary(field, E):
        sb = SpectralBoundary(field)
        k = sb.kernels
        acc = 0.0
        for s in shell:
            P = np.stack([np.broadcast_to(k.cylinder(s, w), E.shape) for w in rows], axis=1)
            KsP = P @ Kmat.conj()          # (K* P)(v) = sum_w conj(K(w, v)) P(w)
            acc = acc + np.sum(np.abs(KsP) ** 2, axis=1) * sb.nu(s)
        return np.abs(F(E)) ** 2 * acc

    def direct(field, E):
        Psi = np.empty((len(E), len(rows), len(rows)))
        for i, a in enumerate(rows):
            for j, b in enumerate(rows[i:], start=i):
                Psi[:, i, j] = Psi[:, j, i] = np.imag(green_pair(model, a, b, field)) / np.pi
        form = np.einsum("wv,ewx,xv->e", Kmat.conj(), Psi, Kmat)
        return np.abs(F(E)) ** 2 * form

    lhs = integrate(model, win, boundary, threads)
    rhs = integrate(model, win, direct, threads)
    return CheckReport(complex(lhs), complex(rhs), win.describe(), depth)


# -- Plancherel --------------------------------------------------------------------
def oracle_radius(model: TreeModel, F: TestFunction, support_depth: int) -> int:
    """Truncation radius for the dense side of a Plancherel check.

    The largest radius up to ``DEFAULT_ORACLE_RADIUS`` whose ball can still be
    diagonalized.  For a polynomial F the radius must also keep every walk of
    length deg F between support vertices inside the ball.
    """
    R = 0
    while R < DEFAULT_ORACLE_RADIUS and len(model.ball(R + 1)) <= MAX_DENSE_EIGH:
        R += 1
    deg = F.degree
    if deg is not None:
        need = support_depth + (deg + 1) // 2
        if need > R:
            raise ValueError(f"exact dense side needs radius {need}, only {R} is feasible")
    return R


def plancherel_check(model: TreeModel, F: TestFunction, f: Mapping, g: Mapping,
                     window: EnergyWindow, depth: Optional[int] = None,
                     radius: Optional[int] = None, threads: int = 1) -> CheckReport:
    """<f, F(H) g> from a dense truncation against the energy-boundary integral
    of F conj(f^) g^ d nu_E dE."""
    f, g = as_vector(model, f), as_vector(model, g)
    depth = cylinder_depth(f, g, depth=depth)
    shell = model.shell(depth)
    win = F.window_for(window)

    def integrand(field, E):
        sb = SpectralBoundary(field)
        k = sb.kernels
        acc = sum((np.conj(_hat(k, s, f)) * _hat(k, s, g) * sb.nu(s) for s in shell), 0.0)
        return F(E) * acc

    rhs = complex(integrate(model, win, integrand, threads))
    if radius is None:
        radius = oracle_radius(model, F, _support_depth(list(f) + list(g)))
    trunc = truncate(model, radius) if model.tail is not None else finite_truncation(model)
    lhs = sum((np.conj(a) * dense_function_entry(trunc, F, v, w) * b
               for v, a in f.items() for w, b in g.items()), 0.0)
    return CheckReport(complex(lhs), rhs, win.describe(), depth, radius)
