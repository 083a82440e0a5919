"""Acceptance suite: one PASS/FAIL line per criterion at the stated tolerances."""
import time

import numpy as np
import pytest

import treepoisson as tp
from treepoisson import oracle
from treepoisson.fourier import (EnergyWindow, TestFunction, apply_function, kernel_entry,
                                 plancherel_check)
from treepoisson.green import PoleError, SpectralParameter
from treepoisson.measure import (nu_E_cylinder, nu_from_eigenfunction, psi_via_boundary,
                                 reconstruct, spectral_measure)
from treepoisson.poisson import PoissonTable, eigen_check
from treepoisson.tree import RayAddress

from treegen import random_gamma, random_tree

SQ2 = np.sqrt(2.0)


def ensemble(seed, weights):
    """50 random trees with at most 200 vertices, each with 20 random parameters."""
    rng = np.random.default_rng(seed)
    for _ in range(50):
        m = random_tree(rng, int(rng.integers(2, 201)), max_degree=5, vmax=3.0, weights=weights)
        yield m, [random_gamma(rng) for _ in range(20)]


def finite_exactness(seed, weights):
    """Worst relative error of green_matrix and of sampled green_pair against dense LU."""
    rng = np.random.default_rng(seed + 1)
    worst_all = worst_pair = 0.0
    for m, gammas in ensemble(seed, weights):
        tr = oracle.finite_truncation(m)
        perm = [tr.row(a) for a in m.addresses]
        for gamma in gammas:
            f = tp.compute_zeta_field(m, gamma)
            D = oracle.dense_resolvent(tr, gamma)[np.ix_(perm, perm)]
            G = tp.green_matrix(m, f)
            worst_all = max(worst_all, float((np.abs(G - D) / np.abs(D)).max()))
            for _ in range(20):
                i, j = rng.integers(len(m), size=2)
                v, w = m.addresses[i], m.addresses[j]
                ref = oracle.dense_resolvent_entry(tr, v, w, gamma)
                worst_pair = max(worst_pair, abs(tp.green_pair(m, v, w, f) - ref) / abs(ref))
    return worst_all, worst_pair


def identity_worst(seed, weights):
    worst, key = 0.0, None
    for m, gammas in ensemble(seed, weights):
        for k, gamma in enumerate(gammas):
            rep = tp.identity_suite(m, gamma, samples=10, seed=k)
            if rep.max_residual > worst:
                worst = rep.max_residual
                key = max(rep.residuals, key=rep.residuals.get)
    return worst, key


@pytest.mark.parametrize("number, weights", [(1, False), (8, True)])
def test_finite_tree_exactness(acceptance, number, weights):
    t0 = time.perf_counter()
    worst_all, worst_pair = finite_exactness(11 + number, weights)
    elapsed = time.perf_counter() - t0
    ok = worst_all < 1e-10 and worst_pair < 1e-10 and elapsed < 60
    label = "weighted finite-tree exactness" if weights else "finite-tree exactness"
    assert acceptance(number, label, ok,
                      f"all pairs {worst_all:.1e}, green_pair {worst_pair:.1e}, {elapsed:.1f}s")


@pytest.mark.parametrize("number, weights", [(2, False), (8, True)])
def test_identity_suite(acceptance, number, weights):
    worst, key = identity_worst(11 + number, weights)
    label = "weighted identity suite" if weights else "identity suite"
    assert acceptance(number, label, worst < 1e-10, f"max residual {worst:.1e} in {key}")


def test_closed_form_anchors(acceptance, regular3):
    f = tp.compute_zeta_field(regular3, 1j)
    checks = {
        "zeta(i)": abs(f.zeta((0,), ()) - (-0.5j)),
        "G(o,o;i)": abs(tp.green_pair(regular3, (), (), f) - 0.4j),
        "G(o,1;i)": abs(tp.green_pair(regular3, (), (1,), f) - 0.2),
        "Psi_0,o(o)": abs(tp.psi(regular3, (), (), SpectralParameter(0.0, 0.0)) - SQ2 / (3 * np.pi)),
        "nu_0(depth 1)": abs(nu_E_cylinder(regular3, 0.0, (2,)) - SQ2 / (9 * np.pi)),
    }
    worst = max(checks, key=checks.get)
    assert acceptance(3, "closed-form anchors", checks[worst] < 1e-12,
                      f"worst {checks[worst]:.1e} at {worst}")


def test_eigenfunction_property(acceptance, regular3):
    rng = np.random.default_rng(4)
    a, b = regular3.tail.band
    gammas = [1j, 0.5 + 0.1j] + [SpectralParameter(E, 0.0) for E in np.linspace(a, b, 7)[1:-1]]
    weighted = random_tree(rng, 30, weights=True, tail=True, max_depth=3)
    wa, wb = weighted.tail.band
    worst = 0.0
    for m, energies in [(regular3, gammas),
                        (weighted, [1j, 0.5 + 0.1j] + list(np.linspace(wa, wb, 7)[1:-1]))]:
        shell = m.shell(6)
        rays = [RayAddress(shell[i]) for i in rng.choice(len(shell), 10, replace=False)]
        ball = m.ball(4)
        for gamma in energies:
            if not isinstance(gamma, (complex, SpectralParameter)):
                gamma = SpectralParameter(float(gamma), 0.0)
            try:
                f = tp.compute_zeta_field(m, gamma)
            except PoleError:
                continue
            for xi in rays:
                worst = max(worst, eigen_check(m, f, xi, ball))
    assert acceptance(4, "eigenfunction property", worst < 1e-10, f"max residual {worst:.1e}")


def test_round_trip(acceptance, regular3):
    rng = np.random.default_rng(5)
    models = [regular3] + [random_tree(rng, int(rng.integers(5, 40)), tail=True,
                                       weights=bool(k % 2), max_depth=3) for k in range(6)]
    worst_f = worst_add = 0.0
    for m in models:
        a, b = m.tail.band
        for gamma in [complex(rng.uniform(-3, 3), rng.uniform(0.05, 2)),
                      SpectralParameter(float(rng.uniform(a, b)), 0.0)]:
            try:
                field = tp.compute_zeta_field(m, gamma)
            except PoleError:
                continue
            table = PoissonTable(field)
            shell = m.shell(5)
            for k in range(1, 6):
                rays = [RayAddress(shell[i]) for i in rng.integers(len(shell), size=k)]
                coef = rng.normal(size=k) + 1j * rng.normal(size=k)

                def g(v):
                    return sum(c * table.ray(xi, v) for c, xi in zip(coef, rays))

                nu = nu_from_eigenfunction(m, field, g, 4)
                worst_add = max(worst_add, nu.additivity_residual(m))
                for v in m.ball(3):
                    worst_f = max(worst_f, abs(reconstruct(m, field, nu, v, 4) - g(v)))
    ok = worst_f < 1e-10 and worst_add < 1e-10
    assert acceptance(5, "eigenfunction round trip", ok,
                      f"reconstruction {worst_f:.1e}, additivity {worst_add:.1e}")


def test_psi_via_boundary(acceptance):
    rng = np.random.default_rng(6)
    m = tp.regular_ball(3, 2, potential=0.2)
    a, b = m.tail.band
    energies = rng.uniform(a, b, 20)
    ball = m.ball(3)
    worst_psi = worst_total = 0.0
    min_mass = np.inf
    for E in energies:
        field = tp.compute_zeta_field(m, SpectralParameter(float(E), 0.0))
        for v in ball:
            for w in ball:
                ref = tp.psi(m, v, w, field=field)
                worst_psi = max(worst_psi, abs(psi_via_boundary(m, E, v, w, 4, field) - ref))
        nu = spectral_measure(m, E, 4, field)
        min_mass = min(min_mass, min(x.real for x in nu.assignments.values()))
        worst_total = max(worst_total, abs(nu.total - tp.psi(m, (), (), field=field)))
    ok = worst_psi < 1e-10 and min_mass >= 0 and worst_total < 1e-12
    assert acceptance(6, "boundary factorization of Psi", ok,
                      f"Psi {worst_psi:.1e}, min mass {min_mass:.1e}, total {worst_total:.1e}")


def test_plancherel(acceptance, regular3):
    t0 = time.perf_counter()
    window = EnergyWindow.full_band(regular3)
    unit = abs(kernel_entry(regular3, TestFunction.one(), (), (), window) - 1.0)
    trunc = oracle.truncate(regular3, 4)
    walks = [oracle.closed_walks(trunc, (), k) for k in range(1, 5)]
    moments = max(abs(kernel_entry(regular3, TestFunction.monomial(k), (), (), window) - c)
                  for k, c in zip(range(1, 5), walks))
    rng = np.random.default_rng(7)
    support = regular3.ball(2)
    worst = 0.0
    for _ in range(10):
        f, g = ({support[i]: complex(*rng.normal(size=2))
                 for i in rng.choice(len(support), int(rng.integers(1, 4)), replace=False)}
                for _ in range(2))
        F = TestFunction.poly(rng.normal(size=int(rng.integers(1, 5))))
        worst = max(worst, plancherel_check(regular3, F, f, g, window).abs_err)
    elapsed = time.perf_counter() - t0
    ok = (unit < 1e-6 and walks == [0, 3, 0, 15] and moments < 1e-5 and worst < 1e-4
          and elapsed < 120)
    assert acceptance(7, "Plancherel", ok,
                      f"F=1 {unit:.1e}, walks {walks} moments {moments:.1e}, "
                      f"random f,g {worst:.1e}, {elapsed:.1f}s")


def test_depth_invariance(acceptance, regular3):
    rng = np.random.default_rng(9)
    m = random_tree(rng, 20, tail=True, weights=True, max_depth=2)
    a, b = m.tail.band
    E = float(rng.uniform(a, b))
    field = tp.compute_zeta_field(m, SpectralParameter(E, 0.0))
    table = PoissonTable(field)
    shell = m.shell(4)
    rays = [RayAddress(shell[i]) for i in rng.integers(len(shell), size=3)]
    coef = rng.normal(size=3) + 1j * rng.normal(size=3)

    def g(v):
        return sum(c * table.ray(xi, v) for c, xi in zip(coef, rays))

    nu = nu_from_eigenfunction(m, field, g, 3)
    drift = {"reconstruct": 0.0, "psi_via_boundary": 0.0, "apply_function": 0.0}
    for v in m.ball(2):
        lo = reconstruct(m, field, nu, v, len(v) + 1)
        drift["reconstruct"] = max(drift["reconstruct"],
                                   abs(reconstruct(m, field, nu, v, len(v) + 4) - lo))
        for w in m.ball(2):
            d = max(len(v), len(w)) + 1
            lo = psi_via_boundary(m, E, v, w, d, field)
            drift["psi_via_boundary"] = max(drift["psi_via_boundary"],
                                            abs(psi_via_boundary(m, E, v, w, d + 3, field) - lo))
    window = EnergyWindow.full_band(regular3, panels=16)
    F = TestFunction.poly([0.5, 0.0, 1.0])
    f = {(1,): 1.0, (2,): 1j}
    for v in [(), (0,)]:
        lo = apply_function(regular3, F, f, v, window)
        drift["apply_function"] = max(drift["apply_function"],
                                      abs(apply_function(regular3, F, f, v, window, depth=5) - lo))
    worst = max(drift, key=drift.get)
    assert acceptance(9, "depth invariance", drift[worst] < 1e-12,
                      ", ".join(f"{k} {x:.1e}" for k, x in drift.items()))
