import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import treepoisson as tp
from treepoisson import oracle
from treepoisson.green import SpectralParameter
from treepoisson.poisson import (PoissonTable, eigen_check, poisson_eval, poisson_limit_check,
                                 poisson_step)
from treepoisson.tree import RayAddress, arc_between

from treegen import random_gamma, random_tree


@pytest.fixture(scope="module")
def field_i(regular3):
    return tp.compute_zeta_field(regular3, 1j)


def test_eval_examples(regular3, field_i):
    xi = RayAddress((1,))
    origin = poisson_eval(regular3, field_i, xi, ())
    assert origin.value == 1 and origin.confluence_vertex == ()
    on = poisson_eval(regular3, field_i, xi, (1,))
    assert on.value == pytest.approx(2j, abs=1e-15)
    assert on.against_factors == pytest.approx((-0.5j,)) and on.toward_factors == ()
    off = poisson_eval(regular3, field_i, xi, (2,))
    assert off.value == pytest.approx(-0.5j, abs=1e-15)


def test_steps(regular3, field_i):
    xi = RayAddress((0, 1))
    assert poisson_step(regular3, field_i, xi, (), (0,), 1.0) == pytest.approx(2j)
    assert poisson_step(regular3, field_i, xi, (0,), (0, 1), 2j) == pytest.approx(-4)
    assert poisson_step(regular3, field_i, xi, (0,), (0, 0), 2j) == pytest.approx(1)
    with pytest.raises(ValueError):
        poisson_step(regular3, field_i, xi, (0,), (1, 0), 1.0)


def test_steps_chain_to_eval(rng):
    m = random_tree(rng, 40, tail=True, weights=True)
    f = tp.compute_zeta_field(m, random_gamma(rng))
    verts = m.ball(int(m.depth.max()) + 2)
    for _ in range(30):
        xi = RayAddress(verts[rng.integers(len(verts))])
        v = verts[rng.integers(len(verts))]
        val = 1.0
        for u, up in zip(arc_between(m, (), v), arc_between(m, (), v)[1:]):
            val = poisson_step(m, f, xi, u, up, val)
        ref = poisson_eval(m, f, xi, v).value
        assert abs(val - ref) <= 1e-12 * abs(ref)


def test_limit_check(regular3):
    f = tp.compute_zeta_field(regular3, 0.4 + 0.3j)
    xi = RayAddress((2, 1))
    v = (2, 0, 1)
    rep = poisson_limit_check(regular3, f, xi, v, [2, 4, 6])
    assert rep.confluence_vertex == (2,)
    assert rep.max_deviation < 1e-10
    with pytest.raises(ValueError):
        poisson_limit_check(regular3, f, xi, v, [0])


def test_kernel_depends_only_on_confluence(regular3):
    f = tp.compute_zeta_field(regular3, SpectralParameter(0.7, 0.0))
    v = (1, 0, 1, 1)
    a = poisson_eval(regular3, f, RayAddress((1, 1)), v).value
    b = poisson_eval(regular3, f, RayAddress((1, 1, 1, 0, 1)), v).value
    assert a == b


def test_limit_against_dense_oracle(rng):
    m = random_tree(rng, 60, weights=True)
    tr = oracle.finite_truncation(m)
    gamma = 0.2 + 1j
    G = oracle.dense_resolvent(tr, gamma)
    f = tp.compute_zeta_field(m, gamma)
    for _ in range(10):
        xi = RayAddress(m.addresses[rng.integers(len(m))])
        leaf = xi.vertex_at(m, xi.terminal_depth(m))
        v = m.addresses[rng.integers(len(m))]
        if len(leaf) < len(tp.confluence(m, v, xi)):
            continue
        ratio = G[tr.row(leaf), tr.row(v)] / G[tr.row(()), tr.row(leaf)]
        ref = poisson_eval(m, f, xi, v).value
        assert abs(ratio - ref) <= 1e-10 * abs(ref)


@pytest.mark.parametrize("gamma", [1j, SpectralParameter(0.0, 0.0)])
def test_eigen_examples(regular3, gamma):
    f = tp.compute_zeta_field(regular3, gamma)
    for prefix in [(), (1, 1), (2, 0, 1)]:
        assert eigen_check(regular3, f, RayAddress(prefix), regular3.ball(3)) < 1e-10


def test_eigen_weighted():
    m = tp.regular_ball(3, 2, weight=2.0)
    for gamma in (0.3 + 1j, SpectralParameter(1.5, 0.0)):
        f = tp.compute_zeta_field(m, gamma)
        assert eigen_check(m, f, RayAddress((0, 1)), m.ball(3)) < 1e-10


def test_eigen_finite_ray_terminal_excluded():
    m = random_tree(np.random.default_rng(3), 20)
    f = tp.compute_zeta_field(m, 1j)
    xi = RayAddress(())
    with pytest.raises(ValueError):
        eigen_check(m, f, xi, m.addresses)
    end = xi.vertex_at(m, xi.terminal_depth(m))
    assert eigen_check(m, f, xi, [v for v in m.addresses if v != end]) < 1e-10


def test_cylinder_locality(regular3):
    f = tp.compute_zeta_field(regular3, SpectralParameter(-1.2, 0.0))
    table = PoissonTable(f)
    v = (0, 1)
    for s in regular3.shell(3):
        vals = {poisson_eval(regular3, f, RayAddress(s + tail), v).value
                for tail in [(), (1,), (0, 1), (1, 1, 0)]}
        assert len(vals) == 1
        assert table.cylinder(s, v) == pytest.approx(vals.pop(), rel=1e-14)
    with pytest.raises(ValueError):
        table.cylinder((0, 1), v)


@pytest.mark.parametrize("E", [-2.0, 0.0, 1.3])
def test_boundary_modulus(regular3, E):
    f = tp.compute_zeta_field(regular3, SpectralParameter(E, 0.0))
    xi = RayAddress((2, 1, 1))
    for v in regular3.ball(4):
        c = tp.confluence(regular3, v, xi)
        expect = 2.0 ** ((2 * len(c) - len(v)) / 2)
        assert abs(abs(poisson_eval(regular3, f, xi, v).value) - expect) < 1e-12 * expect


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), weights=st.booleans())
def test_eigen_random_tail_models(seed, weights):
    rng = np.random.default_rng(seed)
    m = random_tree(rng, int(rng.integers(1, 40)), tail=True, weights=weights, max_depth=4)
    f = tp.compute_zeta_field(m, complex(rng.uniform(-3, 3), rng.uniform(0.05, 3)))
    frontier = sorted(m.addresses[i] for i in m.tail.frontier)
    xi = RayAddress(frontier[int(rng.integers(len(frontier)))])
    assert xi.terminal_depth(m) is None
    scale = max(abs(PoissonTable(f).ray(xi, v)) for v in m.ball(4))
    assert eigen_check(m, f, xi, m.ball(3)) < 1e-10 * max(1.0, scale)
