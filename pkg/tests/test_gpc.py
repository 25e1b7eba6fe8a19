import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wavepwr.gpc import (CollocationGrid, GpcWaveform, PolyBasis, RandomParam, gpc_coefficients,
                         project_waveform, quadrature_rule)

U = RandomParam.uniform(0, -1.0, 1.0)
G = RandomParam.gaussian(1, 0.0, 1.0)


def test_param_validation():
    with pytest.raises(ValueError):
        RandomParam.uniform(0, 2.0, 1.0)
    with pytest.raises(ValueError):
        RandomParam.gaussian(0, 0.0, 0.0)
    assert RandomParam.uniform(0, 1, 2).mean == 1.5
    assert RandomParam.gaussian(0, 3, 2).variance == 4.0


def test_rule_examples():
    z, w = quadrature_rule(U, 2)
    assert z == pytest.approx([-1 / math.sqrt(3), 1 / math.sqrt(3)], abs=1e-15)
    assert w == pytest.approx([0.5, 0.5], abs=1e-15)
    z, w = quadrature_rule(G, 2)
    assert z == pytest.approx([-1.0, 1.0], abs=1e-14)
    assert w == pytest.approx([0.5, 0.5], abs=1e-14)
    for p in (U, G, RandomParam.uniform(3, 1, 2), RandomParam.gaussian(4, 5, 0.3)):
        z, w = quadrature_rule(p, 1)
        assert z == pytest.approx([p.mean]) and w == pytest.approx([1.0])


def uniform_moment(d):
    # E[z^d] for z ~ U(-1, 1)
    return 0.0 if d % 2 else 1.0 / (d + 1)


def gaussian_moment(d):
    return 0.0 if d % 2 else float(math.prod(range(d - 1, 0, -2)))


@pytest.mark.parametrize("l", range(1, 11))
def test_exactness(l):
    for p, moment in ((U, uniform_moment), (G, gaussian_moment)):
        z, w = quadrature_rule(p, l)
        for d in range(2 * l):
            got, want = float(w @ z ** d), moment(d)
            # odd moments vanish; measure them against E|z|^d
            scale = max(abs(want), float(w @ np.abs(z) ** d), 1e-300)
            assert abs(got - want) <= 1e-12 * scale, (p.kind, l, d)


@pytest.mark.parametrize("P", range(0, 7))
def test_orthonormality(P):
    params = [RandomParam.uniform(0, 1.0, 2.0), RandomParam.gaussian(1, 0.5, 0.2)]
    basis = PolyBasis.build(params, [P, P], P)
    grid = CollocationGrid.build(params, (), P + 1, P + 1)
    Psi = basis.evaluate(grid.points)
    gram = Psi.T @ (Psi * grid.weights[:, None])
    assert np.max(np.abs(gram - np.eye(basis.size))) <= 1e-10


def test_basis_structure():
    b = PolyBasis.build([U, G], [2, 1], total_order=2)
    assert tuple(b.multi_indices[0]) == (0, 0)
    assert all(sum(m) <= 2 for m in b.multi_indices)
    assert b.size == 5


def test_grid_size():
    own = [RandomParam.uniform(0, 0, 1)]
    coup = [RandomParam.uniform(1, 0, 1), RandomParam.gaussian(2, 0, 1)]
    g = CollocationGrid.build(own, coup, l_s=5, l_c=2)
    assert g.size == 5 * 2 * 2
    assert g.weights.sum() == pytest.approx(1.0)


def test_coefficients_constant_and_linear():
    grid = CollocationGrid.build([U], (), 3)
    basis = PolyBasis.build([U], [2])
    a = gpc_coefficients(np.ones(grid.size), grid, basis)
    assert a == pytest.approx([1.0, 0.0, 0.0], abs=1e-12)
    a = gpc_coefficients(grid.points[:, 0], grid, basis)
    assert a == pytest.approx([0.0, 1 / math.sqrt(3), 0.0], abs=1e-12)


def test_coefficients_product():
    p1, p2 = RandomParam.uniform(0, -1, 1), RandomParam.uniform(1, -1, 1)
    grid = CollocationGrid.build([p1, p2], (), 3)
    basis = PolyBasis.build([p1, p2], [2, 2])
    a = gpc_coefficients(grid.points[:, 0] * grid.points[:, 1], grid, basis)
    for m, v in zip(basis.multi_indices, a):
        if tuple(m) == (1, 1):
            assert v == pytest.approx(1 / 3)
        else:
            assert abs(v) < 1e-12


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(2, 4), st.integers(1, 3))
def test_round_trip(seed, l_s, l_c):
    rng = np.random.default_rng(seed)
    own = [RandomParam.uniform(0, 1.0, 2.0)]
    coup = [RandomParam.gaussian(1, 0.0, 0.5)]
    basis = PolyBasis.build(own + coup, [l_s - 1, l_c - 1])
    grid = CollocationGrid.build(own, coup, l_s, l_c)
    truth = rng.normal(size=basis.size)
    samples = basis.evaluate(grid.points) @ truth
    a = gpc_coefficients(samples, grid, basis)
    xi = np.column_stack([rng.uniform(1, 2, 100), rng.normal(0, 0.5, 100)])
    assert np.max(np.abs(basis.evaluate(xi) @ a - basis.evaluate(xi) @ truth)) <= 1e-10


def _waveform(params, fn, l=3):
    grid = CollocationGrid.build(params, (), l)
    basis = PolyBasis.build(params, [l - 1] * len(params))
    samples = fn(grid.points)[:, None, None]
    return GpcWaveform(0, np.zeros(1), gpc_coefficients(samples, grid, basis), basis, (0,))


def test_projection_examples():
    p = [RandomParam.uniform(k, -1, 1) for k in (1, 2, 3)]
    wf = _waveform(p, lambda z: z[:, 0] + z[:, 2])
    proj = project_waveform(wf, [1, 2])
    assert proj.mean() == pytest.approx(wf.mean(), abs=1e-14)
    xi = np.zeros((1, 4))
    xi[0, 1], xi[0, 3] = 0.4, 0.7
    assert proj.evaluate(xi)[0, 0, 0] == pytest.approx(0.4)
    # independent of the dropped variable: identity
    wf2 = _waveform(p, lambda z: z[:, 0] * z[:, 1] + 2.0)
    proj2 = project_waveform(wf2, [1, 2])
    full = wf2.embed(wf2.basis)
    assert np.allclose(proj2.embed(wf2.basis), full)


def test_projection_empty_intersection():
    wf = _waveform([RandomParam.uniform(0, -1, 1)], lambda z: 3.0 + z[:, 0])
    proj = project_waveform(wf, [5])
    assert proj.mean_only and proj.coefficients.shape[0] == 1
    assert proj.mean() == pytest.approx(wf.mean())


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.sets(st.integers(0, 2)))
def test_projection_never_increases_variance(seed, targets):
    rng = np.random.default_rng(seed)
    params = [RandomParam.uniform(0, 0, 1), RandomParam.gaussian(1, 0, 1), RandomParam.uniform(2, -2, 1)]
    basis = PolyBasis.build(params, [2, 2, 1])
    coef = rng.normal(size=(basis.size, 4, 2))
    wf = GpcWaveform(0, np.arange(4.0), coef, basis, (0, 1))
    proj = project_waveform(wf, targets)
    assert np.all(proj.variance() <= wf.variance() + 1e-12)
    assert np.array_equal(proj.mean(), wf.mean())


def test_embed_rejects_missing_terms():
    a = PolyBasis.build([U], [2])
    b = PolyBasis.build([U], [1])
    wf = GpcWaveform(0, np.zeros(1), np.ones((3, 1, 1)), a, (0,))
    with pytest.raises(ValueError):
        wf.embed(b)
