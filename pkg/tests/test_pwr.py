import math

import numpy as np
import pytest

from wavepwr.dynet import NetworkModel, decompose, kuramoto_builder, linear_builder
from wavepwr.generators import kuramoto_benchmark
from wavepwr.gpc import RandomParam
from wavepwr.pwr import (Functional, PwrDivergenceError, SampleFailure, cost_estimate, full_grid_pcm,
                         histogram, histogram_l1, mc_reference, parameter_samples, pwr_solve)

EXACT = math.exp(-1) - math.exp(-2)


def decay_model():
    return linear_builder(np.zeros((1, 1)), [0], [1.5], x0=[1.0])


def linear_pair(eps=0.01):
    C = np.array([[0.0, eps], [eps, 0.0]])
    return linear_builder(C, [0, 1], [1.5, 1.5], x0=[1.0, 1.0])


UNIFORM12 = [RandomParam.uniform(0, 1.0, 2.0), RandomParam.uniform(1, 1.0, 2.0)]


def test_scalar_decay_mean():
    m = decay_model()
    rep = pwr_solve(m, decompose(m, [0]), UNIFORM12[:1], l_s=5, l_c=2)
    assert rep.mean()[-1, 0] == pytest.approx(EXACT, abs=1e-6)
    assert rep.converged


def test_zero_coupling_fixed_point():
    m = linear_pair(0.0)
    rep = pwr_solve(m, decompose(m, [0, 1]), UNIFORM12, l_s=4, l_c=2, I_max=3, tol=0.0)
    assert rep.metric_history[0] == math.inf
    assert rep.metric_history[1] <= 1e-12


def test_linear_pair_matches_pcm():
    m = linear_pair()
    rep = pwr_solve(m, decompose(m, [0, 1]), UNIFORM12, l_s=5, l_c=3, I_max=6, tol=1e-10)
    times, coef, basis = full_grid_pcm(m, UNIFORM12, 5)
    mean_ref = coef[0, -1, 0]
    var_ref = np.sum(coef[1:, -1, 0] ** 2)
    assert rep.iterations <= 6
    assert rep.mean()[-1, 0] == pytest.approx(mean_ref, abs=1e-4)
    assert rep.variance()[-1, 0] == pytest.approx(var_ref, abs=1e-4)
    hist = rep.metric_history[2:]
    assert all(b <= a for a, b in zip(hist, hist[1:]))
    assert np.all(rep.variance() >= 0)


def test_single_cluster_equals_pcm():
    m = linear_pair(0.3)
    rep = pwr_solve(m, decompose(m, [0, 0]), UNIFORM12, l_s=3, l_c=3, I_max=2, tol=0.0)
    _, coef, basis = full_grid_pcm(m, UNIFORM12, 3)
    wf = rep.waveforms[0]
    assert np.max(np.abs(wf.embed(basis) - coef)) <= 1e-12


def test_pwr_mean_consistent_with_mc():
    m = linear_pair(0.05)
    rep = pwr_solve(m, decompose(m, [0, 1]), UNIFORM12, l_s=5, l_c=3, tol=1e-8)
    mc = mc_reference(m, UNIFORM12, 20_000, seed=5, sampler="pseudo")
    se = mc.standard_error()
    assert np.all(np.abs(rep.mean() - mc.mean) <= 3 * se + 1e-6)


def test_mc_analytic_mean():
    m = decay_model()
    mc = mc_reference(m, UNIFORM12[:1], 100_000, seed=1, sampler="pseudo")
    se = mc.standard_error()[-1, 0]
    assert abs(mc.mean[-1, 0] - EXACT) <= 3 * se


def test_mc_sobol_is_deterministic():
    m = decay_model()
    a = mc_reference(m, UNIFORM12[:1], 64, sampler="sobol", functionals=["state:0@1"])
    b = mc_reference(m, UNIFORM12[:1], 64, sampler="sobol", functionals=["state:0@1"])
    assert np.array_equal(a.mean, b.mean)
    assert np.array_equal(a.values["state:0@1"], b.values["state:0@1"])


def test_constant_model_zero_variance():
    m = NetworkModel(2, lambda t, x, p, rows: np.zeros((x.shape[0], rows.size)), [(0,), (1,)], [1.0, 2.0],
                     x0=[1.0, 2.0])
    params = [RandomParam.gaussian(0, 1.0, 0.5), RandomParam.uniform(1, 0.0, 4.0)]
    mc = mc_reference(m, params, 500, seed=2, sampler="pseudo")
    assert np.all(mc.variance == 0)


def test_mc_reports_failed_samples():
    def rhs(t, x, p, rows):
        return (p[:, :1] * x ** 2)[:, rows]
    m = NetworkModel(1, rhs, [(0,)], [0.0], x0=[1.0])
    with pytest.raises(SampleFailure) as err:
        mc_reference(m, [RandomParam.uniform(0, -1.0, 3.0)], 16, sampler="sobol", T=2.0)
    assert err.value.indices


def test_divergence_names_subsystem():
    def rhs(t, x, p, rows):
        return (p[:, [0, 1]] * x ** 2 + 0.01 * x[:, ::-1])[:, rows]
    m = NetworkModel(2, rhs, [(0,), (1,)], [0.0, 0.0], x0=[1.0, 1.0])
    params = [RandomParam.uniform(0, -1.0, 0.0), RandomParam.uniform(1, 1.0, 3.0)]
    with pytest.raises(PwrDivergenceError) as err:
        pwr_solve(m, decompose(m, [0, 1]), params, 3, 2, T=2.0)
    assert err.value.subsystem == 1 and err.value.iteration == 1 and err.value.points


def test_functional_parsing():
    f = Functional.parse("order_parameter@0.5")
    assert f.kind == "order_parameter" and f.at == 0.5 and f.name == "order_parameter@0.5"
    assert Functional.parse("state:3").index == 3
    with pytest.raises(ValueError):
        Functional.parse("energy")
    with pytest.raises(ValueError):
        Functional.parse("state:0@0.505").time_index(np.arange(0, 1.01, 0.01))


def _chain_decomp(n_sub, p_i):
    # ring of n_sub subsystems; each owns p_i parameters and has 2 neighbours
    n = n_sub
    C = np.zeros((n, n))
    for i in range(n):
        C[i, (i + 1) % n] = C[(i + 1) % n, i] = 0.01
    m = linear_builder(C, range(n), np.ones(n))
    return decompose(m, np.arange(n))


def test_cost_examples():
    d = _chain_decomp(40, 1)
    R_F, R_I, ratio = cost_estimate(d, 2, 5, 2, 5)
    assert R_F == 2 ** 40 == 1099511627776
    assert f"{float(R_F):.4e}" == "1.0995e+12"
    assert R_I == 4201
    assert ratio == R_F / R_I
    single = decompose(linear_builder(np.zeros((3, 3)), [0, 1, 2], np.ones(3)), [0, 0, 0])
    R_F, R_I, _ = cost_estimate(single, 3, 3, 2, 4)
    assert R_F == 27 and R_I == 1 + 27 + 4 * 27


def test_histogram_helpers():
    lo, hi, cnt = histogram(np.arange(10.0), bins=5)
    assert cnt.sum() == 10 and lo[0] == 0.0 and hi[-1] == 9.0
    a = np.random.default_rng(0).normal(size=1000)
    assert histogram_l1(a, a) == 0.0
    assert histogram_l1(a, a + 10) == pytest.approx(2.0)


def test_kuramoto_small_pwr_vs_mc():
    model, params, truth = kuramoto_benchmark(pairs=4, seed=3)
    d = decompose(model, truth)
    rep = pwr_solve(model, d, params, 5, 2, P=5, tol=1e-4, T=0.5)
    mc = mc_reference(model, params, 4096, sampler="sobol", T=0.5, functionals=["order_parameter"])
    states = rep.sample_states(parameter_samples(model, params, 4096))
    R_pwr = Functional.parse("order_parameter").series(states)
    rel = np.abs(R_pwr.mean(axis=0) - mc.series["order_parameter"][0]) / mc.series["order_parameter"][0]
    assert rep.converged and rep.iterations <= 5
    assert rel.max() < 0.02
