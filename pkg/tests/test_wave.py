import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wavepwr.generators import grid_blocks, planted_partition
from wavepwr.graph import (WeightedGraph, build_normalized_laplacian, dense_spectrum, partition_agreement,
                           same_partition)
from wavepwr.wave import (MAX_C, InsufficientResolutionError, WaveConfig, WaveInstabilityError, WaveTrace,
                          cluster_by_oracle, cluster_by_wave, eigenvalue_to_theta, estimate_convergence_time,
                          extract_modes, initial_state, theta_to_eigenvalue, wave_run)


def test_config_invariants():
    WaveConfig(c=MAX_C)
    for bad in (dict(c=0.0), dict(c=1.5), dict(t_max=8), dict(k=0), dict(eta=5.0)):
        with pytest.raises(ValueError):
            WaveConfig(**bad)


def test_single_step(two_node):
    trace = wave_run(two_node, WaveConfig(c=1.0, t_max=16), u0=[1.0, 0.0])
    assert trace.values[:, 0] == pytest.approx([0.0, 1.0])


def test_zero_speed_is_constant(triangles):
    u0 = np.linspace(0.1, 0.9, 6)
    trace = wave_run(triangles, WaveConfig(c=1.0, t_max=50), u0=u0, _unchecked_c=0.0)
    assert np.array_equal(trace.values, np.repeat(u0[:, None], 50, axis=1))


def test_unstable_speed_detected_quickly(two_node):
    with pytest.raises(WaveInstabilityError) as err:
        wave_run(two_node, WaveConfig(c=1.0, t_max=200), _unchecked_c=1.42)
    assert err.value.step <= 200
    assert "step" in str(err.value)


def test_trace_is_read_only_and_deterministic(triangles):
    cfg = WaveConfig(c=1.3, t_max=64, seed=11)
    a, b = wave_run(triangles, cfg), wave_run(triangles, cfg)
    assert np.array_equal(a.values, b.values)
    assert not a.values.flags.writeable
    assert a.config.t_max == 64


def _random_graph(seed, n):
    rng = np.random.default_rng(seed)
    A = (rng.random((n, n)) < 0.3) * rng.uniform(0.2, 1.0, (n, n))
    W = np.triu(A, 1)
    W = W + W.T
    for i in range(n - 1):
        W[i, i + 1] = W[i + 1, i] = max(W[i, i + 1], 0.5)
    return WeightedGraph(W)


def _bipartite(seed, n):
    rng = np.random.default_rng(seed)
    W = np.zeros((2 * n, 2 * n))
    B = rng.uniform(0.1, 1.0, (n, n))
    W[:n, n:] = B
    W[n:, :n] = B.T
    return WeightedGraph(W)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10_000), st.booleans())
def test_stable_below_bound(seed, bip):
    g = _bipartite(seed, 5) if bip else _random_graph(seed, 10)
    L = build_normalized_laplacian(g)
    cfg = WaveConfig(c=MAX_C * (1 - 1e-3), t_max=10_000, seed=seed)
    u0 = initial_state(L.n, seed)
    trace = wave_run(L, cfg, u0=u0)
    assert np.max(np.abs(trace.values)) < 1e3 * np.max(np.abs(u0))


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10_000))
def test_diverges_above_bound(seed):
    L = build_normalized_laplacian(_bipartite(seed, 4))
    assert dense_spectrum(L).eigenvalues[-1] >= 2 - 1e-6
    with pytest.raises(WaveInstabilityError) as err:
        wave_run(L, WaveConfig(c=1.0, t_max=10_000, seed=seed), _unchecked_c=MAX_C * (1 + 1e-2))
    assert err.value.step <= 10_000


def test_theta_eigenvalue_maps_invert():
    lam = np.linspace(0, 2, 11)
    for c in (0.5, 1.0, 1.4):
        assert theta_to_eigenvalue(eigenvalue_to_theta(lam, c), c) == pytest.approx(lam, abs=1e-12)


def test_synthetic_planted_mode():
    T = 512
    rng = np.random.default_rng(2)
    s = rng.choice([-1.0, 1.0], size=20)
    t = np.arange(1, T + 1)
    values = s[:, None] * np.cos(0.3 * t)[None, :]
    cfg = WaveConfig(c=1.0, t_max=T)
    modes = extract_modes(WaveTrace(values, cfg), 1)
    assert abs(modes.theta[0] - 0.3) <= 2 * math.pi / T
    v = modes.amplitudes[:, 0]
    assert np.array_equal(np.sign(v), s) or np.array_equal(np.sign(v), -s)


def test_two_node_frequency(two_node):
    trace = wave_run(two_node, WaveConfig(c=1.0, t_max=64, seed=4))
    modes = extract_modes(trace, 1)
    assert modes.theta[0] == pytest.approx(math.pi / 2, abs=2 * math.pi / 64)
    assert modes.eigenvalues[0] == pytest.approx(2.0, abs=0.1)


def test_insufficient_resolution(two_node):
    trace = wave_run(two_node, WaveConfig(c=1.0, t_max=64, seed=4))
    with pytest.raises(InsufficientResolutionError, match="t_max"):
        extract_modes(trace, 3)


def test_mode_invariants():
    g, _ = grid_blocks(30, 0.06, 0.02, 0.5, 0)
    L = build_normalized_laplacian(g)
    trace = wave_run(L, WaveConfig(k=3, seed=1))
    modes = extract_modes(trace, 3)
    assert np.all(np.diff(modes.theta) > 0)
    assert np.all((modes.eigenvalues >= 0) & (modes.eigenvalues <= 2))


def test_fiedler_signs_planted_100():
    g, truth = planted_partition([50, 50], 0.3, 0.02, 5)
    L = build_normalized_laplacian(g)
    modes = extract_modes(wave_run(L, WaveConfig(seed=3)), 1)
    v = dense_spectrum(L, 2).eigenvectors[:, 1]
    agree = np.mean(np.sign(modes.amplitudes[:, 0]) == np.sign(v))
    assert max(agree, 1 - agree) >= 0.99


def test_cluster_triangles(triangles):
    a = cluster_by_wave(triangles, WaveConfig(seed=0, t_max=256))
    assert same_partition(a.labels, [0, 0, 0, 1, 1, 1])
    assert same_partition(a.labels, cluster_by_oracle(triangles, 1).labels)


def test_four_blocks_two_modes():
    g, truth = grid_blocks(30, 0.06, 0.02, 0.5, 7)
    L = build_normalized_laplacian(g)
    a = cluster_by_wave(L, WaveConfig(k=2, seed=7))
    assert a.n_clusters == 4
    assert partition_agreement(a.labels, truth) == 1.0
    assert same_partition(a.labels, cluster_by_oracle(L, 2).labels)


def test_convergence_time_examples():
    assert estimate_convergence_time(1.0, 100, 8.0) == math.ceil(8 * 2 * math.pi / math.acos(math.exp(-1))) + 100
    # tau -> 0 gives 4 eta + n
    assert estimate_convergence_time(1e-3, 10, 8.0) == 32 + 10
    taus = [0.5, 1, 2, 5, 20, 100]
    vals = [estimate_convergence_time(t, 50) for t in taus]
    assert vals == sorted(vals) and len(set(vals)) == len(vals)
    with pytest.raises(ValueError):
        estimate_convergence_time(0.0, 10)
