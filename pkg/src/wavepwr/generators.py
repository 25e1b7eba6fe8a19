"""Seeded benchmark graphs and coupling matrices."""
import numpy as np

from .graph import GraphError, WeightedGraph


def planted_partition(blocks, p_in, p_out, seed, p_matrix=None):
    """Stochastic block model with unit edge weights.

    Returns ``(graph, truth)`` where ``truth[i]`` is the block index of node ``i``.
    ``p_matrix`` (``len(blocks)`` square) overrides the ``p_in``/``p_out`` pair.
    """
    blocks = [int(b) for b in blocks]
    if len(blocks) < 1 or any(b < 2 for b in blocks):
        raise GraphError("block too small (every block needs at least 2 nodes)")
    nb = len(blocks)
    if p_matrix is None:
        P = np.full((nb, nb), float(p_out))
        np.fill_diagonal(P, float(p_in))
    else:
        P = np.asarray(p_matrix, dtype=np.float64)
    if np.any((P < 0) | (P > 1)):
        raise ValueError("edge probabilities must lie in [0, 1]")
    truth = np.repeat(np.arange(nb), blocks)
    n = truth.size
    rng = np.random.default_rng(seed)
    prob = P[truth[:, None], truth[None, :]]
    draw = rng.random((n, n))
    A = np.triu(draw < prob, 1)
    W = (A | A.T).astype(np.float64)
    return WeightedGraph(W), truth


def expected_edges(blocks, p_in, p_out):
    blocks = np.asarray(blocks, dtype=np.float64)
    inside = np.sum(blocks * (blocks - 1) / 2.0)
    total = blocks.sum() * (blocks.sum() - 1) / 2.0
    return inside * p_in + (total - inside) * p_out


def ring_of_pairs(pairs=40, intra=1.0, inter=0.05):
    """Coupling matrix of ``pairs`` strongly bound oscillator pairs on a ring.

    Node ``2q`` and ``2q+1`` form pair ``q`` (weight ``intra``); node ``2q+1``
    links weakly to node ``2q+2`` (mod ``2*pairs``) with weight ``inter``.
    """
    if pairs < 2:
        raise ValueError("need at least 2 pairs")
    n = 2 * pairs
    K = np.zeros((n, n))
    for q in range(pairs):
        a, b = 2 * q, 2 * q + 1
        K[a, b] = K[b, a] = intra
        nxt = (b + 1) % n
        K[b, nxt] = K[nxt, b] = inter
    return K


def grid_blocks(size, q_strong, q_weak, p_in, seed):
    """Four equal blocks arranged on a 2x2 grid.

    Blocks 0-1 and 2-3 are linked with probability ``q_strong``, blocks 0-2 and
    1-3 with ``q_weak``, diagonal blocks not at all. The three slow eigenvectors
    are then block-constant sign patterns, so two of them give four labels.
    """
    P = np.array([
        [p_in, q_strong, q_weak, 0.0],
        [q_strong, p_in, 0.0, q_weak],
        [q_weak, 0.0, p_in, q_strong],
        [0.0, q_weak, q_strong, p_in],
    ])
    return planted_partition([size] * 4, p_in, 0.0, seed, p_matrix=P)


def kuramoto_benchmark(pairs=40, intra=1.0, inter=0.05, seed=0, rel_sigma=0.2, band=1.0):
    """Ring-of-pairs oscillator network with every other frequency uncertain.

    Nominal frequencies are drawn uniformly from ``[0.5, 1.5]`` and initial
    phases from ``N(0, 1)``, both from ``seed``. Oscillators ``0, 2, 4, ...`` get
    Gaussian frequencies with ``sigma = rel_sigma * |omega| / band`` (``band=1``
    reads a tolerance as one standard deviation, ``band=3`` as a 3-sigma band).

    Returns ``(model, params, truth)`` with ``truth`` the pair index per node.
    """
    from .dynet import kuramoto_builder
    from .gpc import RandomParam

    K = ring_of_pairs(pairs, intra, inter)
    n = 2 * pairs
    rng_omega, rng_phase = (np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(2))
    omega = rng_omega.uniform(0.5, 1.5, size=n)
    x0 = rng_phase.normal(0.0, 1.0, size=n)
    model = kuramoto_builder(n, K, omega, x0=x0)
    params = [RandomParam.gaussian(i, omega[i], rel_sigma * abs(omega[i]) / band) for i in range(0, n, 2)]
    return model, params, np.arange(n) // 2
