import numpy as np
import pytest

from wavepwr.graph import WeightedGraph, build_normalized_laplacian


def cliques(sizes, weight=1.0):
    n = sum(sizes)
    W = np.zeros((n, n))
    start = 0
    for s in sizes:
        W[start:start + s, start:start + s] = weight
        start += s
    np.fill_diagonal(W, 0.0)
    return W


@pytest.fixture
def triangles():
    return build_normalized_laplacian(WeightedGraph(cliques([3, 3])))


@pytest.fixture
def two_node():
    return build_normalized_laplacian(WeightedGraph([[0.0, 1.0], [1.0, 0.0]]))
