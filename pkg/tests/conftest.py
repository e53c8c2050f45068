import numpy as np
import pytest

from graphon_nas.graphs import WeightedGraph


def random_graph(rng, n, symmetric=True, uniform=True):
    beta = np.triu(rng.random((n, n)), k=1)
    if symmetric:
        beta = beta + beta.T
    if uniform:
        return WeightedGraph.uniform(beta, symmetric=symmetric)
    alpha = rng.random(n) + 0.1
    return WeightedGraph(alpha / alpha.sum(), beta, symmetric)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
