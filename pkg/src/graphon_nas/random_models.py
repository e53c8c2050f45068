"""Graphons of the ER and WS models, BA sampling, empirical graphons."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._rng import spawn
from .graphs import DagGraph, StepGraphon


@dataclass(frozen=True)
class ErParams:
    p: float

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p must lie in [0, 1], got {self.p}")


@dataclass(frozen=True)
class WsParams:
    kappa: float
    p: float

    def __post_init__(self):
        if not 0.0 < self.kappa < 1.0:
            raise ValueError(f"kappa must lie in (0, 1), got {self.kappa}")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p must lie in [0, 1], got {self.p}")
        if self.p * self.kappa > 1.0 - self.kappa:
            raise ValueError(f"off-band probability p*kappa/(1-kappa) exceeds 1 for "
                             f"kappa={self.kappa}, p={self.p}")


@dataclass(frozen=True)
class BaParams:
    m0: int
    m: int
    n: int

    def __post_init__(self):
        if not 1 <= self.m <= self.m0 < self.n:
            raise ValueError(f"need 1 <= m <= m0 < n, got m={self.m}, m0={self.m0}, n={self.n}")


def er_graphon(params, n):
    values = np.full((n, n), float(params.p))
    np.fill_diagonal(values, 0.0)
    return StepGraphon(values)


def ring_distance(n):
    idx = np.arange(n)
    d = np.abs(idx[:, None] - idx[None, :])
    return np.minimum(d, n - d)


def ws_graphon(params, n):
    """Band graphon of the rewired ring lattice.

    Pairs within ring distance ``kappa * n / 2`` keep their lattice edge with
    probability ``1 - p``; every other pair receives the rewired mass at the
    constant density ``p * kappa / (1 - kappa)``, which keeps the expected
    edge count at its lattice value in the large-``n`` limit.
    """
    kappa, p = params.kappa, params.p
    if kappa * n < 1:
        raise ValueError(f"kappa * n must be >= 1, got {kappa * n}")
    band = ring_distance(n) <= kappa * n / 2 + 1e-9
    values = np.where(band, 1.0 - p, p * kappa / (1.0 - kappa))
    np.fill_diagonal(values, 0.0)
    return StepGraphon(values)


def ba_sample(params, seed):
    """Barabási-Albert graph with a complete seed graph, as a DAG.

    Nodes are numbered by insertion time. Each new node draws its ``m``
    targets one at a time without replacement, with probabilities
    proportional to the degrees at the start of its insertion.
    """
    m0, m, n = params.m0, params.m, params.n
    rng = spawn(seed, "ba")
    adj = np.zeros((n, n), dtype=np.int8)
    adj[:m0, :m0] = np.triu(np.ones((m0, m0), dtype=np.int8), k=1)
    deg = np.zeros(n)
    deg[:m0] = m0 - 1
    for t in range(m0, n):
        w = deg[:t].copy()
        if w.sum() == 0:
            w[:] = 1.0
        for _ in range(m):
            cdf = np.cumsum(w)
            j = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
            adj[j, t] = 1
            w[j] = 0.0
        targets = np.flatnonzero(adj[:t, t])
        deg[targets] += 1
        deg[t] = m
    return DagGraph(adj)


def _as_symmetric_adjacency(sample):
    if isinstance(sample, DagGraph):
        a = sample.adj.astype(np.float64)
        return a + a.T
    return np.asarray(sample, dtype=np.float64)


def block_average(a, r):
    n = a.shape[0]
    if r <= 0 or n % r:
        raise ValueError(f"resolution {r} must divide n={n}")
    b = n // r
    return a.reshape(r, b, r, b).mean(axis=(1, 3))


def empirical_graphon(generator, n, trials, resolution, seed):
    """Average ``trials`` sampled adjacency matrices, then block-average.

    ``generator(n, seed)`` returns a DagGraph (read as undirected) or an
    ``n x n`` 0/1 matrix; trial ``t`` receives seed ``seed + t``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if resolution <= 0 or n % resolution:
        raise ValueError(f"resolution {resolution} must divide n={n}")
    total = np.zeros((n, n))
    for t in range(trials):
        total += _as_symmetric_adjacency(generator(n, seed + t))
    return StepGraphon(block_average(total / trials, resolution))
