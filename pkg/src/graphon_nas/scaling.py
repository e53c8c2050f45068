"""Growing a graph to more nodes while staying close in cut distance.

Every operation keeps copies of a node contiguous, so a DAG-oriented
(upper-triangular) input stays upper-triangular. Each operation has a
matching overlay constructor that couples the input with the output node by
node; those overlays certify the distance bounds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cutdist import OverlayMatrix, diagonal_min_overlay
from .graphs import WeightedGraph, edge_weight_spread


@dataclass(frozen=True)
class ScalePlan:
    n: int
    N: int
    k: int
    m: int
    bound: float

    @classmethod
    def for_graph(cls, g, N):
        n = g.n
        if N < n:
            raise ValueError(f"target N={N} is smaller than n={n}; downscaling is not supported")
        k, m = divmod(N, n)
        kn = k * n
        bound = edge_weight_spread(g) * (kn - m) * m / (kn * (kn + m))
        return cls(n, N, k, m, float(bound))

    def to_dict(self):
        return {"n": self.n, "N": self.N, "k": self.k, "m": self.m, "bound": self.bound}


def blowup_k(g, k):
    """Replace every node by ``k`` unlinked copies sharing its weight."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    beta = np.kron(g.beta, np.ones((k, k)))
    for i in range(g.n):
        beta[i * k:(i + 1) * k, i * k:(i + 1) * k] = 0.0
    return WeightedGraph(np.repeat(g.alpha / k, k), beta, g.symmetric)


def split_node(g, i, k):
    """Replace node ``i`` by ``k`` unlinked copies, inserted in its place."""
    if not 0 <= i < g.n:
        raise ValueError(f"node index {i} out of range for n={g.n}")
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    idx = np.concatenate([np.arange(i), np.full(k, i), np.arange(i + 1, g.n)])
    beta = g.beta[np.ix_(idx, idx)].copy()
    beta[i:i + k, i:i + k] = 0.0
    alpha = g.alpha[idx].copy()
    alpha[i:i + k] = g.alpha[i] / k
    return WeightedGraph(alpha, beta, g.symmetric)


def shift_weights(g, m):
    """Give the first ``m`` nodes weight ``2/(n+m)`` and the rest ``1/(n+m)``."""
    n = g.n
    if not g.is_uniform():
        raise ValueError("weight shifting needs uniform nodeweights")
    if not 0 < m < n:
        raise ValueError(f"m must satisfy 0 < m < n={n}, got {m}")
    alpha = np.full(n, 1.0 / (n + m))
    alpha[:m] = 2.0 / (n + m)
    return WeightedGraph(alpha, g.beta, g.symmetric)


def fractional_blowup(g, N):
    """Blow up to ``k*n`` nodes, then shift and split to reach ``N = k*n + m``."""
    plan = ScalePlan.for_graph(g, N)
    h = blowup_k(g, plan.k)
    if plan.m == 0:
        return h, plan
    h = shift_weights(h, plan.m)
    for i in reversed(range(plan.m)):
        h = split_node(h, i, 2)
    return WeightedGraph(np.full(N, 1.0 / N), h.beta, h.symmetric), plan


def interpolate_row(row, k):
    """Expand a length-n row to length ``k*n`` by linear interpolation.

    Entry ``s`` of block ``j`` is ``((k - s) * row[j] + s * row[j + 1]) / k``
    with ``row[n] = 0``.
    """
    row = np.asarray(row, dtype=np.float64)
    nxt = np.append(row[1:], 0.0)
    s = np.arange(k)
    return (((k - s)[None, :] * row[:, None] + s[None, :] * nxt[:, None]) / k).reshape(-1)


def interpolate_1d(g, k):
    """1-D linear interpolation baseline for upper-triangular graphs.

    Each row is repeated ``k`` times and interpolated horizontally; entries on
    or below the diagonal are then cleared so the result is again a DAG-shaped
    graph.
    """
    if not g.is_upper_triangular():
        raise ValueError("interpolation needs an upper-triangular graph")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    rows = np.stack([interpolate_row(r, k) for r in g.beta])
    beta = np.triu(np.repeat(rows, k, axis=0), k=1)
    n = k * g.n
    return WeightedGraph(np.full(n, 1.0 / n), beta, symmetric=False)


# -- overlays certifying the operations ------------------------------------

def blowup_overlay(g, k):
    """Couples node ``i`` with each of its ``k`` copies in ``blowup_k(g, k)``."""
    L = np.zeros((g.n, g.n * k))
    for i in range(g.n):
        L[i, i * k:(i + 1) * k] = g.alpha[i] / k
    return OverlayMatrix(L)


def split_overlay(g, i, k):
    """Couples ``g`` with ``split_node(g, i, k)`` copy by copy."""
    n = g.n
    L = np.zeros((n, n + k - 1))
    for j in range(n):
        if j < i:
            L[j, j] = g.alpha[j]
        elif j == i:
            L[i, i:i + k] = g.alpha[i] / k
        else:
            L[j, j + k - 1] = g.alpha[j]
    return OverlayMatrix(L)


def glue_overlays(first, second, middle_alpha):
    """Compose ``G -> H`` with ``H -> K`` through the nodeweights of ``H``."""
    return OverlayMatrix(first.L @ np.diag(1.0 / np.asarray(middle_alpha)) @ second.L)


def fractional_overlay(g, N, completion="northwest"):
    """Overlay between ``g`` and ``fractional_blowup(g, N)`` built step by step."""
    plan = ScalePlan.for_graph(g, N)
    h = blowup_k(g, plan.k)
    L = blowup_overlay(g, plan.k)
    if plan.m == 0:
        return L
    shifted = shift_weights(h, plan.m)
    L = glue_overlays(L, diagonal_min_overlay(h, shifted, completion), h.alpha)
    cur = shifted
    for i in reversed(range(plan.m)):
        nxt = split_node(cur, i, 2)
        L = glue_overlays(L, split_overlay(cur, i, 2), cur.alpha)
        cur = nxt
    return L
