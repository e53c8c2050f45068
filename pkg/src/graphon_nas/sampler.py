"""Bernoulli sampling from weighted graphs and concentration experiments."""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ._rng import spawn
from .cutdist import DBOX_EXACT_LIMIT, d_box
from .graphs import DagGraph, WeightedGraph
from .scaling import fractional_blowup


def sample_simple(g, seed, *keys):
    """Draw each pair ``i < j`` independently with probability ``beta[i, j]``.

    Pairs are visited row-major over the upper triangle, one uniform draw
    each, so the seed fixes the sample. The result is always stored as a
    DAG under the node order; for a symmetric ``g`` read it as undirected.
    """
    n = g.n
    iu, ju = np.triu_indices(n, k=1)
    u = spawn(seed, "sample", *keys).random(iu.size)
    adj = np.zeros((n, n), dtype=np.int8)
    adj[iu, ju] = u < g.beta[iu, ju]
    return DagGraph(adj)


def as_weighted(sample, like):
    """The sample on the nodeweights of ``like``, mirrored if ``like`` is symmetric."""
    a = sample.adj.astype(np.float64)
    if like.symmetric:
        return WeightedGraph(like.alpha, a + a.T, True)
    return WeightedGraph(like.alpha, a, False)


def scale_and_sample(g, N, seed):
    big, plan = fractional_blowup(g, N)
    return sample_simple(big, seed), plan


@dataclass(frozen=True)
class SampleReport:
    n: int
    trials: int
    distances: np.ndarray = field(repr=False)
    threshold: float
    violations: int
    exact: bool

    def to_dict(self):
        return {"n": self.n, "trials": self.trials, "threshold": self.threshold,
                "violations": self.violations, "exact": self.exact,
                "distances": [float(d) for d in self.distances]}

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["trial", "distance", "threshold"])
        for t, d in enumerate(self.distances):
            w.writerow([t, repr(float(d)), repr(self.threshold)])
        return buf.getvalue()


def concentration_experiment(g, trials, seed, limit=DBOX_EXACT_LIMIT, restarts=20, threads=1):
    """Distance from ``g`` to each of ``trials`` samples, against ``4/sqrt(n)``.

    Distances are exact when ``n <= limit``; otherwise they are heuristic
    lower bounds, so any reported violation is a real one.
    """
    n = g.n
    threshold = 4.0 / math.sqrt(n)

    def one(t):
        s = as_weighted(sample_simple(g, seed, "trial", t), g)
        return d_box(g, s, limit=limit, restarts=restarts, seed=seed + t).value

    if threads > 1 and trials > 1:
        with ThreadPoolExecutor(threads) as pool:
            dists = list(pool.map(one, range(trials)))
    else:
        dists = [one(t) for t in range(trials)]
    dists = np.array(dists, dtype=np.float64)
    return SampleReport(n, trials, dists, threshold, int(np.sum(dists >= threshold)), n <= limit)


def sample_digraphon(d, seed):
    """Directed 0/1 matrix from a digraphon.

    Each unordered pair ``i < j`` picks one of no edge, ``i -> j``, ``j -> i``
    or both, with probabilities ``W00, W01, W10, W11``; node ``i`` gets a
    self-loop with probability ``w[i]``.
    """
    n = d.resolution
    rng = spawn(seed, "digraphon")
    iu, ju = np.triu_indices(n, k=1)
    probs = np.stack([d.W00[iu, ju], d.W01[iu, ju], d.W10[iu, ju], d.W11[iu, ju]], axis=1)
    cdf = np.cumsum(probs, axis=1)
    u = rng.random(iu.size)[:, None] * cdf[:, -1:]
    choice = (u >= cdf).sum(axis=1)
    adj = np.zeros((n, n), dtype=np.int8)
    adj[iu, ju] = (choice == 1) | (choice == 3)
    adj[ju, iu] = (choice == 2) | (choice == 3)
    adj[np.arange(n), np.arange(n)] = rng.random(n) < d.w
    return adj
