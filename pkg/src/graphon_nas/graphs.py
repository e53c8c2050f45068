"""Value types for weighted graphs, step graphons, DAGs and digraphons.

Conventions used throughout the package:

* nodeweights always sum to 1 (uniform ``1/n`` for sampled graphs and step
  graphons), so cut sizes need no extra ``1/|V|^2`` normalization;
* matrices are dense float64, row-major;
* a DAG is stored strictly upper-triangular: ``adj[i, j] == 1`` means an edge
  ``i -> j`` and requires ``i < j``.

Constructors only check shapes. Value invariants (weights summing to one,
edgeweights in ``[0, 1]``, ...) are reported by the ``validate*`` functions so
that malformed inputs can be inspected instead of rejected outright.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

FORMAT_VERSION = 1

ALPHA_TOL = 1e-12
DIGRAPHON_TOL = 1e-12


def _frozen(a, dtype=np.float64):
    arr = np.array(a, dtype=dtype)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple = ()

    @property
    def ok(self):
        return not self.violations

    def __bool__(self):
        return self.ok

    def __str__(self):
        return "pass" if self.ok else "; ".join(self.violations)


@dataclass(frozen=True, eq=False)
class WeightedGraph:
    """Nodeweights ``alpha`` and an ``n x n`` edgeweight matrix ``beta``.

    ``symmetric=False`` marks a DAG-oriented graph whose edges live above the
    diagonal; cut sizes then use the stored asymmetric ``beta`` as is.
    """

    alpha: np.ndarray
    beta: np.ndarray
    symmetric: bool = True

    def __post_init__(self):
        alpha = _frozen(self.alpha)
        beta = _frozen(self.beta)
        if alpha.ndim != 1 or alpha.size == 0:
            raise ValueError("alpha must be a non-empty vector")
        if beta.shape != (alpha.size, alpha.size):
            raise ValueError(f"beta must be {alpha.size}x{alpha.size}, got {beta.shape}")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "symmetric", bool(self.symmetric))

    @property
    def n(self):
        return self.alpha.size

    @classmethod
    def uniform(cls, beta, symmetric=None):
        beta = np.asarray(beta, dtype=np.float64)
        n = beta.shape[0]
        if symmetric is None:
            symmetric = bool(np.array_equal(beta, beta.T))
        return cls(np.full(n, 1.0 / n), beta, symmetric)

    def is_uniform(self, tol=ALPHA_TOL):
        return bool(np.all(np.abs(self.alpha - 1.0 / self.n) <= tol))

    def is_upper_triangular(self):
        return not np.any(np.tril(self.beta))

    def __eq__(self, other):
        if not isinstance(other, WeightedGraph):
            return NotImplemented
        return (self.symmetric == other.symmetric
                and np.array_equal(self.alpha, other.alpha)
                and np.array_equal(self.beta, other.beta))

    __hash__ = None


@dataclass(frozen=True, eq=False)
class StepGraphon:
    """Piecewise-constant graphon on an ``n x n`` grid of equal squares."""

    values: np.ndarray

    def __post_init__(self):
        values = _frozen(self.values)
        if values.ndim != 2 or values.shape[0] != values.shape[1] or values.shape[0] == 0:
            raise ValueError("values must be a non-empty square matrix")
        object.__setattr__(self, "values", values)

    @property
    def resolution(self):
        return self.values.shape[0]

    def to_weighted(self):
        return WeightedGraph.uniform(self.values)

    @classmethod
    def from_weighted(cls, g):
        if not g.is_uniform():
            raise ValueError("only graphs with uniform nodeweights are step graphons")
        return cls(g.beta)

    def __eq__(self, other):
        if not isinstance(other, StepGraphon):
            return NotImplemented
        return np.array_equal(self.values, other.values)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class DagGraph:
    """0/1 adjacency under the node order; edges only above the diagonal."""

    adj: np.ndarray

    def __post_init__(self):
        adj = np.asarray(self.adj)
        if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
            raise ValueError("adjacency must be square")
        if not np.all((adj == 0) | (adj == 1)):
            raise ValueError("adjacency entries must be 0 or 1")
        object.__setattr__(self, "adj", _frozen(adj, np.int8))

    @property
    def n(self):
        return self.adj.shape[0]

    @classmethod
    def empty(cls, n):
        return cls(np.zeros((n, n), dtype=np.int8))

    def predecessors(self, v):
        return tuple(int(u) for u in np.flatnonzero(self.adj[:, v]))

    def edge_count(self):
        return int(self.adj.sum())

    def __eq__(self, other):
        if not isinstance(other, DagGraph):
            return NotImplemented
        return np.array_equal(self.adj, other.adj)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class Digraphon:
    """Directed step graphon ``(W00, W01, W10, W11, w)``.

    For a node pair ``(i, j)``: ``W00`` no edge, ``W01`` edge ``i -> j``,
    ``W10`` edge ``j -> i``, ``W11`` both directions; ``w[i]`` is the
    self-loop probability of ``i``.
    """

    W00: np.ndarray
    W01: np.ndarray
    W10: np.ndarray
    W11: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        mats = [_frozen(getattr(self, k)) for k in ("W00", "W01", "W10", "W11")]
        n = mats[0].shape[0]
        for name, m in zip(("W00", "W01", "W10", "W11"), mats):
            if m.shape != (n, n):
                raise ValueError(f"{name} must be {n}x{n}")
            object.__setattr__(self, name, m)
        w = _frozen(self.w)
        if w.shape != (n,):
            raise ValueError(f"w must have length {n}")
        object.__setattr__(self, "w", w)

    @property
    def resolution(self):
        return self.w.size


def validate(g):
    """Check the WeightedGraph invariants; violations carry node indices."""
    out = []
    s = float(g.alpha.sum())
    if abs(s - 1.0) > ALPHA_TOL:
        out.append(f"nodeweights sum ≠ 1 (sum={s!r})")
    for i in np.flatnonzero((g.alpha <= 0) | (g.alpha > 1)):
        out.append(f"nodeweight out of (0,1] at {int(i)}: {g.alpha[i]!r}")
    for i, j in np.argwhere((g.beta < 0) | (g.beta > 1) | np.isnan(g.beta)):
        out.append(f"edgeweight out of [0,1] at ({int(i)}, {int(j)}): {g.beta[i, j]!r}")
    for i in np.flatnonzero(np.diag(g.beta)):
        out.append(f"self-loop at {int(i)}: {g.beta[i, i]!r}")
    if g.symmetric:
        for i, j in np.argwhere(np.triu(g.beta != g.beta.T)):
            out.append(f"asymmetric edgeweight at ({int(i)}, {int(j)})")
    return ValidationReport(tuple(out))


def validate_dag(d):
    out = [f"edge against the node order at ({int(i)}, {int(j)})"
           for i, j in np.argwhere(np.tril(d.adj))]
    return ValidationReport(tuple(out))


def validate_digraphon(d):
    out = []
    parts = (d.W00, d.W01, d.W10, d.W11)
    for name, m in zip(("W00", "W01", "W10", "W11"), parts):
        for i, j in np.argwhere((m < 0) | (m > 1)):
            out.append(f"{name} out of [0,1] at ({int(i)}, {int(j)})")
    total = d.W00 + d.W01 + d.W10 + d.W11
    for i, j in np.argwhere(np.abs(total - 1.0) > DIGRAPHON_TOL):
        out.append(f"probabilities sum to {total[i, j]!r} ≠ 1 at ({int(i)}, {int(j)})")
    for name, m in (("W00", d.W00), ("W11", d.W11)):
        for i, j in np.argwhere(np.triu(np.abs(m - m.T) > DIGRAPHON_TOL)):
            out.append(f"{name} asymmetric at ({int(i)}, {int(j)})")
    for i, j in np.argwhere(np.abs(d.W01 - d.W10.T) > DIGRAPHON_TOL):
        out.append(f"W01 ≠ W10 transposed at ({int(i)}, {int(j)})")
    for i in np.flatnonzero((d.w < 0) | (d.w > 1)):
        out.append(f"self-loop probability out of [0,1] at {int(i)}")
    return ValidationReport(tuple(out))


def dag_to_weighted(d, symmetric=False):
    """Uniform-weight graph of a DAG; ``symmetric=True`` mirrors the edges."""
    beta = d.adj.astype(np.float64)
    if symmetric:
        beta = beta + beta.T
    return WeightedGraph(np.full(d.n, 1.0 / d.n), beta, symmetric)


def weighted_to_dag(g, threshold=0.5):
    """Upper triangle of ``beta >= threshold`` as a DAG (inverse of dag_to_weighted)."""
    return DagGraph(np.triu(g.beta >= threshold, k=1).astype(np.int8))


def edge_weight_spread(g):
    """Largest difference between two entries of ``beta``.

    Every stored entry counts, including the zero diagonal (absent edges have
    weight 0), so for a valid graph with ``n >= 2`` this is the largest
    edgeweight. The blow-up distance bounds need that reading: a graph with
    all off-diagonal weights equal still moves under weight shifting.
    """
    return float(g.beta.max() - g.beta.min())


# -- serialization ---------------------------------------------------------

def to_json_dict(obj):
    if isinstance(obj, StepGraphon):
        obj = obj.to_weighted()
    if isinstance(obj, WeightedGraph):
        return {"version": FORMAT_VERSION, "kind": "weighted", "n": obj.n,
                "alpha": obj.alpha.tolist(), "beta": obj.beta.tolist(),
                "symmetric": obj.symmetric}
    if isinstance(obj, DagGraph):
        return {"version": FORMAT_VERSION, "kind": "dag", "n": obj.n,
                "adj": obj.adj.astype(int).tolist()}
    if isinstance(obj, Digraphon):
        return {"version": FORMAT_VERSION, "kind": "digraphon", "n": obj.resolution,
                "W00": obj.W00.tolist(), "W01": obj.W01.tolist(),
                "W10": obj.W10.tolist(), "W11": obj.W11.tolist(),
                "w": obj.w.tolist()}
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def from_json_dict(doc):
    if doc.get("version") != FORMAT_VERSION:
        raise ValueError(f"unsupported graph file version: {doc.get('version')!r}")
    kind = doc.get("kind")
    n = doc.get("n")
    if kind == "weighted":
        g = WeightedGraph(doc["alpha"], doc["beta"], doc.get("symmetric", True))
    elif kind == "dag":
        g = DagGraph(np.array(doc["adj"], dtype=np.int8))
    elif kind == "digraphon":
        g = Digraphon(doc["W00"], doc["W01"], doc["W10"], doc["W11"], doc["w"])
    else:
        raise ValueError(f"unknown graph kind: {kind!r}")
    size = g.resolution if kind == "digraphon" else g.n
    if n != size:
        raise ValueError(f"declared n={n!r} does not match the matrices ({size})")
    return g


def dumps(obj):
    return json.dumps(to_json_dict(obj), sort_keys=True)


def save_graph(obj, path):
    Path(path).write_text(dumps(obj) + "\n")


def load_graph(path):
    return from_json_dict(json.loads(Path(path).read_text()))
