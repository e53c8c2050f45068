"""Differentiable search over node input subsets, with a numpy toy network.

Every node ``v`` of a stage DAG has ``K`` candidate input subsets drawn
from its predecessors. Each candidate forms its own pathway (a separate
parameter block per member node), and the pathways are mixed with
Gumbel-softmax coefficients computed from learnable structural weights.

The stage input is split into one contiguous slice per node. The toy
operation of node ``u`` is an affine map followed by a rectifier, applied to
the aggregated input of ``u`` joined with its own slice; a node with an empty
input subset sees only its slice. The stage output concatenates one readout
per node and feeds a softmax classifier.

Backpropagation is written by hand. The Gumbel noise of a forward pass is
treated as fixed input, so the coefficient gradient is the plain softmax
Jacobian scaled by ``1/tau``.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field

import numpy as np

from ._rng import spawn
from .graphs import DagGraph, StepGraphon, WeightedGraph
from .random_models import WsParams, ws_graphon
from .sampler import sample_simple
from .scaling import fractional_blowup


class SearchDiverged(ArithmeticError):
    """Raised when the training loss stops being finite."""


# -- configuration -----------------------------------------------------------

@dataclass(frozen=True)
class GumbelConfig:
    tau0: float = 1.0
    tau_min: float = 0.1
    anneal_rate: float = 0.03

    def __post_init__(self):
        if not self.tau0 >= self.tau_min > 0:
            raise ValueError("need tau0 >= tau_min > 0")
        if self.anneal_rate < 0:
            raise ValueError("anneal_rate must be >= 0")

    def tau(self, epoch):
        return max(self.tau_min, self.tau0 * math.exp(-self.anneal_rate * epoch))


@dataclass(frozen=True)
class SearchConfig:
    epochs: int = 60
    batch_size: int = 64
    lr: float = 0.1
    momentum: float = 0.9
    weight_decay: float = 0.0
    candidates: int = 8
    width: int = 8
    aggregation: str = "concat"
    gumbel: GumbelConfig = field(default_factory=GumbelConfig)

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1 or self.candidates < 1 or self.width < 1:
            raise ValueError("epochs, batch_size, candidates and width must be positive")
        if self.aggregation not in ("concat", "sum"):
            raise ValueError(f"unknown aggregation {self.aggregation!r}")

    def lr_at(self, epoch):
        """Learning rate divided by 10 at half and at three quarters of training."""
        drops = sum(epoch >= b for b in self.drop_epochs())
        return self.lr * 0.1 ** drops

    def drop_epochs(self):
        return (self.epochs // 2, (3 * self.epochs) // 4)

    def last_phase_start(self):
        return self.drop_epochs()[-1]

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "gumbel" in d:
            d["gumbel"] = GumbelConfig(**d["gumbel"])
        return cls(**d)


# -- toy task ----------------------------------------------------------------

@dataclass(frozen=True)
class ToyTask:
    """Classification data labelled by a teacher network on a planted DAG.

    The start DAG is where the search begins; the planted DAG adds one extra
    input edge per node where possible, so for each node the planted input
    set is the only one-edge neighbour of the start set that holds every
    planted parent. ``labels="random"`` ignores the inputs altogether.
    """

    feature_dim: int
    classes: int
    start: DagGraph
    planted: DagGraph
    n_train: int = 4000
    n_val: int = 1000
    noise: float = 0.0
    seed: int = 0
    labels: str = "teacher"
    teacher_width: int = 8
    teacher_bias: float = 0.5

    def __post_init__(self):
        if self.start.n != self.planted.n:
            raise ValueError("start and planted DAGs differ in size")
        if np.any(np.tril(self.planted.adj)) or np.any(np.tril(self.start.adj)):
            raise ValueError("DAGs must be upper-triangular")
        if not 0.0 <= self.noise <= 1.0:
            raise ValueError("noise must lie in [0, 1]")
        if self.labels not in ("teacher", "random"):
            raise ValueError(f"unknown label mode {self.labels!r}")

    @property
    def n(self):
        return self.start.n

    @classmethod
    def planted_task(cls, n=8, feature_dim=32, classes=4, seed=0, kappa=0.4, p=0.75, **kw):
        """Start DAG sampled from the WS graphon; planted DAG one edge richer per node."""
        start = sample_simple(ws_graphon(WsParams(kappa, p), n).to_weighted(), seed, "start")
        rng = spawn(seed, "planted")
        adj = start.adj.copy()
        for v in range(n):
            missing = [u for u in range(v) if not adj[u, v]]
            if missing:
                adj[missing[int(rng.integers(len(missing)))], v] = 1
        return cls(feature_dim, classes, start, DagGraph(adj), seed=seed, **kw)

    def generate(self):
        """``(X_train, y_train, X_val, y_val)``; deterministic given the task.

        Teacher labels: node ``v`` contributes ``C_v relu(A_v z_v + b_v)`` to
        the class scores, where ``z_v`` joins the input slices of ``v`` and of
        its planted parents. Each term needs a node and its parents' slices
        together, so it is computable only along planted edges.
        """
        total = self.n_train + self.n_val
        X = spawn(self.seed, "features").standard_normal((total, self.feature_dim))
        rng = spawn(self.seed, "labels")
        if self.labels == "random":
            y = rng.integers(self.classes, size=total)
        else:
            y = np.argmax(self._teacher_scores(X), axis=1)
            flip = rng.random(total) < self.noise
            y = np.where(flip, rng.integers(self.classes, size=total), y)
        return X[:self.n_train], y[:self.n_train], X[self.n_train:], y[self.n_train:]

    def _teacher_scores(self, X):
        rng = spawn(self.seed, "teacher")
        slices = node_slices(self.feature_dim, self.n)
        h = self.teacher_width
        scores = np.zeros((len(X), self.classes))
        for v in range(self.n):
            cols = [slices[u] for u in self.planted.predecessors(v)] + [slices[v]]
            z = np.concatenate([X[:, c] for c in cols], axis=1)
            A = rng.standard_normal((h, z.shape[1])) / math.sqrt(z.shape[1])
            b = rng.standard_normal(h) * self.teacher_bias
            C = rng.standard_normal((self.classes, h))
            scores += np.maximum(z @ A.T + b, 0.0) @ C.T
        return scores

    def to_dict(self):
        return {"feature_dim": self.feature_dim, "classes": self.classes,
                "start": self.start.adj.astype(int).tolist(),
                "planted": self.planted.adj.astype(int).tolist(),
                "n_train": self.n_train, "n_val": self.n_val, "noise": self.noise,
                "seed": self.seed, "labels": self.labels, "teacher_width": self.teacher_width,
                "teacher_bias": self.teacher_bias}

    @classmethod
    def from_dict(cls, d):
        """Explicit task, or ``{"planted_task": {...}}`` to generate one."""
        if "planted_task" in d:
            return cls.planted_task(**d["planted_task"])
        d = dict(d)
        d["start"] = DagGraph(np.array(d["start"], dtype=np.int8))
        d["planted"] = DagGraph(np.array(d["planted"], dtype=np.int8))
        return cls(**d)


# -- candidate subsets and Gumbel softmax ------------------------------------

def enumerate_subsets(start, v, K, seed):
    """The start input set of ``v`` and its one-edge neighbours, at most ``K``.

    Order: the start set, then removals by increasing node, then additions by
    increasing node. When there are more than ``K``, the start set is kept and
    ``K - 1`` of the others are sampled without replacement (order preserved).
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    base = start.predecessors(v)
    cands = [base]
    cands += [tuple(u for u in base if u != r) for r in base]
    cands += [tuple(sorted(base + (u,))) for u in range(v) if u not in base]
    if len(cands) <= K:
        return cands
    pick = spawn(seed, "subsets", v).choice(len(cands) - 1, size=K - 1, replace=False)
    return [cands[0]] + [cands[1 + i] for i in sorted(pick)]


def gumbel_noise(rng, shape):
    u = rng.random(shape)
    u = np.maximum(u, np.finfo(np.float64).tiny)
    return -np.log(-np.log(u))


def softmax_coefficients(logits, tau, gamma):
    z = (np.asarray(logits) + gamma) / tau
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def gumbel_softmax(pi, tau, seed, gamma=None, size=None):
    """Relaxed one-hot sample over ``len(pi)`` choices.

    ``gamma`` overrides the Gumbel noise (pass zeros for the noiseless limit);
    ``size`` draws that many independent coefficient vectors at once.
    """
    pi = np.asarray(pi, dtype=np.float64)
    if np.any(pi <= 0) or tau <= 0:
        raise ValueError("pi must be positive and tau > 0")
    shape = pi.shape if size is None else (size,) + pi.shape
    if gamma is None:
        gamma = gumbel_noise(spawn(seed, "gumbel"), shape)
    return softmax_coefficients(np.log(pi), tau, gamma)


# -- network -------------------------------------------------------------------

@dataclass
class SubsetChoice:
    """Candidate input subsets of node ``v`` with their pathway parameters.

    ``params[(k, u)]`` is the ``[W, b]`` block applied to the input of member
    ``u`` inside subset ``k``. Structural weights are stored as log-weights.
    """

    v: int
    subsets: list
    logits: np.ndarray
    params: dict

    def __post_init__(self):
        if not self.subsets:
            raise ValueError("need at least one subset")
        for U in self.subsets:
            if any(not 0 <= u < self.v for u in U):
                raise ValueError(f"subset {U} of node {self.v} has a non-predecessor")

    @property
    def pi(self):
        return np.exp(self.logits)

    @property
    def K(self):
        return len(self.subsets)

    def best(self):
        return int(np.argmax(self.logits))


@dataclass
class SearchNetwork:
    input_dim: int
    width: int
    classes: int
    choices: list
    readout: list
    head: list
    aggregation: str = "concat"
    activation: str = "relu"

    def in_dims(self):
        dims = []
        for ch in self.choices:
            sizes = [0 if not U else
                     (len(U) * self.width if self.aggregation == "concat" else self.width)
                     for U in ch.subsets]
            dims.append(max(sizes))
        return dims

    def slices(self):
        """Column ranges of the stage input owned by each node."""
        return node_slices(self.input_dim, len(self.choices))

    def op_dims(self):
        """Input width of each node's operation: aggregated input plus own slice."""
        return [d + (s.stop - s.start) for d, s in zip(self.in_dims(), self.slices())]

    def tensors(self):
        """Every parameter array, in a fixed order."""
        out = []
        for ch in self.choices:
            out.append(ch.logits)
            for key in sorted(ch.params):
                out.extend(ch.params[key])
        for W, b in self.readout:
            out += [W, b]
        out += self.head
        return out

    def theta_mask(self):
        """True for pathway/readout/head arrays, False for structural log-weights."""
        out = []
        for ch in self.choices:
            out.append(False)
            out += [True, True] * len(ch.params)
        return out + [True, True] * len(self.readout) + [True, True]

    def zeros_like(self):
        z = copy.deepcopy(self)
        for t in z.tensors():
            t[...] = 0.0
        return z

    def argmax_dag(self):
        adj = np.zeros((len(self.choices),) * 2, dtype=np.int8)
        for ch in self.choices:
            for u in ch.subsets[ch.best()]:
                adj[u, ch.v] = 1
        return DagGraph(adj)


def node_slices(input_dim, n):
    bounds = np.linspace(0, input_dim, n + 1).round().astype(int)
    return [slice(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:])]


def _he(rng, out_dim, in_dim):
    return rng.standard_normal((out_dim, in_dim)) * math.sqrt(2.0 / in_dim)


def build_network(subsets, input_dim, width, classes, rng, aggregation="concat",
                  activation="relu"):
    """Network with one ``SubsetChoice`` per node; ``subsets[v]`` lists its candidates."""
    net = SearchNetwork(input_dim, width, classes, [], [], [], aggregation, activation)
    for v, cands in enumerate(subsets):
        net.choices.append(SubsetChoice(v, [tuple(U) for U in cands], np.zeros(len(cands)), {}))
    if input_dim < len(subsets):
        raise ValueError("the stage input needs at least one feature per node")
    dims = net.op_dims()
    for ch in net.choices:
        for k, U in enumerate(ch.subsets):
            for u in U:
                ch.params[(k, u)] = [_he(rng, width, dims[u]), np.zeros(width)]
    net.readout = [[_he(rng, width, dims[v]), np.zeros(width)] for v in range(len(subsets))]
    fan_in = width * len(subsets)
    net.head = [rng.standard_normal((classes, fan_in)) / math.sqrt(fan_in), np.zeros(classes)]
    return net


def _pad(a, dim):
    if a.shape[1] == dim:
        return a
    return np.pad(a, ((0, 0), (0, dim - a.shape[1])))


def _act(net, z):
    return np.maximum(z, 0.0) if net.activation == "relu" else z


def _act_grad(net, z, g):
    return g * (z > 0) if net.activation == "relu" else g


def draw_gammas(net, rng):
    """One Gumbel noise vector per node for a forward pass."""
    return [gumbel_noise(rng, ch.K) for ch in net.choices]


def _coefficients(net, tau, gammas, hard):
    out = []
    for v, ch in enumerate(net.choices):
        if hard:
            a = np.zeros(ch.K)
            a[ch.best()] = 1.0
        else:
            g = np.zeros(ch.K) if gammas is None else gammas[v]
            a = softmax_coefficients(ch.logits, tau, g)
        out.append(a)
    return out


def _forward(net, x, coefs):
    dims = net.in_dims()
    slices = net.slices()
    ins, feats, outs, pre = [], [], [], {}
    for v, ch in enumerate(net.choices):
        mix = np.zeros((x.shape[0], dims[v]))
        node_outs = []
        for k, U in enumerate(ch.subsets):
            if not U:
                o = mix[:, :0]
            else:
                blocks = []
                for u in U:
                    W, b = ch.params[(k, u)]
                    z = feats[u] @ W.T + b
                    pre[(v, k, u)] = z
                    blocks.append(_act(net, z))
                o = np.concatenate(blocks, axis=1) if net.aggregation == "concat" else sum(blocks)
            o = _pad(o, dims[v])
            node_outs.append(o)
            mix += coefs[v][k] * o
        outs.append(node_outs)
        ins.append(mix)
        feats.append(np.concatenate([mix, x[:, slices[v]]], axis=1))
    read_pre = [feats[v] @ W.T + b for v, (W, b) in enumerate(net.readout)]
    H = np.concatenate([_act(net, z) for z in read_pre], axis=1)
    return H, {"feats": feats, "outs": outs, "pre": pre, "read_pre": read_pre, "coefs": coefs}


def stage_forward(net, x, tau, seed=None, gammas=None, coefficients=None):
    """Input of the stage's output sink: one readout block per node.

    Coefficients come from ``coefficients`` when given, otherwise from the
    Gumbel softmax at temperature ``tau`` with noise ``gammas`` (drawn from
    ``seed`` if omitted; ``seed=None`` and no gammas means zero noise).
    """
    if coefficients is None:
        if gammas is None and seed is not None:
            gammas = draw_gammas(net, spawn(seed, "forward"))
        coefficients = _coefficients(net, tau, gammas, hard=False)
    return _forward(net, x, coefficients)[0]


def predict_logits(net, x, tau=1.0, gammas=None, hard=False):
    H, _ = _forward(net, x, _coefficients(net, tau, gammas, hard))
    W, b = net.head
    return H @ W.T + b


def _log_softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def loss_value(net, x, y, tau, gammas):
    logp = _log_softmax(predict_logits(net, x, tau, gammas))
    return float(-logp[np.arange(len(y)), y].mean())


def toy_gradients(net, batch, tau=1.0, gammas=None):
    """Mean cross-entropy over the batch and its exact gradient.

    Returns ``(loss, grads)`` where ``grads`` mirrors ``net`` (use
    ``grads.tensors()`` to line the arrays up with ``net.tensors()``).
    """
    x, y = batch
    coefs = _coefficients(net, tau, gammas, hard=False)
    H, cache = _forward(net, x, coefs)
    Wh, bh = net.head
    logits = H @ Wh.T + bh
    logp = _log_softmax(logits)
    n = len(y)
    loss = float(-logp[np.arange(n), y].mean())

    grads = net.zeros_like()
    d = np.exp(logp)
    d[np.arange(n), y] -= 1.0
    d /= n
    grads.head[0][...] = d.T @ H
    grads.head[1][...] = d.sum(axis=0)
    dH = d @ Wh

    feats, outs, pre = cache["feats"], cache["outs"], cache["pre"]
    d_in = [np.zeros_like(a) for a in feats]
    w = net.width
    for v, (W, _) in enumerate(net.readout):
        dz = _act_grad(net, cache["read_pre"][v], dH[:, v * w:(v + 1) * w])
        grads.readout[v][0][...] = dz.T @ feats[v]
        grads.readout[v][1][...] = dz.sum(axis=0)
        d_in[v] += dz @ W

    for v in reversed(range(len(net.choices))):
        ch = net.choices[v]
        gch = grads.choices[v]
        a = coefs[v]
        d_mix = d_in[v][:, :outs[v][0].shape[1]]
        g = np.array([float(np.sum(d_mix * o)) for o in outs[v]])
        gch.logits[...] = a * (g - a @ g) / tau
        for k, U in enumerate(ch.subsets):
            if not U:
                continue
            d_out = a[k] * d_mix
            for j, u in enumerate(U):
                block = d_out[:, j * w:(j + 1) * w] if net.aggregation == "concat" else d_out[:, :w]
                dz = _act_grad(net, pre[(v, k, u)], block)
                W, _ = ch.params[(k, u)]
                gch.params[(k, u)][0][...] = dz.T @ feats[u]
                gch.params[(k, u)][1][...] = dz.sum(axis=0)
                d_in[u] += dz @ W
    return loss, grads


def accuracy(net, x, y):
    """Accuracy of the discrete network (each node uses its highest-weight subset)."""
    return float(np.mean(np.argmax(predict_logits(net, x, hard=True), axis=1) == y))


# -- training --------------------------------------------------------------------

@dataclass
class SearchTrace:
    epochs_recorded: int
    matrices: list
    average: StepGraphon | None
    history: list = field(default_factory=list)

    def to_dict(self):
        return {"epochs_recorded": self.epochs_recorded,
                "matrices": [m.astype(int).tolist() for m in self.matrices],
                "average": None if self.average is None else self.average.values.tolist(),
                "history": [dict(h) for h in self.history]}


def _fit(net, data, config, seed, record_from=None):
    """Momentum SGD over ``config.epochs``; returns (history, recorded matrices)."""
    Xtr, ytr, Xva, yva = data
    params = net.tensors()
    theta = net.theta_mask()
    vel = [np.zeros_like(p) for p in params]
    history, matrices = [], []
    for epoch in range(config.epochs):
        tau = config.gumbel.tau(epoch)
        lr = config.lr_at(epoch)
        order = spawn(seed, "batches", epoch).permutation(len(ytr))
        noise = spawn(seed, "noise", epoch)
        losses = []
        for step, start in enumerate(range(0, len(ytr), config.batch_size)):
            idx = order[start:start + config.batch_size]
            gammas = draw_gammas(net, noise)
            loss, grads = toy_gradients(net, (Xtr[idx], ytr[idx]), tau, gammas)
            if not math.isfinite(loss):
                raise SearchDiverged(f"loss became {loss} at epoch {epoch}, step {step}")
            for p, g, m, is_theta in zip(params, grads.tensors(), vel, theta):
                if is_theta and config.weight_decay:
                    g = g + config.weight_decay * p
                m *= config.momentum
                m += g
                p -= lr * m
            losses.append(loss)
        history.append({"epoch": epoch, "loss": float(np.mean(losses)),
                        "val_accuracy": accuracy(net, Xva, yva), "tau": tau})
        if record_from is not None and epoch >= record_from:
            matrices.append(net.argmax_dag().adj.copy())
    return history, matrices


def train_search(task, config=None, seed=0):
    """Search input subsets on ``task``; returns the trace and the final argmax DAG."""
    config = config or SearchConfig()
    subsets = [enumerate_subsets(task.start, v, config.candidates, seed) for v in range(task.n)]
    net = build_network(subsets, task.feature_dim, config.width, task.classes,
                        spawn(seed, "init"), config.aggregation)
    history, matrices = _fit(net, task.generate(), config, seed, config.last_phase_start())
    trace = SearchTrace(len(matrices), matrices, None, history)
    trace.average = estimate_graphon(trace)
    return trace, net.argmax_dag()


def train_fixed(task, dag, config=None, seed=0):
    """Train a network wired exactly as ``dag`` on ``task``; returns (net, history)."""
    config = config or SearchConfig()
    subsets = [[dag.predecessors(v)] for v in range(dag.n)]
    net = build_network(subsets, task.feature_dim, config.width, task.classes,
                        spawn(seed, "init"), config.aggregation)
    history, _ = _fit(net, task.generate(), config, seed)
    return net, history


def estimate_graphon(trace):
    """Entrywise mean of the recorded argmax adjacency matrices."""
    if not trace.matrices:
        raise ValueError("trace holds no recorded matrices")
    return StepGraphon(np.mean(np.stack(trace.matrices).astype(np.float64), axis=0))


def graphon_as_dag_graph(graphon):
    """Estimated graphon as a DAG-oriented weighted graph for scaling and sampling."""
    return WeightedGraph.uniform(np.triu(graphon.values, k=1), symmetric=False)


def recovery_rate(task, dag):
    """Fraction of nodes whose input set in ``dag`` equals the planted one."""
    hits = [dag.predecessors(v) == task.planted.predecessors(v) for v in range(task.n)]
    return float(np.mean(hits))


@dataclass(frozen=True)
class RetrainComparison:
    n: int
    N: int
    accuracy: float
    scaled_accuracy: float

    @property
    def gap(self):
        return abs(self.scaled_accuracy - self.accuracy)


def scaled_retrain(task, graphon, N, config=None, seed=0):
    """Validation accuracy of networks sampled from ``graphon`` at ``n`` and at ``N`` nodes.

    Both networks are drawn from the DAG-oriented graphon (the larger after a
    fractional blow-up to ``N``) and trained from scratch on ``task``. With
    more nodes each one owns a narrower slice of the stage input.
    """
    g = graphon_as_dag_graph(graphon)
    big, _ = fractional_blowup(g, N)
    accs = []
    for tag, h in (("base", g), ("scaled", big)):
        dag = sample_simple(h, seed, "retrain", tag)
        _, history = train_fixed(task, dag, config, seed)
        accs.append(history[-1]["val_accuracy"])
    return RetrainComparison(g.n, N, accs[0], accs[1])
