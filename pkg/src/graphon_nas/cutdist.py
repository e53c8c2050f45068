"""Cut sizes and the cut-distance family.

Three distances are provided, from cheapest to most general:

``d_box``       fixed node correspondence, max over bipartitions ``(S, V \\ S)``
``delta_hat``   ``d_box`` minimized over node permutations (equal node counts)
``delta``       ``d_box`` of the two graphs overlaid by a fractional coupling
                ``L``; only upper bounds are computed (any feasible ``L`` gives one)

Nodeweights sum to one, so no extra ``1/|V|^2`` factor is applied. Directed
(upper-triangular) graphs are compared with their stored asymmetric ``beta``.
Node indices are 0-based everywhere.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Any

import numpy as np

from ._rng import spawn
from .graphs import WeightedGraph

DBOX_EXACT_LIMIT = 20
DELTA_HAT_EXACT_LIMIT = 8
WEIGHT_TOL = 1e-12
MARGINAL_TOL = 1e-10

_CHUNK = 1 << 15
_GAIN_TOL = 1e-15


@dataclass(frozen=True)
class CutResult:
    value: float
    witness: Any
    exact: bool


@dataclass(frozen=True, eq=False)
class OverlayMatrix:
    """Fractional node correspondence; ``L[i, p]`` couples node i with node p."""

    L: np.ndarray

    def __post_init__(self):
        L = np.array(self.L, dtype=np.float64)
        if L.ndim != 2:
            raise ValueError("overlay must be a matrix")
        L.flags.writeable = False
        object.__setattr__(self, "L", L)

    def violations(self, g, g2, tol=MARGINAL_TOL):
        out = []
        if self.L.shape != (g.n, g2.n):
            return [f"overlay shape {self.L.shape} does not match ({g.n}, {g2.n})"]
        if np.any(self.L < 0):
            out.append("negative overlay entry")
        rows = np.abs(self.L.sum(axis=1) - g.alpha)
        cols = np.abs(self.L.sum(axis=0) - g2.alpha)
        out += [f"row {int(i)} sums to {self.L[i].sum()!r}, expected {g.alpha[i]!r}"
                for i in np.flatnonzero(rows > tol)]
        out += [f"column {int(p)} sums to {self.L[:, p].sum()!r}, expected {g2.alpha[p]!r}"
                for p in np.flatnonzero(cols > tol)]
        return out

    def is_feasible(self, g, g2, tol=MARGINAL_TOL):
        return not self.violations(g, g2, tol)


# -- cut sizes and d_box ---------------------------------------------------

def cut_size(S, T, g):
    """Sum of ``alpha_i * alpha_j * beta_ij`` over ``i in S, j in T``."""
    S = sorted(set(int(i) for i in S))
    T = sorted(set(int(j) for j in T))
    if set(S) & set(T):
        raise ValueError("S and T must be disjoint")
    if not S or not T:
        return 0.0
    a = g.alpha
    return float(a[S] @ g.beta[np.ix_(S, T)] @ a[T])


def _check_same_weights(g, g2):
    if g.n != g2.n:
        raise ValueError(f"node counts differ: {g.n} vs {g2.n}")
    if np.any(np.abs(g.alpha - g2.alpha) > WEIGHT_TOL):
        raise ValueError("nodeweights differ; d_box needs a fixed node correspondence")


def _diff_matrix(g, g2):
    D = np.outer(g.alpha, g.alpha) * (g.beta - g2.beta)
    np.fill_diagonal(D, 0.0)
    return D


def _cut_diff(D, x):
    x = x.astype(np.float64)
    return float(x @ D @ (1.0 - x))


def _indicator(n, S):
    x = np.zeros(n, dtype=bool)
    x[list(S)] = True
    return x


def d_box_value(g, g2, S):
    """``|cut(S, V\\S, g) - cut(S, V\\S, g2)|`` for one subset."""
    _check_same_weights(g, g2)
    return abs(_cut_diff(_diff_matrix(g, g2), _indicator(g.n, S)))


def _subset_rows(start, stop, n):
    idx = np.arange(start, stop, dtype=np.int64)
    bits = np.int64(1) << np.arange(n, dtype=np.int64)
    return (idx[:, None] & bits) != 0


def _enumerate(D):
    """Index of the subset maximizing ``|x^T D (1 - x)|``; first one on ties.

    With a symmetric ``D`` a subset and its complement score the same, so the
    last node is pinned outside ``S``.
    """
    n = D.shape[0]
    free = n - 1 if np.array_equal(D, D.T) else n
    total = 1 << free
    best_val, best_idx = -1.0, 0
    for start in range(0, total, _CHUNK):
        X = _subset_rows(start, min(start + _CHUNK, total), n).astype(np.float64)
        vals = np.abs(np.einsum("ij,ij->i", X @ D, 1.0 - X))
        j = int(np.argmax(vals))
        if vals[j] > best_val:
            best_val, best_idx = float(vals[j]), start + j
    return best_idx


def d_box_exact(g, g2, limit=DBOX_EXACT_LIMIT):
    """Exhaustive ``d_box`` over all ``2^n`` bipartitions."""
    _check_same_weights(g, g2)
    if g.n > limit:
        raise ValueError(f"n={g.n} exceeds the exact enumeration limit {limit}")
    D = _diff_matrix(g, g2)
    if not D.any():
        return CutResult(0.0, (), True)
    idx = _enumerate(D)
    x = _subset_rows(idx, idx + 1, g.n)[0]
    return CutResult(abs(_cut_diff(D, x)), tuple(int(i) for i in np.flatnonzero(x)), True)


def _local_search(M, x):
    """Steepest single-node flips maximizing ``x^T M (1 - x)``; M has zero diagonal."""
    xf = x.astype(np.float64)
    r = M @ (1.0 - xf)
    c = M.T @ xf
    while True:
        gain = (1.0 - 2.0 * xf) * (r - c)
        u = int(np.argmax(gain))
        if gain[u] <= _GAIN_TOL:
            return xf > 0.5
        if xf[u] == 0.0:
            xf[u] = 1.0
            r -= M[:, u]
            c += M[u, :]
        else:
            xf[u] = 0.0
            r += M[:, u]
            c -= M[u, :]


def _heuristic_from_diff(D, restarts, seed, start=None):
    n = D.shape[0]
    best_val, best_x = -1.0, np.zeros(n, dtype=bool)
    starts = [] if start is None else [np.asarray(start, dtype=bool)]
    starts += [spawn(seed, "dbox", r).random(n) < 0.5 for r in range(restarts)]
    for x0 in starts:
        for M in (D, -D):
            x = _local_search(M, x0)
            val = abs(_cut_diff(D, x))
            if val > best_val:
                best_val, best_x = val, x
    return best_val, best_x


def d_box_heuristic(g, g2, restarts=20, seed=0):
    """Lower bound on ``d_box`` by single-flip local search from random subsets."""
    _check_same_weights(g, g2)
    D = _diff_matrix(g, g2)
    if not D.any():
        return CutResult(0.0, (), False)
    val, x = _heuristic_from_diff(D, restarts, seed)
    return CutResult(val, tuple(int(i) for i in np.flatnonzero(x)), False)


def d_box(g, g2, limit=DBOX_EXACT_LIMIT, restarts=20, seed=0):
    """Exact ``d_box`` when ``n <= limit``, otherwise the heuristic lower bound."""
    if g.n <= limit:
        return d_box_exact(g, g2, limit)
    return d_box_heuristic(g, g2, restarts, seed)


# -- delta_hat: minimum over node permutations ------------------------------

def permute(g, perm):
    """Graph whose node ``p`` is node ``perm[p]`` of ``g``."""
    perm = np.asarray(perm)
    return WeightedGraph(g.alpha[perm], g.beta[np.ix_(perm, perm)], g.symmetric)


def _weights_compatible(g, g2, perm):
    return bool(np.all(np.abs(g.alpha[np.asarray(perm)] - g2.alpha) <= WEIGHT_TOL))


def _delta_hat_exact(g, g2, limit):
    n = g.n
    if n > limit:
        raise ValueError(f"n={n} exceeds the exact permutation limit {limit}")
    sym = g.symmetric and g2.symmetric
    free = n - 1 if sym else n
    X = _subset_rows(0, 1 << free, n).astype(np.float64)
    W = np.outer(g2.alpha, g2.alpha)
    best = None
    for perm in itertools.permutations(range(n)):
        if not _weights_compatible(g, g2, perm):
            continue
        p = np.asarray(perm)
        D = W * (g.beta[np.ix_(p, p)] - g2.beta)
        np.fill_diagonal(D, 0.0)
        vals = np.abs(np.einsum("ij,ij->i", X @ D, 1.0 - X))
        j = int(np.argmax(vals))
        if best is None or vals[j] < best[0]:
            best = (float(vals[j]), perm, j)
            if best[0] == 0.0:
                break
    if best is None:
        raise ValueError("no permutation maps the nodeweights of g onto those of g2")
    _, perm, j = best
    x = X[j] > 0.5
    D = _diff_matrix(permute(g, perm), g2)
    S = tuple(int(i) for i in np.flatnonzero(x))
    return CutResult(abs(_cut_diff(D, x)), {"permutation": tuple(perm), "subset": S}, True)


def degree_order(g):
    """Nodes sorted by (nodeweight, weighted out-degree, weighted in-degree); stable."""
    out_deg = g.beta @ g.alpha
    in_deg = g.alpha @ g.beta
    keys = np.round(np.stack([g.alpha, out_deg, in_deg]), 12)
    return np.lexsort(keys[::-1])


def _degree_seed(g, g2):
    o1, o2 = degree_order(g), degree_order(g2)
    perm = np.empty(g.n, dtype=int)
    perm[o2] = o1
    return perm


def _delta_hat_heuristic(g, g2, seed, descent_limit, max_rounds, restarts, limit, swap_limit):
    n = g.n

    def score(perm):
        D = _diff_matrix(permute(g, perm), g2)
        if n <= descent_limit:
            return abs(_cut_diff(D, _subset_rows(_enumerate(D), _enumerate(D) + 1, n)[0]))
        return _heuristic_from_diff(D, restarts, seed)[0]

    seeds = [_degree_seed(g, g2)]
    ident = np.arange(n)
    if _weights_compatible(g, g2, ident):
        seeds.append(ident)
    seeds = [s for s in seeds if _weights_compatible(g, g2, s)]
    if not seeds:
        raise ValueError("nodeweights of g and g2 cannot be matched")
    scored = [(score(s), i, s) for i, s in enumerate(seeds)]
    cur_val, _, perm = min(scored, key=lambda t: (t[0], t[1]))
    perm = perm.copy()
    for _ in range(max_rounds if n <= swap_limit else 0):
        if cur_val == 0.0:
            break
        best = (cur_val, None)
        for p, q in itertools.combinations(range(n), 2):
            if abs(g2.alpha[p] - g2.alpha[q]) > WEIGHT_TOL:
                continue
            trial = perm.copy()
            trial[[p, q]] = trial[[q, p]]
            val = score(trial)
            if val < best[0] - _GAIN_TOL:
                best = (val, trial)
        if best[1] is None:
            break
        cur_val, perm = best
    gp = permute(g, perm)
    res = d_box(gp, g2, limit=limit, restarts=restarts, seed=seed)
    return CutResult(res.value, {"permutation": tuple(int(i) for i in perm), "subset": res.witness},
                     False)


def delta_hat(g, g2, mode="exact", limit=DELTA_HAT_EXACT_LIMIT, seed=0,
              descent_limit=12, max_rounds=10, restarts=10, dbox_limit=DBOX_EXACT_LIMIT,
              swap_limit=32):
    """``d_box`` minimized over node permutations of ``g``.

    ``mode="exact"`` enumerates all ``n!`` permutations (``n <= limit``).
    ``mode="heuristic"`` seeds with a degree-profile matching, descends by
    pairwise swaps and returns the ``d_box`` of the final permutation, an upper
    bound on the true value whenever ``n <= dbox_limit``. Swaps are scored
    exactly up to ``descent_limit`` nodes and skipped above ``swap_limit``.
    """
    if g.n != g2.n:
        raise ValueError(f"node counts differ: {g.n} vs {g2.n}")
    if mode == "exact":
        return _delta_hat_exact(g, g2, limit)
    if mode == "heuristic":
        return _delta_hat_heuristic(g, g2, seed, descent_limit, max_rounds, restarts, dbox_limit,
                                    swap_limit)
    raise ValueError(f"unknown mode {mode!r}")


# -- overlays ----------------------------------------------------------------

def _breakpoints(w):
    b = np.concatenate([[0.0], np.cumsum(w)])
    b[-1] = 1.0
    return b


def interval_coupling(a, b):
    """North-west-corner coupling of two weight vectors taken in index order.

    Node i occupies the interval ``[sum(a[:i]), sum(a[:i+1]))`` of [0, 1];
    ``L[i, p]`` is the overlap of the intervals of i and p.
    """
    A, B = _breakpoints(a), _breakpoints(b)
    for j, v in enumerate(B):
        k = int(np.argmin(np.abs(A - v)))
        if abs(A[k] - v) <= 1e-12:
            B[j] = A[k]
    lo = np.maximum(A[:-1, None], B[None, :-1])
    hi = np.minimum(A[1:, None], B[None, 1:])
    return np.maximum(hi - lo, 0.0)


def northwest_overlay(g, g2, order=None, order2=None):
    """Interval coupling after reordering the nodes of each graph."""
    o1 = np.arange(g.n) if order is None else np.asarray(order)
    o2 = np.arange(g2.n) if order2 is None else np.asarray(order2)
    C = interval_coupling(g.alpha[o1], g2.alpha[o2])
    L = np.zeros((g.n, g2.n))
    L[np.ix_(o1, o2)] = C
    return OverlayMatrix(L)


def diagonal_min_overlay(g, g2, completion="northwest"):
    """Overlay with ``L[i, i] = min(alpha_i, alpha'_i)`` on equal node sets.

    The leftover row and column mass is placed off the diagonal, either by
    the north-west-corner rule (small support) or proportionally (the fixed
    point of iterative proportional fitting on the residual block).
    """
    if g.n != g2.n:
        raise ValueError("diagonal overlay needs equal node counts")
    d = np.minimum(g.alpha, g2.alpha)
    r = g.alpha - d
    c = g2.alpha - d
    r[r < 1e-15] = 0.0
    c[c < 1e-15] = 0.0
    L = np.diag(d)
    mass = r.sum()
    if mass > 0:
        if completion == "northwest":
            L += interval_coupling(r / mass, c / c.sum()) * mass
        elif completion == "proportional":
            L += np.outer(r, c) / mass
        else:
            raise ValueError(f"unknown completion {completion!r}")
    return OverlayMatrix(L)


def twin_classes(g):
    """Label nodes with identical ``beta`` rows and columns (hence unlinked)."""
    if np.any(np.diag(g.beta)):
        return np.arange(g.n)
    profile = np.concatenate([g.beta, g.beta.T], axis=1)
    _, labels = np.unique(profile, axis=0, return_inverse=True)
    return labels.reshape(-1)


def overlay_product(g, g2, overlay):
    """The overlaid pair ``(G[L], G'[L^T])`` on the support of ``L``.

    Zero-weight product nodes are dropped and product nodes whose factors are
    twins in both graphs are merged; merging twins leaves every bipartition
    value reachable and so does not change ``d_box``. Returns the two graphs
    and, per product node, the list of ``(i, p)`` cells it stands for.
    """
    L = overlay.L
    c1, c2 = twin_classes(g), twin_classes(g2)
    groups = {}
    for i, p in zip(*np.nonzero(L > 0)):
        groups.setdefault((c1[i], c2[p]), []).append((int(i), int(p)))
    cells = list(groups.values())
    w = np.array([sum(L[i, p] for i, p in cs) for cs in cells])
    w = w / w.sum()
    ri = np.array([cs[0][0] for cs in cells])
    rp = np.array([cs[0][1] for cs in cells])
    A = WeightedGraph(w, g.beta[np.ix_(ri, ri)], g.symmetric)
    B = WeightedGraph(w, g2.beta[np.ix_(rp, rp)], g2.symmetric)
    return A, B, cells


def delta_ub_overlay(g, g2, overlay, limit=DBOX_EXACT_LIMIT, restarts=50, seed=0):
    """Upper bound on ``delta`` from one overlay: ``d_box(G[L], G'[L^T])``.

    The value is exact (a certified upper bound) when the merged support has
    at most ``limit`` nodes; beyond that a heuristic lower estimate of the
    overlay's ``d_box`` is returned with ``exact=False``. The witness lists the
    ``(i, p)`` cells on the ``S`` side of the worst bipartition.
    """
    if not isinstance(overlay, OverlayMatrix):
        overlay = OverlayMatrix(overlay)
    bad = overlay.violations(g, g2)
    if bad:
        raise ValueError("infeasible overlay: " + "; ".join(bad))
    A, B, cells = overlay_product(g, g2, overlay)
    res = d_box(A, B, limit=limit, restarts=restarts, seed=seed)
    S = tuple(cell for k in res.witness for cell in cells[k])
    return CutResult(res.value, S, res.exact)


def overlay_cut_value(g, g2, overlay, S_cells):
    """Re-evaluate an overlay bipartition given by its ``S``-side cells."""
    L = overlay.L
    X = np.zeros(L.shape, dtype=bool)
    for i, p in S_cells:
        X[i, p] = True
    P = np.where(X, L, 0.0)
    Q = np.where(X, 0.0, L)
    # sum over a=(i,p) in S, b=(j,q) in T of L_a L_b (beta_ij - beta'_pq)
    first = P.sum(axis=1) @ g.beta @ Q.sum(axis=1)
    second = P.sum(axis=0) @ g2.beta @ Q.sum(axis=0)
    # same-cell-row pairs have beta_ii = 0 and are already counted as zero
    return abs(float(first - second))


# -- optimized overlay upper bound -----------------------------------------

def _evaluate(g, g2, L, limit, restarts, seed):
    try:
        return delta_ub_overlay(g, g2, OverlayMatrix(L), limit=limit, restarts=restarts, seed=seed)
    except ValueError:
        return None


def _side_gradients(g, g2, L, S_cells):
    """Linearized change of the cut difference per unit mass in each cell.

    Returns ``(out, inn)``: the derivative for a cell placed on the S side and
    on the T side respectively, under the current bipartition.
    """
    X = np.zeros(L.shape, dtype=bool)
    for i, p in S_cells:
        X[i, p] = True
    P = np.where(X, L, 0.0)
    Q = np.where(X, 0.0, L)
    out = (g.beta @ Q.sum(axis=1))[:, None] - (g2.beta @ Q.sum(axis=0))[None, :]
    inn = (P.sum(axis=1) @ g.beta)[:, None] - (P.sum(axis=0) @ g2.beta)[None, :]
    return out, inn, X


def delta_ub_optimize(g, g2, iters=50, seed=0, initial=(), limit=DBOX_EXACT_LIMIT,
                      restarts=20, candidates_per_iter=8):
    """Best certified upper bound on ``delta`` over a family of overlays.

    Starting overlays: the interval coupling in index order and in degree
    order, the diagonal-min overlay when node counts agree, plus any given in
    ``initial``. The best start is then improved by alternating two steps:
    with ``L`` fixed the worst bipartition is found; with the bipartition
    fixed, mass is moved around 2x2 cycles (which keep both marginals) in the
    direction that lowers the cut difference, and a move is kept only if the
    re-evaluated distance drops. ``exact=True`` means the returned value is the
    exact ``d_box`` of the returned overlay and hence a valid upper bound.
    """
    starts = [northwest_overlay(g, g2),
              northwest_overlay(g, g2, degree_order(g), degree_order(g2))]
    if g.n == g2.n:
        starts.append(diagonal_min_overlay(g, g2))
    starts += [o if isinstance(o, OverlayMatrix) else OverlayMatrix(o) for o in initial]

    best = None
    for k, o in enumerate(starts):
        res = _evaluate(g, g2, o.L, limit, restarts, seed)
        if res is None:
            continue
        key = (not res.exact, res.value, k)
        if best is None or key < best[0]:
            best = (key, o.L.copy(), res)
    if best is None:
        raise ValueError("no feasible starting overlay")
    _, L, res = best

    rng = spawn(seed, "overlay-opt")
    for it in range(iters):
        if res.value <= 0.0:
            break
        sign = 1.0 if _signed_value(g, g2, L, res.witness) >= 0 else -1.0
        out, inn, X = _side_gradients(g, g2, L, res.witness)
        cur = sign * np.where(X, out, inn)
        add = np.where(L > 0, cur, np.maximum(sign * out, sign * inn))
        support = np.argwhere(L > 0)
        moves = []
        for a, b in itertools.combinations(range(len(support)), 2):
            (i, q), (j, p) = support[a], support[b]
            if i == j or p == q:
                continue
            # move mass from (i,q),(j,p) to (i,p),(j,q)
            slope = add[i, p] + add[j, q] - cur[i, q] - cur[j, p]
            if slope < 0:
                moves.append((slope, i, q, j, p))
        if not moves:
            break
        moves.sort()
        top = moves[:candidates_per_iter]
        order = rng.permutation(len(top)) if it % 2 else np.arange(len(top))
        improved = False
        for m in order:
            _, i, q, j, p = top[m]
            tmax = min(L[i, q], L[j, p])
            for frac in (1.0, 0.5, 0.25, 0.125):
                t = tmax * frac
                trial = L.copy()
                trial[i, p] += t
                trial[j, q] += t
                trial[i, q] -= t
                trial[j, p] -= t
                if frac == 1.0:
                    trial[i, q] = 0.0 if L[i, q] == tmax else trial[i, q]
                    trial[j, p] = 0.0 if L[j, p] == tmax else trial[j, p]
                trial[trial < 0] = 0.0
                new = _evaluate(g, g2, trial, limit, restarts, seed + it + 1)
                if new is None:
                    continue
                if (new.exact, -new.value) > (res.exact, -res.value) and new.value < res.value:
                    L, res, improved = trial, new, True
                    break
            if improved:
                break
        if not improved:
            break
    return CutResult(res.value, OverlayMatrix(L), res.exact)


def _signed_value(g, g2, L, S_cells):
    X = np.zeros(L.shape, dtype=bool)
    for i, p in S_cells:
        X[i, p] = True
    P = np.where(X, L, 0.0)
    Q = np.where(X, 0.0, L)
    return float(P.sum(axis=1) @ g.beta @ Q.sum(axis=1) - P.sum(axis=0) @ g2.beta @ Q.sum(axis=0))


# -- interpolation comparison and the Borgs inequality ---------------------

@dataclass(frozen=True)
class InterpolationBound:
    m: int
    closed_form: float
    direct: float


def interpolation_partition_bound(g, k, m=None):
    """Cut gap between the k-fold blow-up and the 1-D interpolation of ``g``.

    ``S'`` holds the first ``k*m`` expanded nodes (all copies of nodes
    ``0..m-1``). Only column ``m`` straddles the boundary differently in the
    two graphs, giving the closed form

        (1 / (k^2 n^2)) * k * (k - 1) / 2 * |sum_{i<m} beta[i, m] - sum_{i>m} beta[i, m]|

    which is returned together with the cut difference evaluated directly on
    the two expanded graphs. When ``m`` is omitted the first column with a
    non-zero sum is used.
    """
    from .scaling import blowup_k, interpolate_1d

    if not (g.is_upper_triangular() and g.is_uniform()):
        raise ValueError("g must be upper-triangular with uniform nodeweights")
    n = g.n
    colsum = g.beta.sum(axis=0)
    valid = [c for c in range(1, n) if colsum[c] != 0]
    if not valid:
        raise ValueError("every column of g sums to zero; the comparison needs a non-zero column")
    if m is None:
        m = valid[0]
    elif m not in valid:
        raise ValueError(f"column {m} has zero sum or lies outside 1..{n - 1}")
    col = g.beta[:, m]
    gap = col[:m].sum() - col[m + 1:].sum()
    closed = k * (k - 1) / 2 * abs(gap) / (k * k * n * n)
    S = range(k * m)
    T = range(k * m, k * n)
    direct = abs(cut_size(S, T, blowup_k(g, k)) - cut_size(S, T, interpolate_1d(g, k)))
    return InterpolationBound(m, float(closed), float(direct))


def borgs_inequality_check(delta_hat_value, delta_value):
    """``(delta_hat / 32) ** 67 <= delta + 1e-15``, compared in log space."""
    if delta_hat_value < 0 or delta_value < 0:
        raise ValueError("distances must be non-negative")
    if delta_hat_value == 0:
        return True
    lhs = 67.0 * (math.log(delta_hat_value) - math.log(32.0))
    return lhs <= math.log(delta_value + 1e-15)
