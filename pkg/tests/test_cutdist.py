import itertools

import numpy as np
import pytest

from conftest import random_graph
from graphon_nas import cutdist as cd
from graphon_nas.graphs import WeightedGraph, edge_weight_spread
from graphon_nas.random_models import ErParams, er_graphon
from graphon_nas.sampler import as_weighted, sample_simple
from graphon_nas.scaling import blowup_k, blowup_overlay, shift_weights

EDGE = WeightedGraph.uniform([[0, 1], [1, 0]])
EMPTY2 = WeightedGraph.uniform(np.zeros((2, 2)))


def brute_d_box(g, g2):
    n = g.n
    best = 0.0
    for bits in itertools.product([0, 1], repeat=n):
        S = [i for i in range(n) if bits[i]]
        T = [i for i in range(n) if not bits[i]]
        best = max(best, abs(cd.cut_size(S, T, g) - cd.cut_size(S, T, g2)))
    return best


def er_pair(n, seed):
    g = er_graphon(ErParams(0.5), n).to_weighted()
    a = as_weighted(sample_simple(g, seed, "a"), g)
    b = as_weighted(sample_simple(g, seed, "b"), g)
    return a, b


class TestCutSize:
    def test_single_edge(self):
        assert cd.cut_size([0], [1], EDGE) == pytest.approx(0.25)

    def test_empty_side(self):
        assert cd.cut_size([], [0, 1], EDGE) == 0.0

    def test_complete_four_nodes(self):
        g = WeightedGraph.uniform(1 - np.eye(4))
        assert cd.cut_size([0, 1], [2, 3], g) == pytest.approx(0.25)

    def test_overlap_rejected(self):
        with pytest.raises(ValueError):
            cd.cut_size([0, 1], [1], EDGE)


class TestDBoxExact:
    def test_identical_graphs(self, rng):
        g = random_graph(rng, 6)
        assert cd.d_box_exact(g, g).value == 0.0

    def test_single_edge_against_empty(self):
        res = cd.d_box_exact(EDGE, EMPTY2)
        assert res.value == pytest.approx(0.25)
        assert res.exact and len(res.witness) == 1

    def test_matches_brute_force(self, rng):
        for _ in range(30):
            n = int(rng.integers(2, 7))
            sym = bool(rng.integers(2))
            g, h = random_graph(rng, n, sym), random_graph(rng, n, sym)
            assert cd.d_box_exact(g, h).value == pytest.approx(brute_d_box(g, h), abs=1e-14)

    def test_non_uniform_weights(self, rng):
        g = random_graph(rng, 5, uniform=False)
        h = WeightedGraph(g.alpha, random_graph(rng, 5).beta)
        assert cd.d_box_exact(g, h).value == pytest.approx(brute_d_box(g, h), abs=1e-14)

    def test_witness_reproduces_value(self, rng):
        for _ in range(20):
            g, h = random_graph(rng, 9), random_graph(rng, 9)
            res = cd.d_box_exact(g, h)
            assert abs(cd.d_box_value(g, h, res.witness) - res.value) <= 1e-12

    def test_er_samples_are_close(self):
        a, b = er_pair(16, 0)
        assert cd.d_box_exact(a, b).value < 4 / np.sqrt(16)

    def test_limit_is_configurable(self, rng):
        g = random_graph(rng, 6)
        with pytest.raises(ValueError):
            cd.d_box_exact(g, g, limit=5)

    def test_mismatched_weights_rejected(self):
        g = WeightedGraph([0.25, 0.75], np.zeros((2, 2)))
        with pytest.raises(ValueError):
            cd.d_box_exact(g, EMPTY2)

    def test_metric_axioms(self, rng):
        for _ in range(20):
            n = int(rng.integers(2, 11))
            a, b, c = (random_graph(rng, n) for _ in range(3))
            ab, ba = cd.d_box_exact(a, b).value, cd.d_box_exact(b, a).value
            bc, ac = cd.d_box_exact(b, c).value, cd.d_box_exact(a, c).value
            assert ab == pytest.approx(ba, abs=1e-15)
            assert ac <= ab + bc + 1e-15

    def test_shrinks_with_size(self):
        med = [np.median([cd.d_box_exact(*er_pair(n, s)).value for s in range(50)]) for n in (8, 16)]
        assert med[0] > med[1]


class TestDBoxHeuristic:
    def test_identical(self, rng):
        g = random_graph(rng, 8)
        assert cd.d_box_heuristic(g, g, 5, 0).value == 0.0

    def test_lower_bound(self, rng):
        for s in range(40):
            n = int(rng.integers(2, 13))
            sym = bool(rng.integers(2))
            g, h = random_graph(rng, n, sym), random_graph(rng, n, sym)
            heur = cd.d_box_heuristic(g, h, restarts=3, seed=s)
            assert not heur.exact
            assert heur.value <= cd.d_box_exact(g, h).value + 1e-15
            assert abs(cd.d_box_value(g, h, heur.witness) - heur.value) <= 1e-12

    def test_deterministic(self, rng):
        g, h = random_graph(rng, 10), random_graph(rng, 10)
        assert cd.d_box_heuristic(g, h, 4, 9) == cd.d_box_heuristic(g, h, 4, 9)

    def test_local_search_reaches_flip_optimum(self, rng):
        D = rng.standard_normal((7, 7))
        np.fill_diagonal(D, 0)
        x = cd._local_search(D, rng.random(7) < 0.5)
        base = cd._cut_diff(D, x)
        for u in range(7):
            y = x.copy()
            y[u] = not y[u]
            assert cd._cut_diff(D, y) <= base + 1e-12


class TestDeltaHat:
    def test_permuted_copy(self, rng):
        g = random_graph(rng, 6)
        perm = rng.permutation(6)
        h = cd.permute(g, perm)
        res = cd.delta_hat(h, g, mode="exact")
        assert res.value == pytest.approx(0.0, abs=1e-15)

    def test_no_permutation_helps(self):
        assert cd.delta_hat(EDGE, EMPTY2).value == pytest.approx(0.25)

    def test_heuristic_is_upper_bound(self, rng):
        for s in range(25):
            n = int(rng.integers(2, 8))
            g, h = random_graph(rng, n), random_graph(rng, n)
            exact = cd.delta_hat(g, h, mode="exact")
            heur = cd.delta_hat(g, h, mode="heuristic", seed=s)
            assert heur.value >= exact.value - 1e-15
            assert exact.value <= cd.d_box_exact(g, h).value + 1e-15

    def test_witness_reproduces_value(self, rng):
        g, h = random_graph(rng, 6), random_graph(rng, 6)
        for mode in ("exact", "heuristic"):
            res = cd.delta_hat(g, h, mode=mode)
            w = res.witness
            value = cd.d_box_value(cd.permute(g, w["permutation"]), h, w["subset"])
            assert abs(value - res.value) <= 1e-12

    def test_exact_limit(self, rng):
        g = random_graph(rng, 9)
        with pytest.raises(ValueError):
            cd.delta_hat(g, g, mode="exact")

    def test_unknown_mode(self):
        with pytest.raises(ValueError):
            cd.delta_hat(EDGE, EDGE, mode="fast")


class TestOverlays:
    def test_interval_coupling_marginals(self, rng):
        for _ in range(20):
            a = rng.random(int(rng.integers(1, 7)))
            b = rng.random(int(rng.integers(1, 7)))
            L = cd.interval_coupling(a / a.sum(), b / b.sum())
            assert np.all(L >= 0)
            np.testing.assert_allclose(L.sum(1), a / a.sum(), atol=1e-12)
            np.testing.assert_allclose(L.sum(0), b / b.sum(), atol=1e-12)
            assert np.count_nonzero(L) <= len(a) + len(b) - 1

    def test_identity_overlay(self, rng):
        g = random_graph(rng, 7)
        res = cd.delta_ub_overlay(g, g, np.diag(g.alpha))
        assert res.value == 0.0 and res.exact

    def test_blowup_alignment(self, rng):
        g = random_graph(rng, 5)
        res = cd.delta_ub_overlay(g, blowup_k(g, 3), blowup_overlay(g, 3))
        assert res.value <= 1e-12

    def test_infeasible_rejected(self, rng):
        g = random_graph(rng, 3)
        with pytest.raises(ValueError, match="infeasible"):
            cd.delta_ub_overlay(g, g, np.eye(3))

    @pytest.mark.parametrize("completion", ["northwest", "proportional"])
    def test_diagonal_min_within_safe_bound(self, rng, completion):
        for _ in range(20):
            n = int(rng.integers(2, 8))
            m = int(rng.integers(1, n))
            g = random_graph(rng, n)
            h = shift_weights(g, m)
            L = cd.diagonal_min_overlay(g, h, completion)
            assert L.is_feasible(g, h)
            res = cd.delta_ub_overlay(g, h, L)
            eps = m * (n - m) / (n * (n + m))
            assert res.value <= 2 * edge_weight_spread(g) * eps + 1e-12

    def test_shift_example_against_stated_bound(self):
        g = WeightedGraph.uniform(1 - np.eye(4))
        h = shift_weights(g, 2)
        res = cd.delta_ub_overlay(g, h, cd.diagonal_min_overlay(g, h))
        assert res.value <= 2 / 6 + 1e-12

    def test_twin_merging_keeps_value(self, rng):
        # compare with the unmerged product evaluated by brute force
        for _ in range(10):
            g = random_graph(rng, 3)
            h = blowup_k(random_graph(rng, 2), 2)
            L = cd.interval_coupling(g.alpha, h.alpha)
            cells = list(zip(*np.nonzero(L > 0)))
            w = np.array([L[c] for c in cells])
            A = WeightedGraph(w, g.beta[np.ix_([c[0] for c in cells], [c[0] for c in cells])])
            B = WeightedGraph(w, h.beta[np.ix_([c[1] for c in cells], [c[1] for c in cells])])
            res = cd.delta_ub_overlay(g, h, L)
            assert res.value == pytest.approx(brute_d_box(A, B), abs=1e-14)
            assert abs(cd.overlay_cut_value(g, h, cd.OverlayMatrix(L), res.witness) - res.value) <= 1e-12


class TestOptimize:
    def test_same_graph(self, rng):
        g = random_graph(rng, 6)
        assert cd.delta_ub_optimize(g, g).value <= 1e-9

    def test_three_fold_blowup(self, rng):
        g = random_graph(rng, 5)
        res = cd.delta_ub_optimize(g, blowup_k(g, 3))
        assert res.value <= 1e-9 and res.exact

    def test_never_worse_than_starting_overlays(self, rng):
        for s in range(200):
            n = int(rng.integers(2, 6))
            g = random_graph(rng, n)
            h = shift_weights(g, int(rng.integers(1, n))) if n > 1 and s % 2 else random_graph(rng, n)
            best = cd.delta_ub_optimize(g, h, iters=5, seed=s)
            diag = cd.delta_ub_overlay(g, h, cd.diagonal_min_overlay(g, h))
            assert best.value <= diag.value + 1e-15
            assert best.witness.is_feasible(g, h)
            again = cd.delta_ub_overlay(g, h, best.witness)
            assert abs(again.value - best.value) <= 1e-12


class TestInterpolationBound:
    def test_worked_example(self):
        beta = np.zeros((3, 3))
        beta[0, 1], beta[0, 2], beta[1, 2] = 0.9, 0.3, 0.6
        res = cd.interpolation_partition_bound(WeightedGraph.uniform(beta), 2)
        assert res.m == 1
        assert res.closed_form == pytest.approx(0.025, abs=1e-15)
        assert abs(res.closed_form - res.direct) <= 1e-12

    def test_k_one_vanishes(self, rng):
        g = random_graph(rng, 4, symmetric=False)
        res = cd.interpolation_partition_bound(g, 1)
        assert res.closed_form == 0.0 and res.direct <= 1e-15

    def test_all_zero_graph_fails_hypothesis(self):
        with pytest.raises(ValueError):
            cd.interpolation_partition_bound(WeightedGraph.uniform(np.zeros((3, 3))), 2)

    def test_every_valid_column(self, rng):
        for _ in range(10):
            n = int(rng.integers(3, 7))
            g = random_graph(rng, n, symmetric=False)
            for m in range(1, n):
                res = cd.interpolation_partition_bound(g, 3, m)
                assert abs(res.closed_form - res.direct) <= 1e-12

    def test_rejects_symmetric_input(self, rng):
        with pytest.raises(ValueError):
            cd.interpolation_partition_bound(random_graph(rng, 4), 2)


class TestBorgs:
    @pytest.mark.parametrize("hat, delta, expected", [
        (0.0, 0.0, True), (0.5, 1e-10, True), (32.0, 0.0, False), (0.3, 0.0, True),
    ])
    def test_examples(self, hat, delta, expected):
        assert cd.borgs_inequality_check(hat, delta) is expected

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            cd.borgs_inequality_check(-1.0, 0.0)
