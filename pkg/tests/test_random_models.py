import numpy as np
import pytest

from graphon_nas.graphs import DagGraph, validate, validate_dag
from graphon_nas.random_models import (BaParams, ErParams, WsParams, ba_sample, er_graphon,
                                       empirical_graphon, ring_distance, ws_graphon)
from graphon_nas.sampler import sample_simple


class TestParams:
    @pytest.mark.parametrize("make", [
        lambda: ErParams(1.5), lambda: WsParams(0.0, 0.5), lambda: WsParams(0.5, -0.1), lambda: WsParams(0.6, 1.0),
        lambda: BaParams(2, 3, 10), lambda: BaParams(5, 2, 5),
    ])
    def test_out_of_range(self, make):
        with pytest.raises(ValueError):
            make()


class TestEr:
    def test_constant_off_diagonal(self):
        v = er_graphon(ErParams(0.5), 4).values
        np.testing.assert_array_equal(v, 0.5 * (1 - np.eye(4)))

    def test_extremes(self):
        assert not er_graphon(ErParams(0.0), 5).values.any()
        np.testing.assert_array_equal(er_graphon(ErParams(1.0), 2).values, [[0, 1], [1, 0]])


class TestWs:
    def test_band_value(self):
        v = ws_graphon(WsParams(0.4, 0.75), 10).values
        d = ring_distance(10)
        np.testing.assert_allclose(v[(d >= 1) & (d <= 2)], 0.25)
        np.testing.assert_allclose(v[d > 2], 0.75 * 0.4 / 0.6)

    def test_ring_lattice(self):
        v = ws_graphon(WsParams(0.4, 0.0), 10).values
        assert set(np.unique(v)) == {0.0, 1.0}

    def test_band_covering_everything(self):
        v = ws_graphon(WsParams(0.9, 0.0), 9).values
        np.testing.assert_array_equal(v, 1 - np.eye(9))

    def test_valid_and_symmetric(self):
        for kappa, p, n in [(0.4, 0.75, 32), (0.2, 0.1, 11), (0.6, 0.5, 7)]:
            g = ws_graphon(WsParams(kappa, p), n).to_weighted()
            assert validate(g).ok and g.symmetric

    def test_expected_edge_count(self):
        # the discretized band loses O(n) edges against kappa * n^2 / 2, so the
        # check is against the edge count implied by the step graphon itself
        kappa, p, n, trials = 0.4, 0.75, 32, 500
        g = ws_graphon(WsParams(kappa, p), n).to_weighted()
        counts = np.array([sample_simple(g, t).edge_count() for t in range(trials)])
        iu = np.triu_indices(n, 1)
        mean = g.beta[iu].sum()
        sd = np.sqrt((g.beta[iu] * (1 - g.beta[iu])).sum())
        assert abs(counts.mean() - mean) <= 3 * sd / np.sqrt(trials)
        assert abs(mean - kappa * n * n / 2) <= n

    def test_too_narrow(self):
        with pytest.raises(ValueError):
            ws_graphon(WsParams(0.05, 0.5), 10)


class TestBa:
    def test_forced_attachment(self):
        d = ba_sample(BaParams(4, 4, 5), seed=3)
        assert d.predecessors(4) == (0, 1, 2, 3)

    def test_degree_sum_identity(self):
        for seed in range(20):
            m0, m, n = 5, 3, 40
            d = ba_sample(BaParams(m0, m, n), seed)
            assert validate_dag(d).ok
            assert 2 * d.edge_count() == 2 * (m0 * (m0 - 1) // 2 + m * (n - m0))

    def test_deterministic(self):
        assert ba_sample(BaParams(3, 2, 30), 7) == ba_sample(BaParams(3, 2, 30), 7)

    def test_early_nodes_gather_degree(self):
        first, last = [], []
        for seed in range(100):
            a = ba_sample(BaParams(10, 10, 100), seed).adj
            deg = a.sum(0) + a.sum(1)
            first.append(deg[:10].mean())
            last.append(deg[-10:].mean())
        assert np.mean(first) > np.mean(last)

    def test_single_seed_node(self):
        d = ba_sample(BaParams(1, 1, 6), 0)
        assert d.edge_count() == 5


class TestEmpirical:
    def test_er_cells_near_p(self):
        g = er_graphon(ErParams(0.5), 64).to_weighted()
        est = empirical_graphon(lambda n, s: sample_simple(g, s), 64, 1000, 4, seed=0)
        assert np.all(np.abs(est.values - 0.5) <= 0.05)

    def test_single_trial_full_resolution(self):
        g = er_graphon(ErParams(0.3), 6).to_weighted()
        d = sample_simple(g, 11)
        est = empirical_graphon(lambda n, s: sample_simple(g, s), 6, 1, 6, seed=11)
        np.testing.assert_array_equal(est.values, d.adj + d.adj.T)

    def test_resolution_must_divide(self):
        with pytest.raises(ValueError):
            empirical_graphon(lambda n, s: DagGraph.empty(n), 6, 1, 4, seed=0)

    def test_deviation_shrinks_with_trials(self):
        g = er_graphon(ErParams(0.5), 16).to_weighted()
        gen = lambda n, s: sample_simple(g, s)
        dev = []
        for trials in (10, 100, 1000):
            reps = [np.abs(empirical_graphon(gen, 16, trials, 4, seed=r * 5000).values - 0.5).max()
                    for r in range(3)]
            dev.append(np.mean(reps))
        assert dev[0] > dev[1] > dev[2]

    def test_ba_cells_thin_out(self):
        n, r = 50, 5
        est = empirical_graphon(lambda n, s: ba_sample(BaParams(5, 5, n), s), n, 1000, r, seed=0)
        row = est.values[0, 1:]
        assert np.all(np.diff(row) <= 0.02)
        assert row[0] > row[-1]
