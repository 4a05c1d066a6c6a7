import numpy as np
import pytest

from kpx.embeddings import SimilarityMatrix, build_store, similarity_matrix
from kpx.graphrank import (
    Graph,
    build_threshold_graph,
    kp_count_for,
    pagerank,
    select_diverse,
)


def _sim(ids, values):
    return SimilarityMatrix(ids=tuple(ids), values=np.asarray(values, dtype=float))


def pagerank_linear_solve(weights: np.ndarray, damping: float) -> np.ndarray:
    """Independent oracle: solve (I - d P^T) x = (1-d)/n 1 directly, with
    P the row-stochastic transition matrix (dangling rows uniform)."""
    n = weights.shape[0]
    w = weights.astype(float).copy()
    np.fill_diagonal(w, 0.0)
    out = w.sum(axis=1)
    p = np.where(out[:, None] > 0, w / np.where(out == 0, 1.0, out)[:, None], 1.0 / n)
    x = np.linalg.solve(np.eye(n) - damping * p.T, np.full(n, (1 - damping) / n))
    return x / x.sum()


class TestBuildThresholdGraph:
    def test_identity_sim_gives_edgeless(self):
        g = build_threshold_graph(_sim("abc", np.eye(3)), 0.8)
        off = g.weights.copy()
        np.fill_diagonal(off, 0)
        assert np.all(off == 0)

    def test_complete_graph(self):
        values = np.full((3, 3), 0.9)
        np.fill_diagonal(values, 1.0)
        g = build_threshold_graph(_sim("abc", values), 0.8)
        off = g.weights.copy()
        np.fill_diagonal(off, 0)
        assert np.count_nonzero(off) == 6
        assert np.all(off[off > 0] == 0.9)

    def test_mixed_fixture_matches_hand_enumeration(self):
        ids = ("a", "b", "c", "d")
        values = np.array([
            [1.0, 0.85, 0.10, 0.80],
            [0.85, 1.0, 0.79, 0.20],
            [0.10, 0.79, 1.0, 0.95],
            [0.80, 0.20, 0.95, 1.0],
        ])
        g = build_threshold_graph(_sim(ids, values), 0.8)
        # hand enumeration: pairs >= 0.8 are (a,b), (a,d), (c,d)
        expected = {("a", "b"), ("a", "d"), ("c", "d")}
        got = {
            tuple(sorted((ids[i], ids[j])))
            for i in range(4) for j in range(4)
            if i != j and g.weights[i, j] > 0
        }
        assert got == expected

    def test_negative_threshold_rejected(self):
        with pytest.raises(ValueError):
            build_threshold_graph(_sim("ab", np.eye(2)), -0.1)


class TestPagerank:
    def test_two_node_symmetric(self):
        g = Graph(node_ids=("a", "b"), weights=np.array([[0.0, 1.0], [1.0, 0.0]]))
        r = pagerank(g)
        np.testing.assert_allclose(r.scores, [0.5, 0.5], atol=1e-12)

    def test_edgeless_uniform(self):
        g = Graph(node_ids=tuple("abcd"), weights=np.zeros((4, 4)))
        r = pagerank(g)
        np.testing.assert_allclose(r.scores, [0.25] * 4, atol=1e-12)

    def test_scores_sum_to_one_nonnegative(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            n = rng.integers(1, 10)
            w = rng.uniform(0, 1, size=(n, n)) * (rng.uniform(size=(n, n)) < 0.5)
            r = pagerank(Graph(node_ids=tuple(str(i) for i in range(n)), weights=w),
                         tol=1e-12, max_iter=1000)
            assert abs(r.scores.sum() - 1.0) <= 1e-9
            assert np.all(r.scores >= 0)

    def test_matches_linear_solve_oracle(self):
        # 50 random weighted digraphs, n <= 12, with dangling nodes
        rng = np.random.default_rng(42)
        for _ in range(50):
            n = int(rng.integers(2, 13))
            w = rng.uniform(0.1, 2.0, size=(n, n)) * (rng.uniform(size=(n, n)) < 0.4)
            w[rng.integers(0, n)] = 0.0  # force at least one dangling node
            g = Graph(node_ids=tuple(str(i) for i in range(n)), weights=w)
            got = pagerank(g, tol=1e-12, max_iter=1000)
            want = pagerank_linear_solve(w, 0.85)
            assert np.abs(got.scores - want).sum() <= 1e-8

    def test_ranking_invariant_under_weight_scaling(self):
        rng = np.random.default_rng(9)
        w = rng.uniform(0, 1, size=(8, 8)) * (rng.uniform(size=(8, 8)) < 0.5)
        ids = tuple(str(i) for i in range(8))
        r1 = pagerank(Graph(node_ids=ids, weights=w), tol=1e-12, max_iter=1000)
        r2 = pagerank(Graph(node_ids=ids, weights=w * 37.5), tol=1e-12, max_iter=1000)
        assert r1.ranking() == r2.ranking()
        np.testing.assert_allclose(r1.scores, r2.scores, atol=1e-9)

    def test_nonconvergence_flag(self):
        g = Graph(node_ids=("a", "b"), weights=np.array([[0.0, 1.0], [1.0, 0.0]]))
        r = pagerank(g, tol=0.0, max_iter=3)
        assert not r.converged and r.iterations == 3

    def test_diagonal_ignored(self):
        w = np.array([[5.0, 1.0], [1.0, 0.0]])
        r = pagerank(Graph(node_ids=("a", "b"), weights=w))
        np.testing.assert_allclose(r.scores, [0.5, 0.5], atol=1e-12)


class TestSelectDiverse:
    def test_greedy_rule(self):
        values = np.array([
            [1.0, 0.9, 0.1],
            [0.9, 1.0, 0.2],
            [0.1, 0.2, 1.0],
        ])
        sim = _sim(("a", "b", "c"), values)
        assert select_diverse(["a", "b", "c"], sim, 2, 0.4) == ["a", "c"]

    def test_all_orthogonal_takes_first_n(self):
        sim = _sim(tuple("abcd"), np.eye(4))
        assert select_diverse(["d", "a", "b", "c"], sim, 2, 0.4) == ["d", "a"]

    def test_all_similar_takes_one(self):
        values = np.full((3, 3), 0.9)
        np.fill_diagonal(values, 1.0)
        sim = _sim(("a", "b", "c"), values)
        assert select_diverse(["b", "a", "c"], sim, 3, 0.4) == ["b"]

    def test_output_properties(self):
        rng = np.random.default_rng(21)
        vecs = {f"v{i:02d}": rng.normal(size=6) for i in range(12)}
        store = build_store(vecs)
        ids = sorted(vecs)
        sim = similarity_matrix(store, ids)
        out = select_diverse(ids, sim, 5, 0.4)
        assert len(out) <= 5
        assert set(out) <= set(ids)
        assert [x for x in ids if x in out] == out  # order follows candidate order
        for i, a in enumerate(out):
            for b in out[i + 1:]:
                assert sim.pair(a, b) < 0.4


class TestKpCountFor:
    @pytest.mark.parametrize("n,expected", [
        (0, 3), (39, 3), (40, 6), (79, 6), (80, 9), (100, 9), (119, 9),
        (120, 12), (150, 12), (10_000, 12),
    ])
    def test_tiers(self, n, expected):
        assert kp_count_for(n) == expected

    def test_monotone(self):
        values = [kp_count_for(n) for n in range(0, 400)]
        assert all(a <= b for a, b in zip(values, values[1:]))

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            kp_count_for(-1)
