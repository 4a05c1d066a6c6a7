"""Weighted-graph ranking: thresholded similarity graphs, PageRank by
power iteration, diversity-constrained greedy selection, and the tiered
key-point budget."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .embeddings import SimilarityMatrix

log = logging.getLogger(__name__)

DEFAULT_DAMPING = 0.85
DEFAULT_TOL = 1e-9
DEFAULT_MAX_ITER = 100


@dataclass(frozen=True)
class Graph:
    """Weighted adjacency over an ordered node list. The diagonal is
    ignored by ranking (no self-loop contribution)."""

    node_ids: tuple[str, ...]
    weights: np.ndarray

    @property
    def n(self) -> int:
        return len(self.node_ids)

    def degree(self) -> np.ndarray:
        """Number of incident edges per node (diagonal excluded)."""
        off = self.weights.copy()
        np.fill_diagonal(off, 0.0)
        return np.count_nonzero(off > 0.0, axis=1)


@dataclass(frozen=True)
class RankVector:
    node_ids: tuple[str, ...]
    scores: np.ndarray
    converged: bool
    iterations: int

    def ranking(self, tie_degree: np.ndarray | None = None) -> list[str]:
        """Node ids by descending score; ties by degree (descending) when
        given, then by id."""
        degree = tie_degree if tie_degree is not None else np.zeros(len(self.node_ids))
        order = sorted(
            range(len(self.node_ids)),
            key=lambda i: (-self.scores[i], -degree[i], self.node_ids[i]),
        )
        return [self.node_ids[i] for i in order]


def build_threshold_graph(sim: SimilarityMatrix, min_threshold: float) -> Graph:
    """Keep edge (i, j), i != j, with weight sim[i][j] iff the similarity
    meets ``min_threshold``. The graph may end up edgeless."""
    if min_threshold < 0.0:
        raise ValueError("min_threshold must be >= 0 (weights must stay nonnegative)")
    values = np.asarray(sim.values, dtype=np.float64)
    weights = np.where(values >= min_threshold, values, 0.0)
    np.fill_diagonal(weights, 0.0)
    return Graph(node_ids=sim.ids, weights=weights)


def pagerank(
    g: Graph,
    damping: float = DEFAULT_DAMPING,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> RankVector:
    """Power iteration on the column-stochastic transition matrix built
    from the edge weights. Dangling nodes (zero out-weight) distribute
    uniformly. Stops when the L1 change drops below ``tol``; if
    ``max_iter`` is hit first the result is returned with
    ``converged=False``."""
    if not 0.0 < damping < 1.0:
        raise ValueError("damping must lie in (0, 1)")
    n = g.n
    if n == 0:
        raise ValueError("graph must have at least one node")
    weights = g.weights.astype(np.float64).copy()
    np.fill_diagonal(weights, 0.0)
    out = weights.sum(axis=1)
    dangling = out == 0.0
    # Column i of the transition matrix is the outgoing distribution of i.
    cols = np.where(dangling[:, None], 1.0 / n, weights / np.where(dangling, 1.0, out)[:, None])
    transition = cols.T

    x = np.full(n, 1.0 / n)
    teleport = (1.0 - damping) / n
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        new = damping * (transition @ x) + teleport
        change = float(np.abs(new - x).sum())
        x = new
        if change < tol:
            converged = True
            break
    if not converged:
        log.info("pagerank stopped after %d iterations without reaching tol %g",
                 max_iter, tol)
    x = x / x.sum()
    return RankVector(node_ids=g.node_ids, scores=x, converged=converged,
                      iterations=iterations)


def select_diverse(
    candidates: Sequence[str],
    sim: SimilarityMatrix,
    n_keep: int,
    max_threshold: float,
) -> list[str]:
    """Greedy scan of rank-ordered candidates; accept one iff its cosine to
    every already-accepted candidate is strictly below ``max_threshold``.
    Stops after ``n_keep`` accepts or when the list is exhausted."""
    index = {key: i for i, key in enumerate(sim.ids)}
    accepted: list[str] = []
    for cand in candidates:
        if len(accepted) >= n_keep:
            break
        i = index[cand]
        if all(sim.values[i, index[a]] < max_threshold for a in accepted):
            accepted.append(cand)
    return accepted


def kp_count_for(num_arguments: int) -> int:
    """Tiered key-point budget: <40 arguments -> 3, [40, 80) -> 6,
    [80, 120) -> 9, >=120 -> 12."""
    if num_arguments < 0:
        raise ValueError("num_arguments must be >= 0")
    if num_arguments < 40:
        return 3
    if num_arguments < 80:
        return 6
    if num_arguments < 120:
        return 9
    return 12
