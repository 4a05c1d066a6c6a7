"""Per-text argument clustering: hierarchical agglomerative clustering and
a full HDBSCAN pipeline (core distances, mutual reachability, MST,
condensed tree, stability-based flat extraction).

Both algorithms run on cosine distance (1 - cosine similarity) and use
deterministic tie-breaking so repeated runs agree bit-for-bit.

Conventions follow the published HDBSCAN reference implementations:
the core distance of a point is the distance to its ``min_samples``-th
nearest neighbor *counting the point itself*, so ``min_samples=1`` reduces
mutual reachability to the raw distance.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .embeddings import EmbeddingStore, similarity_matrix

log = logging.getLogger(__name__)

NOISE = -1

_LINKAGES = ("average", "complete", "single")
_EXTRACTION_MODES = ("eom", "leaf")


class ClusteringError(Exception):
    pass


@dataclass(frozen=True)
class ClusterParams:
    algorithm: str = "hdbscan"
    min_cluster_size: int = 3
    min_samples: int = 1
    linkage: str = "average"
    distance_threshold: float = 0.35
    flat_extraction: str = "eom"

    def __post_init__(self):
        if self.algorithm not in ("hdbscan", "agglomerative"):
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if self.min_cluster_size < 2:
            raise ValueError("min_cluster_size must be >= 2")
        if not 1 <= self.min_samples <= self.min_cluster_size:
            raise ValueError("min_samples must satisfy 1 <= min_samples <= min_cluster_size")
        if self.linkage not in _LINKAGES:
            raise ValueError(f"linkage must be one of {_LINKAGES}")
        if self.distance_threshold <= 0:
            raise ValueError("distance_threshold must be > 0")
        if self.flat_extraction not in _EXTRACTION_MODES:
            raise ValueError(f"flat_extraction must be one of {_EXTRACTION_MODES}")


@dataclass(frozen=True)
class ClusterAssignment:
    """Partition of ids into clusters 0..num_clusters-1 plus a noise set."""

    labels: Mapping[str, int]
    num_clusters: int

    def members(self, label: int) -> list[str]:
        return [key for key, lab in self.labels.items() if lab == label]

    def noise_ids(self) -> list[str]:
        return self.members(NOISE)

    def clusters(self) -> list[list[str]]:
        return [self.members(lab) for lab in range(self.num_clusters)]

    def to_json(self) -> dict:
        return {"labels": dict(self.labels), "num_clusters": self.num_clusters}

    @classmethod
    def from_json(cls, data: dict) -> "ClusterAssignment":
        return cls(labels={str(k): int(v) for k, v in data["labels"].items()},
                   num_clusters=int(data["num_clusters"]))


def _cosine_distances(store: EmbeddingStore, ids: Sequence[str]) -> np.ndarray:
    sim = similarity_matrix(store, ids)
    dist = 1.0 - sim.values
    np.fill_diagonal(dist, 0.0)
    return np.maximum(dist, 0.0)


def _pair_key(ids: Sequence[str], i: int, j: int) -> tuple[str, str]:
    a, b = ids[i], ids[j]
    return (a, b) if a <= b else (b, a)


def agglomerative_cluster(
    store: EmbeddingStore,
    ids: Sequence[str],
    params: ClusterParams,
) -> ClusterAssignment:
    """Bottom-up merging under the chosen linkage until every
    inter-cluster distance exceeds ``distance_threshold``. Distance ties
    merge the pair with the lexicographically smallest (id, id) key."""
    n = len(ids)
    if n == 0:
        raise ClusteringError("cannot cluster an empty id list")
    if n == 1:
        return ClusterAssignment(labels={ids[0]: 0}, num_clusters=1)

    dist = _cosine_distances(store, ids)
    # Inter-cluster distances maintained with Lance-Williams updates
    # (exact for single / complete / average linkage).
    d = dist.copy()
    np.fill_diagonal(d, np.inf)
    alive = list(range(n))
    members: dict[int, list[int]] = {i: [i] for i in range(n)}
    rep: dict[int, str] = {i: ids[i] for i in range(n)}

    while len(alive) > 1:
        dmin = float(d.min())
        if dmin > params.distance_threshold:
            break
        ties = np.argwhere(d == dmin)
        a, b = min(
            ((int(i), int(j)) for i, j in ties if i < j),
            key=lambda p: tuple(sorted((rep[p[0]], rep[p[1]]))),
        )
        na, nb = len(members[a]), len(members[b])
        for c in alive:
            if c in (a, b):
                continue
            if params.linkage == "single":
                d[a, c] = d[c, a] = min(d[a, c], d[b, c])
            elif params.linkage == "complete":
                d[a, c] = d[c, a] = max(d[a, c], d[b, c])
            else:
                d[a, c] = d[c, a] = (na * d[a, c] + nb * d[b, c]) / (na + nb)
        members[a].extend(members[b])
        rep[a] = min(rep[a], rep[b])
        del members[b]
        alive.remove(b)
        d[b, :] = np.inf
        d[:, b] = np.inf

    groups = sorted(members.values(), key=lambda g: min(ids[i] for i in g))
    labels: dict[str, int] = {}
    for label, group in enumerate(groups):
        for i in group:
            labels[ids[i]] = label
    labels = {key: labels[key] for key in ids}
    return ClusterAssignment(labels=labels, num_clusters=len(groups))


# --- HDBSCAN -----------------------------------------------------------


def _core_distances(dist: np.ndarray, min_samples: int) -> np.ndarray:
    """Distance to the min_samples-th nearest neighbor, self included."""
    k = min_samples - 1
    if k == 0:
        return np.zeros(dist.shape[0])
    return np.sort(dist, axis=1)[:, k]


def _mutual_reachability(dist: np.ndarray, min_samples: int) -> np.ndarray:
    core = _core_distances(dist, min_samples)
    mr = np.maximum(dist, np.maximum(core[:, None], core[None, :]))
    np.fill_diagonal(mr, 0.0)
    return mr


def _prim_mst(mr: np.ndarray, ids: Sequence[str]) -> list[tuple[float, int, int]]:
    """Prim's MST over the dense mutual-reachability graph; ties in edge
    weight break by the smallest (id, id) pair."""
    n = mr.shape[0]
    in_tree = np.zeros(n, dtype=bool)
    in_tree[0] = True
    best_w = mr[0].copy()
    best_from = np.zeros(n, dtype=int)
    edges: list[tuple[float, int, int]] = []
    for _ in range(n - 1):
        choice = None
        for v in range(n):
            if in_tree[v]:
                continue
            key = (best_w[v], _pair_key(ids, v, best_from[v]))
            if choice is None or key < choice[0]:
                choice = (key, v)
        (w, _), v = choice
        edges.append((float(w), int(best_from[v]), v))
        in_tree[v] = True
        for u in range(n):
            if in_tree[u]:
                continue
            if mr[v, u] < best_w[u] or (
                mr[v, u] == best_w[u]
                and _pair_key(ids, u, v) < _pair_key(ids, u, best_from[u])
            ):
                best_w[u] = mr[v, u]
                best_from[u] = v
    return edges


def _single_linkage(edges: list[tuple[float, int, int]], n: int,
                    ids: Sequence[str]) -> list[tuple[int, int, float, int]]:
    """Union sorted MST edges into scipy-style linkage rows
    (left, right, distance, size); new node k = n + row index."""
    order = sorted(range(len(edges)),
                   key=lambda e: (edges[e][0], _pair_key(ids, edges[e][1], edges[e][2])))
    parent = list(range(2 * n - 1))
    size = [1] * (2 * n - 1)

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    rows = []
    nxt = n
    for e in order:
        w, i, j = edges[e]
        ri, rj = find(i), find(j)
        rows.append((ri, rj, w, size[ri] + size[rj]))
        parent[ri] = parent[rj] = nxt
        size[nxt] = size[ri] + size[rj]
        nxt += 1
    return rows


def _condense(rows: list[tuple[int, int, float, int]], n: int,
              min_cluster_size: int) -> list[tuple[int, int, float, int]]:
    """Condense the dendrogram: only splits where both sides reach
    ``min_cluster_size`` create new clusters; smaller sides fall out as
    points at lambda = 1/distance. Returns (parent, child, lambda, size)
    rows with the root cluster relabelled to ``n``."""
    children: dict[int, tuple[int, int, float]] = {}
    for idx, (l, r, w, _) in enumerate(rows):
        children[n + idx] = (l, r, w)

    def leaves(node: int) -> list[int]:
        stack, out = [node], []
        while stack:
            cur = stack.pop()
            if cur < n:
                out.append(cur)
            else:
                l, r, _ = children[cur]
                stack.extend((l, r))
        return out

    def count(node: int) -> int:
        return 1 if node < n else rows[node - n][3]

    root = n + len(rows) - 1
    relabel = {root: n}
    next_label = n + 1
    result: list[tuple[int, int, float, int]] = []
    stack = [root]
    while stack:
        node = stack.pop(0)
        label = relabel[node]
        l, r, w = children[node]
        lam = 1.0 / w if w > 0.0 else np.inf
        cl, cr = count(l), count(r)
        big_l, big_r = cl >= min_cluster_size, cr >= min_cluster_size
        if big_l and big_r:
            for child, c in ((l, cl), (r, cr)):
                relabel[child] = next_label
                result.append((label, next_label, lam, c))
                next_label += 1
                if child >= n:
                    stack.append(child)
        elif not big_l and not big_r:
            for child in (l, r):
                for p in leaves(child):
                    result.append((label, p, lam, 1))
        else:
            big, small = (l, r) if big_l else (r, l)
            for p in leaves(small):
                result.append((label, p, lam, 1))
            if big >= n:
                relabel[big] = label
                stack.append(big)
            else:
                result.append((label, big, lam, 1))
    return result


def _stability(condensed: list[tuple[int, int, float, int]], n: int) -> dict[int, float]:
    births: dict[int, float] = {}
    for parent, child, lam, _ in condensed:
        births[child] = lam
    births.setdefault(n, 0.0)
    stability: dict[int, float] = {}
    for parent, child, lam, size in condensed:
        stability.setdefault(parent, 0.0)
        stability[parent] += (lam - births[parent]) * size
    return stability


def _select_eom(condensed, stability: dict[int, float], n: int) -> set[int]:
    """Excess-of-mass flat extraction; the root cluster is never eligible."""
    cluster_children: dict[int, list[int]] = {}
    for parent, child, _, size in condensed:
        if size > 1 or child >= n:
            cluster_children.setdefault(parent, []).append(child)
    is_cluster = {c: True for c in stability if c != n}
    work = dict(stability)
    for node in sorted(is_cluster, reverse=True):
        subtree = sum(work.get(c, 0.0) for c in cluster_children.get(node, []))
        if subtree > work[node]:
            is_cluster[node] = False
            work[node] = subtree
        else:
            stack = list(cluster_children.get(node, []))
            while stack:
                cur = stack.pop()
                if cur in is_cluster:
                    is_cluster[cur] = False
                stack.extend(cluster_children.get(cur, []))
    return {c for c, keep in is_cluster.items() if keep}


def _select_leaf(condensed, stability: dict[int, float], n: int) -> set[int]:
    parents = {p for p, c, _, s in condensed if s > 1 or c >= n}
    clusters = set(stability) - {n}
    leaves = {c for c in clusters if c not in parents}
    return leaves


def hdbscan_cluster(
    store: EmbeddingStore,
    ids: Sequence[str],
    params: ClusterParams,
) -> ClusterAssignment:
    """Full HDBSCAN over cosine distance: core distances (k =
    ``min_samples``), mutual reachability, MST, condensed tree, and
    stability-based flat extraction. Points in no stable cluster get
    ``NOISE``. Degenerate input where every pairwise mutual-reachability
    distance is zero (all points coincide) forms one cluster."""
    n = len(ids)
    if n == 0:
        raise ClusteringError("cannot cluster an empty id list")
    if n < params.min_cluster_size:
        return ClusterAssignment(labels={key: NOISE for key in ids}, num_clusters=0)

    dist = _cosine_distances(store, ids)
    mr = _mutual_reachability(dist, params.min_samples)
    edges = _prim_mst(mr, ids)

    rows = _single_linkage(edges, n, ids)
    condensed = _condense(rows, n, params.min_cluster_size)
    stability = _stability(condensed, n)
    if params.flat_extraction == "eom":
        selected = _select_eom(condensed, stability, n)
    else:
        selected = _select_leaf(condensed, stability, n)

    if not selected:
        # The condensed tree never split: the whole text is one
        # density-connected blob (e.g. all points coincide). The root is
        # normally not selectable; recover it as a single cluster rather
        # than labelling a coherent text 100% noise.
        return ClusterAssignment(labels={key: 0 for key in ids}, num_clusters=1)

    cluster_parent = {child: parent for parent, child, _, size in condensed
                      if child >= n}
    point_parent = {child: parent for parent, child, _, size in condensed
                    if child < n}
    label_map = {c: i for i, c in enumerate(sorted(selected))}
    labels: dict[str, int] = {}
    for i, key in enumerate(ids):
        cur = point_parent[i]
        while cur not in selected and cur != n:
            cur = cluster_parent[cur]
        labels[key] = label_map.get(cur, NOISE)
    return ClusterAssignment(labels=labels, num_clusters=len(selected))


def cluster(store: EmbeddingStore, ids: Sequence[str],
            params: ClusterParams) -> ClusterAssignment:
    if params.algorithm == "agglomerative":
        return agglomerative_cluster(store, ids, params)
    return hdbscan_cluster(store, ids, params)


def centroids(store: EmbeddingStore, assignment: ClusterAssignment) -> dict[int, np.ndarray]:
    """L2-normalized arithmetic mean of each non-noise cluster's vectors."""
    if assignment.num_clusters == 0:
        raise ClusteringError("no clusters")
    out: dict[int, np.ndarray] = {}
    for label in range(assignment.num_clusters):
        member_ids = assignment.members(label)
        mean = store.matrix(member_ids).mean(axis=0)
        norm = float(np.linalg.norm(mean))
        if norm == 0.0:
            log.warning("centroid of cluster %d is the zero vector", label)
            out[label] = mean
        else:
            out[label] = mean / norm
    return out
