"""Density-based typology tree induction plus agglomerative baselines.

DBSCAN is implemented directly (not via sklearn) because the tree contract
pins semantics libraries leave open: neighborhoods are closed balls, a core
point has at least min_pts neighbors counting itself, and border points join
the cluster of their lowest-indexed adjacent core point so the partition is
canonical under input permutation.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .tree import TreeNode
from .vectors import VectorSet

NOISE = -1


@dataclass(frozen=True)
class ClusterParams:
    epsilon: float = 0.1
    min_samples_fraction: float = 0.3
    max_depth: int = 8
    epsilon_decay: float = 0.7
    metric: str = "euclidean"  # euclidean | cosine

    def __post_init__(self) -> None:
        if self.epsilon <= 0:
            raise ValueError(f"epsilon must be > 0, got {self.epsilon}")
        if not 0 < self.min_samples_fraction <= 1:
            raise ValueError(f"min_samples_fraction must be in (0, 1], got {self.min_samples_fraction}")
        if not 0 < self.epsilon_decay <= 1:
            raise ValueError(f"epsilon_decay must be in (0, 1], got {self.epsilon_decay}")
        if self.max_depth < 1:
            raise ValueError(f"max_depth must be >= 1, got {self.max_depth}")
        if self.metric not in ("euclidean", "cosine"):
            raise ValueError(f"metric must be euclidean or cosine, got {self.metric!r}")


def pairwise_distances(points: np.ndarray, metric: str = "euclidean") -> np.ndarray:
    points = np.asarray(points, dtype=np.float64)
    if points.ndim == 1:
        points = points[:, None]
    if metric == "euclidean":
        sq = np.sum(points ** 2, axis=1)
        d2 = sq[:, None] + sq[None, :] - 2.0 * (points @ points.T)
        np.maximum(d2, 0.0, out=d2)
        return np.sqrt(d2)
    if metric == "cosine":
        norms = np.linalg.norm(points, axis=1)
        norms = np.where(norms == 0, 1.0, norms)
        sim = (points @ points.T) / np.outer(norms, norms)
        return 1.0 - np.clip(sim, -1.0, 1.0)
    raise ValueError(f"unknown metric {metric!r}")


def dbscan(points: np.ndarray, epsilon: float, min_pts: int,
           metric: str = "euclidean") -> np.ndarray:
    """Cluster labels per point (0..k-1) with NOISE = -1.

    Core point: closed epsilon-ball contains >= min_pts points including the
    point itself. Clusters are connected components of core points under the
    epsilon graph; border points take the cluster of the lowest-indexed
    adjacent core point. Cluster ids are assigned by each component's lowest
    core index, so the labeling is canonical.

    Raises:
        ValueError: empty point set or invalid parameters.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.size == 0:
        raise ValueError("dbscan needs at least one point")
    if epsilon <= 0:
        raise ValueError(f"epsilon must be > 0, got {epsilon}")
    if min_pts < 1:
        raise ValueError(f"min_pts must be >= 1, got {min_pts}")
    n = points.shape[0] if points.ndim > 1 else len(points)
    adj = pairwise_distances(points, metric) <= epsilon
    degrees = adj.sum(axis=1)  # closed ball, includes self
    core = degrees >= min_pts
    labels = np.full(n, NOISE, dtype=np.int64)
    next_id = 0
    for start in range(n):
        if not core[start] or labels[start] != NOISE:
            continue
        labels[start] = next_id
        queue = deque([start])
        while queue:
            u = queue.popleft()
            for v in np.flatnonzero(adj[u]):
                if core[v] and labels[v] == NOISE:
                    labels[v] = next_id
                    queue.append(v)
        next_id += 1
    for i in range(n):
        if labels[i] != NOISE or not np.any(adj[i] & core):
            continue
        lowest_core = int(np.flatnonzero(adj[i] & core)[0])
        labels[i] = labels[lowest_core]
    return labels


def _groups_from_labels(labels: np.ndarray, indices: list[int]) -> list[tuple[str, list[int]]]:
    """(kind, member indices) groups: clusters of >= 2, singleton clusters and
    the pooled noise points as unsplit groups."""
    by_id: dict[int, list[int]] = {}
    noise: list[int] = []
    for local, idx in enumerate(indices):
        lab = int(labels[local])
        if lab == NOISE:
            noise.append(idx)
        else:
            by_id.setdefault(lab, []).append(idx)
    groups: list[tuple[str, list[int]]] = []
    for members in by_id.values():
        groups.append(("cluster" if len(members) >= 2 else "unsplit", members))
    if noise:
        groups.append(("unsplit", noise))
    return groups


def induce_tree(vs: VectorSet, params: ClusterParams = ClusterParams()) -> TreeNode:
    """Recursive DBSCAN tree induction over min-max normalized vectors.

    Level 1 clusters the full set with min_pts = ceil(min_samples_fraction *
    n); every cluster of size >= 2 becomes a `Cluster_L{level}_{k}` node and
    is re-clustered at epsilon * epsilon_decay one level down. Noise points
    are pooled into one `Unsplit_L{level}_{k}` node and each singleton
    cluster gets its own. When re-clustering returns the whole set as a
    single group (no further split) or max_depth is hit, leaves attach
    directly. k counts per node kind in order of lowest member language code.

    Raises:
        ValueError: fewer than 2 languages, or vectors not min-max normalized.
    """
    n = len(vs)
    if n < 2:
        raise ValueError(f"tree induction needs at least 2 languages, got {n}")
    _check_normalized(vs.vectors)
    langs = vs.langs

    def leaf_nodes(members: list[int]) -> list[TreeNode]:
        return [TreeNode(langs[i]) for i in sorted(members, key=lambda i: langs[i])]

    def grow(members: list[int], level: int, eps: float, at_root: bool) -> list[TreeNode] | None:
        min_pts = math.ceil(params.min_samples_fraction * len(members))
        labels = dbscan(vs.vectors[members], eps, min_pts, metric=params.metric)
        groups = _groups_from_labels(labels, members)
        if len(groups) == 1 and not at_root:
            return None
        groups.sort(key=lambda g: min(langs[i] for i in g[1]))
        counters = {"cluster": 0, "unsplit": 0}
        nodes: list[TreeNode] = []
        for kind, g_members in groups:
            counters[kind] += 1
            prefix = "Cluster" if kind == "cluster" else "Unsplit"
            label = f"{prefix}_L{level}_{counters[kind]}"
            if kind == "cluster" and level < params.max_depth:
                sub = grow(g_members, level + 1, eps * params.epsilon_decay, at_root=False)
                children = sub if sub is not None else leaf_nodes(g_members)
            else:
                children = leaf_nodes(g_members)
            nodes.append(TreeNode(label, children))
        return nodes

    children = grow(list(range(n)), 1, params.epsilon, at_root=True)
    assert children is not None
    return TreeNode("Root", children)


def _check_normalized(vectors: np.ndarray, tol: float = 1e-9) -> None:
    lo = vectors.min(axis=0)
    hi = vectors.max(axis=0)
    ok = ((np.abs(lo) <= tol) & ((np.abs(hi - 1) <= tol) | (np.abs(hi) <= tol)))
    if not bool(np.all(ok)):
        raise ValueError("vectors are not min-max normalized; call minmax_normalize first")


LINKAGES = ("single", "complete", "average", "ward")


def agglomerative_tree(vs: VectorSet, linkage: str = "average") -> TreeNode:
    """Full agglomerative dendrogram relabeled with Cluster_L naming by depth.

    Pairwise Euclidean distances, Lance-Williams updates, and ties broken by
    the lexicographic order of the merging clusters' lowest language codes.
    """
    if linkage not in LINKAGES:
        raise ValueError(f"linkage must be one of {LINKAGES}, got {linkage!r}")
    n = len(vs)
    if n < 2:
        raise ValueError(f"agglomerative clustering needs at least 2 languages, got {n}")
    base = pairwise_distances(vs.vectors)
    clusters: dict[str, dict] = {}
    for i, lang in enumerate(vs.langs):
        clusters[lang] = {"size": 1, "node": TreeNode(lang)}
    dist: dict[tuple[str, str], float] = {}
    keys = sorted(clusters)
    lang_index = {lang: i for i, lang in enumerate(vs.langs)}
    for a_pos in range(len(keys)):
        for b_pos in range(a_pos + 1, len(keys)):
            a, b = keys[a_pos], keys[b_pos]
            dist[(a, b)] = float(base[lang_index[a], lang_index[b]])

    def pair_key(a: str, b: str) -> tuple[str, str]:
        return (a, b) if a < b else (b, a)

    while len(clusters) > 1:
        best: tuple[str, str] | None = None
        best_d = math.inf
        for (a, b) in sorted(dist):
            if dist[(a, b)] < best_d:
                best_d = dist[(a, b)]
                best = (a, b)
        assert best is not None
        a, b = best
        na, nb = clusters[a]["size"], clusters[b]["size"]
        merged_key = min(a, b)
        merged = {
            "size": na + nb,
            "node": TreeNode("", [clusters[a]["node"], clusters[b]["node"]]),
        }
        d_ab = dist.pop((a, b))
        others = [k for k in clusters if k not in (a, b)]
        for c in others:
            d_ac = dist.pop(pair_key(a, c))
            d_bc = dist.pop(pair_key(b, c))
            nc = clusters[c]["size"]
            if linkage == "single":
                d_new = min(d_ac, d_bc)
            elif linkage == "complete":
                d_new = max(d_ac, d_bc)
            elif linkage == "average":
                d_new = (na * d_ac + nb * d_bc) / (na + nb)
            else:  # ward
                d_new = math.sqrt(max(0.0, (
                    (na + nc) * d_ac ** 2 + (nb + nc) * d_bc ** 2 - nc * d_ab ** 2
                ) / (na + nb + nc)))
            dist[pair_key(merged_key, c)] = d_new
        del clusters[a], clusters[b]
        clusters[merged_key] = merged

    root = next(iter(clusters.values()))["node"]
    return _relabel_dendrogram(root)


def _relabel_dendrogram(root: TreeNode) -> TreeNode:
    """Name internal nodes Cluster_L{depth}_{k}; k per level by lowest leaf."""
    by_level: dict[int, list[TreeNode]] = {}

    def collect(node: TreeNode, depth: int) -> None:
        if not node.is_leaf() and depth > 0:
            by_level.setdefault(depth, []).append(node)
        for c in node.children:
            collect(c, depth + 1)

    collect(root, 0)
    for level, nodes in by_level.items():
        nodes.sort(key=lambda nd: min(nd.leaves()))
        for k, node in enumerate(nodes, start=1):
            node.label = f"Cluster_L{level}_{k}"
    root.label = "Root"
    return root
