"""DBSCAN semantics pinned against an explicit reachability reference."""

import random

import numpy as np
import pytest

from entrolang.clustering import NOISE, dbscan, pairwise_distances
from oracles import dbscan_reference


def partition_of(labels):
    clusters = {}
    noise = set()
    for i, lab in enumerate(labels):
        if lab == NOISE:
            noise.add(i)
        else:
            clusters.setdefault(int(lab), set()).add(i)
    return {frozenset(m) for m in clusters.values()}, noise


class TestPairwiseDistances:
    def test_euclidean_hand_values(self):
        pts = np.array([[0.0, 0.0], [3.0, 4.0], [0.0, 1.0]])
        d = pairwise_distances(pts)
        assert d[0, 1] == 5.0
        assert d[0, 2] == 1.0
        assert np.array_equal(d, d.T)
        assert np.all(np.diag(d) == 0.0)

    def test_one_dimensional_input_is_accepted(self):
        d = pairwise_distances(np.array([0.0, 1.5]))
        assert d[0, 1] == 1.5

    def test_cosine_hand_values(self):
        pts = np.array([[1.0, 0.0], [0.0, 2.0], [3.0, 0.0], [0.0, 0.0]])
        d = pairwise_distances(pts, metric="cosine")
        assert abs(d[0, 1] - 1.0) < 1e-12   # orthogonal
        assert abs(d[0, 2]) < 1e-12         # parallel
        assert abs(d[0, 3] - 1.0) < 1e-12   # zero vector: similarity 0

    def test_unknown_metric(self):
        with pytest.raises(ValueError, match="unknown metric 'manhattan'"):
            pairwise_distances(np.zeros((2, 2)), metric="manhattan")


class TestDbscanSemantics:
    def test_closed_ball_includes_the_boundary(self):
        # d = 1.0 exactly; closed balls make both points cores of one cluster.
        labels = dbscan(np.array([[0.0], [1.0]]), epsilon=1.0, min_pts=2)
        assert labels.tolist() == [0, 0]

    def test_min_pts_one_makes_every_point_a_core(self):
        labels = dbscan(np.array([[0.0], [10.0]]), epsilon=1.0, min_pts=1)
        assert labels.tolist() == [0, 1]

    def test_border_point_joins_lowest_indexed_core(self):
        # Two 4-point cores with a border point exactly epsilon from one core
        # of each; it must join the cluster of core index 3, not core index 5.
        pts = np.array([[0.0], [0.0625], [0.125], [0.1875], [0.4375],
                        [0.6875], [0.75], [0.8125], [0.875], [1.5]])
        labels = dbscan(pts, epsilon=0.25, min_pts=4)
        assert labels.tolist() == [0, 0, 0, 0, 0, 1, 1, 1, 1, NOISE]

    def test_cluster_ids_follow_lowest_core_index(self):
        pts = np.array([[5.0], [5.1], [0.0], [0.1]])
        labels = dbscan(pts, epsilon=0.2, min_pts=2)
        assert labels.tolist() == [0, 0, 1, 1]

    def test_permuting_points_permutes_the_partition(self):
        rng = random.Random(3)
        pts = [[rng.random(), rng.random()] for _ in range(30)]
        labels = dbscan(np.array(pts), epsilon=0.2, min_pts=3)
        perm = list(range(30))
        rng.shuffle(perm)
        shuffled = dbscan(np.array([pts[i] for i in perm]), epsilon=0.2, min_pts=3)
        want_clusters, want_noise = partition_of(labels)
        got_clusters, got_noise = partition_of(shuffled)
        position = {orig: local for local, orig in enumerate(perm)}
        assert got_clusters == {frozenset(position[i] for i in m) for m in want_clusters}
        assert got_noise == {position[i] for i in want_noise}

    def test_validation(self):
        with pytest.raises(ValueError, match="at least one point"):
            dbscan(np.zeros((0, 2)), epsilon=1.0, min_pts=1)
        with pytest.raises(ValueError, match="epsilon must be > 0"):
            dbscan(np.zeros((2, 2)), epsilon=0.0, min_pts=1)
        with pytest.raises(ValueError, match="min_pts must be >= 1"):
            dbscan(np.zeros((2, 2)), epsilon=1.0, min_pts=0)


class TestOracleEquivalence:
    def test_random_instances_match_reference_exactly(self):
        rng = random.Random(0)
        for trial in range(60):
            n = rng.randint(1, 50)
            dims = rng.randint(1, 8)
            pts = [[rng.random() for _ in range(dims)] for _ in range(n)]
            eps = rng.uniform(0.05, 0.9)
            min_pts = rng.randint(1, 6)
            metric = "cosine" if trial % 4 == 0 else "euclidean"
            labels = dbscan(np.array(pts), epsilon=eps, min_pts=min_pts, metric=metric)
            got = partition_of(labels)
            want = dbscan_reference(pts, eps, min_pts, metric=metric)
            assert got == want, f"trial {trial}: n={n} dims={dims} eps={eps:.3f} min_pts={min_pts}"

    def test_dense_blob_with_satellites(self):
        rng = random.Random(1)
        blob = [[rng.gauss(0, 0.05), rng.gauss(0, 0.05)] for _ in range(20)]
        satellites = [[2.0, 2.0], [-2.0, 2.0], [0.0, -3.0]]
        pts = blob + satellites
        labels = dbscan(np.array(pts), epsilon=0.3, min_pts=4)
        got_clusters, got_noise = partition_of(labels)
        want_clusters, want_noise = dbscan_reference(pts, 0.3, 4)
        assert got_clusters == want_clusters
        assert got_noise == want_noise == {20, 21, 22}
