import numpy as np
import pytest

from pushgrasp.perception import (
    Cluster,
    PerceptionError,
    dbscan,
    plan_grasp_approach,
    select_target,
)
from pushgrasp.sim import randomize_scene, render_pointcloud
from pushgrasp.sim.render import PointCloud


def naive_dbscan(points, eps, min_pts):
    """O(n^2) reference: full distance matrix, seed scan in index order,
    FIFO expansion."""
    pts = np.asarray(points, dtype=float)
    n = len(pts)
    if n == 0:
        return np.array([], dtype=int)
    diff = pts[:, None, :] - pts[None, :, :]
    within = (diff ** 2).sum(axis=2) <= eps * eps
    core = within.sum(axis=1) >= min_pts
    labels = np.full(n, -1, dtype=int)
    cid = 0
    for seed in range(n):
        if labels[seed] != -1 or not core[seed]:
            continue
        labels[seed] = cid
        queue = [seed]
        while queue:
            idx = queue.pop(0)
            if not core[idx]:
                continue
            for nb in np.flatnonzero(within[idx]):
                if labels[nb] == -1:
                    labels[nb] = int(cid)
                    queue.append(int(nb))
        cid += 1
    return labels


def labels_from_clusters(n, clusters, noise):
    labels = np.full(n, -1, dtype=int)
    for c in clusters:
        labels[c.member_indices] = c.id
    return labels


def relabel_canonical(labels):
    mapping = {}
    out = np.full(len(labels), -1, dtype=int)
    for i, lab in enumerate(labels):
        if lab == -1:
            continue
        if lab not in mapping:
            mapping[lab] = len(mapping)
        out[i] = mapping[lab]
    return out


def test_two_close_points_one_far():
    cloud = PointCloud(np.array([[0, 0, 0], [0.01, 0, 0], [5, 5, 0]], dtype=float))
    clusters, noise = dbscan(cloud, eps=0.05, min_pts=2)
    assert len(clusters) == 1
    assert sorted(clusters[0].member_indices.tolist()) == [0, 1]
    assert noise.tolist() == [2]


def test_all_points_within_eps_single_cluster():
    rng = np.random.default_rng(0)
    pts = rng.uniform(0, 0.01, (20, 3))
    clusters, noise = dbscan(PointCloud(pts), eps=0.05, min_pts=5)
    assert len(clusters) == 1
    assert len(noise) == 0
    assert len(clusters[0].member_indices) == 20


def test_empty_cloud():
    clusters, noise = dbscan(PointCloud(np.zeros((0, 3))), eps=0.1, min_pts=2)
    assert clusters == [] and len(noise) == 0


def test_matches_naive_reference_on_seeded_clouds():
    rng = np.random.default_rng(42)
    for trial in range(50):
        n = int(rng.integers(20, 301))
        # Mixture of tight blobs and scattered outliers.
        blobs = []
        for _ in range(int(rng.integers(1, 6))):
            center = rng.uniform(0, 1, 3)
            blobs.append(center + rng.normal(0, 0.01, (int(rng.integers(5, 40)), 3)))
        blobs.append(rng.uniform(0, 1, (max(1, n - sum(map(len, blobs))), 3)))
        pts = np.vstack(blobs)[:n]
        eps = float(rng.uniform(0.02, 0.08))
        min_pts = int(rng.integers(2, 7))
        clusters, noise = dbscan(PointCloud(pts), eps=eps, min_pts=min_pts)
        mine = labels_from_clusters(len(pts), clusters, noise)
        ref = naive_dbscan(pts, eps, min_pts)
        assert (relabel_canonical(mine) == relabel_canonical(ref)).all()


def test_partition_property():
    scene = randomize_scene(seed=4)
    cloud = render_pointcloud(scene)
    clusters, noise = dbscan(cloud)
    seen = np.concatenate([c.member_indices for c in clusters] + [noise])
    assert sorted(seen.tolist()) == list(range(len(cloud)))


def test_centroid_is_member_mean():
    scene = randomize_scene(seed=6)
    cloud = render_pointcloud(scene)
    clusters, _ = dbscan(cloud)
    assert clusters
    for c in clusters:
        np.testing.assert_allclose(c.centroid,
                                   cloud.points[c.member_indices].mean(axis=0))


def test_rendered_objects_map_to_clusters():
    scene = randomize_scene(seed=12)
    cloud = render_pointcloud(scene)
    clusters, _ = dbscan(cloud)
    # Each cluster centroid should sit near some object's center.
    for c in clusters:
        dists = [np.hypot(c.centroid[0] - o.center[0], c.centroid[1] - o.center[1])
                 for o in scene.objects]
        assert min(dists) < 0.03


def test_select_target_snaps_to_centroid():
    clusters = [
        Cluster(id=0, member_indices=np.array([0]), centroid=(0.3, 0.3, 0.1)),
        Cluster(id=1, member_indices=np.array([1]), centroid=(0.7, 0.4, 0.1)),
    ]
    centroid, cid = select_target(clusters, click=(0.31, 0.29))
    assert cid == 0
    assert centroid == (0.3, 0.3, 0.1)  # never the raw click


def test_select_target_tie_breaks_lowest_id():
    clusters = [
        Cluster(id=0, member_indices=np.array([0]), centroid=(0.2, 0.3, 0.1)),
        Cluster(id=1, member_indices=np.array([1]), centroid=(0.4, 0.3, 0.1)),
    ]
    _, cid = select_target(clusters, click=(0.3, 0.3))
    assert cid == 0


def test_select_target_empty_raises():
    with pytest.raises(PerceptionError):
        select_target([], click=(0.1, 0.1))


def test_grasp_approach_duration_and_linearity():
    traj = plan_grasp_approach((0.0, 0.0), (0.5, 0.0))
    assert traj.duration == pytest.approx(5.0)
    assert np.abs(traj.points[:, 1]).max() < 1e-9
    # Collinearity of all samples with the endpoints.
    x0, y0 = 0.0, 0.0
    x1, y1 = 0.5, 0.0
    cross = (traj.points[:, 0] - x0) * (y1 - y0) - (traj.points[:, 1] - y0) * (x1 - x0)
    assert np.abs(cross).max() < 1e-9


def test_grasp_approach_degenerate():
    traj = plan_grasp_approach((0.2, 0.2), (0.2, 0.2))
    assert len(traj) == 1
