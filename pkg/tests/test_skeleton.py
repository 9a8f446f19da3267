import numpy as np
import pytest

from mlgcn.errors import IngestionError
from mlgcn.skeleton import (CsvLayout, Joint, SkeletonSequence, Trajectory, build_trajectory_graph,
                            extract_trajectories, nearest_neighbor_edges, read_skeleton_csv,
                            sequence_to_graph, temporal_chunking)


def test_grouping_by_label():
    frames = [[Joint(1, (0.0,)), Joint(2, (1.0,))], [Joint(1, (0.5,)), Joint(2, (1.5,))]]
    tracks = extract_trajectories(SkeletonSequence(frames))
    assert [(t.joint_label, len(t.frames)) for t in tracks] == [(1, 2), (2, 2)]


def test_late_singleton_trajectory():
    frames = [[Joint(1, (0.0,))] for _ in range(5)] + [[Joint(1, (0.0,)), Joint(3, (7.0,))]]
    tracks = extract_trajectories(SkeletonSequence(frames))
    assert tracks[1].joint_label == 3
    assert tracks[1].frames == [5]


def test_two_people_fifteen_joints():
    frames = [[Joint(j, (0.0, 0.0, float(p)), p) for p in range(2) for j in range(1, 16)] for _ in range(3)]
    assert len(extract_trajectories(SkeletonSequence(frames))) == 30


def test_empty_sequence():
    with pytest.raises(IngestionError):
        extract_trajectories(SkeletonSequence([]))


def test_duplicate_joint_in_frame():
    with pytest.raises(IngestionError):
        SkeletonSequence([[Joint(1, (0.0,)), Joint(1, (1.0,))]])


def test_chunk_means():
    tr = Trajectory(1, 0, list(range(8)), [(float(v),) for v in range(1, 9)])
    np.testing.assert_allclose(temporal_chunking(tr, 4, 8), [1.5, 3.5, 5.5, 7.5])


def test_constant_trajectory():
    tr = Trajectory(1, 0, [0, 3, 4], [(2.0, -1.0)] * 3)
    np.testing.assert_allclose(temporal_chunking(tr, 5, 9), np.tile([2.0, -1.0], 5))


def test_empty_chunks_take_trajectory_mean():
    tr = Trajectory(1, 0, [0], [(4.0,)])
    np.testing.assert_allclose(temporal_chunking(tr, 4, 8), [4.0] * 4)


def test_empty_trajectory():
    with pytest.raises(IngestionError):
        temporal_chunking(Trajectory(1, 0), 4, 8)


def test_knn_examples():
    assert nearest_neighbor_edges(np.array([[0.0], [5.0]]), 3) == [(0, 1)]
    assert nearest_neighbor_edges(np.array([[0.0], [1.0], [10.0]]), 1) == [(0, 1), (1, 2)]
    pts = np.random.default_rng(0).standard_normal((6, 2))
    assert len(nearest_neighbor_edges(pts, 5)) == 15


def test_graph_node_order_and_labels():
    frames = [[Joint(2, (1.0, 0.0), 1), Joint(1, (0.0, 0.0), 0), Joint(2, (0.0, 1.0), 0)]] * 2
    g = build_trajectory_graph(extract_trajectories(SkeletonSequence(frames)), 1, 2, num_labels=2)
    assert g.node_labels == (1, 2, 2)
    assert g.p == 4


def _write_rows(path, rows):
    path.write_text("\n".join(",".join(str(v) for v in r) for r in rows) + "\n")


def test_csv_reader(tmp_path):
    layout = CsvLayout(joints_per_person=15, persons=2, dims=3)
    rng = np.random.default_rng(0)
    rows = [[t] + list(np.round(rng.random(90), 3)) for t in range(6)]
    _write_rows(tmp_path / "s.txt", rows)
    seq = read_skeleton_csv(tmp_path / "s.txt", layout)
    assert len(seq.frames) == 6
    g = sequence_to_graph(seq, 3, 4, num_labels=15)
    assert g.n == 30 and g.p == 12
    assert g.node_labels == tuple(range(1, 16)) * 2


def test_csv_wrong_width_names_line(tmp_path):
    layout = CsvLayout(joints_per_person=2, persons=1, dims=3)
    _write_rows(tmp_path / "s.txt", [[0, 1, 2, 3, 4, 5, 6], [1, 1, 2, 3]])
    with pytest.raises(IngestionError, match=r"s\.txt:2"):
        read_skeleton_csv(tmp_path / "s.txt", layout)


def test_csv_bad_number(tmp_path):
    layout = CsvLayout(joints_per_person=1, persons=1, dims=2)
    _write_rows(tmp_path / "s.txt", [[0, 1, "x"]])
    with pytest.raises(IngestionError, match=r"s\.txt:1"):
        read_skeleton_csv(tmp_path / "s.txt", layout)
