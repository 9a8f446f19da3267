"""Skeleton sequences -> trajectory graphs (motion stream).

Joints with the same label are tracked across frames into trajectories;
each trajectory becomes one node described by temporal chunking of its
coordinates, and nodes are linked to their nearest trajectories.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import IngestionError
from .graph import Graph


@dataclass(frozen=True)
class Joint:
    label: int
    coords: tuple[float, ...]
    person: int = 0


@dataclass
class SkeletonSequence:
    """Ordered frames; ``frames[t]`` holds the joints detected at frame ``t``."""

    frames: list[list[Joint]]
    fps: float | None = None

    def __post_init__(self):
        dims = {len(j.coords) for frame in self.frames for j in frame}
        if len(dims) > 1:
            raise IngestionError(f"inconsistent coordinate dimension across the sequence: {sorted(dims)}")
        for t, frame in enumerate(self.frames):
            seen = set()
            for j in frame:
                key = (j.person, j.label)
                if key in seen:
                    raise IngestionError(f"frame {t}: joint {j.label} of person {j.person} appears twice")
                seen.add(key)

    @property
    def dim(self) -> int:
        for frame in self.frames:
            for j in frame:
                return len(j.coords)
        return 0


@dataclass
class Trajectory:
    joint_label: int
    person_index: int
    frames: list[int] = field(default_factory=list)
    coords: list[tuple[float, ...]] = field(default_factory=list)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.coords, dtype=np.float64)

    def centroid(self) -> np.ndarray:
        return self.as_array().mean(axis=0)


def extract_trajectories(seq: SkeletonSequence) -> list[Trajectory]:
    """Group joints by (person, label), keeping frame order.

    Missing detections are simply absent from the trajectory.
    """
    if not seq.frames or not any(seq.frames):
        raise IngestionError("empty skeleton sequence")
    tracks: dict[tuple[int, int], Trajectory] = {}
    for t, frame in enumerate(seq.frames):
        for j in frame:
            key = (j.person, j.label)
            if key not in tracks:
                tracks[key] = Trajectory(j.label, j.person)
            tracks[key].frames.append(t)
            tracks[key].coords.append(tuple(float(c) for c in j.coords))
    return [tracks[k] for k in sorted(tracks)]


def temporal_chunking(traj: Trajectory, chunks: int, total_frames: int) -> np.ndarray:
    """Concatenated per-chunk coordinate means, shape ``(chunks * d,)``.

    Frame ``t`` falls in chunk ``floor(t * chunks / total_frames)``; a chunk
    with no samples takes the mean of the whole trajectory.
    """
    if chunks < 1 or total_frames < 1:
        raise IngestionError("chunk count and total frame count must be >= 1")
    if not traj.frames:
        raise IngestionError(f"trajectory for joint {traj.joint_label} has no samples")
    X = traj.as_array()
    t = np.asarray(traj.frames, dtype=np.int64)
    idx = np.clip((t * chunks) // total_frames, 0, chunks - 1)
    overall = X.mean(axis=0)
    out = []
    for c in range(chunks):
        sel = idx == c
        out.append(X[sel].mean(axis=0) if sel.any() else overall)
    return np.concatenate(out)


def nearest_neighbor_edges(points: np.ndarray, m: int) -> list[tuple[int, int]]:
    """Union-symmetrized m-nearest-neighbor edge list (ties broken by index)."""
    n = points.shape[0]
    if n < 2:
        return []
    diff = points[:, None, :] - points[None, :, :]
    dist = np.sqrt(np.sum(diff * diff, axis=-1))
    edges = set()
    for v in range(n):
        order = [u for u in np.argsort(dist[v], kind="stable") if u != v]
        for u in order[:m]:
            edges.add((min(v, int(u)), max(v, int(u))))
    return sorted(edges)


def build_trajectory_graph(trajectories: Sequence[Trajectory], neighbor_count: int = 3,
                           chunks: int = 4, total_frames: int | None = None,
                           num_labels: int | None = None) -> Graph:
    """One node per trajectory, features from temporal chunking."""
    if not trajectories:
        raise IngestionError("no trajectories to build a graph from")
    if neighbor_count < 1:
        raise IngestionError("neighbor count must be >= 1")
    trajectories = sorted(trajectories, key=lambda tr: (tr.person_index, tr.joint_label))
    if total_frames is None:
        total_frames = max(max(tr.frames) for tr in trajectories) + 1
    feats = np.stack([temporal_chunking(tr, chunks, total_frames) for tr in trajectories])
    centroids = np.stack([tr.centroid() for tr in trajectories])
    labels = tuple(tr.joint_label for tr in trajectories)
    if num_labels is None:
        num_labels = max(labels)
    return Graph(len(trajectories), tuple(nearest_neighbor_edges(centroids, neighbor_count)),
                 feats, labels, num_labels)


@dataclass(frozen=True)
class CsvLayout:
    """Column layout of an SBU-style skeleton file.

    Each row is ``frame, x1, y1, z1, ..., `` with ``persons`` blocks of
    ``joints_per_person * dims`` coordinates; joint labels are 1-based
    positions within a person block.
    """

    joints_per_person: int = 15
    persons: int = 2
    dims: int = 3
    delimiter: str = ","
    has_frame_column: bool = True

    @property
    def row_width(self) -> int:
        return int(self.has_frame_column) + self.persons * self.joints_per_person * self.dims

    @classmethod
    def from_dict(cls, d: dict) -> "CsvLayout":
        known = {k: d[k] for k in ("joints_per_person", "persons", "dims", "delimiter", "has_frame_column") if k in d}
        return cls(**known)


def read_skeleton_csv(path: str | Path, layout: CsvLayout) -> SkeletonSequence:
    """Parse one sequence file; malformed rows raise with ``file:line``."""
    path = Path(path)
    frames: list[list[Joint]] = []
    try:
        handle = path.open(newline="", encoding="utf-8")
    except OSError as exc:
        raise IngestionError(f"{path}: {exc}") from exc
    with handle:
        for lineno, row in enumerate(csv.reader(handle, delimiter=layout.delimiter), 1):
            cells = [c.strip() for c in row]
            while cells and cells[-1] == "":
                cells.pop()
            if not cells or cells[0].startswith("#"):
                continue
            if len(cells) != layout.row_width:
                raise IngestionError(f"{path}:{lineno}: expected {layout.row_width} columns, got {len(cells)}")
            try:
                values = [float(c) for c in cells]
            except ValueError as exc:
                raise IngestionError(f"{path}:{lineno}: {exc}") from None
            coords = values[int(layout.has_frame_column):]
            frame = []
            per = layout.joints_per_person * layout.dims
            for p in range(layout.persons):
                block = coords[p * per:(p + 1) * per]
                for j in range(layout.joints_per_person):
                    xyz = tuple(block[j * layout.dims:(j + 1) * layout.dims])
                    frame.append(Joint(j + 1, xyz, p))
            frames.append(frame)
    if not frames:
        raise IngestionError(f"{path}: no skeleton rows")
    return SkeletonSequence(frames)


def sequence_to_graph(seq: SkeletonSequence, neighbor_count: int = 3, chunks: int = 4,
                      num_labels: int | None = None) -> Graph:
    return build_trajectory_graph(extract_trajectories(seq), neighbor_count, chunks,
                                  total_frames=len(seq.frames), num_labels=num_labels)
