"""Two-class synthetic graph task.

Every graph has 10-20 nodes scattered in the plane, linked to their 3
nearest neighbors, and each node carries one of 3 joint labels. Node
features are drawn around a cluster center that depends on the node's
label *and* the graph's class: class 0 places label-1 nodes at +a and
label-2 nodes at -a along the first axis, class 1 swaps them. The
multiset of the first two clusters is the same in both classes, so a
readout has to keep track of which label sits where to tell the classes
apart. A small shift of the label-3 cluster in class 1 leaves a weak
label-blind cue as well.
"""

from __future__ import annotations

import numpy as np

from .graph import Graph
from .skeleton import nearest_neighbor_edges


def cluster_centers(num_labels: int, dim: int, separation: float, shift: float = 0.25) -> np.ndarray:
    """centers[y, l] for class y and 0-based label l."""
    centers = np.zeros((2, num_labels, dim))
    centers[0, 0, 0] = separation
    centers[0, 1, 0] = -separation
    centers[1, 0, 0] = -separation
    centers[1, 1, 0] = separation
    if num_labels > 2 and dim > 1:
        centers[:, 2:, 1] = separation
        centers[1, 2:, 1] += shift
    return centers


def make_graph(rng: np.random.Generator, cls: int, num_labels: int = 3, dim: int = 4,
               nodes: tuple[int, int] = (10, 20), neighbors: int = 3,
               separation: float = 1.0, noise: float = 0.5, shift: float = 0.25) -> Graph:
    n = int(rng.integers(nodes[0], nodes[1] + 1))
    pos = rng.uniform(0.0, 1.0, size=(n, 2))
    labels = rng.integers(1, num_labels + 1, size=n)
    centers = cluster_centers(num_labels, dim, separation, shift)
    feats = centers[cls, labels - 1] + noise * rng.standard_normal((n, dim))
    return Graph(n, tuple(nearest_neighbor_edges(pos, neighbors)), feats,
                 tuple(int(l) for l in labels), num_labels)


def generate(n_graphs: int = 200, seed: int = 0, **kwargs) -> list[tuple[Graph, int]]:
    """Balanced list of (graph, class) pairs."""
    rng = np.random.default_rng(seed)
    return [(make_graph(rng, i % 2, **kwargs), i % 2) for i in range(n_graphs)]
