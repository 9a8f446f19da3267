import numpy as np
import pytest

from mlgcn.graph import Graph


def path_graph(n: int = 3, features=None, labels=None, num_labels: int = 1) -> Graph:
    feats = np.arange(n, dtype=float)[:, None] if features is None else np.asarray(features, float)
    labels = tuple([1] * n) if labels is None else tuple(labels)
    return Graph(n, tuple((i, i + 1) for i in range(n - 1)), feats, labels, num_labels)


def random_graph(rng: np.random.Generator, n: int, p: int = 3, num_labels: int = 2,
                 extra: float = 0.3) -> Graph:
    """Connected random graph (spanning tree plus random extra edges)."""
    edges = {(int(rng.integers(0, i)), i) for i in range(1, n)}
    for u in range(n):
        for v in range(u + 1, n):
            if rng.random() < extra:
                edges.add((u, v))
    labels = tuple(int(x) for x in rng.integers(1, num_labels + 1, size=n))
    return Graph(n, tuple(sorted(edges)), rng.standard_normal((n, p)), labels, num_labels)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
