"""Node expansion over label-partitioned r-hop neighborhoods, and readouts.

The expansion of node v concatenates its own convolved feature with, for
each joint label l, the mean feature over its r-hop neighbors carrying
label l (zeros when there are none). Summing expanded nodes gives a graph
vector invariant to node order.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import EmptyGraphError, ParameterError
from .graph import Graph

POOLING_MODES = ("none", "gp", "featprop", "featprop_gp", "expand_gp")


@dataclass(frozen=True)
class NeighborhoodIndex:
    """Hop distances (``-1`` = farther than ``radius``) plus node labels."""

    hops: np.ndarray
    labels: tuple[int, ...]
    radius: int
    num_labels: int

    @property
    def n(self) -> int:
        return len(self.labels)

    def neighbors(self, v: int, radius: int | None = None) -> set[int]:
        r = self.radius if radius is None else radius
        if r > self.radius:
            raise ParameterError(f"index only covers radius {self.radius}")
        row = self.hops[v]
        return {int(u) for u in np.flatnonzero((row >= 1) & (row <= r))}

    def subset(self, v: int, label: int, radius: int | None = None) -> set[int]:
        return {u for u in self.neighbors(v, radius) if self.labels[u] == label}

    def label_mean_operators(self, radius: int | None = None) -> np.ndarray:
        """Stack ``P`` of shape ``(L, n, n)`` with ``(P[l] @ X)[v]`` the mean of X over N_r^{l+1}(v)."""
        r = self.radius if radius is None else radius
        n = self.n
        lab = np.asarray(self.labels)
        within = (self.hops >= 1) & (self.hops <= r)
        P = np.zeros((self.num_labels, n, n))
        for l in range(self.num_labels):
            mask = within & (lab[None, :] == l + 1)
            counts = mask.sum(axis=1, keepdims=True)
            P[l] = np.where(counts > 0, mask / np.maximum(counts, 1), 0.0)
        return P

    def propagation_operator(self, radius: int | None = None) -> np.ndarray:
        """Row-normalized averaging over N_r(v) together with v itself."""
        r = self.radius if radius is None else radius
        mask = (self.hops >= 0) & (self.hops <= r)
        return mask / mask.sum(axis=1, keepdims=True)


def build_neighborhoods(graph: Graph, radius: int = 1, num_labels: int | None = None) -> NeighborhoodIndex:
    """Breadth-first hop distances up to ``radius`` from every node."""
    if radius < 1:
        raise ParameterError("neighborhood radius must be >= 1")
    L = graph.num_labels if num_labels is None else num_labels
    if L < 1:
        raise ParameterError("number of labels must be >= 1")
    if graph.n and max(graph.node_labels) > L:
        raise ParameterError(f"graph uses label {max(graph.node_labels)} beyond L={L}")
    n = graph.n
    adj: list[list[int]] = [[] for _ in range(n)]
    for u, v in graph.edges:
        adj[u].append(v)
        adj[v].append(u)
    hops = np.full((n, n), -1, dtype=np.int64)
    for s in range(n):
        hops[s, s] = 0
        queue = deque([s])
        while queue:
            u = queue.popleft()
            if hops[s, u] == radius:
                continue
            for w in adj[u]:
                if hops[s, w] < 0:
                    hops[s, w] = hops[s, u] + 1
                    queue.append(w)
    hops.setflags(write=False)
    return NeighborhoodIndex(hops, graph.node_labels, radius, L)


def expand(conv_out: np.ndarray, index: NeighborhoodIndex | np.ndarray) -> np.ndarray:
    """``[X, P_1 X, ..., P_L X]`` of shape ``(n, F * (L + 1))``."""
    P = index.label_mean_operators() if isinstance(index, NeighborhoodIndex) else index
    X = np.asarray(conv_out, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != P.shape[1]:
        raise ParameterError(f"conv output has shape {X.shape}, neighborhoods cover {P.shape[1]} nodes")
    return np.concatenate([X] + [P[l] @ X for l in range(P.shape[0])], axis=1)


def expand_backward(grad: np.ndarray, P: np.ndarray) -> np.ndarray:
    F = grad.shape[1] // (P.shape[0] + 1)
    dX = grad[:, :F].copy()
    for l in range(P.shape[0]):
        dX += P[l].T @ grad[:, (l + 1) * F:(l + 2) * F]
    return dX


def global_average_pool(expanded: np.ndarray, mean: bool = False) -> np.ndarray:
    """Sum of node rows (``mean=True`` divides by the node count)."""
    expanded = np.asarray(expanded, dtype=np.float64)
    if expanded.ndim != 2 or expanded.shape[0] == 0:
        raise EmptyGraphError("cannot pool an empty graph")
    out = expanded.sum(axis=0)
    return out / expanded.shape[0] if mean else out


@dataclass
class Readout:
    """Turns per-node conv features into one graph vector, for every pooling mode.

    ``none`` and ``featprop`` have no pooling: node rows are laid out in
    stored node order and zero-padded to ``max_nodes`` slots.
    """

    mode: str = "expand_gp"
    radius: int = 1
    num_labels: int = 1
    mean: bool = False
    max_nodes: int = 32
    single_label: bool = False

    def __post_init__(self):
        if self.mode not in POOLING_MODES:
            raise ParameterError(f"unknown pooling mode {self.mode!r}; choose from {POOLING_MODES}")

    def output_dim(self, F: int) -> int:
        if self.mode == "expand_gp":
            return F * (1 + (1 if self.single_label else self.num_labels))
        if self.mode in ("gp", "featprop_gp"):
            return F
        return F * self.max_nodes

    def operators(self, graph: Graph) -> np.ndarray | None:
        """Precomputable per-graph linear operator (None for ``gp`` / ``none``)."""
        if self.mode in ("gp", "none"):
            return None
        if self.mode == "expand_gp" and self.single_label:
            graph = Graph(graph.n, graph.edges, graph.features, (1,) * graph.n, 1)
            L = 1
        else:
            L = self.num_labels
        index = build_neighborhoods(graph, self.radius, L)
        if self.mode == "expand_gp":
            return index.label_mean_operators()
        return index.propagation_operator()

    def forward(self, X: np.ndarray, ops: np.ndarray | None) -> np.ndarray:
        if X.shape[0] == 0:
            raise EmptyGraphError("cannot pool an empty graph")
        if self.mode == "expand_gp":
            return global_average_pool(expand(X, ops), self.mean)
        if self.mode == "gp":
            return global_average_pool(X, self.mean)
        if self.mode == "featprop_gp":
            return global_average_pool(ops @ X, self.mean)
        Y = X if self.mode == "none" else ops @ X
        return self._flatten(Y)

    def backward(self, grad: np.ndarray, X: np.ndarray, ops: np.ndarray | None) -> np.ndarray:
        n = X.shape[0]
        scale = 1.0 / n if self.mean else 1.0
        if self.mode == "expand_gp":
            G = np.broadcast_to(grad * scale, (n, grad.shape[0]))
            return expand_backward(np.ascontiguousarray(G), ops)
        if self.mode == "gp":
            return np.tile(grad * scale, (n, 1))
        if self.mode == "featprop_gp":
            return ops.T @ np.tile(grad * scale, (n, 1))
        F = X.shape[1]
        G = grad.reshape(self.max_nodes, F)[: min(n, self.max_nodes)]
        G = np.vstack([G, np.zeros((n - G.shape[0], F))])
        return G if self.mode == "none" else ops.T @ G

    def _flatten(self, Y: np.ndarray) -> np.ndarray:
        n, F = Y.shape
        out = np.zeros((self.max_nodes, F))
        m = min(n, self.max_nodes)
        out[:m] = Y[:m]
        return out.reshape(-1)
