"""Graphs, affinity matrices and the elementary laplacian families.

Everything is dense: the graphs handled here have tens of nodes, so an
n x n ndarray per operator is the simplest representation.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError, DomainError, EmptyGraphError, NumericalError, ParameterError

logger = logging.getLogger(__name__)

AFFINITY_KINDS = ("binary", "binary_gaussian")
LAPLACIAN_FAMILIES = ("unnormalized", "normalized", "random_walk")
SYMMETRIC_FAMILIES = ("unnormalized", "normalized")


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Graph:
    """Undirected node-labeled graph with one feature vector per node.

    ``node_labels`` are 1-based joint identities in ``1..num_labels``.
    """

    n: int
    edges: tuple[tuple[int, int], ...]
    features: np.ndarray
    node_labels: tuple[int, ...]
    num_labels: int

    def __post_init__(self):
        if self.n < 0:
            raise DataError("node count must be non-negative")
        feats = np.asarray(self.features, dtype=np.float64)
        if feats.ndim != 2 or feats.shape[0] != self.n:
            raise DataError(f"features must be an n x p array, got shape {feats.shape} for n={self.n}")
        if self.n and feats.shape[1] < 1:
            raise DataError("feature dimension must be >= 1")
        object.__setattr__(self, "features", _frozen(feats))

        canon = set()
        for u, v in self.edges:
            u, v = int(u), int(v)
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise DataError(f"edge ({u}, {v}) out of range for n={self.n}")
            if u == v:
                raise DataError(f"self-loop on node {u}")
            key = (min(u, v), max(u, v))
            if key in canon:
                raise DataError(f"duplicate edge {key}")
            canon.add(key)
        object.__setattr__(self, "edges", tuple(sorted(canon)))

        labels = tuple(int(x) for x in self.node_labels)
        if len(labels) != self.n:
            raise DataError("exactly one label per node is required")
        if self.num_labels < 1 and self.n:
            raise DataError("num_labels must be >= 1")
        for lab in labels:
            if not 1 <= lab <= self.num_labels:
                raise DataError(f"node label {lab} outside 1..{self.num_labels}")
        object.__setattr__(self, "node_labels", labels)

    @property
    def p(self) -> int:
        return self.features.shape[1]

    def adjacency(self) -> np.ndarray:
        A = np.zeros((self.n, self.n))
        for u, v in self.edges:
            A[u, v] = A[v, u] = 1.0
        return A

    def permuted(self, perm: Sequence[int]) -> "Graph":
        """Relabel nodes so that old node ``i`` becomes new node ``perm[i]``."""
        perm = np.asarray(perm)
        inv = np.argsort(perm)
        return Graph(
            n=self.n,
            edges=tuple((int(perm[u]), int(perm[v])) for u, v in self.edges),
            features=self.features[inv],
            node_labels=tuple(self.node_labels[i] for i in inv),
            num_labels=self.num_labels,
        )


@dataclass(frozen=True)
class AffinityMatrix:
    values: np.ndarray
    kind: str
    power: int
    scale_multiplier: float
    sigma: float | None = None
    notes: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values))


@dataclass(frozen=True)
class LaplacianMatrix:
    values: np.ndarray
    family: str
    rescaled: bool = False
    notes: tuple[str, ...] = ()
    degrees: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values))
        if self.degrees is not None:
            object.__setattr__(self, "degrees", _frozen(self.degrees))

    @property
    def n(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class LaplacianSpec:
    """One entry of the laplacian menu."""

    family: str
    kind: str = "binary"
    power: int = 1
    scale_multiplier: float = 1.0

    def __post_init__(self):
        if self.family not in LAPLACIAN_FAMILIES:
            raise ParameterError(f"unknown laplacian family {self.family!r}")
        if self.kind not in AFFINITY_KINDS:
            raise ParameterError(f"unknown affinity kind {self.kind!r}")
        if int(self.power) < 1:
            raise ParameterError("adjacency power must be >= 1")
        if not self.scale_multiplier > 0:
            raise ParameterError("scale multiplier must be positive")

    @property
    def key(self) -> str:
        return f"{self.family}/{self.kind}/k={self.power}/s={self.scale_multiplier:g}"

    def to_dict(self) -> dict:
        return {"family": self.family, "kind": self.kind, "power": int(self.power),
                "scale_multiplier": float(self.scale_multiplier)}


@dataclass(frozen=True)
class LaplacianStack:
    laplacians: tuple[LaplacianMatrix, ...]
    recipe: tuple[LaplacianSpec, ...]

    def __post_init__(self):
        if len(self.laplacians) != len(self.recipe):
            raise ParameterError("one recipe entry per laplacian is required")
        sizes = {L.n for L in self.laplacians}
        if len(sizes) > 1:
            raise ParameterError(f"laplacians in a stack must share a size, got {sorted(sizes)}")

    def __len__(self) -> int:
        return len(self.laplacians)

    def arrays(self) -> list[np.ndarray]:
        return [L.values for L in self.laplacians]


def mean_pairwise_distance(features: np.ndarray) -> float:
    """Average euclidean distance over all unordered node pairs."""
    n = features.shape[0]
    if n < 2:
        return 0.0
    diff = features[:, None, :] - features[None, :, :]
    dist = np.sqrt(np.sum(diff * diff, axis=-1))
    iu = np.triu_indices(n, 1)
    return float(dist[iu].mean())


def build_affinity(graph: Graph, kind: str = "binary", power: int = 1,
                   scale_multiplier: float = 1.0, rebinarize: bool = False,
                   sigma: float | None = None) -> AffinityMatrix:
    """Affinity matrix of ``graph`` raised to the matrix power ``power``.

    Powers are exact matrix products, so entries of a powered binary
    matrix are walk counts unless ``rebinarize`` is set. For
    ``binary_gaussian`` the edge indicator is multiplied by
    ``exp(-|psi(v) - psi(v')|^2 / (scale_multiplier * sigma))`` where
    ``sigma`` defaults to the graph's mean pairwise feature distance.
    """
    if graph.n == 0:
        raise EmptyGraphError("cannot build an affinity matrix for an empty graph")
    if kind not in AFFINITY_KINDS:
        raise ParameterError(f"unknown affinity kind {kind!r}")
    if int(power) < 1:
        raise ParameterError("adjacency power must be >= 1")
    if not scale_multiplier > 0:
        raise ParameterError("scale multiplier must be positive")

    A = graph.adjacency()
    notes: list[str] = []
    if kind == "binary_gaussian":
        if sigma is None:
            sigma = mean_pairwise_distance(graph.features)
        scale = scale_multiplier * sigma
        if scale > 0:
            X = graph.features
            sq = np.sum((X[:, None, :] - X[None, :, :]) ** 2, axis=-1)
            A = A * np.exp(-sq / scale)
            A = 0.5 * (A + A.T)
        else:
            msg = "gaussian scale is zero (identical features); using binary affinity"
            logger.warning(msg)
            notes.append(msg)

    out = A
    for _ in range(int(power) - 1):
        out = out @ A
    out = 0.5 * (out + out.T)
    if rebinarize and int(power) > 1:
        out = (out > 0).astype(np.float64)
    return AffinityMatrix(out, kind, int(power), float(scale_multiplier), sigma, tuple(notes))


def build_laplacian(A: AffinityMatrix | np.ndarray, family: str) -> LaplacianMatrix:
    """Apply one of the laplacian formulas to a symmetric affinity.

    unnormalized: D - A; normalized: I - D^-1/2 A D^-1/2; random_walk: D^-1 A.
    Nodes with zero degree get zero entries in D^-1/2 and D^-1.
    """
    values = A.values if isinstance(A, AffinityMatrix) else np.asarray(A, dtype=np.float64)
    if values.ndim != 2 or values.shape[0] != values.shape[1]:
        raise ParameterError(f"affinity must be square, got {values.shape}")
    n = values.shape[0]
    d = values.sum(axis=1)
    pos = d > 0
    if family == "unnormalized":
        L = np.diag(d) - values
    elif family == "normalized":
        dis = np.zeros(n)
        dis[pos] = 1.0 / np.sqrt(d[pos])
        L = np.eye(n) - dis[:, None] * values * dis[None, :]
        L = 0.5 * (L + L.T)
    elif family == "random_walk":
        di = np.zeros(n)
        di[pos] = 1.0 / d[pos]
        L = di[:, None] * values
        return LaplacianMatrix(L, family, degrees=d)
    else:
        raise ParameterError(f"unknown laplacian family {family!r}")
    return LaplacianMatrix(L, family)


def eig_sym(M: np.ndarray, asym_tol: float = 1e-6) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (ascending) and orthonormal eigenvectors of a symmetric matrix.

    Inputs asymmetric by more than ``asym_tol`` (relative) are rejected;
    smaller asymmetry is removed by averaging with the transpose.
    """
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ParameterError(f"expected a square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise NumericalError("matrix has non-finite entries")
    asym = np.max(np.abs(M - M.T)) if M.size else 0.0
    if asym > asym_tol * max(1.0, np.max(np.abs(M))):
        raise DomainError(f"matrix is not symmetric (max |M - M^T| = {asym:.3g})")
    M = 0.5 * (M + M.T)
    try:
        w, U = np.linalg.eigh(M)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigendecomposition failed for {M.shape} matrix "
                             f"(norm {np.linalg.norm(M):.3g}): {exc}") from exc
    return w, U


def largest_eigenvalue(L: LaplacianMatrix) -> float:
    """lambda_max used for rescaling.

    Symmetric families: largest eigenvalue. Random walk: largest absolute
    eigenvalue, read off the symmetric similarity D^1/2 (D^-1 A) D^-1/2
    when all degrees are known and positive, else from a general solver.
    """
    M = L.values
    if L.n == 0:
        return 0.0
    if L.family in SYMMETRIC_FAMILIES:
        return float(eig_sym(M)[0][-1])
    d = L.degrees
    if d is not None and np.all(d > 0):
        s = np.sqrt(d)
        S = s[:, None] * M / s[None, :]
        return float(np.max(np.abs(eig_sym(S, asym_tol=1e-8)[0])))
    try:
        vals = np.linalg.eigvals(M)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigenvalue solve failed for random-walk matrix: {exc}") from exc
    return float(np.max(np.abs(vals)))


def rescale_laplacian(L: LaplacianMatrix, tol: float = 1e-12) -> LaplacianMatrix:
    """Map L to 2 L / lambda_max - I."""
    n = L.n
    lam = largest_eigenvalue(L)
    if lam <= tol:
        msg = f"lambda_max = {lam:.3g} <= {tol:g}; rescaled laplacian set to -I"
        logger.warning(msg)
        return LaplacianMatrix(-np.eye(n), L.family, True, L.notes + (msg,), L.degrees)
    return LaplacianMatrix(2.0 * L.values / lam - np.eye(n), L.family, True, L.notes, L.degrees)


def build_stack(graph: Graph, menu: Iterable[LaplacianSpec], rebinarize: bool = False) -> LaplacianStack:
    """Elementary laplacians of one graph, in menu order.

    The gaussian scale is computed once per graph and shared by every
    gaussian entry of the menu.
    """
    menu = tuple(menu)
    if not menu:
        raise ParameterError("laplacian menu is empty")
    sigma = mean_pairwise_distance(graph.features)
    laps = []
    for spec in menu:
        A = build_affinity(graph, spec.kind, spec.power, spec.scale_multiplier,
                           rebinarize=rebinarize, sigma=sigma)
        laps.append(build_laplacian(A, spec.family))
    return LaplacianStack(tuple(laps), menu)


# -- text format -------------------------------------------------------------

def format_graph(graph: Graph) -> str:
    lines = [f"{graph.n} {graph.p} {graph.num_labels}"]
    for lab, row in zip(graph.node_labels, graph.features):
        lines.append(" ".join([str(lab)] + [repr(float(x)) for x in row]))
    lines.extend(f"{u} {v}" for u, v in graph.edges)
    return "\n".join(lines) + "\n"


def parse_graph(text: str, source: str = "<string>") -> Graph:
    """Parse the ``n p L`` / node rows / edge rows text format."""
    rows: list[tuple[int, list[str]]] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if line:
            rows.append((lineno, line.split()))
    if not rows:
        raise DataError(f"{source}: empty graph file")
    lineno, head = rows[0]
    try:
        n, p, num_labels = (int(x) for x in head)
    except ValueError:
        raise DataError(f"{source}:{lineno}: header must be 'n p L'") from None
    if len(rows) < 1 + n:
        raise DataError(f"{source}: expected {n} node rows, found {len(rows) - 1}")
    labels, feats = [], []
    for lineno, tok in rows[1:1 + n]:
        if len(tok) != p + 1:
            raise DataError(f"{source}:{lineno}: expected label + {p} features, got {len(tok)} fields")
        try:
            labels.append(int(tok[0]))
            feats.append([float(x) for x in tok[1:]])
        except ValueError as exc:
            raise DataError(f"{source}:{lineno}: {exc}") from None
    edges = []
    for lineno, tok in rows[1 + n:]:
        if len(tok) != 2:
            raise DataError(f"{source}:{lineno}: edge rows are 'u v'")
        try:
            edges.append((int(tok[0]), int(tok[1])))
        except ValueError as exc:
            raise DataError(f"{source}:{lineno}: {exc}") from None
    X = np.array(feats, dtype=np.float64).reshape(n, p)
    try:
        return Graph(n, tuple(edges), X, tuple(labels), num_labels)
    except DataError as exc:
        raise DataError(f"{source}: {exc}") from None


def write_graph(graph: Graph, path: str | Path) -> None:
    Path(path).write_text(format_graph(graph), encoding="utf-8")


def read_graph(path: str | Path) -> Graph:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"{path}: {exc}") from exc
    return parse_graph(text, str(path))
