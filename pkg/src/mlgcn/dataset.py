"""Labelled graph collections: manifests on disk or the synthetic task."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from . import synthetic
from .errors import DataError
from .graph import Graph, read_graph

MANIFEST_FIELDS = ("graph_file", "class", "n_nodes", "n_frames", "source", "split")


@dataclass
class GraphDataset:
    graphs: list[Graph]
    classes: list[int]
    train_idx: list[int]
    test_idx: list[int]
    class_names: list[str]

    @property
    def num_classes(self) -> int:
        return len(self.class_names)

    @property
    def num_labels(self) -> int:
        return max(g.num_labels for g in self.graphs)

    @property
    def p(self) -> int:
        dims = {g.p for g in self.graphs}
        if len(dims) != 1:
            raise DataError(f"graphs disagree on feature dimension: {sorted(dims)}")
        return dims.pop()

    def subset(self, which: str) -> list[tuple[Graph, int]]:
        idx = {"train": self.train_idx, "test": self.test_idx, "all": range(len(self.graphs))}[which]
        return [(self.graphs[i], self.classes[i]) for i in idx]


def random_split(n: int, test_fraction: float, seed: int) -> tuple[list[int], list[int]]:
    perm = np.random.default_rng(seed).permutation(n)
    n_test = int(round(test_fraction * n))
    test = sorted(int(i) for i in perm[:n_test])
    train = sorted(int(i) for i in perm[n_test:])
    return train, test


def synthetic_dataset(n_graphs: int = 200, seed: int = 0, test_fraction: float = 0.2,
                      split_seed: int | None = None, **kwargs) -> GraphDataset:
    pairs = synthetic.generate(n_graphs, seed, **kwargs)
    graphs = [g for g, _ in pairs]
    classes = [c for _, c in pairs]
    train, test = random_split(len(graphs), test_fraction, seed if split_seed is None else split_seed)
    return GraphDataset(graphs, classes, train, test, ["0", "1"])


def read_manifest(path: str | Path) -> list[dict[str, str]]:
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise DataError(f"{path}: {exc}") from exc
    for lineno, row in enumerate(rows, 2):
        if not row.get("graph_file") or row.get("class") in (None, ""):
            raise DataError(f"{path}:{lineno}: manifest rows need graph_file and class")
    return rows


def write_manifest(path: str | Path, rows: list[dict[str, Any]]) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=list(MANIFEST_FIELDS), extrasaction="ignore", lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: row.get(k, "") for k in MANIFEST_FIELDS})


def manifest_dataset(path: str | Path, test_fraction: float = 0.2, split_seed: int = 0,
                     class_names: list[str] | None = None) -> GraphDataset:
    """Graphs listed in a manifest CSV; paths are relative to the manifest.

    A ``split`` column with ``train`` / ``test`` values overrides the
    seeded random split.
    """
    path = Path(path)
    rows = read_manifest(path)
    if not rows:
        raise DataError(f"{path}: manifest lists no graphs")
    names = class_names or sorted({r["class"] for r in rows}, key=_natural_key)
    lookup = {name: i for i, name in enumerate(names)}
    graphs, classes = [], []
    for row in rows:
        if row["class"] not in lookup:
            raise DataError(f"{path}: class {row['class']!r} not in the model's class list")
        graphs.append(read_graph(path.parent / row["graph_file"]))
        classes.append(lookup[row["class"]])
    splits = [r.get("split", "") or "" for r in rows]
    if any(splits):
        train = [i for i, s in enumerate(splits) if s == "train"]
        test = [i for i, s in enumerate(splits) if s == "test"]
    else:
        train, test = random_split(len(graphs), test_fraction, split_seed)
    return GraphDataset(graphs, classes, train, test, names)


def load_dataset(data: dict[str, Any], class_names: list[str] | None = None) -> GraphDataset:
    data = dict(data)
    test_fraction = float(data.get("test_fraction", 0.2))
    split_seed = data.get("split_seed")
    if "manifest" in data:
        return manifest_dataset(data["manifest"], test_fraction, int(split_seed or 0), class_names)
    if "synthetic" in data:
        opts = dict(data["synthetic"] or {})
        return synthetic_dataset(test_fraction=test_fraction, split_seed=split_seed, **opts)
    raise DataError("data section needs either 'manifest' or 'synthetic'")


def _natural_key(s: str):
    return (0, int(s), "") if s.lstrip("-").isdigit() else (1, 0, s)
