"""Training, evaluation and gradient checking."""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .config import RunConfig, TrainConfig
from .dataset import GraphDataset
from .errors import DataError, NumericalError, UsageError
from .graph import Graph, LaplacianSpec
from .model import (Architecture, GradcheckReport, ModelState, Sample, check_gradients, cross_entropy,
                    forward, loss_and_backward, multilap_sizes)
from .multilap import SimplexVJP, softmax_vjp

logger = logging.getLogger(__name__)

METRIC_FIELDS = ("epoch", "train_loss", "train_acc", "test_acc", "lr")


def build_architecture(cfg: TrainConfig, menu: Sequence[LaplacianSpec], p_in: int,
                       num_classes: int, num_labels: int) -> Architecture:
    menu = tuple(menu)
    return Architecture(
        menu=menu,
        p_in=p_in,
        num_classes=num_classes,
        num_labels=num_labels,
        multilap_sizes=multilap_sizes(len(menu), cfg.multilap_depth, cfg.multilap_hidden),
        activation=cfg.activation,
        leak=cfg.leak,
        cheb_order=cfg.cheb_order,
        conv_filters=tuple(cfg.conv_filters),
        pooling=cfg.pooling,
        radius=cfg.radius,
        single_label=cfg.single_label,
        readout_mean=cfg.readout_mean,
        max_nodes=cfg.max_nodes,
        rescale_after_multilap=cfg.rescale_after_multilap,
        rebinarize=cfg.rebinarize,
    )


def prepare(pairs: Sequence[tuple[Graph, int]], arch: Architecture) -> list[Sample]:
    return [Sample.prepare(g, arch, c) for g, c in pairs]


def sgd_step(state: ModelState, lr: float, momentum: float = 0.0) -> None:
    """p <- p - lr * grad (heavy-ball velocity when ``momentum`` > 0); zeroes the grads."""
    for key, g in state.grads.items():
        if not np.all(np.isfinite(g)):
            raise NumericalError(f"non-finite gradient in {key} at step {state.step}")
    for key, p in state.params.items():
        g = state.grads[key]
        if momentum:
            v = state.velocity.get(key)
            v = g.copy() if v is None else momentum * v + g
            state.velocity[key] = v
            g = v
        p -= lr * g
    state.zero_grad()
    state.step += 1


@dataclass
class EvalReport:
    num_classes: int
    confusion: np.ndarray
    loss: float

    @property
    def accuracy(self) -> float:
        total = self.confusion.sum()
        if total == 0:
            raise DataError("cannot evaluate on an empty dataset")
        return float(np.trace(self.confusion) / total)

    def per_class(self) -> list[float | None]:
        out = []
        for c in range(self.num_classes):
            row = self.confusion[c].sum()
            out.append(float(self.confusion[c, c] / row) if row else None)
        return out

    @property
    def mean_class_accuracy(self) -> float:
        vals = [a for a in self.per_class() if a is not None]
        if not vals:
            raise DataError("cannot evaluate on an empty dataset")
        return float(np.mean(vals))


def evaluate(samples: Sequence[Sample], state: ModelState) -> EvalReport:
    if not samples:
        raise DataError("cannot evaluate on an empty dataset")
    C = state.arch.num_classes
    confusion = np.zeros((C, C), dtype=np.int64)
    total = 0.0
    for s in samples:
        logits, _ = forward(s, state)
        total += cross_entropy(logits, s.label)
        confusion[s.label, int(np.argmax(logits))] += 1
    return EvalReport(C, confusion, total / len(samples))


@dataclass
class TrainResult:
    state: ModelState
    history: list[dict]
    train: list[Sample] = field(repr=False)
    test: list[Sample] = field(repr=False)


def train(dataset: GraphDataset, cfg: TrainConfig, menu: Sequence[LaplacianSpec],
          metrics_path: str | Path | None = None) -> TrainResult:
    """Mini-batch SGD over graphs; one JSONL record per epoch.

    Each graph in a batch is processed on its own and the batch gradient
    is the mean of per-graph gradients. Shuffling uses its own generator
    seeded from ``cfg.seed``, so runs are reproducible bit for bit.
    """
    arch = build_architecture(cfg, menu, dataset.p, dataset.num_classes, dataset.num_labels)
    train_set = prepare(dataset.subset("train"), arch)
    test_set = prepare(dataset.subset("test"), arch)
    if not train_set:
        raise DataError("training split is empty")
    state = ModelState.init(arch, cfg.seed)
    shuffle_rng = np.random.default_rng([cfg.seed, 1])
    history = []
    sink = None
    if metrics_path is not None:
        Path(metrics_path).parent.mkdir(parents=True, exist_ok=True)
        sink = open(metrics_path, "w", encoding="utf-8")
    try:
        for epoch in range(cfg.epochs):
            t0 = time.perf_counter()
            lr = cfg.learning_rate_at(epoch)
            order = shuffle_rng.permutation(len(train_set))
            losses = []
            for start in range(0, len(order), cfg.batch_size):
                batch = [train_set[i] for i in order[start:start + cfg.batch_size]]
                w = 1.0 / len(batch)
                for s in batch:
                    logits, cache = forward(s, state)
                    losses.append(loss_and_backward(logits, s.label, cache, state, weight=w))
                try:
                    sgd_step(state, lr, cfg.momentum)
                except NumericalError as exc:
                    raise NumericalError(f"epoch {epoch}: {exc}") from exc
            record = {
                "epoch": epoch,
                "train_loss": float(np.mean(losses)),
                "train_acc": evaluate(train_set, state).accuracy,
                "test_acc": evaluate(test_set, state).accuracy if test_set else None,
                "lr": lr,
            }
            wall_ms = (time.perf_counter() - t0) * 1e3
            if cfg.record_wall_time:
                record["wall_ms"] = wall_ms
            logger.info("epoch %d loss %.4f train %.3f test %s (%.0f ms)", epoch, record["train_loss"],
                        record["train_acc"], record["test_acc"], wall_ms)
            history.append(record)
            if sink is not None:
                sink.write(json.dumps(record) + "\n")
                sink.flush()
    finally:
        if sink is not None:
            sink.close()
    return TrainResult(state, history, train_set, test_set)


def run(config: RunConfig, dataset: GraphDataset, metrics_path=None) -> TrainResult:
    return train(dataset, config.train, config.menu, metrics_path)


# -- gradient check harness -----------------------------------------------------

def random_instance(rng: np.random.Generator, n: int = 5, num_labels: int = 2, p: int = 3) -> Graph:
    """Connected random graph: a random spanning tree plus a few extra edges."""
    order = rng.permutation(n)
    edges = {tuple(sorted((int(order[i]), int(order[rng.integers(0, i)])))) for i in range(1, n)}
    for _ in range(n // 2):
        u, v = (int(x) for x in rng.choice(n, 2, replace=False))
        edges.add((min(u, v), max(u, v)))
    labels = [(i % num_labels) + 1 for i in range(n)]
    rng.shuffle(labels)
    return Graph(n, tuple(sorted(edges)), rng.standard_normal((n, p)), tuple(labels), num_labels)


def gradcheck(cfg: TrainConfig, menu: Sequence[LaplacianSpec], seed: int = 0, n: int = 5,
              num_labels: int = 2, num_classes: int = 3, p: int = 3, h: float = 1e-6,
              tolerance: float = 1e-5, simplex_vjp: SimplexVJP = softmax_vjp) -> GradcheckReport:
    """Finite-difference check of every parameter group on a small random graph."""
    if n > 8:
        raise UsageError("gradcheck instances are limited to 8 nodes")
    rng = np.random.default_rng(seed)
    graph = random_instance(rng, n, num_labels, p)
    arch = build_architecture(cfg, menu, p, num_classes, num_labels)
    state = ModelState.init(arch, seed)
    sample = Sample.prepare(graph, arch, int(rng.integers(0, num_classes)))
    return check_gradients([sample], state, h=h, tolerance=tolerance, simplex_vjp=simplex_vjp)
