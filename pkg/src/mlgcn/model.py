"""Model assembly: multi-laplacian -> rescale -> Chebyshev conv -> readout -> softmax.

Parameters and their gradient buffers live in flat dicts keyed by
``multilap/layer{l}``, ``cheb/{i}/theta``, ``fc/W`` and ``fc/b``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg

from .chebconv import ChebFilterBank, cheb_conv_backward, cheb_conv_forward
from .errors import MLGCNError, NumericalError, ParameterError, StageError, UsageError
from .graph import Graph, LaplacianSpec, build_stack
from .multilap import MultiLapParams, SimplexVJP, multilap_backward, multilap_forward, softmax_vjp
from .pooling import Readout

logger = logging.getLogger(__name__)

RESCALE_TOL = 1e-12


@dataclass(frozen=True)
class Architecture:
    menu: tuple[LaplacianSpec, ...]
    p_in: int
    num_classes: int
    num_labels: int
    multilap_sizes: tuple[int, ...]
    activation: str = "leaky_softplus"
    leak: float = 0.01
    cheb_order: int = 4
    conv_filters: tuple[int, ...] = (32,)
    pooling: str = "expand_gp"
    radius: int = 1
    single_label: bool = False
    readout_mean: bool = False
    max_nodes: int = 32
    rescale_after_multilap: bool = True
    rebinarize: bool = False

    def __post_init__(self):
        if not self.menu:
            raise ParameterError("laplacian menu is empty")
        if self.multilap_sizes[0] != len(self.menu):
            raise ParameterError(f"multi-laplacian input size {self.multilap_sizes[0]} "
                                 f"does not match menu length {len(self.menu)}")
        if self.num_classes < 1:
            raise ParameterError("need at least one class")
        if self.cheb_order < 1:
            raise ParameterError("Chebyshev order must be >= 1")

    def readout(self) -> Readout:
        return Readout(self.pooling, self.radius, self.num_labels, self.readout_mean,
                       self.max_nodes, self.single_label)

    @property
    def feature_dim(self) -> int:
        return self.readout().output_dim(self.conv_filters[-1])

    def to_dict(self) -> dict:
        return {
            "menu": [s.to_dict() for s in self.menu],
            "p_in": self.p_in,
            "num_classes": self.num_classes,
            "num_labels": self.num_labels,
            "multilap_sizes": list(self.multilap_sizes),
            "activation": self.activation,
            "leak": self.leak,
            "cheb_order": self.cheb_order,
            "conv_filters": list(self.conv_filters),
            "pooling": self.pooling,
            "radius": self.radius,
            "single_label": self.single_label,
            "readout_mean": self.readout_mean,
            "max_nodes": self.max_nodes,
            "rescale_after_multilap": self.rescale_after_multilap,
            "rebinarize": self.rebinarize,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Architecture":
        d = dict(d)
        d["menu"] = tuple(LaplacianSpec(**s) for s in d["menu"])
        d["multilap_sizes"] = tuple(d["multilap_sizes"])
        d["conv_filters"] = tuple(d["conv_filters"])
        return cls(**d)


def multilap_sizes(menu_len: int, depth: int, hidden: int) -> tuple[int, ...]:
    """(n_1, hidden, ..., hidden, 1) with ``depth`` entries in total."""
    if depth < 1:
        raise ParameterError("multi-laplacian depth must be >= 1")
    if depth == 1:
        if menu_len != 1:
            raise ParameterError("a depth-1 multi-laplacian passes a single laplacian through; "
                                 f"menu has {menu_len}")
        return (1,)
    return (menu_len,) + (hidden,) * (depth - 2) + (1,)


@dataclass
class ModelState:
    arch: Architecture
    params: dict[str, np.ndarray]
    grads: dict[str, np.ndarray] = field(default_factory=dict)
    seed: int = 0
    step: int = 0
    velocity: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if not self.grads:
            self.zero_grad()

    def zero_grad(self) -> None:
        self.grads = {k: np.zeros_like(v) for k, v in self.params.items()}

    def multilap_params(self) -> MultiLapParams:
        a = self.arch
        w_hat = [self.params[f"multilap/layer{l}"] for l in range(len(a.multilap_sizes) - 1)]
        return MultiLapParams(a.multilap_sizes, w_hat, a.activation, a.leak)

    def banks(self) -> list[ChebFilterBank]:
        return [ChebFilterBank(self.params[f"cheb/{i}/theta"]) for i in range(len(self.arch.conv_filters))]

    @classmethod
    def init(cls, arch: Architecture, seed: int = 0) -> "ModelState":
        rng = np.random.default_rng([seed, 0])
        params: dict[str, np.ndarray] = {}
        ml = MultiLapParams.init(arch.multilap_sizes, arch.activation, arch.leak, rng)
        for l, W in enumerate(ml.w_hat):
            params[f"multilap/layer{l}"] = W
        p = arch.p_in
        for i, F in enumerate(arch.conv_filters):
            params[f"cheb/{i}/theta"] = ChebFilterBank.init(p, F, arch.cheb_order, rng).theta
            p = F
        D = arch.feature_dim
        params["fc/W"] = rng.standard_normal((D, arch.num_classes)) / np.sqrt(D)
        params["fc/b"] = np.zeros(arch.num_classes)
        return cls(arch, params, seed=seed)


@dataclass
class Sample:
    """A graph with its frozen per-graph inputs (laplacian stack, pooling operators)."""

    graph: Graph
    stack: np.ndarray
    ops: np.ndarray | None
    label: int = -1

    @classmethod
    def prepare(cls, graph: Graph, arch: Architecture, label: int = -1) -> "Sample":
        if graph.p != arch.p_in:
            raise ParameterError(f"graph features have dimension {graph.p}, model expects {arch.p_in}")
        stack = build_stack(graph, arch.menu, arch.rebinarize)
        return cls(graph, np.asarray(stack.arrays()), arch.readout().operators(graph), label)


def top_eigenpair_grad(M: np.ndarray) -> tuple[float, np.ndarray]:
    """Eigenvalue with the largest real part and its derivative dlambda/dM.

    Symmetric M: lambda = max eigenvalue, gradient u u^T. Otherwise the
    gradient is Re(conj(v) u^T) / (v^H u) from left/right eigenvectors.
    """
    n = M.shape[0]
    scale = max(1.0, float(np.max(np.abs(M))))
    if np.max(np.abs(M - M.T)) <= 1e-12 * scale:
        try:
            w, U = np.linalg.eigh(0.5 * (M + M.T))
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"eigendecomposition of learned laplacian failed: {exc}") from exc
        u = U[:, -1]
        # Rayleigh quotient: second-order accurate in u, and smoother under
        # tiny perturbations of M than the solver's eigenvalue.
        return float(u @ (M @ u)), np.outer(u, u)
    try:
        w, vl, vr = scipy.linalg.eig(M, left=True, right=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(f"eigendecomposition of learned laplacian failed: {exc}") from exc
    i = int(np.argmax(w.real))
    u, v = vr[:, i], vl[:, i]
    denom = np.vdot(v, u)
    if abs(denom) < 1e-14 * n:
        raise NumericalError("top eigenvalue of learned laplacian is defective")
    lam = np.vdot(v, M @ u) / denom
    return float(lam.real), np.real(np.outer(np.conj(v), u) / denom)


@dataclass
class ForwardCache:
    sample: Sample
    multilap: object
    L_final: np.ndarray
    lam: float | None
    dlam: np.ndarray | None
    convs: list
    conv_outputs: list[np.ndarray]
    pooled: np.ndarray
    logits: np.ndarray
    used: bool = False


def _stage(name: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except StageError:
        raise
    except (MLGCNError, ValueError, FloatingPointError, np.linalg.LinAlgError) as exc:
        raise StageError(name, exc) from exc


def forward(sample: Sample, state: ModelState, check_spectrum: bool = False) -> tuple[np.ndarray, ForwardCache]:
    """Class logits for one prepared graph."""
    arch = state.arch
    L, ml_cache = _stage("multilap", multilap_forward, sample.stack, state.multilap_params())
    lam = dlam = None
    Lc = L
    if arch.rescale_after_multilap:
        lam, dlam = _stage("rescale", top_eigenpair_grad, L)
        n = L.shape[0]
        if lam <= RESCALE_TOL:
            logger.warning("learned laplacian has lambda_max = %.3g; rescaled to -I", lam)
            Lc = -np.eye(n)
        else:
            Lc = 2.0 * L / lam - np.eye(n)
    H = sample.graph.features
    convs, outs = [], []
    for bank in state.banks():
        H, cc = _stage("chebconv", cheb_conv_forward, Lc, bank, H, check_spectrum)
        convs.append(cc)
        outs.append(H)
    readout = arch.readout()
    h = _stage("readout", readout.forward, H, sample.ops)
    logits = h @ state.params["fc/W"] + state.params["fc/b"]
    return logits, ForwardCache(sample, ml_cache, L, lam, dlam, convs, outs, h, logits)


def log_softmax(z: np.ndarray) -> np.ndarray:
    z = z - np.max(z)
    return z - np.log(np.sum(np.exp(z)))


def cross_entropy(logits: np.ndarray, label: int) -> float:
    if not 0 <= label < logits.shape[0]:
        raise UsageError(f"label {label} outside [0, {logits.shape[0]})")
    return float(-log_softmax(logits)[label])


def loss_and_backward(logits: np.ndarray, label: int, cache: ForwardCache, state: ModelState,
                      weight: float = 1.0, simplex_vjp: SimplexVJP = softmax_vjp) -> float:
    """Cross-entropy loss; adds ``weight * dJ/dparam`` into ``state.grads``."""
    if cache.used:
        raise UsageError("forward cache already consumed by a backward pass")
    cache.used = True
    loss = cross_entropy(logits, label)
    arch = state.arch
    g = np.exp(log_softmax(logits))
    g[label] -= 1.0
    g *= weight
    grads = state.grads
    grads["fc/W"] += np.outer(cache.pooled, g)
    grads["fc/b"] += g
    dh = state.params["fc/W"] @ g

    H = cache.conv_outputs[-1]
    dH = arch.readout().backward(dh, H, cache.sample.ops)
    dLc = np.zeros_like(cache.L_final)
    for i in reversed(range(len(cache.convs))):
        dtheta, dH, dL = cheb_conv_backward(cache.convs[i], dH)
        grads[f"cheb/{i}/theta"] += dtheta
        dLc += dL

    if arch.rescale_after_multilap and cache.lam > RESCALE_TOL:
        lam = cache.lam
        dL = (2.0 / lam) * dLc - (2.0 / lam ** 2) * np.sum(dLc * cache.L_final) * cache.dlam
    elif arch.rescale_after_multilap:
        dL = np.zeros_like(dLc)
    else:
        dL = dLc
    wgrads, _ = multilap_backward(cache.multilap, dL, simplex_vjp)
    for l, gw in enumerate(wgrads):
        grads[f"multilap/layer{l}"] += gw
    for k, v in grads.items():
        if not np.all(np.isfinite(v)):
            raise NumericalError(f"non-finite gradient in {k}")
    return loss


def predict(sample: Sample, state: ModelState) -> int:
    logits, _ = forward(sample, state)
    return int(np.argmax(logits))


def batch_loss(samples: Sequence[Sample], state: ModelState) -> float:
    total = 0.0
    for s in samples:
        logits, _ = forward(s, state)
        total += cross_entropy(logits, s.label)
    return total / len(samples)


# -- gradient check ------------------------------------------------------------

@dataclass
class GradcheckReport:
    errors: dict[str, float]
    tolerance: float

    @property
    def passed(self) -> bool:
        return all(e <= self.tolerance for e in self.errors.values())

    def worst(self) -> float:
        return max(self.errors.values())


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """max |a - n| / max(max |a|, max |n|); zero when both vanish."""
    scale = max(np.max(np.abs(analytic)), np.max(np.abs(numeric)))
    if scale < 1e-14:
        return 0.0
    return float(np.max(np.abs(analytic - numeric)) / scale)


def check_gradients(samples: Sequence[Sample], state: ModelState, h: float = 1e-6,
                    tolerance: float = 1e-5, simplex_vjp: SimplexVJP = softmax_vjp,
                    groups: Sequence[str] | None = None) -> GradcheckReport:
    """Compare backprop gradients of the mean batch loss with centered differences."""
    state.zero_grad()
    w = 1.0 / len(samples)
    for s in samples:
        logits, cache = forward(s, state)
        loss_and_backward(logits, s.label, cache, state, weight=w, simplex_vjp=simplex_vjp)
    analytic = {k: v.copy() for k, v in state.grads.items()}
    errors = {}
    for key in groups or list(state.params):
        p = state.params[key]
        num = np.zeros_like(p)
        for idx in np.ndindex(p.shape):
            orig = p[idx]
            p[idx] = orig + h
            up = batch_loss(samples, state)
            p[idx] = orig - h
            down = batch_loss(samples, state)
            p[idx] = orig
            num[idx] = (up - down) / (2.0 * h)
        errors[key] = relative_error(analytic[key], num)
    state.zero_grad()
    return GradcheckReport(errors, tolerance)
