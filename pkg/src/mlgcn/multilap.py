"""Learned multi-laplacians.

Each layer mixes the previous layer's laplacians with simplex weights and
applies an entrywise activation::

    L_p^{l+1} = g( sum_q w_{q,p}^l L_q^l ),   w_{., p}^l = softmax(w_hat_{., p}^l)

The final layer has a single unit. A network of depth 1 has no layers and
passes its single input laplacian through unchanged.

Also here: the conditional positive definiteness check and the anchored
centering ("hat") transform used to certify learned laplacians.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, ParameterError, UsageError

logger = logging.getLogger(__name__)

ACTIVATIONS = ("softplus", "leaky_softplus", "relu", "leaky_relu", "identity")
SMOOTH_ACTIVATIONS = ("softplus", "leaky_softplus")


# -- simplex reparametrization ----------------------------------------------

def constrain_weights(w_hat: np.ndarray) -> np.ndarray:
    """Max-shifted exp-normalization along axis 0.

    Accepts a vector or an ``(n_in, n_out)`` matrix whose columns are
    normalized independently.
    """
    w_hat = np.asarray(w_hat, dtype=np.float64)
    if np.isnan(w_hat).any():
        raise ParameterError("NaN in unconstrained weights")
    if not np.all(np.isfinite(w_hat)):
        raise ParameterError("non-finite unconstrained weights")
    e = np.exp(w_hat - w_hat.max(axis=0, keepdims=True))
    return e / e.sum(axis=0, keepdims=True)


def softmax_vjp(w: np.ndarray, w_hat: np.ndarray, grad_w: np.ndarray) -> np.ndarray:
    """Pull dJ/dw back to dJ/dw_hat through the full softmax Jacobian.

    dw_q/dw_hat_r = w_q (delta_qr - w_r), columnwise.
    """
    return w * (grad_w - np.sum(w * grad_w, axis=0, keepdims=True))


SimplexVJP = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]


# -- activations -------------------------------------------------------------

def softplus(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def sigmoid(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    z = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + z), z / (1.0 + z))


def activation_apply(M: np.ndarray, kind: str = "softplus", leak: float = 0.01) -> np.ndarray:
    M = np.asarray(M, dtype=np.float64)
    if kind == "softplus":
        return softplus(M)
    if kind == "leaky_softplus":
        return leak * M + softplus((1.0 - leak) * M)
    if kind == "relu":
        return np.maximum(M, 0.0)
    if kind == "leaky_relu":
        return np.where(M > 0, M, leak * M)
    if kind == "identity":
        return M.copy()
    raise ParameterError(f"unknown activation {kind!r}")


def activation_grad(M: np.ndarray, kind: str = "softplus", leak: float = 0.01) -> np.ndarray:
    """Entrywise derivative of the activation at ``M``."""
    if kind == "softplus":
        return sigmoid(M)
    if kind == "leaky_softplus":
        return leak + (1.0 - leak) * sigmoid((1.0 - leak) * M)
    if kind == "relu":
        return (M > 0).astype(np.float64)
    if kind == "leaky_relu":
        return np.where(M > 0, 1.0, leak)
    if kind == "identity":
        return np.ones_like(M)
    raise ParameterError(f"unknown activation {kind!r}")


# -- network -----------------------------------------------------------------

@dataclass
class MultiLapParams:
    """Unconstrained weights of every layer.

    ``sizes = (n_1, ..., n_d)`` with ``n_d == 1``; ``w_hat[l]`` has shape
    ``(sizes[l], sizes[l + 1])`` and column ``p`` feeds unit ``p``.
    """

    sizes: tuple[int, ...]
    w_hat: list[np.ndarray]
    activation: str = "leaky_softplus"
    leak: float = 0.01

    def __post_init__(self):
        self.sizes = tuple(int(s) for s in self.sizes)
        if not self.sizes or self.sizes[-1] != 1:
            raise ParameterError(f"final multi-laplacian layer must have one unit, got sizes {self.sizes}")
        if any(s < 1 for s in self.sizes):
            raise ParameterError("layer sizes must be positive")
        if len(self.w_hat) != len(self.sizes) - 1:
            raise ParameterError("one weight matrix per layer transition is required")
        for l, W in enumerate(self.w_hat):
            if W.shape != (self.sizes[l], self.sizes[l + 1]):
                raise ParameterError(f"layer {l} weights have shape {W.shape}, "
                                     f"expected {(self.sizes[l], self.sizes[l + 1])}")
        if self.activation not in ACTIVATIONS:
            raise ParameterError(f"unknown activation {self.activation!r}")
        if not 0.0 <= self.leak < 1.0:
            raise ParameterError("leak must lie in [0, 1)")

    @property
    def depth(self) -> int:
        return len(self.sizes)

    def weights(self) -> list[np.ndarray]:
        return [constrain_weights(W) for W in self.w_hat]

    @classmethod
    def init(cls, sizes: Sequence[int], activation: str = "leaky_softplus", leak: float = 0.01,
             rng: np.random.Generator | None = None, scale: float = 0.1) -> "MultiLapParams":
        sizes = tuple(int(s) for s in sizes)
        w_hat = []
        for a, b in zip(sizes[:-1], sizes[1:]):
            W = np.zeros((a, b)) if rng is None else scale * rng.standard_normal((a, b))
            w_hat.append(W)
        return cls(sizes, w_hat, activation, leak)


@dataclass
class MultiLapCache:
    inputs: list[np.ndarray]
    pre: list[np.ndarray]
    weights: list[np.ndarray]
    w_hat: list[np.ndarray]
    activation: str
    leak: float
    consumed: bool = field(default=False)


def multilap_forward(stack: Sequence[np.ndarray] | np.ndarray, params: MultiLapParams) -> tuple[np.ndarray, MultiLapCache]:
    """Run the laplacian network; returns the final laplacian and a backward cache."""
    X = np.asarray([np.asarray(L, dtype=np.float64) for L in stack]) if not isinstance(stack, np.ndarray) else stack
    if X.ndim != 3 or X.shape[1] != X.shape[2]:
        raise ParameterError(f"stack must be (n_1, n, n), got shape {X.shape}")
    if X.shape[0] != params.sizes[0]:
        raise ParameterError(f"stack holds {X.shape[0]} laplacians, network expects {params.sizes[0]}")
    weights = params.weights()
    inputs, pre = [], []
    for W in weights:
        inputs.append(X)
        Z = np.einsum("qp,qij->pij", W, X)
        pre.append(Z)
        X = activation_apply(Z, params.activation, params.leak)
    cache = MultiLapCache(inputs, pre, weights, [W.copy() for W in params.w_hat],
                          params.activation, params.leak)
    return X[0], cache


def multilap_backward(cache: MultiLapCache, grad_out: np.ndarray,
                      simplex_vjp: SimplexVJP = softmax_vjp) -> tuple[list[np.ndarray], np.ndarray]:
    """Gradients w.r.t. every layer's unconstrained weights.

    Returns ``(grads, grad_stack)`` where ``grads[l]`` matches
    ``params.w_hat[l]`` and ``grad_stack`` is dJ/d(input laplacians).
    """
    if cache is None or cache.consumed:
        raise UsageError("multilap backward needs a fresh cache from multilap_forward")
    cache.consumed = True
    G = np.asarray(grad_out, dtype=np.float64)[None]
    grads: list[np.ndarray] = [None] * len(cache.weights)  # type: ignore[list-item]
    for l in reversed(range(len(cache.weights))):
        dZ = G * activation_grad(cache.pre[l], cache.activation, cache.leak)
        X = cache.inputs[l]
        W = cache.weights[l]
        grad_w = np.einsum("pij,qij->qp", dZ, X)
        grads[l] = simplex_vjp(W, cache.w_hat[l], grad_w)
        G = np.einsum("qp,pij->qij", W, dZ)
    return grads, G


# -- conditional positive definiteness ---------------------------------------

@dataclass(frozen=True)
class CpdReport:
    matrix_id: str
    min_centered_eigenvalue: float
    is_cpd: bool
    tolerance: float


def zero_sum_basis(n: int) -> np.ndarray:
    """Orthonormal basis (n x (n-1)) of the vectors whose entries sum to zero."""
    if n < 2:
        return np.zeros((n, 0))
    # Householder reflection taking e_1 to 1/sqrt(n); its other columns span 1-perp.
    v = np.full(n, 1.0 / np.sqrt(n))
    v[0] -= 1.0
    H = np.eye(n) - 2.0 * np.outer(v, v) / (v @ v)
    return H[:, 1:]


def cpd_check(M: np.ndarray, tol: float = 1e-9, matrix_id: str = "", asym_tol: float = 1e-8) -> CpdReport:
    """Minimum of the quadratic form c^T M c over unit zero-sum vectors c.

    Non-symmetric inputs are replaced by their symmetric part, which is all
    the quadratic form sees; a diagnostic is logged when the asymmetry
    exceeds ``asym_tol``.
    """
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DomainError(f"cpd_check needs a square matrix, got {M.shape}")
    asym = float(np.max(np.abs(M - M.T))) if M.size else 0.0
    if asym > asym_tol:
        logger.info("cpd_check %s: symmetrizing input (max asymmetry %.3g)", matrix_id or "<matrix>", asym)
    S = 0.5 * (M + M.T)
    B = zero_sum_basis(S.shape[0])
    if B.shape[1] == 0:
        return CpdReport(matrix_id, float("inf"), True, tol)
    lam = float(np.linalg.eigvalsh(B.T @ S @ B)[0])
    return CpdReport(matrix_id, lam, lam >= -tol, tol)


def hat_transform(L: np.ndarray) -> np.ndarray:
    """Center an (n+1) x (n+1) matrix on its last index.

    hat(L)_ij = L_ij - L_{i,n+1} - L_{n+1,j} + L_{n+1,n+1} for i, j <= n.
    """
    L = np.asarray(L, dtype=np.float64)
    if L.ndim != 2 or L.shape[0] != L.shape[1] or L.shape[0] < 2:
        raise ParameterError(f"hat transform needs a square matrix of size >= 2, got {L.shape}")
    n = L.shape[0] - 1
    return L[:n, :n] - L[:n, n:] - L[n:, :n] + L[n, n]
