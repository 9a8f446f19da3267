"""Chebyshev spectral graph convolution.

    out[:, f] = sum_c sum_k theta[c, f, k] (T_k(L) psi)[:, c]

The recursion is run on the signal (X_k = 2 L X_{k-1} - X_{k-2}), so
T_k(L) is never formed as a matrix.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError, UsageError

logger = logging.getLogger(__name__)

SPECTRAL_WARN_MARGIN = 0.1


@dataclass
class ChebFilterBank:
    """Coefficients ``theta`` of shape ``(p_in, F, K)``."""

    theta: np.ndarray

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=np.float64)
        if self.theta.ndim != 3 or min(self.theta.shape) < 1:
            raise ParameterError(f"theta must be (p_in, F, K) with positive sizes, got {self.theta.shape}")
        if not np.all(np.isfinite(self.theta)):
            raise ParameterError("non-finite Chebyshev coefficients")

    @property
    def p_in(self) -> int:
        return self.theta.shape[0]

    @property
    def filters(self) -> int:
        return self.theta.shape[1]

    @property
    def K(self) -> int:
        return self.theta.shape[2]

    @classmethod
    def init(cls, p_in: int, filters: int, K: int, rng: np.random.Generator) -> "ChebFilterBank":
        std = 1.0 / np.sqrt(p_in * K)
        return cls(std * rng.standard_normal((p_in, filters, K)))


def cheb_basis(L: np.ndarray, K: int, psi: np.ndarray, check_spectrum: bool = True) -> list[np.ndarray]:
    """[T_0(L) psi, ..., T_{K-1}(L) psi]."""
    L = np.asarray(L, dtype=np.float64)
    psi = np.asarray(psi, dtype=np.float64)
    if L.ndim != 2 or L.shape[0] != L.shape[1]:
        raise ParameterError(f"laplacian must be square, got {L.shape}")
    if psi.ndim != 2 or psi.shape[0] != L.shape[0]:
        raise ParameterError(f"signal has shape {psi.shape}, laplacian is {L.shape}")
    if K < 1:
        raise ParameterError("Chebyshev order K must be >= 1")
    if check_spectrum and K > 1 and L.size:
        radius = np.linalg.norm(L, 2)
        if radius > 1.0 + SPECTRAL_WARN_MARGIN:
            logger.warning("Chebyshev input has spectral norm %.3g > 1; recursion may grow", radius)
    X = [psi]
    if K > 1:
        X.append(L @ psi)
    for _ in range(2, K):
        X.append(2.0 * (L @ X[-1]) - X[-2])
    return X


@dataclass
class ChebCache:
    L: np.ndarray
    basis: list[np.ndarray]
    theta: np.ndarray
    consumed: bool = field(default=False)


def cheb_conv_forward(L: np.ndarray, bank: ChebFilterBank, psi: np.ndarray,
                      check_spectrum: bool = True) -> tuple[np.ndarray, ChebCache]:
    psi = np.asarray(psi, dtype=np.float64)
    if psi.ndim != 2 or psi.shape[1] != bank.p_in:
        raise ParameterError(f"signal has {psi.shape[-1]} channels, filter bank expects {bank.p_in}")
    X = cheb_basis(L, bank.K, psi, check_spectrum)
    out = np.einsum("knc,cfk->nf", np.asarray(X), bank.theta)
    return out, ChebCache(np.asarray(L, dtype=np.float64), X, bank.theta.copy())


def cheb_conv_backward(cache: ChebCache, grad_out: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Returns ``(dtheta, dpsi, dL)`` by unrolling the recursion in reverse."""
    if cache is None or cache.consumed:
        raise UsageError("Chebyshev backward needs a fresh cache from cheb_conv_forward")
    cache.consumed = True
    G = np.asarray(grad_out, dtype=np.float64)
    X, L, theta = cache.basis, cache.L, cache.theta
    K = len(X)
    dtheta = np.einsum("knc,nf->cfk", np.asarray(X), G)
    # adjoint of each X_k from its direct use in the output
    adj = [G @ theta[:, :, k].T for k in range(K)]
    dL = np.zeros_like(L)
    for k in range(K - 1, 1, -1):
        # X_k = 2 L X_{k-1} - X_{k-2}
        dL += 2.0 * adj[k] @ X[k - 1].T
        adj[k - 1] = adj[k - 1] + 2.0 * (L.T @ adj[k])
        adj[k - 2] = adj[k - 2] - adj[k]
    if K > 1:
        dL += adj[1] @ X[0].T
        adj[0] = adj[0] + L.T @ adj[1]
    return dtheta, adj[0], dL
