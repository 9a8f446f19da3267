import logging

import numpy as np
import pytest

from mlgcn.chebconv import ChebFilterBank, cheb_basis, cheb_conv_backward, cheb_conv_forward
from mlgcn.errors import ParameterError, UsageError


def _sym(rng, n):
    M = rng.standard_normal((n, n))
    M = M + M.T
    return M / np.abs(np.linalg.eigvalsh(M)).max()


def test_order_two_basis(rng):
    L = _sym(rng, 4)
    psi = rng.standard_normal((4, 2))
    X = cheb_basis(L, 2, psi)
    np.testing.assert_array_equal(X[0], psi)
    np.testing.assert_allclose(X[1], L @ psi)


def test_identity_laplacian_fixes_signal(rng):
    psi = rng.standard_normal((3, 1))
    for Xk in cheb_basis(np.eye(3), 6, psi):
        np.testing.assert_allclose(Xk, psi)


def test_t2_at_eigenvalues():
    X = cheb_basis(np.diag([-1.0, 0.0, 1.0]), 3, np.ones((3, 1)))
    np.testing.assert_allclose(X[2][:, 0], [1.0, -1.0, 1.0])


def test_spectral_norm_warning(caplog):
    with caplog.at_level(logging.WARNING, logger="mlgcn.chebconv"):
        cheb_basis(3 * np.eye(2), 3, np.ones((2, 1)))
    assert "spectral norm" in caplog.text


def test_order_one_is_channel_mix(rng):
    bank = ChebFilterBank(rng.standard_normal((3, 2, 1)))
    psi = rng.standard_normal((5, 3))
    out, _ = cheb_conv_forward(_sym(rng, 5), bank, psi)
    np.testing.assert_allclose(out, psi @ bank.theta[:, :, 0])


def test_identity_filter(rng):
    theta = np.zeros((1, 1, 4))
    theta[0, 0, 0] = 1.0
    psi = rng.standard_normal((6, 1))
    out, _ = cheb_conv_forward(_sym(rng, 6), ChebFilterBank(theta), psi)
    np.testing.assert_array_equal(out, psi)


def test_matches_eigendecomposition(rng):
    L = _sym(rng, 8)
    w, U = np.linalg.eigh(L)
    bank = ChebFilterBank(rng.standard_normal((2, 3, 5)))
    psi = rng.standard_normal((8, 2))
    out, _ = cheb_conv_forward(L, bank, psi)
    T = np.polynomial.chebyshev.chebvander(w, 4)  # (n, K)
    ref = np.zeros((8, 3))
    for c in range(2):
        for f in range(3):
            ref[:, f] += U @ ((T @ bank.theta[c, f]) * (U.T @ psi[:, c]))
    np.testing.assert_allclose(out, ref, rtol=0, atol=1e-10)


def test_channel_mismatch(rng):
    with pytest.raises(ParameterError):
        cheb_conv_forward(np.eye(3), ChebFilterBank(np.ones((2, 1, 2))), np.ones((3, 3)))


def test_backward_zero_upstream(rng):
    _, cache = cheb_conv_forward(_sym(rng, 4), ChebFilterBank(rng.standard_normal((2, 2, 3))),
                                 rng.standard_normal((4, 2)))
    for g in cheb_conv_backward(cache, np.zeros((4, 2))):
        np.testing.assert_array_equal(g, 0.0)


def test_backward_order_one(rng):
    psi = rng.standard_normal((4, 1))
    _, cache = cheb_conv_forward(np.eye(4), ChebFilterBank(np.ones((1, 1, 1))), psi)
    G = rng.standard_normal((4, 1))
    dtheta, _, dL = cheb_conv_backward(cache, G)
    assert dtheta[0, 0, 0] == pytest.approx(float(G[:, 0] @ psi[:, 0]))
    np.testing.assert_array_equal(dL, 0.0)


@pytest.mark.parametrize("K", [1, 2, 3, 5])
def test_backward_finite_differences(rng, K):
    L = rng.standard_normal((5, 5)) * 0.3
    bank = ChebFilterBank(rng.standard_normal((2, 3, K)))
    psi = rng.standard_normal((5, 2))
    G = rng.standard_normal((5, 3))

    def loss():
        return float(np.sum(G * cheb_conv_forward(L, bank, psi, check_spectrum=False)[0]))

    _, cache = cheb_conv_forward(L, bank, psi, check_spectrum=False)
    analytic = cheb_conv_backward(cache, G)
    h = 1e-6
    for arr, grad in zip((bank.theta, psi, L), analytic):
        num = np.zeros_like(arr)
        for idx in np.ndindex(arr.shape):
            arr[idx] += h
            up = loss()
            arr[idx] -= 2 * h
            num[idx] = (up - loss()) / (2 * h)
            arr[idx] += h
        np.testing.assert_allclose(grad, num, atol=1e-7)


def test_stale_cache(rng):
    _, cache = cheb_conv_forward(np.eye(2), ChebFilterBank(np.ones((1, 1, 2))), np.ones((2, 1)))
    cheb_conv_backward(cache, np.ones((2, 1)))
    with pytest.raises(UsageError):
        cheb_conv_backward(cache, np.ones((2, 1)))
