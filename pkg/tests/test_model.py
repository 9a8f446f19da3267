import numpy as np
import pytest

from mlgcn.config import DEFAULT_MENU, TrainConfig
from mlgcn.errors import UsageError
from mlgcn.graph import Graph, LaplacianSpec
from mlgcn.model import (Architecture, ModelState, Sample, check_gradients, cross_entropy, forward,
                         loss_and_backward, multilap_sizes, top_eigenpair_grad)
from mlgcn.train import build_architecture, gradcheck

from conftest import random_graph


def _arch(**kw):
    cfg = TrainConfig(conv_filters=kw.pop("conv_filters", (4,)), **kw)
    return build_architecture(cfg, DEFAULT_MENU, 3, 3, 2)


def test_multilap_sizes():
    assert multilap_sizes(3, 2, 4) == (3, 1)
    assert multilap_sizes(3, 4, 5) == (3, 5, 5, 1)
    assert multilap_sizes(1, 1, 4) == (1,)


def test_zero_classifier_gives_uniform_loss(rng):
    arch = Architecture(DEFAULT_MENU, 3, 8, 2, (3, 1), conv_filters=(4,))
    state = ModelState.init(arch)
    state.params["fc/W"][:] = 0.0
    sample = Sample.prepare(random_graph(rng, 5), arch, 2)
    logits, cache = forward(sample, state)
    assert cross_entropy(logits, 2) == pytest.approx(np.log(8))
    loss_and_backward(logits, 2, cache, state)
    expected = np.full(8, 1 / 8)
    expected[2] -= 1
    np.testing.assert_allclose(state.grads["fc/b"], expected)


def test_confident_logits_have_vanishing_loss():
    assert cross_entropy(np.array([60.0, 0.0, 0.0]), 0) < 1e-25


def test_bad_label():
    with pytest.raises(UsageError):
        cross_entropy(np.zeros(3), 3)


def test_identity_model_passes_node_feature():
    # depth-1 network, K=1 identity filter, single node: the classifier sees the node feature
    arch = Architecture((LaplacianSpec("unnormalized"),), 2, 2, 1, (1,), cheb_order=1,
                        conv_filters=(2,), pooling="gp")
    state = ModelState.init(arch)
    state.params["cheb/0/theta"][:] = np.eye(2)[:, :, None]
    g = Graph(1, (), np.array([[0.3, -1.2]]), (1,), 1)
    _, cache = forward(Sample.prepare(g, arch), state)
    np.testing.assert_allclose(cache.pooled, [0.3, -1.2])


def test_top_eigenpair_gradient(rng):
    for symmetric in (True, False):
        M = rng.standard_normal((5, 5))
        if symmetric:
            M = M + M.T
        else:
            M = np.abs(M)  # positive matrix: real, simple Perron root
        lam, G = top_eigenpair_grad(M)
        assert lam == pytest.approx(np.max(np.linalg.eigvals(M).real))
        D = rng.standard_normal((5, 5))
        if symmetric:
            D = D + D.T
        h = 1e-6
        num = (top_eigenpair_grad(M + h * D)[0] - top_eigenpair_grad(M - h * D)[0]) / (2 * h)
        assert np.sum(G * D) == pytest.approx(num, rel=1e-6)


def test_forward_cache_single_use(rng):
    arch = _arch()
    state = ModelState.init(arch)
    sample = Sample.prepare(random_graph(rng, 5), arch, 0)
    logits, cache = forward(sample, state)
    loss_and_backward(logits, 0, cache, state)
    with pytest.raises(UsageError):
        loss_and_backward(logits, 0, cache, state)


@pytest.mark.parametrize("pooling", ["none", "gp", "featprop", "featprop_gp", "expand_gp"])
def test_gradcheck_every_pooling_mode(pooling):
    cfg = TrainConfig(pooling=pooling, conv_filters=(3,), max_nodes=6)
    rep = gradcheck(cfg, DEFAULT_MENU, seed=3)
    assert rep.passed, rep.errors


def test_gradcheck_deep_network_and_stacked_convs():
    # Deeper layers get gradients near 1e-6 in magnitude, where h = 1e-6
    # differences are dominated by roundoff (error grows like 1/h), so a
    # larger step is used here.
    cfg = TrainConfig(multilap_depth=3, multilap_hidden=2, conv_filters=(3, 2), activation="softplus")
    rep = gradcheck(cfg, DEFAULT_MENU, seed=5, h=1e-4)
    assert rep.passed, rep.errors


def test_gradcheck_random_walk_menu():
    menu = [LaplacianSpec("random_walk"), LaplacianSpec("normalized", "binary_gaussian", 2, 10.0)]
    rep = gradcheck(TrainConfig(conv_filters=(3,)), menu, seed=2)
    assert rep.passed, rep.errors


def test_gradcheck_without_rescale():
    rep = gradcheck(TrainConfig(conv_filters=(3,), rescale_after_multilap=False), DEFAULT_MENU, seed=1)
    assert rep.passed, rep.errors


def test_order_one_filter_gradient_is_essentially_exact():
    rep = gradcheck(TrainConfig(cheb_order=1, conv_filters=(3,)), DEFAULT_MENU, seed=0)
    assert rep.errors["cheb/0/theta"] <= 1e-9


def test_gradcheck_node_limit():
    with pytest.raises(UsageError):
        gradcheck(TrainConfig(), DEFAULT_MENU, n=9)
