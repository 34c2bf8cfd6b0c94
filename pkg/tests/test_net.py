import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from horizon_pu.corpus import CsrBatch, SparseVec, sparse_from_dict
from horizon_pu.net import (
    DenseNet,
    NetConfig,
    NonFiniteError,
    OptimState,
    StaleCacheError,
    backward,
    clamp_prob,
    forward,
    logistic_loss,
    step,
)
from tests.helpers import finite_difference_grads, max_relative_error, random_csr, random_net

LN2 = math.log(2.0)


def one_layer(w, b):
    return DenseNet([np.array(w, dtype=float).reshape(-1, 1)], [np.array([b], dtype=float)])


def test_zero_net_scores_zero():
    net = DenseNet.init([5, 4, 3, 1], NetConfig(init="zeros", dtype="float64"))
    x = sparse_from_dict({0: 2, 4: 1}, 5)
    assert forward(net, x)[0] == 0.0


def test_one_layer_hand_value():
    net = one_layer([1, -1], 0.5)
    assert forward(net, sparse_from_dict({0: 2, 1: 1}, 2))[0] == pytest.approx(1.5, abs=1e-15)


def test_first_layer_homogeneity():
    rng = np.random.default_rng(0)
    net = random_net(rng, [4, 3, 1])
    for b in net.biases:
        b[:] = 0
    X = random_csr(rng, 5, 4)
    _, c1 = net.forward(X)
    net.weights[0] *= 2
    net.touch()
    _, c2 = net.forward(X)
    np.testing.assert_allclose(c2.pre[0], 2 * c1.pre[0])


def test_dense_and_sparse_inputs_agree():
    rng = np.random.default_rng(1)
    net = random_net(rng, [6, 5, 1])
    X = random_csr(rng, 8, 6)
    np.testing.assert_allclose(net.forward(X)[0], net.forward(X.to_dense())[0], rtol=1e-12)


def test_dimension_mismatch():
    net = one_layer([1, 1], 0)
    with pytest.raises(ValueError, match="dim"):
        net.forward(sparse_from_dict({0: 1}, 3))


def test_layer_dims_and_param_count():
    net = DenseNet.init([10, 500, 500, 1], NetConfig())
    assert net.layer_dims == [10, 500, 500, 1]
    assert net.n_params == 10 * 500 + 500 + 500 * 500 + 500 + 500 + 1
    with pytest.raises(ValueError):
        DenseNet([np.zeros((2, 3))], [np.zeros(3)])


@pytest.mark.parametrize("score,y,expected", [(0, 1, LN2), (2, 1, 0.126928011042973), (2, -1, 2.126928011042973)])
def test_logistic_loss_values(score, y, expected):
    assert logistic_loss(score, y) == pytest.approx(expected, abs=1e-12)


def test_logistic_loss_is_overflow_safe():
    assert logistic_loss(-1000, 1) == pytest.approx(1000.0)
    assert logistic_loss(1000, 1) == 0.0


@settings(max_examples=200, deadline=None)
@given(st.floats(-50, 50), st.floats(-50, 50))
def test_logistic_loss_properties(z, z2):
    assert logistic_loss(z, -1) == logistic_loss(-z, 1)
    assert logistic_loss(z, 1) + logistic_loss(-z, -1) == pytest.approx(2 * logistic_loss(z, 1))
    assert logistic_loss(z, 1) >= 0
    if z < z2:
        assert logistic_loss(z, 1) >= logistic_loss(z2, 1)


def test_backward_zero_upstream():
    rng = np.random.default_rng(2)
    net = random_net(rng, [4, 3, 1])
    x = random_csr(rng, 1, 4).row(0)
    _, cache = forward(net, x)
    assert all(not g.any() for g in backward(net, cache, 0.0))


def test_one_layer_gradient_is_input():
    net = one_layer([0.3, -0.7, 0.1], 0.2)
    x = sparse_from_dict({0: 2, 2: 5}, 3)
    _, cache = forward(net, x)
    gW, gb = backward(net, cache, 1.0)
    np.testing.assert_array_equal(gW[:, 0], [2, 0, 5])
    assert gb[0] == 1.0


def test_relu_subgradient_at_zero_is_zero():
    net = DenseNet([np.array([[1.0]]), np.array([[1.0]])], [np.array([-1.0]), np.array([0.0])])
    _, cache = net.forward(np.array([[1.0]]))
    assert cache.pre[0][0, 0] == 0.0
    grads, _ = net.backward(cache, np.ones(1))
    assert grads[0][0, 0] == 0.0 and grads[1][0] == 0.0


def test_stale_cache_rejected():
    rng = np.random.default_rng(0)
    net = random_net(rng, [3, 2, 1])
    X = random_csr(rng, 2, 3)
    _, cache = net.forward(X)
    step(net, [np.zeros_like(p) for p in net.params()], OptimState("sgd", lr=0.1, weight_decay=0))
    with pytest.raises(StaleCacheError):
        net.backward(cache, np.ones(2))
    other = random_net(rng, [3, 2, 1])
    with pytest.raises(StaleCacheError):
        other.backward(net.forward(X)[1], np.ones(2))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_backward_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    depth = int(rng.integers(1, 4))
    dims = [int(rng.integers(1, 9)) for _ in range(depth)] + [1]
    net = random_net(rng, dims)
    X = random_csr(rng, 5, dims[0])
    up = rng.normal(size=5)
    _, cache = net.forward(X)
    pre = cache.pre[:-1]
    if any(np.min(np.abs(z)) < 1e-3 for z in pre):
        return  # a kink inside the difference stencil
    analytic, _ = net.backward(cache, up)
    numeric = finite_difference_grads(lambda: float(up @ net.forward(X)[0]), net.params())
    assert max_relative_error(analytic, numeric) < 1e-4


def test_sgd_step_exact():
    net = one_layer([1.0, 2.0], 0.5)
    g = [np.array([[0.5], [-1.0]]), np.array([2.0])]
    step(net, g, OptimState("sgd", lr=0.1, weight_decay=0.0))
    np.testing.assert_array_equal(net.weights[0][:, 0], [1.0 - 0.1 * 0.5, 2.0 + 0.1 * 1.0])
    assert net.biases[0][0] == 0.5 - 0.1 * 2.0


@pytest.mark.parametrize("kind", ["sgd", "adam"])
def test_zero_grad_no_decay_is_noop(kind):
    net = one_layer([1.0, -2.0], 0.5)
    before = [p.copy() for p in net.params()]
    step(net, [np.zeros_like(p) for p in net.params()], OptimState(kind, weight_decay=0.0))
    assert all(np.array_equal(a, b) for a, b in zip(before, net.params()))


@pytest.mark.parametrize("kind", ["sgd", "adam"])
def test_weight_decay_shrinks(kind):
    net = one_layer([1.0, -2.0], 0.5)
    step(net, [np.zeros_like(p) for p in net.params()], OptimState(kind, lr=0.01, weight_decay=0.1))
    w = net.weights[0][:, 0]
    assert 0 < w[0] < 1.0 and -2.0 < w[1] < 0 and 0 < net.biases[0][0] < 0.5


def test_nonfinite_gradient_aborts():
    net = one_layer([1.0, 1.0], 0.0)
    before = [p.copy() for p in net.params()]
    with pytest.raises(NonFiniteError):
        step(net, [np.array([[np.nan], [0.0]]), np.zeros(1)], OptimState())
    assert all(np.array_equal(a, b) for a, b in zip(before, net.params()))


def test_optimizer_validation():
    with pytest.raises(ValueError):
        OptimState(lr=0)
    with pytest.raises(ValueError):
        OptimState(weight_decay=-1)
    with pytest.raises(ValueError):
        NetConfig(epsilon=0.5)


def test_seeded_training_is_bit_identical():
    def run():
        rng = np.random.default_rng(5)
        net = DenseNet.init([6, 8, 8, 1], NetConfig(seed=11))
        optim = OptimState()
        for _ in range(10):
            X = random_csr(rng, 4, 6)
            s, cache = net.forward(X)
            grads, _ = net.backward(cache, np.tanh(s))
            step(net, grads, optim)
        return net.params()

    assert all(np.array_equal(a, b) for a, b in zip(run(), run()))


def test_clamp_prob():
    assert clamp_prob(0.0, 0.01) == 0.5
    assert clamp_prob(1e9, 0.01) == 0.99
    assert clamp_prob(-1e9, 0.01) == 0.01
    np.testing.assert_allclose(clamp_prob(np.array([-1e9, 0, 1e9]), 0.1), [0.1, 0.5, 0.9])
