"""Dense networks: forward determinism, backprop vs finite differences,
Gaussian head identities, Adam behavior."""

import math

import numpy as np
import pytest

from slap.nets import (Adam, DenseNet, dense_backward, dense_forward, forward,
                       gaussian_entropy, gaussian_log_prob, init_dense,
                       init_policy)


def test_zero_net_outputs_zero():
    net = init_dense(np.random.default_rng(0), 4, 2, dtype=np.float64)
    for arr in net.arrays().values():
        arr[...] = 0.0
    out, _ = dense_forward(net, np.ones((3, 4)))
    assert np.all(out == 0.0)


def test_forward_deterministic():
    rng = np.random.default_rng(1)
    params = init_policy(rng, 5, 3, dtype=np.float64)
    obs = np.linspace(0, 1, 5)
    a1 = forward(params, obs)
    a2 = forward(params, obs)
    assert np.array_equal(a1[0], a2[0]) and a1[2] == a2[2]


def test_dead_input_path():
    rng = np.random.default_rng(2)
    params = init_policy(rng, 5, 2, dtype=np.float64)
    params.policy.w1[0, :] = 0.0
    obs = np.zeros(5)
    obs2 = obs.copy()
    obs2[0] = 10.0
    m1, _, _ = forward(params, obs)
    m2, _, _ = forward(params, obs2)
    assert np.allclose(m1, m2)


def test_forward_dim_mismatch_rejected():
    params = init_policy(np.random.default_rng(0), 5, 2)
    with pytest.raises(AssertionError):
        forward(params, np.zeros(7))


def test_dense_backward_matches_finite_differences():
    rng = np.random.default_rng(3)
    net = init_dense(rng, 6, 2, dtype=np.float64, final_scale=1.0)
    x = rng.standard_normal((4, 6))
    target = rng.standard_normal((4, 2))

    def loss(n):
        out, _ = dense_forward(n, x)
        return float(np.mean((out - target) ** 2))

    out, cache = dense_forward(net, x)
    grads = dense_backward(net, cache, 2.0 * (out - target) / out.size)
    eps = 1e-6
    for key, arr in net.arrays().items():
        g = grads[key]
        flat = arr.ravel()
        for i in range(0, flat.size, max(1, flat.size // 17)):
            orig = flat[i]
            flat[i] = orig + eps
            up = loss(net)
            flat[i] = orig - eps
            dn = loss(net)
            flat[i] = orig
            fd = (up - dn) / (2 * eps)
            assert math.isclose(g.ravel()[i], fd, rel_tol=1e-5,
                                abs_tol=1e-9), key


def test_gaussian_log_prob_against_closed_form():
    rng = np.random.default_rng(4)
    mean = rng.standard_normal((8, 3))
    log_std = np.array([0.1, -0.4, 0.7])
    acts = rng.standard_normal((8, 3))
    got = gaussian_log_prob(acts, mean, log_std)
    std = np.exp(log_std)
    want = np.sum(
        -0.5 * ((acts - mean) / std) ** 2 - np.log(std)
        - 0.5 * np.log(2 * np.pi), axis=1)
    assert np.allclose(got, want)


def test_gaussian_entropy_closed_form():
    log_std = np.array([0.3, -1.2, 0.0])
    k = 3
    want = log_std.sum() + 0.5 * k * math.log(2 * math.pi * math.e)
    assert math.isclose(gaussian_entropy(log_std), want, rel_tol=1e-12)


def test_adam_reduces_quadratic():
    rng = np.random.default_rng(5)
    x = {"x": rng.standard_normal(4)}
    opt = Adam(x, lr=0.1)
    for _ in range(200):
        opt.step(x, {"x": 2.0 * x["x"]})
    assert np.all(np.abs(x["x"]) < 1e-2)


def test_policy_init_std():
    params = init_policy(np.random.default_rng(0), 4, 3,
                         init_std=np.array([0.05, 0.05, 1.0]))
    assert np.allclose(np.exp(params.log_std), [0.05, 0.05, 1.0], rtol=1e-6)
