"""Small dense networks with explicit forward/backward passes, a diagonal
Gaussian policy head, and an Adam-style optimizer.

Both the policy (observation -> action mean) and the value function
(observation -> scalar) are 2-hidden-layer, 64-unit, tanh MLPs. Gradients are
computed by hand so they can be checked against finite differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

HIDDEN = 64


@dataclass
class DenseNet:
    """Two tanh hidden layers and a linear output layer."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    w3: np.ndarray
    b3: np.ndarray

    @property
    def in_dim(self) -> int:
        return self.w1.shape[0]

    @property
    def out_dim(self) -> int:
        return self.w3.shape[1]

    def arrays(self) -> dict[str, np.ndarray]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def init_dense(rng: np.random.Generator, in_dim: int, out_dim: int,
               dtype=np.float32, final_scale: float = 0.01) -> DenseNet:
    """Fan-in scaled Gaussian weights; the output layer starts near zero so
    initial action means stay centered."""

    def layer(n_in, n_out, scale):
        w = rng.standard_normal((n_in, n_out)) * scale / math.sqrt(n_in)
        return w.astype(dtype), np.zeros(n_out, dtype=dtype)

    w1, b1 = layer(in_dim, HIDDEN, 1.0)
    w2, b2 = layer(HIDDEN, HIDDEN, 1.0)
    w3, b3 = layer(HIDDEN, out_dim, final_scale)
    return DenseNet(w1, b1, w2, b2, w3, b3)


def dense_forward(net: DenseNet,
                  x: np.ndarray) -> tuple[np.ndarray, tuple]:
    """Batched forward pass; returns output (B, out_dim) and a cache for the
    backward pass."""
    h1 = np.tanh(x @ net.w1 + net.b1)
    h2 = np.tanh(h1 @ net.w2 + net.b2)
    out = h2 @ net.w3 + net.b3
    return out, (x, h1, h2)


def dense_backward(net: DenseNet, cache: tuple,
                   dout: np.ndarray) -> dict[str, np.ndarray]:
    """Gradients of a scalar loss with respect to every parameter, given
    d(loss)/d(output)."""
    x, h1, h2 = cache
    dw3 = h2.T @ dout
    db3 = dout.sum(axis=0)
    dh2 = (dout @ net.w3.T) * (1.0 - h2 * h2)
    dw2 = h1.T @ dh2
    db2 = dh2.sum(axis=0)
    dh1 = (dh2 @ net.w2.T) * (1.0 - h1 * h1)
    dw1 = x.T @ dh1
    db1 = dh1.sum(axis=0)
    return {
        "w1": dw1, "b1": db1,
        "w2": dw2, "b2": db2,
        "w3": dw3, "b3": db3,
    }


@dataclass
class PolicyParams:
    """Policy network, value network, and the per-dimension log standard
    deviation of the action Gaussian."""

    policy: DenseNet
    value: DenseNet
    log_std: np.ndarray

    @property
    def obs_dim(self) -> int:
        return self.policy.in_dim

    @property
    def act_dim(self) -> int:
        return self.policy.out_dim

    def copy(self) -> "PolicyParams":
        return PolicyParams(
            DenseNet(**{k: v.copy() for k, v in self.policy.arrays().items()}),
            DenseNet(**{k: v.copy() for k, v in self.value.arrays().items()}),
            self.log_std.copy())


def init_policy(rng: np.random.Generator, obs_dim: int, act_dim: int,
                init_std: np.ndarray | float = 1.0,
                dtype=np.float32) -> PolicyParams:
    policy = init_dense(rng, obs_dim, act_dim, dtype)
    value = init_dense(rng, obs_dim, 1, dtype)
    log_std = np.log(np.broadcast_to(np.asarray(init_std, dtype=np.float64),
                                     (act_dim,))).astype(dtype)
    return PolicyParams(policy, value, log_std.copy())


def forward(params: PolicyParams,
            obs: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
    """Single-observation forward pass: (action mean, log_std, value)."""
    obs = np.asarray(obs, dtype=params.log_std.dtype)
    assert obs.shape == (params.obs_dim,), \
        f"expected obs dim {params.obs_dim}, got {obs.shape}"
    mean, _ = dense_forward(params.policy, obs[None, :])
    value, _ = dense_forward(params.value, obs[None, :])
    return mean[0], params.log_std.copy(), float(value[0, 0])


def gaussian_log_prob(actions: np.ndarray, mean: np.ndarray,
                      log_std: np.ndarray) -> np.ndarray:
    """Log density of a diagonal Gaussian, summed over action dims."""
    inv_var = np.exp(-2.0 * log_std)
    return (-0.5 * ((actions - mean) ** 2) * inv_var - log_std
            - 0.5 * math.log(2.0 * math.pi)).sum(axis=-1)


def gaussian_entropy(log_std: np.ndarray) -> float:
    """Differential entropy: sum(log_std) + k/2 * log(2*pi*e)."""
    k = log_std.shape[0]
    return float(log_std.sum() + 0.5 * k * (1.0 + math.log(2.0 * math.pi)))


class Adam:
    """Per-parameter second-moment adaptive optimizer (beta 0.9/0.999)."""

    def __init__(self, arrays: dict[str, np.ndarray], lr: float,
                 beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8) -> None:
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in arrays.items()}
        self.v = {k: np.zeros_like(v) for k, v in arrays.items()}

    def step(self, arrays: dict[str, np.ndarray],
             grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        b1t = 1.0 - self.beta1 ** self.t
        b2t = 1.0 - self.beta2 ** self.t
        for k, g in grads.items():
            g = g.astype(arrays[k].dtype)
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * g * g
            m_hat = self.m[k] / b1t
            v_hat = self.v[k] / b2t
            arrays[k] -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
