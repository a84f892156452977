"""Proximal policy optimization with a clipped surrogate objective and
generalized advantage estimation, trained by explicit backpropagation through
the dense networks and the diagonal-Gaussian log density.

Policy and value networks are updated by separate Adam optimizers at the
stated learning rate. Updates run every ``update_every`` collected steps,
flushed at episode boundaries. Training is bit-reproducible for a fixed seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from slap.nets import (Adam, PolicyParams, dense_backward, dense_forward,
                       forward, gaussian_entropy, gaussian_log_prob,
                       init_policy)
from slap.structs import AbstractState, Atom


class TrainingDivergence(Exception):
    """A non-finite loss or gradient aborted the update."""


@dataclass
class PpoHyper:
    """PPO hyperparameters."""

    learning_rate: float = 3e-4
    batch_size: int = 16
    epochs: int = 10
    discount: float = 0.99
    entropy_coeff: float = 0.01
    clip_ratio: float = 0.2
    gae_lambda: float = 0.95
    episodes: int = 1000
    max_steps: int = 50
    # Steps collected between updates. Small windows are what sharpen the
    # action mean within a 1000-episode budget; at 2048 the policies only
    # succeed through exploration noise.
    update_every: int = 256

    def __post_init__(self) -> None:
        assert 0.0 < self.discount <= 1.0
        assert 0.0 <= self.gae_lambda <= 1.0
        assert self.clip_ratio > 0.0

    def to_dict(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "batch_size": self.batch_size,
            "epochs": self.epochs,
            "discount": self.discount,
            "entropy_coeff": self.entropy_coeff,
            "clip_ratio": self.clip_ratio,
            "gae_lambda": self.gae_lambda,
            "episodes": self.episodes,
            "max_steps": self.max_steps,
            "update_every": self.update_every,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PpoHyper":
        return cls(**data)


@dataclass
class RolloutBatch:
    """Aligned step arrays partitioned into episodes by ``ep_ends``.

    ``next_values`` holds V(s_{t+1}) for every step (the bootstrap value at
    truncated episode ends, ignored at terminal steps). Advantages and
    returns are attached after GAE.
    """

    observations: np.ndarray
    actions: np.ndarray
    log_probs: np.ndarray
    rewards: np.ndarray
    values: np.ndarray
    next_values: np.ndarray
    terminals: np.ndarray
    ep_ends: np.ndarray
    advantages: np.ndarray | None = None
    returns: np.ndarray | None = None

    def __post_init__(self) -> None:
        n = len(self.observations)
        for name in ("actions", "log_probs", "rewards", "values",
                     "next_values", "terminals", "ep_ends"):
            assert len(getattr(self, name)) == n, f"misaligned {name}"
        assert n == 0 or self.ep_ends[-1], "batch must end on a boundary"

    def __len__(self) -> int:
        return len(self.observations)


def gae(batch: RolloutBatch, gamma: float,
        lam: float) -> tuple[np.ndarray, np.ndarray]:
    """Per-episode backward recursion of temporal-difference residuals."""
    n = len(batch)
    adv = np.zeros(n, dtype=np.float64)
    next_adv = 0.0
    for t in range(n - 1, -1, -1):
        if batch.ep_ends[t]:
            next_adv = 0.0
        delta = (batch.rewards[t]
                 + gamma * batch.next_values[t] * (1.0 - batch.terminals[t])
                 - batch.values[t])
        next_adv = delta + gamma * lam * next_adv
        adv[t] = next_adv
    returns = adv + batch.values
    return adv, returns


def policy_loss(params: PolicyParams, batch: RolloutBatch, clip_ratio: float,
                entropy_coeff: float) -> float:
    """Clipped-surrogate loss (to minimize) including the entropy bonus."""
    mean, _ = dense_forward(params.policy, batch.observations)
    logp = gaussian_log_prob(batch.actions, mean, params.log_std)
    ratio = np.exp(logp - batch.log_probs)
    adv = batch.advantages
    surr1 = ratio * adv
    surr2 = np.clip(ratio, 1.0 - clip_ratio, 1.0 + clip_ratio) * adv
    return float(-np.mean(np.minimum(surr1, surr2))
                 - entropy_coeff * gaussian_entropy(params.log_std))


def policy_loss_grads(params: PolicyParams, batch: RolloutBatch,
                      clip_ratio: float,
                      entropy_coeff: float) -> dict[str, np.ndarray]:
    """Analytic gradients of :func:`policy_loss` for the policy net arrays
    plus ``log_std``."""
    b = len(batch)
    mean, cache = dense_forward(params.policy, batch.observations)
    logp = gaussian_log_prob(batch.actions, mean, params.log_std)
    ratio = np.exp(logp - batch.log_probs)
    adv = batch.advantages
    surr1 = ratio * adv
    surr2 = np.clip(ratio, 1.0 - clip_ratio, 1.0 + clip_ratio) * adv
    use1 = surr1 <= surr2
    # d(loss)/d(logp): clipped-out samples contribute no surrogate gradient.
    dlogp = -(adv * ratio * use1) / b
    inv_var = np.exp(-2.0 * params.log_std)
    diff = batch.actions - mean
    dmean = dlogp[:, None] * diff * inv_var
    grads = dense_backward(params.policy, cache, dmean)
    dlog_std = (dlogp[:, None] * (diff * diff * inv_var - 1.0)).sum(axis=0)
    grads["log_std"] = dlog_std - entropy_coeff
    return grads


def value_loss(params: PolicyParams, batch: RolloutBatch) -> float:
    """Mean squared error of the value network against returns."""
    v, _ = dense_forward(params.value, batch.observations)
    return float(np.mean((v[:, 0] - batch.returns) ** 2))


def value_loss_grads(params: PolicyParams,
                     batch: RolloutBatch) -> dict[str, np.ndarray]:
    v, cache = dense_forward(params.value, batch.observations)
    dv = (2.0 * (v[:, 0] - batch.returns) / len(batch))[:, None]
    return dense_backward(params.value, cache, dv)


def normalize_advantages(adv: np.ndarray, eps: float = 1e-8) -> np.ndarray:
    return (adv - adv.mean()) / (adv.std() + eps)


def ppo_update(params: PolicyParams, batch: RolloutBatch, hyper: PpoHyper,
               optimizers: tuple[Adam, Adam] | None = None,
               rng: np.random.Generator | None = None) -> PolicyParams:
    """Multiple epochs of minibatch ascent on the clipped surrogate plus
    entropy, and descent on the value error. Mutates ``params`` in place.

    Advantages must already be normalized. A non-finite loss raises
    :class:`TrainingDivergence`.
    """
    assert batch.advantages is not None and batch.returns is not None
    if rng is None:
        rng = np.random.default_rng(0)
    if optimizers is None:
        optimizers = make_optimizers(params, hyper.learning_rate)
    opt_policy, opt_value = optimizers
    policy_arrays = {**params.policy.arrays(), "log_std": params.log_std}
    value_arrays = params.value.arrays()
    n = len(batch)
    for _ in range(hyper.epochs):
        perm = rng.permutation(n)
        for start in range(0, n, hyper.batch_size):
            idx = perm[start:start + hyper.batch_size]
            mb = _slice_batch(batch, idx)
            pi_loss = policy_loss(params, mb, hyper.clip_ratio,
                                  hyper.entropy_coeff)
            v_loss = value_loss(params, mb)
            if not (math.isfinite(pi_loss) and math.isfinite(v_loss)):
                raise TrainingDivergence(
                    f"non-finite loss (policy={pi_loss}, value={v_loss})")
            opt_policy.step(
                policy_arrays,
                policy_loss_grads(params, mb, hyper.clip_ratio,
                                  hyper.entropy_coeff))
            opt_value.step(value_arrays, value_loss_grads(params, mb))
    return params


def make_optimizers(params: PolicyParams, lr: float) -> tuple[Adam, Adam]:
    policy_arrays = {**params.policy.arrays(), "log_std": params.log_std}
    return Adam(policy_arrays, lr), Adam(params.value.arrays(), lr)


def _slice_batch(batch: RolloutBatch, idx: np.ndarray) -> RolloutBatch:
    mb = RolloutBatch(
        observations=batch.observations[idx],
        actions=batch.actions[idx],
        log_probs=batch.log_probs[idx],
        rewards=batch.rewards[idx],
        values=batch.values[idx],
        next_values=batch.next_values[idx],
        terminals=batch.terminals[idx],
        ep_ends=np.ones(len(idx), dtype=bool),
        advantages=batch.advantages[idx],
        returns=batch.returns[idx],
    )
    return mb


@dataclass
class EpisodeLog:
    """One training episode: return, success flag, and length."""

    episode: int
    ret: float
    success: bool
    steps: int


@dataclass
class TrainingLog:
    """Per-episode records plus the update cadence used."""

    update_every: int
    episodes: list[EpisodeLog] = field(default_factory=list)

    def success_rate(self, last: int | None = None) -> float:
        eps = self.episodes[-last:] if last else self.episodes
        if not eps:
            return 0.0
        return sum(e.success for e in eps) / len(eps)

    def to_csv(self) -> str:
        lines = [f"# update_every_steps={self.update_every}",
                 "episode,return,success,steps"]
        for e in self.episodes:
            lines.append(f"{e.episode},{e.ret},{int(e.success)},{e.steps}")
        return "\n".join(lines) + "\n"


# The MDP protocol used by the learner: obs_dim, act_dim, action_low/high,
# reset(rng) -> obs, step(Action) -> (obs, reward, terminated, truncated).
SnapshotHook = Callable[[int, PolicyParams], None]


def learn_policy(mdp, hyper: PpoHyper, seed: int,
                 snapshot_hook: SnapshotHook | None = None
                 ) -> tuple[PolicyParams, TrainingLog]:
    """Train one policy on one MDP; fully deterministic in the seed.

    Actions are sampled from the diagonal Gaussian and clamped to the action
    box; log-probs are taken pre-clamp. ``snapshot_hook`` is invoked with the
    episode index every 10% of episodes (including 0 and the final episode).
    """
    rng = np.random.default_rng(seed)
    init_std = (np.asarray(mdp.action_high) - np.asarray(mdp.action_low)) / 2
    params = init_policy(rng, mdp.obs_dim, mdp.act_dim, init_std=init_std)
    optimizers = make_optimizers(params, hyper.learning_rate)
    log = TrainingLog(update_every=hyper.update_every)
    snap_every = max(1, hyper.episodes // 10)
    buf: list[dict] = []
    buf_steps = 0
    low = np.asarray(mdp.action_low)
    high = np.asarray(mdp.action_high)
    for ep in range(hyper.episodes):
        if snapshot_hook is not None and ep % snap_every == 0:
            snapshot_hook(ep, params)
        obs = mdp.reset(rng)
        ep_obs, ep_act, ep_logp, ep_rew, ep_val = [], [], [], [], []
        terminated = False
        while len(ep_obs) < hyper.max_steps:
            mean, log_std, value = forward(params, obs)
            raw = mean + np.exp(log_std) * rng.standard_normal(mdp.act_dim)
            logp = float(gaussian_log_prob(raw, mean, log_std))
            clamped = np.clip(raw, low, high)
            next_obs, reward, terminated, truncated = mdp.step(clamped)
            ep_obs.append(obs)
            ep_act.append(raw)
            ep_logp.append(logp)
            ep_rew.append(reward)
            ep_val.append(value)
            obs = next_obs
            if terminated or truncated:
                break
        final_value = 0.0 if terminated else forward(params, obs)[2]
        buf.append({
            "obs": np.asarray(ep_obs, dtype=np.float64),
            "act": np.asarray(ep_act, dtype=np.float64),
            "logp": np.asarray(ep_logp, dtype=np.float64),
            "rew": np.asarray(ep_rew, dtype=np.float64),
            "val": np.asarray(ep_val, dtype=np.float64),
            "terminal": terminated,
            "final_value": final_value,
        })
        buf_steps += len(ep_obs)
        log.episodes.append(
            EpisodeLog(ep, float(sum(ep_rew)), terminated, len(ep_obs)))
        if buf_steps >= hyper.update_every:
            _update_from_buffer(params, buf, hyper, optimizers, rng)
            buf, buf_steps = [], 0
    if buf:
        _update_from_buffer(params, buf, hyper, optimizers, rng)
    if snapshot_hook is not None:
        snapshot_hook(hyper.episodes, params)
    return params, log


def _update_from_buffer(params: PolicyParams, buf: list[dict],
                        hyper: PpoHyper, optimizers: tuple[Adam, Adam],
                        rng: np.random.Generator) -> None:
    batch = _episodes_to_batch(buf)
    adv, ret = gae(batch, hyper.discount, hyper.gae_lambda)
    batch.advantages = normalize_advantages(adv)
    batch.returns = ret
    ppo_update(params, batch, hyper, optimizers, rng)


def _episodes_to_batch(buf: list[dict]) -> RolloutBatch:
    obs = np.concatenate([e["obs"] for e in buf])
    act = np.concatenate([e["act"] for e in buf])
    logp = np.concatenate([e["logp"] for e in buf])
    rew = np.concatenate([e["rew"] for e in buf])
    val = np.concatenate([e["val"] for e in buf])
    next_val, terms, ends = [], [], []
    for e in buf:
        t = len(e["rew"])
        nv = np.concatenate([e["val"][1:], [e["final_value"]]])
        next_val.append(nv)
        term = np.zeros(t, dtype=bool)
        term[-1] = e["terminal"]
        terms.append(term)
        end = np.zeros(t, dtype=bool)
        end[-1] = True
        ends.append(end)
    return RolloutBatch(obs, act, logp, rew, val,
                        np.concatenate(next_val), np.concatenate(terms),
                        np.concatenate(ends))


def goal_encoding(vocab: Sequence[Atom], s_term: AbstractState) -> np.ndarray:
    """Multi-hot vector over the atom vocabulary marking terminal atoms."""
    atoms = s_term.atom_set()
    vec = np.zeros(len(vocab), dtype=np.float64)
    for i, atom in enumerate(vocab):
        if atom in atoms:
            vec[i] = 1.0
    return vec


class GoalConditionedMDP:
    """Round-robin wrapper that augments full-state observations with the
    multi-hot encoding of each episode's terminal abstract state, for the
    shared-policy training scheme."""

    def __init__(self, mdps: Sequence, vocab: Sequence[Atom]) -> None:
        assert mdps
        self.mdps = list(mdps)
        self.vocab = list(vocab)
        env = self.mdps[0].env
        sample = self.mdps[0].candidate.x0_pool[0]
        self.full_dim = len(env.full_observation(sample))
        self.obs_dim = self.full_dim + len(self.vocab)
        self.act_dim = self.mdps[0].act_dim
        self.action_low = self.mdps[0].action_low
        self.action_high = self.mdps[0].action_high
        self.encodings = [
            goal_encoding(self.vocab, m.candidate.s_term) for m in self.mdps
        ]
        self._turn = -1

    def _observe(self, obs_state) -> np.ndarray:
        env = self.mdps[self._turn].env
        full = env.full_observation(self.mdps[self._turn].state)
        return np.concatenate([full, self.encodings[self._turn]])

    def reset(self, rng: np.random.Generator) -> np.ndarray:
        self._turn = (self._turn + 1) % len(self.mdps)
        self.mdps[self._turn].reset(rng)
        return self._observe(None)

    def step(self, action: Action) -> tuple[np.ndarray, float, bool, bool]:
        _, reward, terminated, truncated = self.mdps[self._turn].step(action)
        return self._observe(None), reward, terminated, truncated


def learn_shared_policy(mdps: Sequence, vocab: Sequence[Atom],
                        hyper: PpoHyper,
                        seed: int) -> tuple[PolicyParams, TrainingLog]:
    """Train a single policy across all shortcut MDPs with goal-encoded
    observations, interleaving episodes round-robin."""
    wrapper = GoalConditionedMDP(mdps, vocab)
    return learn_policy(wrapper, hyper, seed)
