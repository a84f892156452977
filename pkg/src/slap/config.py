"""Experiment configuration: a single JSON document with nested env, rollout,
and PPO sections."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from slap.env import EnvConfig
from slap.ppo import PpoHyper


@dataclass
class RolloutConfig:
    """Random-rollout pruning parameters (episode count, horizon,
    keep threshold)."""

    N: int = 1000
    T: int = 100
    K: int = 1

    def __post_init__(self) -> None:
        assert self.N >= 1 and self.T >= 1 and self.K >= 0


@dataclass
class GeneralizationConfig:
    n_distractors: int = 1
    random_goals: bool = False


@dataclass
class ExperimentConfig:
    """Everything a run needs; field names match the config file keys."""

    seed: int = 0
    n_train_tasks: int = 10
    n_eval_tasks: int = 10
    n_collect: int = 1
    env: EnvConfig = field(default_factory=EnvConfig)
    rollout: RolloutConfig = field(default_factory=RolloutConfig)
    T_eval: int = 50
    ppo: PpoHyper = field(default_factory=PpoHyper)
    mode: str = "independent"
    generalization: GeneralizationConfig = field(
        default_factory=GeneralizationConfig)
    timing: str = "wall"
    baseline_episodes: int = 5500
    baseline_entropy_coeff: float = 0.05
    dynamics: bool = False
    path_cap: int = 8
    # Seeded stochastic rollouts tried per shortcut-edge validation after
    # the deterministic mean fails; the successful trajectory is what the
    # plan replays.
    t_eval_attempts: int = 4

    def __post_init__(self) -> None:
        assert self.n_train_tasks > 0 and self.n_eval_tasks > 0
        assert self.n_collect >= 1 and self.T_eval >= 1
        assert self.mode in ("independent", "shared")
        assert self.timing in ("wall", "off")

    # Seed derivation: training and evaluation task streams must be disjoint
    # and stable under the run seed.
    def train_task_seeds(self) -> list[int]:
        base = self.seed * 1_000_000
        return [base + i for i in range(self.n_train_tasks)]

    def eval_task_seeds(self, offset: int = 0) -> list[int]:
        base = self.seed * 1_000_000 + 500_000 + offset * 10_000
        return [base + i for i in range(self.n_eval_tasks)]

    def rollout_seed(self, candidate_index: int) -> int:
        return self.seed * 1_000_000 + 700_000 + candidate_index

    def training_seed(self, candidate_index: int) -> int:
        return self.seed * 1_000_000 + 800_000 + candidate_index

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "n_train_tasks": self.n_train_tasks,
            "n_eval_tasks": self.n_eval_tasks,
            "n_collect": self.n_collect,
            "env": self.env.to_dict(),
            "rollout": {"N": self.rollout.N, "T": self.rollout.T,
                        "K": self.rollout.K},
            "T_eval": self.T_eval,
            "ppo": self.ppo.to_dict(),
            "mode": self.mode,
            "generalization": {
                "n_distractors": self.generalization.n_distractors,
                "random_goals": self.generalization.random_goals,
            },
            "timing": self.timing,
            "baseline_episodes": self.baseline_episodes,
            "baseline_entropy_coeff": self.baseline_entropy_coeff,
            "dynamics": self.dynamics,
            "path_cap": self.path_cap,
            "t_eval_attempts": self.t_eval_attempts,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        kwargs = dict(data)
        if "env" in kwargs:
            kwargs["env"] = EnvConfig.from_dict(kwargs["env"])
        if "rollout" in kwargs:
            kwargs["rollout"] = RolloutConfig(**kwargs["rollout"])
        if "ppo" in kwargs:
            kwargs["ppo"] = PpoHyper.from_dict(kwargs["ppo"])
        if "generalization" in kwargs:
            kwargs["generalization"] = GeneralizationConfig(
                **kwargs["generalization"])
        return cls(**kwargs)


def load_config(path: str | Path,
                seed_override: int | None = None) -> ExperimentConfig:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if seed_override is not None:
        data["seed"] = seed_override
    return ExperimentConfig.from_dict(data)


def save_config(config: ExperimentConfig, path: str | Path) -> None:
    Path(path).write_text(json.dumps(config.to_dict(), indent=2) + "\n",
                          encoding="utf-8")
