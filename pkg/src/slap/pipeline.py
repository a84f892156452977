"""End-to-end stages: offline data collection (graphs, candidates, pruning),
shortcut training, evaluation with learned shortcuts against pure planning,
generalization protocols, the flat-RL baseline, and the pruning ablation.

Stage artifacts are plain files (JSONL ledger, binary checkpoints, CSV
records) so stages can run as separate processes.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from slap.checkpoint import (atoms_from_lists, atoms_to_lists,
                             load_checkpoint, make_signature, save_checkpoint,
                             signature_states)
from slap.config import ExperimentConfig
from slap.env import Action, EnvConfig, Obstacle2DEnv
from slap.graph import (Edge, NoPlanError, Plan, PlanningGraph,
                        UnsolvableTaskError, build_top_level,
                        consolidate_bottom_level, graph_to_json, ground_all,
                        shortest_plan, scripted_subplan)
from slap.nets import PolicyParams, forward
from slap.ppo import (PpoHyper, TrainingDivergence, goal_encoding,
                      learn_policy, learn_shared_policy)
from slap.shortcuts import (ShortcutCandidate, create_mdp, get_shortcut_data,
                            match_substitution, project,
                            prune_random_rollouts)
from slap.structs import (AbstractState, Goal, Object, State, atom_vocabulary,
                          goal_satisfied)

RESULTS_HEADER = ("task_id,method,seed,success,plan_length,planning_time_ms,"
                  "shortcuts_used,relative_path_length")


@dataclass
class EvalRecord:
    """One (task, method) evaluation outcome."""

    task_id: int
    method: str
    seed: int
    success: bool
    plan_length: int
    planning_time_ms: int
    shortcuts_used: int
    relative_path_length: float

    def __post_init__(self) -> None:
        # Six decimals is the CSV resolution; keep memory and file equal.
        self.relative_path_length = round(self.relative_path_length, 6)

    def to_csv_row(self) -> str:
        return (f"{self.task_id},{self.method},{self.seed},"
                f"{int(self.success)},{self.plan_length},"
                f"{self.planning_time_ms},{self.shortcuts_used},"
                f"{self.relative_path_length:.6f}")

    @classmethod
    def from_csv_row(cls, row: str) -> "EvalRecord":
        parts = row.split(",")
        return cls(int(parts[0]), parts[1], int(parts[2]),
                   bool(int(parts[3])), int(parts[4]), int(parts[5]),
                   int(parts[6]), float(parts[7]))


def write_records(records: Sequence[EvalRecord], path: str | Path) -> None:
    lines = [RESULTS_HEADER] + [r.to_csv_row() for r in records]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_records(path: str | Path) -> list[EvalRecord]:
    lines = Path(path).read_text(encoding="utf-8").strip().split("\n")
    assert lines[0] == RESULTS_HEADER, f"unexpected header in {path}"
    return [EvalRecord.from_csv_row(line) for line in lines[1:]]


# ----------------------------------------------------------------------
# State and candidate serialization.

def state_to_dict(state: State) -> dict:
    return {
        "objects": [[o.name, o.otype] for o in state.objects],
        "features": [list(f) for f in state.features],
        "held": state.held,
    }


def state_from_dict(data: dict) -> State:
    objects = tuple(Object(n, t) for n, t in data["objects"])
    features = tuple(tuple(float(v) for v in f) for f in data["features"])
    return State(objects, features, data["held"])


def candidate_to_ledger_line(c: ShortcutCandidate, kept: bool,
                             successes: int, n: int, t: int, k: int) -> str:
    return json.dumps({
        "s_init": atoms_to_lists(c.s_init),
        "s_term": atoms_to_lists(c.s_term),
        "add": atoms_to_lists(AbstractState(c.add_atoms)),
        "del": atoms_to_lists(AbstractState(c.del_atoms)),
        "rel_objects": [[o.name, o.otype] for o in c.rel_objects],
        "pool_size": len(c.x0_pool),
        "successes": successes,
        "n_rollouts": n,
        "t_rollout": t,
        "k_rollout": k,
        "kept": kept,
        "x0_pool": [state_to_dict(x) for x in c.x0_pool],
    })


def candidate_from_ledger_line(line: str) -> tuple[ShortcutCandidate, dict]:
    data = json.loads(line)
    pool = [state_from_dict(d) for d in data["x0_pool"]]
    cand = ShortcutCandidate(atoms_from_lists(data["s_init"]),
                             atoms_from_lists(data["s_term"]), pool)
    return cand, data


# ----------------------------------------------------------------------
# Graph building.

def scripted_executor(env: Obstacle2DEnv):
    def executor(edge: Edge, state: State):
        option = env.options[edge.label.operator.name]
        traj, ok, final = env.run_option(state, option, edge.label.binding)
        return tuple(a for _, a in traj), final, ok

    return executor


def build_pure_graph(env: Obstacle2DEnv, task, path_cap: int
                     ) -> PlanningGraph:
    grounded = ground_all(env.operators, task.initial_state.objects)
    graph = build_top_level(task.initial_state, task.goal, grounded,
                            env.abstract_state)
    return consolidate_bottom_level(graph, task.initial_state,
                                    scripted_executor(env), path_cap)


# ----------------------------------------------------------------------
# Trained shortcuts at evaluation time.

@dataclass
class TrainedShortcut:
    """A loaded policy with the relational signature it was trained under."""

    name: str
    params: PolicyParams
    s_init: AbstractState
    s_term: AbstractState
    rel_objects: tuple[Object, ...]
    add_atoms: frozenset
    del_atoms: frozenset
    shared: bool = False
    vocab: list | None = None  # atom vocabulary for shared goal encoding

    @classmethod
    def from_signature(cls, name: str, params: PolicyParams, sig: dict,
                       shared: bool = False,
                       vocab=None) -> "TrainedShortcut":
        s_init, s_term, rel = signature_states(sig)
        add = s_term.atom_set() - s_init.atom_set()
        del_ = s_init.atom_set() - s_term.atom_set()
        return cls(name, params, s_init, s_term, rel, add, del_, shared,
                   vocab)


@dataclass
class ShortcutEdgeLabel:
    """Graph edge label carrying the policy and its observation binding."""

    name: str
    trained: TrainedShortcut
    observe: Callable[[State], np.ndarray]
    term_mask: int


def make_full_executor(env: Obstacle2DEnv, t_eval: int, run_seed: int = 0,
                       stochastic_attempts: int = 4):
    """Edge executor: scripted options for operator edges; for shortcut
    edges, the deterministic policy mean first, then a few seeded stochastic
    rollouts (each up to t_eval steps). Whichever rollout reaches the
    terminal abstract state becomes the recorded, replayable segment."""
    scripted = scripted_executor(env)
    lo = env.config.action_low
    hi = env.config.action_high
    import itertools
    counter = itertools.count()

    def executor(edge: Edge, state: State):
        if not edge.is_shortcut:
            return scripted(edge, state)
        call_id = next(counter)
        label: ShortcutEdgeLabel = edge.label
        uni = env.universe(state.objects)
        params = label.trained.params
        for attempt in range(1 + stochastic_attempts):
            rng = None if attempt == 0 else np.random.default_rng(
                (run_seed * 1_000_003 + call_id) * 97 + attempt)
            actions = []
            x = state
            for _ in range(t_eval):
                obs = label.observe(x)
                mean, log_std, _ = forward(params, obs)
                raw = mean if rng is None else \
                    mean + np.exp(log_std) * rng.standard_normal(len(mean))
                clamped = np.clip(raw, lo, hi)
                action = Action(float(clamped[0]), float(clamped[1]),
                                float(clamped[2]))
                actions.append(action)
                x = env.step(x, action)
                if env.abstract_mask(x, uni) == label.term_mask:
                    return tuple(actions), x, True
        return (), state, False

    return executor


def attach_shortcut_edges(env: Obstacle2DEnv, top: PlanningGraph,
                          eval_candidates: Sequence[ShortcutCandidate],
                          trained: Sequence[TrainedShortcut]) -> int:
    """Match trained shortcuts onto candidate node pairs of an evaluation
    graph; first matching policy per pair wins. Returns edges added."""
    added = 0
    for cand in eval_candidates:
        if cand.s_init not in top.nodes or cand.s_term not in top.nodes:
            continue
        for ts in trained:
            sub = match_substitution(ts, cand)
            if sub is None:
                continue
            uni = env.universe(cand.x0_pool[0].objects)
            term_mask = uni.to_mask(cand.s_term)
            if ts.shared:
                enc = goal_encoding(ts.vocab, ts.s_term)

                def observe(state: State, _enc=enc) -> np.ndarray:
                    return np.concatenate(
                        [env.full_observation(state), _enc])
            else:
                observed = sub.image(ts.rel_objects)

                def observe(state: State, _objs=observed) -> np.ndarray:
                    return project(state, _objs)

            label = ShortcutEdgeLabel(ts.name, ts, observe, term_mask)
            top.add_edge(cand.s_init, cand.s_term, label, is_shortcut=True)
            added += 1
            break
    return added


# ----------------------------------------------------------------------
# Stage: collect.

def collect(config: ExperimentConfig, out_dir: str | Path) -> list[dict]:
    """Algorithm: sample training tasks, build and consolidate their graphs
    (n_collect repeats; identical under the deterministic simulator), gather
    shortcut candidates, prune with random rollouts, write the ledger."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    env = Obstacle2DEnv(config.env)
    graphs = []
    for i, seed in enumerate(config.train_task_seeds()):
        task = env.sample_task(seed)
        graph = None
        for _ in range(config.n_collect):
            graph = build_pure_graph(env, task, config.path_cap)
        graphs.append(graph)
        (out / f"graph_{i:02d}.json").write_text(graph_to_json(graph),
                                                 encoding="utf-8")
    candidates = get_shortcut_data(graphs)
    rollout = config.rollout
    lines = []
    stats = []
    for i, cand in enumerate(candidates):
        kept, successes = prune_random_rollouts(
            cand, env, rollout.N, rollout.T, rollout.K,
            seed=config.rollout_seed(i))
        lines.append(candidate_to_ledger_line(cand, kept, successes,
                                              rollout.N, rollout.T,
                                              rollout.K))
        stats.append({"kept": kept, "successes": successes})
    (out / "ledger.jsonl").write_text("\n".join(lines) + "\n",
                                      encoding="utf-8")
    return stats


# ----------------------------------------------------------------------
# Stage: train.

def train(config: ExperimentConfig, ledger_path: str | Path,
          out_dir: str | Path) -> tuple[list[str], list[str]]:
    """Train one policy per surviving candidate (or one shared policy),
    saving checkpoints, training logs, and snapshot checkpoints every 10% of
    episodes. Returns (checkpoint names, diverged candidate names)."""
    out = Path(out_dir)
    (out / "checkpoints").mkdir(parents=True, exist_ok=True)
    (out / "logs").mkdir(exist_ok=True)
    env = Obstacle2DEnv(config.env)
    kept: list[ShortcutCandidate] = []
    for line in Path(ledger_path).read_text(encoding="utf-8").splitlines():
        cand, data = candidate_from_ledger_line(line)
        if data["kept"]:
            kept.append(cand)
    if config.mode == "shared":
        return _train_shared(config, env, kept, out)
    saved, diverged = [], []
    for i, cand in enumerate(kept):
        mdp = create_mdp(cand, env, config.ppo.max_steps)
        snap_dir = out / "snapshots"

        def hook(ep: int, params: PolicyParams, _i=i, _c=cand) -> None:
            d = snap_dir / f"ep_{ep:05d}"
            d.mkdir(parents=True, exist_ok=True)
            sig = make_signature(_c.s_init, _c.s_term, _c.rel_objects,
                                 params.obs_dim, params.act_dim)
            save_checkpoint(d / f"cand_{_i:02d}.ckpt", params, sig)

        try:
            params, log = learn_policy(mdp, config.ppo,
                                       config.training_seed(i),
                                       snapshot_hook=hook)
        except TrainingDivergence:
            diverged.append(cand.name)
            continue
        sig = make_signature(cand.s_init, cand.s_term, cand.rel_objects,
                             params.obs_dim, params.act_dim)
        name = f"cand_{i:02d}.ckpt"
        save_checkpoint(out / "checkpoints" / name, params, sig)
        (out / "logs" / f"cand_{i:02d}.csv").write_text(log.to_csv(),
                                                        encoding="utf-8")
        saved.append(name)
    if diverged:
        (out / "diverged.json").write_text(json.dumps(diverged),
                                           encoding="utf-8")
    return saved, diverged


def _train_shared(config: ExperimentConfig, env: Obstacle2DEnv,
                  kept: list[ShortcutCandidate], out: Path):
    if not kept:
        return [], []
    objects = kept[0].x0_pool[0].objects
    vocab = atom_vocabulary(objects, env.predicates)
    mdps = [create_mdp(c, env, config.ppo.max_steps) for c in kept]
    try:
        params, log = learn_shared_policy(mdps, vocab, config.ppo,
                                          config.training_seed(0))
    except TrainingDivergence:
        return [], ["shared"]
    sig = make_signature(kept[0].s_init, kept[0].s_term,
                         kept[0].rel_objects, params.obs_dim, params.act_dim)
    save_checkpoint(out / "checkpoints" / "shared.ckpt", params, sig)
    (out / "logs" / "shared.csv").write_text(log.to_csv(), encoding="utf-8")
    sigs = [
        make_signature(c.s_init, c.s_term, c.rel_objects, params.obs_dim,
                       params.act_dim) for c in kept
    ]
    (out / "checkpoints" / "signatures.json").write_text(
        json.dumps(sigs), encoding="utf-8")
    return ["shared.ckpt"], []


def load_trained_shortcuts(config: ExperimentConfig,
                           checkpoints_dir: str | Path
                           ) -> list[TrainedShortcut]:
    cdir = Path(checkpoints_dir)
    if (cdir / "signatures.json").exists():  # shared mode
        params, _ = load_checkpoint(cdir / "shared.ckpt")
        env = Obstacle2DEnv(config.env)
        sigs = json.loads((cdir / "signatures.json").read_text())
        trained = []
        for i, sig in enumerate(sigs):
            s_init, _, _ = signature_states(sig)
            objects = None
            ts = TrainedShortcut.from_signature(f"shared[{i}]", params, sig,
                                                shared=True)
            trained.append(ts)
        if trained:
            # Rebuild the vocabulary from a training task's object universe.
            task = env.sample_task(config.train_task_seeds()[0])
            vocab = atom_vocabulary(task.initial_state.objects,
                                    env.predicates)
            for ts in trained:
                ts.vocab = vocab
        return trained
    trained = []
    for path in sorted(cdir.glob("cand_*.ckpt")):
        params, sig = load_checkpoint(path)
        trained.append(
            TrainedShortcut.from_signature(path.stem, params, sig))
    return trained


# ----------------------------------------------------------------------
# Stage: evaluate.

@dataclass
class TaskEvaluation:
    record_slap: EvalRecord
    record_pure: EvalRecord
    shortcut_edges_validated: int


def evaluate(config: ExperimentConfig,
             trained: Sequence[TrainedShortcut],
             method: str = "slap",
             pure_method: str = "pure",
             env: Obstacle2DEnv | None = None,
             eval_seeds: Sequence[int] | None = None,
             goals: Sequence[Goal] | None = None
             ) -> tuple[list[EvalRecord], list[TaskEvaluation]]:
    """Plan with scripted options plus validated shortcut edges on held-out
    tasks; emit paired SLAP and pure-planning records.

    The pure plan comes from the same consolidated graph restricted to
    scripted-only paths, which equals planning without shortcut edges.
    """
    env = env or Obstacle2DEnv(config.env)
    records: list[EvalRecord] = []
    evaluations: list[TaskEvaluation] = []
    seeds = list(eval_seeds if eval_seeds is not None
                 else config.eval_task_seeds())
    for task_id, seed in enumerate(seeds):
        task = env.sample_task(seed)
        goal = goals[task_id] if goals is not None else task.goal
        t0 = time.perf_counter_ns()
        try:
            pure_graph = _build_graph_for_goal(env, task, goal,
                                               config.path_cap)
            pure_plan = shortest_plan(pure_graph)
        except (UnsolvableTaskError, NoPlanError):
            pure_graph = None
            pure_plan = None
        t_pure_ms = (time.perf_counter_ns() - t0) // 1_000_000

        n_validated = 0
        slap_plan = None
        if pure_graph is not None:
            t1 = time.perf_counter_ns()
            eval_cands = get_shortcut_data([pure_graph])
            grounded = ground_all(env.operators, task.initial_state.objects)
            top = build_top_level(task.initial_state, goal, grounded,
                                  env.abstract_state)
            attach_shortcut_edges(env, top, eval_cands, trained)
            try:
                full = consolidate_bottom_level(
                    top, task.initial_state,
                    make_full_executor(env, config.T_eval, config.seed,
                                       config.t_eval_attempts),
                    config.path_cap)
                slap_plan = shortest_plan(full)
                n_validated = sum(1 for e in full.iter_edges()
                                  if e.is_shortcut)
                # The scripted-only paths must reproduce pure planning.
                assert scripted_subplan(full).total_cost == \
                    pure_plan.total_cost
            except (UnsolvableTaskError, NoPlanError):
                slap_plan = None
            t_slap_ms = t_pure_ms + \
                (time.perf_counter_ns() - t1) // 1_000_000
        else:
            t_slap_ms = t_pure_ms

        pure_len = pure_plan.total_cost if pure_plan else \
            env.config.max_horizon
        slap_len = slap_plan.total_cost if slap_plan else \
            env.config.max_horizon
        # Dominance: adding shortcut edges can never lengthen the plan.
        assert slap_len <= pure_len, (task_id, slap_len, pure_len)
        if slap_plan is not None:
            _assert_replay(env, task.initial_state, goal, slap_plan)
        if config.timing == "off":
            t_pure_ms = t_slap_ms = 0
        rel = slap_len / pure_len if pure_len else 1.0
        rec_slap = EvalRecord(task_id, method, config.seed,
                              slap_plan is not None, slap_len, t_slap_ms,
                              slap_plan.shortcuts_used if slap_plan else 0,
                              rel)
        rec_pure = EvalRecord(task_id, pure_method, config.seed,
                              pure_plan is not None, pure_len, t_pure_ms, 0,
                              1.0)
        records.extend([rec_slap, rec_pure])
        evaluations.append(TaskEvaluation(rec_slap, rec_pure, n_validated))
    return records, evaluations


def _build_graph_for_goal(env: Obstacle2DEnv, task, goal: Goal,
                          path_cap: int) -> PlanningGraph:
    grounded = ground_all(env.operators, task.initial_state.objects)
    graph = build_top_level(task.initial_state, goal, grounded,
                            env.abstract_state)
    return consolidate_bottom_level(graph, task.initial_state,
                                    scripted_executor(env), path_cap)


def _assert_replay(env: Obstacle2DEnv, x0: State, goal: Goal,
                   plan: Plan) -> None:
    x = x0
    for action in plan.actions:
        x = env.step(x, action)
    assert goal_satisfied(env.abstract_state(x), goal), \
        "plan replay does not satisfy the goal"
    assert len(plan.actions) == plan.total_cost


# ----------------------------------------------------------------------
# Stage: generalization protocols.

def evaluate_generalization(config: ExperimentConfig,
                            trained: Sequence[TrainedShortcut]
                            ) -> list[EvalRecord]:
    """Protocol (a): extra distractor blocks, shortcuts transferred via
    object substitution. Protocol (b): goals sampled uniformly from non-root
    abstract states of each task's evaluation graph."""
    records: list[EvalRecord] = []
    gen = config.generalization
    if gen.n_distractors > 0:
        env_cfg = EnvConfig(**{**config.env.to_dict(),
                               "n_distractors": gen.n_distractors})
        env = Obstacle2DEnv(env_cfg)
        recs, _ = evaluate(config, trained, method="slap_objgen",
                           pure_method="pure_objgen", env=env,
                           eval_seeds=config.eval_task_seeds(offset=1))
        records.extend(recs)
    if gen.random_goals:
        env = Obstacle2DEnv(config.env)
        seeds = config.eval_task_seeds(offset=2)
        goals = []
        rng = np.random.default_rng(config.seed * 1_000_000 + 900_000)
        for seed in seeds:
            task = env.sample_task(seed)
            graph = build_pure_graph(env, task, config.path_cap)
            non_root = [s for s in graph.nodes if s != graph.root]
            chosen = non_root[int(rng.integers(len(non_root)))]
            goals.append(Goal(chosen.atoms))
        recs, _ = evaluate(config, trained, method="slap_goalgen",
                           pure_method="pure_goalgen", env=env,
                           eval_seeds=seeds, goals=goals)
        records.extend(recs)
    return records


# ----------------------------------------------------------------------
# Stage: flat PPO baseline.

class FullTaskMDP:
    """The complete task as one episodic MDP: full unprojected observation,
    -1 reward per step, terminal on goal satisfaction, horizon = the
    environment maximum. Episodes cycle through the training tasks."""

    def __init__(self, env: Obstacle2DEnv, tasks: Sequence) -> None:
        self.env = env
        self.tasks = list(tasks)
        self.horizon = env.config.max_horizon
        sample = self.tasks[0].initial_state
        self.obs_dim = len(env.full_observation(sample))
        self.act_dim = 3
        self.action_low = env.config.action_low
        self.action_high = env.config.action_high
        self._uni = env.universe(sample.objects)
        self._goal_masks = [
            self._goal_mask(t.goal) for t in self.tasks
        ]
        self._ep = -1
        self._state: State | None = None
        self._t = 0

    def _goal_mask(self, goal: Goal) -> int:
        return self._uni.to_mask(AbstractState(goal.atoms))

    def reset(self, rng: np.random.Generator) -> np.ndarray:
        self._ep += 1
        self._state = self.tasks[self._ep % len(self.tasks)].initial_state
        self._t = 0
        return self.env.full_observation(self._state)

    def step(self, action) -> tuple[np.ndarray, float, bool, bool]:
        if not isinstance(action, Action):
            action = Action(float(action[0]), float(action[1]),
                            float(action[2]))
        self._state = self.env.step(self._state, action)
        self._t += 1
        gmask = self._goal_masks[self._ep % len(self.tasks)]
        m = self.env.abstract_mask(self._state, self._uni)
        terminated = (m & gmask) == gmask
        truncated = not terminated and self._t >= self.horizon
        return self.env.full_observation(self._state), -1.0, terminated, \
            truncated


def run_flat_ppo_baseline(config: ExperimentConfig, out_dir: str | Path
                          ) -> list[EvalRecord]:
    """Train flat PPO on the task distribution, then roll out the
    deterministic policy mean on held-out tasks."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    env = Obstacle2DEnv(config.env)
    train_tasks = [env.sample_task(s) for s in config.train_task_seeds()]
    mdp = FullTaskMDP(env, train_tasks)
    hyper = PpoHyper(**{**config.ppo.to_dict(),
                        "entropy_coeff": config.baseline_entropy_coeff,
                        "episodes": config.baseline_episodes,
                        "max_steps": env.config.max_horizon})
    params, log = learn_policy(mdp, hyper,
                               config.seed * 1_000_000 + 850_000)
    (out / "flat_ppo_log.csv").write_text(log.to_csv(), encoding="utf-8")

    records = []
    lo, hi = env.config.action_low, env.config.action_high
    for task_id, seed in enumerate(config.eval_task_seeds()):
        task = env.sample_task(seed)
        uni = env.universe(task.initial_state.objects)
        gmask = uni.to_mask(AbstractState(task.goal.atoms))
        x = task.initial_state
        steps = env.config.max_horizon
        success = False
        t0 = time.perf_counter_ns()
        for t in range(env.config.max_horizon):
            obs = env.full_observation(x)
            mean, _, _ = forward(params, obs)
            clamped = np.clip(mean, lo, hi)
            x = env.step(x, Action(float(clamped[0]), float(clamped[1]),
                                   float(clamped[2])))
            m = env.abstract_mask(x, uni)
            if (m & gmask) == gmask:
                steps = t + 1
                success = True
                break
        ms = 0 if config.timing == "off" else \
            (time.perf_counter_ns() - t0) // 1_000_000
        try:
            pure_len = shortest_plan(
                build_pure_graph(env, task, config.path_cap)).total_cost
        except (UnsolvableTaskError, NoPlanError):
            pure_len = env.config.max_horizon
        plan_length = steps if success else env.config.max_horizon
        records.append(
            EvalRecord(task_id, "ppo-flat", config.seed, success,
                       plan_length, ms, 0, plan_length / pure_len))
    return records


# ----------------------------------------------------------------------
# Stage: pruning ablation.

def ablate_pruning(config: ExperimentConfig, ratios: Sequence[int],
                   work_dir: str | Path) -> list[dict]:
    """Sweep the keep threshold K over K/N ratios using one collect pass and
    one training pass (policies are independent per candidate, so higher
    ratios evaluate with a subset of the lowest ratio's checkpoints)."""
    work = Path(work_dir)
    work.mkdir(parents=True, exist_ok=True)
    collect(config, work / "collect")
    ledger = work / "collect" / "ledger.jsonl"
    lines = ledger.read_text(encoding="utf-8").splitlines()
    entries = [json.loads(line) for line in lines]
    ratios = sorted(ratios)
    ks = {r: max(1, round(config.rollout.N * r / 100)) for r in ratios}
    min_k = min(ks.values())

    # Train the union once: everything surviving the loosest threshold.
    union_lines = []
    union_index: list[int] = []
    for i, (line, entry) in enumerate(zip(lines, entries)):
        data = dict(entry)
        data["kept"] = entry["successes"] >= min_k
        if data["kept"]:
            union_index.append(i)
        union_lines.append(json.dumps(data))
    union_ledger = work / "union_ledger.jsonl"
    union_ledger.write_text("\n".join(union_lines) + "\n", encoding="utf-8")
    train(config, union_ledger, work / "train")
    trained = load_trained_shortcuts(config, work / "train" / "checkpoints")
    by_candidate = {}
    for ts in trained:
        idx = int(ts.name.split("_")[1])
        by_candidate[union_index[idx]] = ts

    rows = []
    for r in ratios:
        k = ks[r]
        surviving = [i for i, e in enumerate(entries)
                     if e["successes"] >= k]
        subset = [by_candidate[i] for i in surviving if i in by_candidate]
        records, _ = evaluate(config, subset)
        slap = [rec for rec in records if rec.method == "slap"]
        rows.append({
            "ratio": r,
            "k": k,
            "n": config.rollout.N,
            "surviving": len(surviving),
            "success_rate": sum(rec.success for rec in slap) / len(slap),
            "mean_plan_length": float(np.mean([rec.plan_length
                                               for rec in slap])),
        })
    return rows


# ----------------------------------------------------------------------
# Stage: training dynamics.

def training_dynamics(config: ExperimentConfig, train_dir: str | Path
                      ) -> list[dict]:
    """Evaluate every snapshot checkpoint set: how many shortcut edges
    survive validation and how short the plans get as training progresses."""
    snap_root = Path(train_dir) / "snapshots"
    rows = []
    for snap_dir in sorted(snap_root.glob("ep_*")):
        episodes = int(snap_dir.name.split("_")[1])
        trained = load_trained_shortcuts(config, snap_dir)
        records, evaluations = evaluate(config, trained)
        slap = [r for r in records if r.method == "slap"]
        rows.append({
            "episodes": episodes,
            "shortcuts_validated": sum(e.shortcut_edges_validated
                                       for e in evaluations),
            "mean_plan_length": float(np.mean([r.plan_length
                                               for r in slap])),
            "std_plan_length": float(np.std([r.plan_length for r in slap],
                                            ddof=1)),
            "success_rate": sum(r.success for r in slap) / len(slap),
        })
    return rows
