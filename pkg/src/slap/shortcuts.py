"""Shortcut discovery: candidate enumeration from training graphs, random
rollout pruning, relational signatures (relevant atoms/objects), state
projection, and object substitution matching.

A shortcut candidate is a pair of abstract states not already connected by an
option edge, where the terminal state sits more than one option below the
initial one. Its policy observes only the objects appearing in the add/delete
atom sets, which is what lets a trained policy transfer to tasks with extra
irrelevant objects.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from slap.env import Action, Obstacle2DEnv
from slap.graph import PlanningGraph
from slap.structs import AbstractState, Atom, Object, State


class SubstitutionError(Exception):
    """A relevant object required by a projection is missing."""


@dataclass
class ShortcutCandidate:
    """A proposed learned option between two abstract states."""

    s_init: AbstractState
    s_term: AbstractState
    x0_pool: list[State]
    add_atoms: frozenset[Atom] = field(init=False)
    del_atoms: frozenset[Atom] = field(init=False)
    rel_objects: tuple[Object, ...] = field(init=False)

    def __post_init__(self) -> None:
        assert self.s_init != self.s_term
        assert self.x0_pool, "candidate needs at least one initial state"
        add, del_, rel = relevant_signature(self.s_init, self.s_term,
                                            self.x0_pool[0])
        self.add_atoms = add
        self.del_atoms = del_
        self.rel_objects = rel

    @property
    def key(self) -> tuple:
        return (self.s_init.atoms, self.s_term.atoms)

    @property
    def name(self) -> str:
        adds = ",".join(repr(a) for a in sorted(self.add_atoms))
        dels = ",".join(repr(a) for a in sorted(self.del_atoms))
        return f"shortcut[+{adds} -{dels}]"

    @property
    def obs_dim(self) -> int:
        return sum(len(self.x0_pool[0].get(o.name)) for o in self.rel_objects)


def relevant_signature(
    s_init: AbstractState, s_term: AbstractState, state: State
) -> tuple[frozenset[Atom], frozenset[Atom], tuple[Object, ...]]:
    """Add/delete atom sets and the relevant objects they mention, ordered by
    the canonical object ordering of ``state``."""
    add = s_term.atom_set() - s_init.atom_set()
    del_ = s_init.atom_set() - s_term.atom_set()
    names = {arg for atom in add | del_ for arg in atom.args}
    rel = tuple(o for o in state.objects if o.name in names)
    return add, del_, rel


def get_shortcut_data(
        graphs: Sequence[PlanningGraph]) -> list[ShortcutCandidate]:
    """Enumerate candidates over all graphs, merging by (s_init, s_term).

    A node pair (u, v) qualifies when v is more than one option level below
    u and no graph already connects u to v with a single edge. Initial-state
    pools aggregate the recorded concrete states of u across graphs.
    """
    connected: set[tuple] = set()
    for graph in graphs:
        for edge in graph.iter_edges():
            connected.add((edge.source.atoms, edge.target.atoms))
    merged: dict[tuple, ShortcutCandidate] = {}
    for graph in graphs:
        node_list = list(graph.nodes)
        for u in node_list:
            pool = graph.node_states(u)
            if not pool:
                continue
            for v in node_list:
                if u == v or graph.depth(v) <= graph.depth(u) + 1:
                    continue
                if (u.atoms, v.atoms) in connected:
                    continue
                key = (u.atoms, v.atoms)
                if key in merged:
                    merged[key].x0_pool.extend(pool)
                else:
                    merged[key] = ShortcutCandidate(u, v, list(pool))
    return [merged[k] for k in sorted(merged)]


def prune_random_rollouts(candidate: ShortcutCandidate, env: Obstacle2DEnv,
                          n_rollouts: int, t_rollout: int, k_rollout: int,
                          seed: int) -> tuple[bool, int]:
    """Run uniform-random episodes from the candidate pool; keep the
    candidate when the terminal abstract state is reached at least
    ``k_rollout`` times.

    All ``n_rollouts`` episodes run even once the threshold is met so the
    recorded success count supports threshold sweeps.
    """
    assert n_rollouts >= k_rollout >= 0 and t_rollout >= 1
    rng = np.random.default_rng(seed)
    cfg = env.config
    uni = env.universe(candidate.x0_pool[0].objects)
    term_mask = uni.to_mask(candidate.s_term)
    lo = np.array([-cfg.a_max, -cfg.a_max, -1.0])
    hi = np.array([cfg.a_max, cfg.a_max, 1.0])
    successes = 0
    for i in range(n_rollouts):
        x = candidate.x0_pool[i % len(candidate.x0_pool)]
        draws = rng.uniform(lo, hi, size=(t_rollout, 3))
        for t in range(t_rollout):
            x = env.step(x, Action(draws[t, 0], draws[t, 1], draws[t, 2]))
            if env.abstract_mask(x, uni) == term_mask:
                successes += 1
                break
    return successes >= k_rollout, successes


def project(state: State, rel_objects: Sequence[Object]) -> np.ndarray:
    """Concatenate the relevant objects' feature vectors in fixed order."""
    parts = []
    for obj in rel_objects:
        try:
            parts.append(state.get(obj.name))
        except KeyError as e:
            raise SubstitutionError(
                f"relevant object {obj.name} missing from state") from e
    return np.concatenate([np.asarray(p, dtype=np.float64) for p in parts])


@dataclass(frozen=True)
class Substitution:
    """A type-preserving injection between relevant-object sets."""

    mapping: tuple[tuple[Object, Object], ...]

    def apply(self, atoms: frozenset[Atom]) -> frozenset[Atom]:
        table = {a.name: b.name for a, b in self.mapping}
        return frozenset(
            Atom(atom.predicate,
                 tuple(table.get(arg, arg) for arg in atom.args))
            for atom in atoms)

    def image(self, objects: Sequence[Object]) -> tuple[Object, ...]:
        table = dict(self.mapping)
        return tuple(table[o] for o in objects)

    def is_valid_for(self, train: "ShortcutCandidate",
                     eval_c: "ShortcutCandidate") -> bool:
        """Independent re-check of injectivity, typing, and containment."""
        sources = [a for a, _ in self.mapping]
        images = [b for _, b in self.mapping]
        if len(set(sources)) != len(sources) or \
                len(set(images)) != len(images):
            return False
        if any(a.otype != b.otype for a, b in self.mapping):
            return False
        if set(sources) != set(train.rel_objects):
            return False
        if not set(images) <= set(eval_c.rel_objects):
            return False
        return (self.apply(train.add_atoms) <= eval_c.add_atoms
                and self.apply(train.del_atoms) <= eval_c.del_atoms)


def match_substitution(train: ShortcutCandidate,
                       eval_c: ShortcutCandidate) -> Substitution | None:
    """First type-preserving injection (in canonical enumeration order) whose
    substituted add/delete sets are contained in the eval candidate's."""
    sources = list(train.rel_objects)

    def backtrack(i: int, used: set[Object],
                  partial: list[tuple[Object, Object]]
                  ) -> Substitution | None:
        if i == len(sources):
            sub = Substitution(tuple(partial))
            if sub.apply(train.add_atoms) <= eval_c.add_atoms and \
                    sub.apply(train.del_atoms) <= eval_c.del_atoms:
                return sub
            return None
        src = sources[i]
        for img in eval_c.rel_objects:
            if img in used or img.otype != src.otype:
                continue
            partial.append((src, img))
            found = backtrack(i + 1, used | {img}, partial)
            if found is not None:
                return found
            partial.pop()
        return None

    return backtrack(0, set(), [])


class ShortcutMDP:
    """The learning environment induced by one shortcut candidate: projected
    observations, constant -1 reward, terminal when the candidate's terminal
    abstract state is reached, truncation at ``t_max`` steps."""

    def __init__(self, candidate: ShortcutCandidate, env: Obstacle2DEnv,
                 t_max: int) -> None:
        self.candidate = candidate
        self.env = env
        self.t_max = t_max
        self.action_low = env.config.action_low
        self.action_high = env.config.action_high
        self.obs_dim = candidate.obs_dim
        self.act_dim = 3
        self._uni = env.universe(candidate.x0_pool[0].objects)
        self._term_mask = self._uni.to_mask(candidate.s_term)
        self._state: State | None = None
        self._t = 0

    @property
    def state(self) -> State:
        assert self._state is not None
        return self._state

    def observe(self, state: State) -> np.ndarray:
        return project(state, self.candidate.rel_objects)

    def reset(self, rng: np.random.Generator) -> np.ndarray:
        pool = self.candidate.x0_pool
        self._state = pool[int(rng.integers(len(pool)))]
        self._t = 0
        return self.observe(self._state)

    def step(self, action: Action | np.ndarray
             ) -> tuple[np.ndarray, float, bool, bool]:
        """Returns (observation, reward, terminated, truncated)."""
        assert self._state is not None
        if not isinstance(action, Action):
            action = Action(float(action[0]), float(action[1]),
                            float(action[2]))
        self._state = self.env.step(self._state, action)
        self._t += 1
        terminated = \
            self.env.abstract_mask(self._state, self._uni) == self._term_mask
        truncated = not terminated and self._t >= self.t_max
        return self.observe(self._state), -1.0, terminated, truncated


def create_mdp(candidate: ShortcutCandidate, env: Obstacle2DEnv,
               t_max: int) -> ShortcutMDP:
    """Wrap the simulator as the candidate's shortcut-learning MDP."""
    return ShortcutMDP(candidate, env, t_max)
