"""Shortcut discovery: candidate enumeration, rollout pruning, signatures,
projections, substitution matching, and the shortcut MDP."""

import itertools

import numpy as np
import pytest

from slap.env import Obstacle2DEnv
from slap.graph import (PlanningGraph, build_top_level,
                        consolidate_bottom_level, ground_all)
from slap.shortcuts import (ShortcutCandidate, SubstitutionError,
                            create_mdp, get_shortcut_data, match_substitution,
                            project, prune_random_rollouts,
                            relevant_signature)
from slap.structs import AbstractState, Atom, Object, State


@pytest.fixture(scope="module")
def env():
    return Obstacle2DEnv()


def build_graph(env, seed):
    task = env.sample_task(seed)
    grounded = ground_all(env.operators, task.initial_state.objects)
    g = build_top_level(task.initial_state, task.goal, grounded,
                        env.abstract_state)

    def executor(edge, state):
        traj, ok, final = env.run_option(
            state, env.options[edge.label.operator.name], edge.label.binding)
        return tuple(a for _, a in traj), final, ok

    return consolidate_bottom_level(g, task.initial_state, executor)


@pytest.fixture(scope="module")
def graphs(env):
    return [build_graph(env, seed) for seed in range(10)]


@pytest.fixture(scope="module")
def candidates(env, graphs):
    return get_shortcut_data(graphs)


def _state(names_types, feats, held=None):
    objs = tuple(Object(n, t) for n, t in names_types)
    return State(objs, tuple(feats), held)


# ----------------------------------------------------------------------
# Candidate enumeration.

def test_linear_chain_single_candidate(env):
    a, b, c = (AbstractState([Atom("n", (str(i),))]) for i in range(3))
    g = PlanningGraph(a)
    g.add_node(b, 1)
    g.add_node(c, 2)
    g.add_edge(a, b, "ab")
    g.add_edge(b, c, "bc")
    g.goal_nodes.add(c)
    from slap.env import Action
    x0 = env.sample_task(0).initial_state
    g = consolidate_bottom_level(
        g, x0, lambda e, s: ((Action(0, 0, 0),), s, True))
    cands = get_shortcut_data([g])
    assert len(cands) == 1
    assert cands[0].s_init == a and cands[0].s_term == c


def test_connected_pairs_excluded(candidates, graphs):
    connected = set()
    for g in graphs:
        for e in g.iter_edges():
            connected.add((e.source.atoms, e.target.atoms))
    for c in candidates:
        assert (c.s_init.atoms, c.s_term.atoms) not in connected


def test_candidate_count_at_least_eleven(candidates):
    assert len(candidates) >= 11


def test_candidates_merge_pools_across_graphs(candidates, graphs):
    # The standard task family shares its object universe, so pools from
    # ten graphs merge; every pool state must abstract to s_init.
    env = Obstacle2DEnv()
    assert any(len(c.x0_pool) > 10 for c in candidates)
    for c in candidates[:5]:
        for x in c.x0_pool[:3]:
            assert env.abstract_state(x) == c.s_init


def test_candidate_depth_skipping(graphs):
    for g in graphs:
        cands = get_shortcut_data([g])
        for c in cands:
            assert g.depth(c.s_term) > g.depth(c.s_init) + 1


def test_get_shortcut_data_deterministic(graphs):
    a = [c.key for c in get_shortcut_data(graphs)]
    b = [c.key for c in get_shortcut_data(graphs)]
    assert a == b


# ----------------------------------------------------------------------
# Pruning.

def test_prune_impossible_terminal(env, candidates):
    c = candidates[0]
    impossible = AbstractState([Atom("Holding", ("robot", "target")),
                                Atom("Holding", ("robot", "obstacle0"))])
    cand = ShortcutCandidate(c.s_init, impossible, list(c.x0_pool))
    keep, succ = prune_random_rollouts(cand, env, 50, 30, 1, seed=0)
    assert not keep and succ == 0


def test_prune_k_zero_keeps(env, candidates):
    c = candidates[0]
    keep, _ = prune_random_rollouts(c, env, 5, 5, 0, seed=0)
    assert keep


def test_prune_deterministic_in_seed(env, candidates):
    c = candidates[1]
    r1 = prune_random_rollouts(c, env, 40, 40, 1, seed=7)
    r2 = prune_random_rollouts(c, env, 40, 40, 1, seed=7)
    assert r1 == r2


def test_prune_monotone_in_k(env, candidates):
    # For a fixed seed the kept set shrinks as K grows.
    counts = []
    for c in candidates[:6]:
        _, succ = prune_random_rollouts(c, env, 60, 60, 1, seed=3)
        counts.append(succ)
    for k in range(0, 5):
        kept_k = [s >= k for s in counts]
        kept_k1 = [s >= k + 1 for s in counts]
        assert all(not b or a for a, b in zip(kept_k, kept_k1))


# ----------------------------------------------------------------------
# Signatures and projections.

def test_relevant_signature_set_differences():
    objs = (Object("r", "robot"), Object("A", "block"), Object("t", "table"),
            Object("g", "region"))
    state = State(objs, ((0.5, 0.5, 0.0), (0.2, 0.1, 0.0), (0.5, 0.0),
                         (0.5, 0.1)))
    p_a = Atom("On", ("A", "t"))
    s1 = AbstractState([p_a, Atom("GripperEmpty", ("r",))])
    s2 = AbstractState([Atom("GripperEmpty", ("r",))])
    add, del_, rel = relevant_signature(s1, s2, state)
    assert add == frozenset() and del_ == {p_a}
    assert rel == (objs[1], objs[2])  # canonical state order


def test_grasp_like_signature(env, candidates):
    # Some candidate adds a Holding atom and deletes GripperEmpty.
    hits = [
        c for c in candidates
        if any(a.predicate == "Holding" for a in c.add_atoms)
        and any(a.predicate == "GripperEmpty" for a in c.del_atoms)
    ]
    assert hits
    for c in hits:
        assert any(o.otype == "robot" for o in c.rel_objects)


def test_projection_ignores_irrelevant_objects(env, candidates):
    rng = np.random.default_rng(0)
    c = next(c for c in candidates
             if len(c.rel_objects) < len(c.x0_pool[0].objects))
    irrelevant = [o.name for o in c.x0_pool[0].objects
                  if o not in c.rel_objects and o.otype == "block"]
    assert irrelevant
    x = c.x0_pool[0]
    base = project(x, c.rel_objects)
    for _ in range(50):
        feats = list(x.features)
        for name in irrelevant:
            i = next(j for j, o in enumerate(x.objects) if o.name == name)
            feats[i] = tuple(float(v) for v in rng.uniform(0, 1, 3))
        perturbed = State(x.objects, tuple(feats), x.held)
        assert np.array_equal(project(perturbed, c.rel_objects), base)


def test_projection_dimension_is_feature_sum(candidates):
    for c in candidates[:4]:
        dim = sum(len(c.x0_pool[0].get(o.name)) for o in c.rel_objects)
        assert project(c.x0_pool[0], c.rel_objects).shape == (dim,)
        assert c.obs_dim == dim


def test_projection_missing_object_raises(candidates):
    c = candidates[0]
    ghost = Object("ghost", "block")
    with pytest.raises(SubstitutionError):
        project(c.x0_pool[0], (ghost,))


# ----------------------------------------------------------------------
# Substitution matching.

def _mk_candidate(objs, feats, init_atoms, term_atoms, held=None):
    state = _state(objs, feats, held)
    return ShortcutCandidate(AbstractState(init_atoms),
                             AbstractState(term_atoms), [state])


def test_identity_substitution(candidates):
    c = candidates[0]
    sub = match_substitution(c, c)
    assert sub is not None
    assert all(a == b for a, b in sub.mapping)
    assert sub.is_valid_for(c, c)


def test_distractor_does_not_disturb_substitution(env):
    # An extra never-moving block must not appear in any candidate's
    # relevant objects, so a same-signature eval candidate matches with the
    # identity substitution.
    from slap.env import EnvConfig
    env2 = Obstacle2DEnv(EnvConfig(n_distractors=1))
    g1 = build_graph(env, 0)
    g2 = build_graph(env2, 50)
    trains = get_shortcut_data([g1])
    evals = get_shortcut_data([g2])
    by_sig = {(ev.add_atoms, ev.del_atoms): ev for ev in evals}
    matched = 0
    for tr in trains:
        ev = by_sig.get((tr.add_atoms, tr.del_atoms))
        if ev is None:
            continue
        sub = match_substitution(tr, ev)
        assert sub is not None
        assert sub.is_valid_for(tr, ev)
        assert all(a == b for a, b in sub.mapping)
        matched += 1
    assert matched >= 1


def test_substitution_renames_block():
    objs = [("r", "robot"), ("A", "block"), ("B", "block"), ("t", "table"),
            ("g", "region")]
    feats = [(0.5, 0.5, 0.0), (0.2, 0.1, 0.0), (0.8, 0.1, 0.0), (0.5, 0.0),
             (0.5, 0.1)]
    ge = Atom("GripperEmpty", ("r",))
    train = _mk_candidate(objs, feats, [ge, Atom("On", ("A", "t"))], [ge],
                          held=None)
    eval_c = _mk_candidate(objs, feats,
                           [ge, Atom("On", ("B", "t")),
                            Atom("Clear", ("g",))],
                           [ge, Atom("Clear", ("g",))])
    sub = match_substitution(train, eval_c)
    assert sub is not None
    table = {a.name: b.name for a, b in sub.mapping}
    assert table["A"] == "B"
    assert sub.is_valid_for(train, eval_c)


def test_substitution_none_when_types_mismatch():
    objs = [("r", "robot"), ("A", "block"), ("t", "table"), ("g", "region")]
    feats = [(0.5, 0.5, 0.0), (0.2, 0.1, 0.0), (0.5, 0.0), (0.5, 0.1)]
    train = _mk_candidate(objs, feats, [Atom("On", ("A", "t"))], [])
    eval_c = _mk_candidate(objs, feats, [Atom("Clear", ("g",))], [])
    assert match_substitution(train, eval_c) is None


def _exhaustive_match(train, eval_c):
    by_type = {}
    for o in eval_c.rel_objects:
        by_type.setdefault(o.otype, []).append(o)
    sources = list(train.rel_objects)
    pools = [by_type.get(o.otype, []) for o in sources]
    for images in itertools.product(*pools):
        if len(set(images)) != len(images):
            continue
        from slap.shortcuts import Substitution
        sub = Substitution(tuple(zip(sources, images)))
        if sub.apply(train.add_atoms) <= eval_c.add_atoms and \
                sub.apply(train.del_atoms) <= eval_c.del_atoms:
            return sub
    return None


def test_substitution_agrees_with_exhaustive_oracle(env, candidates):
    rng = np.random.default_rng(1)
    pairs = 0
    for _ in range(200):
        tr = candidates[int(rng.integers(len(candidates)))]
        ev = candidates[int(rng.integers(len(candidates)))]
        got = match_substitution(tr, ev)
        want = _exhaustive_match(tr, ev)
        assert (got is None) == (want is None)
        if got is not None:
            assert got.is_valid_for(tr, ev)
            pairs += 1
    assert pairs > 0


# ----------------------------------------------------------------------
# Shortcut MDP.

def test_mdp_constant_negative_reward(env, candidates):
    c = candidates[0]
    mdp = create_mdp(c, env, t_max=50)
    rng = np.random.default_rng(0)
    mdp.reset(rng)
    for _ in range(10):
        _, r, terminated, truncated = mdp.step(
            np.array([0.01, 0.0, 0.0]))
        assert r == -1.0
        if terminated or truncated:
            break


def test_mdp_truncates_at_t_max(env, candidates):
    c = next(c for c in candidates
             if any(a.predicate == "Holding" for a in c.add_atoms))
    mdp = create_mdp(c, env, t_max=7)
    rng = np.random.default_rng(0)
    mdp.reset(rng)
    steps = 0
    while True:
        _, _, terminated, truncated = mdp.step(np.array([0.0, 0.0, 0.0]))
        steps += 1
        if terminated or truncated:
            break
    assert truncated and steps == 7


def test_mdp_episode_return_matches_steps(env, candidates):
    # An episode reaching the terminal state at step t has return -t.
    c = candidates[0]
    mdp = create_mdp(c, env, t_max=50)
    rng = np.random.default_rng(3)
    ret, steps, done = 0.0, 0, False
    mdp.reset(rng)
    cfg = env.config
    while not done and steps < 50:
        a = rng.uniform([-cfg.a_max, -cfg.a_max, -1],
                        [cfg.a_max, cfg.a_max, 1])
        _, r, terminated, truncated = mdp.step(a)
        ret += r
        steps += 1
        done = terminated or truncated
    assert ret == -steps


def test_mdp_initial_states_from_pool(env, candidates):
    c = candidates[0]
    mdp = create_mdp(c, env, t_max=50)
    rng = np.random.default_rng(5)
    pool_ids = {id(x) for x in c.x0_pool}
    for _ in range(10):
        mdp.reset(rng)
        assert id(mdp.state) in pool_ids
