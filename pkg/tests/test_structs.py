"""Core vocabulary: abstraction, goals, atom enumeration, serialization."""

import json

import numpy as np
import pytest

from slap.env import EnvConfig, Obstacle2DEnv
from slap.structs import (AbstractState, Atom, Goal, Object, Predicate, State,
                          abstract, atom_vocabulary, goal_satisfied,
                          task_from_json, task_to_json)


@pytest.fixture(scope="module")
def env():
    return Obstacle2DEnv()


@pytest.fixture(scope="module")
def task(env):
    return env.sample_task(7)


def test_gripper_empty_atom_present(env, task):
    s = abstract(task.initial_state, env.predicates)
    assert Atom("GripperEmpty", ("robot",)) in s


def test_overlap_classifier_geometry():
    # Region spans x in [0.4, 0.6], y in [0, 0.2]. A block centered at
    # x=0.55 overlaps horizontally by min(0.65, 0.6) - max(0.45, 0.4) = 0.15,
    # which exceeds the 0.01 threshold; at x=0.25 the overlap is negative.
    env = Obstacle2DEnv(EnvConfig(n_obstacles=1))
    task = env.sample_task(3)
    state = task.initial_state
    idx = {o.name: i for i, o in enumerate(state.objects)}

    def with_target_at(x):
        feats = list(state.features)
        feats[idx["target"]] = (x, 0.1, 0.0)
        feats[idx["obstacle0"]] = (0.85, 0.1, 0.0)
        return State(state.objects, tuple(feats))

    ov = Atom("Overlap", ("target", "target_region"))
    assert ov in abstract(with_target_at(0.55), env.predicates)
    assert ov not in abstract(with_target_at(0.25), env.predicates)
    # A lifted block no longer intersects the region rectangle.
    feats = list(state.features)
    feats[idx["target"]] = (0.55, 0.55, 0.0)
    lifted = State(state.objects, tuple(feats))
    assert ov not in abstract(lifted, env.predicates)


def test_abstract_deterministic(env, task):
    a = abstract(task.initial_state, env.predicates)
    b = abstract(task.initial_state, env.predicates)
    assert a == b and hash(a) == hash(b)


def test_abstract_matches_fast_path(env):
    # The bitmask evaluation and the generic classifier sweep must agree on
    # arbitrary reachable states.
    from slap.env import Action
    rng = np.random.default_rng(0)
    x = env.sample_task(11).initial_state
    for _ in range(200):
        x = env.step(x, Action(rng.uniform(-0.05, 0.05),
                               rng.uniform(-0.05, 0.05),
                               rng.uniform(-1, 1)))
        assert env.abstract_state(x) == abstract(x, env.predicates)


def test_goal_satisfied_subset_semantics(env, task):
    s = abstract(task.initial_state, env.predicates)
    assert goal_satisfied(s, Goal([]))
    assert goal_satisfied(s, Goal(s.atoms))
    missing = Goal([Atom("Overlap", ("target", "target_region"))])
    assert not goal_satisfied(s, missing)


def test_abstract_state_canonicalization():
    a1 = Atom("On", ("b", "t"))
    a2 = Atom("Clear", ("g",))
    assert AbstractState([a1, a2]) == AbstractState([a2, a1, a1])
    assert hash(AbstractState([a1, a2])) == hash(AbstractState([a2, a1]))


def test_atom_vocabulary_counts_and_order(env):
    robot = Object("robot", "robot")
    region = Object("g", "region")
    blocks = [Object("a", "block"), Object("b", "block")]
    ge = Predicate("GripperEmpty", ("robot",), lambda s, o: True)
    ov = Predicate("Overlap", ("block", "region"), lambda s, o: True)
    assert atom_vocabulary([robot], [ge]) == [Atom("GripperEmpty", ("robot",))]
    vocab = atom_vocabulary([robot, *blocks, region], [ov])
    assert vocab == [Atom("Overlap", ("a", "g")), Atom("Overlap", ("b", "g"))]
    assert vocab == atom_vocabulary([robot, *blocks, region], [ov])


def test_task_serialization_round_trip(env, task):
    doc = task_to_json(task)
    again = task_from_json(doc)
    assert again == task
    assert task_to_json(again) == doc
    # Field order is part of the format.
    data = json.loads(doc)
    assert list(data) == ["seed", "objects", "goal"]
    assert list(data["objects"][0]) == ["name", "otype", "features"]


def test_task_goal_over_unknown_object_rejected(task):
    data = json.loads(task_to_json(task))
    data["goal"].append({"predicate": "On", "args": ["ghost", "table"]})
    with pytest.raises(ValueError, match="ghost"):
        task_from_json(json.dumps(data))
