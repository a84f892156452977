"""Core state vocabulary: objects, features, predicates, atoms, abstract states,
goals, and tasks.

All types here are immutable value objects. Abstract states are canonically
sorted atom tuples so that structural equality and hashing are independent of
construction order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

# Object type tags used throughout the toolkit.
OBJECT_TYPES = ("robot", "block", "region", "table")

# Feature vector length per object type. Robot: (x, y, holding flag).
# Block: (x, y, held flag). Region and table: static (x, y) anchors.
FEATURE_DIMS = {"robot": 3, "block": 3, "region": 2, "table": 2}


@dataclass(frozen=True, order=True)
class Object:
    """A named, typed object. Names are unique within a task."""

    name: str
    otype: str

    def __post_init__(self) -> None:
        assert self.otype in OBJECT_TYPES, f"unknown otype: {self.otype}"

    def __repr__(self) -> str:
        return f"{self.name}:{self.otype}"


@dataclass(frozen=True)
class State:
    """Object-centric continuous world state.

    The object ordering is the fixed canonical task ordering, and every object
    has exactly one feature vector whose length is determined by its type.
    ``held`` is the name of the grasped block, if any.
    """

    objects: tuple[Object, ...]
    features: tuple[tuple[float, ...], ...]
    held: str | None = None

    def __post_init__(self) -> None:
        # Construction is on the simulator's hot path; deep checks live in
        # validate() and run at task-sampling and deserialization boundaries.
        assert len(self.objects) == len(self.features)

    def validate(self) -> None:
        names = [o.name for o in self.objects]
        assert len(set(names)) == len(names), "object names must be unique"
        for obj, feats in zip(self.objects, self.features):
            assert len(feats) == FEATURE_DIMS[obj.otype], (
                f"{obj}: expected {FEATURE_DIMS[obj.otype]} features, "
                f"got {len(feats)}")
        if self.held is not None:
            assert any(o.name == self.held for o in self.objects)

    @property
    def index(self) -> dict[str, int]:
        return {o.name: i for i, o in enumerate(self.objects)}

    def get(self, name: str) -> tuple[float, ...]:
        """Feature vector for the named object."""
        for obj, feats in zip(self.objects, self.features):
            if obj.name == name:
                return feats
        raise KeyError(name)

    def obj(self, name: str) -> Object:
        for o in self.objects:
            if o.name == name:
                return o
        raise KeyError(name)


@dataclass(frozen=True)
class Predicate:
    """A typed relation schema with a boolean classifier over states.

    The classifier must be pure: no state mutation and no randomness.
    """

    name: str
    param_types: tuple[str, ...]
    classifier: Callable[[State, tuple[Object, ...]], bool] = field(
        compare=False)

    @property
    def arity(self) -> int:
        return len(self.param_types)

    def holds(self, state: State, args: tuple[Object, ...]) -> bool:
        assert len(args) == self.arity
        return self.classifier(state, args)

    def __repr__(self) -> str:
        return f"{self.name}({', '.join(self.param_types)})"


@dataclass(frozen=True, order=True)
class Atom:
    """A ground relation: predicate name applied to object names."""

    predicate: str
    args: tuple[str, ...]

    def __repr__(self) -> str:
        return f"{self.predicate}({', '.join(self.args)})"


@dataclass(frozen=True)
class AbstractState:
    """A canonical set of ground atoms; node identity in the top-level graph."""

    atoms: tuple[Atom, ...]

    def __init__(self, atoms: Iterable[Atom]) -> None:
        canonical = tuple(sorted(set(atoms)))
        object.__setattr__(self, "atoms", canonical)

    def __contains__(self, atom: Atom) -> bool:
        return atom in self.atoms

    def atom_set(self) -> frozenset[Atom]:
        return frozenset(self.atoms)

    def __repr__(self) -> str:
        return "{" + ", ".join(map(repr, self.atoms)) + "}"


@dataclass(frozen=True)
class Goal:
    """A conjunction of atoms that must all hold."""

    atoms: frozenset[Atom]

    def __init__(self, atoms: Iterable[Atom]) -> None:
        object.__setattr__(self, "atoms", frozenset(atoms))


@dataclass(frozen=True)
class Task:
    """A goal-based task: initial state, goal, and the sampling seed."""

    initial_state: State
    goal: Goal
    seed: int


def abstract(state: State, predicates: Sequence[Predicate]) -> AbstractState:
    """Evaluate every well-typed ground atom and return the true ones."""
    atoms = []
    by_type: dict[str, list[Object]] = {t: [] for t in OBJECT_TYPES}
    for obj in state.objects:
        by_type[obj.otype].append(obj)
    for pred in predicates:
        for combo in _typed_tuples(pred.param_types, by_type):
            if pred.holds(state, combo):
                atoms.append(Atom(pred.name, tuple(o.name for o in combo)))
    return AbstractState(atoms)


def goal_satisfied(abstract_state: AbstractState, goal: Goal) -> bool:
    """True iff every goal atom is in the abstract state."""
    return goal.atoms <= abstract_state.atom_set()


def atom_vocabulary(objects: Sequence[Object],
                    predicates: Sequence[Predicate]) -> list[Atom]:
    """Deterministic enumeration of every well-typed ground atom.

    The index of each atom is stable for a fixed object set; used for
    multi-hot goal encodings.
    """
    by_type: dict[str, list[Object]] = {t: [] for t in OBJECT_TYPES}
    for obj in objects:
        by_type[obj.otype].append(obj)
    vocab = []
    for pred in predicates:
        for combo in _typed_tuples(pred.param_types, by_type):
            vocab.append(Atom(pred.name, tuple(o.name for o in combo)))
    return vocab


def _typed_tuples(param_types: Sequence[str],
                  by_type: dict[str, list[Object]]) -> list[tuple[Object, ...]]:
    """All object tuples matching the type signature, in canonical order.

    Objects may repeat across positions only if the positions have different
    types; within a single ground atom each object appears at most once.
    """
    combos: list[tuple[Object, ...]] = [()]
    for t in param_types:
        combos = [c + (o,) for c in combos for o in by_type[t] if o not in c]
    return combos


def task_to_json(task: Task) -> str:
    """Serialize a task with full round-trip float precision."""
    doc = {
        "seed": task.seed,
        "objects": [{
            "name": o.name,
            "otype": o.otype,
            "features": list(f),
        } for o, f in zip(task.initial_state.objects,
                          task.initial_state.features)],
        "goal": [{
            "predicate": a.predicate,
            "args": list(a.args),
        } for a in sorted(task.goal.atoms)],
    }
    return json.dumps(doc)


def task_from_json(doc: str) -> Task:
    """Inverse of :func:`task_to_json`.

    Rejects goals that mention objects absent from the initial state.
    """
    data = json.loads(doc)
    objects = tuple(Object(o["name"], o["otype"]) for o in data["objects"])
    features = tuple(tuple(float(v) for v in o["features"])
                     for o in data["objects"])
    held = None
    for obj, feats in zip(objects, features):
        if obj.otype == "block" and feats[2] > 0.5:
            held = obj.name
    state = State(objects, features, held)
    names = {o.name for o in objects}
    goal_atoms = []
    for a in data["goal"]:
        for arg in a["args"]:
            if arg not in names:
                raise ValueError(
                    f"goal atom {a['predicate']}({a['args']}) mentions "
                    f"unknown object {arg!r}")
        goal_atoms.append(Atom(a["predicate"], tuple(a["args"])))
    return Task(state, Goal(goal_atoms), int(data["seed"]))
