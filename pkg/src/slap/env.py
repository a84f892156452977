"""Deterministic 2D manipulation environment: a planar gripper moves blocks on
the bottom line of a unit workspace, with a target region that must be cleared
and then occupied by the target block.

Dynamics in one step, in order: clamp the action; move the robot (a held block
follows rigidly); grasp on grip > 0.5 if a block center is within the grasp
tolerance; release on grip < -0.5, snapping the block to the bottom line when
close; finally resolve horizontal pushes. The robot body only pushes while the
gripper is closed (grip > 0.5) and empty-handed approaches never disturb
blocks, which is what makes precise grasping the hard part of the domain. A
held block always pushes.

Everything is a pure function of (state, action); there is no hidden state.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from slap.structs import (AbstractState, Atom, Goal, Object, Predicate, State,
                          Task, abstract, atom_vocabulary, goal_satisfied)

# Height at which options travel while carrying a block, clearing the tops of
# standing blocks (0.2) with margin.
CARRY_Y = 0.35
# Per-axis convergence tolerance for scripted waypoint controllers.
_WP_TOL = 1e-6


@dataclass(frozen=True)
class Action:
    """A continuous control: planar velocity plus grasp intent.

    dx, dy are clamped to [-a_max, a_max] by the simulator; grip > 0.5 engages
    the gripper and grip < -0.5 releases. Out-of-range values are clamped,
    never rejected.
    """

    dx: float
    dy: float
    grip: float


@dataclass(frozen=True)
class EnvConfig:
    """Geometry and sampling parameters for the environment.

    The target region is an axis-aligned rectangle of width ``block_w``
    centered on the bottom edge midpoint. The first obstacle always spawns
    overlapping the region; remaining obstacles and all distractors spawn on
    the bottom line clear of the region.
    """

    block_w: float = 0.12
    block_h: float = 0.12
    robot_w: float = 0.1
    robot_h: float = 0.1
    a_max: float = 0.05
    eps_grasp: float = 0.03
    eps_overlap: float = 0.01
    snap_dist: float = 0.05
    n_obstacles: int = 2
    n_distractors: int = 0
    max_horizon: int = 100

    def __post_init__(self) -> None:
        assert self.a_max > 0 and self.eps_grasp > 0
        assert 0 < self.block_w <= 1 and 0 < self.block_h <= 1

    @property
    def region(self) -> tuple[float, float, float, float]:
        """Target region rectangle (x0, y0, x1, y1)."""
        return (0.5 - self.block_w / 2, 0.0, 0.5 + self.block_w / 2,
                self.block_h)

    @property
    def action_low(self) -> np.ndarray:
        return np.array([-self.a_max, -self.a_max, -1.0])

    @property
    def action_high(self) -> np.ndarray:
        return np.array([self.a_max, self.a_max, 1.0])

    def to_dict(self) -> dict:
        return {
            "block_w": self.block_w,
            "block_h": self.block_h,
            "robot_w": self.robot_w,
            "robot_h": self.robot_h,
            "a_max": self.a_max,
            "eps_grasp": self.eps_grasp,
            "eps_overlap": self.eps_overlap,
            "snap_dist": self.snap_dist,
            "n_obstacles": self.n_obstacles,
            "n_distractors": self.n_distractors,
            "max_horizon": self.max_horizon,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EnvConfig":
        return cls(**data)


class InvalidConfigError(Exception):
    """Raised when a task cannot be sampled under the given config."""


class OptionPreconditionError(Exception):
    """Raised when an option is executed in a state violating its operator
    preconditions (a caller bug, not an environment failure)."""


@dataclass(frozen=True)
class LiftedOperator:
    """A STRIPS-style operator: typed variables, preconditions, add and delete
    effects, all over lifted atoms whose args are variable names."""

    name: str
    var: tuple[tuple[str, str], ...]  # (variable name, otype)
    pre: frozenset[Atom]
    eff_add: frozenset[Atom]
    eff_del: frozenset[Atom]

    def __post_init__(self) -> None:
        var_names = {v for v, _ in self.var}
        for atom in self.pre | self.eff_add | self.eff_del:
            for arg in atom.args:
                assert arg in var_names, f"{self.name}: unbound {arg}"
        assert not (self.eff_add & self.eff_del)

    def ground_atoms(self, atoms: frozenset[Atom],
                     binding: Sequence[Object]) -> frozenset[Atom]:
        sub = {v: o.name for (v, _), o in zip(self.var, binding)}
        return frozenset(
            Atom(a.predicate, tuple(sub[arg] for arg in a.args))
            for a in atoms)


@dataclass(frozen=True)
class ScriptedOption:
    """An operator paired with its deterministic low-level controller."""

    operator: LiftedOperator
    policy: Callable[[State, tuple[Object, ...]], Action] = field(
        compare=False)
    max_steps: int = 200


class _Universe:
    """Per-object-set lookup tables: the ground atom vocabulary, bit indices
    for dynamic atoms, and the static-atom bitmask. Lets hot loops compare
    abstract states as integers."""

    __slots__ = ("objects", "vocab", "index", "static_mask", "robot_i",
                 "block_is", "block_names", "on_bit", "ov_bit", "hold_bit",
                 "ge_bit", "clear_bit", "name_to_i")

    def __init__(self, objects: tuple[Object, ...],
                 predicates: list[Predicate]) -> None:
        self.objects = objects
        self.vocab = atom_vocabulary(objects, predicates)
        self.index = {a: i for i, a in enumerate(self.vocab)}
        self.name_to_i = {o.name: i for i, o in enumerate(objects)}
        self.robot_i = next(i for i, o in enumerate(objects)
                            if o.otype == "robot")
        table = next(o.name for o in objects if o.otype == "table")
        region = next(o.name for o in objects if o.otype == "region")
        robot = objects[self.robot_i].name
        self.block_is = tuple(i for i, o in enumerate(objects)
                              if o.otype == "block")
        self.block_names = tuple(objects[i].name for i in self.block_is)
        self.on_bit = tuple(1 << self.index[Atom("On", (b, table))]
                            for b in self.block_names)
        self.ov_bit = tuple(1 << self.index[Atom("Overlap", (b, region))]
                            for b in self.block_names)
        self.hold_bit = tuple(1 << self.index[Atom("Holding", (robot, b))]
                              for b in self.block_names)
        self.ge_bit = 1 << self.index[Atom("GripperEmpty", (robot,))]
        self.clear_bit = 1 << self.index[Atom("Clear", (region,))]
        static = 0
        for pred_name in ("IsBlock", "IsSurface", "IsRobot", "IsTarget",
                          "NotIsTarget"):
            for atom, i in self.index.items():
                if atom.predicate == pred_name:
                    if pred_name == "IsTarget" and atom.args[0] != "target":
                        continue
                    if pred_name == "NotIsTarget" and \
                            atom.args[0] == "target":
                        continue
                    static |= 1 << i
        self.static_mask = static

    def to_abstract(self, mask: int) -> AbstractState:
        return AbstractState(a for i, a in enumerate(self.vocab)
                             if mask >> i & 1)

    def to_mask(self, s: AbstractState) -> int:
        mask = 0
        for atom in s.atoms:
            mask |= 1 << self.index[atom]
        return mask


class Obstacle2DEnv:
    """The environment: transition function, predicates, operators, scripted
    options, and seeded task sampling."""

    def __init__(self, config: EnvConfig | None = None) -> None:
        self.config = config or EnvConfig()
        self.predicates = self._make_predicates()
        self._pred_by_name = {p.name: p for p in self.predicates}
        self.operators = lifted_operators()
        self.options = {
            op.name: ScriptedOption(op, self._make_policy(op.name))
            for op in self.operators
        }
        self._universes: dict[tuple[Object, ...], _Universe] = {}

    def universe(self, objects: tuple[Object, ...]) -> _Universe:
        uni = self._universes.get(objects)
        if uni is None:
            uni = _Universe(objects, self.predicates)
            self._universes[objects] = uni
        return uni

    # ------------------------------------------------------------------
    # Transition function.

    def step(self, state: State, action: Action) -> State:
        """Deterministic next state; total over valid states."""
        cfg = self.config
        dx = _clamp(_finite(action.dx), -cfg.a_max, cfg.a_max)
        dy = _clamp(_finite(action.dy), -cfg.a_max, cfg.a_max)
        grip = _clamp(_finite(action.grip), -1.0, 1.0)

        uni = self.universe(state.objects)
        feats = [list(f) for f in state.features]
        ridx = uni.robot_i
        block_idx = uni.block_is
        held = state.held
        hidx = uni.name_to_i[held] if held is not None else -1

        # Move the robot, keeping both the robot and any held block inside
        # the workspace (rigid follow must not be broken by clamping).
        rx, ry = feats[ridx][0], feats[ridx][1]
        half_rw, half_rh = cfg.robot_w / 2, cfg.robot_h / 2
        lo_x, hi_x = half_rw, 1.0 - half_rw
        lo_y, hi_y = half_rh, 1.0 - half_rh
        if held is not None:
            off_x = feats[hidx][0] - rx
            off_y = feats[hidx][1] - ry
            half_bw, half_bh = cfg.block_w / 2, cfg.block_h / 2
            lo_x = max(lo_x, half_bw - off_x)
            hi_x = min(hi_x, 1.0 - half_bw - off_x)
            lo_y = max(lo_y, half_bh - off_y)
            hi_y = min(hi_y, 1.0 - half_bh - off_y)
        new_rx = _clamp(rx + dx, lo_x, hi_x)
        new_ry = _clamp(ry + dy, lo_y, hi_y)
        feats[ridx][0], feats[ridx][1] = new_rx, new_ry
        if held is not None:
            feats[hidx][0] += new_rx - rx
            feats[hidx][1] += new_ry - ry

        # Grasp: nearest block center within eps_grasp, ties by object order.
        if grip > 0.5 and held is None:
            best = -1
            best_d = math.inf
            for i in block_idx:
                d = math.hypot(feats[i][0] - new_rx, feats[i][1] - new_ry)
                if d <= cfg.eps_grasp and d < best_d - 1e-12:
                    best, best_d = i, d
            if best >= 0:
                held = state.objects[best].name
                feats[best][2] = 1.0
                feats[ridx][2] = 1.0
                hidx = best

        # Release, snapping to the bottom line when close.
        if grip < -0.5 and held is not None:
            bottom = feats[hidx][1] - cfg.block_h / 2
            if bottom <= cfg.snap_dist:
                feats[hidx][1] = cfg.block_h / 2
            feats[hidx][2] = 0.0
            feats[ridx][2] = 0.0
            held = None
            hidx = -1

        # Push resolution: a held block always pushes; the robot body pushes
        # only with the gripper closed. Chains propagate in push direction.
        if held is not None:
            rect = _rect(feats[hidx][0], feats[hidx][1], cfg.block_w,
                         cfg.block_h)
            self._resolve_pushes(rect, hidx, feats, block_idx, hidx)
        if grip > 0.5:
            rect = _rect(new_rx, new_ry, cfg.robot_w, cfg.robot_h)
            self._resolve_pushes(rect, -1, feats, block_idx, hidx)

        return State(state.objects, tuple(tuple(f) for f in feats), held)

    def _resolve_pushes(self, pusher: tuple[float, float, float, float],
                        pusher_idx: int, feats: list[list[float]],
                        block_idx: tuple[int, ...], hidx: int) -> None:
        cfg = self.config
        half_bw = cfg.block_w / 2
        # Repeated sweeps handle chains; bounded because every displacement
        # strictly separates one pair and the workspace is finite.
        frontier = [(pusher, pusher_idx)]
        while frontier:
            rect, owner = frontier.pop(0)
            for i in block_idx:
                if i == hidx or i == owner:
                    continue
                brect = _rect(feats[i][0], feats[i][1], cfg.block_w,
                              cfg.block_h)
                ox = min(rect[2], brect[2]) - max(rect[0], brect[0])
                oy = min(rect[3], brect[3]) - max(rect[1], brect[1])
                if ox <= 1e-12 or oy <= 1e-12:
                    continue
                pusher_cx = (rect[0] + rect[2]) / 2
                if feats[i][0] >= pusher_cx:
                    new_x = rect[2] + half_bw
                else:
                    new_x = rect[0] - half_bw
                new_x = _clamp(new_x, half_bw, 1.0 - half_bw)
                moved = abs(new_x - feats[i][0]) > 1e-12
                feats[i][0] = new_x
                if moved:  # wall-pinned blocks keep residual overlap
                    frontier.append(
                        (_rect(feats[i][0], feats[i][1], cfg.block_w,
                               cfg.block_h), i))

    # ------------------------------------------------------------------
    # Predicates and abstraction.

    def _make_predicates(self) -> list[Predicate]:
        cfg = self.config

        def on_table(state: State, args: tuple[Object, ...]) -> bool:
            b = state.get(args[0].name)
            if state.held == args[0].name:
                return False
            return abs((b[1] - cfg.block_h / 2)) <= 1e-9

        def overlap(state: State, args: tuple[Object, ...]) -> bool:
            b = state.get(args[0].name)
            return self._block_overlaps_region(b[0], b[1])

        def holding(state: State, args: tuple[Object, ...]) -> bool:
            return state.held == args[1].name

        def gripper_empty(state: State, args: tuple[Object, ...]) -> bool:
            return state.held is None

        def clear(state: State, args: tuple[Object, ...]) -> bool:
            for obj, feats in zip(state.objects, state.features):
                if obj.otype == "block" and self._block_overlaps_region(
                        feats[0], feats[1]):
                    return False
            return True

        def always(state: State, args: tuple[Object, ...]) -> bool:
            return True

        def is_target(state: State, args: tuple[Object, ...]) -> bool:
            return args[0].name == "target"

        def not_is_target(state: State, args: tuple[Object, ...]) -> bool:
            return args[0].name != "target"

        return [
            Predicate("IsBlock", ("block",), always),
            Predicate("IsSurface", ("table",), always),
            Predicate("IsRobot", ("robot",), always),
            Predicate("On", ("block", "table"), on_table),
            Predicate("Overlap", ("block", "region"), overlap),
            Predicate("Holding", ("robot", "block"), holding),
            Predicate("GripperEmpty", ("robot",), gripper_empty),
            Predicate("Clear", ("region",), clear),
            Predicate("IsTarget", ("block",), is_target),
            Predicate("NotIsTarget", ("block",), not_is_target),
        ]

    def _block_overlaps_region(self, bx: float, by: float) -> bool:
        cfg = self.config
        rx0, ry0, rx1, ry1 = cfg.region
        ox = (min(bx + cfg.block_w / 2, rx1) - max(bx - cfg.block_w / 2, rx0))
        oy = (min(by + cfg.block_h / 2, ry1) - max(by - cfg.block_h / 2, ry0))
        return ox > cfg.eps_overlap and oy > 1e-12

    def abstract_mask(self, state: State,
                      uni: _Universe | None = None) -> int:
        """Abstract state as a bitmask over the universe's atom vocabulary;
        integer equality substitutes for AbstractState equality in hot
        loops."""
        if uni is None:
            uni = self.universe(state.objects)
        cfg = self.config
        half_h = cfg.block_h / 2
        feats = state.features
        held = state.held
        mask = uni.static_mask
        clear = True
        for k, i in enumerate(uni.block_is):
            f = feats[i]
            if held is not None and uni.block_names[k] == held:
                mask |= uni.hold_bit[k]
            elif -1e-9 <= f[1] - half_h <= 1e-9:
                mask |= uni.on_bit[k]
            if self._block_overlaps_region(f[0], f[1]):
                mask |= uni.ov_bit[k]
                clear = False
        if held is None:
            mask |= uni.ge_bit
        if clear:
            mask |= uni.clear_bit
        return mask

    def abstract_state(self, state: State) -> AbstractState:
        """Equivalent of ``abstract(state, self.predicates)``."""
        uni = self.universe(state.objects)
        return uni.to_abstract(self.abstract_mask(state, uni))

    # ------------------------------------------------------------------
    # Scripted options.

    def _make_policy(self, name: str):
        if name in ("Pick", "PickFromTarget"):
            return self._pick_policy
        if name == "Place":
            return self._place_policy
        return self._place_in_target_policy

    def _pick_policy(self, state: State,
                     binding: tuple[Object, ...]) -> Action:
        """Move straight to the block center with the gripper open, grip when
        within tolerance, then lift. Open-gripper travel never pushes."""
        cfg = self.config
        block = binding[1].name
        rx, ry, _ = state.get("robot")
        if state.held == block:
            return Action(0.0, _clamp(CARRY_Y - ry, -cfg.a_max, cfg.a_max),
                          0.0)
        bx, by, _ = state.get(block)
        if math.hypot(bx - rx, by - ry) <= 0.5 * cfg.eps_grasp:
            return Action(0.0, 0.0, 1.0)
        return Action(_clamp(bx - rx, -cfg.a_max, cfg.a_max),
                      _clamp(by - ry, -cfg.a_max, cfg.a_max), -1.0)

    def _place_policy(self, state: State,
                      binding: tuple[Object, ...]) -> Action:
        block = binding[1].name
        slot = self.find_free_slot(state, block)
        return self._carry_to(state, block, slot)

    def _place_in_target_policy(self, state: State,
                                binding: tuple[Object, ...]) -> Action:
        return self._carry_to(state, binding[1].name, 0.5)

    def _carry_to(self, state: State, block: str, slot_x: float) -> Action:
        """Lift to carry height, travel, descend, release at the bottom."""
        cfg = self.config
        bx, by, _ = state.get(block)
        if state.held != block:
            return Action(0.0, 0.0, 0.0)  # terminal once released
        if abs(bx - slot_x) > _WP_TOL:
            if by < CARRY_Y - _WP_TOL:
                return Action(0.0, _clamp(CARRY_Y - by, -cfg.a_max,
                                          cfg.a_max), 0.0)
            return Action(_clamp(slot_x - bx, -cfg.a_max, cfg.a_max), 0.0,
                          0.0)
        rest_y = cfg.block_h / 2
        if by > rest_y + _WP_TOL:
            return Action(0.0, _clamp(rest_y - by, -cfg.a_max, cfg.a_max),
                          0.0)
        return Action(0.0, 0.0, -1.0)

    def find_free_slot(self, state: State, block: str) -> float:
        """Deterministic left-to-right scan of the bottom line for a slot
        where ``block`` fits clear of the region and all other blocks."""
        cfg = self.config
        half = cfg.block_w / 2
        margin = 0.005
        others = [
            feats[0] for obj, feats in zip(state.objects, state.features)
            if obj.otype == "block" and obj.name != block
        ]
        rx0, _, rx1, _ = cfg.region
        x = half
        while x <= 1.0 - half + 1e-9:
            x_ok = True
            if x + half > rx0 - margin and x - half < rx1 + margin:
                x_ok = False  # would encroach on the region
            if x_ok:
                for ox in others:
                    if abs(x - ox) < cfg.block_w + margin:
                        x_ok = False
                        break
            if x_ok:
                return x
            x += 0.005
        return half  # fully packed line; let execution fail upstream

    # ------------------------------------------------------------------
    # Option execution.

    def execute_option(
        self, state: State, option: ScriptedOption,
        binding: tuple[Object, ...]
    ) -> tuple[list[tuple[State, Action]], bool]:
        traj, ok, _ = self.run_option(state, option, binding)
        return traj, ok

    def run_option(
        self, state: State, option: ScriptedOption,
        binding: tuple[Object, ...]
    ) -> tuple[list[tuple[State, Action]], bool, State]:
        """Run a scripted option until its operator's predicted abstract
        successor is reached; also returns the final state."""
        op = option.operator
        uni = self.universe(state.objects)
        current = self.abstract_mask(state, uni)
        pre = uni.to_mask(AbstractState(op.ground_atoms(op.pre, binding)))
        if pre & current != pre:
            raise OptionPreconditionError(
                f"{op.name}{tuple(o.name for o in binding)}: preconditions "
                f"not satisfied")
        del_mask = uni.to_mask(
            AbstractState(op.ground_atoms(op.eff_del, binding)))
        add_mask = uni.to_mask(
            AbstractState(op.ground_atoms(op.eff_add, binding)))
        predicted = (current & ~del_mask) | add_mask
        traj: list[tuple[State, Action]] = []
        x = state
        for _ in range(option.max_steps):
            action = option.policy(x, binding)
            traj.append((x, action))
            x = self.step(x, action)
            if self.abstract_mask(x, uni) == predicted:
                return traj, True, x
        return traj, False, x

    # ------------------------------------------------------------------
    # Task sampling.

    def sample_task(self, seed: int) -> Task:
        """Seeded task: one target block, the first obstacle overlapping the
        region, remaining blocks clear of the region and of each other."""
        cfg = self.config
        rng = np.random.default_rng(seed)
        half = cfg.block_w / 2
        sep = cfg.block_w + 0.005
        n_free = 1 + (cfg.n_obstacles - 1) + cfg.n_distractors
        if cfg.n_obstacles < 1:
            raise InvalidConfigError("need at least one obstacle")

        # The blocker partially overlaps the region, off dead-center so a
        # sideways push can clear it.
        side = 1 if rng.random() < 0.5 else -1
        blocker_x = 0.5 + side * rng.uniform(0.125, 0.54) * cfg.block_w

        # Free blocks live in the bands left and right of the region where
        # the Overlap classifier is false, shrunk to stay clear of the
        # blocker. Positions are drawn with an exact minimum-gap transform.
        rx0, _, rx1, _ = cfg.region
        zone_l = (half, min(rx0 - half + cfg.eps_overlap, blocker_x - sep))
        zone_r = (max(rx1 + half - cfg.eps_overlap, blocker_x + sep),
                  1.0 - half)
        cap_l = _zone_capacity(zone_l, sep)
        cap_r = _zone_capacity(zone_r, sep)
        if n_free > cap_l + cap_r:
            raise InvalidConfigError(
                f"cannot place {n_free} blocks clear of the region "
                f"(capacity {cap_l + cap_r})")
        lo = max(0, n_free - cap_r)
        hi = min(cap_l, n_free)
        k_left = int(rng.integers(lo, hi + 1))
        left_xs = _sample_spaced(rng, zone_l, k_left, sep)
        right_xs = _sample_spaced(rng, zone_r, n_free - k_left, sep)
        slots = left_xs + right_xs
        order = rng.permutation(n_free)
        free_xs = [float(slots[order[i]]) for i in range(n_free)]

        objects = [Object("robot", "robot"), Object("target", "block")]
        xs = [free_xs[0]]
        for i in range(cfg.n_obstacles):
            objects.append(Object(f"obstacle{i}", "block"))
            xs.append(blocker_x if i == 0 else free_xs[i])
        for i in range(cfg.n_distractors):
            objects.append(Object(f"distractor{i}", "block"))
            xs.append(free_xs[cfg.n_obstacles + i])
        objects.append(Object("target_region", "region"))
        objects.append(Object("table", "table"))

        robot_x = float(rng.uniform(0.15, 0.85))
        robot_y = float(rng.uniform(0.45, 0.85))
        rest_y = cfg.block_h / 2
        features: list[tuple[float, ...]] = [(robot_x, robot_y, 0.0)]
        for x in xs:
            features.append((float(x), rest_y, 0.0))
        features.append((0.5, rest_y))
        features.append((0.5, 0.0))

        state = State(tuple(objects), tuple(features))
        state.validate()
        self.validate_state(state)
        goal = Goal([
            Atom("Overlap", ("target", "target_region")),
            Atom("On", ("target", "table")),
        ])
        task = Task(state, goal, seed)
        assert any(
            self._block_overlaps_region(f[0], f[1])
            for o, f in zip(state.objects, state.features)
            if o.otype == "block" and o.name != "target")
        assert not goal_satisfied(self.abstract_state(state), goal)
        return task

    def validate_state(self, state: State) -> None:
        """Environment validity checks: containment and no block overlap."""
        cfg = self.config
        blocks = [(o.name, f) for o, f in zip(state.objects, state.features)
                  if o.otype == "block"]
        for name, f in blocks:
            assert 0.0 <= f[0] <= 1.0 and 0.0 <= f[1] <= 1.0, name
        for i in range(len(blocks)):
            for j in range(i + 1, len(blocks)):
                dist = abs(blocks[i][1][0] - blocks[j][1][0])
                same_band = abs(blocks[i][1][1] - blocks[j][1][1]) \
                    < cfg.block_h
                assert not (same_band and dist < cfg.block_w - 1e-9), \
                    f"blocks {blocks[i][0]} and {blocks[j][0]} overlap"

    def goal_reached(self, state: State, goal: Goal) -> bool:
        return goal_satisfied(self.abstract_state(state), goal)

    def full_observation(self, state: State) -> np.ndarray:
        """Concatenated feature vectors of every object in canonical order."""
        return np.concatenate([np.asarray(f) for f in state.features])


def lifted_operators() -> list[LiftedOperator]:
    """The four domain operators with their precondition/effect sets."""
    r, b, s, g = "?r", "?b", "?s", "?g"
    guards = frozenset({
        Atom("IsRobot", (r,)),
        Atom("IsBlock", (b,)),
        Atom("IsSurface", (s,)),
    })
    pick = LiftedOperator(
        name="Pick",
        var=((r, "robot"), (b, "block"), (s, "table")),
        pre=guards | {Atom("GripperEmpty", (r,)), Atom("On", (b, s))},
        eff_add=frozenset({Atom("Holding", (r, b))}),
        eff_del=frozenset({Atom("GripperEmpty", (r,)), Atom("On", (b, s))}),
    )
    place = LiftedOperator(
        name="Place",
        var=((r, "robot"), (b, "block"), (s, "table")),
        pre=guards | {Atom("Holding", (r, b))},
        eff_add=frozenset({Atom("On", (b, s)), Atom("GripperEmpty", (r,))}),
        eff_del=frozenset({Atom("Holding", (r, b))}),
    )
    pick_from_target = LiftedOperator(
        name="PickFromTarget",
        var=((r, "robot"), (b, "block"), (s, "table"), (g, "region")),
        pre=guards | {
            Atom("GripperEmpty", (r,)),
            Atom("On", (b, s)),
            Atom("Overlap", (b, g)),
        },
        eff_add=frozenset({Atom("Holding", (r, b)), Atom("Clear", (g,))}),
        eff_del=frozenset({
            Atom("GripperEmpty", (r,)),
            Atom("On", (b, s)),
            Atom("Overlap", (b, g)),
        }),
    )
    place_in_target = LiftedOperator(
        name="PlaceInTarget",
        var=((r, "robot"), (b, "block"), (s, "table"), (g, "region")),
        pre=guards | {
            Atom("IsTarget", (b,)),
            Atom("Holding", (r, b)),
            Atom("Clear", (g,)),
        },
        eff_add=frozenset({
            Atom("On", (b, s)),
            Atom("Overlap", (b, g)),
            Atom("GripperEmpty", (r,)),
        }),
        eff_del=frozenset({Atom("Holding", (r, b)), Atom("Clear", (g,))}),
    )
    return [pick, place, pick_from_target, place_in_target]


def dump_trajectory(traj: Sequence[tuple[State, Action]], path: str) -> None:
    """Write one (state, action) record per line as JSON."""
    with open(path, "w", encoding="utf-8") as f:
        for state, action in traj:
            rec = {
                "state": {
                    "objects": [o.name for o in state.objects],
                    "features": [list(feat) for feat in state.features],
                    "held": state.held,
                },
                "action": [action.dx, action.dy, action.grip],
            }
            f.write(json.dumps(rec) + "\n")


def _zone_capacity(zone: tuple[float, float], sep: float) -> int:
    width = zone[1] - zone[0]
    if width < 0:
        return 0
    return int(width / sep) + 1


def _sample_spaced(rng: np.random.Generator, zone: tuple[float, float],
                   k: int, sep: float) -> list[float]:
    """k positions in [zone[0], zone[1]] with pairwise gaps >= sep, uniform
    over the feasible set."""
    if k == 0:
        return []
    slack = (zone[1] - zone[0]) - (k - 1) * sep
    assert slack >= 0
    offsets = np.sort(rng.uniform(0.0, slack, size=k))
    return [zone[0] + offsets[i] + i * sep for i in range(k)]


def _clamp(v: float, lo: float, hi: float) -> float:
    return lo if v < lo else hi if v > hi else v


def _finite(v: float) -> float:
    return v if math.isfinite(v) else 0.0


def _rect(cx: float, cy: float, w: float,
          h: float) -> tuple[float, float, float, float]:
    return (cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2)
