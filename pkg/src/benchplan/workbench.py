"""Deterministic discrete workbench simulator.

A single object sits on a 3x5 grid and is manipulated by seven atomic
actions of fixed magnitude. Obstacles and an optional dyer (a color-changing
station) occupy cells of their own; both are impassable. All operations are
pure functions, so states and configs are freely shareable.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import TYPE_CHECKING, Sequence

if TYPE_CHECKING:  # only for the adjudicate() type hint
    from .taskgen import Task

X_CELLS = 3
Y_CELLS = 5
ROTATIONS = (0, 90, 180, 270)
N_COLORS = 6
N_SIZES = 4
N_TYPES = 8  # default object-type library; unseen-object splits extend past this

CONCEPTS = ("type", "pos_x", "pos_y", "rotation", "color", "size")
DEFAULT_CARDINALITIES = (N_TYPES, X_CELLS, Y_CELLS, len(ROTATIONS), N_COLORS, N_SIZES)

ACTIONS = (
    "move_front",
    "move_back",
    "move_left",
    "move_right",
    "rotate_left",
    "rotate_right",
    "change_color",
)

_MOVE_DELTAS = {
    "move_front": (0, 1),
    "move_back": (0, -1),
    "move_left": (-1, 0),
    "move_right": (1, 0),
}

MAX_LEN_BY_LEVEL = {1: 6, 2: 9, 3: 15, 4: 16}

FAILURE_REASONS = ("none", "illegal_action", "collision", "wrong_final_state")


class ActionError(Exception):
    """An action cannot be applied in the current state."""


class OutOfBounds(ActionError):
    """A move would leave the 3x5 grid."""


class Collision(ActionError):
    """A move's destination cell is occupied by an obstacle or the dyer."""


class DyerUnavailable(ActionError):
    """change_color without a dyer, or the object is not adjacent to it."""


class SimulationError(Exception):
    """First illegal action in a sequence, annotated with its step index."""

    def __init__(self, step: int, cause: ActionError):
        super().__init__(f"illegal action at step {step}: {cause}")
        self.step = step
        self.cause = cause


@dataclass(frozen=True)
class ObjectState:
    """Ground-truth concept values of the manipulated object."""

    type_id: int
    pos_x: int
    pos_y: int
    rotation: int  # degrees, multiple of 90 in [0, 360)
    color: int
    size: int

    def __post_init__(self):
        if not (0 <= self.pos_x < X_CELLS and 0 <= self.pos_y < Y_CELLS):
            raise ValueError(f"position ({self.pos_x},{self.pos_y}) off the grid")
        if self.rotation not in ROTATIONS:
            raise ValueError(f"rotation {self.rotation} not a multiple of 90 in [0,360)")
        if not 0 <= self.color < N_COLORS:
            raise ValueError(f"color {self.color} out of range")
        if not 0 <= self.size < N_SIZES:
            raise ValueError(f"size {self.size} out of range")
        if self.type_id < 0:
            raise ValueError("type_id must be nonnegative")

    def values(self) -> tuple[int, int, int, int, int, int]:
        """Concept values in CONCEPTS order, rotation as an index 0..3."""
        return (self.type_id, self.pos_x, self.pos_y,
                self.rotation // 90, self.color, self.size)

    @property
    def pos(self) -> tuple[int, int]:
        return (self.pos_x, self.pos_y)


@dataclass(frozen=True)
class EnvConfig:
    """Per-task bench layout: difficulty level, obstacles, optional dyer."""

    level: int
    obstacles: tuple[tuple[int, int], ...] = ()
    dyer: tuple[int, int] | None = None
    dyer_color: int | None = None

    def __post_init__(self):
        if self.level not in MAX_LEN_BY_LEVEL:
            raise ValueError(f"level must be 1..4, got {self.level}")
        # normalize: sorted, deduplicated obstacle cells
        cells = tuple(sorted(set(map(tuple, self.obstacles))))
        object.__setattr__(self, "obstacles", cells)
        for c in cells:
            if not (0 <= c[0] < X_CELLS and 0 <= c[1] < Y_CELLS):
                raise ValueError(f"obstacle {c} off the grid")
        if self.level == 1 and (cells or self.dyer is not None):
            raise ValueError("level 1 admits no obstacles and no dyer")
        if self.level == 2 and self.dyer is not None:
            raise ValueError("level 2 admits no dyer")
        if self.level >= 3 and self.dyer is None:
            raise ValueError(f"level {self.level} requires a dyer")
        if self.dyer is not None:
            if self.dyer in cells:
                raise ValueError("dyer cell clashes with an obstacle")
            if not (0 <= self.dyer[0] < X_CELLS and 0 <= self.dyer[1] < Y_CELLS):
                raise ValueError(f"dyer {self.dyer} off the grid")
            if self.dyer_color is None or not 0 <= self.dyer_color < N_COLORS:
                raise ValueError("a dyer needs a color in 0..5")
        elif self.dyer_color is not None:
            raise ValueError("dyer_color given without a dyer")

    @property
    def max_len(self) -> int:
        return MAX_LEN_BY_LEVEL[self.level]

    @property
    def blocked(self) -> frozenset[tuple[int, int]]:
        cells = set(self.obstacles)
        if self.dyer is not None:
            cells.add(self.dyer)
        return frozenset(cells)


@dataclass(frozen=True)
class SuccessReport:
    """Outcome of executing a candidate action sequence on a task."""

    success: bool
    failure_reason: str  # one of FAILURE_REASONS
    final_state: ObjectState

    def __post_init__(self):
        if self.failure_reason not in FAILURE_REASONS:
            raise ValueError(f"unknown failure reason {self.failure_reason!r}")
        if self.success != (self.failure_reason == "none"):
            raise ValueError("success must hold exactly when failure_reason is 'none'")


def apply_action(state: ObjectState, action: str, env: EnvConfig) -> ObjectState:
    """Apply one atomic action; raises ActionError when it is illegal."""
    if action in _MOVE_DELTAS:
        dx, dy = _MOVE_DELTAS[action]
        nx, ny = state.pos_x + dx, state.pos_y + dy
        if not (0 <= nx < X_CELLS and 0 <= ny < Y_CELLS):
            raise OutOfBounds(f"{action} from {state.pos} exits the grid")
        if (nx, ny) in env.blocked:
            raise Collision(f"{action} from {state.pos} hits {(nx, ny)}")
        return replace(state, pos_x=nx, pos_y=ny)
    if action == "rotate_left":
        return replace(state, rotation=(state.rotation - 90) % 360)
    if action == "rotate_right":
        return replace(state, rotation=(state.rotation + 90) % 360)
    if action == "change_color":
        if env.dyer is None:
            raise DyerUnavailable("no dyer on this bench")
        if abs(state.pos_x - env.dyer[0]) + abs(state.pos_y - env.dyer[1]) != 1:
            raise DyerUnavailable(f"object at {state.pos} not adjacent to dyer at {env.dyer}")
        return replace(state, color=env.dyer_color)
    raise ValueError(f"unknown action {action!r}")


def is_valid_state(state: ObjectState, env: EnvConfig) -> bool:
    """True iff the object sits on a free on-grid cell."""
    return state.pos not in env.blocked


def simulate(init: ObjectState, actions: Sequence[str], env: EnvConfig) -> list[ObjectState]:
    """Trajectory [init, s1, ..., sT]; raises SimulationError at the first illegal step."""
    if not is_valid_state(init, env):
        raise ValueError(f"initial state at {init.pos} is invalid in this env")
    trajectory = [init]
    for i, action in enumerate(actions):
        try:
            trajectory.append(apply_action(trajectory[-1], action, env))
        except ActionError as err:
            raise SimulationError(i, err) from err
    return trajectory


def goal_reached(final: ObjectState, goal: ObjectState, level: int) -> bool:
    """Success rule: position and color must match; rotation only at level 4."""
    if final.pos != goal.pos or final.color != goal.color:
        return False
    if level == 4 and final.rotation != goal.rotation:
        return False
    return True


def adjudicate(task: "Task", actions: Sequence[str]) -> SuccessReport:
    """Execute a candidate sequence and judge it against the task's goal.

    Type and size are never altered by actions, so they match by construction;
    dyer adjacency is enforced by apply_action's change_color precondition.
    On failure the report carries the last state reached before the illegal step.
    """
    current = task.init
    for action in actions:
        try:
            current = apply_action(current, action, task.env)
        except ActionError as err:
            reason = "collision" if isinstance(err, Collision) else "illegal_action"
            return SuccessReport(False, reason, current)
    if goal_reached(current, task.goal, task.env.level):
        return SuccessReport(True, "none", current)
    return SuccessReport(False, "wrong_final_state", current)
