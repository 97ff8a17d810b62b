"""Task and dataset generation for the workbench.

Tasks are sampled per difficulty level with rejection, and every task carries
a ground-truth plan found by breadth-first search over the discrete state
space, so gt plans are provably shortest. Generation is reproducible: task i
of a dataset draws from its own RNG stream derived from (seed, i), which also
makes generation embarrassingly parallel.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, replace

import numpy as np

from .workbench import (
    ACTIONS,
    N_COLORS,
    N_SIZES,
    N_TYPES,
    ROTATIONS,
    X_CELLS,
    Y_CELLS,
    ActionError,
    EnvConfig,
    ObjectState,
    apply_action,
)

SPLITS = ("train", "val", "test")

# action-combination families for the unseen-task protocol (levels 1-2 only)
TRAIN_FAMILIES = (
    frozenset({"move_left", "move_front"}),
    frozenset({"move_right", "move_back"}),
)
TEST_FAMILIES = (
    frozenset({"move_left", "move_back"}),
    frozenset({"move_right", "move_front"}),
)

# RNG stream tags, kept distinct so derived streams never collide
_STREAM_TASK = 11
_STREAM_RETYPE = 13
_STREAM_UNSEEN = 17


class Unreachable(Exception):
    """No legal action sequence connects init to goal."""


class GenerationExhausted(Exception):
    """Rejection sampling failed to produce a valid task within its budget."""


@dataclass(frozen=True)
class Task:
    env: EnvConfig
    init: ObjectState
    goal: ObjectState
    gt_actions: tuple[str, ...]
    task_id: str = ""
    split: str = "train"


@dataclass
class Dataset:
    level: int
    tasks: list[Task]
    seed: int
    codebook_seed: int
    split_sizes: tuple[int, int, int]
    variant: str = "standard"

    def subset(self, split: str) -> list[Task]:
        return [t for t in self.tasks if t.split == split]


def oracle_shortest_plan(env: EnvConfig, init: ObjectState,
                         goal: ObjectState) -> tuple[str, ...]:
    """Shortest action sequence from init to goal's changeable concepts.

    BFS over (x, y, rotation, color) with the fixed ACTIONS ordering as
    tie-break, so the returned plan is the lexicographically smallest among
    all shortest ones. Raises Unreachable when no legal path exists.
    """
    start = (init.pos_x, init.pos_y, init.rotation, init.color)
    target = (goal.pos_x, goal.pos_y, goal.rotation, goal.color)
    if start == target:
        return ()
    parents: dict[tuple, tuple | None] = {start: None}
    queue = deque([start])
    while queue:
        cur = queue.popleft()
        state = ObjectState(init.type_id, cur[0], cur[1], cur[2], cur[3], init.size)
        for action in ACTIONS:
            try:
                nxt_state = apply_action(state, action, env)
            except ActionError:
                continue
            nxt = (nxt_state.pos_x, nxt_state.pos_y, nxt_state.rotation, nxt_state.color)
            if nxt in parents:
                continue
            parents[nxt] = (cur, action)
            if nxt == target:
                plan = []
                node = nxt
                while parents[node] is not None:
                    node, action = parents[node]
                    plan.append(action)
                return tuple(reversed(plan))
            queue.append(nxt)
    raise Unreachable(f"goal {target} unreachable from {start}")


def _free_cells_connected(blocked: set[tuple[int, int]]) -> bool:
    free = [(x, y) for x in range(X_CELLS) for y in range(Y_CELLS)
            if (x, y) not in blocked]
    if not free:
        return False
    seen = {free[0]}
    queue = deque([free[0]])
    while queue:
        x, y = queue.popleft()
        for nx, ny in ((x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)):
            if 0 <= nx < X_CELLS and 0 <= ny < Y_CELLS and (nx, ny) not in blocked \
                    and (nx, ny) not in seen:
                seen.add((nx, ny))
                queue.append((nx, ny))
    return len(seen) == len(free)


def _sample_env(level: int, rng: np.random.Generator) -> EnvConfig | None:
    """One env draw; None when the free cells come out disconnected."""
    if level == 1:
        return EnvConfig(level=1)
    cells = [(x, y) for x in range(X_CELLS) for y in range(Y_CELLS)]
    n_obstacles = int(rng.integers(1, 4))
    n_special = n_obstacles + (1 if level >= 3 else 0)
    picks = rng.choice(len(cells), size=n_special, replace=False)
    chosen = [cells[int(i)] for i in picks]
    obstacles = tuple(chosen[:n_obstacles])
    dyer = chosen[n_obstacles] if level >= 3 else None
    blocked = set(obstacles) | ({dyer} if dyer else set())
    if not _free_cells_connected(blocked):
        return None
    dyer_color = int(rng.integers(N_COLORS)) if level >= 3 else None
    return EnvConfig(level=level, obstacles=obstacles, dyer=dyer, dyer_color=dyer_color)


def _sample_states(level: int, env: EnvConfig, rng: np.random.Generator,
                   n_types: int) -> tuple[ObjectState, ObjectState]:
    free = [(x, y) for x in range(X_CELLS) for y in range(Y_CELLS)
            if (x, y) not in env.blocked]
    init_pos = free[int(rng.integers(len(free)))]
    goal_pos = free[int(rng.integers(len(free)))]
    type_id = int(rng.integers(n_types))
    size = int(rng.integers(N_SIZES))
    init_rot = ROTATIONS[int(rng.integers(4))]
    goal_rot = init_rot if level <= 3 else ROTATIONS[int(rng.integers(4))]
    if level >= 3 and rng.random() < 0.5:
        # force a color change: goal color is the dyer's, init differs
        goal_color = env.dyer_color
        others = [c for c in range(N_COLORS) if c != goal_color]
        init_color = others[int(rng.integers(len(others)))]
    else:
        init_color = int(rng.integers(N_COLORS))
        goal_color = init_color
    init = ObjectState(type_id, init_pos[0], init_pos[1], init_rot, init_color, size)
    goal = ObjectState(type_id, goal_pos[0], goal_pos[1], goal_rot, goal_color, size)
    return init, goal


def generate_task(level: int, rng: np.random.Generator, *,
                  max_attempts: int = 1000, n_types: int = N_TYPES) -> Task:
    """Sample one task whose gt plan is nonempty and within the level's cap."""
    if level not in (1, 2, 3, 4):
        raise ValueError(f"level must be 1..4, got {level}")
    for _ in range(max_attempts):
        env = _sample_env(level, rng)
        if env is None:
            continue
        init, goal = _sample_states(level, env, rng, n_types)
        try:
            plan = oracle_shortest_plan(env, init, goal)
        except Unreachable:
            continue
        if not plan or len(plan) > env.max_len:
            continue
        return Task(env=env, init=init, goal=goal, gt_actions=plan)
    raise GenerationExhausted(f"no valid level-{level} task in {max_attempts} attempts")


def _task_rng(seed: int, stream: int, index: int) -> np.random.Generator:
    return np.random.default_rng([seed, stream, index])


def _split_of(index: int, counts: tuple[int, int, int]) -> str:
    if index < counts[0]:
        return "train"
    if index < counts[0] + counts[1]:
        return "val"
    return "test"


def generate_dataset(level: int, counts: tuple[int, int, int], seed: int, *,
                     codebook_seed: int | None = None) -> Dataset:
    """Generate train/val/test tasks; byte-reproducible under a fixed seed."""
    if min(counts) < 0 or sum(counts) == 0:
        raise ValueError("counts must be nonnegative and sum to > 0")
    tasks = []
    for i in range(sum(counts)):
        task = generate_task(level, _task_rng(seed, _STREAM_TASK, i))
        tasks.append(replace(task, task_id=f"L{level}-{i:05d}",
                             split=_split_of(i, counts)))
    return Dataset(level=level, tasks=tasks, seed=seed,
                   codebook_seed=seed if codebook_seed is None else codebook_seed,
                   split_sizes=tuple(counts))


def make_unseen_object_split(dataset: Dataset, held_out_types: set[int]) -> Dataset:
    """Rewrite test tasks to use only held-out object types.

    Type plays no role in the dynamics, so gt plans remain valid verbatim.
    Train and val tasks are untouched.
    """
    held = sorted(set(held_out_types))
    if not held:
        raise ValueError("held_out_types must be nonempty")
    train_types = {t.init.type_id for t in dataset.tasks if t.split != "test"}
    overlap = train_types & set(held)
    if overlap:
        raise ValueError(f"held-out types {sorted(overlap)} appear in training data")
    tasks = []
    for i, task in enumerate(dataset.tasks):
        if task.split == "test":
            rng = _task_rng(dataset.seed, _STREAM_RETYPE, i)
            t = held[int(rng.integers(len(held)))]
            task = replace(task, init=replace(task.init, type_id=t),
                           goal=replace(task.goal, type_id=t))
        tasks.append(task)
    return Dataset(level=dataset.level, tasks=tasks, seed=dataset.seed,
                   codebook_seed=dataset.codebook_seed,
                   split_sizes=dataset.split_sizes, variant="unseen_object")


def make_unseen_task_split(level: int, counts: tuple[int, int, int],
                           seed: int) -> Dataset:
    """Dataset whose test plans use action combinations absent from training.

    Training (and val) plans draw only on the designated families
    (left+front, right+back); test plans use exactly a held-out pair
    (left+back or right+front). Defined for levels 1 and 2 only.
    """
    if level not in (1, 2):
        raise ValueError("unseen-task splits are limited to levels 1 and 2")
    tasks = []
    for i in range(sum(counts)):
        split = _split_of(i, counts)
        rng = _task_rng(seed, _STREAM_UNSEEN, i)
        for _ in range(1000):
            task = generate_task(level, rng)
            used = frozenset(task.gt_actions)
            if split == "test":
                ok = used in TEST_FAMILIES  # both held-out actions must appear
            else:
                ok = any(used <= fam for fam in TRAIN_FAMILIES)
            if ok:
                tasks.append(replace(task, task_id=f"L{level}-{i:05d}", split=split))
                break
        else:
            raise GenerationExhausted(f"no family-conformant task for index {i}")
    return Dataset(level=level, tasks=tasks, seed=seed, codebook_seed=seed,
                   split_sizes=tuple(counts), variant="unseen_task")


