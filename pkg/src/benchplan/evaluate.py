"""Planning metrics (ASAcc, ASE, FSD), baselines, and the experiment runner.

Per-task evaluation is independent — every task draws from its own RNG stream
derived from (seed, task index) — so results are identical whether tasks run
serially or across a process pool.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .concepts import ConceptCodebook, encode
from .fitting import Fitted, codebook_for_tasks
from .mdp import NoPlanFound, SymbolMasks, base_action, plan
from .symbols import symbolize
from .taskgen import Dataset, Task
from .token_maps import plan_tokenspace
from .workbench import ACTIONS, CONCEPTS, ObjectState, adjudicate

_STREAM_EVAL = 31
_STREAM_CHANCE = 37

PLANNERS = ("symbolic", "token", "chance")


@dataclass(frozen=True)
class TaskRecord:
    task_id: str
    gt_len: int
    attempt_success: tuple[bool, ...]  # adjudication per attempt, best-first
    top1_len: int | None              # length of the first attempt, if any
    fsd: float                        # final-state distance of the first attempt

    @property
    def top1_success(self) -> bool:
        return bool(self.attempt_success) and self.attempt_success[0]

    @property
    def any_success(self) -> bool:
        return any(self.attempt_success)


@dataclass(frozen=True)
class EvalReport:
    level: int
    planner: str
    split: str
    n_tasks: int
    asacc_top1: float  # percent
    asacc_top5: float  # percent
    ase: float | None  # absent when there are no top-1 successes
    fsd_mean: float
    records: tuple[TaskRecord, ...]


def fsd(final: ObjectState, goal: ObjectState) -> float:
    """Euclidean distance between positions, in grid-cell units."""
    return math.hypot(final.pos_x - goal.pos_x, final.pos_y - goal.pos_y)


def ase(records: Iterable[tuple[int, int, bool]]) -> float | None:
    """Mean gt_len/pred_len over successes; zero-length successes count 1.0."""
    total, successes = 0.0, 0
    for gt_len, pred_len, success in records:
        if not success:
            continue
        successes += 1
        total += 1.0 if pred_len == 0 else gt_len / pred_len
    return total / successes if successes else None


def asacc(attempt_sets: Sequence[Sequence[bool]]) -> tuple[float, float]:
    """(top-1, top-5) success percentages; an empty attempt set counts as failure."""
    if not attempt_sets:
        raise ValueError("need at least one task")
    top1 = sum(1 for a in attempt_sets if a and a[0])
    any_ = sum(1 for a in attempt_sets if any(a))
    n = len(attempt_sets)
    return 100.0 * top1 / n, 100.0 * any_ / n


def chance_baseline(task: Task, rng: np.random.Generator,
                    attempts: int = 5) -> list[tuple[str, ...]]:
    """Uniformly random sequences, lengths uniform in [1, max_len]."""
    out = []
    for _ in range(attempts):
        length = int(rng.integers(1, task.env.max_len + 1))
        picks = rng.integers(0, len(ACTIONS), size=length)
        out.append(tuple(ACTIONS[int(i)] for i in picks))
    return out


def _masks_for(task: Task, fitted: Fitted) -> SymbolMasks:
    return SymbolMasks.build(
        task.env,
        x_values=fitted.value_maps.symbol_to_value[1],
        y_values=fitted.value_maps.symbol_to_value[2],
        cardinalities=fitted.symbolizer.cardinalities)


def _keys_to_actions(keys: Sequence[str]) -> tuple[str, ...]:
    return tuple(base_action(k) for k in keys)


def evaluate_task(task: Task, fitted: Fitted, codebook: ConceptCodebook, *,
                  planner: str, noise_sigma: float, top_k: int,
                  l_max: int | None, rng: np.random.Generator) -> TaskRecord:
    """Plan one task, adjudicate every attempt, measure FSD on the first."""
    budget = l_max if l_max is not None else task.env.max_len
    if planner == "chance":
        attempts = chance_baseline(task, rng, attempts=top_k)
    else:
        init_tokens = encode(task.init, codebook, noise_sigma, rng)
        goal_tokens = encode(task.goal, codebook, noise_sigma, rng)
        masks = _masks_for(task, fitted)
        try:
            if planner == "symbolic":
                init_sym = symbolize(init_tokens, fitted.symbolizer)
                goal_sym = symbolize(goal_tokens, fitted.symbolizer)
                result = plan(fitted.model, init_sym, goal_sym, masks,
                              top_k=top_k, l_max=budget)
            elif planner == "token":
                result = plan_tokenspace(fitted.maps, init_tokens, goal_tokens,
                                         fitted.symbolizer, masks,
                                         top_k=top_k, l_max=budget)
            else:
                raise ValueError(f"unknown planner {planner!r}")
            attempts = [_keys_to_actions(p.actions) for p in result.plans]
        except (NoPlanFound, ValueError):
            attempts = []

    reports = [adjudicate(task, actions) for actions in attempts]
    if reports:
        final = reports[0].final_state
        top1_len = len(attempts[0])
    else:
        final = task.init
        top1_len = None
    return TaskRecord(task_id=task.task_id, gt_len=len(task.gt_actions),
                      attempt_success=tuple(r.success for r in reports),
                      top1_len=top1_len, fsd=fsd(final, task.goal))


def _eval_one(args) -> TaskRecord:
    index, task, fitted, codebook, planner, noise_sigma, top_k, l_max, seed = args
    stream = _STREAM_CHANCE if planner == "chance" else _STREAM_EVAL
    rng = np.random.default_rng([seed, stream, index])
    return evaluate_task(task, fitted, codebook, planner=planner,
                         noise_sigma=noise_sigma, top_k=top_k, l_max=l_max,
                         rng=rng)


def run_experiment(dataset: Dataset, fitted: Fitted, *, planner: str = "symbolic",
                   split: str = "test", noise_sigma: float | None = None,
                   top_k: int = 5, l_max: int | None = None, seed: int = 0,
                   jobs: int = 1) -> EvalReport:
    """Plan and adjudicate every task in the split; aggregate the metrics."""
    if planner not in PLANNERS:
        raise ValueError(f"planner must be one of {PLANNERS}")
    tasks = dataset.subset(split)
    if not tasks:
        raise ValueError(f"dataset has no {split!r} tasks")
    sigma = fitted.config.noise_sigma if noise_sigma is None else noise_sigma
    codebook = codebook_for_tasks(fitted, tasks)
    work = [(i, task, fitted, codebook, planner, sigma, top_k, l_max, seed)
            for i, task in enumerate(tasks)]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_eval_one, work, chunksize=8))
    else:
        records = [_eval_one(w) for w in work]

    top1, top5 = asacc([r.attempt_success for r in records])
    efficiency = ase((r.gt_len, r.top1_len if r.top1_len is not None else 0,
                      r.top1_success) for r in records)
    return EvalReport(level=dataset.level, planner=planner, split=split,
                      n_tasks=len(records), asacc_top1=top1, asacc_top5=top5,
                      ase=efficiency,
                      fsd_mean=float(np.mean([r.fsd for r in records])),
                      records=tuple(records))


# ---------------------------------------------------------------------------
# interpretability: action effects on the token space

@dataclass(frozen=True)
class InterpretabilityReport:
    actions: tuple[str, ...]                     # base actions, fixed order
    displacement: np.ndarray                     # (6 concepts, n actions) mean l2
    position_changes: dict[str, np.ndarray]      # action -> (n, 2) decoded (dx, dy)

    def argmax_concepts(self) -> dict[str, str]:
        return {a: CONCEPTS[int(self.displacement[:, j].argmax())]
                for j, a in enumerate(self.actions)}

    def to_text(self) -> str:
        lines = ["mean token displacement (l2) per concept and action",
                 "concept\t" + "\t".join(self.actions)]
        for k, name in enumerate(CONCEPTS):
            row = "\t".join(f"{self.displacement[k, j]:.4f}"
                            for j in range(len(self.actions)))
            lines.append(f"{name}\t{row}")
        return "\n".join(lines) + "\n"

    def position_tsv(self) -> str:
        lines = ["action\tdx\tdy"]
        for action in self.actions:
            for dx, dy in self.position_changes.get(action, ()):
                lines.append(f"{action}\t{int(dx)}\t{int(dy)}")
        return "\n".join(lines) + "\n"


def _decode_position(tokens: np.ndarray, codebook: ConceptCodebook) -> tuple[int, int]:
    from .symbols import assign
    return (assign(tokens[1], codebook.centroids[1]),
            assign(tokens[2], codebook.centroids[2]))


def interpretability_report(maps, codebook: ConceptCodebook, *,
                            samples: int = 200, seed: int = 0,
                            ) -> InterpretabilityReport:
    """Apply each fitted map to sampled in-distribution states and measure effects.

    Sources are sampled so the action was physically possible on an open bench
    (movement headroom; color differing from a change_color key's dyer color),
    keeping the maps inside the regime they were trained on. change_color keys
    are pooled into one column.
    """
    from .mdp import _key_rank
    from .workbench import N_COLORS, N_SIZES, ROTATIONS, X_CELLS, Y_CELLS
    from .token_maps import transition

    rng = np.random.default_rng([seed, 41])
    present = sorted({base_action(k) for k in maps.action_keys},
                     key=lambda a: ACTIONS.index(a))
    keys_of = {a: [k for k in maps.action_keys if base_action(k) == a]
               for a in present}
    n_types = codebook.cardinalities[0]

    def sample_state(action: str, ctx: str) -> ObjectState:
        while True:
            state = ObjectState(int(rng.integers(n_types)),
                                int(rng.integers(X_CELLS)),
                                int(rng.integers(Y_CELLS)),
                                ROTATIONS[int(rng.integers(4))],
                                int(rng.integers(N_COLORS)),
                                int(rng.integers(N_SIZES)))
            if action == "move_front" and state.pos_y == Y_CELLS - 1:
                continue
            if action == "move_back" and state.pos_y == 0:
                continue
            if action == "move_left" and state.pos_x == 0:
                continue
            if action == "move_right" and state.pos_x == X_CELLS - 1:
                continue
            if action == "change_color" and state.color == int(ctx):
                continue
            return state

    displacement = np.zeros((len(CONCEPTS), len(present)))
    position_changes: dict[str, np.ndarray] = {}
    for j, action in enumerate(present):
        per_concept = np.zeros(len(CONCEPTS))
        deltas = []
        total = 0
        for key in sorted(keys_of[action], key=_key_rank):
            _, _, ctx = key.partition("@")
            for _ in range(max(1, samples // len(keys_of[action]))):
                state = sample_state(action, ctx)
                before = encode(state, codebook)
                after = transition(before, key, maps)
                per_concept += np.linalg.norm(after - before, axis=1)
                bx, by = _decode_position(before, codebook)
                ax, ay = _decode_position(after, codebook)
                deltas.append((ax - bx, ay - by))
                total += 1
        displacement[:, j] = per_concept / total
        position_changes[action] = np.array(deltas, dtype=int)
    return InterpretabilityReport(actions=tuple(present),
                                  displacement=displacement,
                                  position_changes=position_changes)
