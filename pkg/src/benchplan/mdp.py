"""Symbol-level transition model and legality-checked goal-conditioned planning.

The model records per-concept (input symbol, action, output symbol) counts
plus per-concept action-occurrence counts. Planning propagates the factored
symbol distribution under three gates per step: an action-legality indicator
(empirical action probability above a threshold), the learned transition
matrix, and a state-validity mask over destinations with renormalization.

Position validity couples the two position concepts, so validity is evaluated
on the joint (x, y) grid and marginalized onto each axis for distribution
propagation; the k-best plan search checks successor validity on the joint
grid directly.

Actions are referred to by key. Movement and rotation keys equal the action
names. change_color is context-dependent in truth (the object takes the
dyer's color), so its counts are keyed per dyer color — "change_color@3" —
and the environment's dyer selects the key at planning time. Likewise,
adjacency to the dyer is an environment-derived legality: the factored
occurrence counts pooled over benches with differently placed dyers cannot
express it, so the search gates change_color on adjacency using the bench
masks.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .workbench import ACTIONS, X_CELLS, Y_CELLS, EnvConfig

DEFAULT_THRESH = 0.01
POSX, POSY = 1, 2
CHANGEABLE_CONCEPTS = (1, 2, 3, 4)  # pos_x, pos_y, rotation, color

SymbolState = tuple[int, ...]


class DeadDistribution(Exception):
    """Propagation eliminated all probability mass (impossible action)."""


class NoPlanFound(Exception):
    """Search exhausted its length budget without reaching the goal."""


def action_key(action: str, env: EnvConfig) -> str:
    """Model key for an action in a given environment."""
    if action == "change_color" and env.dyer_color is not None:
        return f"change_color@{env.dyer_color}"
    return action


def base_action(key: str) -> str:
    return key.split("@", 1)[0]


def _key_rank(key: str) -> tuple[int, int]:
    base, _, ctx = key.partition("@")
    return (ACTIONS.index(base), int(ctx) if ctx else -1)


@dataclass
class TransitionModel:
    """Per-concept count tables N_k[a][w][w'] and occurrence tables M_k[w][a].

    Transition counts are keyed by context key (change_color split per dyer
    color); occurrence counts — the basis of the legality indicator — are
    recorded over the seven atomic actions, which is the space the indicator
    is defined on.
    """

    cardinalities: tuple[int, ...]
    thresh: float
    action_keys: tuple[str, ...]         # context keys observed in training
    base_actions: tuple[str, ...]        # atomic actions observed in training
    counts: dict[str, list[np.ndarray]]  # key -> per concept (k_k, k_k) ints
    occurrences: list[np.ndarray]        # per concept (k_k, n_base_actions) ints
    # derived probability tables, built once after counting
    trans_p: dict[str, list[np.ndarray]] = field(default_factory=dict, repr=False)
    act_p: list[np.ndarray] = field(default_factory=list, repr=False)

    def __post_init__(self):
        if not 0 < self.thresh < 1:
            raise ValueError("thresh must lie in (0, 1)")
        if not self.trans_p:
            self._build_probabilities()

    def _build_probabilities(self):
        for key in self.action_keys:
            mats = []
            for n in self.counts[key]:
                row_tot = n.sum(axis=1, keepdims=True)
                with np.errstate(invalid="ignore"):
                    p = np.where(row_tot > 0, n / np.maximum(row_tot, 1), 0.0)
                mats.append(p)
            self.trans_p[key] = mats
        for m in self.occurrences:
            row_tot = m.sum(axis=1, keepdims=True)
            self.act_p.append(np.where(row_tot > 0, m / np.maximum(row_tot, 1), 0.0))

    def key_index(self, key: str) -> int | None:
        try:
            return self.action_keys.index(key)
        except ValueError:
            return None

    def base_index(self, key: str) -> int | None:
        try:
            return self.base_actions.index(base_action(key))
        except ValueError:
            return None


def fit_transitions(triplets: Iterable[tuple[SymbolState, str, SymbolState]],
                    thresh: float = DEFAULT_THRESH,
                    cardinalities: Sequence[int] | None = None) -> TransitionModel:
    """Accumulate (symbol state, action key, symbol state) triplets into counts."""
    triplets = list(triplets)
    if not triplets:
        raise ValueError("need at least one triplet")
    n_concepts = len(triplets[0][0])
    if cardinalities is None:
        cardinalities = tuple(
            max(max(t[0][k], t[2][k]) for t in triplets) + 1 for k in range(n_concepts))
    cards = tuple(int(c) for c in cardinalities)
    keys = tuple(sorted({t[1] for t in triplets}, key=_key_rank))
    bases = tuple(sorted({base_action(t[1]) for t in triplets}, key=ACTIONS.index))
    base_pos = {a: i for i, a in enumerate(bases)}
    counts = {k: [np.zeros((c, c), dtype=np.int64) for c in cards] for k in keys}
    occ = [np.zeros((c, len(bases)), dtype=np.int64) for c in cards]
    for before, key, after in triplets:
        j = base_pos[base_action(key)]
        for k in range(n_concepts):
            w, w2 = before[k], after[k]
            if not (0 <= w < cards[k] and 0 <= w2 < cards[k]):
                raise ValueError(f"symbol out of range for concept {k}: {w}, {w2}")
            counts[key][k][w, w2] += 1
            occ[k][w, j] += 1
    return TransitionModel(cardinalities=cards, thresh=thresh, action_keys=keys,
                           base_actions=bases, counts=counts, occurrences=occ)


# ---------------------------------------------------------------------------
# masks

@dataclass(frozen=True)
class StateMask:
    """Validity in ground-truth value space: joint grid plus per-concept marginals."""

    joint: np.ndarray                    # (X_CELLS, Y_CELLS) bool
    per_concept: tuple[np.ndarray, ...]  # bool vectors over concept values


def state_mask(env: EnvConfig,
               cardinalities: Sequence[int] | None = None) -> StateMask:
    """Grid cells under obstacles or the dyer are invalid; everything else is valid.

    The per-axis masks are the joint mask's marginals: an axis value is valid
    when some cell with that value is free. Non-position concepts are fully
    valid.
    """
    from .workbench import DEFAULT_CARDINALITIES
    cards = tuple(cardinalities) if cardinalities else DEFAULT_CARDINALITIES
    joint = np.ones((X_CELLS, Y_CELLS), dtype=bool)
    for (x, y) in env.blocked:
        joint[x, y] = False
    per = []
    for k, c in enumerate(cards):
        if k == POSX:
            per.append(joint.any(axis=1))
        elif k == POSY:
            per.append(joint.any(axis=0))
        else:
            per.append(np.ones(c, dtype=bool))
    return StateMask(joint=joint, per_concept=tuple(per))


@dataclass(frozen=True)
class SymbolMasks:
    """Environment validity translated into the fitted symbol space.

    x_values/y_values map position symbols to grid values, which is what lets
    the planner evaluate joint-grid validity and dyer adjacency on symbol
    states regardless of how cluster labels came out.
    """

    grid: np.ndarray                       # (X_CELLS, Y_CELLS) bool, value coords
    x_values: tuple[int, ...]              # pos_x symbol -> x value
    y_values: tuple[int, ...]              # pos_y symbol -> y value
    per_concept: tuple[np.ndarray, ...]    # symbol-space masks, for propagation
    dyer_cell: tuple[int, int] | None
    dyer_color: int | None

    @classmethod
    def build(cls, env: EnvConfig, x_values: Sequence[int], y_values: Sequence[int],
              cardinalities: Sequence[int]) -> "SymbolMasks":
        base = state_mask(env, cardinalities)
        per = []
        for k, c in enumerate(cardinalities):
            if k == POSX:
                per.append(np.array([base.per_concept[k][v] for v in x_values]))
            elif k == POSY:
                per.append(np.array([base.per_concept[k][v] for v in y_values]))
            else:
                per.append(np.ones(c, dtype=bool))
        return cls(grid=base.joint, x_values=tuple(int(v) for v in x_values),
                   y_values=tuple(int(v) for v in y_values),
                   per_concept=tuple(per), dyer_cell=env.dyer,
                   dyer_color=env.dyer_color)

    @classmethod
    def identity(cls, env: EnvConfig, cardinalities: Sequence[int]) -> "SymbolMasks":
        return cls.build(env, range(cardinalities[POSX]), range(cardinalities[POSY]),
                         cardinalities)

    def cell_of(self, state: SymbolState) -> tuple[int, int]:
        return (self.x_values[state[POSX]], self.y_values[state[POSY]])

    def position_valid(self, state: SymbolState) -> bool:
        x, y = self.cell_of(state)
        return bool(self.grid[x, y])

    def dyer_adjacent(self, state: SymbolState) -> bool:
        if self.dyer_cell is None:
            return False
        x, y = self.cell_of(state)
        return abs(x - self.dyer_cell[0]) + abs(y - self.dyer_cell[1]) == 1


# ---------------------------------------------------------------------------
# distribution propagation

def point_mass(state: SymbolState, cardinalities: Sequence[int]) -> list[np.ndarray]:
    dist = []
    for k, c in enumerate(cardinalities):
        v = np.zeros(c)
        v[state[k]] = 1.0
        dist.append(v)
    return dist


def propagate(dist: Sequence[np.ndarray], key: str, model: TransitionModel,
              valid: Sequence[np.ndarray]) -> list[np.ndarray]:
    """One reasoning step per concept: legality gate, transition, mask, renormalize."""
    j = model.base_index(key)
    if model.key_index(key) is None or j is None:
        raise DeadDistribution(f"action {key!r} never observed")
    out = []
    for k in range(len(model.cardinalities)):
        gate = model.act_p[k][:, j] > model.thresh  # legality indicator on sources
        moved = model.trans_p[key][k].T @ (np.asarray(dist[k]) * gate)
        moved = moved * np.asarray(valid[k], dtype=float)  # invalid destinations drop out
        total = moved.sum()
        if total <= 0.0:
            raise DeadDistribution(f"all mass eliminated for {key!r} "
                                   f"on concept {k}")
        out.append(moved / total)
    return out


def action_legal(model: TransitionModel, state: SymbolState, key: str) -> bool:
    """Legality indicator: empirical P(action | symbol) above thresh for every concept."""
    j = model.base_index(key)
    if model.key_index(key) is None or j is None:
        return False
    return all(model.act_p[k][state[k], j] > model.thresh
               for k in range(len(model.cardinalities)))


# ---------------------------------------------------------------------------
# k-best planning

@dataclass(frozen=True)
class Plan:
    actions: tuple[str, ...]  # action keys
    score: float


@dataclass(frozen=True)
class PlanResult:
    """Up to K distinct plans, ranked by (length ascending, score descending)."""

    plans: tuple[Plan, ...]
    warnings: tuple[str, ...] = ()

    @property
    def best(self) -> Plan:
        return self.plans[0]


def _map_successor(model: TransitionModel, state: SymbolState,
                   key: str) -> tuple[SymbolState, float] | None:
    succ = []
    prob = 1.0
    for k in range(len(model.cardinalities)):
        row = model.trans_p[key][k][state[k]]
        total = row.sum()
        if total <= 0.0:
            return None
        w2 = int(row.argmax())
        succ.append(w2)
        prob *= float(row[w2])
    return tuple(succ), prob


def _matches_goal(state: SymbolState, goal: SymbolState) -> bool:
    return all(state[c] == goal[c] for c in CHANGEABLE_CONCEPTS)


def available_keys(model: TransitionModel, masks: SymbolMasks) -> tuple[str, ...]:
    """Model keys executable on this bench: change_color only for its dyer color."""
    keys = []
    for key in model.action_keys:
        base, _, ctx = key.partition("@")
        if base == "change_color" and ctx and (
                masks.dyer_color is None or int(ctx) != masks.dyer_color):
            continue
        keys.append(key)
    return tuple(keys)


def plan(model: TransitionModel, init: SymbolState, goal: SymbolState,
         masks: SymbolMasks, top_k: int = 5, l_max: int = 16) -> PlanResult:
    """Search the MAP symbol-state graph for up to top_k goal-reaching sequences.

    Layered best-first enumeration: depth d holds, for every reachable symbol
    state, the top_k highest-scoring length-d action sequences arriving there
    (score = product of stepwise max transition probabilities). A sequence is
    accepted when its state matches the goal on the changeable concepts.
    Deterministic: ties break on the fixed action ordering.
    """
    if not masks.position_valid(init):
        raise ValueError("initial symbol state is invalid under the masks")
    warnings = tuple(
        f"init/goal mismatch on unchangeable concept {c}"
        for c in (0, 5) if init[c] != goal[c])
    if _matches_goal(init, goal):
        return PlanResult(plans=(Plan((), 1.0),), warnings=warnings)

    rank = {key: i for i, key in enumerate(model.action_keys)}

    def seq_rank(seq: tuple[str, ...]) -> tuple[int, ...]:
        return tuple(rank[k] for k in seq)

    def order(entry: tuple[float, tuple[str, ...]]):
        return (-entry[0], seq_rank(entry[1]))

    keys = available_keys(model, masks)
    results: list[tuple[float, tuple[str, ...]]] = []
    layer: dict[SymbolState, list[tuple[float, tuple[str, ...]]]] = {
        init: [(1.0, ())]}
    for _ in range(l_max):
        if len(results) >= top_k:
            break
        successors: dict[SymbolState, list[tuple[float, tuple[str, ...]]]] = {}
        for state in sorted(layer):
            entries = layer[state]
            for key in keys:
                if not action_legal(model, state, key):
                    continue
                if base_action(key) == "change_color" and not masks.dyer_adjacent(state):
                    continue  # adjacency is environment knowledge, not in the counts
                step = _map_successor(model, state, key)
                if step is None:
                    continue
                succ, step_p = step
                if not masks.position_valid(succ):
                    continue
                bucket = successors.setdefault(succ, [])
                bucket.extend((score * step_p, seq + (key,))
                              for score, seq in entries)
        layer = {}
        arrivals: list[tuple[float, tuple[str, ...]]] = []
        for state, bucket in successors.items():
            bucket.sort(key=order)
            layer[state] = bucket[:top_k]
            if _matches_goal(state, goal):
                arrivals.extend(layer[state])
        arrivals.sort(key=order)
        results.extend(arrivals)
        if not layer:
            break
    if not results:
        raise NoPlanFound(f"no plan within {l_max} steps")
    return PlanResult(plans=tuple(Plan(seq, score)
                                  for score, seq in results[:top_k]),
                      warnings=warnings)
