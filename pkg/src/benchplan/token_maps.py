"""Per-action affine transition maps over concept tokens.

The continuous analog of the symbol-level model: each action key owns one
affine map acting on the concatenated (6*dim) token vector, fit by
ridge-regularized least squares on observed (before, after) token pairs.
Also hosts the token-space planner used as the no-symbols ablation: it
searches by applying maps directly, snapping to symbols only for visited-set
keys, position-validity checks and the goal test — it has no action-legality
model, which is exactly what the ablation is meant to expose.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .mdp import (
    CHANGEABLE_CONCEPTS,
    NoPlanFound,
    Plan,
    PlanResult,
    SymbolMasks,
    _key_rank,
)
from .symbols import Symbolizer, symbolize

MIN_PAIRS = 8          # hard floor per action
RIDGE_LAMBDA = 1e-6    # disentangled tokens span < 6*dim dims, so always regularize
SNAP_MARGIN = 0.3      # successor tokens must sit within this fraction of the
                       # concept's minimum center gap, else the snap is untrusted


class InsufficientPairs(Exception):
    """Too few training pairs to fit an action's map."""


class UnknownAction(Exception):
    """Transition requested for an action absent from the fitted maps."""


@dataclass(frozen=True)
class ActionTransitionMaps:
    dim: int
    action_keys: tuple[str, ...]
    matrices: dict[str, np.ndarray]   # key -> (6*dim, 6*dim)
    offsets: dict[str, np.ndarray]    # key -> (6*dim,)
    residual_mse: dict[str, float]
    pair_counts: dict[str, int]


def fit_affine(pairs_by_action: dict[str, Sequence[tuple[np.ndarray, np.ndarray]]],
               dim: int) -> ActionTransitionMaps:
    """Closed-form normal-equations fit of one affine map per action key."""
    keys = tuple(sorted(pairs_by_action, key=_key_rank))
    if not keys:
        raise InsufficientPairs("no training pairs at all")
    width = 6 * dim
    matrices, offsets, mses, npairs = {}, {}, {}, {}
    for key in keys:
        pairs = pairs_by_action[key]
        if len(pairs) < MIN_PAIRS:
            raise InsufficientPairs(f"{key!r} has {len(pairs)} pairs, need {MIN_PAIRS}")
        x = np.stack([before.ravel() for before, _ in pairs])
        y = np.stack([after.ravel() for _, after in pairs])
        xa = np.hstack([x, np.ones((len(x), 1))])
        gram = xa.T @ xa + RIDGE_LAMBDA * np.eye(width + 1)
        w = np.linalg.solve(gram, xa.T @ y)  # (width+1, width)
        matrices[key] = w[:-1].T.copy()
        offsets[key] = w[-1].copy()
        mses[key] = float(((xa @ w - y) ** 2).mean())
        npairs[key] = len(pairs)
    return ActionTransitionMaps(dim=dim, action_keys=keys, matrices=matrices,
                                offsets=offsets, residual_mse=mses,
                                pair_counts=npairs)


def transition(tokens: np.ndarray, key: str,
               maps: ActionTransitionMaps) -> np.ndarray:
    """Apply one action's affine map to a (6, dim) token set."""
    if key not in maps.matrices:
        raise UnknownAction(f"no fitted map for {key!r}")
    flat = maps.matrices[key] @ tokens.ravel() + maps.offsets[key]
    return flat.reshape(6, maps.dim)


def rollout(tokens: np.ndarray, keys: Sequence[str],
            maps: ActionTransitionMaps) -> list[np.ndarray]:
    """Iterated transition; returns [tokens, t1, ..., tT]."""
    out = [tokens]
    for i, key in enumerate(keys):
        try:
            out.append(transition(out[-1], key, maps))
        except UnknownAction as err:
            raise UnknownAction(f"step {i}: {err}") from err
    return out


def token_mse(pred: np.ndarray, truth: np.ndarray) -> float:
    """Mean squared error over all 6*dim coordinates."""
    if pred.shape != truth.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {truth.shape}")
    return float(((pred - truth) ** 2).mean())


def _min_center_gaps(symbolizer: Symbolizer) -> list[float]:
    gaps = []
    for centers in symbolizer.centers:
        pair = ((centers[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        np.fill_diagonal(pair, np.inf)
        gaps.append(float(np.sqrt(pair.min())))
    return gaps


def _snap_trusted(tokens: np.ndarray, snapped: tuple[int, ...],
                  symbolizer: Symbolizer, gaps: list[float]) -> bool:
    """Off-manifold outputs (map extrapolation) land far from every center."""
    for k, centers in enumerate(symbolizer.centers):
        if np.linalg.norm(tokens[k] - centers[snapped[k]]) > SNAP_MARGIN * gaps[k]:
            return False
    return True


def _available_keys(maps: ActionTransitionMaps, masks: SymbolMasks) -> list[str]:
    keys = []
    for key in maps.action_keys:
        base, _, ctx = key.partition("@")
        if base == "change_color" and (masks.dyer_color is None
                                       or int(ctx) != masks.dyer_color):
            continue
        keys.append(key)
    return keys


def plan_tokenspace(maps: ActionTransitionMaps, init_tokens: np.ndarray,
                    goal_tokens: np.ndarray, symbolizer: Symbolizer,
                    masks: SymbolMasks, top_k: int = 5,
                    l_max: int = 16) -> PlanResult:
    """Search token space for sequences whose snapped state matches the goal.

    Nodes carry continuous tokens; per (snapped state, depth) only the top_k
    nodes nearest the goal tokens survive. Accepted sequences are scored by
    negative final token distance, ranked within a depth by that score.
    """
    goal_sym = symbolize(goal_tokens, symbolizer)
    goal_key = tuple(goal_sym[c] for c in CHANGEABLE_CONCEPTS)

    def goal_dist(tokens: np.ndarray) -> float:
        return float(np.linalg.norm(tokens - goal_tokens))

    keys = _available_keys(maps, masks)
    rank = {key: i for i, key in enumerate(maps.action_keys)}

    def order(entry: tuple[np.ndarray, tuple[str, ...]]):
        return (goal_dist(entry[0]), tuple(rank[k] for k in entry[1]))

    init_sym = symbolize(init_tokens, symbolizer)
    if tuple(init_sym[c] for c in CHANGEABLE_CONCEPTS) == goal_key:
        return PlanResult(plans=(Plan((), -goal_dist(init_tokens)),))

    gaps = _min_center_gaps(symbolizer)
    results: list[tuple[np.ndarray, tuple[str, ...]]] = []
    layer: dict[tuple[int, ...], list[tuple[np.ndarray, tuple[str, ...]]]] = {
        init_sym: [(init_tokens, ())]}
    for _ in range(l_max):
        if len(results) >= top_k:
            break
        successors: dict[tuple[int, ...], list] = {}
        for sym_state in sorted(layer):
            for tokens, seq in layer[sym_state]:
                for key in keys:
                    nxt = transition(tokens, key, maps)
                    nxt_sym = symbolize(nxt, symbolizer)
                    if not _snap_trusted(nxt, nxt_sym, symbolizer, gaps):
                        continue
                    if not masks.position_valid(nxt_sym):
                        continue
                    successors.setdefault(nxt_sym, []).append((nxt, seq + (key,)))
        layer = {}
        arrivals = []
        for sym_state, bucket in successors.items():
            bucket.sort(key=order)
            layer[sym_state] = bucket[:top_k]
            if tuple(sym_state[c] for c in CHANGEABLE_CONCEPTS) == goal_key:
                arrivals.extend(layer[sym_state])
        arrivals.sort(key=order)
        results.extend(arrivals)
        if not layer:
            break
    if not results:
        raise NoPlanFound(f"no token-space plan within {l_max} steps")
    return PlanResult(plans=tuple(Plan(seq, -goal_dist(tokens))
                                  for tokens, seq in results[:top_k]))
