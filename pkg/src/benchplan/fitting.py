"""End-to-end fitting: dataset -> codebook -> symbolizer -> MDP counts -> affine maps."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .concepts import ConceptCodebook, build_codebook, encode, extend_codebook
from .mdp import TransitionModel, action_key, fit_transitions
from .symbols import Symbolizer, assign, fit_symbolizer, purity, symbolize
from .taskgen import Dataset, Task
from .token_maps import ActionTransitionMaps, fit_affine
from .workbench import simulate

_STREAM_FIT_ENCODE = 23


@dataclass(frozen=True)
class FitConfig:
    dim: int = 8
    min_sep: float = 1.0
    noise_sigma: float = 0.1
    thresh: float = 0.01
    seed: int = 0
    restarts: int = 10


@dataclass(frozen=True)
class ValueMaps:
    """Correspondence between ground-truth values and fitted cluster labels."""

    value_to_symbol: tuple[tuple[int, ...], ...]
    symbol_to_value: tuple[tuple[int, ...], ...]


def value_symbol_maps(codebook: ConceptCodebook, symbolizer: Symbolizer) -> ValueMaps:
    """Ground each cluster by nearest codebook centroid, and vice versa."""
    fwd, inv = [], []
    for centroids, centers in zip(codebook.centroids, symbolizer.centers):
        fwd.append(tuple(assign(c, centers) for c in centroids))
        inv.append(tuple(assign(c, centroids) for c in centers))
    return ValueMaps(value_to_symbol=tuple(fwd), symbol_to_value=tuple(inv))


@dataclass
class Fitted:
    """Everything the planner and evaluator need, fit from one dataset."""

    config: FitConfig
    codebook_seed: int
    codebook: ConceptCodebook
    symbolizer: Symbolizer
    model: TransitionModel
    maps: ActionTransitionMaps
    value_maps: ValueMaps
    train_purity: tuple[float, ...]


def encode_trajectory(task: Task, codebook: ConceptCodebook, sigma: float,
                      rng: np.random.Generator) -> tuple[list, list[np.ndarray]]:
    """States along the gt plan and one token observation per state."""
    states = simulate(task.init, task.gt_actions, task.env)
    tokens = [encode(s, codebook, sigma, rng) for s in states]
    return states, tokens


def fit_pipeline(dataset: Dataset, config: FitConfig = FitConfig()) -> Fitted:
    """Fit all stages on the dataset's training split."""
    codebook = build_codebook(dim=config.dim, seed=dataset.codebook_seed,
                              min_sep=config.min_sep)
    per_task: list[tuple[Task, list, list[np.ndarray]]] = []
    all_tokens: list[np.ndarray] = []
    all_states: list = []
    for i, task in enumerate(dataset.tasks):
        if task.split != "train":
            continue
        rng = np.random.default_rng([config.seed, _STREAM_FIT_ENCODE, i])
        states, tokens = encode_trajectory(task, codebook, config.noise_sigma, rng)
        per_task.append((task, states, tokens))
        all_tokens.extend(tokens)
        all_states.extend(states)
    if not per_task:
        raise ValueError("dataset has no training tasks")

    symbolizer = fit_symbolizer(all_tokens, codebook.cardinalities,
                                seed=config.seed, restarts=config.restarts)

    triplets = []
    pairs: dict[str, list[tuple[np.ndarray, np.ndarray]]] = {}
    for task, states, tokens in per_task:
        symbols = [symbolize(t, symbolizer) for t in tokens]
        keys = [action_key(a, task.env) for a in task.gt_actions]
        for t, key in enumerate(keys):
            triplets.append((symbols[t], key, symbols[t + 1]))
            pairs.setdefault(key, []).append((tokens[t], tokens[t + 1]))

    model = fit_transitions(triplets, thresh=config.thresh,
                            cardinalities=symbolizer.cardinalities)
    # token maps need MIN_PAIRS examples each; rare contexts (a seldom-seen
    # dyer color at small data sizes) are dropped from the maps only — the
    # transition counts keep them
    from .token_maps import MIN_PAIRS
    supported = {k: v for k, v in pairs.items() if len(v) >= MIN_PAIRS}
    if not supported:
        raise ValueError("no action has enough pairs to fit token maps")
    maps = fit_affine(supported, dim=config.dim)
    vmaps = value_symbol_maps(codebook, symbolizer)
    train_purity = tuple(float(p) for p in
                         purity(symbolizer, list(zip(all_tokens, all_states))))
    return Fitted(config=config, codebook_seed=dataset.codebook_seed,
                  codebook=codebook, symbolizer=symbolizer, model=model,
                  maps=maps, value_maps=vmaps, train_purity=train_purity)


def codebook_for_tasks(fitted: Fitted, tasks: list[Task]) -> ConceptCodebook:
    """Extend the type table when tasks mention types beyond the fitted codebook."""
    max_type = max((t.init.type_id for t in tasks), default=-1)
    n_known = fitted.codebook.cardinalities[0]
    if max_type < n_known:
        return fitted.codebook
    return extend_codebook(fitted.codebook, 0, max_type + 1 - n_known)
