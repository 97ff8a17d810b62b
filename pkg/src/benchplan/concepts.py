"""Synthetic disentangled concept tokens.

Stands in for a trained perception front-end: each (concept, value) pair owns
a fixed random centroid, and encoding a state returns the six centroids plus
optional Gaussian noise. Disentanglement holds by construction — changing one
ground-truth value moves exactly one token — and noise_sigma dials in how
imperfect the "perception" is.

Token layout convention: a token set is an ndarray of shape (6, dim), row k
being the token of CONCEPTS[k].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .workbench import CONCEPTS, DEFAULT_CARDINALITIES, ObjectState

DEFAULT_DIM = 8
DEFAULT_MIN_SEP = 1.0

TYPE_CONCEPT = CONCEPTS.index("type")

# offsets separating the build / extend RNG streams
_STREAM_BUILD = 0
_STREAM_EXTEND = 100


class UnknownValue(Exception):
    """A state value has no centroid in the codebook."""


class SeparationUnachievable(Exception):
    """Rejection sampling could not place centroids min_sep apart."""


@dataclass(frozen=True)
class ConceptCodebook:
    """Per-concept centroid tables mu[k][v], all pairs within a concept >= min_sep apart."""

    dim: int
    seed: int
    min_sep: float
    centroids: tuple[np.ndarray, ...]  # per concept: (cardinality, dim)

    @property
    def cardinalities(self) -> tuple[int, ...]:
        return tuple(len(c) for c in self.centroids)


def _draw_separated(rng: np.random.Generator, count: int, dim: int, min_sep: float,
                    existing: np.ndarray | None = None,
                    tries_per_row: int = 1000) -> np.ndarray:
    rows = [] if existing is None else [np.asarray(r) for r in existing]
    start = len(rows)
    for _ in range(count):
        for _ in range(tries_per_row):
            cand = rng.standard_normal(dim)
            if all(np.linalg.norm(cand - r) >= min_sep for r in rows):
                rows.append(cand)
                break
        else:
            raise SeparationUnachievable(
                f"could not place centroid {len(rows)} at min_sep={min_sep}")
    return np.array(rows[start:]) if existing is not None else np.array(rows)


def build_codebook(dim: int = DEFAULT_DIM, seed: int = 0,
                   min_sep: float = DEFAULT_MIN_SEP,
                   cardinalities: tuple[int, ...] = DEFAULT_CARDINALITIES,
                   ) -> ConceptCodebook:
    """Draw all centroids from a standard normal, deterministic under seed."""
    if dim < 2:
        raise ValueError("dim must be >= 2")
    if min_sep < 0:
        raise ValueError("min_sep must be nonnegative")
    rng = np.random.default_rng([seed, _STREAM_BUILD])
    tables = tuple(_draw_separated(rng, card, dim, min_sep) for card in cardinalities)
    return ConceptCodebook(dim=dim, seed=seed, min_sep=min_sep, centroids=tables)


def extend_codebook(codebook: ConceptCodebook, concept: int,
                    new_values: int) -> ConceptCodebook:
    """Append centroids for unseen values; existing rows stay bit-identical.

    Only the TYPE concept is extendable — the other value spaces are closed.
    """
    if concept != TYPE_CONCEPT:
        raise ValueError("only the type concept supports extension")
    if new_values <= 0:
        raise ValueError("new_values must be positive")
    existing = codebook.centroids[concept]
    rng = np.random.default_rng(
        [codebook.seed, _STREAM_EXTEND + concept, len(existing)])
    added = _draw_separated(rng, new_values, codebook.dim, codebook.min_sep,
                            existing=existing)
    tables = list(codebook.centroids)
    tables[concept] = np.vstack([existing, added])
    return ConceptCodebook(dim=codebook.dim, seed=codebook.seed,
                           min_sep=codebook.min_sep, centroids=tuple(tables))


def encode(state: ObjectState, codebook: ConceptCodebook,
           noise_sigma: float = 0.0,
           rng: np.random.Generator | None = None) -> np.ndarray:
    """Tokens for a state: mu[k][value_k] plus iid N(0, noise_sigma^2) per coordinate."""
    tokens = np.empty((len(CONCEPTS), codebook.dim))
    for k, v in enumerate(state.values()):
        table = codebook.centroids[k]
        if not 0 <= v < len(table):
            raise UnknownValue(f"{CONCEPTS[k]} value {v} outside codebook "
                               f"(cardinality {len(table)})")
        tokens[k] = table[v]
    if noise_sigma > 0:
        if rng is None:
            raise ValueError("noisy encoding needs a caller-provided rng")
        tokens = tokens + rng.normal(0.0, noise_sigma, tokens.shape)
    return tokens


def changed_concept_index(a: np.ndarray, b: np.ndarray) -> int:
    """Index of the concept whose token moved the most (l2); ties -> lowest index."""
    if a.shape != b.shape:
        raise ValueError(f"token shape mismatch: {a.shape} vs {b.shape}")
    return int(np.argmax(np.linalg.norm(a - b, axis=1)))


def disentanglement_score(
        pairs: list[tuple[np.ndarray, np.ndarray, int]]) -> float:
    """Fraction of (tokens, tokens, true index) pairs identified correctly."""
    if not pairs:
        raise ValueError("need at least one pair")
    hits = sum(1 for a, b, truth in pairs if changed_concept_index(a, b) == truth)
    return hits / len(pairs)
