"""Labeled random finite set primitives and the delta-GLMB density container."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, NamedTuple

import numpy as np
from scipy.special import logsumexp


class DegeneratePosteriorError(RuntimeError):
    """Every hypothesis weight is zero (log weight -inf)."""


class Label(NamedTuple):
    """Track label: time step of birth and index among that step's births.

    NamedTuple ordering gives the lexicographic (birth_time, birth_index) order
    used for all deterministic iteration.
    """

    birth_time: int
    birth_index: int

    def __str__(self):
        return f"{self.birth_time}:{self.birth_index}"

    @classmethod
    def parse(cls, text: str) -> "Label":
        bt, bi = text.split(":")
        return cls(int(bt), int(bi))


@dataclass(frozen=True, eq=False)
class LabeledParticleTrack:
    """Weighted particle cloud for one label. ``states`` is (N, 5): x, xdot, y, ydot, theta."""

    label: Label
    states: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        states = np.asarray(self.states, dtype=np.float64)
        weights = np.asarray(self.weights, dtype=np.float64)
        if states.ndim != 2 or states.shape[1] != 5:
            raise ValueError("states must be an (N, 5) array")
        if weights.shape != (states.shape[0],):
            raise ValueError("one weight per particle required")
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "weights", weights)

    @property
    def n_particles(self) -> int:
        return self.states.shape[0]

    def mean(self) -> np.ndarray:
        return self.weights @ self.states

    def ess(self) -> float:
        return 1.0 / float(np.sum(self.weights**2))


@dataclass(frozen=True)
class Hypothesis:
    labels: frozenset
    log_weight: float
    parent: int | None = None

    @property
    def cardinality(self) -> int:
        return len(self.labels)


@dataclass
class GlmbDensity:
    """delta-GLMB posterior: weighted label-set hypotheses plus per-label particle tracks.

    In the separable track-before-detect recursion the track density of a label
    does not depend on which hypothesis carries it, so ``tracks`` is keyed by
    label and every hypothesis references the same object.
    """

    hypotheses: list[Hypothesis]
    tracks: dict[Label, LabeledParticleTrack] = field(default_factory=dict)
    time: int = 0
    factors: dict = field(default_factory=dict)

    def track(self, hypothesis: int, label: Label) -> LabeledParticleTrack:
        if label not in self.hypotheses[hypothesis].labels:
            raise KeyError(f"label {label} not in hypothesis {hypothesis}")
        return self.tracks[label]

    @property
    def log_weights(self) -> np.ndarray:
        return np.array([h.log_weight for h in self.hypotheses])

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights)

    def labels(self) -> list[Label]:
        out = set()
        for h in self.hypotheses:
            out |= h.labels
        return sorted(out)

    def existence(self) -> dict[Label, float]:
        """Marginal existence probability of every label."""
        probs = dict.fromkeys(self.labels(), 0.0)
        for h, w in zip(self.hypotheses, self.weights):
            for l in h.labels:
                probs[l] += w
        return probs


def empty_density(time: int = 0) -> GlmbDensity:
    return GlmbDensity([Hypothesis(frozenset(), 0.0)], {}, time)


def distinct_label_indicator(states: Iterable[tuple]) -> int:
    """1 if every (state, label) pair carries a different label, else 0."""
    states = list(states)
    return int(len(states) == len({label for _, label in states}))


def multi_target_exponential(h: Callable, states: Iterable) -> float:
    out = 1.0
    for s in states:
        out *= h(s)
    return out


def normalize(density: GlmbDensity) -> GlmbDensity:
    lw = density.log_weights
    if lw.size == 0 or not np.any(np.isfinite(lw)):
        raise DegeneratePosteriorError("no hypothesis with finite weight")
    total = logsumexp(lw)
    hyps = [
        Hypothesis(h.labels, float(w), h.parent) for h, w in zip(density.hypotheses, lw - total)
    ]
    return GlmbDensity(hyps, density.tracks, density.time, density.factors)


def cardinality_distribution(density: GlmbDensity) -> np.ndarray:
    card = np.array([h.cardinality for h in density.hypotheses], dtype=np.int64)
    return np.bincount(card, weights=density.weights, minlength=card.max() + 1 if card.size else 1)
