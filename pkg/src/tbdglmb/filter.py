"""Joint prediction-update delta-GLMB recursion for track-before-detect radar data.

Because the measurement model is separable and there is no measurement-to-track
assignment, the updated particle cloud of a label depends only on that label's
previous cloud. Every hypothesis therefore shares one track per label, and the
recursion reduces to (a) one predict/update per live label and (b) weighting
label sets through per-label survive/die and born/not-born factors.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, NamedTuple, Sequence

import numpy as np
from scipy.special import logsumexp

from . import _kernels
from .birth import BirthCandidate, BirthParams, ellipsoids_overlap, propose_births
from .measurement import RadarCube, SensorModel, log_pseudolikelihood, states_to_measurement
from .motion import MotionParams, propagate_particles
from .rfs import (
    GlmbDensity,
    Hypothesis,
    Label,
    LabeledParticleTrack,
    cardinality_distribution,
    empty_density,
    normalize,
)

# substream purposes
_PREDICT, _BIRTH, _GIBBS, _RESAMPLE = 1, 2, 3, 4


class DeadTrackError(RuntimeError):
    """A track's expected pseudo-likelihood underflowed to zero."""


@dataclass(frozen=True)
class FilterParams:
    """Recursion tuning.

    ``gibbs_iterations`` defaults to ten sweeps per cost-matrix row.
    ``exhaustive_limit`` is the number of admissible label sets per parent at
    or below which children are enumerated instead of sampled; ``None`` means
    ``max_hypotheses`` and 0 forces sampling.
    """

    p_survival: float = 0.99
    max_hypotheses: int = 200
    particles_per_track: int = 15000
    gibbs_iterations: int | None = None
    resample_threshold: float = 0.5
    exhaustive_limit: int | None = None

    def __post_init__(self):
        if not 0.0 < self.p_survival <= 1.0:
            raise ValueError("p_survival must lie in (0, 1]")
        if self.max_hypotheses < 1:
            raise ValueError("max_hypotheses must be at least 1")
        if self.particles_per_track < 1:
            raise ValueError("particles_per_track must be at least 1")
        if self.gibbs_iterations is not None and self.gibbs_iterations < 1:
            raise ValueError("gibbs_iterations must be positive")
        if not 0.0 <= self.resample_threshold <= 1.0:
            raise ValueError("resample_threshold must lie in [0, 1]")


class TrackFactors(NamedTuple):
    """Per-label terms of the hypothesis weight. Exactly one of p_survive / r_birth is set."""

    log_psi_bar: float
    p_survive: float | None = None
    r_birth: float | None = None

    @property
    def newborn(self) -> bool:
        return self.r_birth is not None


@dataclass(frozen=True)
class CostMatrixRow:
    label: Label
    log_p_survive_times_psi: float
    log_p_die: float
    group: int = -1
    newborn: bool = False


def substream(base: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([base, *keys]))


def _log1m(p: float) -> float:
    return -math.inf if p >= 1.0 else math.log1p(-p)


def _log(p: float) -> float:
    return -math.inf if p <= 0.0 else math.log(p)


# ---------------------------------------------------------------------------
# Per-track operations
# ---------------------------------------------------------------------------


def survival_integral(track: LabeledParticleTrack, p_survival: float | Callable) -> float:
    if callable(p_survival):
        return float(track.weights @ np.asarray(p_survival(track.states), dtype=float))
    return float(p_survival)


def predicted_track(
    label: Label,
    tracks: Mapping[Label, LabeledParticleTrack],
    birth_candidates: Mapping[Label, BirthCandidate] | Sequence[BirthCandidate],
    motion: MotionParams,
    rng: np.random.Generator,
) -> LabeledParticleTrack:
    """Newborn labels take their candidate cloud; surviving labels are propagated.

    With a state-independent survival probability the survival weighting
    cancels, so particle weights carry over unchanged.
    """
    if not isinstance(birth_candidates, Mapping):
        birth_candidates = {b.label: b for b in birth_candidates}
    if label in birth_candidates:
        return birth_candidates[label].as_track()
    if label in tracks:
        return propagate_particles(tracks[label], motion, rng)
    raise ValueError(f"label {label} is neither surviving nor newborn")


def particle_log_psi(track: LabeledParticleTrack, cube: RadarCube, sensor: SensorModel) -> np.ndarray:
    return log_pseudolikelihood(track.states, cube, sensor)


def psi_bar(
    track: LabeledParticleTrack,
    cube: RadarCube,
    sensor: SensorModel,
    log_psi: np.ndarray | None = None,
) -> float:
    """log of the particle-weighted mean pseudo-likelihood."""
    if log_psi is None:
        log_psi = particle_log_psi(track, cube, sensor)
    with np.errstate(divide="ignore"):
        out = float(logsumexp(np.log(track.weights) + log_psi))
    if not math.isfinite(out):
        raise DeadTrackError(f"track {track.label}: expected pseudo-likelihood is not finite")
    return out


def update_track(
    track: LabeledParticleTrack,
    cube: RadarCube,
    sensor: SensorModel,
    rng: np.random.Generator | None = None,
    log_psi: np.ndarray | None = None,
    resample_threshold: float = 0.5,
    n_particles: int | None = None,
) -> LabeledParticleTrack:
    """Reweight by psi / psi_bar, then resample systematically when ESS drops below threshold * N."""
    if log_psi is None:
        log_psi = particle_log_psi(track, cube, sensor)
    with np.errstate(divide="ignore"):
        lw = np.log(track.weights) + log_psi
    total = logsumexp(lw)
    if not math.isfinite(total):
        raise DeadTrackError(f"track {track.label}: all particle weights vanished")
    w = np.exp(lw - total)
    w /= w.sum()
    n = track.n_particles if n_particles is None else n_particles
    states = track.states
    if 1.0 / np.sum(w * w) < resample_threshold * n or n != track.n_particles:
        if rng is None:
            raise ValueError("resampling needs an rng")
        idx = _kernels.systematic_indices(w, rng.random(), n)
        states = states[idx]
        w = np.full(n, 1.0 / n)
    return LabeledParticleTrack(track.label, states, w)


def track_center(track: LabeledParticleTrack) -> np.ndarray | None:
    """Measurement-space point of the weighted mean state; None at the sensor origin."""
    m = states_to_measurement(track.mean())[0]
    return None if not np.all(np.isfinite(m)) else m


def track_spread(track: LabeledParticleTrack) -> np.ndarray:
    """Two weighted standard deviations of the particle cloud per measurement dimension."""
    m = states_to_measurement(track.states)
    ok = np.all(np.isfinite(m), axis=1)
    if not ok.any():
        return np.zeros(3)
    w = track.weights[ok] / track.weights[ok].sum()
    mu = w @ m[ok]
    return 2.0 * np.sqrt(w @ (m[ok] - mu) ** 2)


# ---------------------------------------------------------------------------
# Hypothesis weighting and truncation
# ---------------------------------------------------------------------------


def hypothesis_weight(
    prev_labels, next_labels, factors: Mapping[Label, TrackFactors]
) -> float:
    """log omega_z(I_prev, I_next): survive/die, born/not-born and psi_bar factors.

    The birth set is every label in ``factors`` flagged newborn.
    """
    prev, nxt = frozenset(prev_labels), frozenset(next_labels)
    births = {l for l, f in factors.items() if f.newborn}
    bad = nxt - prev - births
    if bad:
        raise ValueError(f"labels {sorted(bad)} are neither surviving nor newborn")
    out = 0.0
    for l in sorted(prev - nxt):
        out += _log1m(factors[l].p_survive)
    for l in sorted(prev & nxt):
        out += _log(factors[l].p_survive)
    for l in sorted(births - nxt):
        out += _log1m(factors[l].r_birth)
    for l in sorted(births & nxt):
        out += _log(factors[l].r_birth)
    for l in sorted(nxt):
        out += factors[l].log_psi_bar
    return out


def merge_groups(
    centers: Mapping[Label, np.ndarray | None], radii, spreads: Mapping[Label, np.ndarray] | None = None
) -> list[frozenset]:
    """Connected components (size >= 2) of the pairwise illumination-overlap graph.

    With ``spreads`` each label's ellipsoid grows by its spread per axis,
    so clouds whose particles can illuminate each other's cells are coupled.
    """
    labels = sorted(l for l, c in centers.items() if c is not None)
    radii = np.asarray(radii, dtype=float)
    spreads = spreads or {}
    zero = np.zeros(3)
    parent = {l: l for l in labels}

    def find(l):
        while parent[l] != l:
            parent[l] = parent[parent[l]]
            l = parent[l]
        return l

    for a, b in itertools.combinations(labels, 2):
        pair = radii + 0.5 * (spreads.get(a, zero) + spreads.get(b, zero))
        if ellipsoids_overlap(centers[a], centers[b], pair):
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
    comps: dict[Label, set] = {}
    for l in labels:
        comps.setdefault(find(l), set()).add(l)
    return [frozenset(c) for _, c in sorted(comps.items()) if len(c) > 1]


def build_cost_rows(
    labels: Sequence[Label],
    factors: Mapping[Label, TrackFactors],
    groups: Sequence[frozenset] = (),
) -> list[CostMatrixRow]:
    """One two-branch row per label; rows sharing a merge group carry the same group id.

    Groups are restricted to ``labels``; a group reduced to one member is no
    longer coupling and that row gets its own id.
    """
    group_of = {}
    for gid, g in enumerate(groups):
        members = [l for l in labels if l in g]
        if len(members) > 1:
            for l in members:
                group_of[l] = gid
    rows = []
    next_id = len(groups)
    for l in labels:
        f = factors[l]
        if f.newborn:
            alive, dead = _log(f.r_birth) + f.log_psi_bar, _log1m(f.r_birth)
        else:
            alive, dead = _log(f.p_survive) + f.log_psi_bar, _log1m(f.p_survive)
        gid = group_of.get(l)
        if gid is None:
            gid, next_id = next_id, next_id + 1
        rows.append(CostMatrixRow(l, alive, dead, gid, f.newborn))
    return rows


def _blocks(rows):
    blocks: dict[int, list[int]] = {}
    for i, row in enumerate(rows):
        blocks.setdefault(row.group, []).append(i)
    return list(blocks.values())


def _block_scores(rows, block):
    """Option 0: every member dead; option j: member j-1 alive, the rest dead."""
    dead = [rows[i].log_p_die for i in block]
    # sums rather than differences so a -inf death branch never yields nan
    scores = [sum(dead)]
    for pos, i in enumerate(block):
        others = dead[:pos] + dead[pos + 1:]
        scores.append(sum(others) + rows[i].log_p_survive_times_psi)
    return np.array(scores)


def gibbs_truncate(
    rows: Sequence[CostMatrixRow],
    max_hypotheses: int,
    iterations: int | None = None,
    rng: np.random.Generator | None = None,
    exhaustive_limit: int | None = None,
) -> list[tuple[frozenset, float]]:
    """Distinct high-weight label sets with their exact log weights, best first.

    Rows in the same merge group are updated as one block whose options are
    "all dead" or "exactly one alive" (the either-or merge rule). In this
    separable model a block's conditional does not depend on the other blocks,
    so each sweep of the chain is an exact draw from the truncated
    distribution. Sampled sets are re-weighted exactly; visit counts are never
    used. The chain starts from all existing tracks alive and no births.
    """
    if not rows:
        return [(frozenset(), 0.0)]
    blocks = _blocks(rows)
    scores = [_block_scores(rows, b) for b in blocks]
    n_sets = math.prod(len(b) + 1 for b in blocks)
    limit = max_hypotheses if exhaustive_limit is None else exhaustive_limit

    if n_sets <= limit:
        choices = np.array(list(itertools.product(*[range(len(b) + 1) for b in blocks])), dtype=np.int64)
    else:
        if rng is None:
            raise ValueError("sampling needs an rng")
        iterations = 10 * len(rows) if iterations is None else iterations
        init = []
        for b, sc in zip(blocks, scores):
            members = [j for j, i in enumerate(b) if not rows[i].newborn]
            if not members:
                init.append(0)
            else:
                gain = [rows[b[j]].log_p_survive_times_psi - rows[b[j]].log_p_die for j in members]
                init.append(members[int(np.argmax(gain))] + 1)
        draws = [np.asarray(init, dtype=np.int64)[None, :]]
        cols = []
        for sc in scores:
            finite = np.isfinite(sc)
            if not finite.any():
                cols.append(np.zeros(iterations, dtype=np.int64))
                continue
            p = np.exp(sc - sc[finite].max())
            cdf = np.cumsum(p / p.sum())
            cols.append(np.minimum(np.searchsorted(cdf, rng.random(iterations), side="right"), len(sc) - 1))
        draws.append(np.column_stack(cols))
        choices = np.unique(np.vstack(draws), axis=0)

    score_mat = np.full((len(blocks), max(len(s) for s in scores)), -np.inf)
    for bi, sc in enumerate(scores):
        score_mat[bi, : len(sc)] = sc
    logw = score_mat[np.arange(len(blocks))[None, :], choices].sum(axis=1)

    keep = np.isfinite(logw)
    choices, logw = choices[keep], logw[keep]
    out = []
    for ch, lw in zip(choices, logw):
        alive = frozenset(rows[b[c - 1]].label for b, c in zip(blocks, ch) if c > 0)
        out.append((alive, float(lw)))
    out.sort(key=lambda t: (-t[1], sorted(t[0])))
    return out[:max_hypotheses]


# ---------------------------------------------------------------------------
# Recursion
# ---------------------------------------------------------------------------


def step(
    density: GlmbDensity,
    cube: RadarCube,
    sensor: SensorModel,
    motion: MotionParams,
    birth_params: BirthParams,
    filter_params: FilterParams,
    rng: np.random.Generator,
) -> GlmbDensity:
    """One joint prediction-update from ``density`` (time k-1) to time k using ``cube``."""
    k = density.time + 1
    base = int(rng.integers(0, 2**63))
    live = density.labels()
    n_part = filter_params.particles_per_track

    predicted: dict[Label, LabeledParticleTrack] = {}
    centers: dict[Label, np.ndarray | None] = {}
    spreads: dict[Label, np.ndarray] = {}
    for l in live:
        predicted[l] = predicted_track(l, density.tracks, {}, motion, substream(base, _PREDICT, *l))
        centers[l] = track_center(predicted[l])
        spreads[l] = track_spread(predicted[l])

    placed = [l for l in live if centers[l] is not None]
    births = propose_births(
        cube, [centers[l] for l in placed], birth_params, k,
        substream(base, _BIRTH), sensor, motion, n_part,
        existing_spreads=[spreads[l] for l in placed],
    )
    for b in births:
        predicted[b.label] = b.as_track()
        centers[b.label] = track_center(predicted[b.label])
        spreads[b.label] = track_spread(predicted[b.label])

    log_psi = {l: particle_log_psi(t, cube, sensor) for l, t in predicted.items()}
    factors: dict[Label, TrackFactors] = {}
    for l in live:
        factors[l] = TrackFactors(
            psi_bar(predicted[l], cube, sensor, log_psi[l]),
            p_survive=survival_integral(density.tracks[l], filter_params.p_survival),
        )
    for b in births:
        factors[b.label] = TrackFactors(psi_bar(predicted[b.label], cube, sensor, log_psi[b.label]), r_birth=b.r_birth)

    groups = merge_groups(centers, sensor.illumination_radii, spreads)
    birth_labels = [b.label for b in births]

    pool: dict[frozenset, list] = {}
    for idx, hyp in enumerate(density.hypotheses):
        rows = build_cost_rows(sorted(hyp.labels) + birth_labels, factors, groups)
        children = gibbs_truncate(
            rows, filter_params.max_hypotheses, filter_params.gibbs_iterations,
            substream(base, _GIBBS, idx), filter_params.exhaustive_limit,
        )
        for labels, lw in children:
            w = hyp.log_weight + lw
            entry = pool.get(labels)
            if entry is None:
                pool[labels] = [w, w, idx]
            else:
                entry[0] = float(np.logaddexp(entry[0], w))
                if w > entry[1]:
                    entry[1], entry[2] = w, idx

    hyps = [Hypothesis(labels, e[0], e[2]) for labels, e in pool.items()]
    hyps.sort(key=lambda h: (-h.log_weight, h.cardinality, sorted(h.labels)))
    posterior = normalize(GlmbDensity(hyps, {}, k))
    kept = posterior.hypotheses[: filter_params.max_hypotheses]
    posterior = normalize(GlmbDensity(kept, {}, k))

    tracks = {}
    for l in posterior.labels():
        tracks[l] = update_track(
            predicted[l], cube, sensor, substream(base, _RESAMPLE, *l), log_psi[l],
            filter_params.resample_threshold, n_part,
        )
    posterior.tracks = tracks
    posterior.factors = factors
    return posterior


def map_hypothesis(density: GlmbDensity) -> Hypothesis:
    """Highest-weight hypothesis among those with the most probable cardinality."""
    n_star = int(np.argmax(cardinality_distribution(density)))
    return max(
        (h for h in density.hypotheses if h.cardinality == n_star),
        key=lambda h: h.log_weight,
    )


def extract_estimates(density: GlmbDensity) -> list[tuple[Label, np.ndarray]]:
    hyp = map_hypothesis(density)
    return [(l, density.tracks[l].mean()) for l in sorted(hyp.labels)]


@dataclass
class GlmbTracker:
    """Frame-by-frame driver holding the posterior between cubes."""

    sensor: SensorModel
    motion: MotionParams = field(default_factory=MotionParams)
    birth: BirthParams = field(default_factory=BirthParams)
    params: FilterParams = field(default_factory=FilterParams)
    seed: int = 0

    def __post_init__(self):
        self.density = empty_density(0)
        self.rng = np.random.default_rng(self.seed)
        self._last_stamp: float | None = None

    def update(self, cube: RadarCube) -> GlmbDensity:
        motion = self.motion
        if self._last_stamp is not None and cube.timestamp > self._last_stamp:
            motion = motion.with_dt(cube.timestamp - self._last_stamp)
        self._last_stamp = cube.timestamp
        self.density = step(self.density, cube, self.sensor, motion, self.birth, self.params, self.rng)
        return self.density
