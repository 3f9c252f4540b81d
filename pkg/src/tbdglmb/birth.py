"""Adaptive labeled multi-Bernoulli birth from significant radar cells."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .measurement import RadarCube, SensorModel
from .motion import MotionParams
from .rfs import Label, LabeledParticleTrack


@dataclass(frozen=True)
class BirthParams:
    z_threshold: float = 1e-5
    r_birth_init: float = 0.3
    max_births_per_step: int = 5
    ellipsoid_radii: tuple[float, float, float] = (2.0, 1.0, math.radians(4.0))
    tangential_scale: float = 10.0
    theta_jitter: float = 0.5
    cell_margin: float = 0.5

    def __post_init__(self):
        if self.z_threshold <= 0:
            raise ValueError("z_threshold must be positive")
        if not 0.0 < self.r_birth_init <= 1.0:
            raise ValueError("r_birth_init must lie in (0, 1]")
        if self.max_births_per_step < 1:
            raise ValueError("max_births_per_step must be positive")
        if len(self.ellipsoid_radii) != 3 or min(self.ellipsoid_radii) <= 0:
            raise ValueError("ellipsoid_radii must be three positive half-axes")
        if not 0.0 <= self.theta_jitter < 1.0:
            raise ValueError("theta_jitter must lie in [0, 1)")
        if self.cell_margin < 0:
            raise ValueError("cell_margin must be non-negative")
        object.__setattr__(self, "ellipsoid_radii", tuple(float(r) for r in self.ellipsoid_radii))


@dataclass(frozen=True, eq=False)
class BirthCandidate:
    label: Label
    r_birth: float
    states: np.ndarray
    weights: np.ndarray
    cell: int = -1

    def as_track(self) -> LabeledParticleTrack:
        return LabeledParticleTrack(self.label, self.states, self.weights)


def significant_cells(cube: RadarCube, params: BirthParams) -> list[int]:
    z = cube.intensities
    idx = np.flatnonzero(z > params.z_threshold)
    # lexsort: last key is primary -> descending intensity, then ascending index
    order = np.lexsort((idx, -z[idx]))
    return [int(i) for i in idx[order]]


def ellipsoids_overlap(center_a, center_b, radii) -> bool:
    d = (np.asarray(center_a, dtype=float) - np.asarray(center_b, dtype=float)) / (2.0 * np.asarray(radii, dtype=float))
    return bool(np.sum(d * d) < 1.0)


def sample_cell_states(
    cell: int,
    intensity: float,
    sensor: SensorModel,
    motion: MotionParams,
    params: BirthParams,
    n: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Particles spread uniformly over one cell's (range, radial velocity, azimuth) extent.

    Tangential velocity is unobserved and drawn from a zero-mean normal;
    theta is set so the expected intensity matches the cell, then jittered.
    """
    grid = sensor.grid
    center = grid.cell_center(cell)
    res = grid.resolutions
    u = rng.random((n, 3)) - 0.5
    r = np.maximum(center[0] + res[0] * u[:, 0], 1e-6)
    vr = center[1] + res[1] * u[:, 1]
    phi = center[2] + res[2] * u[:, 2]
    vt = math.sqrt(motion.sigma_ax2) * params.tangential_scale * motion.dt * rng.standard_normal(n)
    c, s = np.cos(phi), np.sin(phi)
    sigma_rho2 = max(0.5 * intensity - sensor.sigma_w2, 0.1 * sensor.sigma_w2)
    gain = np.interp(phi, sensor.gain_azimuths, sensor.gain_values)
    jitter = rng.uniform(1.0 - params.theta_jitter, 1.0 + params.theta_jitter, n)
    theta = sigma_rho2 * gain**2 / r**4 * jitter
    return np.column_stack([r * c, vr * c - vt * s, r * s, vr * s + vt * c, theta])


def propose_births(
    cube: RadarCube,
    existing_regions: Sequence,
    params: BirthParams,
    k: int,
    rng: np.random.Generator,
    sensor: SensorModel,
    motion: MotionParams,
    n_particles: int = 15000,
    existing_spreads: Sequence | None = None,
) -> list[BirthCandidate]:
    """Greedy strongest-first birth over significant cells that clear every existing ellipsoid.

    Newborn particles fill their whole cell, so the blocking half-axes are
    widened by ``cell_margin`` cells; otherwise particles near the cell edge
    can reach into a live track's illumination region. ``existing_spreads``
    optionally widens each existing ellipsoid by that track's own spread.
    """
    if k < 1:
        raise ValueError("births start at k >= 1")
    grid = sensor.grid
    radii = np.asarray(params.ellipsoid_radii) + params.cell_margin * grid.resolutions
    blocked = [
        (np.asarray(c, dtype=float), radii + np.asarray(s, dtype=float))
        for c, s in zip(existing_regions, existing_spreads or [np.zeros(3)] * len(existing_regions))
    ]
    out: list[BirthCandidate] = []
    for cell in significant_cells(cube, params):
        if len(out) >= params.max_births_per_step:
            break
        center = grid.cell_center(cell)
        if any(ellipsoids_overlap(center, b, r) for b, r in blocked):
            continue
        blocked.append((center, radii))
        states = sample_cell_states(
            cell, float(cube.intensities[cell]), sensor, motion, params, n_particles, rng
        )
        out.append(BirthCandidate(
            Label(k, len(out)), params.r_birth_init, states, np.full(n_particles, 1.0 / n_particles), cell,
        ))
    return out
