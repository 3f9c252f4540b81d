"""Constant-velocity transition with a constant (random-walk) reflection power state."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .rfs import LabeledParticleTrack


@dataclass(frozen=True)
class MotionParams:
    dt: float = 0.07
    sigma_ax2: float = (5.0 / 3.0) ** 2
    sigma_ay2: float = (5.0 / 3.0) ** 2
    sigma_theta_dot2: float = 1e-3

    def __post_init__(self):
        if self.dt < 0:
            raise ValueError("dt must be non-negative")
        if min(self.sigma_ax2, self.sigma_ay2, self.sigma_theta_dot2) < 0:
            raise ValueError("variances must be non-negative")

    def with_dt(self, dt: float) -> "MotionParams":
        return replace(self, dt=dt)


def _cv_block(dt):
    return np.array([[1.0, dt], [0.0, 1.0]])


def _accel_block(dt):
    return np.array([[dt**4 / 4, dt**3 / 2], [dt**3 / 2, dt**2]])


def transition_matrix(params: MotionParams) -> np.ndarray:
    A = np.eye(5)
    A[0:2, 0:2] = _cv_block(params.dt)
    A[2:4, 2:4] = _cv_block(params.dt)
    return A


def process_noise_cov(params: MotionParams) -> np.ndarray:
    dt = params.dt
    Q = np.zeros((5, 5))
    Q[0:2, 0:2] = params.sigma_ax2 * _accel_block(dt)
    Q[2:4, 2:4] = params.sigma_ay2 * _accel_block(dt)
    Q[4, 4] = params.sigma_theta_dot2 * dt**2
    return Q


def _block_cholesky(q11, q12, q22):
    # closed-form lower factor of a 2x2 PSD block; the CV block is rank one
    l11 = math.sqrt(q11)
    l21 = q12 / l11 if l11 > 0 else 0.0
    l22 = math.sqrt(max(q22 - l21 * l21, 0.0))
    return l11, l21, l22


def propagate_states(states: np.ndarray, params: MotionParams, rng: np.random.Generator) -> np.ndarray:
    """x <- A x + v, v ~ N(0, Q), with theta clamped at zero afterwards."""
    dt = params.dt
    out = np.array(states, dtype=np.float64, copy=True)
    out[:, 0] += dt * out[:, 1]
    out[:, 2] += dt * out[:, 3]
    Q = process_noise_cov(params)
    noise = rng.standard_normal((out.shape[0], 5))
    for k in (0, 2):
        l11, l21, l22 = _block_cholesky(Q[k, k], Q[k, k + 1], Q[k + 1, k + 1])
        out[:, k] += l11 * noise[:, k]
        out[:, k + 1] += l21 * noise[:, k] + l22 * noise[:, k + 1]
    out[:, 4] += math.sqrt(Q[4, 4]) * noise[:, 4]
    np.maximum(out[:, 4], 0.0, out=out[:, 4])
    return out


def propagate_particles(
    track: LabeledParticleTrack, params: MotionParams, rng: np.random.Generator
) -> LabeledParticleTrack:
    return LabeledParticleTrack(track.label, propagate_states(track.states, params, rng), track.weights)
