"""The numba kernels and their numpy fallbacks must agree."""
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tbdglmb import _kernels
from tbdglmb.measurement import CellGrid, RadarCube, SensorModel, log_pseudolikelihood, target_pseudolikelihood

numba_only = pytest.mark.skipif(not _kernels.USE_NUMBA, reason="numba path disabled")


def _kernel_args(sensor, cube):
    g = sensor.grid
    return (
        cube.as_array(), g.offsets, g.resolutions, sensor.psf_widths,
        sensor.illumination_radii, sensor.sigma_w2, sensor.gain_azimuths, sensor.gain_values,
        sensor.min_reflection_power,
    )


def _cloud(grid, n, rng):
    r = rng.uniform(grid.range_offset - 3, grid.range_offset + grid.n_range * grid.range_res + 3, n)
    phi = rng.uniform(-0.4, 0.4, n)
    vx, vy = rng.normal(0, 2, n), rng.normal(0, 2, n)
    theta = rng.exponential(1e-3, n)
    theta[::17] = -1e-4  # clamped to zero inside the kernel
    states = np.column_stack([r * np.cos(phi), vx, r * np.sin(phi), vy, theta])
    states[::29, [0, 2]] = 0.0  # sensor origin
    return states


@pytest.fixture
def tapered_sensor(small_grid):
    return SensorModel(
        grid=small_grid,
        psf_widths=(1.5, 0.6, math.radians(3.0)),
        gain_table=((-0.2, 0.5), (0.0, 1.0), (0.2, 0.7)),
        min_reflection_power=1e-7,
    )


@numba_only
def test_log_psi_backends_agree(tapered_sensor):
    rng = np.random.default_rng(11)
    z = rng.exponential(4e-6, tapered_sensor.grid.n_cells)
    cube = RadarCube(tapered_sensor.grid, z)
    states = _cloud(tapered_sensor.grid, 5000, rng)
    args = _kernel_args(tapered_sensor, cube)
    fast = _kernels.log_psi(states, *args[:-1], min_power=args[-1])
    slow = _kernels.log_psi_numpy(states, *args[:-1], min_power=args[-1])
    np.testing.assert_allclose(fast, slow, rtol=1e-12, atol=1e-12)


def test_log_psi_matches_reference(tapered_sensor):
    rng = np.random.default_rng(12)
    cube = RadarCube(tapered_sensor.grid, rng.exponential(4e-6, tapered_sensor.grid.n_cells))
    states = _cloud(tapered_sensor.grid, 200, rng)
    states = states[np.hypot(states[:, 0], states[:, 2]) > 0]
    batched = log_pseudolikelihood(states, cube, tapered_sensor)
    ref = [target_pseudolikelihood(s, cube, tapered_sensor) for s in states]
    np.testing.assert_allclose(batched, ref, rtol=1e-10, atol=1e-10)


@given(
    st.lists(st.floats(0.0, 10.0), min_size=1, max_size=60).filter(lambda w: sum(w) > 1e-6),
    st.floats(0.0, 0.999999),
    st.integers(1, 80),
)
@settings(max_examples=200, deadline=None)
def test_systematic_backends_agree(weights, u0, n):
    w = np.array(weights)
    fast = _kernels.systematic_indices(w, u0, n)
    slow = _kernels.systematic_indices_numpy(w, u0, n)
    np.testing.assert_array_equal(fast, slow)
    assert np.all(w[fast] > 0)
    assert np.all(np.diff(fast) >= 0)


def test_systematic_counts_are_proportional():
    w = np.array([0.1, 0.0, 0.6, 0.3])
    idx = _kernels.systematic_indices(w, 0.5, 1000)
    counts = np.bincount(idx, minlength=4)
    assert counts[1] == 0
    # systematic resampling never deviates from N * w_i by one or more
    assert np.all(np.abs(counts - 1000 * w) < 1.0)
