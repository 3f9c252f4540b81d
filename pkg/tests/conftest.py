import math

import numpy as np
import pytest

from tbdglmb.measurement import CellGrid, RadarCube, SensorModel


@pytest.fixture
def small_grid():
    return CellGrid(
        n_range=16, n_velocity=8, n_azimuth=8,
        range_res=1.0, velocity_res=0.5, azimuth_res=math.radians(2.0),
        range_offset=5.0, velocity_offset=-2.0, azimuth_offset=math.radians(-7.0),
    )


@pytest.fixture
def small_sensor(small_grid):
    return SensorModel(grid=small_grid)


@pytest.fixture
def noise_cube(small_sensor):
    rng = np.random.default_rng(7)
    z = rng.exponential(2 * small_sensor.sigma_w2, small_sensor.grid.n_cells)
    return RadarCube(small_sensor.grid, z, 0.0)


def state_at(grid, i, j, l, theta=1e-3):
    """On-grid state whose measurement is exactly the center of cell (i, j, l), zero tangential speed."""
    r = grid.range_offset + i * grid.range_res
    vr = grid.velocity_offset + j * grid.velocity_res
    phi = grid.azimuth_offset + l * grid.azimuth_res
    c, s = math.cos(phi), math.sin(phi)
    return np.array([r * c, vr * c, r * s, vr * s, theta])


@pytest.fixture
def wide_sensor(small_grid):
    """Small-grid analogue of the canned scenario's sensor: 2-cell main lobe and a power floor."""
    return SensorModel(
        grid=small_grid,
        psf_widths=tuple(2.0 * r for r in small_grid.resolutions),
        min_reflection_power=3e-6,
    )
