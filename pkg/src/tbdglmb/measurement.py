"""Radar cube data model and the Swerling-1 separable measurement model.

Cells are stacked range-major, then radial velocity, then azimuth: the flat
index of cell ``(i, j, l)`` is ``(i * n_velocity + j) * n_azimuth + l``. The
center of cell ``i`` along a dimension is ``offset + i * resolution``.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO, Iterable, Iterator

import numpy as np

from . import _kernels

CUBE_MAGIC = b"TBDC"
CUBE_VERSION = 1
_HEADER = struct.Struct("<4sIIII6dd")


class SingularGeometryError(ValueError):
    """Target sits on the sensor origin, where range rate and azimuth are undefined."""


class OutOfBeamError(ValueError):
    """Antenna gain is zero at the target's azimuth."""


class CubeFormatError(ValueError):
    pass


@dataclass(frozen=True)
class CellGrid:
    n_range: int = 64
    n_velocity: int = 32
    n_azimuth: int = 16
    range_res: float = 1.0
    velocity_res: float = 0.5
    azimuth_res: float = math.radians(2.0)
    range_offset: float = 1.0
    velocity_offset: float = -8.0
    azimuth_offset: float = math.radians(-15.0)

    def __post_init__(self):
        if min(self.n_range, self.n_velocity, self.n_azimuth) < 1:
            raise ValueError("cell counts must be positive")
        if min(self.range_res, self.velocity_res, self.azimuth_res) <= 0:
            raise ValueError("resolutions must be positive")

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n_range, self.n_velocity, self.n_azimuth)

    @property
    def n_cells(self) -> int:
        return self.n_range * self.n_velocity * self.n_azimuth

    @property
    def resolutions(self) -> np.ndarray:
        return np.array([self.range_res, self.velocity_res, self.azimuth_res])

    @property
    def offsets(self) -> np.ndarray:
        return np.array([self.range_offset, self.velocity_offset, self.azimuth_offset])

    def flat_index(self, i: int, j: int, l: int) -> int:
        return (i * self.n_velocity + j) * self.n_azimuth + l

    def unravel(self, flat: int) -> tuple[int, int, int]:
        return tuple(int(v) for v in np.unravel_index(flat, self.shape))

    def cell_center(self, flat: int) -> np.ndarray:
        return self.offsets + np.array(self.unravel(flat)) * self.resolutions


@dataclass(frozen=True)
class RadarCube:
    grid: CellGrid
    intensities: np.ndarray
    timestamp: float = 0.0

    def __post_init__(self):
        z = np.asarray(self.intensities, dtype=np.float64).ravel()
        if z.shape[0] != self.grid.n_cells:
            raise ValueError(f"expected {self.grid.n_cells} intensities, got {z.shape[0]}")
        if np.any(z < 0) or not np.all(np.isfinite(z)):
            raise ValueError("intensities must be finite and non-negative")
        object.__setattr__(self, "intensities", z)

    def as_array(self) -> np.ndarray:
        """View of the intensities as a (range, velocity, azimuth) array."""
        return self.intensities.reshape(self.grid.shape)


@dataclass(frozen=True)
class SensorModel:
    """Noise floor, cell geometry, point-spread widths, gain table and illumination half-axes.

    ``gain_table`` holds (azimuth rad, gain) knots of a piecewise-linear profile;
    the gain is zero outside the tabulated azimuth span. ``min_reflection_power``
    floors the reflection power a state can claim inside the likelihood, so a
    track cannot fade into a state that every cube agrees with.
    """

    grid: CellGrid = field(default_factory=CellGrid)
    sigma_w2: float = 2e-6
    psf_widths: tuple[float, float, float] | None = None
    gain_table: tuple[tuple[float, float], ...] = ((-math.pi / 2, 1.0), (math.pi / 2, 1.0))
    illumination_radii: tuple[float, float, float] | None = None
    min_reflection_power: float = 0.0

    def __post_init__(self):
        res = tuple(float(v) for v in self.grid.resolutions)
        if self.psf_widths is None:
            object.__setattr__(self, "psf_widths", res)
        if self.illumination_radii is None:
            object.__setattr__(self, "illumination_radii", tuple(2.0 * v for v in res))
        object.__setattr__(self, "psf_widths", tuple(float(v) for v in self.psf_widths))
        object.__setattr__(
            self, "illumination_radii", tuple(float(v) for v in self.illumination_radii)
        )
        object.__setattr__(
            self, "gain_table", tuple((float(a), float(g)) for a, g in self.gain_table)
        )
        if self.sigma_w2 <= 0:
            raise ValueError("sigma_w2 must be positive")
        if self.min_reflection_power < 0:
            raise ValueError("min_reflection_power must be non-negative")
        if min(self.psf_widths) <= 0 or min(self.illumination_radii) <= 0:
            raise ValueError("psf widths and illumination radii must be positive")
        az = [a for a, _ in self.gain_table]
        if len(az) < 2 or any(b <= a for a, b in zip(az, az[1:])):
            raise ValueError("gain table needs >= 2 knots with increasing azimuth")
        if any(g < 0 or not math.isfinite(g) for _, g in self.gain_table):
            raise ValueError("gains must be finite and non-negative")

    @property
    def gain_azimuths(self) -> np.ndarray:
        return np.array([a for a, _ in self.gain_table])

    @property
    def gain_values(self) -> np.ndarray:
        return np.array([g for _, g in self.gain_table])

    def gain(self, azimuth: float) -> float:
        az = self.gain_azimuths
        if azimuth < az[0] or azimuth > az[-1]:
            return 0.0
        return float(np.interp(azimuth, az, self.gain_values))


def state_to_measurement(state, sensor_pose=(0.0, 0.0, 0.0)) -> tuple[float, float, float]:
    """Map a state to (range, radial velocity, azimuth) in the sensor frame (x forward).

    ``sensor_pose`` is (x, y, heading) of the sensor in the state's frame.
    """
    px, py, heading = sensor_pose
    c, s = math.cos(heading), math.sin(heading)
    dx, dy = state[0] - px, state[2] - py
    x, y = c * dx + s * dy, -s * dx + c * dy
    xd, yd = c * state[1] + s * state[3], -s * state[1] + c * state[3]
    r = math.hypot(x, y)
    if r == 0.0:
        raise SingularGeometryError("target at the sensor origin")
    return r, (x * xd + y * yd) / r, math.atan2(y, x)


def states_to_measurement(states: np.ndarray) -> np.ndarray:
    """Vectorized :func:`state_to_measurement` for an (N, 5) array; rows at r = 0 give NaN."""
    states = np.atleast_2d(states)
    x, xd, y, yd = states[:, 0], states[:, 1], states[:, 2], states[:, 3]
    r = np.hypot(x, y)
    with np.errstate(divide="ignore", invalid="ignore"):
        vr = np.where(r > 0, (x * xd + y * yd) / r, np.nan)
    return np.stack([r, vr, np.arctan2(y, x)], axis=1)


def illumination_region(state, sensor: SensorModel) -> np.ndarray:
    """Sorted flat indices of the cells whose centers fall inside the target's ellipsoid."""
    grid = sensor.grid
    try:
        m = np.array(state_to_measurement(state))
    except SingularGeometryError:
        return np.empty(0, dtype=np.int64)
    res, lo = grid.resolutions, grid.offsets
    radii = np.array(sensor.illumination_radii)
    u = (m - lo) / res
    rad = radii / res
    axes = []
    for d, n in enumerate(grid.shape):
        first = max(math.ceil(u[d] - rad[d]), 0)
        last = min(math.floor(u[d] + rad[d]), n - 1)
        axes.append(np.arange(first, last + 1))
    if any(len(a) == 0 for a in axes):
        return np.empty(0, dtype=np.int64)
    i, j, l = np.meshgrid(*axes, indexing="ij")
    q = ((i - u[0]) / rad[0]) ** 2 + ((j - u[1]) / rad[1]) ** 2 + ((l - u[2]) / rad[2]) ** 2
    inside = q <= 1.0
    flat = (i[inside] * grid.n_velocity + j[inside]) * grid.n_azimuth + l[inside]
    return np.sort(flat.astype(np.int64))


def psf_value(state, cell_index: int, sensor: SensorModel) -> float:
    """Peak-normalized point-spread magnitude |h| of ``state`` in cell ``cell_index``."""
    region = illumination_region(state, sensor)
    if cell_index not in region:
        return 0.0
    m = np.array(state_to_measurement(state))
    delta = sensor.grid.cell_center(cell_index) - m
    return float(np.exp(-0.5 * np.sum((delta / np.array(sensor.psf_widths)) ** 2)))


def reflection_power(state, sensor: SensorModel | None = None) -> float:
    """Reflection power sigma_rho^2 = theta * r^4 / G^2 implied by the fifth state."""
    r, _, phi = state_to_measurement(state)
    g = 1.0 if sensor is None else sensor.gain(phi)
    if g <= 0.0:
        raise OutOfBeamError(f"zero antenna gain at azimuth {phi:.4f} rad")
    return state[4] * r**4 / g**2


def power_coefficient(sigma_rho2: float, r: float, gain: float = 1.0) -> float:
    """Inverse of :func:`reflection_power`: theta = sigma_rho^2 * G^2 / r^4."""
    return sigma_rho2 * gain**2 / r**4


def swerling1_log_ratio(z, signal_power, sigma_w2):
    """log of the Swerling-1 likelihood ratio for squared-modulus intensity ``z``.

    ``signal_power`` is sigma_rho^2 |h|^2 in the cell; with varsigma = signal/noise
    and mu = 2 (noise + signal), the ratio is exp(z varsigma / mu) / (1 + varsigma).
    """
    a = np.asarray(signal_power, dtype=np.float64) / sigma_w2
    mu = 2.0 * sigma_w2 * (1.0 + a)
    return -np.log1p(a) + z * a / mu


def _likelihood_power(state, sensor: SensorModel) -> float:
    return max(reflection_power(state, sensor), sensor.min_reflection_power)


def likelihood_ratio(z: float, state, cell_index: int, sensor: SensorModel) -> float:
    h = psf_value(state, cell_index, sensor)
    if h == 0.0:
        return 1.0
    return float(np.exp(swerling1_log_ratio(z, _likelihood_power(state, sensor) * h * h, sensor.sigma_w2)))


def target_pseudolikelihood(state, cube: RadarCube, sensor: SensorModel) -> float:
    """log psi_z(x): sum of per-cell log likelihood ratios over the illumination region.

    Reference path, one state at a time; :func:`log_pseudolikelihood` is the batched kernel.
    """
    if cube.grid != sensor.grid:
        raise ValueError("cube grid does not match sensor grid")
    region = illumination_region(state, sensor)
    if region.size == 0:
        return 0.0
    try:
        sigma_rho2 = _likelihood_power(state, sensor)
    except OutOfBeamError:
        return 0.0
    m = np.array(state_to_measurement(state))
    centers = sensor.grid.offsets + np.array(
        np.unravel_index(region, sensor.grid.shape)
    ).T * sensor.grid.resolutions
    h2 = np.exp(-np.sum(((centers - m) / np.array(sensor.psf_widths)) ** 2, axis=1))
    return float(np.sum(swerling1_log_ratio(cube.intensities[region], sigma_rho2 * h2, sensor.sigma_w2)))


def log_pseudolikelihood(states: np.ndarray, cube: RadarCube, sensor: SensorModel) -> np.ndarray:
    """log psi_z for every row of an (N, 5) state array."""
    if cube.grid != sensor.grid:
        raise ValueError("cube grid does not match sensor grid")
    grid = sensor.grid
    return _kernels.log_psi(
        states, cube.as_array(), grid.offsets, grid.resolutions,
        sensor.psf_widths, sensor.illumination_radii, sensor.sigma_w2,
        sensor.gain_azimuths, sensor.gain_values, sensor.min_reflection_power,
    )


# ---------------------------------------------------------------------------
# Binary cube stream
# ---------------------------------------------------------------------------


def write_cube(fh: BinaryIO, cube: RadarCube) -> None:
    g = cube.grid
    fh.write(_HEADER.pack(
        CUBE_MAGIC, CUBE_VERSION, g.n_range, g.n_velocity, g.n_azimuth,
        g.range_res, g.velocity_res, g.azimuth_res,
        g.range_offset, g.velocity_offset, g.azimuth_offset, cube.timestamp,
    ))
    fh.write(np.asarray(cube.intensities, dtype="<f8").tobytes())


def write_cubes(path: str | Path, cubes: Iterable[RadarCube]) -> int:
    n = 0
    with open(path, "wb") as fh:
        for cube in cubes:
            write_cube(fh, cube)
            n += 1
    return n


def iter_cubes(path: str | Path) -> Iterator[RadarCube]:
    with open(path, "rb") as fh:
        while True:
            head = fh.read(_HEADER.size)
            if not head:
                return
            if len(head) < _HEADER.size:
                raise CubeFormatError(f"{path}: truncated header")
            magic, version, nr, nv, na, *rest = _HEADER.unpack(head)
            if magic != CUBE_MAGIC:
                raise CubeFormatError(f"{path}: bad magic {magic!r}")
            if version != CUBE_VERSION:
                raise CubeFormatError(f"{path}: unsupported version {version}")
            try:
                grid = CellGrid(nr, nv, na, *rest[:6])
            except ValueError as exc:
                raise CubeFormatError(f"{path}: {exc}") from None
            nbytes = 8 * grid.n_cells
            payload = fh.read(nbytes)
            if len(payload) < nbytes:
                raise CubeFormatError(f"{path}: truncated payload")
            try:
                yield RadarCube(grid, np.frombuffer(payload, dtype="<f8").astype(np.float64), rest[6])
            except ValueError as exc:
                raise CubeFormatError(f"{path}: {exc}") from None


def read_cubes(path: str | Path) -> list[RadarCube]:
    return list(iter_cubes(path))
