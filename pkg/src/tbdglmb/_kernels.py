"""Hot numeric loops.

Two implementations of each kernel live here: a numba ``@njit`` version and a
pure-numpy version. The numba path is used unless ``TBD_GLMB_DISABLE_NUMBA=1``
is set (or numba cannot be imported). ``TBD_GLMB_THREADS`` caps the numba
thread pool.

Kernels take plain arrays only so they stay independent of the dataclasses in
the rest of the package.
"""
import math
import os

import numpy as np

try:
    import numba
    from numba import prange
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    numba = None
    prange = range

USE_NUMBA = numba is not None and os.environ.get(
    "TBD_GLMB_DISABLE_NUMBA", "0"
).lower() not in ("1", "true", "yes")

PARTICLE_CHUNK = 4096


def _configure_threads():
    if not USE_NUMBA:
        return
    cap = os.environ.get("TBD_GLMB_THREADS")
    if cap:
        numba.set_num_threads(max(1, min(int(cap), numba.config.NUMBA_NUM_THREADS)))


def backend():
    return "numba" if USE_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# Swerling-1 log pseudo-likelihood over a particle cloud
# ---------------------------------------------------------------------------


def _log_psi_python(states, cube, lo, res, width, radii, sigma_w2, min_power, gain_az, gain_val, out):
    nr, nv, na = cube.shape
    for p in prange(states.shape[0]):
        x = states[p, 0]
        xd = states[p, 1]
        y = states[p, 2]
        yd = states[p, 3]
        theta = max(states[p, 4], 0.0)
        r = math.sqrt(x * x + y * y)
        if r <= 0.0:
            out[p] = 0.0
            continue
        phi = math.atan2(y, x)
        if phi < gain_az[0] or phi > gain_az[-1]:
            out[p] = 0.0
            continue
        g = np.interp(phi, gain_az, gain_val)
        if g <= 0.0:
            out[p] = 0.0
            continue
        snr = max(theta * r**4 / (g * g), min_power) / sigma_w2
        if snr <= 0.0:
            out[p] = 0.0
            continue
        vr = (x * xd + y * yd) / r

        u0 = (r - lo[0]) / res[0]
        u1 = (vr - lo[1]) / res[1]
        u2 = (phi - lo[2]) / res[2]
        rad0 = radii[0] / res[0]
        rad1 = radii[1] / res[1]
        rad2 = radii[2] / res[2]
        i_lo = max(int(math.ceil(u0 - rad0)), 0)
        i_hi = min(int(math.floor(u0 + rad0)), nr - 1)
        j_lo = max(int(math.ceil(u1 - rad1)), 0)
        j_hi = min(int(math.floor(u1 + rad1)), nv - 1)
        l_lo = max(int(math.ceil(u2 - rad2)), 0)
        l_hi = min(int(math.floor(u2 + rad2)), na - 1)
        c0 = res[0] / width[0]
        c1 = res[1] / width[1]
        c2 = res[2] / width[2]
        inv_noise = 1.0 / (2.0 * sigma_w2)

        acc = 0.0
        for i in range(i_lo, i_hi + 1):
            d0 = (i - u0) / rad0
            q0 = d0 * d0
            if q0 > 1.0:
                continue
            e0 = ((i - u0) * c0) ** 2
            for j in range(j_lo, j_hi + 1):
                d1 = (j - u1) / rad1
                q1 = q0 + d1 * d1
                if q1 > 1.0:
                    continue
                e1 = e0 + ((j - u1) * c1) ** 2
                for l in range(l_lo, l_hi + 1):
                    d2 = (l - u2) / rad2
                    if q1 + d2 * d2 > 1.0:
                        continue
                    h2 = math.exp(-(e1 + ((l - u2) * c2) ** 2))
                    a = snr * h2
                    acc += -math.log1p(a) + cube[i, j, l] * a * inv_noise / (1.0 + a)
        out[p] = acc


def _log_psi_numpy(states, cube, lo, res, width, radii, sigma_w2, min_power, gain_az, gain_val, out):
    nr, nv, na = cube.shape
    dims = np.array([nr, nv, na])
    rad = radii / res
    span = np.floor(2.0 * rad).astype(np.int64) + 2
    offs = [np.arange(s) for s in span]
    flat = cube.ravel()
    inv_noise = 1.0 / (2.0 * sigma_w2)

    for start in range(0, states.shape[0], PARTICLE_CHUNK):
        s = states[start:start + PARTICLE_CHUNK]
        x, xd, y, yd, theta = s.T
        theta = np.maximum(theta, 0.0)
        r = np.hypot(x, y)
        with np.errstate(divide="ignore", invalid="ignore"):
            phi = np.arctan2(y, x)
            inside = (phi >= gain_az[0]) & (phi <= gain_az[-1])
            g = np.where(inside, np.interp(phi, gain_az, gain_val), 0.0)
            live = (r > 0.0) & (g > 0.0)
            power = np.maximum(theta * r**4 / np.where(live, g * g, 1.0), min_power)
            snr = np.where(live, power / sigma_w2, 0.0)
            live &= snr > 0.0
            vr = np.where(r > 0.0, (x * xd + y * yd) / np.where(r > 0.0, r, 1.0), 0.0)
        u = np.stack([(r - lo[0]) / res[0], (vr - lo[1]) / res[1], (phi - lo[2]) / res[2]], axis=1)
        base = np.ceil(u - rad).astype(np.int64)
        hi = np.floor(u + rad).astype(np.int64)

        idx = [base[:, d, None] + offs[d][None, :] for d in range(3)]
        ok = [(idx[d] <= hi[:, d, None]) & (idx[d] >= 0) & (idx[d] < dims[d]) for d in range(3)]
        dq = [((idx[d] - u[:, d, None]) / rad[d]) ** 2 for d in range(3)]
        de = [((idx[d] - u[:, d, None]) * (res[d] / width[d])) ** 2 for d in range(3)]

        q = dq[0][:, :, None, None] + dq[1][:, None, :, None] + dq[2][:, None, None, :]
        mask = (
            ok[0][:, :, None, None] & ok[1][:, None, :, None] & ok[2][:, None, None, :]
            & (q <= 1.0) & live[:, None, None, None]
        )
        e = de[0][:, :, None, None] + de[1][:, None, :, None] + de[2][:, None, None, :]
        a = snr[:, None, None, None] * np.exp(-e)
        cell = (
            np.clip(idx[0], 0, nr - 1)[:, :, None, None] * (nv * na)
            + np.clip(idx[1], 0, nv - 1)[:, None, :, None] * na
            + np.clip(idx[2], 0, na - 1)[:, None, None, :]
        )
        z = flat[cell]
        terms = -np.log1p(a) + z * a * inv_noise / (1.0 + a)
        out[start:start + PARTICLE_CHUNK] = np.where(mask, terms, 0.0).sum(axis=(1, 2, 3))


# ---------------------------------------------------------------------------
# Systematic resampling
# ---------------------------------------------------------------------------


def _systematic_python(weights, u0, out):
    n = out.shape[0]
    total = 0.0
    for w in weights:
        total += w
    step = total / n
    cum = weights[0]
    j = 0
    last = weights.shape[0] - 1
    for i in range(n):
        # recomputed rather than accumulated so both backends see identical positions
        pos = (u0 + i) * step
        while pos >= cum and j < last:
            j += 1
            cum += weights[j]
        out[i] = j


def _systematic_numpy(weights, u0, out):
    n = out.shape[0]
    cum = np.cumsum(weights)
    pos = (u0 + np.arange(n)) * (cum[-1] / n)
    out[:] = np.minimum(np.searchsorted(cum, pos, side="right"), weights.shape[0] - 1)


if USE_NUMBA:
    _log_psi_impl = numba.njit(parallel=True, cache=True, nogil=True)(_log_psi_python)
    _systematic_impl = numba.njit(cache=True, nogil=True)(_systematic_python)
    _configure_threads()
else:
    _log_psi_impl = _log_psi_numpy
    _systematic_impl = _systematic_numpy


def log_psi(states, cube, lo, res, width, radii, sigma_w2, gain_az, gain_val, min_power=0.0):
    """Per-particle log pseudo-likelihood, summed over each particle's illumination region.

    ``cube`` is the (range, velocity, azimuth) intensity array; ``lo``/``res`` the
    cell-center offsets and resolutions; ``width`` the point-spread widths and
    ``radii`` the illumination half-axes, all in measurement units. The
    reflection power implied by theta is floored at ``min_power``.
    """
    states = np.ascontiguousarray(states, dtype=np.float64)
    out = np.empty(states.shape[0])
    _log_psi_impl(
        states,
        np.ascontiguousarray(cube, dtype=np.float64),
        np.asarray(lo, dtype=np.float64),
        np.asarray(res, dtype=np.float64),
        np.asarray(width, dtype=np.float64),
        np.asarray(radii, dtype=np.float64),
        float(sigma_w2),
        float(min_power),
        np.ascontiguousarray(gain_az, dtype=np.float64),
        np.ascontiguousarray(gain_val, dtype=np.float64),
        out,
    )
    return out


def log_psi_numpy(states, cube, lo, res, width, radii, sigma_w2, gain_az, gain_val, min_power=0.0):
    """Always-numpy variant of :func:`log_psi`, for cross-checks and benchmarks."""
    out = np.empty(len(states))
    _log_psi_numpy(
        np.asarray(states, dtype=np.float64), np.asarray(cube, dtype=np.float64),
        np.asarray(lo, dtype=np.float64), np.asarray(res, dtype=np.float64),
        np.asarray(width, dtype=np.float64), np.asarray(radii, dtype=np.float64),
        float(sigma_w2), float(min_power), np.asarray(gain_az, dtype=np.float64),
        np.asarray(gain_val, dtype=np.float64), out,
    )
    return out


def systematic_indices(weights, u0, n=None):
    """Systematic resampling: ``n`` ancestor indices from one uniform offset ``u0`` in [0, 1)."""
    weights = np.ascontiguousarray(weights, dtype=np.float64)
    out = np.empty(weights.shape[0] if n is None else n, dtype=np.int64)
    _systematic_impl(weights, float(u0), out)
    return out


def systematic_indices_numpy(weights, u0, n=None):
    """Always-numpy variant of :func:`systematic_indices`."""
    weights = np.asarray(weights, dtype=np.float64)
    out = np.empty(weights.shape[0] if n is None else n, dtype=np.int64)
    _systematic_numpy(weights, float(u0), out)
    return out
