"""Numba vs pure-numpy timings for the two hot kernels.

Run with ``python benchmarks/bench_kernels.py``. The numba column is empty when
``TBD_GLMB_DISABLE_NUMBA=1`` is set. Timings are the best of ``--repeat`` runs
after one warm-up call (which also triggers JIT compilation).
"""
import argparse
import timeit

import numpy as np

from tbdglmb import _kernels
from tbdglmb.measurement import RadarCube
from tbdglmb.sim import paper_scenario, render_cube, truth_states


def _scene(n_particles, seed=0):
    config, targets = paper_scenario(n_frames=1)
    sensor = config.sensor
    truth = truth_states(config, targets, 0)
    rng = np.random.default_rng(seed)
    cube = render_cube(truth, sensor, config, rng)
    # particle cloud around the near car, spread like a fresh birth
    base = truth[0].state
    states = base + rng.normal(0, [0.5, 0.3, 0.5, 0.3, 0.3 * base[4]], (n_particles, 5))
    return sensor, cube, states


def _log_psi_args(sensor, cube: RadarCube, states):
    g = sensor.grid
    return (states, cube.as_array(), g.offsets, g.resolutions, sensor.psf_widths,
            sensor.illumination_radii, sensor.sigma_w2, sensor.gain_azimuths, sensor.gain_values,
            sensor.min_reflection_power)


def _best(fn, repeat):
    fn()  # warm-up / JIT
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--particles", type=int, default=15000)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    sensor, cube, states = _scene(args.particles)
    psi_args = _log_psi_args(sensor, cube, states)
    weights = np.random.default_rng(1).random(args.particles)

    rows = []
    t_np = _best(lambda: _kernels.log_psi_numpy(*psi_args), args.repeat)
    t_nb = _best(lambda: _kernels.log_psi(*psi_args), args.repeat) if _kernels.USE_NUMBA else None
    if t_nb is not None:
        err = np.max(np.abs(_kernels.log_psi(*psi_args) - _kernels.log_psi_numpy(*psi_args)))
        rows.append(("log_psi", t_np, t_nb, f"max |diff| {err:.1e}"))
    else:
        rows.append(("log_psi", t_np, None, ""))

    t_np = _best(lambda: _kernels.systematic_indices_numpy(weights, 0.37), args.repeat)
    t_nb = _best(lambda: _kernels.systematic_indices(weights, 0.37), args.repeat) if _kernels.USE_NUMBA else None
    same = np.array_equal(_kernels.systematic_indices(weights, 0.37), _kernels.systematic_indices_numpy(weights, 0.37))
    rows.append(("systematic", t_np, t_nb, f"identical: {same}"))

    print(f"{args.particles} particles, backend={_kernels.backend()}")
    print(f"{'kernel':<12}{'numpy ms':>12}{'numba ms':>12}{'speedup':>10}  check")
    for name, a, b, note in rows:
        nb = f"{1e3 * b:12.3f}" if b is not None else f"{'-':>12}"
        sp = f"{a / b:9.1f}x" if b else f"{'-':>10}"
        print(f"{name:<12}{1e3 * a:12.3f}{nb}{sp}  {note}")


if __name__ == "__main__":
    main()
