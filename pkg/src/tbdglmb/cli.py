"""Command-line front end: simulate cubes, track them, and score the tracks.

Outputs
-------
``simulate``  ``cubes.bin`` (binary cube stream), ``truth.csv`` and the
              effective ``config.ini`` in ``--out-dir``.
``track``     track CSV (``TRACK_HEADER``) plus a JSON run summary next to it.
``eval``      metrics CSV (``METRICS_HEADER``) plus a JSON summary next to it.
``all``       the three above chained inside ``--out-dir``.
``config``    writes the canned scenario configuration for editing.

Exit status is 0 on success and 2 on a bad config, a missing or corrupt cube
file, or malformed CSV input.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__, _kernels, metrics
from .config import ConfigError, RunConfig, load_config, paper_config, save_config
from .filter import GlmbTracker, map_hypothesis
from .measurement import CubeFormatError, iter_cubes, write_cubes
from .rfs import cardinality_distribution
from .sim import read_truth_csv, simulate, write_truth_csv

log = logging.getLogger("tbdglmb")

TRACK_HEADER = ["k", "label", "x", "y", "xdot", "ydot", "theta", "hypothesis_weight"]
METRICS_HEADER = [
    "k", "n_truth", "n_estimated", "all_visible", "ospa", "cardinality_error", "label_consistency",
]
OSPA_CUTOFF = 5.0
OSPA_ORDER = 1.0
GATE = 2.0


class InputError(RuntimeError):
    """Unreadable or malformed input file."""


def _summary_path(out: Path) -> Path:
    return out.with_suffix(".json")


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# Pipeline stages
# ---------------------------------------------------------------------------


def run_simulate(cfg: RunConfig, out_dir: Path) -> tuple[Path, Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    sim_cfg = cfg.sim_config()
    frames = []

    def cubes():
        for k, (cube, truth) in enumerate(simulate(sim_cfg, cfg.targets)):
            frames.append((k, truth))
            yield cube

    cube_path, truth_path = out_dir / "cubes.bin", out_dir / "truth.csv"
    n = write_cubes(cube_path, cubes())
    write_truth_csv(truth_path, frames, cfg.sensor)
    save_config(cfg, out_dir / "config.ini")
    log.info("simulated %d frames into %s", n, out_dir)
    return cube_path, truth_path


def run_track(cfg: RunConfig, cube_path: Path, out: Path, frames: int | None = None) -> Path:
    if not cube_path.is_file():
        raise InputError(f"cube file not found: {cube_path}")
    tracker = GlmbTracker(cfg.sensor, cfg.motion, cfg.birth, cfg.filter, cfg.run.seed)
    out.parent.mkdir(parents=True, exist_ok=True)
    per_frame = []
    start = time.perf_counter()
    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACK_HEADER)
        for k, cube in enumerate(iter_cubes(cube_path)):
            if frames is not None and k >= frames:
                break
            if cube.grid != cfg.sensor.grid:
                raise CubeFormatError(f"{cube_path}: frame {k} grid differs from the configured grid")
            t0 = time.perf_counter()
            density = tracker.update(cube)
            hyp = map_hypothesis(density)
            weight = float(density.weights[density.hypotheses.index(hyp)])
            for label in sorted(hyp.labels):
                x, xd, y, yd, th = (float(v) for v in density.tracks[label].mean())
                writer.writerow([k, str(label), repr(x), repr(y), repr(xd), repr(yd), repr(th), repr(weight)])
            per_frame.append({
                "k": k,
                "cardinality": hyp.cardinality,
                "cardinality_distribution": [float(p) for p in cardinality_distribution(density)],
                "n_hypotheses": len(density.hypotheses),
                "n_labels": len(density.labels()),
                "wall_time_s": time.perf_counter() - t0,
            })
            log.debug("frame %d: |I|=%d, %d hypotheses", k, hyp.cardinality, len(density.hypotheses))
    _write_json(_summary_path(out), {
        "version": __version__,
        "backend": _kernels.backend(),
        "seed": cfg.run.seed,
        "n_frames": len(per_frame),
        "wall_time_s": time.perf_counter() - start,
        "frames": per_frame,
    })
    log.info("tracked %d frames into %s", len(per_frame), out)
    return out


def read_track_csv(path: Path) -> dict[int, list[tuple[str, float, float]]]:
    """Frame index -> (label, x, y) records."""
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames != TRACK_HEADER:
                raise InputError(f"{path}: unexpected track header {reader.fieldnames}")
            rows = [(int(r["k"]), r["label"], float(r["x"]), float(r["y"])) for r in reader]
    except (OSError, KeyError, ValueError) as exc:
        raise InputError(f"{path}: {exc}") from None
    return metrics.group_by_frame(rows)


def run_eval(tracks: Path, truth: Path, out: Path) -> Path:
    records = read_track_csv(tracks)
    try:
        truth_rows = read_truth_csv(truth)
    except (OSError, KeyError, ValueError) as exc:
        raise InputError(f"{truth}: {exc}") from None
    truth_xy = {k: [(r.id, r.x, r.y) for r in rows] for k, rows in truth_rows.items()}
    n_frames = 1 + max([*records, *truth_rows], default=-1)

    rows, visible_ospa, visible_card = [], [], []
    for k in range(n_frames):
        est = records.get(k, [])
        tru = truth_rows.get(k, [])
        d = metrics.ospa([(x, y) for _, x, y in est], [(r.x, r.y) for r in tru], OSPA_CUTOFF, OSPA_ORDER)
        err = metrics.cardinality_error(len(est), len(tru))
        visible = bool(tru) and all(r.in_fov and not r.occluded for r in tru)
        seen = {j: truth_xy[j] for j in range(k + 1) if j in truth_xy}
        lc = metrics.label_consistency(records, seen, GATE)
        rows.append([k, len(tru), len(est), int(visible), repr(d), err, repr(lc)])
        if visible:
            visible_ospa.append(d)
            visible_card.append(err == 0)

    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(METRICS_HEADER)
        writer.writerows(rows)
    per_target = metrics.label_consistency_per_target(records, truth_xy, GATE)
    _write_json(_summary_path(out), {
        "n_frames": n_frames,
        "n_visible_frames": len(visible_ospa),
        "mean_ospa_visible": float(np.mean(visible_ospa)) if visible_ospa else None,
        "cardinality_accuracy_visible": float(np.mean(visible_card)) if visible_card else None,
        "label_consistency": metrics.label_consistency(records, truth_xy, GATE),
        "label_consistency_per_target": {str(t): v for t, v in sorted(per_target.items())},
    })
    log.info("scored %d frames into %s", n_frames, out)
    return out


# ---------------------------------------------------------------------------
# Argument handling
# ---------------------------------------------------------------------------


def _load(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else paper_config()
    return cfg.with_overrides(seed=args.seed, frames=args.frames)


def _seed(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _frames(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("frames must be positive")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tbd-glmb", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", type=Path, help="INI run configuration (default: canned scenario)")
            p.add_argument("--seed", type=_seed, help="override the configured seed")
            p.add_argument("--frames", type=_frames, help="process only the first N frames")

    p = sub.add_parser("simulate", help="render synthetic cubes and truth")
    common(p)
    p.add_argument("--out-dir", type=Path, required=True)

    p = sub.add_parser("track", help="run the tracker over a cube file")
    common(p)
    p.add_argument("--cubes", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("eval", help="score tracks against truth")
    p.add_argument("--tracks", type=Path, required=True)
    p.add_argument("--truth", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("all", help="simulate, track and eval in one directory")
    common(p)
    p.add_argument("--out-dir", type=Path, required=True)

    p = sub.add_parser("config", help="write the canned scenario configuration")
    p.add_argument("--out", type=Path, required=True)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.command == "config":
            save_config(paper_config(), args.out)
        elif args.command == "simulate":
            run_simulate(_load(args), args.out_dir)
        elif args.command == "track":
            run_track(_load(args), args.cubes, args.out, args.frames)
        elif args.command == "eval":
            run_eval(args.tracks, args.truth, args.out)
        elif args.command == "all":
            cfg = _load(args)
            cubes, truth = run_simulate(cfg, args.out_dir)
            tracks = run_track(cfg, cubes, args.out_dir / "tracks.csv")
            run_eval(tracks, truth, args.out_dir / "metrics.csv")
    except (ConfigError, CubeFormatError, InputError) as exc:
        print(f"tbd-glmb: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
