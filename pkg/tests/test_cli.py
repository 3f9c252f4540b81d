import csv
import dataclasses
import json

import pytest

from tbdglmb import cli
from tbdglmb.config import dump_config, paper_config
from tbdglmb.filter import FilterParams

N_FRAMES = 6


@pytest.fixture(scope="module")
def config_path(tmp_path_factory):
    cfg = paper_config(n_frames=N_FRAMES)
    cfg = dataclasses.replace(cfg, filter=FilterParams(particles_per_track=1500))
    path = tmp_path_factory.mktemp("cfg") / "small.ini"
    path.write_text(dump_config(cfg))
    return path


@pytest.fixture(scope="module")
def pipeline(config_path, tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    assert cli.main(["all", "--config", str(config_path), "--out-dir", str(out)]) == 0
    return out


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_all_writes_every_artifact(pipeline):
    for name in ("cubes.bin", "truth.csv", "config.ini", "tracks.csv", "tracks.json", "metrics.csv", "metrics.json"):
        assert (pipeline / name).is_file(), name
    metrics = _rows(pipeline / "metrics.csv")
    assert list(metrics[0]) == cli.METRICS_HEADER
    assert [int(r["k"]) for r in metrics] == list(range(N_FRAMES))
    summary = json.loads((pipeline / "tracks.json").read_text())
    assert summary["n_frames"] == N_FRAMES
    assert len(summary["frames"]) == N_FRAMES
    for frame in summary["frames"]:
        assert sum(frame["cardinality_distribution"]) == pytest.approx(1.0)
    report = json.loads((pipeline / "metrics.json").read_text())
    assert report["n_frames"] == N_FRAMES
    assert 0.0 <= report["label_consistency"] <= 1.0


def test_track_is_reproducible(pipeline, config_path, tmp_path):
    out = tmp_path / "again.csv"
    args = ["track", "--config", str(config_path), "--cubes", str(pipeline / "cubes.bin"), "--out", str(out)]
    assert cli.main(args) == 0
    assert out.read_bytes() == (pipeline / "tracks.csv").read_bytes()


def test_frames_limits_tracking(pipeline, config_path, tmp_path):
    out = tmp_path / "short.csv"
    args = ["track", "--config", str(config_path), "--cubes", str(pipeline / "cubes.bin"),
            "--out", str(out), "--frames", "2"]
    assert cli.main(args) == 0
    assert json.loads(out.with_suffix(".json").read_text())["n_frames"] == 2


def test_eval_of_truth_against_itself_is_perfect(pipeline, tmp_path):
    tracks = tmp_path / "truth_tracks.csv"
    with open(tracks, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(cli.TRACK_HEADER)
        for r in _rows(pipeline / "truth.csv"):
            writer.writerow([r["k"], f"t{r['id']}", r["x"], r["y"], r["xdot"], r["ydot"], r["theta"], 1.0])
    out = tmp_path / "m.csv"
    assert cli.main(["eval", "--tracks", str(tracks), "--truth", str(pipeline / "truth.csv"), "--out", str(out)]) == 0
    rows = _rows(out)
    assert all(float(r["ospa"]) == 0.0 and int(r["cardinality_error"]) == 0 for r in rows)
    assert json.loads(out.with_suffix(".json").read_text())["label_consistency"] == 1.0


def test_corrupt_cube_exits_2(pipeline, config_path, tmp_path, capsys):
    bad = tmp_path / "bad.bin"
    bad.write_bytes((pipeline / "cubes.bin").read_bytes()[:1000])
    args = ["track", "--config", str(config_path), "--cubes", str(bad), "--out", str(tmp_path / "t.csv")]
    assert cli.main(args) == 2
    assert "error" in capsys.readouterr().err


def test_missing_cube_exits_2(config_path, tmp_path):
    args = ["track", "--config", str(config_path), "--cubes", str(tmp_path / "none.bin"), "--out", str(tmp_path / "t.csv")]
    assert cli.main(args) == 2


def test_bad_config_exits_2_naming_the_field(tmp_path, capsys):
    path = tmp_path / "bad.ini"
    path.write_text("[filter]\np_survival = 2.0\n")
    assert cli.main(["simulate", "--config", str(path), "--out-dir", str(tmp_path / "o")]) == 2
    assert "p_survival" in capsys.readouterr().err


def test_config_command_writes_canned_scenario(tmp_path):
    out = tmp_path / "c.ini"
    assert cli.main(["config", "--out", str(out)]) == 0
    assert out.read_text() == dump_config(paper_config())


def test_malformed_tracks_exit_2(pipeline, tmp_path):
    bad = tmp_path / "t.csv"
    bad.write_text("k,label\n0,a\n")
    args = ["eval", "--tracks", str(bad), "--truth", str(pipeline / "truth.csv"), "--out", str(tmp_path / "m.csv")]
    assert cli.main(args) == 2
