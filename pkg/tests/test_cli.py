import json

import numpy as np
import pytest

from sparsevpr.cli import main
from sparsevpr.events import read_events
from sparsevpr.match import DistanceMatrix
from sparsevpr.preprocess import PixelMask

WORLD = ["--synth_width", "32", "--synth_height", "24", "--synth_n_places", "60"]


@pytest.fixture
def traverses(tmp_path):
    out = tmp_path / "data"
    assert main(["synth", *WORLD, "--out_dir", str(out), "--format", "csv"]) == 0
    return out


def run_args(data, out):
    return [
        "--reference", str(data / "reference.csv"),
        "--query", str(data / "query.csv"),
        "--reference_poses", str(data / "reference_poses.csv"),
        "--query_poses", str(data / "query_poses.csv"),
        "--width", "32", "--height", "24",
        "--tolerance", "10", "--out_dir", str(out),
    ]


def test_synth_writes_pair(traverses):
    names = {p.name for p in traverses.iterdir()}
    assert names == {"reference.csv", "query.csv", "reference_poses.csv", "query_poses.csv"}
    ref = read_events(traverses / "reference.csv", 32, 24)
    assert len(ref) > 0


def test_convert_round_trip(traverses, tmp_path):
    src = traverses / "reference.csv"
    assert main(["convert", str(src), str(tmp_path / "r.bin"), "--width", "32", "--height", "24"]) == 0
    assert main(["convert", str(tmp_path / "r.bin"), str(tmp_path / "r2.csv")]) == 0
    a = read_events(src, 32, 24)
    assert read_events(tmp_path / "r2.csv", 32, 24).same_events(a)
    assert read_events(tmp_path / "r.bin").shape == (24, 32)


def test_preprocess_command(tmp_path):
    rows = ["t_us,u,v,p"] + [f"{t},{t % 4},0,1" for t in range(400)] + [f"{400 + t},2,1,1" for t in range(2000)]
    (tmp_path / "in.csv").write_text("\n".join(rows) + "\n")
    code = main(["preprocess", str(tmp_path / "in.csv"), str(tmp_path / "out.bin"), "--width", "4",
                 "--height", "2", "--hot-pixel-sigma", "1.5", "--burst_ratio", "1000",
                 "--mask_out", str(tmp_path / "mask.csv")])
    assert code == 0
    mask = PixelMask.load(tmp_path / "mask.csv", 4, 2)
    assert mask.masked == {(2, 1)}
    assert len(read_events(tmp_path / "out.bin")) == 400


def test_run_with_config_and_override(traverses, tmp_path, capsys):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text("J = 20\nL = 3\nsigma = 2\n")
    code = main(["run", "--config", str(cfg), "--J", "25", *run_args(traverses, tmp_path / "out")])
    assert code == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["summary"]["J"] == 25
    assert doc["summary"]["config"]["L"] == 3
    assert doc["summary"]["sparse"]["p_at_100r"] > 0.9
    assert (tmp_path / "out" / "pr.csv").exists()


def test_select_match_eval_chain(traverses, tmp_path, capsys):
    base = run_args(traverses, tmp_path / "stage")
    assert main(["select", *base, "--J", "30"]) == 0
    pixels = tmp_path / "stage" / "pixels.csv"
    assert pixels.read_text().startswith("# J=30")

    assert main(["match", *base, "--pixels", str(pixels)]) == 0
    raw = DistanceMatrix.load(tmp_path / "stage" / "distance_raw.dmat")
    assert raw.D.shape[0] > 10

    capsys.readouterr()
    assert main(["eval", str(tmp_path / "stage" / "distance_seq.dmat"), *base]) == 0
    from_seq = json.loads(capsys.readouterr().out)
    assert main(["eval", str(tmp_path / "stage" / "distance_raw.dmat"), "--raw", *base]) == 0
    from_raw = json.loads(capsys.readouterr().out)
    assert from_seq == from_raw

    # the one-shot pipeline with the same pixels agrees
    assert main(["run", *run_args(traverses, tmp_path / "full"), "--pixels", str(pixels)]) == 0
    full = json.loads(capsys.readouterr().out)
    assert full["summary"]["sparse"] == from_seq


def test_experiments_print_reports(tmp_path, capsys):
    out = str(tmp_path / "exp")
    assert main(["exp-select", *WORLD, "--j_grid", "5,10", "--trials", "2", "--tolerance", "10", "--out_dir", out]) == 0
    assert json.loads(capsys.readouterr().out)["name"] == "exp_select"
    assert main(["exp-shift", *WORLD, "--shifts", "0:0,3:0", "--trials", "1", "--tolerance", "10", "--out_dir", out]) == 0
    assert len(json.loads(capsys.readouterr().out)["summary"]["grid"]) == 2
    assert main(["exp-velocity", *WORLD, "--n_events", "2304", "--trials", "1", "--tolerance", "5", "--out_dir", out]) == 0
    assert json.loads(capsys.readouterr().out)["name"] == "exp_velocity"
    assert main(["bench", "--bench_frames", "10", "--bench_runs", "2", "--bench_width", "40",
                 "--bench_height", "30", "--out_dir", out]) == 0
    assert "speedup" in json.loads(capsys.readouterr().out)["timing"]


class TestExitCodes:
    def test_missing_config_file(self, tmp_path):
        assert main(["run", "--config", str(tmp_path / "none.cfg")]) == 2

    def test_bad_value(self):
        assert main(["run", "--J", "lots"]) == 2

    def test_missing_input(self, tmp_path):
        assert main(["convert", str(tmp_path / "none.csv"), str(tmp_path / "x.bin")]) == 2
        assert main(["run", "--reference", str(tmp_path / "none.bin"), "--query", str(tmp_path / "none.bin")]) == 2

    def test_data_error(self, tmp_path):
        (tmp_path / "bad.csv").write_text("t_us,u,v,p\n0,500,0,1\n")
        assert main(["convert", str(tmp_path / "bad.csv"), str(tmp_path / "x.bin")]) == 3
        (tmp_path / "unsorted.csv").write_text("10,0,0,1\n5,0,0,1\n")
        assert main(["convert", str(tmp_path / "unsorted.csv"), str(tmp_path / "x.bin")]) == 3

    def test_experiment_data_error(self, tmp_path):
        # N larger than the stream leaves no frames
        code = main(["exp-velocity", *WORLD, "--n_events", "100000000", "--out_dir", str(tmp_path)])
        assert code == 3

    def test_shift_outside_sensor(self, tmp_path):
        assert main(["exp-shift", *WORLD, "--shifts", "40:0", "--out_dir", str(tmp_path)]) == 2


def test_dmat_is_plain_float64(traverses, tmp_path):
    main(["match", *run_args(traverses, tmp_path / "m"), "--J", "10"])
    data = (tmp_path / "m" / "distance_raw.dmat").read_bytes()
    q, r = np.frombuffer(data[4:12], dtype="<u4")
    assert len(data) == 12 + 8 * q * r
