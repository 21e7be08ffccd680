import json

import numpy as np
import pytest

from cloudcast.cli import main


def run(*argv):
    return main(list(argv))


def read_json(path):
    return json.loads(path.read_text())


@pytest.fixture
def synth_dir(tmp_path):
    out = tmp_path / "synth"
    code = run("synth", "--flow", "translation:2,0", "--frames", "20",
               "--size", "64", "--seed", "3", "--output", str(out))
    assert code == 0
    return out


class TestSynth:
    def test_outputs_exist(self, synth_dir):
        assert (synth_dir / "labels.npy").exists()
        assert (synth_dir / "labels_timestamps.json").exists()
        assert (synth_dir / "flow.npy").exists()
        cube = np.load(synth_dir / "labels.npy")
        assert cube.shape == (20, 64, 64)
        flow = np.load(synth_dir / "flow.npy")
        assert flow.shape == (2, 64, 64)

    def test_idempotent_bytes(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            assert run("synth", "--flow", "translation:1,1", "--frames", "4",
                       "--size", "32", "--seed", "7", "--output", str(out)) == 0
        assert (a / "labels.npy").read_bytes() == (b / "labels.npy").read_bytes()
        assert (a / "flow.npy").read_bytes() == (b / "flow.npy").read_bytes()


class TestForecastEval:
    def test_persistence_end_to_end(self, synth_dir, tmp_path):
        seq = np.load(synth_dir / "labels.npy")
        stamps = read_json(synth_dir / "labels_timestamps.json")["timestamps"]

        # forecast from frame 3 so 16 later frames exist as truth
        hist = tmp_path / "hist"
        hist.mkdir()
        with open(hist / "labels.npy", "wb") as f:
            np.save(f, seq[:4])
        (hist / "labels_timestamps.json").write_text(
            json.dumps({"timestamps": stamps[:4]})
        )

        fc_dir = tmp_path / "fc"
        assert run("forecast", "--method", "persistence",
                   "--input", str(hist / "labels.npy"),
                   "--timestamps", str(hist / "labels_timestamps.json"),
                   "--steps", "16", "--output", str(fc_dir)) == 0
        pred = np.load(fc_dir / "forecast.npy")
        assert pred.shape == (16, 64, 64)
        assert np.array_equal(pred, np.repeat(seq[3][None], 16, axis=0))

        truth_path = tmp_path / "truth.npy"
        with open(truth_path, "wb") as f:
            np.save(f, seq[4:20])
        ev = tmp_path / "eval"
        assert run("eval", "--input", str(fc_dir / "forecast.npy"), str(truth_path),
                   "--output", str(ev)) == 0
        metrics = read_json(ev / "metrics.json")
        assert 0.0 < metrics["mean_accuracy"] < 1.0
        assert "config" in metrics
        assert (ev / "per_step_accuracy.csv").exists()

    def test_tvl1_shape_and_beats_persistence(self, synth_dir, tmp_path):
        fc = tmp_path / "tvl1"
        assert run("forecast", "--method", "tvl1",
                   "--input", str(synth_dir / "labels.npy"),
                   "--timestamps", str(synth_dir / "labels_timestamps.json"),
                   "--steps", "16", "--output", str(fc)) == 0
        assert np.load(fc / "forecast.npy").shape == (16, 64, 64)

    def test_eval_perfect_prediction(self, synth_dir, tmp_path):
        ev = tmp_path / "eval"
        labels = str(synth_dir / "labels.npy")
        assert run("eval", "--input", labels, labels, "--output", str(ev)) == 0
        assert read_json(ev / "metrics.json")["mean_accuracy"] == 1.0

    def test_eval_with_reference_adds_skill(self, synth_dir, tmp_path):
        seq = np.load(synth_dir / "labels.npy")
        pred = tmp_path / "pred.npy"
        ref = tmp_path / "ref.npy"
        truth = tmp_path / "truth.npy"
        with open(pred, "wb") as f:
            np.save(f, seq[:16])
        with open(truth, "wb") as f:
            np.save(f, seq[:16])
        with open(ref, "wb") as f:
            np.save(f, (seq[:16] + 1) % 4)
        ev = tmp_path / "ev"
        assert run("eval", "--input", str(pred), str(truth), str(ref),
                   "--output", str(ev)) == 0
        assert read_json(ev / "metrics.json")["brier_skill_score"] == 1.0


class TestPreprocessing:
    def test_reduce_then_crop_then_downsample(self, tmp_path, rng):
        cube = rng.integers(0, 11, (3, 8, 8), dtype=np.uint8)
        src = tmp_path / "src"
        src.mkdir()
        with open(src / "labels.npy", "wb") as f:
            np.save(f, cube)
        stamps = [f"2017-01-01T0{h}:{m:02d}:00Z" for h, m in
                  [(0, 0), (0, 15), (0, 30)]]
        (src / "labels_timestamps.json").write_text(json.dumps({"timestamps": stamps}))

        red = tmp_path / "red"
        assert run("reduce", "--input", str(src / "labels.npy"),
                   "--timestamps", str(src / "labels_timestamps.json"),
                   "--output", str(red)) == 0
        assert np.load(red / "labels.npy").max() <= 3

        crop = tmp_path / "crop"
        assert run("crop", "--input", str(red / "labels.npy"),
                   "--timestamps", str(red / "labels_timestamps.json"),
                   "--size", "4x4", "--output", str(crop)) == 0
        assert np.load(crop / "labels.npy").shape == (3, 4, 4)

        down = tmp_path / "down"
        assert run("downsample", "--input", str(crop / "labels.npy"),
                   "--timestamps", str(crop / "labels_timestamps.json"),
                   "--factor", "2", "--output", str(down)) == 0
        assert np.load(down / "labels.npy").shape == (3, 2, 2)

    def test_split_and_repair(self, tmp_path):
        cube = np.zeros((8, 2, 2), dtype=np.uint8)
        src = tmp_path / "src"
        src.mkdir()
        with open(src / "labels.npy", "wb") as f:
            np.save(f, cube)
        minutes = [0, 15, 30, 45, 60, 75, 120, 135]  # one 30-minute hole
        stamps = [f"2017-01-01T{m // 60:02d}:{m % 60:02d}:00Z" for m in minutes]
        (src / "labels_timestamps.json").write_text(json.dumps({"timestamps": stamps}))

        rep = tmp_path / "rep"
        assert run("repair", "--input", str(src / "labels.npy"),
                   "--timestamps", str(src / "labels_timestamps.json"),
                   "--output", str(rep)) == 0
        assert np.load(rep / "labels.npy").shape[0] == 10
        gaps = read_json(rep / "gap_report.json")["runs"]
        assert gaps[0]["count"] == 2 and gaps[0]["repaired"]

        sp = tmp_path / "sp"
        assert run("split", "--input", str(rep / "labels.npy"),
                   "--timestamps", str(rep / "labels_timestamps.json"),
                   "--fraction", "0.5", "--output", str(sp)) == 0
        assert np.load(sp / "train.npy").shape[0] == 5
        assert np.load(sp / "test.npy").shape[0] == 5


class TestRenderAndSegment:
    def test_render_writes_pngs(self, synth_dir, tmp_path):
        out = tmp_path / "png"
        assert run("render", "--input", str(synth_dir / "labels.npy"),
                   "--timestamps", str(synth_dir / "labels_timestamps.json"),
                   "--output", str(out)) == 0
        assert (out / "frame_00000.png").exists()
        assert (out / "frame_00019.png").exists()

    def test_segment_scene(self, tmp_path):
        scene = tmp_path / "scene"
        scene.mkdir()
        shape = (4, 4)

        def put(name, value):
            with open(scene / f"{name}.npy", "wb") as f:
                np.save(f, np.full(shape, value, dtype=np.float64))

        put("bt087", 245.0)
        put("bt108", 245.0)
        put("bt120", 244.8)
        put("t_sfc", 288.0)
        put("t_950", 285.0)
        put("t_850", 283.0)
        put("t_700", 273.0)
        put("t_500", 252.0)
        put("t_tropo", 210.0)
        put("solar_zenith", 120.0)
        put("satellite_zenith", 10.0)
        with open(scene / "cloud_mask.npy", "wb") as f:
            np.save(f, np.ones(shape, dtype=bool))

        out = tmp_path / "seg"
        assert run("segment", "--input", str(scene), "--output", str(out)) == 0
        labels = np.load(out / "labels.npy")
        assert labels.shape == (1, 4, 4)
        # opaque, and t108=245 sits between the vh and hi thresholds -> high
        assert (labels == 4).all()


class TestExitCodes:
    def test_unknown_subcommand(self, capsys):
        assert run("frobnicate", "--output", "x") == 1
        assert "usage" in capsys.readouterr().err

    def test_missing_input_file(self, tmp_path):
        code = run("eval", "--input", str(tmp_path / "nope.npy"),
                   str(tmp_path / "nope2.npy"), "--output", str(tmp_path / "o"))
        assert code == 2

    def test_validation_error(self, tmp_path, synth_dir):
        code = run("downsample", "--input", str(synth_dir / "labels.npy"),
                   "--timestamps", str(synth_dir / "labels_timestamps.json"),
                   "--factor", "7", "--output", str(tmp_path / "o"))
        assert code == 1

    def test_bad_config_json(self, tmp_path, synth_dir):
        cfg = tmp_path / "bad.json"
        cfg.write_text("{not json")
        code = run("forecast", "--method", "tvl1",
                   "--input", str(synth_dir / "labels.npy"),
                   "--timestamps", str(synth_dir / "labels_timestamps.json"),
                   "--config", str(cfg), "--output", str(tmp_path / "o"))
        assert code == 1

    def test_missing_required_flag(self, capsys):
        assert run("synth") == 1


class TestTuneCommand:
    def test_tune_writes_reports(self, tmp_path):
        from cloudcast.verify import SyntheticSpec, Translation, generate_synthetic
        from cloudcast.grids import save_sequence

        seq, _ = generate_synthetic(
            SyntheticSpec(flow=Translation(1.0, 0.0), grid_size=(24, 24),
                          frame_count=20, seed=5)
        )
        src = tmp_path / "train"
        src.mkdir()
        save_sequence(seq, src / "labels.npy", src / "labels_timestamps.json")

        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"tvl1": {"nscales": 1, "warps": 1,
                                            "outer_iterations": 2,
                                            "inner_iterations": 5}}))
        out = tmp_path / "tuned"
        import warnings

        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            code = run("tune", "--input", str(src / "labels.npy"),
                       "--timestamps", str(src / "labels_timestamps.json"),
                       "--config", str(cfg), "--steps", "2",
                       "--output", str(out))
        assert code == 0
        best = read_json(out / "best_params.json")
        assert "lambda" in best
        report = read_json(out / "tuning_report.json")
        assert len(report["combinations"]) == 360
