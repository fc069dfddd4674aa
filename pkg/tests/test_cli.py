import numpy as np
import pytest

from deftemp.cli import main
from deftemp.raster import GrayImage, load_image, load_template, save_image


@pytest.fixture(scope="module")
def fixture_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("fx")
    rc = main(["fixture", "--shape", "ellipse", "--noise", "0.03",
               "--seed", "3", "--out", str(out)])
    assert rc == 0
    return out


FAST_FLAGS = ["--pso-iters", "10", "--pso-particles", "8"]


class TestFixtureCommand:
    def test_writes_scene_files(self, fixture_dir):
        assert (fixture_dir / "image.pgm").exists()
        assert (fixture_dir / "template.txt").exists()
        assert (fixture_dir / "truth.txt").exists()

    def test_outputs_load_back(self, fixture_dir):
        img = load_image(fixture_dir / "image.pgm")
        tpl = load_template(fixture_dir / "template.txt")
        assert img.width == 256 and img.height == 256
        assert tpl.contour.shape[0] == 48

    def test_truth_is_parseable(self, fixture_dir):
        truth = dict(
            line.split(" = ")
            for line in (fixture_dir / "truth.txt").read_text().splitlines())
        assert truth["shape"] == "ellipse"
        assert float(truth["pose.scale"]) == 1.0
        assert "cp0.x" in truth

    def test_explicit_pose_and_deform(self, tmp_path):
        rc = main(["fixture", "--shape", "rectangle", "--deform", "2",
                   "--pose", "theta=0.3,dx=30,dy=40", "--out",
                   str(tmp_path / "fx2")])
        assert rc == 0
        truth = dict(
            line.split(" = ")
            for line in (tmp_path / "fx2" / "truth.txt").read_text()
            .splitlines())
        assert float(truth["pose.rotation"]) == pytest.approx(0.3)
        assert float(truth["pose.dx"]) == 30.0

    def test_bad_shape_is_config_error(self, tmp_path, capsys):
        with pytest.raises(SystemExit) as exc_info:
            main(["fixture", "--shape", "blob", "--out", str(tmp_path)])
        assert exc_info.value.code == 3

    def test_excessive_deform_is_config_error(self, tmp_path):
        rc = main(["fixture", "--shape", "ellipse", "--deform", "50",
                   "--out", str(tmp_path / "fx3")])
        assert rc == 3


class TestRunCommand:
    def test_segments_fixture_and_writes_artifacts(self, fixture_dir,
                                                   tmp_path):
        out = tmp_path / "run_out"
        rc = main(["run", "--image", str(fixture_dir / "image.pgm"),
                   "--template", str(fixture_dir / "template.txt"),
                   "--out", str(out), *FAST_FLAGS])
        assert rc == 0
        for name in ("overlay.png", "report.txt", "candidates.csv",
                     "timings.txt"):
            assert (out / name).exists(), name
        report = (out / "report.txt").read_text()
        assert "status = ok" in report
        assert "final_cost = " in report

    def test_dump_flags_produce_files(self, fixture_dir, tmp_path):
        out = tmp_path / "run_dump"
        rc = main(["run", "--image", str(fixture_dir / "image.pgm"),
                   "--template", str(fixture_dir / "template.txt"),
                   "--out", str(out), "--dump-epf", "--dump-trace",
                   "--dump-warp", "--dump-candidates", *FAST_FLAGS])
        assert rc == 0
        for name in ("epf.pgm", "trace.csv", "warp.csv"):
            assert (out / name).exists(), name
        rows = (out / "candidates.csv").read_text().splitlines()
        levels = {r.split(",")[0] for r in rows[1:]}
        assert levels == {"0", "1", "2"}

    def test_blank_image_exits_two(self, fixture_dir, tmp_path, capsys):
        blank = tmp_path / "blank.pgm"
        save_image(GrayImage(np.full((64, 64), 0.5)), blank)
        rc = main(["run", "--image", str(blank),
                   "--template", str(fixture_dir / "template.txt"),
                   "--out", str(tmp_path / "o")])
        assert rc == 2
        err = capsys.readouterr().err
        assert "edge_count = 0" in err

    def test_missing_image_exits_four(self, fixture_dir, tmp_path):
        rc = main(["run", "--image", str(tmp_path / "nope.pgm"),
                   "--template", str(fixture_dir / "template.txt"),
                   "--out", str(tmp_path / "o")])
        assert rc == 4

    def test_bad_config_file_exits_three(self, fixture_dir, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("mystery.knob = 1\n")
        rc = main(["run", "--image", str(fixture_dir / "image.pgm"),
                   "--template", str(fixture_dir / "template.txt"),
                   "--out", str(tmp_path / "o"), "--config", str(cfg)])
        assert rc == 3

    def test_missing_required_flag_exits_three(self, capsys):
        with pytest.raises(SystemExit) as exc_info:
            main(["run", "--image", "x.pgm"])
        assert exc_info.value.code == 3

    def test_skip_roi_still_matches(self, fixture_dir, tmp_path):
        out = tmp_path / "run_skip"
        rc = main(["run", "--image", str(fixture_dir / "image.pgm"),
                   "--template", str(fixture_dir / "template.txt"),
                   "--out", str(out), "--skip-roi", *FAST_FLAGS])
        assert rc == 0
        assert "roi_windows = 0" in (out / "report.txt").read_text()


class TestTrackCommand:
    def test_tracks_two_frames(self, fixture_dir, tmp_path):
        out = tmp_path / "trk"
        rc = main(["track", "--images", str(fixture_dir / "image.pgm"),
                   str(fixture_dir / "image.pgm"),
                   "--template", str(fixture_dir / "template.txt"),
                   "--out", str(out), *FAST_FLAGS])
        assert rc == 0
        report = (out / "report.txt").read_text()
        assert "frame0.status = ok" in report
        assert "frame1.status = ok" in report
        assert (out / "overlay_000.png").exists()
        assert (out / "overlay_001.png").exists()

    def test_single_frame_is_config_error(self, fixture_dir, tmp_path):
        rc = main(["track", "--images", str(fixture_dir / "image.pgm"),
                   "--template", str(fixture_dir / "template.txt"),
                   "--out", str(tmp_path / "t1")])
        assert rc == 3

    def test_unmatched_glob_exits_four(self, fixture_dir, tmp_path):
        rc = main(["track", "--images", str(tmp_path / "none_*.pgm"),
                   "--template", str(fixture_dir / "template.txt"),
                   "--out", str(tmp_path / "t2")])
        assert rc == 4

    def test_failed_frame_exits_two(self, fixture_dir, tmp_path):
        blank = tmp_path / "blank.pgm"
        save_image(GrayImage(np.full((256, 256), 0.5)), blank)
        out = tmp_path / "trk_fail"
        rc = main(["track", "--images", str(fixture_dir / "image.pgm"),
                   str(blank),
                   "--template", str(fixture_dir / "template.txt"),
                   "--out", str(out), *FAST_FLAGS])
        assert rc == 2
        report = (out / "report.txt").read_text()
        assert "frame1.status = failed" in report
