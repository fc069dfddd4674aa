import numpy as np
import pytest

from deftemp.config import (
    build_pipeline_config,
    load_config,
    parse_config_text,
    parse_pose,
)
from deftemp.errors import InvalidConfig, IoError


class TestParseConfigText:
    def test_parses_namespaced_keys(self):
        text = """
        # search tuning
        stage1.percentile = 85
        stage2.sigmas = 4, 2, 1
        pso.iterations = 40        # trailing comment
        pipeline.skip_roi = true
        """
        values = parse_config_text(text)
        assert values["stage1.percentile"] == 85.0
        assert values["stage2.sigmas"] == (4.0, 2.0, 1.0)
        assert values["pso.iterations"] == 40
        assert values["pipeline.skip_roi"] is True

    def test_unknown_key_reports_line(self):
        with pytest.raises(InvalidConfig, match="line 2"):
            parse_config_text("stage1.percentile = 90\nnope.key = 1\n")

    def test_bad_value_reports_key(self):
        with pytest.raises(InvalidConfig, match="pso.iterations"):
            parse_config_text("pso.iterations = banana\n")

    def test_missing_equals_rejected(self):
        with pytest.raises(InvalidConfig):
            parse_config_text("stage1.percentile 90\n")

    def test_bool_spellings(self):
        assert parse_config_text("pipeline.dump_epf = YES\n")[
            "pipeline.dump_epf"] is True
        assert parse_config_text("pipeline.dump_epf = off\n")[
            "pipeline.dump_epf"] is False

    def test_stop_energy_none(self):
        assert parse_config_text("pso.stop_energy = none\n")[
            "pso.stop_energy"] is None


class TestBuildPipelineConfig:
    def test_defaults_without_inputs(self):
        cfg = build_pipeline_config()
        assert cfg.schedule.sigmas == (4.0, 2.0, 1.0)
        assert cfg.swarm.particles == 30
        assert not cfg.skip_roi

    def test_file_values_override_defaults(self):
        cfg = build_pipeline_config({"pso.particles": 12,
                                     "stage2.scales": (1.0,)})
        assert cfg.swarm.particles == 12
        assert cfg.grid.scales == (1.0,)

    def test_flags_override_file(self):
        cfg = build_pipeline_config({"pso.particles": 12},
                                    {"pso.particles": 50})
        assert cfg.swarm.particles == 50

    def test_none_overrides_ignored(self):
        cfg = build_pipeline_config({"pso.particles": 12},
                                    {"pso.particles": None})
        assert cfg.swarm.particles == 12

    def test_rotation_step_rebuilds_grid(self):
        cfg = build_pipeline_config({"stage2.rotation_step_deg": 90.0})
        assert len(cfg.grid.rotations) == 4

    def test_invalid_combination_caught(self):
        with pytest.raises(InvalidConfig):
            build_pipeline_config({"stage2.sigmas": (1.0, 2.0)})


class TestLoadConfig:
    def test_reads_file(self, tmp_path):
        p = tmp_path / "cfg.txt"
        p.write_text("pso.seed = 5\n")
        assert load_config(p) == {"pso.seed": 5}

    def test_missing_file_is_io_error(self, tmp_path):
        with pytest.raises(IoError):
            load_config(tmp_path / "absent.txt")


class TestParsePose:
    def test_full_pose(self):
        pose = parse_pose("s=1.2, theta=0.52, dx=40, dy=20")
        assert pose.scale == pytest.approx(1.2)
        assert pose.rotation == pytest.approx(0.52)
        assert pose.dx == 40.0 and pose.dy == 20.0

    def test_partial_defaults_identity(self):
        pose = parse_pose("theta=0.5")
        assert pose.scale == 1.0 and pose.dx == 0.0 and pose.dy == 0.0

    def test_long_names_accepted(self):
        pose = parse_pose("scale=2,rotation=1")
        assert pose.scale == 2.0 and pose.rotation == pytest.approx(1.0)

    def test_unknown_field_rejected(self):
        with pytest.raises(InvalidConfig):
            parse_pose("tilt=3")

    def test_malformed_rejected(self):
        with pytest.raises(InvalidConfig):
            parse_pose("s:2")
