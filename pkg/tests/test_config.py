import argparse

import pytest
from pydantic import ValidationError

from src.commands.utils import add_global_flags, resolve_config
from src.config.index import dump_flat_config, load_flat_config, parse_flat_config
from src.models.index import PipelineConfig, Projection, RecoveryMode, WeightFrame


def parse_args(argv):
    parser = argparse.ArgumentParser()
    add_global_flags(parser)
    return parser.parse_args(argv)


class TestFlatConfig:
    def test_comments_and_blank_lines(self):
        text = "# experiment\n\nepsilon = 0.25  # contrast\nMode=offline\n"
        assert parse_flat_config(text) == {"epsilon": "0.25", "mode": "offline"}

    def test_missing_equals_names_the_line(self):
        with pytest.raises(ValueError, match=":2:"):
            parse_flat_config("r = 7\nbin_rate 100000\n")

    def test_duplicate_key(self):
        with pytest.raises(ValueError, match="duplicate"):
            parse_flat_config("r = 7\nR = 5\n")

    def test_overrides_win_over_file(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("r = 5\nepsilon = 0.3\n")
        merged = load_flat_config(path, {"r": 9, "epsilon": None})
        assert merged == {"r": 9, "epsilon": "0.3"}

    def test_missing_file(self, tmp_path):
        with pytest.raises(OSError):
            load_flat_config(tmp_path / "absent.cfg")

    def test_dump_is_sorted_and_skips_none(self):
        assert dump_flat_config({"b": 2, "a": 1, "c": None}) == "a = 1\nb = 2\n"


class TestPipelineConfig:
    def test_defaults(self):
        cfg = PipelineConfig()
        assert cfg.mode is RecoveryMode.REALTIME
        assert cfg.flow.r == 7
        assert cfg.flow.bin_rate == 100_000.0
        assert cfg.offline.frame_rate == 20_000.0
        assert cfg.pyramid.window == 15
        assert cfg.recovery.hp_cutoff == 30.0
        assert cfg.recovery.out_rate == 16_000
        assert cfg.recovery.gate_strength == 0.8

    def test_from_flat_routes_keys(self):
        cfg = PipelineConfig.from_flat(
            {"mode": "offline", "pyr_window": "21", "projection": "pca", "weight_frame": "both", "epsilon": "0.4"}
        )
        assert cfg.mode is RecoveryMode.OFFLINE
        assert cfg.pyramid.window == 21
        assert cfg.recovery.projection is Projection.PCA
        assert cfg.offline.weight_frame is WeightFrame.BOTH
        assert cfg.sensor.epsilon == 0.4

    def test_unknown_key(self):
        with pytest.raises(ValueError, match="bogus"):
            PipelineConfig.from_flat({"bogus": 1})

    def test_even_pyramid_window(self):
        with pytest.raises(ValidationError):
            PipelineConfig.from_flat({"pyr_window": 14})

    @pytest.mark.parametrize("key,value", [("epsilon", 0), ("r", 0), ("gate_strength", 1.5), ("pyr_downscale", 1.0)])
    def test_out_of_range_values(self, key, value):
        with pytest.raises(ValidationError):
            PipelineConfig.from_flat({key: value})

    def test_cutoff_above_output_nyquist(self):
        with pytest.raises(ValidationError):
            PipelineConfig.from_flat({"hp_cutoff": 9000, "out_rate": 16000})

    def test_flat_form_reloads_to_the_same_config(self):
        cfg = PipelineConfig.from_flat({"mode": "offline", "r": 5, "gate_window": 50})
        assert PipelineConfig.from_flat(cfg.to_flat()) == cfg


class TestCommandLineResolution:
    def test_flags_override_config_file(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("r = 5\nmode = offline\nhp_cutoff = 40\n")
        cfg = resolve_config(parse_args(["--config", str(path), "--r", "3", "--set", "gate_window=60"]))
        assert cfg.flow.r == 3
        assert cfg.mode is RecoveryMode.OFFLINE
        assert cfg.recovery.hp_cutoff == 40.0
        assert cfg.recovery.gate_window == 60.0

    def test_causal_flag(self):
        assert resolve_config(parse_args(["--causal"])).recovery.causal is True
        assert resolve_config(parse_args([])).recovery.causal is False

    def test_malformed_set(self):
        with pytest.raises(ValueError):
            resolve_config(parse_args(["--set", "r"]))

    def test_gate_and_export_flags(self):
        argv = ["--gate-freq-smooth", "80", "--gate-time-smooth", "40", "--gate-n-std", "2.0", "--normalize-peak", "0.5"]
        recovery = resolve_config(parse_args(argv)).recovery
        assert recovery.gate_freq_smooth == 80.0
        assert recovery.gate_time_smooth == 40.0
        assert recovery.gate_n_std == 2.0
        assert recovery.normalize_peak == 0.5

    def test_normalize_peak_flag_is_validated(self):
        with pytest.raises(ValidationError):
            resolve_config(parse_args(["--normalize-peak", "1.5"]))
