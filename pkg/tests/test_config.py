"""Configuration round trip and validation."""

import pytest

from scanloc.config import (
    MatchingConfig,
    RunConfig,
    ScaleConfig,
    SynthConfig,
    config_from_dict,
    config_to_dict,
    load_config,
    save_config,
)
from scanloc.errors import InputFormatError, InvalidArgumentError


class TestDefaults:
    def test_empty_dict_gives_defaults(self):
        cfg = config_from_dict({})
        assert cfg == RunConfig()
        assert cfg.matching.n_rotations == 64
        assert cfg.scale.enabled is True
        assert cfg.synth.town.n_buildings == 60

    def test_none_gives_defaults(self):
        assert config_from_dict(None) == RunConfig()

    def test_partial_section_keeps_other_defaults(self):
        cfg = config_from_dict({"matching": {"n_rotations": 16}})
        assert cfg.matching.n_rotations == 16
        assert cfg.matching.template_size == 32
        assert cfg.scale == ScaleConfig()

    def test_partial_nested_section(self):
        cfg = config_from_dict({"synth": {"town": {"n_cars": 3}}})
        assert cfg.synth.town.n_cars == 3
        assert cfg.synth.town.n_buildings == 60
        assert cfg.synth.n_scenes == 100


class TestValidation:
    def test_unknown_top_level_key(self):
        with pytest.raises(InputFormatError, match="bogus"):
            config_from_dict({"bogus": 1})

    def test_unknown_key_reports_dotted_path(self):
        with pytest.raises(InputFormatError, match=r"synth\.town\.bogus"):
            config_from_dict({"synth": {"town": {"bogus": 1}}})

    def test_multiple_unknown_keys_all_listed(self):
        with pytest.raises(InputFormatError, match=r"matching\.aaa.*matching\.zzz"):
            config_from_dict({"matching": {"zzz": 1, "aaa": 2}})

    def test_section_must_be_mapping(self):
        with pytest.raises(InputFormatError, match="matching"):
            config_from_dict({"matching": [1, 2]})

    def test_invalid_value_rejected_by_dataclass(self):
        with pytest.raises(InvalidArgumentError):
            config_from_dict({"matching": {"stage": "bogus"}})

    def test_matching_validation(self):
        for bad in ({"n_rotations": 0}, {"template_size": 1}, {"stride": 0}, {"workers": 0}):
            with pytest.raises(InvalidArgumentError):
                MatchingConfig(**bad)

    def test_scale_validation(self):
        for bad in (
            {"s_min": 0.0},
            {"s_min": 3.0, "s_max": 2.0},
            {"n_bins": 1},
            {"temperature": 0.0},
            {"coarse_rotations": 0},
        ):
            with pytest.raises(InvalidArgumentError):
                ScaleConfig(**bad)

    def test_synth_validation(self):
        with pytest.raises(InvalidArgumentError):
            SynthConfig(n_scenes=0)


class TestConversion:
    def test_lists_become_tuples(self):
        cfg = config_from_dict({"voxel": {"pillar_size": [4.0, 4.0, 30.0]}})
        assert cfg.voxel.pillar_size == (4.0, 4.0, 30.0)

    def test_nested_lists_become_tuples(self):
        cfg = config_from_dict({"synth": {"augmentation": {"gsd_range": [0.25, 2.0]}}})
        assert cfg.synth.augmentation.gsd_range == (0.25, 2.0)

    def test_to_dict_is_yaml_friendly(self):
        d = config_to_dict(RunConfig())
        assert isinstance(d["voxel"]["pillar_size"], list)
        assert d["matching"]["stage"] == "both"

    def test_dict_round_trip(self):
        cfg = config_from_dict(
            {
                "matching": {"n_rotations": 8, "template_size": 16, "stride": 4, "stage": "features", "workers": 2},
                "scale": {"enabled": False, "s_min": 0.25, "s_max": 8.0, "n_bins": 17, "temperature": 0.1},
                "synth": {
                    "n_scenes": 7,
                    "seed": 42,
                    "town": {"size_m": 240.0, "n_buildings": 10, "n_cars": 2},
                    "lidar": {"n_azimuth": 180, "range_noise_m": 0.0},
                    "augmentation": {"patch_size_px": 128, "gsd_range": [1.0, 2.0], "time_lag": False},
                },
                "voxel": {"max_points_per_voxel": 64},
            }
        )
        again = config_from_dict(config_to_dict(cfg))
        assert again == cfg


class TestYamlFiles:
    def test_save_load_round_trip(self, tmp_path):
        cfg = config_from_dict(
            {
                "matching": {"n_rotations": 32, "stage": "skeleton"},
                "synth": {"augmentation": {"gsd_range": [0.5, 4.0]}},
            }
        )
        path = tmp_path / "run.yaml"
        save_config(cfg, path)
        assert load_config(path) == cfg

    def test_saved_file_is_deterministic(self, tmp_path):
        a, b = tmp_path / "a.yaml", tmp_path / "b.yaml"
        save_config(RunConfig(), a)
        save_config(RunConfig(), b)
        assert a.read_bytes() == b.read_bytes()

    def test_empty_file_gives_defaults(self, tmp_path):
        path = tmp_path / "empty.yaml"
        path.write_text("")
        assert load_config(path) == RunConfig()

    def test_missing_file(self, tmp_path):
        with pytest.raises(InputFormatError, match="missing config"):
            load_config(tmp_path / "nope.yaml")

    def test_malformed_yaml(self, tmp_path):
        path = tmp_path / "bad.yaml"
        path.write_text("matching: [unclosed\n")
        with pytest.raises(InputFormatError):
            load_config(path)

    def test_non_mapping_top_level(self, tmp_path):
        path = tmp_path / "list.yaml"
        path.write_text("- 1\n- 2\n")
        with pytest.raises(InputFormatError, match="mapping"):
            load_config(path)

    def test_unknown_key_in_file(self, tmp_path):
        path = tmp_path / "typo.yaml"
        path.write_text("matching:\n  n_rotation: 8\n")
        with pytest.raises(InputFormatError, match=r"matching\.n_rotation"):
            load_config(path)
