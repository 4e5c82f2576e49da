"""
Tests for the MOTIONTOK run configuration.
"""

import pytest
import sys
import os
import tempfile

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from runconfig import RunConfig, SCHEMA
from errors import ConfigError, MotionTokError
import config


class TestDefaults:
    """Test the default configuration."""

    def test_every_key_has_a_default(self):
        """Test that the default config covers the whole schema."""
        cfg = RunConfig()
        for section, fields in SCHEMA.items():
            assert set(cfg[section]) == set(fields)

    def test_component_defaults(self):
        """Test that component configs receive the documented constants."""
        cfg = RunConfig()
        vgmt = cfg.vgmt_config()
        assert vgmt.num_codes == config.CODEBOOK_SIZE
        assert vgmt.half_dim == config.CODE_HALF_DIM
        assert vgmt.downsample == config.DOWNSAMPLE_FACTOR
        lm = cfg.lm_config(vocab_size=300)
        assert lm.vocab_size == 300
        assert lm.num_joints == config.NUM_JOINTS

    def test_task_data_frames(self):
        """Test that each task sample covers half a data clip."""
        assert RunConfig().task_data_config().frames == config.LM_CLIP_FRAMES // 2
        cfg = RunConfig({'data': {'frames': 18}})
        with pytest.raises(ConfigError):
            cfg.task_data_config()

    def test_decode_zero_means_unset(self):
        """Test that top_k = 0 and max_new_tokens = 0 disable the limits."""
        decode = RunConfig().decode_config()
        assert decode.top_k is None
        assert decode.max_new_tokens is None
        assert decode.constrained


class TestTextForm:
    """Test INI parsing and canonical text."""

    def test_round_trip(self):
        """Test that canonical text parses back to an equal config."""
        cfg = RunConfig({'run': {'seed': 7}, 'vgmt': {'use_vsa': False, 'beta_v': 0.5}})
        restored = RunConfig.from_text(cfg.to_text())
        assert restored == cfg
        assert restored.config_hash() == cfg.config_hash()

    def test_hash_format_and_sensitivity(self):
        """Test a 16-hex-digit hash that follows the values."""
        a = RunConfig()
        b = RunConfig({'run': {'seed': 1}})
        assert len(a.config_hash()) == 16
        int(a.config_hash(), 16)
        assert a.config_hash() != b.config_hash()

    def test_partial_file_and_comments(self):
        """Test that omitted keys keep defaults and comments are ignored."""
        text = "[vgmt]\nnum_codes = 64   # smaller codebook\nuse_vsa = no\n; note\n[tasks]\npe = 0\n"
        cfg = RunConfig.from_text(text)
        assert cfg['vgmt']['num_codes'] == 64
        assert cfg['vgmt']['use_vsa'] is False
        assert cfg['tasks']['pe'] == 0.0
        assert cfg['lm']['layers'] == config.LM_LAYERS

    def test_save_and_load(self):
        """Test file round trip."""
        cfg = RunConfig({'data': {'count': 12}})
        with tempfile.TemporaryDirectory() as tmpdir:
            path = os.path.join(tmpdir, "run.ini")
            cfg.save(path)
            assert RunConfig.load(path) == cfg
            with pytest.raises(ConfigError):
                RunConfig.load(os.path.join(tmpdir, "missing.ini"))


class TestValidation:
    """Test rejection of bad configurations."""

    @pytest.mark.parametrize("text", [
        "[run]\nbogus = 1\n",
        "[nowhere]\nseed = 1\n",
        "[run]\nseed = -1\n",
        "[run]\nseed = lots\n",
        "[vgmt]\nstream_mode = both\n",
        "[vgmt]\nuse_vsa = maybe\n",
        "[vgmt]\ndownsample = 3\n",
        "[lm]\ndim = 30\nheads = 4\n",
        "[tasks]\npe = 0\nmp = 0\nmib = 0\n",
        "[data]\nsource = mskl\n",
        "not an ini file",
    ])
    def test_rejected(self, text):
        """Test that the text raises ConfigError with exit code 2."""
        with pytest.raises(ConfigError) as info:
            RunConfig.from_text(text)
        assert info.value.exit_code == MotionTokError.EXIT_CONFIG

    def test_typed_values(self):
        """Test programmatic values are type-checked."""
        with pytest.raises(ConfigError):
            RunConfig({'run': {'seed': True}})
        with pytest.raises(ConfigError):
            RunConfig({'lm': {'dropout': "high"}})
        assert RunConfig({'lm': {'dropout': 0}})['lm']['dropout'] == 0.0

    def test_missing_data_path(self):
        """Test that an MSKL source must point at a directory."""
        with pytest.raises(ConfigError):
            RunConfig({'data': {'source': "mskl", 'path': "/nonexistent/motiontok"}})


class TestTaskOverride:
    """Test single-task mixtures."""

    def test_with_tasks(self):
        """Test that listed tasks get ratio 1 and the rest 0."""
        cfg = RunConfig().with_tasks(["mp"])
        assert cfg['tasks'] == {'pe': 0.0, 'mp': 1.0, 'mib': 0.0}

    def test_unknown_task(self):
        """Test that unknown or empty task lists are rejected."""
        with pytest.raises(ConfigError):
            RunConfig().with_tasks(["dance"])
        with pytest.raises(ConfigError):
            RunConfig().with_tasks([])


class TestFullScale:
    """Test the published-size overrides."""

    def test_overrides_are_valid(self):
        """Test that the overrides load and reach the component configs."""
        cfg = RunConfig(config.full_scale_overrides())
        assert cfg.vgmt_config().num_codes == config.FULL_SCALE_CODEBOOK_SIZE
        lm = cfg.lm_config(vocab_size=cfg['vgmt']['num_codes'] + 100)
        assert lm.visual_dim == config.FULL_SCALE_MAFT_DIM
        assert lm.maft_heads == config.FULL_SCALE_MAFT_HEADS

    def test_horizon_table(self):
        """Test the report keys of the prediction horizons."""
        assert config.horizon_table() == {'ms80': 80, 'ms160': 160, 'ms320': 320}
