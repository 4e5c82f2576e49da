"""
MOTIONTOK Run Configuration
INI-style key = value sections with strict key checking, canonical
re-serialization and a provenance hash carried by every artifact.
"""

import os
import hashlib
import logging
import configparser
from typing import Dict, Any, Optional, Sequence, Tuple
from dataclasses import dataclass

import config
from errors import ConfigError
from vgmt.model import VgmtConfig
from vgmt.trainer import TokenizerTrainConfig
from motion_lm.transformer import LmConfig
from motion_lm.trainer import UnifiedTrainConfig
from motion_lm.data import TaskDataConfig
from motion_lm.generation import DecodeConfig

logger = logging.getLogger(__name__)

DATA_SOURCES = ("synthetic", "mskl")


@dataclass(frozen=True)
class Field:
    """One configuration key: type, default and accepted range."""

    kind: type
    default: Any
    lo: Optional[float] = None
    hi: Optional[float] = None
    choices: Tuple[str, ...] = ()

    def parse(self, section: str, key: str, raw: str) -> Any:
        raw = raw.strip()
        where = f"[{section}] {key}"
        try:
            if self.kind is bool:
                value = configparser.ConfigParser.BOOLEAN_STATES[raw.lower()]
            elif self.kind is int:
                value = int(raw)
            elif self.kind is float:
                value = float(raw)
            else:
                value = raw
        except (KeyError, ValueError):
            raise ConfigError(f"{where}: cannot read {raw!r} as {self.kind.__name__}")
        self.check(where, value)
        return value

    def check(self, where: str, value: Any) -> None:
        if self.choices and value not in self.choices:
            raise ConfigError(f"{where}: {value!r} is not one of {', '.join(self.choices)}")
        if self.lo is not None and value < self.lo:
            raise ConfigError(f"{where}: {value} is below {self.lo}")
        if self.hi is not None and value > self.hi:
            raise ConfigError(f"{where}: {value} is above {self.hi}")

    def format(self, value: Any) -> str:
        if self.kind is bool:
            return "true" if value else "false"
        if self.kind is float:
            return repr(float(value))
        return str(value)


# Canonical section and key order
SCHEMA: Dict[str, Dict[str, Field]] = {
    'run': {
        'seed': Field(int, 0, lo=0, hi=2**32 - 1),
        'out_dir': Field(str, ""),                     # empty = $MOTIONTOK_HOME/runs
        'threads': Field(int, 0, lo=0, hi=1024),
    },
    'data': {
        'source': Field(str, "synthetic", choices=DATA_SOURCES),
        'path': Field(str, ""),
        'count': Field(int, 200, lo=1, hi=1_000_000),
        'frames': Field(int, config.LM_CLIP_FRAMES, lo=2, hi=100_000),
        'holdout': Field(float, 0.1, lo=0.0, hi=0.9),
    },
    'vgmt': {
        'num_codes': Field(int, config.CODEBOOK_SIZE, lo=2, hi=65536),
        'half_dim': Field(int, config.CODE_HALF_DIM, lo=1, hi=4096),
        'vsa_heads': Field(int, config.VSA_HEADS, lo=1, hi=64),
        'vsa_points': Field(int, config.VSA_POINTS, lo=1, hi=64),
        'downsample': Field(int, config.DOWNSAMPLE_FACTOR, lo=2, hi=64),
        'stream_mode': Field(str, "fused", choices=config.STREAM_MODES),
        'token_mode': Field(str, "per_joint", choices=config.TOKEN_MODES),
        'use_vsa': Field(bool, True),
        'beta_s': Field(float, config.BETA_S, lo=0.0, hi=100.0),
        'beta_v': Field(float, config.BETA_V, lo=0.0, hi=100.0),
        'beta_commit': Field(float, config.BETA_COMMIT, lo=0.0, hi=100.0),
        'lr': Field(float, config.TOKENIZER_LR, lo=1e-8, hi=1.0),
        'steps': Field(int, config.TOKENIZER_STEPS, lo=1, hi=10_000_000),
        'batch_size': Field(int, config.TOKENIZER_BATCH, lo=1, hi=65536),
        'log_interval': Field(int, config.TOKENIZER_LOG_INTERVAL, lo=1, hi=10_000_000),
    },
    'lm': {
        'layers': Field(int, config.LM_LAYERS, lo=1, hi=128),
        'heads': Field(int, config.LM_HEADS, lo=1, hi=128),
        'dim': Field(int, config.LM_DIM, lo=8, hi=16384),
        'context_length': Field(int, config.LM_CONTEXT_LENGTH, lo=16, hi=65536),
        'dropout': Field(float, config.LM_DROPOUT, lo=0.0, hi=0.9),
        'use_maft': Field(bool, True),
        'visual_dim': Field(int, config.MAFT_DIM, lo=4, hi=8192),
        'maft_heads': Field(int, config.MAFT_HEADS, lo=1, hi=64),
        'maft_ffn_dim': Field(int, config.MAFT_FFN_DIM, lo=4, hi=32768),
        'maft_patches': Field(int, config.MAFT_PATCHES, lo=1, hi=32),
        'lr': Field(float, config.LM_LR, lo=1e-8, hi=1.0),
        'steps': Field(int, config.LM_STEPS, lo=1, hi=10_000_000),
        'batch_size': Field(int, config.LM_BATCH, lo=1, hi=65536),
        'warmup_ratio': Field(float, config.LM_WARMUP_RATIO, lo=0.0, hi=0.99),
        'log_interval': Field(int, config.LM_LOG_INTERVAL, lo=1, hi=10_000_000),
        'reference_noise_px': Field(float, config.REFERENCE_POINT_NOISE_PX, lo=0.0, hi=1000.0),
        'visual_for_generation': Field(bool, False),
    },
    'tasks': {task: Field(float, config.DEFAULT_TASK_MIX[task], lo=0.0, hi=1000.0) for task in config.TASKS},
    'eval': {
        'strict': Field(bool, False),
        'cumulative': Field(bool, True),
        'constrained': Field(bool, True),
        'temperature': Field(float, 0.0, lo=0.0, hi=100.0),
        'top_k': Field(int, 0, lo=0, hi=1_000_000),            # 0 = no top-k filter
        'max_new_tokens': Field(int, 0, lo=0, hi=1_000_000),   # 0 = until the context is full
        'group_by_label': Field(bool, False),
        'cosine_bins': Field(int, config.COSINE_BINS, lo=1, hi=10_000),
        'sphere_joint': Field(int, 0, lo=0, hi=config.NUM_JOINTS - 1),
    },
}


class RunConfig:
    """Validated run configuration; values are read as cfg['section']['key']."""

    def __init__(self, values: Optional[Dict[str, Dict[str, Any]]] = None):
        self.values: Dict[str, Dict[str, Any]] = {
            section: {key: f.default for key, f in fields.items()}
            for section, fields in SCHEMA.items()
        }
        for section, items in (values or {}).items():
            for key, value in items.items():
                self.set(section, key, value)
        self.validate()

    def __getitem__(self, section: str) -> Dict[str, Any]:
        return self.values[section]

    def __eq__(self, other: object) -> bool:
        return isinstance(other, RunConfig) and self.values == other.values

    @staticmethod
    def _field(section: str, key: str) -> Field:
        if section not in SCHEMA:
            raise ConfigError(f"Unknown section [{section}]")
        if key not in SCHEMA[section]:
            raise ConfigError(f"Unknown key {key!r} in [{section}]")
        return SCHEMA[section][key]

    def set(self, section: str, key: str, value: Any) -> None:
        f = self._field(section, key)
        if isinstance(value, str) and f.kind is not str:
            value = f.parse(section, key, value)
        else:
            if f.kind is float and isinstance(value, int) and not isinstance(value, bool):
                value = float(value)
            if not isinstance(value, f.kind) or (f.kind is int and isinstance(value, bool)):
                raise ConfigError(f"[{section}] {key}: expected {f.kind.__name__}, got {value!r}")
            f.check(f"[{section}] {key}", value)
        self.values[section][key] = value

    def validate(self) -> None:
        """Cross-key checks that a single field cannot express."""
        data = self.values['data']
        if data['source'] == "mskl":
            if not data['path']:
                raise ConfigError("[data] source = mskl needs a path")
            if not os.path.isdir(data['path']):
                raise ConfigError(f"[data] path {data['path']!r} does not exist")
        if self.values['vgmt']['downsample'] % 2:
            raise ConfigError(f"[vgmt] downsample must be even, got {self.values['vgmt']['downsample']}")
        lm = self.values['lm']
        if lm['dim'] % lm['heads']:
            raise ConfigError(f"[lm] dim {lm['dim']} is not divisible by heads {lm['heads']}")
        if lm['visual_dim'] % lm['maft_heads']:
            raise ConfigError(f"[lm] visual_dim {lm['visual_dim']} is not divisible by maft_heads {lm['maft_heads']}")
        if sum(self.values['tasks'].values()) <= 0:
            raise ConfigError("[tasks] at least one task needs a positive ratio")

    # ------------------------------------------------------------------
    # Text form
    # ------------------------------------------------------------------

    @classmethod
    def from_text(cls, text: str) -> 'RunConfig':
        parser = configparser.ConfigParser(
            interpolation=None,
            comment_prefixes=('#', ';'),
            inline_comment_prefixes=('#', ';'),
            strict=True,
            default_section="__defaults__",
        )
        parser.optionxform = str  # keys are case-sensitive
        try:
            parser.read_string(text)
        except configparser.Error as e:
            raise ConfigError(f"Cannot parse run configuration: {e}")

        cfg = cls.__new__(cls)
        cfg.values = {s: {k: f.default for k, f in fields.items()} for s, fields in SCHEMA.items()}
        for section in parser.sections():
            for key, raw in parser.items(section, raw=True):
                f = cls._field(section, key)
                cfg.values[section][key] = f.parse(section, key, raw)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path: str) -> 'RunConfig':
        if not os.path.exists(path):
            raise ConfigError(f"Run configuration {path} not found")
        with open(path) as f:
            cfg = cls.from_text(f.read())
        logger.debug(f"Loaded run configuration {path} ({cfg.config_hash()})")
        return cfg

    def to_text(self) -> str:
        """Canonical text: every section and key in schema order."""
        blocks = []
        for section, fields in SCHEMA.items():
            lines = [f"[{section}]"]
            lines += [f"{key} = {f.format(self.values[section][key])}" for key, f in fields.items()]
            blocks.append("\n".join(lines))
        return "\n\n".join(blocks) + "\n"

    def save(self, path: str) -> None:
        with open(path, 'w') as f:
            f.write(self.to_text())

    def config_hash(self) -> str:
        """First 16 hex digits of SHA-256 over the canonical text."""
        return hashlib.sha256(self.to_text().encode('utf-8')).hexdigest()[:16]

    # ------------------------------------------------------------------
    # Overrides
    # ------------------------------------------------------------------

    def with_tasks(self, tasks: Sequence[str]) -> 'RunConfig':
        """Copy whose mixture trains only `tasks` (each with ratio 1)."""
        unknown = set(tasks) - set(config.TASKS)
        if unknown or not tasks:
            raise ConfigError(f"Unknown or empty task list: {', '.join(tasks) or '(none)'}")
        values = {s: dict(v) for s, v in self.values.items()}
        values['tasks'] = {t: (1.0 if t in tasks else 0.0) for t in config.TASKS}
        return RunConfig(values)

    # ------------------------------------------------------------------
    # Component configs
    # ------------------------------------------------------------------

    @property
    def seed(self) -> int:
        return self.values['run']['seed']

    def vgmt_config(self) -> VgmtConfig:
        v = self.values['vgmt']
        return VgmtConfig(
            num_codes=v['num_codes'], half_dim=v['half_dim'],
            vsa_heads=v['vsa_heads'], vsa_points=v['vsa_points'],
            downsample=v['downsample'], stream_mode=v['stream_mode'],
            token_mode=v['token_mode'], use_vsa=v['use_vsa'],
            beta_s=v['beta_s'], beta_v=v['beta_v'], beta_commit=v['beta_commit'],
        )

    def tokenizer_train_config(self) -> TokenizerTrainConfig:
        v = self.values['vgmt']
        return TokenizerTrainConfig(steps=v['steps'], batch_size=v['batch_size'], lr=v['lr'],
                                    log_interval=v['log_interval'], seed=self.seed)

    def lm_config(self, vocab_size: int, vgmt_cfg: Optional[VgmtConfig] = None) -> LmConfig:
        lm = self.values['lm']
        vgmt_cfg = vgmt_cfg or self.vgmt_config()
        return LmConfig(
            vocab_size=vocab_size, layers=lm['layers'], heads=lm['heads'], dim=lm['dim'],
            context_length=lm['context_length'], dropout=lm['dropout'],
            visual_dim=lm['visual_dim'], maft_heads=lm['maft_heads'],
            maft_ffn_dim=lm['maft_ffn_dim'], maft_patches=lm['maft_patches'],
            use_maft=lm['use_maft'], num_joints=vgmt_cfg.num_joints, downsample=vgmt_cfg.downsample,
        )

    def unified_train_config(self) -> UnifiedTrainConfig:
        lm = self.values['lm']
        return UnifiedTrainConfig(
            steps=lm['steps'], batch_size=lm['batch_size'], lr=lm['lr'],
            warmup_ratio=lm['warmup_ratio'], log_interval=lm['log_interval'],
            task_mix=dict(self.values['tasks']), seed=self.seed,
        )

    def task_data_config(self) -> TaskDataConfig:
        lm = self.values['lm']
        # MP splits each clip into history and future halves
        frames = self.values['data']['frames'] // 2
        if frames % self.values['vgmt']['downsample']:
            raise ConfigError(
                f"[data] frames {self.values['data']['frames']} must be twice a multiple of "
                f"downsample {self.values['vgmt']['downsample']}"
            )
        return TaskDataConfig(frames=frames,
                              reference_noise_px=lm['reference_noise_px'],
                              visual_for_generation=lm['visual_for_generation'],
                              seed=self.seed)

    def decode_config(self) -> DecodeConfig:
        e = self.values['eval']
        return DecodeConfig(
            max_new_tokens=e['max_new_tokens'] or None,
            temperature=e['temperature'],
            top_k=e['top_k'] or None,
            constrained=e['constrained'],
            seed=self.seed,
        )
