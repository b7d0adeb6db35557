"""Experiment configuration: one JSON document per experiment."""
import json
import logging
import os
from dataclasses import dataclass, field, asdict, fields
from typing import List, Optional

import numpy as np

from config.settings import (
    DEFAULT_LAMBDA_GRID, DEFAULT_LM_SCALE, DEFAULT_NGRAM_ORDER, DEFAULT_SPPL_REALIZATIONS, EMBED_DIM,
    FINETUNE_LR, HIDDEN_DIM, MAX_EPOCHS, MAX_WORKERS, NUM_LAYERS, OUTPUT_DIR, PRETRAIN_BATCH_SIZE, PRETRAIN_LR,
)
from utils.exceptions import ConfigError

logger = logging.getLogger(__name__)


@dataclass
class PathsConfig:
    train: Optional[str] = None
    dev: Optional[str] = None
    eval: Optional[str] = None
    train_sessions: Optional[str] = None
    dev_sessions: Optional[str] = None
    eval_sessions: Optional[str] = None
    train_nbest: Optional[str] = None
    train_refs: Optional[str] = None
    dev_nbest: Optional[str] = None
    dev_refs: Optional[str] = None
    eval_nbest: Optional[str] = None
    eval_refs: Optional[str] = None
    confusion_table: Optional[str] = None
    out_dir: str = OUTPUT_DIR

    def inputs(self):
        return {f.name: getattr(self, f.name) for f in fields(self) if f.name != 'out_dir'}


@dataclass
class ChannelConfig:
    type: str = 'zerogram'
    p_sub: float = 0.0
    p_del: float = 0.0
    p_ins: float = 0.0
    table: Optional[str] = None
    ins_rate: Optional[float] = None

    def validate(self):
        if self.type not in ('zerogram', 'unigram'):
            raise ConfigError(f"unknown channel type {self.type!r}")
        rates = (self.p_sub, self.p_del, self.p_ins)
        if any(r < 0 for r in rates) or sum(rates) > 1.0:
            raise ConfigError(f"channel rates must be non-negative and sum to at most 1, got {rates}")

    def to_channel_dict(self) -> dict:
        data = {k: v for k, v in asdict(self).items() if v is not None}
        return data


@dataclass
class ModelConfig:
    embed_dim: int = EMBED_DIM
    hidden_dim: int = HIDDEN_DIM
    layers: int = NUM_LAYERS
    dropout_rate: float = 0.0
    label_smoothing_eps: float = 0.0

    def to_lstm_config(self, vocab_size: int):
        from models.lstm_lm import LstmConfig
        return LstmConfig(vocab_size=vocab_size, **asdict(self)).validate()


@dataclass
class ScheduleConfig:
    initial_lr: float = PRETRAIN_LR
    max_epochs: int = MAX_EPOCHS
    batch_size: int = PRETRAIN_BATCH_SIZE
    shards: int = 1

    def validate(self, name):
        if self.initial_lr <= 0:
            raise ConfigError(f"{name}.initial_lr must be positive")
        if self.max_epochs < 1 or self.batch_size < 1 or self.shards < 1:
            raise ConfigError(f"{name}: max_epochs, batch_size and shards must be >= 1")


@dataclass
class RescoreGridConfig:
    lambdas: List[float] = field(default_factory=lambda: list(DEFAULT_LAMBDA_GRID))
    lm_scale: float = DEFAULT_LM_SCALE
    carry_state: bool = True

    def validate(self):
        if not self.lambdas:
            raise ConfigError("rescore.lambdas is empty")
        if any(not 0.0 <= lam <= 1.0 for lam in self.lambdas):
            raise ConfigError(f"rescore.lambdas must lie in [0, 1], got {self.lambdas}")
        if self.lm_scale <= 0:
            raise ConfigError("rescore.lm_scale must be positive")


@dataclass
class SeedsConfig:
    init: int = 1
    shuffle: int = 2
    noise: int = 3
    eval: int = 4

    @classmethod
    def from_single(cls, seed: int) -> 'SeedsConfig':
        init, shuffle, noise, eval_ = (int(s) for s in np.random.SeedSequence(seed).generate_state(4))
        return cls(init, shuffle, noise, eval_)


@dataclass
class SynthConfig:
    n_words: int = 200
    n_train: int = 5000
    n_dev: int = 1000
    n_eval: int = 1000
    session_size: int = 20
    nbest_size: int = 10
    branching: int = 6
    mean_length: float = 8.0
    p_sub: float = 0.12
    p_del: float = 0.05
    p_ins: float = 0.03
    acoustic_scale: float = 4.0
    acoustic_noise: float = 4.0
    firstpass_order: int = 2


@dataclass
class ExperimentConfig:
    paths: PathsConfig = field(default_factory=PathsConfig)
    scheme: str = 'baseline'
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    pretrain: ScheduleConfig = field(default_factory=ScheduleConfig)
    finetune: ScheduleConfig = field(default_factory=lambda: ScheduleConfig(initial_lr=FINETUNE_LR, batch_size=1))
    finetune_augment: bool = False
    ngram_order: int = DEFAULT_NGRAM_ORDER
    rescore: RescoreGridConfig = field(default_factory=RescoreGridConfig)
    dropout_grid: List[float] = field(default_factory=lambda: [0.0, 0.1, 0.3, 0.5])
    correlate_rates: List[List[float]] = field(default_factory=lambda: [[0.0, 0.0, 0.0], [0.1, 0.05, 0.02],
                                                                        [0.2, 0.1, 0.05], [0.3, 0.15, 0.08]])
    sppl_realizations: int = DEFAULT_SPPL_REALIZATIONS
    workers: int = MAX_WORKERS
    seeds: SeedsConfig = field(default_factory=SeedsConfig)
    synth: SynthConfig = field(default_factory=SynthConfig)

    _NESTED = {
        'paths': PathsConfig, 'channel': ChannelConfig, 'model': ModelConfig, 'pretrain': ScheduleConfig,
        'finetune': ScheduleConfig, 'rescore': RescoreGridConfig, 'seeds': SeedsConfig, 'synth': SynthConfig,
    }

    @classmethod
    def from_dict(cls, data: dict) -> 'ExperimentConfig':
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kwargs = {}
        for key, value in data.items():
            nested = cls._NESTED.get(key)
            if nested is not None:
                if not isinstance(value, dict):
                    raise ConfigError(f"'{key}' must be an object")
                try:
                    kwargs[key] = nested(**value)
                except TypeError as e:
                    raise ConfigError(f"bad '{key}' section: {e}") from e
            else:
                kwargs[key] = value
        return cls(**kwargs).validate()

    @classmethod
    def load(cls, path: str, check_paths: bool = True) -> 'ExperimentConfig':
        try:
            with open(path, 'r', encoding='utf-8') as f:
                data = json.load(f)
        except FileNotFoundError as e:
            raise ConfigError(f"config file not found: {path}") from e
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: invalid JSON: {e}") from e
        config = cls.from_dict(data)
        if check_paths:
            config.check_paths()
        logger.info(f"Loaded experiment config from {path} (scheme={config.scheme})")
        return config

    def validate(self) -> 'ExperimentConfig':
        from training.schemes import SCHEME_SETTINGS
        if self.scheme not in SCHEME_SETTINGS:
            raise ConfigError(f"unknown scheme {self.scheme!r}; expected one of {sorted(SCHEME_SETTINGS)}")
        self.channel.validate()
        self.pretrain.validate('pretrain')
        self.finetune.validate('finetune')
        self.rescore.validate()
        if self.ngram_order < 1:
            raise ConfigError("ngram_order must be >= 1")
        if any(not 0.0 <= r <= 0.7 for r in self.dropout_grid):
            raise ConfigError(f"dropout_grid values must lie in [0, 0.7], got {self.dropout_grid}")
        if self.sppl_realizations < 1:
            raise ConfigError("sppl_realizations must be >= 1")
        for rates in self.correlate_rates:
            if len(rates) != 3 or any(r < 0 for r in rates) or sum(rates) > 1.0:
                raise ConfigError(f"correlate_rates entries are [p_sub, p_del, p_ins], got {rates}")
        return self

    def check_paths(self):
        missing = [f"{name}={path}" for name, path in self.paths.inputs().items()
                   if path and not os.path.exists(path)]
        if missing:
            raise ConfigError(f"referenced paths do not exist: {', '.join(missing)}")

    def with_seed(self, seed: Optional[int]) -> 'ExperimentConfig':
        if seed is not None:
            self.seeds = SeedsConfig.from_single(seed)
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    def save(self, path: str):
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(self.to_dict(), f, indent=2)
